#pragma once

// Run configuration shared by every CLI subcommand. A run starts from a
// profile (desk or paper), then a JSON document overrides any subset of keys.
// Unknown keys are rejected with their dotted path.

#include <cstdint>
#include <string>
#include <string_view>

#include "vaerl/env.hpp"
#include "vaerl/managers.hpp"
#include "vaerl/vae.hpp"

namespace vaerl::config {

inline constexpr std::string_view version = "0.1.0";

struct VaeSection {
  vae::TrainConfig train;
  std::string dataset;           // path to a dataset file; empty means <checkpoints>/dataset.txt
  std::string scheme = "enumerate";  // gen-dataset: "enumerate" or "sample"
  std::size_t samples = 20000;   // gen-dataset with scheme "sample"
};

struct EvalSection {
  int episodes = 100;
  std::uint64_t seed = 0;
};

// Directories are relative to the --out directory unless absolute.
struct PathsSection {
  std::string checkpoints = "checkpoints";
  std::string traces = "traces";
  std::string metrics = "metrics";
};

enum class Profile { desk, paper };
std::string to_string(Profile p);
Profile profile_from_string(std::string_view s);  // throws ConfigError

struct RunConfig {
  std::string profile = "desk";
  env::EnvConfig env;
  VaeSection vae;
  managers::ManagerConfig manager;
  EvalSection eval;
  PathsSection paths;

  // Sets the seed of every section.
  void set_seed(std::uint64_t seed);
  // Throws ConfigError naming the offending key.
  void validate() const;
};

// n = 4, vision 1.0, small networks; sized for minutes on one CPU.
RunConfig desk_profile();
// n = 10 with heterogeneous vision, the published network sizes and budgets.
RunConfig paper_profile();
RunConfig make_profile(Profile p);

// Applies the keys present in `json_text` on top of `base`. A top-level
// "profile" key is only accepted when it names the profile of `base`.
RunConfig apply_overrides(RunConfig base, std::string_view json_text, const std::string& source = "config");

// Profile from the document's "profile" key (or `fallback`), then overrides.
RunConfig parse_run_config(std::string_view json_text, Profile fallback = Profile::desk,
                           const std::string& source = "config");

// Throws ConfigError (key path = `path`) when the file is missing or unreadable.
RunConfig load_run_config(const std::string& path, Profile fallback = Profile::desk);

// Canonical JSON of every key, in a fixed order.
std::string to_json(const RunConfig& c, int indent = 2);

// FNV-1a 64 of the compact canonical JSON.
std::string config_hash(const RunConfig& c);

}  // namespace vaerl::config
