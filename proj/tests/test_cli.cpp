#include <filesystem>
#include <sstream>

#include "cli.hpp"
#include "doctest.h"
#include "vaerl/io.hpp"

namespace fs = std::filesystem;
using vaerl::cli::run;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result call(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("vaerl_test_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string write_config(const fs::path& dir, const std::string& text) {
  const auto path = (dir / "run.json").string();
  vaerl::io::write_file_atomic(path, text);
  return path;
}

const char* kTiny = R"({"manager": {"episodes": 12, "warmup": 100, "batch_size": 32}, "eval": {"episodes": 4}})";

}  // namespace

TEST_CASE("toy prints the networks and the degree row") {
  const auto r = call({"toy"});
  CHECK(r.code == 0);
  CHECK(r.out.find("0-1 0-2 1-2") != std::string::npos);
  CHECK(r.out.find("degree                 1.25       0.75          1") != std::string::npos);
  CHECK(r.out.find("betweenness rank: agent2 > agent0.5 > agent1") != std::string::npos);
  const auto j = call({"toy", "--json"});
  CHECK(j.code == 0);
  CHECK(j.out.find("\"average_degree\"") != std::string::npos);
}

TEST_CASE("usage and config errors exit 2") {
  const auto dir = scratch("errors");
  const auto missing = (dir / "absent.json").string();
  auto r = call({"--config", missing, "eval"});
  CHECK(r.code == 2);
  CHECK(r.err.find(missing) != std::string::npos);

  r = call({"--config", write_config(dir, R"({"manager": {"episdes": 5}})"), "eval"});
  CHECK(r.code == 2);
  CHECK(r.err.find("manager.episdes") != std::string::npos);

  CHECK(call({"--frobnicate", "eval"}).code == 2);
  CHECK(call({}).code == 2);
  CHECK(call({"--profile", "huge", "toy"}).code == 2);
  CHECK(call({"eval", "--kind", "ppo"}).code == 2);
  CHECK(call({"--help"}).code == 0);

  r = call({"--config", write_config(dir, R"({"profile": "paper"})"), "--profile", "desk", "eval"});
  CHECK(r.code == 2);
  CHECK(r.err.find("profile") != std::string::npos);

  r = call({"--profile", "paper", "train-manager", "--kind", "flat_dqn", "--out", (dir / "o").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("manager.kind") != std::string::npos);
}

TEST_CASE("missing prerequisites exit 3") {
  const auto dir = scratch("missing");
  const auto cfg = write_config(dir, kTiny);
  const auto out = (dir / "o").string();
  auto r = call({"--config", cfg, "--out", out, "train-manager"});
  CHECK(r.code == 3);
  CHECK(r.err.find("train-vae") != std::string::npos);
  CHECK(call({"--config", cfg, "--out", out, "train-vae"}).code == 3);
  CHECK(call({"--config", cfg, "--out", out, "eval", "--kind", "bdqn"}).code == 3);
  CHECK(call({"--config", cfg, "--out", out, "analyze"}).code == 3);
  CHECK_FALSE(fs::exists(dir / "o" / "manifests"));
}

TEST_CASE("pipeline: outputs, manifests, no overwrites, byte-identical eval") {
  const auto dir = scratch("pipeline");
  const auto cfg = write_config(dir, kTiny);
  const auto a = (dir / "a").string();
  REQUIRE(call({"--config", cfg, "--out", a, "gen-dataset"}).code == 0);
  REQUIRE(call({"--config", cfg, "--out", a, "train-vae"}).code == 0);
  const auto trained = call({"--config", cfg, "--out", a, "train-manager"});
  REQUIRE(trained.code == 0);
  CHECK(trained.err.find("config_hash=") != std::string::npos);
  CHECK(trained.err.find("vaerl 0.1.0") != std::string::npos);

  // Second attempt refuses to replace the checkpoint.
  const auto again = call({"--config", cfg, "--out", a, "train-manager"});
  CHECK(again.code == 1);
  CHECK(again.err.find("already exists") != std::string::npos);

  const auto b = (dir / "b").string();
  fs::create_directories(b);
  fs::copy(fs::path(a) / "checkpoints", fs::path(b) / "checkpoints", fs::copy_options::recursive);
  REQUIRE(call({"--config", cfg, "--out", a, "eval"}).code == 0);
  REQUIRE(call({"--config", cfg, "--out", b, "eval"}).code == 0);
  for (const auto* file : {"traces/eval_vae_rl.jsonl", "metrics/eval_vae_rl.json", "metrics/summary_vae_rl.csv",
                           "manifests/eval_vae_rl.json"}) {
    CAPTURE(file);
    CHECK(vaerl::io::read_file((fs::path(a) / file).string()) == vaerl::io::read_file((fs::path(b) / file).string()));
  }
  CHECK(call({"--config", cfg, "--out", a, "eval"}).code == 1);

  // A different seed gives different traces and a different config hash.
  const auto c = (dir / "c").string();
  fs::create_directories(c);
  fs::copy(fs::path(a) / "checkpoints", fs::path(c) / "checkpoints", fs::copy_options::recursive);
  REQUIRE(call({"--config", cfg, "--out", c, "--seed", "5", "eval"}).code == 0);
  CHECK(vaerl::io::read_file(a + "/traces/eval_vae_rl.jsonl") != vaerl::io::read_file(c + "/traces/eval_vae_rl.jsonl"));
  const auto manifest_a = vaerl::io::read_file(a + "/manifests/eval_vae_rl.json");
  const auto manifest_c = vaerl::io::read_file(c + "/manifests/eval_vae_rl.json");
  CHECK(manifest_a.substr(0, 120) != manifest_c.substr(0, 120));

  REQUIRE(call({"--config", cfg, "--out", a, "eval", "--kind", "random"}).code == 0);
  const auto analyzed = call({"--config", cfg, "--out", a, "analyze"});
  REQUIRE(analyzed.code == 0);
  const auto summary = vaerl::io::read_file(a + "/metrics/summary.csv");
  CHECK(summary.rfind("method,scenario,mean_return,stderr,mean_perf,mean_cost\nrandom,n4_v1,", 0) == 0);
  CHECK(summary.find("\nvae_rl,n4_v1,") != std::string::npos);
  CHECK(vaerl::io::read_file(a + "/metrics/density_vae_rl.csv").rfind("t,frac_sparse,frac_mid,frac_dense,frac_very\n", 0) == 0);
  CHECK(vaerl::io::read_file(a + "/metrics/centrality_random.csv").rfind("t,group_vision,mean_degree,mean_betweenness\n", 0) == 0);
  CHECK(vaerl::io::read_file(a + "/metrics/analysis.json").find("\"vs_random\"") != std::string::npos);

  // A single exported episode matches the same episode inside the evaluation traces.
  REQUIRE(call({"--config", cfg, "--out", a, "trace", "--episode", "2"}).code == 0);
  const auto all = vaerl::io::read_file(a + "/traces/eval_vae_rl.jsonl");
  const auto one = vaerl::io::read_file(a + "/traces/trace_vae_rl_ep2.jsonl");
  CHECK(all.find(one) != std::string::npos);

  const auto manifest = vaerl::io::read_file(a + "/manifests/train-vae.json");
  CHECK(manifest.find("\"checkpoints/vae/decoder.ckpt\"") != std::string::npos);
  CHECK(manifest.find("\"config_hash\"") != std::string::npos);
}

TEST_CASE("shipped profile files match the built-in profiles") {
  for (const std::string profile : {"desk", "paper"}) {
    CAPTURE(profile);
    const auto r = call({"--profile", profile, "config"});
    REQUIRE(r.code == 0);
    const auto path = std::string(VAERL_SOURCE_DIR) + "/configs/" + profile + ".json";
    CHECK(r.out == vaerl::io::read_file(path));
    // Loading the shipped file reproduces the same resolved config.
    CHECK(call({"--config", path, "config"}).out == r.out);
  }
}
