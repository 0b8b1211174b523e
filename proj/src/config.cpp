#include "vaerl/config.hpp"

#include <filesystem>

#include "json_sections.hpp"
#include "vaerl/errors.hpp"
#include "vaerl/io.hpp"

namespace vaerl::config {

using detail::json;
using detail::StrictReader;

std::string to_string(Profile p) { return p == Profile::desk ? "desk" : "paper"; }

Profile profile_from_string(std::string_view s) {
  if (s == "desk") return Profile::desk;
  if (s == "paper") return Profile::paper;
  throw ConfigError("profile", "unknown profile '" + std::string(s) + "' (expected desk or paper)");
}

void RunConfig::set_seed(std::uint64_t seed) {
  env.seed = seed;
  vae.train.seed = seed;
  manager.seed = seed;
  eval.seed = seed;
}

namespace {

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError(key, what);
}

void require_layers(const std::vector<int>& layers, const std::string& key) {
  require(!layers.empty(), key, "needs at least one hidden layer");
  for (int w : layers) require(w > 0, key, "layer widths must be positive");
}

}  // namespace

void RunConfig::validate() const {
  profile_from_string(profile);
  try {
    env.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError("env", e.what());
  }

  const auto& t = vae.train;
  require(t.latent_dim >= 1, "vae.latent_dim", "must be >= 1");
  require_layers(t.encoder_hidden, "vae.encoder_hidden");
  require_layers(t.decoder_hidden, "vae.decoder_hidden");
  require(t.epochs >= 1, "vae.epochs", "must be >= 1");
  require(t.batch_size >= 1, "vae.batch_size", "must be >= 1");
  require(t.learning_rate > 0, "vae.learning_rate", "must be > 0");
  require(t.beta >= 0, "vae.beta", "must be >= 0");
  require(t.train_fraction > 0 && t.train_fraction <= 1, "vae.train_fraction", "must lie in (0, 1]");
  require(vae.scheme == "enumerate" || vae.scheme == "sample", "vae.scheme", "expected enumerate or sample");
  require(vae.scheme != "enumerate" || graph::link_slots(env.n_agents) <= 20, "vae.scheme",
          "enumerate is limited to 20 link slots; use sample");
  require(vae.samples >= 1, "vae.samples", "must be >= 1");

  const auto& m = manager;
  require(m.episodes >= 0, "manager.episodes", "must be >= 0");
  require(m.gamma >= 0 && m.gamma <= 1, "manager.gamma", "must lie in [0, 1]");
  require(m.batch_size >= 1, "manager.batch_size", "must be >= 1");
  require(m.replay_capacity >= static_cast<std::size_t>(m.batch_size), "manager.replay_capacity",
          "must hold at least one batch");
  require(m.warmup >= 0, "manager.warmup", "must be >= 0");
  require(m.update_every >= 1, "manager.update_every", "must be >= 1");
  require(m.tau > 0 && m.tau <= 1, "manager.tau", "must lie in (0, 1]");
  require(m.target_sync >= 1, "manager.target_sync", "must be >= 1");
  require(m.decay_fraction > 0 && m.decay_fraction <= 1, "manager.decay_fraction", "must lie in (0, 1]");
  require(m.epsilon_start >= 0 && m.epsilon_start <= 1, "manager.epsilon_start", "must lie in [0, 1]");
  require(m.epsilon_end >= 0 && m.epsilon_end <= 1, "manager.epsilon_end", "must lie in [0, 1]");
  require(m.sigma_start >= 0, "manager.sigma_start", "must be >= 0");
  require(m.sigma_end >= 0, "manager.sigma_end", "must be >= 0");
  require(m.actor_lr > 0, "manager.actor_lr", "must be > 0");
  require(m.critic_lr > 0, "manager.critic_lr", "must be > 0");
  require(m.q_lr > 0, "manager.q_lr", "must be > 0");
  require(m.reward_scale > 0, "manager.reward_scale", "must be > 0");
  require(m.latent_bound > 0, "manager.latent_bound", "must be > 0");
  require_layers(m.actor_hidden, "manager.actor_hidden");
  require_layers(m.critic_hidden, "manager.critic_hidden");
  require_layers(m.q_hidden, "manager.q_hidden");
  require(m.kind != managers::ManagerKind::flat_dqn || graph::link_slots(env.n_agents) <= 20, "manager.kind",
          "flat_dqn needs 2^L outputs and is refused above 20 link slots (n = " + std::to_string(env.n_agents) + ")");

  require(eval.episodes >= 1, "eval.episodes", "must be >= 1");
  require(!paths.checkpoints.empty(), "paths.checkpoints", "must not be empty");
  require(!paths.traces.empty(), "paths.traces", "must not be empty");
  require(!paths.metrics.empty(), "paths.metrics", "must not be empty");
}

RunConfig desk_profile() {
  RunConfig c;
  c.profile = "desk";
  c.env = env::EnvConfig::homogeneous(4, 1.0);

  // beta 0.5: at beta 1 the posterior collapses on the uniform 64-topology set.
  c.vae.train.latent_dim = 6;
  c.vae.train.epochs = 500;
  c.vae.train.beta = 0.5;
  c.vae.scheme = "enumerate";

  c.manager.episodes = 2000;
  c.manager.batch_size = 64;
  c.manager.reward_scale = 0.1;
  c.manager.actor_hidden = {128, 64};
  c.manager.critic_hidden = {128, 64, 32};
  c.manager.q_hidden = {128, 64, 32};

  c.eval.episodes = 100;
  return c;
}

RunConfig paper_profile() {
  RunConfig c;
  c.profile = "paper";
  c.env = env::EnvConfig::homogeneous(10, 1.0);
  c.env.vision_ranges = {2, 1, 1, 1, 0.5, 0.5, 0.5, 0, 0, 0};

  c.vae.train.latent_dim = 10;
  c.vae.train.epochs = 200;
  c.vae.train.beta = 1.0;
  c.vae.scheme = "sample";
  c.vae.samples = 20000;

  c.manager.episodes = 20000;  // ManagerConfig defaults carry the published sizes
  c.eval.episodes = 1000;
  return c;
}

RunConfig make_profile(Profile p) { return p == Profile::desk ? desk_profile() : paper_profile(); }

namespace {

json vae_to_json(const VaeSection& v) {
  json j;
  j["latent_dim"] = v.train.latent_dim;
  j["encoder_hidden"] = v.train.encoder_hidden;
  j["decoder_hidden"] = v.train.decoder_hidden;
  j["epochs"] = v.train.epochs;
  j["batch_size"] = v.train.batch_size;
  j["learning_rate"] = v.train.learning_rate;
  j["beta"] = v.train.beta;
  j["train_fraction"] = v.train.train_fraction;
  j["seed"] = v.train.seed;
  j["dataset"] = v.dataset;
  j["scheme"] = v.scheme;
  j["samples"] = v.samples;
  return j;
}

void vae_from_json(const json& j, VaeSection& v) {
  StrictReader r(j, "vae");
  r.get("latent_dim", v.train.latent_dim);
  r.get("encoder_hidden", v.train.encoder_hidden);
  r.get("decoder_hidden", v.train.decoder_hidden);
  r.get("epochs", v.train.epochs);
  r.get("batch_size", v.train.batch_size);
  r.get("learning_rate", v.train.learning_rate);
  r.get("beta", v.train.beta);
  r.get("train_fraction", v.train.train_fraction);
  r.get("seed", v.train.seed);
  r.get("dataset", v.dataset);
  r.get("scheme", v.scheme);
  r.get("samples", v.samples);
  r.finish();
}

json to_json_value(const RunConfig& c) {
  json j;
  j["profile"] = c.profile;
  j["env"] = detail::env_to_json(c.env);
  j["vae"] = vae_to_json(c.vae);
  j["manager"] = detail::manager_to_json(c.manager);
  j["eval"] = json{{"episodes", c.eval.episodes}, {"seed", c.eval.seed}};
  j["paths"] = json{{"checkpoints", c.paths.checkpoints}, {"traces", c.paths.traces}, {"metrics", c.paths.metrics}};
  return j;
}

json parse_document(std::string_view text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(source, std::string("invalid JSON: ") + e.what());
  }
}

void apply_document(const json& j, RunConfig& c) {
  StrictReader r(j, "");
  if (r.has("profile")) {
    const auto p = StrictReader::convert<std::string>(r.at("profile"), "profile");
    profile_from_string(p);
    if (p != c.profile)
      throw ConfigError("profile", "document asks for '" + p + "' but the run uses '" + c.profile + "'");
  }
  if (r.has("env")) {
    // A new agent count without explicit vision ranges keeps the first range for everyone.
    const auto& e = r.at("env");
    const int old_n = c.env.n_agents;
    detail::env_from_json(e, c.env, "env");
    if (c.env.n_agents != old_n) {
      if (!e.contains("n_landmarks")) c.env.n_landmarks = c.env.n_agents;
      if (!e.contains("vision_ranges") && !c.env.vision_ranges.empty() && c.env.n_agents > 0)
        c.env.vision_ranges.assign(static_cast<std::size_t>(c.env.n_agents), c.env.vision_ranges.front());
    }
  }
  if (r.has("vae")) vae_from_json(r.at("vae"), c.vae);
  if (r.has("manager")) detail::manager_from_json(r.at("manager"), c.manager, "manager");
  if (r.has("eval")) {
    StrictReader e(r.at("eval"), "eval");
    e.get("episodes", c.eval.episodes);
    e.get("seed", c.eval.seed);
    e.finish();
  }
  if (r.has("paths")) {
    StrictReader p(r.at("paths"), "paths");
    p.get("checkpoints", c.paths.checkpoints);
    p.get("traces", c.paths.traces);
    p.get("metrics", c.paths.metrics);
    p.finish();
  }
  r.finish();
}

}  // namespace

RunConfig apply_overrides(RunConfig base, std::string_view json_text, const std::string& source) {
  apply_document(parse_document(json_text, source), base);
  base.validate();
  return base;
}

RunConfig parse_run_config(std::string_view json_text, Profile fallback, const std::string& source) {
  const json j = parse_document(json_text, source);
  Profile p = fallback;
  if (j.is_object() && j.contains("profile")) {
    p = profile_from_string(StrictReader::convert<std::string>(j.at("profile"), "profile"));
  }
  RunConfig c = make_profile(p);
  apply_document(j, c);
  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path, Profile fallback) {
  if (!std::filesystem::is_regular_file(path)) throw ConfigError(path, "config file not found");
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const std::exception& e) {
    throw ConfigError(path, std::string("cannot read config file: ") + e.what());
  }
  return parse_run_config(text, fallback, path);
}

std::string to_json(const RunConfig& c, int indent) { return to_json_value(c).dump(indent); }

std::string config_hash(const RunConfig& c) { return io::fnv1a_hex(to_json_value(c).dump()); }

}  // namespace vaerl::config
