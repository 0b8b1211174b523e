#pragma once

// Strict JSON mapping for the configuration structs. Internal to the library.

#include <nlohmann/json.hpp>

#include <set>
#include <string>
#include <type_traits>
#include <vector>

#include "vaerl/env.hpp"
#include "vaerl/errors.hpp"
#include "vaerl/managers.hpp"
#include "vaerl/vae.hpp"

namespace vaerl::detail {

using json = nlohmann::ordered_json;

// Reads known keys from an object and rejects everything else on finish().
class StrictReader {
 public:
  StrictReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_, "expected an object");
  }

  std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  const json& at(const std::string& key) const { return j_.at(key); }

  template <typename T>
  void get(const std::string& key, T& out) {
    if (!has(key)) return;
    out = convert<T>(j_.at(key), key_path(key));
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(key_path(it.key()), "unknown key");
  }

  template <typename T>
  static T convert(const json& v, const std::string& path) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(path, "expected a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T>) {
      if (!v.is_number_unsigned()) throw ConfigError(path, "expected a non-negative integer");
      return v.get<T>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError(path, "expected an integer");
      return v.get<T>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(path, "expected a number");
      return v.get<T>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(path, "expected a string");
      return v.get<std::string>();
    } else {
      if (!v.is_array()) throw ConfigError(path, "expected an array");
      T out;
      for (std::size_t i = 0; i < v.size(); ++i)
        out.push_back(convert<typename T::value_type>(v[i], path + "[" + std::to_string(i) + "]"));
      return out;
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline json env_to_json(const env::EnvConfig& c) {
  json j;
  j["n_agents"] = c.n_agents;
  j["n_landmarks"] = c.n_landmarks;
  j["vision_ranges"] = c.vision_ranges;
  j["world_half_width"] = c.world_half_width;
  j["link_cost"] = c.link_cost;
  j["cost_weight"] = c.cost_weight;
  j["horizon"] = c.horizon;
  j["collision_radius"] = c.collision_radius;
  j["collision_penalty"] = c.collision_penalty;
  j["dt"] = c.dt;
  j["damping"] = c.damping;
  j["max_speed"] = c.max_speed;
  j["max_force"] = c.max_force;
  j["position_limit"] = c.position_limit;
  j["seed"] = c.seed;
  return j;
}

inline void env_from_json(const json& j, env::EnvConfig& c, const std::string& path) {
  StrictReader r(j, path);
  r.get("n_agents", c.n_agents);
  r.get("n_landmarks", c.n_landmarks);
  r.get("vision_ranges", c.vision_ranges);
  r.get("world_half_width", c.world_half_width);
  r.get("link_cost", c.link_cost);
  r.get("cost_weight", c.cost_weight);
  r.get("horizon", c.horizon);
  r.get("collision_radius", c.collision_radius);
  r.get("collision_penalty", c.collision_penalty);
  r.get("dt", c.dt);
  r.get("damping", c.damping);
  r.get("max_speed", c.max_speed);
  r.get("max_force", c.max_force);
  r.get("position_limit", c.position_limit);
  r.get("seed", c.seed);
  r.finish();
}

inline json manager_to_json(const managers::ManagerConfig& c) {
  json j;
  j["kind"] = managers::to_string(c.kind);
  j["episodes"] = c.episodes;
  j["gamma"] = c.gamma;
  j["replay_capacity"] = c.replay_capacity;
  j["batch_size"] = c.batch_size;
  j["warmup"] = c.warmup;
  j["update_every"] = c.update_every;
  j["tau"] = c.tau;
  j["target_sync"] = c.target_sync;
  j["epsilon_start"] = c.epsilon_start;
  j["epsilon_end"] = c.epsilon_end;
  j["sigma_start"] = c.sigma_start;
  j["sigma_end"] = c.sigma_end;
  j["decay_fraction"] = c.decay_fraction;
  j["actor_lr"] = c.actor_lr;
  j["critic_lr"] = c.critic_lr;
  j["q_lr"] = c.q_lr;
  j["reward_scale"] = c.reward_scale;
  j["latent_bound"] = c.latent_bound;
  j["actor_hidden"] = c.actor_hidden;
  j["critic_hidden"] = c.critic_hidden;
  j["q_hidden"] = c.q_hidden;
  j["seed"] = c.seed;
  return j;
}

inline void manager_from_json(const json& j, managers::ManagerConfig& c, const std::string& path) {
  StrictReader r(j, path);
  if (r.has("kind")) {
    const auto s = StrictReader::convert<std::string>(r.at("kind"), r.key_path("kind"));
    try {
      c.kind = managers::manager_kind_from_string(s);
    } catch (const InvalidArgument& e) {
      throw ConfigError(r.key_path("kind"), e.what());
    }
  }
  r.get("episodes", c.episodes);
  r.get("gamma", c.gamma);
  r.get("replay_capacity", c.replay_capacity);
  r.get("batch_size", c.batch_size);
  r.get("warmup", c.warmup);
  r.get("update_every", c.update_every);
  r.get("tau", c.tau);
  r.get("target_sync", c.target_sync);
  r.get("epsilon_start", c.epsilon_start);
  r.get("epsilon_end", c.epsilon_end);
  r.get("sigma_start", c.sigma_start);
  r.get("sigma_end", c.sigma_end);
  r.get("decay_fraction", c.decay_fraction);
  r.get("actor_lr", c.actor_lr);
  r.get("critic_lr", c.critic_lr);
  r.get("q_lr", c.q_lr);
  r.get("reward_scale", c.reward_scale);
  r.get("latent_bound", c.latent_bound);
  r.get("actor_hidden", c.actor_hidden);
  r.get("critic_hidden", c.critic_hidden);
  r.get("q_hidden", c.q_hidden);
  r.get("seed", c.seed);
  r.finish();
}

}  // namespace vaerl::detail
