#include "vaerl/env.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vaerl/errors.hpp"

namespace vaerl::env {

namespace {

const std::shared_ptr<const WorkerPolicy>& default_worker() {
  static const std::shared_ptr<const WorkerPolicy> w = std::make_shared<GreedyWorker>();
  return w;
}

Vec2 clip_norm(const Vec2& v, double limit) {
  const double n = v.norm();
  return (n > limit && n > 0) ? Vec2(v * (limit / n)) : v;
}

}  // namespace

EnvConfig EnvConfig::homogeneous(int n, double vision) {
  EnvConfig c;
  c.n_agents = n;
  c.n_landmarks = n;
  c.vision_ranges.assign(static_cast<std::size_t>(n), vision);
  return c;
}

void EnvConfig::validate() const {
  if (n_agents < 1) throw InvalidArgument("n_agents must be at least 1");
  if (n_landmarks != n_agents) throw InvalidArgument("n_landmarks must equal n_agents");
  if (static_cast<int>(vision_ranges.size()) != n_agents)
    throw InvalidArgument("vision_ranges needs one entry per agent (" + std::to_string(n_agents) + "), got " +
                          std::to_string(vision_ranges.size()));
  for (double v : vision_ranges)
    if (!(v >= 0)) throw InvalidArgument("vision ranges must be >= 0");
  if (horizon < 1) throw InvalidArgument("horizon must be >= 1");
  if (!(link_cost >= 0)) throw InvalidArgument("link_cost must be >= 0");
  if (!(world_half_width > 0)) throw InvalidArgument("world_half_width must be > 0");
  if (!(dt > 0) || !(damping >= 0 && damping <= 1) || !(max_speed > 0) || !(max_force >= 0))
    throw InvalidArgument("invalid physics constants");
  if (!(collision_radius >= 0) || !(collision_penalty >= 0)) throw InvalidArgument("invalid collision settings");
  if (!(position_limit >= world_half_width)) throw InvalidArgument("position_limit must cover the start square");
}

WorldState random_world(const EnvConfig& config, std::uint64_t episode_seed) {
  std::mt19937_64 rng(episode_seed);
  std::uniform_real_distribution<double> u(-config.world_half_width, config.world_half_width);
  WorldState s;
  for (int i = 0; i < config.n_agents; ++i) {
    const double x = u(rng);
    const double y = u(rng);
    s.agent_pos.emplace_back(x, y);
    s.agent_vel.emplace_back(0.0, 0.0);
  }
  for (int i = 0; i < config.n_landmarks; ++i) {
    const double x = u(rng);
    const double y = u(rng);
    s.landmark_pos.emplace_back(x, y);
  }
  s.t = 0;
  return s;
}

WorkerObservation observe_worker(const WorldState& state, int agent, const EnvConfig& config) {
  if (agent < 0 || agent >= static_cast<int>(state.agent_pos.size()))
    throw InvalidArgument("agent index " + std::to_string(agent) + " out of range");
  const auto a = static_cast<std::size_t>(agent);
  const double range = config.vision_ranges.at(a);
  WorkerObservation o;
  o.agent = agent;
  o.pos = state.agent_pos[a];
  o.vel = state.agent_vel[a];
  for (std::size_t l = 0; l < state.landmark_pos.size(); ++l) {
    const Vec2 off = state.landmark_pos[l] - o.pos;
    if (off.norm() <= range) o.landmarks.push_back({static_cast<int>(l), off});
  }
  for (std::size_t j = 0; j < state.agent_pos.size(); ++j) {
    if (j == a) continue;
    const Vec2 off = state.agent_pos[j] - o.pos;
    if (off.norm() <= range) o.agents.push_back({static_cast<int>(j), off});
  }
  return o;
}

std::vector<Belief> communicate(const std::vector<WorkerObservation>& observations, const graph::Topology& topology) {
  const int n = static_cast<int>(observations.size());
  if (topology.n() != n)
    throw InvalidArgument("topology has " + std::to_string(topology.n()) + " nodes for " + std::to_string(n) +
                          " agents");
  std::vector<Belief> beliefs(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    auto& b = beliefs[static_cast<std::size_t>(i)];
    const auto& own = observations[static_cast<std::size_t>(i)];
    b.agent = i;
    b.pos = own.pos;
    b.vel = own.vel;
    std::vector<bool> have_landmark, have_agent(static_cast<std::size_t>(n), false);
    have_agent[static_cast<std::size_t>(i)] = true;
    auto add_landmark = [&](int idx, const Vec2& pos, int src) {
      if (idx >= static_cast<int>(have_landmark.size())) have_landmark.resize(static_cast<std::size_t>(idx) + 1, false);
      if (have_landmark[static_cast<std::size_t>(idx)]) return;
      have_landmark[static_cast<std::size_t>(idx)] = true;
      b.landmarks.push_back({idx, pos, src});
    };
    auto add_agent = [&](int idx, const Vec2& pos, int src) {
      if (have_agent[static_cast<std::size_t>(idx)]) return;
      have_agent[static_cast<std::size_t>(idx)] = true;
      b.agents.push_back({idx, pos, src});
    };
    auto absorb = [&](const WorkerObservation& o) {
      if (o.agent != i) add_agent(o.agent, o.pos, o.agent);
      for (const auto& e : o.landmarks) add_landmark(e.index, o.pos + e.offset, o.agent);
      for (const auto& e : o.agents) add_agent(e.index, o.pos + e.offset, o.agent);
    };
    absorb(own);
    for (int j = 0; j < n; ++j)
      if (j != i && topology.linked(i, j)) absorb(observations[static_cast<std::size_t>(j)]);
  }
  return beliefs;
}

int GreedyWorker::target(const Belief& belief) const {
  if (belief.landmarks.empty()) return -1;
  // Greedy matching over all known (agent, landmark) pairs, closest pair first.
  struct Pair {
    double dist;
    int agent;  // index into claimants, 0 = self
    int landmark;  // index into belief.landmarks
  };
  std::vector<Vec2> claimants{belief.pos};
  std::vector<int> claimant_ids{belief.agent};
  for (const auto& a : belief.agents) {
    claimants.push_back(a.pos);
    claimant_ids.push_back(a.index);
  }
  std::vector<Pair> pairs;
  for (std::size_t a = 0; a < claimants.size(); ++a)
    for (std::size_t l = 0; l < belief.landmarks.size(); ++l)
      pairs.push_back({(belief.landmarks[l].pos - claimants[a]).norm(), static_cast<int>(a), static_cast<int>(l)});
  std::sort(pairs.begin(), pairs.end(), [&](const Pair& x, const Pair& y) {
    if (x.dist != y.dist) return x.dist < y.dist;
    const int lx = belief.landmarks[static_cast<std::size_t>(x.landmark)].index;
    const int ly = belief.landmarks[static_cast<std::size_t>(y.landmark)].index;
    if (lx != ly) return lx < ly;
    return claimant_ids[static_cast<std::size_t>(x.agent)] < claimant_ids[static_cast<std::size_t>(y.agent)];
  });
  std::vector<bool> agent_done(claimants.size(), false), landmark_done(belief.landmarks.size(), false);
  for (const Pair& p : pairs) {
    if (agent_done[static_cast<std::size_t>(p.agent)] || landmark_done[static_cast<std::size_t>(p.landmark)]) continue;
    if (p.agent == 0) return belief.landmarks[static_cast<std::size_t>(p.landmark)].index;
    agent_done[static_cast<std::size_t>(p.agent)] = true;
    landmark_done[static_cast<std::size_t>(p.landmark)] = true;
  }
  // Every known landmark is taken by a closer agent: hold position.
  return -1;
}

Vec2 GreedyWorker::act(const Belief& belief, const EnvConfig& config) const {
  const int idx = target(belief);
  if (idx < 0) return Vec2::Zero();
  const auto it = std::find_if(belief.landmarks.begin(), belief.landmarks.end(),
                               [idx](const KnownEntity& e) { return e.index == idx; });
  const Vec2 offset = it->pos - belief.pos;
  const double dist = offset.norm();
  if (dist == 0) return Vec2::Zero();
  return offset * (std::min(config.max_force, gain_ * dist) / dist);
}

ManagerObservation manager_observation(const WorldState& state, const EnvConfig& config) {
  ManagerObservation obs;
  obs.reserve(static_cast<std::size_t>(config.observation_size()));
  for (int i = 0; i < config.n_agents; ++i) {
    const auto o = observe_worker(state, i, config);
    obs.push_back(static_cast<float>(o.pos.x()));
    obs.push_back(static_cast<float>(o.pos.y()));
    obs.push_back(static_cast<float>(o.vel.x()));
    obs.push_back(static_cast<float>(o.vel.y()));
    if (o.landmarks.empty()) {
      obs.insert(obs.end(), {0.f, 0.f, 0.f});
      continue;
    }
    const auto nearest = std::min_element(o.landmarks.begin(), o.landmarks.end(), [](const auto& a, const auto& b) {
      const double da = a.offset.norm(), db = b.offset.norm();
      return da != db ? da < db : a.index < b.index;
    });
    obs.push_back(1.f);
    obs.push_back(static_cast<float>(nearest->offset.x()));
    obs.push_back(static_cast<float>(nearest->offset.y()));
  }
  return obs;
}

double performance(const WorldState& state, const EnvConfig& config) {
  double perf = 0;
  for (const auto& l : state.landmark_pos) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& a : state.agent_pos) best = std::min(best, (a - l).norm());
    perf -= best;
  }
  const double contact = 2 * config.collision_radius;
  int collisions = 0;
  for (std::size_t i = 0; i < state.agent_pos.size(); ++i)
    for (std::size_t j = i + 1; j < state.agent_pos.size(); ++j)
      if ((state.agent_pos[i] - state.agent_pos[j]).norm() < contact) ++collisions;
  return perf - config.collision_penalty * collisions;
}

ParticleEnv::ParticleEnv(EnvConfig config, std::shared_ptr<const WorkerPolicy> worker)
    : config_(std::move(config)), worker_(worker ? std::move(worker) : default_worker()) {
  config_.validate();
  state_ = random_world(config_, config_.seed);
}

ManagerObservation ParticleEnv::reset(std::uint64_t episode_seed) {
  state_ = random_world(config_, episode_seed);
  return manager_observation(state_, config_);
}

ManagerObservation ParticleEnv::set_state(WorldState state) {
  const auto n = static_cast<std::size_t>(config_.n_agents);
  if (state.agent_pos.size() != n || state.agent_vel.size() != n ||
      state.landmark_pos.size() != static_cast<std::size_t>(config_.n_landmarks))
    throw InvalidArgument("world state does not match the configured entity counts");
  if (state.t < 0 || state.t > config_.horizon) throw InvalidArgument("world time outside [0, horizon]");
  state_ = std::move(state);
  return manager_observation(state_, config_);
}

StepOutcome ParticleEnv::step(const graph::Topology& topology) {
  if (terminal()) throw InvalidArgument("cannot step a terminal state (t = " + std::to_string(state_.t) + ")");
  if (topology.n() != config_.n_agents)
    throw InvalidArgument("topology has " + std::to_string(topology.n()) + " nodes for " +
                          std::to_string(config_.n_agents) + " agents");
  StepOutcome out;
  out.record.t = state_.t;
  out.record.agent_pos = state_.agent_pos;
  out.record.landmark_pos = state_.landmark_pos;
  out.record.topology = topology;

  std::vector<WorkerObservation> obs;
  for (int i = 0; i < config_.n_agents; ++i) obs.push_back(observe_worker(state_, i, config_));
  const auto beliefs = communicate(obs, topology);
  std::vector<Vec2> forces;
  for (const auto& b : beliefs) forces.push_back(clip_norm(worker_->act(b, config_), config_.max_force));

  const double lim = config_.position_limit;
  for (std::size_t i = 0; i < state_.agent_pos.size(); ++i) {
    Vec2 v = (1.0 - config_.damping) * state_.agent_vel[i] + forces[i] * config_.dt;
    v = clip_norm(v, config_.max_speed);
    Vec2 p = state_.agent_pos[i] + v * config_.dt;
    p = p.cwiseMax(-lim).cwiseMin(lim);
    state_.agent_vel[i] = v;
    state_.agent_pos[i] = p;
  }
  ++state_.t;

  out.performance = performance(state_, config_);
  out.resource_cost = config_.link_cost * topology.link_count();
  out.reward = out.performance - config_.cost_weight * out.resource_cost;
  out.terminal = terminal();
  out.next_observation = manager_observation(state_, config_);
  out.record.episode = episode_;
  out.record.reward = out.reward;
  out.record.performance = out.performance;
  out.record.cost = out.resource_cost;
  return out;
}

EpisodeTrace run_episode(const EnvConfig& config, const ManagerPolicy& policy, std::uint64_t episode_seed,
                         int episode_index, std::shared_ptr<const WorkerPolicy> worker) {
  ParticleEnv env(config, std::move(worker));
  auto obs = env.reset(episode_seed);
  EpisodeTrace trace;
  while (!env.terminal()) {
    auto outcome = env.step(policy(obs));
    outcome.record.episode = episode_index;
    obs = outcome.next_observation;
    trace.total_return += outcome.reward;
    trace.steps.push_back(std::move(outcome));
  }
  return trace;
}

namespace {

nlohmann::ordered_json points_json(const std::vector<Vec2>& pts) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& p : pts) arr.push_back({p.x(), p.y()});
  return arr;
}

std::vector<Vec2> points_from(const nlohmann::json& j) {
  std::vector<Vec2> out;
  for (const auto& p : j) out.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
  return out;
}

}  // namespace

std::string trace_record_json(const TraceRecord& r) {
  nlohmann::ordered_json j;
  j["episode"] = r.episode;
  j["t"] = r.t;
  j["agent_pos"] = points_json(r.agent_pos);
  j["landmark_pos"] = points_json(r.landmark_pos);
  j["topology_bits"] = r.topology.to_string();
  j["reward"] = r.reward;
  j["performance"] = r.performance;
  j["cost"] = r.cost;
  return j.dump();
}

std::string traces_to_jsonl(const std::vector<EpisodeTrace>& episodes) {
  std::string out;
  for (const auto& ep : episodes)
    for (const auto& s : ep.steps) {
      out += trace_record_json(s.record);
      out += '\n';
    }
  return out;
}

std::vector<TraceRecord> parse_trace_jsonl(const std::string& text) {
  std::vector<TraceRecord> out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      TraceRecord r;
      r.episode = j.at("episode").get<int>();
      r.t = j.at("t").get<int>();
      r.agent_pos = points_from(j.at("agent_pos"));
      r.landmark_pos = points_from(j.at("landmark_pos"));
      r.topology = graph::Topology::from_string(static_cast<int>(r.agent_pos.size()),
                                                j.at("topology_bits").get<std::string>());
      r.reward = j.at("reward").get<double>();
      r.performance = j.at("performance").get<double>();
      r.cost = j.at("cost").get<double>();
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw InvalidArgument("trace line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace vaerl::env
