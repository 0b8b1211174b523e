#pragma once

// Partially observable particle "spread" world governed by a topology manager.
//
// Each step the manager picks a communication topology; workers observe
// entities inside their vision range, pool observations with one-hop
// neighbours, act on the pooled belief, and the world integrates one physics
// step. The reward trades coverage of landmarks against the per-link cost.

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "vaerl/graph.hpp"

namespace vaerl::env {

using Vec2 = Eigen::Vector2d;

struct EnvConfig {
  int n_agents = 4;
  int n_landmarks = 4;
  std::vector<double> vision_ranges{1.0, 1.0, 1.0, 1.0};
  double world_half_width = 1.0;  // entities start in [-w, w]^2
  double link_cost = 0.1;         // per link per step
  double cost_weight = 1.0;       // reward = performance - cost_weight * resource_cost
  int horizon = 50;
  double collision_radius = 0.15;
  double collision_penalty = 1.0;  // per colliding agent pair per step
  double dt = 0.1;
  double damping = 0.25;
  double max_speed = 1.0;
  double max_force = 1.0;
  double position_limit = 1.5;
  std::uint64_t seed = 0;

  static EnvConfig homogeneous(int n, double vision);
  // Throws InvalidArgument on violated invariants.
  void validate() const;
  int observation_size() const { return 7 * n_agents; }
};

struct WorldState {
  std::vector<Vec2> agent_pos;
  std::vector<Vec2> agent_vel;
  std::vector<Vec2> landmark_pos;
  int t = 0;
};

struct SeenEntity {
  int index = 0;
  Vec2 offset;  // relative to the observing agent
};

struct WorkerObservation {
  int agent = 0;
  Vec2 pos;
  Vec2 vel;
  std::vector<SeenEntity> landmarks;
  std::vector<SeenEntity> agents;  // other agents only
};

struct KnownEntity {
  int index = 0;
  Vec2 pos;        // absolute
  int source = 0;  // agent whose observation supplied it
};

// Own observation merged with one-hop neighbours' observations for this step.
// Each entity appears once; own sightings take precedence, then neighbours
// in increasing index. Neighbours' own positions count as known agents.
struct Belief {
  int agent = 0;
  Vec2 pos;
  Vec2 vel;
  std::vector<KnownEntity> landmarks;
  std::vector<KnownEntity> agents;
};

// Per agent: position (2), velocity (2), saw-any-landmark flag (1), offset to
// the nearest visible landmark or zeros (2).
using ManagerObservation = std::vector<float>;

struct TraceRecord {
  int episode = 0;
  int t = 0;                      // step index; positions are those the topology was applied to
  std::vector<Vec2> agent_pos;
  std::vector<Vec2> landmark_pos;
  graph::Topology topology;
  double reward = 0;
  double performance = 0;
  double cost = 0;  // link_cost * links, before weighting
};

struct StepOutcome {
  double reward = 0;
  double performance = 0;
  double resource_cost = 0;
  ManagerObservation next_observation;
  bool terminal = false;
  TraceRecord record;
};

class WorkerPolicy {
 public:
  virtual ~WorkerPolicy() = default;
  virtual Vec2 act(const Belief& belief, const EnvConfig& config) const = 0;
};

// Greedy assignment over the belief: known (agent, landmark) pairs are matched
// closest first (ties by landmark index, then agent index) and the worker heads
// to the landmark it is matched with. Zero force when no landmark is known or
// every known landmark is taken by a closer agent. The force points at the
// target with magnitude min(max_force, gain * distance).
class GreedyWorker : public WorkerPolicy {
 public:
  explicit GreedyWorker(double gain = 2.0) : gain_(gain) {}
  Vec2 act(const Belief& belief, const EnvConfig& config) const override;
  // Index of the landmark the worker heads to, or -1.
  int target(const Belief& belief) const;

 private:
  double gain_;
};

WorldState random_world(const EnvConfig& config, std::uint64_t episode_seed);
WorkerObservation observe_worker(const WorldState& state, int agent, const EnvConfig& config);
std::vector<Belief> communicate(const std::vector<WorkerObservation>& observations, const graph::Topology& topology);
ManagerObservation manager_observation(const WorldState& state, const EnvConfig& config);

// -(sum over landmarks of the nearest agent distance) - penalty * colliding pairs
double performance(const WorldState& state, const EnvConfig& config);

class ParticleEnv {
 public:
  explicit ParticleEnv(EnvConfig config, std::shared_ptr<const WorkerPolicy> worker = nullptr);

  ManagerObservation reset(std::uint64_t episode_seed);
  // Replaces the world state (fixtures); returns the manager observation.
  ManagerObservation set_state(WorldState state);

  // Throws InvalidArgument when the episode is over or the topology size is wrong.
  StepOutcome step(const graph::Topology& topology);

  const WorldState& state() const { return state_; }
  const EnvConfig& config() const { return config_; }
  bool terminal() const { return state_.t >= config_.horizon; }

 private:
  EnvConfig config_;
  std::shared_ptr<const WorkerPolicy> worker_;
  WorldState state_;
  int episode_ = 0;
};

using ManagerPolicy = std::function<graph::Topology(const ManagerObservation&)>;

struct EpisodeTrace {
  std::vector<StepOutcome> steps;
  double total_return = 0;
};

EpisodeTrace run_episode(const EnvConfig& config, const ManagerPolicy& policy, std::uint64_t episode_seed,
                         int episode_index = 0, std::shared_ptr<const WorkerPolicy> worker = nullptr);

// One JSON object per line:
// {"episode","t","agent_pos","landmark_pos","topology_bits","reward","performance","cost"}
std::string trace_record_json(const TraceRecord& r);
std::string traces_to_jsonl(const std::vector<EpisodeTrace>& episodes);
std::vector<TraceRecord> parse_trace_jsonl(const std::string& text);

}  // namespace vaerl::env
