#pragma once

// Topology managers: DDPG acting in the VAE latent space (decoded into a
// topology), a branching dueling Q-network with one branch per link, a flat
// Q-network over every topology, and a uniform random baseline.

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "vaerl/env.hpp"
#include "vaerl/graph.hpp"
#include "vaerl/nn.hpp"
#include "vaerl/vae.hpp"

namespace vaerl::managers {

using Rng = std::mt19937_64;
using Observation = env::ManagerObservation;

enum class ManagerKind { vae_rl, bdqn, flat_dqn, random };
std::string to_string(ManagerKind k);
ManagerKind manager_kind_from_string(std::string_view s);  // throws InvalidArgument

struct ManagerConfig {
  ManagerKind kind = ManagerKind::vae_rl;
  int episodes = 2000;
  double gamma = 0.99;
  std::size_t replay_capacity = 100000;
  int batch_size = 128;
  int warmup = 1000;  // transitions collected with uniform actions before learning
  int update_every = 1;  // environment steps per gradient update
  double tau = 0.005;
  int target_sync = 500;  // hard target copy period (Q-network managers), in updates
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  double sigma_start = 0.3;
  double sigma_end = 0.01;
  double decay_fraction = 0.8;  // share of training steps over which exploration decays
  double actor_lr = 1e-4;
  double critic_lr = 1e-3;
  double q_lr = 1e-3;
  double reward_scale = 1.0;  // rewards are multiplied by this before learning
  double latent_bound = 3.0;
  std::vector<int> actor_hidden{1024, 512};
  std::vector<int> critic_hidden{1024, 512, 256};
  std::vector<int> q_hidden{1024, 512, 256};
  std::uint64_t seed = 0;
};

// Linear interpolation from `start` to `end` over the first `fraction` of
// `total_steps`, then constant.
double linear_schedule(double start, double end, double fraction, std::int64_t step, std::int64_t total_steps);

// Action encodings: the latent vector (vae_rl), one 0/1 value per link (bdqn),
// or a single topology index (flat_dqn, random).
struct Transition {
  Observation observation;
  std::vector<float> action;
  double reward = 0;
  Observation next_observation;
  bool terminal = false;
};

class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, std::uint64_t seed);

  void push(Transition t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t i) const { return items_.at(i); }

  // Uniform over stored transitions, distinct within one batch. Throws when
  // fewer than `batch` transitions are stored.
  std::vector<std::size_t> sample_indices(std::size_t batch);
  std::vector<const Transition*> sample(std::size_t batch);

 private:
  std::size_t capacity_;
  std::size_t cursor_ = 0;
  std::vector<Transition> items_;
  Rng rng_;
};

struct UpdateStats {
  double loss = 0;              // critic / Q loss
  double actor_objective = 0;   // mean Q(o, mu(o)), DDPG only
};

class Manager {
 public:
  virtual ~Manager() = default;
  virtual ManagerKind kind() const = 0;
  virtual int n_agents() const = 0;
  int slots() const { return graph::link_slots(n_agents()); }
  int observation_size() const { return 7 * n_agents(); }

  // `exploration` is sigma for vae_rl and epsilon for the Q-network managers;
  // 0 is the greedy policy. When `action` is given it receives the stored encoding.
  virtual graph::Topology act(const Observation& o, double exploration, Rng& rng,
                              std::vector<float>* action = nullptr) const = 0;
  // Uniformly random action used during warm-up.
  virtual graph::Topology act_uniform(Rng& rng, std::vector<float>* action = nullptr) const = 0;
  virtual UpdateStats update(const std::vector<const Transition*>& batch) = 0;
  // Writes the checkpoints and manifest.json into `dir`.
  virtual void save(const std::string& dir) const = 0;

 protected:
  void check_observation(const Observation& o) const;
};

// y = r * scale + gamma * (1 - terminal) * next_value
std::vector<double> td_targets(const std::vector<const Transition*>& batch, const std::vector<double>& next_values,
                               double gamma, double reward_scale);

// Gradient ascent on Q(o, mu(o)) for an actor with a tanh head scaled by
// `bound`. `dq_dz(obs, z)` returns per-sample dQ/dz (latent x batch).
using CriticGradient = std::function<nn::Matrix(const nn::Matrix& obs, const nn::Matrix& z)>;
void actor_gradient_step(nn::DenseNet& actor, nn::AdamState& optimizer, const nn::Matrix& obs, double bound,
                         const CriticGradient& dq_dz);

class DdpgManager : public Manager {
 public:
  // Throws InvalidArgument when the decoder does not match (n, d).
  DdpgManager(int n, std::shared_ptr<const vae::VaeModel> decoder, const ManagerConfig& config);

  ManagerKind kind() const override { return ManagerKind::vae_rl; }
  int n_agents() const override { return n_; }
  int latent_dim() const { return decoder_->latent_dim(); }

  // z = clip(mu(o) + sigma * N(0, I), [-bound, bound]); topology = binarize(decode(z)).
  graph::Topology act(const Observation& o, double sigma, Rng& rng, std::vector<float>* action = nullptr) const override;
  graph::Topology act_uniform(Rng& rng, std::vector<float>* action = nullptr) const override;
  nn::Vector latent_action(const Observation& o) const;
  graph::Topology decode_action(const nn::Vector& z) const;

  UpdateStats update(const std::vector<const Transition*>& batch) override;
  double critic_update(const std::vector<const Transition*>& batch);  // returns critic MSE before the step
  double actor_update(const std::vector<const Transition*>& batch);   // returns mean Q(o, mu(o))
  void soft_update_targets(double tau);

  // Critic input is the observation stacked on the latent action.
  nn::Matrix critic_values(const nn::Matrix& obs, const nn::Matrix& z, bool target = false) const;

  const nn::DenseNet& actor() const { return actor_; }
  const nn::DenseNet& critic() const { return critic_; }
  const nn::DenseNet& target_actor() const { return target_actor_; }
  const nn::DenseNet& target_critic() const { return target_critic_; }
  const vae::VaeModel& decoder() const { return *decoder_; }
  void set_networks(nn::DenseNet actor, nn::DenseNet critic);  // also resets targets and optimizers

  void save(const std::string& dir) const override;

 private:
  int n_;
  std::shared_ptr<const vae::VaeModel> decoder_;
  ManagerConfig config_;
  nn::DenseNet actor_, critic_, target_actor_, target_critic_;
  nn::AdamState actor_opt_, critic_opt_;
};

// Dueling aggregation per branch: Q_l(a) = V + A_l(a) - mean_a' A_l(a').
// `head` is the network output laid out as [V, A_0(0), A_0(1), A_1(0), ...].
std::vector<std::array<double, 2>> branch_q_values(const nn::Vector& head, int branches);

class BdqnManager : public Manager {
 public:
  BdqnManager(int n, const ManagerConfig& config);

  ManagerKind kind() const override { return ManagerKind::bdqn; }
  int n_agents() const override { return n_; }
  graph::Topology act(const Observation& o, double epsilon, Rng& rng, std::vector<float>* action = nullptr) const override;
  graph::Topology act_uniform(Rng& rng, std::vector<float>* action = nullptr) const override;
  std::vector<std::array<double, 2>> q_values(const Observation& o, bool target = false) const;

  UpdateStats update(const std::vector<const Transition*>& batch) override;
  std::int64_t update_count() const { return updates_; }

  const nn::DenseNet& network() const { return net_; }
  const nn::DenseNet& target_network() const { return target_; }
  void set_network(nn::DenseNet net);  // also resets target and optimizer

  void save(const std::string& dir) const override;

 private:
  int n_;
  ManagerConfig config_;
  nn::DenseNet net_, target_;
  nn::AdamState opt_;
  std::int64_t updates_ = 0;
};

class FlatDqnManager : public Manager {
 public:
  // Refuses topologies with more than 20 link slots (2^L outputs).
  FlatDqnManager(int n, const ManagerConfig& config);

  ManagerKind kind() const override { return ManagerKind::flat_dqn; }
  int n_agents() const override { return n_; }
  graph::Topology act(const Observation& o, double epsilon, Rng& rng, std::vector<float>* action = nullptr) const override;
  graph::Topology act_uniform(Rng& rng, std::vector<float>* action = nullptr) const override;
  nn::Vector q_values(const Observation& o, bool target = false) const;

  UpdateStats update(const std::vector<const Transition*>& batch) override;
  std::int64_t update_count() const { return updates_; }

  const nn::DenseNet& network() const { return net_; }
  void set_network(nn::DenseNet net);

  void save(const std::string& dir) const override;

 private:
  int n_;
  ManagerConfig config_;
  nn::DenseNet net_, target_;
  nn::AdamState opt_;
  std::int64_t updates_ = 0;
};

class RandomManager : public Manager {
 public:
  explicit RandomManager(int n) : n_(n) {}
  ManagerKind kind() const override { return ManagerKind::random; }
  int n_agents() const override { return n_; }
  // Each link i.i.d. Bernoulli(0.5); ignores the observation.
  graph::Topology act(const Observation& o, double exploration, Rng& rng, std::vector<float>* action = nullptr) const override;
  graph::Topology act_uniform(Rng& rng, std::vector<float>* action = nullptr) const override;
  UpdateStats update(const std::vector<const Transition*>&) override { return {}; }
  void save(const std::string& dir) const override;

 private:
  int n_;
};

graph::Topology random_topology(int n, Rng& rng);

// vae_rl requires a decoder; other kinds ignore it.
std::unique_ptr<Manager> make_manager(int n, const ManagerConfig& config,
                                      std::shared_ptr<const vae::VaeModel> decoder = nullptr);
// Reads manifest.json from `dir`. vae_rl managers need the matching decoder
// (checked against the recorded checksum).
std::unique_ptr<Manager> load_manager(const std::string& dir, std::shared_ptr<const vae::VaeModel> decoder = nullptr);

// Episode seeds: training seeds have the top bit clear, evaluation seeds set.
std::uint64_t training_seed(std::uint64_t seed, std::int64_t episode);
std::uint64_t evaluation_seed(std::uint64_t seed, std::int64_t episode);

struct CurveRow {
  int episode = 0;
  double episode_return = 0;
  double performance_sum = 0;
  double cost_sum = 0;
  double exploration = 0;  // epsilon or sigma at the episode's last step
};

struct LearningCurve {
  std::vector<CurveRow> rows;
  // episode,return,performance_sum,cost_sum,epsilon_or_sigma
  std::string to_csv() const;
};

using ProgressFn = std::function<void(const CurveRow&)>;

// Runs `config.episodes` training episodes on environments built from
// `env_config`, updating `manager` in place.
LearningCurve train_manager(const env::EnvConfig& env_config, Manager& manager, const ManagerConfig& config,
                            const ProgressFn& progress = nullptr);

struct EvalSummary {
  int episodes = 0;
  double mean_return = 0, stderr_return = 0;
  double mean_performance = 0, stderr_performance = 0;
  double mean_cost = 0, stderr_cost = 0;  // per-episode resource cost sums
  double mean_step_cost = 0;
  std::vector<double> returns;
  std::vector<env::EpisodeTrace> traces;
};

// Greedy rollout of evaluation episode `episode`; identical to the matching
// episode inside evaluate().
env::EpisodeTrace evaluation_episode(const env::EnvConfig& env_config, const Manager& manager, std::uint64_t seed,
                                     int episode);

// Greedy policy over `episodes` evaluation seeds; episode i uses evaluation_seed(seed, i).
EvalSummary evaluate(const env::EnvConfig& env_config, const Manager& manager, int episodes, std::uint64_t seed);

}  // namespace vaerl::managers
