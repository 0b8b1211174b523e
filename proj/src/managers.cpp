#include "vaerl/managers.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>
#include <unordered_set>

#include "json_sections.hpp"
#include "vaerl/errors.hpp"
#include "vaerl/io.hpp"

namespace vaerl::managers {

namespace fs = std::filesystem;
using detail::json;
using nn::Matrix;
using nn::Vector;

std::string to_string(ManagerKind k) {
  switch (k) {
    case ManagerKind::vae_rl: return "vae_rl";
    case ManagerKind::bdqn: return "bdqn";
    case ManagerKind::flat_dqn: return "flat_dqn";
    case ManagerKind::random: return "random";
  }
  return "unknown";
}

ManagerKind manager_kind_from_string(std::string_view s) {
  for (auto k : {ManagerKind::vae_rl, ManagerKind::bdqn, ManagerKind::flat_dqn, ManagerKind::random})
    if (s == to_string(k)) return k;
  throw InvalidArgument("unknown manager kind '" + std::string(s) + "' (expected vae_rl, bdqn, flat_dqn or random)");
}

double linear_schedule(double start, double end, double fraction, std::int64_t step, std::int64_t total_steps) {
  const double span = fraction * static_cast<double>(total_steps);
  if (span <= 0) return end;
  const double progress = std::min(1.0, static_cast<double>(step) / span);
  return start + (end - start) * progress;
}

// ---------------------------------------------------------------- replay

ReplayBuffer::ReplayBuffer(std::size_t capacity, std::uint64_t seed) : capacity_(capacity), rng_(seed) {
  if (capacity == 0) throw InvalidArgument("replay capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
  } else {
    items_[cursor_] = std::move(t);
  }
  cursor_ = (cursor_ + 1) % capacity_;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t batch) {
  const std::size_t n = items_.size();
  if (batch > n)
    throw InvalidArgument("cannot sample " + std::to_string(batch) + " transitions from " + std::to_string(n));
  // Floyd's algorithm: `batch` distinct indices in O(batch).
  std::vector<std::size_t> out;
  std::unordered_set<std::size_t> chosen;
  out.reserve(batch);
  for (std::size_t j = n - batch; j < n; ++j) {
    const std::size_t t = std::uniform_int_distribution<std::size_t>(0, j)(rng_);
    const std::size_t pick = chosen.count(t) ? j : t;
    chosen.insert(pick);
    out.push_back(pick);
  }
  return out;
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t batch) {
  std::vector<const Transition*> out;
  for (std::size_t i : sample_indices(batch)) out.push_back(&items_[i]);
  return out;
}

// ---------------------------------------------------------------- shared helpers

namespace {

Matrix observation_matrix(const std::vector<const Transition*>& batch, bool next) {
  if (batch.empty()) throw InvalidArgument("empty batch");
  const auto rows = static_cast<Eigen::Index>(batch.front()->observation.size());
  Matrix m(rows, static_cast<Eigen::Index>(batch.size()));
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& o = next ? batch[b]->next_observation : batch[b]->observation;
    if (static_cast<Eigen::Index>(o.size()) != rows) throw DimensionError("observation length varies within batch");
    m.col(static_cast<Eigen::Index>(b)) = Eigen::Map<const Vector>(o.data(), rows);
  }
  return m;
}

Vector to_vector(const Observation& o) { return Eigen::Map<const Vector>(o.data(), static_cast<Eigen::Index>(o.size())); }

Matrix stack(const Matrix& top, const Matrix& bottom) {
  Matrix m(top.rows() + bottom.rows(), top.cols());
  m << top, bottom;
  return m;
}

void check_finite(double loss, const std::string& what) {
  if (!std::isfinite(loss)) throw NonFiniteError(what + " loss is not finite");
}

nn::DenseNet make_net(int in, const std::vector<int>& hidden, int out, nn::Activation head, Rng& rng) {
  std::vector<int> widths{in};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(out);
  return nn::DenseNet::make(std::span<const int>(widths), nn::Activation::relu, head, rng);
}

std::string checksum_hex(std::uint32_t c) {
  std::ostringstream s;
  s << std::hex;
  s.width(8);
  s.fill('0');
  s << c;
  return s.str();
}

void write_manifest(const std::string& dir, ManagerKind kind, int n, int latent_dim, const std::string& vae_checksum,
                    const ManagerConfig& config, const std::vector<std::string>& files) {
  json j;
  j["kind"] = to_string(kind);
  j["n"] = n;
  j["latent_dim"] = latent_dim;
  j["vae_checksum"] = vae_checksum;
  j["files"] = files;
  j["config"] = detail::manager_to_json(config);
  io::write_file_atomic((fs::path(dir) / "manifest.json").string(), j.dump(2) + "\n");
}

std::string path_in(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

std::vector<float> float_bits(const graph::Topology& t) { return {t.bits().begin(), t.bits().end()}; }

}  // namespace

void Manager::check_observation(const Observation& o) const {
  if (static_cast<int>(o.size()) != observation_size())
    throw DimensionError("observation has " + std::to_string(o.size()) + " values, expected " +
                         std::to_string(observation_size()));
}

std::vector<double> td_targets(const std::vector<const Transition*>& batch, const std::vector<double>& next_values,
                               double gamma, double reward_scale) {
  if (batch.size() != next_values.size()) throw DimensionError("next value count does not match batch");
  std::vector<double> y(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b)
    y[b] = batch[b]->reward * reward_scale + (batch[b]->terminal ? 0.0 : gamma * next_values[b]);
  return y;
}

void actor_gradient_step(nn::DenseNet& actor, nn::AdamState& optimizer, const Matrix& obs, double bound,
                         const CriticGradient& dq_dz) {
  const auto trace = actor.forward_trace(obs);
  const Matrix z = trace.output() * static_cast<float>(bound);
  const Matrix g = dq_dz(obs, z);
  if (g.rows() != z.rows() || g.cols() != z.cols()) throw DimensionError("critic gradient shape mismatch");
  // Minimize -mean Q: dL/d(tanh output) = -bound * dQ/dz / B.
  const Matrix upstream = g * static_cast<float>(-bound / static_cast<double>(obs.cols()));
  optimizer.step(actor, actor.backward(trace, upstream));
}

// ---------------------------------------------------------------- DDPG

DdpgManager::DdpgManager(int n, std::shared_ptr<const vae::VaeModel> decoder, const ManagerConfig& config)
    : n_(n), decoder_(std::move(decoder)), config_(config) {
  if (!decoder_) throw MissingArtifact("vae_rl manager needs a trained VAE for n=" + std::to_string(n));
  if (decoder_->n() != n)
    throw InvalidArgument("VAE was trained for n=" + std::to_string(decoder_->n()) + ", expected n=" +
                          std::to_string(n) + " (latent d=" + std::to_string(decoder_->latent_dim()) + ")");
  if (!(config.latent_bound > 0)) throw InvalidArgument("latent_bound must be positive");
  Rng rng(config.seed ^ 0xd1b54a32d192ed03ULL);
  const int d = decoder_->latent_dim();
  set_networks(make_net(7 * n, config.actor_hidden, d, nn::Activation::tanh, rng),
               make_net(7 * n + d, config.critic_hidden, 1, nn::Activation::identity, rng));
}

void DdpgManager::set_networks(nn::DenseNet actor, nn::DenseNet critic) {
  const int d = decoder_->latent_dim();
  if (actor.input_dim() != 7 * n_ || actor.output_dim() != d)
    throw DimensionError("actor must map " + std::to_string(7 * n_) + " -> " + std::to_string(d));
  if (critic.input_dim() != 7 * n_ + d || critic.output_dim() != 1)
    throw DimensionError("critic must map " + std::to_string(7 * n_ + d) + " -> 1");
  actor_ = std::move(actor);
  critic_ = std::move(critic);
  target_actor_ = actor_;
  target_critic_ = critic_;
  actor_opt_ = nn::AdamState(actor_, {.learning_rate = config_.actor_lr});
  critic_opt_ = nn::AdamState(critic_, {.learning_rate = config_.critic_lr});
}

Vector DdpgManager::latent_action(const Observation& o) const {
  check_observation(o);
  return actor_.forward(to_vector(o)) * static_cast<float>(config_.latent_bound);
}

graph::Topology DdpgManager::decode_action(const Vector& z) const {
  return vae::binarize(n_, decoder_->decode(z));
}

graph::Topology DdpgManager::act(const Observation& o, double sigma, Rng& rng, std::vector<float>* action) const {
  Vector z = latent_action(o);
  if (sigma > 0) {
    std::normal_distribution<double> noise(0.0, sigma);
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) += static_cast<float>(noise(rng));
  }
  const auto bound = static_cast<float>(config_.latent_bound);
  z = z.cwiseMax(-bound).cwiseMin(bound);
  if (action) action->assign(z.data(), z.data() + z.size());
  return decode_action(z);
}

graph::Topology DdpgManager::act_uniform(Rng& rng, std::vector<float>* action) const {
  std::uniform_real_distribution<double> u(-config_.latent_bound, config_.latent_bound);
  Vector z(latent_dim());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = static_cast<float>(u(rng));
  if (action) action->assign(z.data(), z.data() + z.size());
  return decode_action(z);
}

Matrix DdpgManager::critic_values(const Matrix& obs, const Matrix& z, bool target) const {
  return (target ? target_critic_ : critic_).forward_batch(stack(obs, z));
}

double DdpgManager::critic_update(const std::vector<const Transition*>& batch) {
  const Matrix obs = observation_matrix(batch, false);
  const Matrix next = observation_matrix(batch, true);
  const int d = latent_dim();
  Matrix z(d, obs.cols());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    if (static_cast<int>(batch[b]->action.size()) != d) throw DimensionError("latent action length mismatch");
    z.col(static_cast<Eigen::Index>(b)) = Eigen::Map<const Vector>(batch[b]->action.data(), d);
  }
  const Matrix next_z = target_actor_.forward_batch(next) * static_cast<float>(config_.latent_bound);
  const Matrix next_q = critic_values(next, next_z, true);
  std::vector<double> next_values(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) next_values[b] = next_q(0, static_cast<Eigen::Index>(b));
  const auto y = td_targets(batch, next_values, config_.gamma, config_.reward_scale);
  Matrix target(1, obs.cols());
  for (std::size_t b = 0; b < y.size(); ++b) target(0, static_cast<Eigen::Index>(b)) = static_cast<float>(y[b]);
  auto r = nn::loss_and_gradients(critic_, stack(obs, z), nn::LossKind::mse, target);
  check_finite(r.loss, "critic");
  critic_opt_.step(critic_, r.grads);
  return r.loss;
}

double DdpgManager::actor_update(const std::vector<const Transition*>& batch) {
  const Matrix obs = observation_matrix(batch, false);
  double mean_q = 0;
  const auto obs_rows = obs.rows();
  actor_gradient_step(actor_, actor_opt_, obs, config_.latent_bound, [&](const Matrix& o, const Matrix& z) {
    const auto trace = critic_.forward_trace(stack(o, z));
    mean_q = trace.output().mean();
    const auto g = critic_.backward(trace, Matrix::Ones(1, o.cols()));
    return Matrix(g.input.bottomRows(g.input.rows() - obs_rows));
  });
  check_finite(mean_q, "actor");
  return mean_q;
}

void DdpgManager::soft_update_targets(double tau) {
  target_actor_.soft_update_from(actor_, static_cast<float>(tau));
  target_critic_.soft_update_from(critic_, static_cast<float>(tau));
}

UpdateStats DdpgManager::update(const std::vector<const Transition*>& batch) {
  UpdateStats s;
  s.loss = critic_update(batch);
  s.actor_objective = actor_update(batch);
  soft_update_targets(config_.tau);
  return s;
}

void DdpgManager::save(const std::string& dir) const {
  nn::save_checkpoint_file(actor_, path_in(dir, "actor.ckpt"));
  nn::save_checkpoint_file(critic_, path_in(dir, "critic.ckpt"));
  write_manifest(dir, kind(), n_, latent_dim(), checksum_hex(decoder_->checksum()), config_,
                 {"actor.ckpt", "critic.ckpt"});
}

// ---------------------------------------------------------------- BDQN

std::vector<std::array<double, 2>> branch_q_values(const Vector& head, int branches) {
  if (head.size() != 1 + 2 * branches) throw DimensionError("branch head has the wrong size");
  std::vector<std::array<double, 2>> q(static_cast<std::size_t>(branches));
  const double v = head(0);
  for (int l = 0; l < branches; ++l) {
    const double a0 = head(1 + 2 * l), a1 = head(2 + 2 * l);
    const double mean = 0.5 * (a0 + a1);
    q[static_cast<std::size_t>(l)] = {v + a0 - mean, v + a1 - mean};
  }
  return q;
}

BdqnManager::BdqnManager(int n, const ManagerConfig& config) : n_(n), config_(config) {
  if (n < 2) throw InvalidArgument("bdqn needs at least 2 agents");
  Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  set_network(make_net(7 * n, config.q_hidden, 1 + 2 * graph::link_slots(n), nn::Activation::identity, rng));
}

void BdqnManager::set_network(nn::DenseNet net) {
  if (net.input_dim() != 7 * n_ || net.output_dim() != 1 + 2 * slots())
    throw DimensionError("bdqn network must map " + std::to_string(7 * n_) + " -> " + std::to_string(1 + 2 * slots()));
  net_ = std::move(net);
  target_ = net_;
  opt_ = nn::AdamState(net_, {.learning_rate = config_.q_lr});
  updates_ = 0;
}

std::vector<std::array<double, 2>> BdqnManager::q_values(const Observation& o, bool target) const {
  check_observation(o);
  return branch_q_values((target ? target_ : net_).forward(to_vector(o)), slots());
}

graph::Topology BdqnManager::act(const Observation& o, double epsilon, Rng& rng, std::vector<float>* action) const {
  const auto q = q_values(o);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::uint8_t> bits(q.size());
  for (std::size_t l = 0; l < q.size(); ++l) {
    if (epsilon > 0 && u(rng) < epsilon)
      bits[l] = static_cast<std::uint8_t>(rng() & 1u);
    else
      bits[l] = q[l][1] > q[l][0] ? 1 : 0;
  }
  graph::Topology t(n_, std::move(bits));
  if (action) *action = float_bits(t);
  return t;
}

graph::Topology BdqnManager::act_uniform(Rng& rng, std::vector<float>* action) const {
  auto t = random_topology(n_, rng);
  if (action) *action = float_bits(t);
  return t;
}

UpdateStats BdqnManager::update(const std::vector<const Transition*>& batch) {
  const Matrix obs = observation_matrix(batch, false);
  const Matrix next = observation_matrix(batch, true);
  const int L = slots();
  const Matrix next_head = target_.forward_batch(next);
  std::vector<double> next_values(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto q = branch_q_values(next_head.col(static_cast<Eigen::Index>(b)), L);
    double sum = 0;
    for (const auto& ql : q) sum += std::max(ql[0], ql[1]);
    next_values[b] = sum / L;
  }
  const auto y = td_targets(batch, next_values, config_.gamma, config_.reward_scale);

  const auto trace = net_.forward_trace(obs);
  const Matrix& head = trace.output();
  Matrix grad = Matrix::Zero(head.rows(), head.cols());
  const double scale = 2.0 / (static_cast<double>(L) * static_cast<double>(batch.size()));
  double loss = 0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto col = static_cast<Eigen::Index>(b);
    if (static_cast<int>(batch[b]->action.size()) != L) throw DimensionError("bdqn action must hold one bit per link");
    const auto q = branch_q_values(head.col(col), L);
    for (int l = 0; l < L; ++l) {
      const int a = batch[b]->action[static_cast<std::size_t>(l)] > 0.5f ? 1 : 0;
      const double diff = q[static_cast<std::size_t>(l)][static_cast<std::size_t>(a)] - y[b];
      loss += diff * diff;
      const double g = scale * diff;
      grad(0, col) += static_cast<float>(g);
      grad(1 + 2 * l + a, col) += static_cast<float>(0.5 * g);
      grad(1 + 2 * l + (1 - a), col) -= static_cast<float>(0.5 * g);
    }
  }
  loss /= static_cast<double>(L) * static_cast<double>(batch.size());
  check_finite(loss, "bdqn");
  opt_.step(net_, net_.backward(trace, grad));
  if (++updates_ % config_.target_sync == 0) target_ = net_;
  return {loss, 0.0};
}

void BdqnManager::save(const std::string& dir) const {
  nn::save_checkpoint_file(net_, path_in(dir, "q.ckpt"));
  write_manifest(dir, kind(), n_, 0, "", config_, {"q.ckpt"});
}

// ---------------------------------------------------------------- flat DQN

FlatDqnManager::FlatDqnManager(int n, const ManagerConfig& config) : n_(n), config_(config) {
  const int L = graph::link_slots(n);
  if (L > graph::kMaxEnumerableSlots)
    throw InvalidArgument("flat_dqn needs 2^" + std::to_string(L) + " outputs for n=" + std::to_string(n) +
                          "; refusing above " + std::to_string(graph::kMaxEnumerableSlots) + " links");
  if (n < 2) throw InvalidArgument("flat_dqn needs at least 2 agents");
  Rng rng(config.seed ^ 0xbf58476d1ce4e5b9ULL);
  set_network(make_net(7 * n, config.q_hidden, 1 << L, nn::Activation::identity, rng));
}

void FlatDqnManager::set_network(nn::DenseNet net) {
  if (net.input_dim() != 7 * n_ || net.output_dim() != (1 << slots()))
    throw DimensionError("flat network must map " + std::to_string(7 * n_) + " -> 2^" + std::to_string(slots()));
  net_ = std::move(net);
  target_ = net_;
  opt_ = nn::AdamState(net_, {.learning_rate = config_.q_lr});
  updates_ = 0;
}

Vector FlatDqnManager::q_values(const Observation& o, bool target) const {
  check_observation(o);
  return (target ? target_ : net_).forward(to_vector(o));
}

graph::Topology FlatDqnManager::act(const Observation& o, double epsilon, Rng& rng, std::vector<float>* action) const {
  const Vector q = q_values(o);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::Index index = 0;
  if (epsilon > 0 && u(rng) < epsilon)
    index = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(q.size()));
  else
    q.maxCoeff(&index);
  if (action) *action = {static_cast<float>(index)};
  return graph::Topology::from_index(n_, static_cast<std::uint64_t>(index));
}

graph::Topology FlatDqnManager::act_uniform(Rng& rng, std::vector<float>* action) const {
  auto t = random_topology(n_, rng);
  if (action) *action = {static_cast<float>(t.index())};
  return t;
}

UpdateStats FlatDqnManager::update(const std::vector<const Transition*>& batch) {
  const Matrix obs = observation_matrix(batch, false);
  const Matrix next = observation_matrix(batch, true);
  const Matrix next_q = target_.forward_batch(next);
  std::vector<double> next_values(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) next_values[b] = next_q.col(static_cast<Eigen::Index>(b)).maxCoeff();
  const auto y = td_targets(batch, next_values, config_.gamma, config_.reward_scale);

  const auto trace = net_.forward_trace(obs);
  Matrix grad = Matrix::Zero(trace.output().rows(), trace.output().cols());
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  double loss = 0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto col = static_cast<Eigen::Index>(b);
    if (batch[b]->action.size() != 1) throw DimensionError("flat action must hold one index");
    const auto a = static_cast<Eigen::Index>(batch[b]->action[0]);
    if (a < 0 || a >= grad.rows()) throw DimensionError("flat action index out of range");
    const double diff = trace.output()(a, col) - y[b];
    loss += diff * diff * inv_b;
    grad(a, col) = static_cast<float>(2.0 * diff * inv_b);
  }
  check_finite(loss, "flat_dqn");
  opt_.step(net_, net_.backward(trace, grad));
  if (++updates_ % config_.target_sync == 0) target_ = net_;
  return {loss, 0.0};
}

void FlatDqnManager::save(const std::string& dir) const {
  nn::save_checkpoint_file(net_, path_in(dir, "q.ckpt"));
  write_manifest(dir, kind(), n_, 0, "", config_, {"q.ckpt"});
}

// ---------------------------------------------------------------- random

graph::Topology random_topology(int n, Rng& rng) {
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(graph::link_slots(n)));
  std::bernoulli_distribution coin(0.5);
  for (auto& b : bits) b = coin(rng) ? 1 : 0;
  return graph::Topology(n, std::move(bits));
}

graph::Topology RandomManager::act(const Observation&, double, Rng& rng, std::vector<float>* action) const {
  return act_uniform(rng, action);
}

graph::Topology RandomManager::act_uniform(Rng& rng, std::vector<float>* action) const {
  auto t = random_topology(n_, rng);
  if (action) *action = {static_cast<float>(t.index())};
  return t;
}

void RandomManager::save(const std::string& dir) const {
  ManagerConfig c;
  c.kind = ManagerKind::random;
  write_manifest(dir, kind(), n_, 0, "", c, {});
}

// ---------------------------------------------------------------- factories

std::unique_ptr<Manager> make_manager(int n, const ManagerConfig& config,
                                      std::shared_ptr<const vae::VaeModel> decoder) {
  switch (config.kind) {
    case ManagerKind::vae_rl: return std::make_unique<DdpgManager>(n, std::move(decoder), config);
    case ManagerKind::bdqn: return std::make_unique<BdqnManager>(n, config);
    case ManagerKind::flat_dqn: return std::make_unique<FlatDqnManager>(n, config);
    case ManagerKind::random: return std::make_unique<RandomManager>(n);
  }
  throw InvalidArgument("unknown manager kind");
}

std::unique_ptr<Manager> load_manager(const std::string& dir, std::shared_ptr<const vae::VaeModel> decoder) {
  const auto manifest_path = path_in(dir, "manifest.json");
  if (!io::exists(manifest_path)) throw MissingArtifact("no manager manifest at " + manifest_path);
  json j;
  try {
    j = json::parse(io::read_file(manifest_path));
  } catch (const json::exception& e) {
    throw CorruptCheckpoint(manifest_path + ": " + e.what());
  }
  ManagerConfig config;
  detail::manager_from_json(j.at("config"), config, "config");
  const int n = j.at("n").get<int>();
  switch (config.kind) {
    case ManagerKind::vae_rl: {
      const int d = j.at("latent_dim").get<int>();
      if (!decoder) throw MissingArtifact("manager in " + dir + " needs its VAE (n=" + std::to_string(n) +
                                          ", d=" + std::to_string(d) + ")");
      if (decoder->n() != n || decoder->latent_dim() != d ||
          checksum_hex(decoder->checksum()) != j.at("vae_checksum").get<std::string>())
        throw MissingArtifact("VAE does not match the one the manager was trained with (expected n=" +
                              std::to_string(n) + ", d=" + std::to_string(d) + ", checksum " +
                              j.at("vae_checksum").get<std::string>() + ")");
      auto m = std::make_unique<DdpgManager>(n, std::move(decoder), config);
      m->set_networks(nn::load_checkpoint_file(path_in(dir, "actor.ckpt")),
                      nn::load_checkpoint_file(path_in(dir, "critic.ckpt")));
      return m;
    }
    case ManagerKind::bdqn: {
      auto m = std::make_unique<BdqnManager>(n, config);
      m->set_network(nn::load_checkpoint_file(path_in(dir, "q.ckpt")));
      return m;
    }
    case ManagerKind::flat_dqn: {
      auto m = std::make_unique<FlatDqnManager>(n, config);
      m->set_network(nn::load_checkpoint_file(path_in(dir, "q.ckpt")));
      return m;
    }
    case ManagerKind::random: return std::make_unique<RandomManager>(n);
  }
  throw InvalidArgument("unknown manager kind");
}

// ---------------------------------------------------------------- loops

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t kTopBit = 1ULL << 63;

double stderr_of(const std::vector<double>& xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double ss = 0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
}

double mean_of(const std::vector<double>& xs) {
  double s = 0;
  for (double x : xs) s += x;
  return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

}  // namespace

std::uint64_t training_seed(std::uint64_t seed, std::int64_t episode) {
  return splitmix64(splitmix64(seed) ^ static_cast<std::uint64_t>(episode)) & ~kTopBit;
}

std::uint64_t evaluation_seed(std::uint64_t seed, std::int64_t episode) {
  return splitmix64(splitmix64(seed) ^ static_cast<std::uint64_t>(episode)) | kTopBit;
}

std::string LearningCurve::to_csv() const {
  std::ostringstream s;
  s.precision(17);
  s << "episode,return,performance_sum,cost_sum,epsilon_or_sigma\n";
  for (const auto& r : rows)
    s << r.episode << ',' << r.episode_return << ',' << r.performance_sum << ',' << r.cost_sum << ','
      << r.exploration << '\n';
  return s.str();
}

LearningCurve train_manager(const env::EnvConfig& env_config, Manager& manager, const ManagerConfig& config,
                            const ProgressFn& progress) {
  if (env_config.n_agents != manager.n_agents())
    throw InvalidArgument("manager built for n=" + std::to_string(manager.n_agents()) + " but env has n=" +
                          std::to_string(env_config.n_agents));
  if (config.episodes < 0 || config.batch_size < 1 || config.update_every < 1 || config.target_sync < 1)
    throw InvalidArgument("episodes, batch_size, update_every and target_sync must be positive");
  env::ParticleEnv environment(env_config);
  ReplayBuffer buffer(config.replay_capacity, splitmix64(config.seed ^ 0x5eed));
  Rng rng(splitmix64(config.seed ^ 0xac7));
  const bool learns = manager.kind() != ManagerKind::random;
  const bool ddpg = manager.kind() == ManagerKind::vae_rl;
  const std::int64_t total_steps = static_cast<std::int64_t>(config.episodes) * env_config.horizon;
  const auto ready = static_cast<std::size_t>(std::max(config.warmup, config.batch_size));
  std::int64_t step = 0;
  LearningCurve curve;
  for (int ep = 0; ep < config.episodes; ++ep) {
    Observation obs = environment.reset(training_seed(config.seed, ep));
    CurveRow row;
    row.episode = ep + 1;
    while (!environment.terminal()) {
      const double exploration =
          ddpg ? linear_schedule(config.sigma_start, config.sigma_end, config.decay_fraction, step, total_steps)
               : linear_schedule(config.epsilon_start, config.epsilon_end, config.decay_fraction, step, total_steps);
      Transition tr;
      const bool warming = learns && buffer.size() < static_cast<std::size_t>(config.warmup);
      const auto topology = warming ? manager.act_uniform(rng, &tr.action) : manager.act(obs, exploration, rng, &tr.action);
      auto out = environment.step(topology);
      row.episode_return += out.reward;
      row.performance_sum += out.performance;
      row.cost_sum += out.resource_cost;
      row.exploration = exploration;
      if (learns) {
        tr.observation = std::move(obs);
        tr.reward = out.reward;
        tr.next_observation = out.next_observation;
        tr.terminal = out.terminal;
        buffer.push(std::move(tr));
        if (buffer.size() >= ready && step % config.update_every == 0)
          manager.update(buffer.sample(static_cast<std::size_t>(config.batch_size)));
      }
      obs = std::move(out.next_observation);
      ++step;
    }
    if (progress) progress(row);
    curve.rows.push_back(row);
  }
  return curve;
}

env::EpisodeTrace evaluation_episode(const env::EnvConfig& env_config, const Manager& manager, std::uint64_t seed,
                                     int episode) {
  const std::uint64_t episode_seed = evaluation_seed(seed, episode);
  Rng rng(splitmix64(episode_seed));
  return env::run_episode(
      env_config, [&](const Observation& o) { return manager.act(o, 0.0, rng); }, episode_seed, episode);
}

EvalSummary evaluate(const env::EnvConfig& env_config, const Manager& manager, int episodes, std::uint64_t seed) {
  if (episodes < 1) throw InvalidArgument("evaluation needs at least one episode");
  EvalSummary s;
  s.episodes = episodes;
  std::vector<double> perf, cost;
  for (int ep = 0; ep < episodes; ++ep) {
    auto trace = evaluation_episode(env_config, manager, seed, ep);
    double p = 0, c = 0;
    for (const auto& st : trace.steps) {
      p += st.performance;
      c += st.resource_cost;
    }
    s.returns.push_back(trace.total_return);
    perf.push_back(p);
    cost.push_back(c);
    s.traces.push_back(std::move(trace));
  }
  s.mean_return = mean_of(s.returns);
  s.stderr_return = stderr_of(s.returns, s.mean_return);
  s.mean_performance = mean_of(perf);
  s.stderr_performance = stderr_of(perf, s.mean_performance);
  s.mean_cost = mean_of(cost);
  s.stderr_cost = stderr_of(cost, s.mean_cost);
  s.mean_step_cost = s.mean_cost / env_config.horizon;
  return s;
}

}  // namespace vaerl::managers
