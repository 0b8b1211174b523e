#include "vaerl/vae.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vaerl/io.hpp"

namespace vaerl::vae {

namespace {

std::string join(const std::string& dir, const char* name) { return (std::filesystem::path(dir) / name).string(); }

}  // namespace

VaeModel::VaeModel(int n, int latent_dim, nn::DenseNet encoder, nn::DenseNet decoder)
    : n_(n), latent_dim_(latent_dim), encoder_(std::move(encoder)), decoder_(std::move(decoder)) {
  const int slots = graph::link_slots(n);
  if (latent_dim <= 0) throw InvalidArgument("latent dimension must be positive");
  if (encoder_.input_dim() != slots || encoder_.output_dim() != 2 * latent_dim)
    throw DimensionError("encoder must map " + std::to_string(slots) + " -> " + std::to_string(2 * latent_dim) +
                         ", got " + std::to_string(encoder_.input_dim()) + " -> " +
                         std::to_string(encoder_.output_dim()));
  if (decoder_.input_dim() != latent_dim || decoder_.output_dim() != slots)
    throw DimensionError("decoder must map " + std::to_string(latent_dim) + " -> " + std::to_string(slots) +
                         ", got " + std::to_string(decoder_.input_dim()) + " -> " +
                         std::to_string(decoder_.output_dim()));
  if (decoder_.layers().back().activation != nn::Activation::sigmoid)
    throw InvalidArgument("decoder head must be sigmoid");
}

VaeModel VaeModel::create(int n, int latent_dim, std::span<const int> encoder_hidden,
                          std::span<const int> decoder_hidden, std::mt19937_64& rng) {
  const int slots = graph::link_slots(n);
  std::vector<int> enc{slots};
  enc.insert(enc.end(), encoder_hidden.begin(), encoder_hidden.end());
  enc.push_back(2 * latent_dim);
  std::vector<int> dec{latent_dim};
  dec.insert(dec.end(), decoder_hidden.begin(), decoder_hidden.end());
  dec.push_back(slots);
  auto encoder = nn::DenseNet::make(enc, nn::Activation::relu, nn::Activation::identity, rng);
  auto decoder = nn::DenseNet::make(dec, nn::Activation::relu, nn::Activation::sigmoid, rng);
  return VaeModel(n, latent_dim, std::move(encoder), std::move(decoder));
}

GaussianParams VaeModel::encode(const graph::Topology& t) const {
  if (t.n() != n_)
    throw DimensionError("topology has " + std::to_string(t.n()) + " nodes, model expects " + std::to_string(n_));
  nn::Vector x(slots());
  for (int k = 0; k < slots(); ++k) x(k) = static_cast<float>(t.bits()[static_cast<std::size_t>(k)]);
  const nn::Vector out = encoder_.forward(x);
  return {out.head(latent_dim_), out.tail(latent_dim_)};
}

nn::Vector VaeModel::decode(const nn::Vector& z) const {
  if (z.size() != latent_dim_)
    throw DimensionError("latent vector has length " + std::to_string(z.size()) + ", model expects " +
                         std::to_string(latent_dim_));
  return decoder_.forward(z);
}

nn::Matrix VaeModel::decode_batch(const nn::Matrix& z) const { return decoder_.forward_batch(z); }

void VaeModel::save(const std::string& dir) const {
  nn::save_checkpoint_file(encoder_, join(dir, "encoder.ckpt"));
  nn::save_checkpoint_file(decoder_, join(dir, "decoder.ckpt"));
  nlohmann::json meta{{"n", n_}, {"latent_dim", latent_dim_}, {"checksum", checksum()}};
  io::write_file_atomic(join(dir, "vae.json"), meta.dump(2) + "\n");
}

VaeModel VaeModel::load(const std::string& dir) {
  const auto meta_path = join(dir, "vae.json");
  if (!io::exists(meta_path)) throw MissingArtifact("no VAE checkpoint at '" + dir + "' (missing vae.json)");
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(io::read_file(meta_path));
  } catch (const nlohmann::json::exception& e) {
    throw CorruptCheckpoint("vae.json: " + std::string(e.what()));
  }
  VaeModel m(meta.at("n").get<int>(), meta.at("latent_dim").get<int>(),
             nn::load_checkpoint_file(join(dir, "encoder.ckpt")), nn::load_checkpoint_file(join(dir, "decoder.ckpt")));
  if (meta.contains("checksum") && meta["checksum"].get<std::uint32_t>() != m.checksum())
    throw CorruptCheckpoint("VAE checksum in vae.json does not match the stored networks");
  return m;
}

std::uint32_t VaeModel::checksum() const {
  return nn::parameter_checksum(encoder_) ^ (nn::parameter_checksum(decoder_) * 2654435761U);
}

nn::Matrix bits_to_matrix(std::span<const graph::Topology> ts) {
  if (ts.empty()) return {};
  nn::Matrix x(ts.front().slots(), static_cast<Eigen::Index>(ts.size()));
  for (std::size_t c = 0; c < ts.size(); ++c)
    for (int k = 0; k < ts[c].slots(); ++k)
      x(k, static_cast<Eigen::Index>(c)) = static_cast<float>(ts[c].bits()[static_cast<std::size_t>(k)]);
  return x;
}

nn::Vector reparameterize(const GaussianParams& p, const nn::Vector& noise) {
  if (p.mean.size() != p.log_var.size() || noise.size() != p.mean.size())
    throw DimensionError("reparameterize: mean, log-variance and noise must have equal length");
  return p.mean + ((p.log_var.array() * 0.5f).exp() * noise.array()).matrix();
}

graph::Topology binarize(int n, std::span<const float> probs, float threshold) {
  if (static_cast<int>(probs.size()) != graph::link_slots(n))
    throw DimensionError("binarize: expected " + std::to_string(graph::link_slots(n)) + " probabilities, got " +
                         std::to_string(probs.size()));
  std::vector<std::uint8_t> bits(probs.size());
  for (std::size_t k = 0; k < probs.size(); ++k) bits[k] = probs[k] >= threshold ? 1 : 0;
  return graph::Topology(n, std::move(bits));
}

graph::Topology binarize(int n, const nn::Vector& probs, float threshold) {
  return binarize(n, std::span<const float>(probs.data(), static_cast<std::size_t>(probs.size())), threshold);
}

ElboTerms elbo_loss(std::span<const std::uint8_t> bits, const nn::Vector& probs, const GaussianParams& p,
                    double beta) {
  if (static_cast<Eigen::Index>(bits.size()) != probs.size()) throw DimensionError("elbo_loss: bits/probs length differ");
  if (p.mean.size() != p.log_var.size()) throw DimensionError("elbo_loss: mean/log-variance length differ");
  ElboTerms e;
  for (std::size_t k = 0; k < bits.size(); ++k) {
    const double q = std::clamp(static_cast<double>(probs(static_cast<Eigen::Index>(k))), nn::kBceClamp,
                                1.0 - nn::kBceClamp);
    e.recon -= bits[k] ? std::log(q) : std::log(1.0 - q);
  }
  for (Eigen::Index i = 0; i < p.mean.size(); ++i) {
    const double mu = p.mean(i);
    const double lv = p.log_var(i);
    e.kl += -0.5 * (1.0 + lv - mu * mu - std::exp(lv));
  }
  e.total = e.recon + beta * e.kl;
  return e;
}

std::string TrainReport::to_csv() const {
  std::ostringstream out;
  out.precision(9);
  out << "epoch,train_loss,val_loss,link_accuracy\n";
  for (const auto& r : epochs) out << r.epoch << ',' << r.train_loss << ',' << r.val_loss << ',' << r.link_accuracy << '\n';
  return out.str();
}

int best_epoch(std::span<const double> validation_losses) {
  if (validation_losses.empty()) throw InvalidArgument("no validation losses");
  const auto it = std::min_element(validation_losses.begin(), validation_losses.end());
  return static_cast<int>(it - validation_losses.begin()) + 1;
}

EvalMetrics evaluate(const VaeModel& model, std::span<const graph::Topology> ts, double beta) {
  EvalMetrics m;
  if (ts.empty()) return m;
  const nn::Matrix x = bits_to_matrix(ts);
  const nn::Matrix enc = model.encoder().forward_batch(x);
  const int d = model.latent_dim();
  const nn::Matrix mean = enc.topRows(d);
  const nn::Matrix probs = model.decode_batch(mean);
  std::size_t correct_links = 0;
  std::size_t exact = 0;
  for (std::size_t c = 0; c < ts.size(); ++c) {
    const auto col = static_cast<Eigen::Index>(c);
    GaussianParams gp{enc.col(col).head(d), enc.col(col).tail(d)};
    const nn::Vector p = probs.col(col);
    m.loss += elbo_loss(ts[c].bits(), p, gp, beta).total;
    const auto rec = binarize(model.n(), p);
    std::size_t ok = 0;
    for (int k = 0; k < rec.slots(); ++k)
      if (rec.bits()[static_cast<std::size_t>(k)] == ts[c].bits()[static_cast<std::size_t>(k)]) ++ok;
    correct_links += ok;
    if (ok == static_cast<std::size_t>(rec.slots())) ++exact;
  }
  m.loss /= static_cast<double>(ts.size());
  m.link_accuracy = static_cast<double>(correct_links) / static_cast<double>(ts.size() * ts.front().bits().size());
  m.exact_fraction = static_cast<double>(exact) / static_cast<double>(ts.size());
  return m;
}

ElboBatchGradients elbo_gradients(const VaeModel& model, const nn::Matrix& x, const nn::Matrix& noise,
                                  double beta) {
  const int d = model.latent_dim();
  if (x.rows() != model.slots()) throw DimensionError("elbo_gradients: input rows must equal link slots");
  if (noise.rows() != d || noise.cols() != x.cols()) throw DimensionError("elbo_gradients: noise shape mismatch");
  const auto B = static_cast<float>(x.cols());
  const auto fbeta = static_cast<float>(beta);

  auto enc_trace = model.encoder().forward_trace(x);
  const nn::Matrix& enc_out = enc_trace.output();
  const nn::Matrix mu = enc_out.topRows(d);
  const nn::Matrix lv = enc_out.bottomRows(d);
  const nn::Matrix sd = (lv.array() * 0.5f).exp().matrix();
  const nn::Matrix z = mu + sd.cwiseProduct(noise);

  auto recon = nn::loss_and_gradients(model.decoder(), z, nn::LossKind::bce, x);
  ElboBatchGradients g;
  g.recon = recon.loss;
  g.kl = (-0.5 * (1.0 + lv.array().cast<double>() - mu.array().cast<double>().square() -
                  lv.array().cast<double>().exp()))
             .sum() /
         static_cast<double>(B);
  g.loss = g.recon + beta * g.kl;

  // dz/dmu = 1, dz/dlogvar = 0.5 * sd * noise; dKL/dmu = mu, dKL/dlogvar = 0.5 (exp(logvar) - 1)
  const nn::Matrix& dz = recon.grads.input;
  nn::Matrix enc_grad(2 * d, x.cols());
  enc_grad.topRows(d) = dz + mu * (fbeta / B);
  enc_grad.bottomRows(d) =
      (dz.cwiseProduct(noise).cwiseProduct(sd) * 0.5f) + ((lv.array().exp() - 1.f) * (0.5f * fbeta / B)).matrix();
  g.encoder = model.encoder().backward(enc_trace, enc_grad);
  g.decoder = std::move(recon.grads);
  return g;
}

TrainResult train_vae(graph::TopologyDataset dataset, const TrainConfig& config) {
  if (dataset.topologies.empty()) throw InvalidArgument("cannot train a VAE on an empty dataset");
  if (config.epochs < 1 || config.batch_size < 1) throw InvalidArgument("epochs and batch size must be positive");
  for (const auto& t : dataset.topologies)
    if (t.n() != dataset.n) throw InvalidArgument("dataset mixes topologies of different sizes");
  if (dataset.train_indices.empty()) graph::split_dataset(dataset, config.train_fraction, config.seed);

  std::mt19937_64 rng(config.seed);
  auto model = VaeModel::create(dataset.n, config.latent_dim, config.encoder_hidden, config.decoder_hidden, rng);
  nn::AdamState enc_opt(model.encoder(), {config.learning_rate});
  nn::AdamState dec_opt(model.decoder(), {config.learning_rate});

  std::vector<graph::Topology> validation;
  for (auto i : dataset.validation_indices) validation.push_back(dataset.topologies[i]);

  const int d = config.latent_dim;
  std::normal_distribution<float> normal(0.f, 1.f);
  std::vector<std::size_t> order = dataset.train_indices;

  TrainResult result;
  VaeModel best = model;
  double best_loss = INFINITY;
  std::vector<double> val_losses;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      std::vector<graph::Topology> batch;
      for (std::size_t i = start; i < end; ++i) batch.push_back(dataset.topologies[order[i]]);
      const nn::Matrix x = bits_to_matrix(batch);

      nn::Matrix eps(d, x.cols());
      for (Eigen::Index i = 0; i < eps.size(); ++i) eps.data()[i] = normal(rng);
      auto g = elbo_gradients(model, x, eps, config.beta);
      if (!std::isfinite(g.loss))
        throw NonFiniteError("VAE loss became non-finite at epoch " + std::to_string(epoch));
      epoch_loss += g.loss * static_cast<double>(x.cols());
      enc_opt.step(model.encoder(), g.encoder);
      dec_opt.step(model.decoder(), g.decoder);
    }
    epoch_loss /= static_cast<double>(order.size());

    const auto val = evaluate(model, validation, config.beta);
    if (!std::isfinite(val.loss))
      throw NonFiniteError("VAE validation loss became non-finite at epoch " + std::to_string(epoch));
    result.report.epochs.push_back({epoch, epoch_loss, val.loss, val.link_accuracy});
    val_losses.push_back(val.loss);
    if (val.loss < best_loss) {
      best_loss = val.loss;
      best = model;
    }
  }

  result.report.best_epoch = best_epoch(val_losses);
  result.report.best_val_loss = best_loss;
  result.report.final_link_accuracy = evaluate(best, validation, config.beta).link_accuracy;
  result.model = std::move(best);
  return result;
}

}  // namespace vaerl::vae
