#pragma once

// Variational autoencoder over flattened topologies. The encoder emits the
// mean and log-variance of a diagonal Gaussian; the decoder maps a latent
// vector to per-link probabilities through a sigmoid head.

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "vaerl/graph.hpp"
#include "vaerl/nn.hpp"

namespace vaerl::vae {

struct GaussianParams {
  nn::Vector mean;
  nn::Vector log_var;
};

class VaeModel {
 public:
  VaeModel() = default;
  VaeModel(int n, int latent_dim, nn::DenseNet encoder, nn::DenseNet decoder);

  static VaeModel create(int n, int latent_dim, std::span<const int> encoder_hidden,
                         std::span<const int> decoder_hidden, std::mt19937_64& rng);

  int n() const { return n_; }
  int latent_dim() const { return latent_dim_; }
  int slots() const { return graph::link_slots(n_); }

  const nn::DenseNet& encoder() const { return encoder_; }
  const nn::DenseNet& decoder() const { return decoder_; }
  nn::DenseNet& encoder() { return encoder_; }
  nn::DenseNet& decoder() { return decoder_; }

  GaussianParams encode(const graph::Topology& t) const;
  nn::Vector decode(const nn::Vector& z) const;
  // Columns are latent vectors; returns link probabilities column-wise.
  nn::Matrix decode_batch(const nn::Matrix& z) const;

  // Writes encoder.ckpt, decoder.ckpt and vae.json into `dir`.
  void save(const std::string& dir) const;
  static VaeModel load(const std::string& dir);

  // CRC32 over both networks' checkpoints.
  std::uint32_t checksum() const;

 private:
  int n_ = 0;
  int latent_dim_ = 0;
  nn::DenseNet encoder_;
  nn::DenseNet decoder_;
};

nn::Matrix bits_to_matrix(std::span<const graph::Topology> ts);

// z = mean + exp(0.5 * log_var) * noise
nn::Vector reparameterize(const GaussianParams& p, const nn::Vector& noise);

// Link present iff p >= threshold (ties count as a link).
graph::Topology binarize(int n, std::span<const float> probs, float threshold = 0.5f);
graph::Topology binarize(int n, const nn::Vector& probs, float threshold = 0.5f);

struct ElboTerms {
  double total = 0;
  double recon = 0;  // binary cross-entropy summed over links
  double kl = 0;     // KL(q(z|x) || N(0, I))
};

// Probabilities are clamped to [1e-7, 1 - 1e-7] before the log.
ElboTerms elbo_loss(std::span<const std::uint8_t> bits, const nn::Vector& probs, const GaussianParams& p,
                    double beta = 1.0);

struct ElboBatchGradients {
  double loss = 0;  // mean over the batch of recon + beta * kl
  double recon = 0;
  double kl = 0;
  nn::Gradients<float> encoder;
  nn::Gradients<float> decoder;
};

// Gradients of the batch-mean negative ELBO for inputs `x` (links x batch)
// with the reparameterization noise `noise` (latent x batch) held fixed.
ElboBatchGradients elbo_gradients(const VaeModel& model, const nn::Matrix& x, const nn::Matrix& noise,
                                  double beta = 1.0);

struct TrainConfig {
  int latent_dim = 6;
  std::vector<int> encoder_hidden{512, 256};
  std::vector<int> decoder_hidden{256, 512};
  int epochs = 200;
  int batch_size = 64;
  double learning_rate = 1e-3;
  double beta = 1.0;
  double train_fraction = 0.9;
  std::uint64_t seed = 0;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0;
  double val_loss = 0;
  double link_accuracy = 0;  // validation, decode(mean) binarized vs input
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_val_loss = 0;
  double final_link_accuracy = 0;  // of the saved (best) model on validation

  // epoch,train_loss,val_loss,link_accuracy
  std::string to_csv() const;
};

struct TrainResult {
  VaeModel model;  // best-validation-loss model
  TrainReport report;
};

// 1-based index of the smallest value; earliest wins ties.
int best_epoch(std::span<const double> validation_losses);

// Validation metrics use the posterior mean (no sampling), so they are deterministic.
struct EvalMetrics {
  double loss = 0;
  double link_accuracy = 0;
  double exact_fraction = 0;  // fraction reconstructed exactly
};
EvalMetrics evaluate(const VaeModel& model, std::span<const graph::Topology> ts, double beta = 1.0);

// Throws InvalidArgument on an empty dataset and NonFiniteError on divergence.
// Splits the dataset first when it carries no split.
TrainResult train_vae(graph::TopologyDataset dataset, const TrainConfig& config);

}  // namespace vaerl::vae
