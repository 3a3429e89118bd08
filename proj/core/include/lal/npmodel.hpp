#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lal/dataset.hpp"
#include "lal/scenario.hpp"
#include "lal/tensor.hpp"

namespace lal {

struct NPConfig {
  std::size_t hidden_dim = 32;
  std::size_t enc1_hidden_layers = 1;    // shared point encoder
  std::size_t context_enc_layers = 2;    // context-side MLP (linear layers)
  std::size_t value_mlp_hidden_layers = 2;
  std::size_t attention_heads = 8;
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  double lr = 1e-3;
  /// Learning rate decays exponentially by this factor over all epochs.
  double lr_decay_factor = 10.0;
  double sigma_floor = 0.01;
};

void validate(const NPConfig& cfg);

struct LinearLayer {
  ad::Tensor w;  // [in, out]
  ad::Tensor b;  // [out]
};

/// Attentive conditional neural process weights.
struct NPParams {
  NPConfig cfg;
  std::size_t feature_dim = 0;

  // Shared point encoder. The first layer's feature rows act on both context and
  // target points; context points additionally feed a label channel through
  // `encoder_label_w`.
  std::vector<LinearLayer> encoder;
  ad::Tensor encoder_label_w;  // [1, hidden]
  std::vector<LinearLayer> context_encoder;
  std::vector<LinearLayer> value_mlp;
  LinearLayer query, key, value, output;
  ad::Tensor norm_gain, norm_bias;
  std::vector<LinearLayer> decoder;

  /// Every trainable tensor in a fixed order.
  std::vector<ad::Tensor> tensors() const;
  /// Same order as tensors(); lets callers swap individual weights.
  std::vector<ad::Tensor*> tensor_refs();
  std::vector<std::string> tensor_names() const;
  std::size_t parameter_count() const;
};

NPParams init_np(std::size_t feature_dim, const NPConfig& cfg, std::uint64_t seed);

struct PredictiveOutput {
  std::vector<double> mu;
  std::vector<double> sigma;
};

/// Batched forward graph: context [B, n, K], context labels [B, n, 1],
/// targets [B, m, K]. mu and sigma are [B, m, 1].
struct NPForward {
  ad::Tensor mu;
  ad::Tensor sigma;
  ad::Tensor attention_weights;  // [B * heads, m, n]
  ad::Tensor attention_output;   // merged heads before the output projection, [B, m, hidden]
  ad::Tensor representation;     // post residual + norm, [B, m, hidden]
};

NPForward np_forward_batch(const NPParams& params, const ad::Tensor& context, const ad::Tensor& context_labels,
                           const ad::Tensor& targets);

/// Single problem; context labels are the fixed 0 channel.
PredictiveOutput np_forward(const NPParams& params, const Matrix& context, const Matrix& targets);

/// Mean over targets of 0.5 log(2 pi sigma^2) + (y - mu)^2 / (2 sigma^2).
ad::Tensor gaussian_nll(const ad::Tensor& mu, const ad::Tensor& sigma, const ad::Tensor& y);
double gaussian_nll(const PredictiveOutput& out, std::span<const double> targets);

struct NPTrainResult {
  NPParams params;
  std::vector<double> epoch_loss;
};

/// Trains a fresh model on labeled scenarios whose indices point into the rows
/// of `features`. Scenarios of equal (|s_annot|, |s_pool|) are batched together.
NPTrainResult train_np(const std::vector<SimulatedScenario>& scenarios, const Matrix& features,
                       const NPConfig& cfg, std::uint64_t seed);

/// argmax over pool positions of the predicted mean with the full annotated set
/// as context.
std::size_t select_np(const NPParams& params, const ALState& state);

/// Flat little-endian float64 blob plus a JSON manifest of names and shapes.
void save_np(const NPParams& params, const std::filesystem::path& blob, const std::filesystem::path& manifest);
NPParams load_np(const std::filesystem::path& blob, const std::filesystem::path& manifest);

}  // namespace lal
