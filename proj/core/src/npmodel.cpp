#include "lal/npmodel.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <numbers>

#include "json.hpp"
#include "lal/rng.hpp"
#include "lal/strategies.hpp"

namespace lal {
namespace {

using ad::Tensor;

Tensor uniform_tensor(ad::Shape shape, double bound, Rng& rng) {
  std::vector<double> data(ad::shape_size(shape));
  for (auto& v : data) v = bound * (2.0 * uniform01(rng) - 1.0);
  return Tensor::parameter(std::move(shape), std::move(data));
}

LinearLayer make_linear(std::size_t in, std::size_t out, Rng& rng, std::size_t fan_in = 0) {
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in ? fan_in : in));
  LinearLayer l;
  l.w = uniform_tensor({in, out}, bound, rng);
  l.b = uniform_tensor({out}, bound, rng);
  return l;
}

Tensor apply(const LinearLayer& l, const Tensor& x) { return ad::add(ad::matmul(x, l.w), l.b); }

// Linear layers with ReLU between them (not after the last).
Tensor mlp(const std::vector<LinearLayer>& layers, Tensor x) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    x = apply(layers[i], x);
    if (i + 1 < layers.size()) x = ad::relu(x);
  }
  return x;
}

Tensor matrix_to_tensor(const Matrix& m) {
  return Tensor::constant({1, static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())},
                          std::vector<double>(m.data(), m.data() + m.size()));
}

}  // namespace

void validate(const NPConfig& cfg) {
  if (cfg.hidden_dim == 0 || cfg.attention_heads == 0 || cfg.epochs == 0 || cfg.batch_size == 0 ||
      cfg.enc1_hidden_layers == 0 || cfg.context_enc_layers == 0) {
    throw ConfigError("np config sizes must be positive");
  }
  if (cfg.hidden_dim % cfg.attention_heads != 0) throw ConfigError("hidden_dim must be divisible by attention_heads");
  if (!(cfg.lr > 0) || !(cfg.lr_decay_factor >= 1.0)) throw ConfigError("np learning rate settings invalid");
  if (!(cfg.sigma_floor > 0 && cfg.sigma_floor < 1)) throw ConfigError("sigma_floor must lie in (0, 1)");
}

std::vector<Tensor*> NPParams::tensor_refs() {
  std::vector<Tensor*> out;
  auto push = [&](LinearLayer& l) {
    out.push_back(&l.w);
    out.push_back(&l.b);
  };
  for (auto& l : encoder) push(l);
  out.push_back(&encoder_label_w);
  for (auto& l : context_encoder) push(l);
  for (auto& l : value_mlp) push(l);
  push(query);
  push(key);
  push(value);
  push(output);
  out.push_back(&norm_gain);
  out.push_back(&norm_bias);
  for (auto& l : decoder) push(l);
  return out;
}

std::vector<Tensor> NPParams::tensors() const {
  std::vector<Tensor> out;
  for (const Tensor* t : const_cast<NPParams*>(this)->tensor_refs()) out.push_back(*t);
  return out;
}

std::vector<std::string> NPParams::tensor_names() const {
  std::vector<std::string> out;
  auto push = [&](const std::string& name) {
    out.push_back(name + ".w");
    out.push_back(name + ".b");
  };
  for (std::size_t i = 0; i < encoder.size(); ++i) push("encoder." + std::to_string(i));
  out.push_back("encoder.label_w");
  for (std::size_t i = 0; i < context_encoder.size(); ++i) push("context_encoder." + std::to_string(i));
  for (std::size_t i = 0; i < value_mlp.size(); ++i) push("value_mlp." + std::to_string(i));
  push("attention.query");
  push("attention.key");
  push("attention.value");
  push("attention.output");
  out.push_back("norm.gain");
  out.push_back("norm.bias");
  for (std::size_t i = 0; i < decoder.size(); ++i) push("decoder." + std::to_string(i));
  return out;
}

std::size_t NPParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors()) n += t.size();
  return n;
}

NPParams init_np(std::size_t feature_dim, const NPConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  if (feature_dim == 0) throw ConfigError("init_np: feature_dim must be >= 1");
  Rng rng = make_rng({seed, 0x9e11});
  const std::size_t h = cfg.hidden_dim;
  NPParams p;
  p.cfg = cfg;
  p.feature_dim = feature_dim;
  // First layer sees K features plus the label channel on context points.
  p.encoder.push_back(make_linear(feature_dim, h, rng, feature_dim + 1));
  p.encoder_label_w = uniform_tensor({1, h}, std::sqrt(1.0 / static_cast<double>(feature_dim + 1)), rng);
  for (std::size_t i = 0; i < cfg.enc1_hidden_layers; ++i) p.encoder.push_back(make_linear(h, h, rng));
  for (std::size_t i = 0; i < cfg.context_enc_layers; ++i) p.context_encoder.push_back(make_linear(h, h, rng));
  for (std::size_t i = 0; i <= cfg.value_mlp_hidden_layers; ++i) p.value_mlp.push_back(make_linear(h, h, rng));
  p.query = make_linear(h, h, rng);
  p.key = make_linear(h, h, rng);
  p.value = make_linear(h, h, rng);
  p.output = make_linear(h, h, rng);
  p.norm_gain = Tensor::parameter({h}, std::vector<double>(h, 1.0));
  p.norm_bias = Tensor::parameter({h}, std::vector<double>(h, 0.0));
  p.decoder.push_back(make_linear(2 * h, h, rng));
  p.decoder.push_back(make_linear(h, 2, rng));
  return p;
}

NPForward np_forward_batch(const NPParams& p, const Tensor& context, const Tensor& context_labels,
                           const Tensor& targets) {
  if (context.rank() != 3 || targets.rank() != 3 || context_labels.rank() != 3 || context.dim(0) != targets.dim(0) ||
      context.dim(2) != p.feature_dim || targets.dim(2) != p.feature_dim || context_labels.dim(0) != context.dim(0) ||
      context_labels.dim(1) != context.dim(1) || context_labels.dim(2) != 1) {
    throw ShapeError("np_forward: context " + ad::shape_string(context.shape()) + ", labels " +
                     ad::shape_string(context_labels.shape()) + ", targets " + ad::shape_string(targets.shape()) +
                     " do not fit feature_dim " + std::to_string(p.feature_dim));
  }
  if (context.dim(1) == 0 || targets.dim(1) == 0) throw ShapeError("np_forward: empty context or target set");
  const std::size_t heads = p.cfg.attention_heads;
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(p.cfg.hidden_dim / heads));

  // Shared pointwise encoder.
  const auto& first = p.encoder.front();
  const std::vector<LinearLayer> rest(p.encoder.begin() + 1, p.encoder.end());
  Tensor ctx = ad::add(ad::add(ad::matmul(context, first.w), ad::matmul(context_labels, p.encoder_label_w)), first.b);
  Tensor tgt = apply(first, targets);
  ctx = mlp(rest, ad::relu(ctx));
  tgt = mlp(rest, ad::relu(tgt));

  const Tensor ctx_features = mlp(p.context_encoder, ctx);
  const Tensor values = mlp(p.value_mlp, ctx_features);

  // Cross-attention: targets query the context; no self-attention anywhere.
  const Tensor q = ad::split_heads(apply(p.query, tgt), heads);
  const Tensor k = ad::split_heads(apply(p.key, ctx), heads);
  const Tensor v = ad::split_heads(apply(p.value, values), heads);
  const Tensor weights = ad::softmax(ad::scale(ad::matmul(q, ad::transpose_last2(k)), inv_sqrt_dk));
  const Tensor attended = ad::merge_heads(ad::matmul(weights, v), heads);
  const Tensor residual = ad::add(tgt, apply(p.output, attended));
  const Tensor rep = ad::add(ad::mul(ad::layer_norm(residual), p.norm_gain), p.norm_bias);

  const Tensor stats = mlp(p.decoder, ad::concat(rep, tgt));
  NPForward out;
  out.mu = ad::slice_last(stats, 0, 1);
  const double floor = p.cfg.sigma_floor;
  out.sigma = ad::add_scalar(ad::scale(ad::softplus(ad::slice_last(stats, 1, 1)), 1.0 - floor), floor);
  out.attention_weights = weights;
  out.attention_output = attended;
  out.representation = rep;
  return out;
}

PredictiveOutput np_forward(const NPParams& params, const Matrix& context, const Matrix& targets) {
  const Tensor labels = Tensor::constant({1, static_cast<std::size_t>(context.rows()), 1},
                                         std::vector<double>(static_cast<std::size_t>(context.rows()), 0.0));
  const auto f = np_forward_batch(params, matrix_to_tensor(context), labels, matrix_to_tensor(targets));
  PredictiveOutput out;
  out.mu.assign(f.mu.data().begin(), f.mu.data().end());
  out.sigma.assign(f.sigma.data().begin(), f.sigma.data().end());
  return out;
}

Tensor gaussian_nll(const Tensor& mu, const Tensor& sigma, const Tensor& y) {
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  const Tensor z = ad::div(ad::sub(y, mu), sigma);
  const Tensor point = ad::add(ad::log(sigma), ad::scale(ad::square(z), 0.5));
  return ad::add_scalar(ad::reduce_mean(point), half_log_2pi);
}

double gaussian_nll(const PredictiveOutput& out, std::span<const double> targets) {
  if (out.mu.size() != targets.size() || out.sigma.size() != targets.size() || targets.empty()) {
    throw ShapeError("gaussian_nll: length mismatch");
  }
  double total = 0.0;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    const double s = out.sigma[t], d = targets[t] - out.mu[t];
    total += 0.5 * std::log(2.0 * std::numbers::pi * s * s) + d * d / (2.0 * s * s);
  }
  return total / static_cast<double>(targets.size());
}

NPTrainResult train_np(const std::vector<SimulatedScenario>& scenarios, const Matrix& features, const NPConfig& cfg,
                       std::uint64_t seed) {
  if (scenarios.empty()) throw Error("train_np: no scenarios");
  NPTrainResult result{init_np(static_cast<std::size_t>(features.cols()), cfg, seed), {}};
  auto& params = result.params;
  std::map<std::pair<std::size_t, std::size_t>, IndexList> groups;
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    const auto& s = scenarios[i];
    if (s.targets.size() != s.s_pool.size()) throw Error("train_np: scenario " + std::to_string(i) + " is not labeled");
    groups[{s.s_annot.size(), s.s_pool.size()}].push_back(i);
  }
  const std::size_t k = static_cast<std::size_t>(features.cols());
  auto rows_tensor = [&](const IndexList& batch, bool context) {
    const std::size_t n = context ? scenarios[batch.front()].s_annot.size() : scenarios[batch.front()].s_pool.size();
    std::vector<double> data;
    data.reserve(batch.size() * n * k);
    for (auto i : batch) {
      const auto& idx = context ? scenarios[i].s_annot : scenarios[i].s_pool;
      for (auto r : idx) {
        const auto row = features.row(static_cast<Eigen::Index>(r));
        data.insert(data.end(), row.data(), row.data() + k);
      }
    }
    return Tensor::constant({batch.size(), n, k}, std::move(data));
  };

  Rng rng = make_rng({seed, 0x7a11});
  auto params_list = params.tensors();
  ad::AdamState adam;
  adam.lr = cfg.lr;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    adam.lr = cfg.lr * std::pow(cfg.lr_decay_factor, -static_cast<double>(epoch) / static_cast<double>(cfg.epochs));
    std::vector<IndexList> batches;
    for (auto& [size, members] : groups) {
      shuffle(members.begin(), members.end(), rng);
      for (std::size_t s = 0; s < members.size(); s += cfg.batch_size) {
        const auto e = std::min(members.size(), s + cfg.batch_size);
        batches.emplace_back(members.begin() + static_cast<std::ptrdiff_t>(s), members.begin() + static_cast<std::ptrdiff_t>(e));
      }
    }
    shuffle(batches.begin(), batches.end(), rng);
    double weighted = 0.0;
    std::size_t count = 0;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const auto& batch = batches[bi];
      const Tensor ctx = rows_tensor(batch, true);
      const Tensor tgt = rows_tensor(batch, false);
      const Tensor labels = Tensor::constant({ctx.dim(0), ctx.dim(1), 1}, std::vector<double>(ctx.dim(0) * ctx.dim(1), 0.0));
      std::vector<double> y;
      for (auto i : batch) y.insert(y.end(), scenarios[i].targets.begin(), scenarios[i].targets.end());
      const Tensor yt = Tensor::constant({tgt.dim(0), tgt.dim(1), 1}, std::move(y));
      const auto f = np_forward_batch(params, ctx, labels, tgt);
      const Tensor loss = gaussian_nll(f.mu, f.sigma, yt);
      const double value = loss.item();
      if (!std::isfinite(value)) {
        throw Error("train_np: non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(bi) +
                    " (context " + std::to_string(ctx.dim(1)) + ", targets " + std::to_string(tgt.dim(1)) + ")");
      }
      ad::backward(loss);
      ad::adam_step(params_list, adam);
      weighted += value * static_cast<double>(yt.size());
      count += yt.size();
    }
    result.epoch_loss.push_back(weighted / static_cast<double>(count));
  }
  return result;
}

std::size_t select_np(const NPParams& params, const ALState& state) {
  if (state.pool_size() == 0) throw Error("select_np: empty pool");
  const auto out = np_forward(params, state.annotated_features(), state.pool_features());
  return argmax_first(out.mu);
}

void save_np(const NPParams& params, const std::filesystem::path& blob, const std::filesystem::path& manifest) {
  nlohmann::json j;
  j["format"] = "lal-np-checkpoint/1";
  j["feature_dim"] = params.feature_dim;
  const auto& c = params.cfg;
  j["config"] = {{"hidden_dim", c.hidden_dim},
                 {"enc1_hidden_layers", c.enc1_hidden_layers},
                 {"context_enc_layers", c.context_enc_layers},
                 {"value_mlp_hidden_layers", c.value_mlp_hidden_layers},
                 {"attention_heads", c.attention_heads},
                 {"epochs", c.epochs},
                 {"batch_size", c.batch_size},
                 {"lr", c.lr},
                 {"lr_decay_factor", c.lr_decay_factor},
                 {"sigma_floor", c.sigma_floor}};
  std::ofstream out(blob, std::ios::binary);
  if (!out) throw Error("cannot write " + blob.string());
  std::size_t offset = 0;
  const auto names = params.tensor_names();
  const auto tensors = params.tensors();
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    j["tensors"].push_back({{"name", names[i]}, {"shape", tensors[i].shape()}, {"offset", offset}});
    out.write(reinterpret_cast<const char*>(tensors[i].data().data()),
              static_cast<std::streamsize>(tensors[i].size() * sizeof(double)));
    offset += tensors[i].size();
  }
  std::ofstream m(manifest);
  if (!m) throw Error("cannot write " + manifest.string());
  m << j.dump(2) << "\n";
}

NPParams load_np(const std::filesystem::path& blob, const std::filesystem::path& manifest) {
  std::ifstream m(manifest);
  if (!m) throw Error("cannot read " + manifest.string());
  const auto j = nlohmann::json::parse(m);
  NPConfig c;
  const auto& jc = j.at("config");
  c.hidden_dim = jc.at("hidden_dim");
  c.enc1_hidden_layers = jc.at("enc1_hidden_layers");
  c.context_enc_layers = jc.at("context_enc_layers");
  c.value_mlp_hidden_layers = jc.at("value_mlp_hidden_layers");
  c.attention_heads = jc.at("attention_heads");
  c.epochs = jc.at("epochs");
  c.batch_size = jc.at("batch_size");
  c.lr = jc.at("lr");
  c.lr_decay_factor = jc.at("lr_decay_factor");
  c.sigma_floor = jc.at("sigma_floor");
  NPParams p = init_np(j.at("feature_dim"), c, 0);
  std::ifstream in(blob, std::ios::binary);
  if (!in) throw Error("cannot read " + blob.string());
  auto tensors = p.tensors();
  const auto& listed = j.at("tensors");
  if (listed.size() != tensors.size()) throw Error("checkpoint tensor count mismatch");
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (listed[i].at("shape").get<ad::Shape>() != tensors[i].shape()) throw Error("checkpoint shape mismatch");
    in.read(reinterpret_cast<char*>(tensors[i].data().data()), static_cast<std::streamsize>(tensors[i].size() * sizeof(double)));
  }
  if (!in) throw Error("checkpoint blob truncated");
  return p;
}

}  // namespace lal
