#include "bugloc/neural.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <unordered_map>

#include <json.hpp>

#include "bugloc/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace bugloc::neural {

namespace {

constexpr double kLossEps = 1e-7;    // probability clamp before logs
constexpr double kProbEps = 1e-15;   // keeps forward strictly inside (0,1)

double apply_activation(Activation a, double z) {
  switch (a) {
    case Activation::Relu: return z > 0.0 ? z : 0.0;
    case Activation::Tanh: return std::tanh(z);
    case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-z));
    case Activation::Identity: return z;
  }
  return z;
}

// Derivative in terms of pre-activation z and post-activation a.
double activation_grad(Activation act, double z, double a) {
  switch (act) {
    case Activation::Relu: return z > 0.0 ? 1.0 : 0.0;
    case Activation::Tanh: return 1.0 - a * a;
    case Activation::Sigmoid: return a * (1.0 - a);
    case Activation::Identity: return 1.0;
  }
  return 1.0;
}

struct TowerCache {
  std::vector<Vector> inputs;  // input to each layer
  std::vector<Vector> pre;     // pre-activation per layer
  std::vector<Vector> post;    // post-activation per layer
};

Vector tower_forward(const std::vector<DenseLayer>& tower, const Vector& input,
                     TowerCache* cache) {
  Vector x = input;
  for (const auto& layer : tower) {
    Vector z;
    matvec(layer.weights, x, z);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] += layer.biases[i];
    Vector a(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) a[i] = apply_activation(layer.activation, z[i]);
    if (cache != nullptr) {
      cache->inputs.push_back(std::move(x));
      cache->pre.push_back(std::move(z));
      cache->post.push_back(a);
    }
    x = std::move(a);
  }
  return x;
}

// Accumulates layer gradients; returns the gradient w.r.t. the tower input.
Vector tower_backward(const std::vector<DenseLayer>& tower, const TowerCache& cache,
                      Vector d_out, std::vector<LayerGradients>& grads) {
  for (std::size_t l = tower.size(); l-- > 0;) {
    const auto& layer = tower[l];
    Vector delta(d_out.size());
    for (std::size_t i = 0; i < d_out.size(); ++i)
      delta[i] = d_out[i] * activation_grad(layer.activation, cache.pre[l][i], cache.post[l][i]);

    const Vector& input = cache.inputs[l];
    auto& g = grads[l];
    for (std::size_t r = 0; r < layer.weights.rows; ++r) {
      double* row = g.d_weights.a.data() + r * g.d_weights.cols;
      const double d = delta[r];
      for (std::size_t c = 0; c < layer.weights.cols; ++c) row[c] += d * input[c];
      g.d_biases[r] += d;
    }
    matvec_transposed(layer.weights, delta, d_out);
  }
  return d_out;
}

DenseLayer make_layer(std::size_t in, std::size_t out, Activation act, Rng& rng) {
  DenseLayer layer;
  layer.weights = Matrix(out, in);
  const double scale = std::sqrt(6.0 / static_cast<double>(in + out));
  for (auto& w : layer.weights.a) w = rng.uniform(-scale, scale);
  layer.biases.assign(out, 0.0);
  layer.activation = act;
  return layer;
}

std::vector<DenseLayer> make_tower(const TowerConfig& cfg, Rng& rng) {
  if (cfg.layer_dims.size() < 2)
    throw ConfigError("tower needs at least an input and an output dimension");
  std::vector<DenseLayer> tower;
  for (std::size_t i = 0; i + 1 < cfg.layer_dims.size(); ++i)
    tower.push_back(make_layer(cfg.layer_dims[i], cfg.layer_dims[i + 1], cfg.activation, rng));
  return tower;
}

NetGradients make_zero_gradients(const Network& net) {
  NetGradients g;
  auto zero_like = [](const std::vector<DenseLayer>& tower) {
    std::vector<LayerGradients> out;
    for (const auto& layer : tower) {
      LayerGradients lg;
      lg.d_weights = Matrix(layer.weights.rows, layer.weights.cols);
      lg.d_biases.assign(layer.biases.size(), 0.0);
      out.push_back(std::move(lg));
    }
    return out;
  };
  g.report_tower = zero_like(net.report_tower);
  g.method_tower = zero_like(net.method_tower);
  g.head.d_weights = Matrix(net.head.weights.rows, net.head.weights.cols);
  g.head.d_biases.assign(net.head.biases.size(), 0.0);
  return g;
}

void check_dims(const Network& net, const Vector& report_vec, const Vector& method_vec) {
  if (report_vec.size() != net.report_input_dim())
    throw DimensionMismatch("report vector has " + std::to_string(report_vec.size()) +
                            " components, tower expects " +
                            std::to_string(net.report_input_dim()));
  if (method_vec.size() != net.method_input_dim())
    throw DimensionMismatch("method vector has " + std::to_string(method_vec.size()) +
                            " components, tower expects " +
                            std::to_string(net.method_input_dim()));
}

// Forward pass keeping everything needed for backprop.
struct FullCache {
  TowerCache report, method;
  Vector fused;
  double head_z = 0.0;
  double p = 0.0;
};

double forward_cached(const Network& net, const Vector& report_vec, const Vector& method_vec,
                      FullCache& cache) {
  check_dims(net, report_vec, method_vec);
  const Vector r = tower_forward(net.report_tower, report_vec, &cache.report);
  const Vector m = tower_forward(net.method_tower, method_vec, &cache.method);
  cache.fused.clear();
  cache.fused.reserve(r.size() + m.size());
  cache.fused.insert(cache.fused.end(), r.begin(), r.end());
  cache.fused.insert(cache.fused.end(), m.begin(), m.end());
  if (cache.fused.size() != net.head.weights.cols)
    throw DimensionMismatch("fused tower output does not match head input");
  Vector z;
  matvec(net.head.weights, cache.fused, z);
  cache.head_z = z[0] + net.head.biases[0];
  cache.p = std::clamp(apply_activation(Activation::Sigmoid, cache.head_z), kProbEps,
                       1.0 - kProbEps);
  return cache.p;
}

// Backprop one instance into grads; optionally reports d loss / d method-input.
// Returns the forward probability so callers can reuse it for the batch loss.
double backprop_instance(const Network& net, const Vector& report_vec, const Vector& method_vec,
                         int label, const LossSpec& spec, NetGradients& grads,
                         Vector* d_method_input) {
  FullCache cache;
  const double p = forward_cached(net, report_vec, method_vec, cache);
  const double dl_dp = loss_grad_p(spec, p, label);
  const double dl_dz = dl_dp * p * (1.0 - p);

  for (std::size_t c = 0; c < cache.fused.size(); ++c)
    grads.head.d_weights.a[c] += dl_dz * cache.fused[c];
  grads.head.d_biases[0] += dl_dz;

  Vector d_fused(cache.fused.size());
  for (std::size_t c = 0; c < cache.fused.size(); ++c)
    d_fused[c] = net.head.weights.a[c] * dl_dz;

  const std::size_t r_out = cache.report.post.back().size();
  Vector d_report(d_fused.begin(), d_fused.begin() + r_out);
  Vector d_method(d_fused.begin() + r_out, d_fused.end());

  tower_backward(net.report_tower, cache.report, std::move(d_report), grads.report_tower);
  Vector d_in = tower_backward(net.method_tower, cache.method, std::move(d_method),
                               grads.method_tower);
  if (d_method_input != nullptr) *d_method_input = std::move(d_in);
  return p;
}

void scale_gradients(NetGradients& g, double factor) {
  auto scale_layers = [factor](std::vector<LayerGradients>& layers) {
    for (auto& lg : layers) {
      for (auto& w : lg.d_weights.a) w *= factor;
      for (auto& b : lg.d_biases) b *= factor;
    }
  };
  scale_layers(g.report_tower);
  scale_layers(g.method_tower);
  for (auto& w : g.head.d_weights.a) w *= factor;
  for (auto& b : g.head.d_biases) b *= factor;
}

// Per-tensor Adam/SGD state; sparse tensors (vocabulary rows) get their own
// step counters, which keeps updates deterministic regardless of when a row
// is first touched.
class ParamOptimizer {
 public:
  ParamOptimizer(Optimizer kind, double lr) : kind_(kind), lr_(lr) {}

  void apply(const std::string& id, std::vector<double>& param,
             const std::vector<double>& grad) {
    if (kind_ == Optimizer::Sgd) {
      for (std::size_t i = 0; i < param.size(); ++i) param[i] -= lr_ * grad[i];
      return;
    }
    auto& st = state_[id];
    if (st.m.empty()) {
      st.m.assign(param.size(), 0.0);
      st.v.assign(param.size(), 0.0);
    }
    ++st.t;
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(st.t));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(st.t));
    for (std::size_t i = 0; i < param.size(); ++i) {
      st.m[i] = b1 * st.m[i] + (1.0 - b1) * grad[i];
      st.v[i] = b2 * st.v[i] + (1.0 - b2) * grad[i] * grad[i];
      param[i] -= lr_ * (st.m[i] / bc1) / (std::sqrt(st.v[i] / bc2) + eps);
    }
  }

 private:
  struct State {
    std::vector<double> m, v;
    std::size_t t = 0;
  };
  Optimizer kind_;
  double lr_;
  std::unordered_map<std::string, State> state_;
};

void apply_net_update(ParamOptimizer& opt, Network& net, const NetGradients& grads) {
  auto update_tower = [&opt](const char* tag, std::vector<DenseLayer>& tower,
                             const std::vector<LayerGradients>& g) {
    for (std::size_t l = 0; l < tower.size(); ++l) {
      const std::string base = std::string(tag) + std::to_string(l);
      opt.apply(base + ".w", tower[l].weights.a, g[l].d_weights.a);
      opt.apply(base + ".b", tower[l].biases, g[l].d_biases);
    }
  };
  update_tower("r", net.report_tower, grads.report_tower);
  update_tower("m", net.method_tower, grads.method_tower);
  opt.apply("h.w", net.head.weights.a, grads.head.d_weights.a);
  opt.apply("h.b", net.head.biases, grads.head.d_biases);
}

}  // namespace

std::vector<std::size_t> method_tower_dims() { return {384, 256, 128, 64, 32}; }

std::vector<std::size_t> report_tower_dims(std::size_t input_dim) {
  switch (input_dim) {
    case 768: return {768, 512, 256, 128, 64, 32};
    case 300: return {300, 256, 128, 64, 32};
    case 100: return {100, 64, 32};
    default:
      if (input_dim >= 512) return {input_dim, 512, 256, 128, 64, 32};
      if (input_dim >= 200) return {input_dim, 256, 128, 64, 32};
      return {input_dim, 64, 32};
  }
}

Network make_network(const TowerConfig& report, const TowerConfig& method,
                     std::uint64_t seed) {
  if (report.layer_dims.back() != method.layer_dims.back())
    throw ConfigError("towers must end in the same dimension");
  Rng rng(seed);
  Network net;
  net.report_tower = make_tower(report, rng);
  net.method_tower = make_tower(method, rng);
  net.head = make_layer(2 * report.layer_dims.back(), 1, Activation::Sigmoid, rng);
  return net;
}

void LossSpec::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("loss alpha must be in (0,1)");
  if (!(gamma >= 0.0)) throw ConfigError("loss gamma must be >= 0");
  if (!(weight_neg > 0.0 && weight_pos > 0.0))
    throw ConfigError("class weights must be positive");
}

double forward(const Network& net, const Vector& report_vec, const Vector& method_vec) {
  FullCache cache;
  return forward_cached(net, report_vec, method_vec, cache);
}

double loss(const LossSpec& spec, double p, int y) {
  p = std::clamp(p, kLossEps, 1.0 - kLossEps);
  switch (spec.kind) {
    case LossKind::Bce:
      return y == 1 ? -std::log(p) : -std::log(1.0 - p);
    case LossKind::Wbce:
      return y == 1 ? spec.weight_pos * -std::log(p) : spec.weight_neg * -std::log(1.0 - p);
    case LossKind::Focal:
      return y == 1 ? -spec.alpha * std::pow(1.0 - p, spec.gamma) * std::log(p)
                    : -(1.0 - spec.alpha) * std::pow(p, spec.gamma) * std::log(1.0 - p);
  }
  return 0.0;
}

double loss_grad_p(const LossSpec& spec, double p, int y) {
  p = std::clamp(p, kLossEps, 1.0 - kLossEps);
  switch (spec.kind) {
    case LossKind::Bce:
      return y == 1 ? -1.0 / p : 1.0 / (1.0 - p);
    case LossKind::Wbce:
      return y == 1 ? -spec.weight_pos / p : spec.weight_neg / (1.0 - p);
    case LossKind::Focal:
      if (y == 1) {
        return spec.alpha * spec.gamma * std::pow(1.0 - p, spec.gamma - 1.0) * std::log(p) -
               spec.alpha * std::pow(1.0 - p, spec.gamma) / p;
      }
      return -(1.0 - spec.alpha) * spec.gamma * std::pow(p, spec.gamma - 1.0) *
                 std::log(1.0 - p) +
             (1.0 - spec.alpha) * std::pow(p, spec.gamma) / (1.0 - p);
  }
  return 0.0;
}

NetGradients gradient(const Network& net, const std::vector<TrainInstance>& batch,
                      const LossSpec& spec) {
  if (batch.empty()) throw InvariantViolation("gradient of an empty batch");
  NetGradients grads = make_zero_gradients(net);
  for (const auto& inst : batch)
    backprop_instance(net, inst.report_vec, inst.method_vec, inst.label, spec, grads, nullptr);
  scale_gradients(grads, 1.0 / static_cast<double>(batch.size()));
  return grads;
}

namespace {

double mean_loss(const Network& net, const std::vector<TrainInstance>& set,
                 const LossSpec& spec) {
  double total = 0.0;
  for (const auto& inst : set)
    total += loss(spec, forward(net, inst.report_vec, inst.method_vec), inst.label);
  return total / static_cast<double>(set.size());
}

}  // namespace

TrainResult train(const Network& initial, const std::vector<TrainInstance>& train_set,
                  const std::vector<TrainInstance>& valid_set, const LossSpec& spec,
                  const TrainConfig& cfg) {
  if (train_set.empty() || valid_set.empty())
    throw InvariantViolation("train and validation sets must be nonempty");
  spec.validate();

  TrainResult result;
  result.net = initial;
  if (cfg.epochs == 0) return result;

  Network net = initial;
  Network best = initial;
  double best_valid = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  std::size_t since_improvement = 0;

  Rng rng(cfg.rng_seed);
  ParamOptimizer opt(cfg.optimizer, cfg.learning_rate);
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);

      double batch_loss = 0.0;
      NetGradients grads = make_zero_gradients(net);
      for (std::size_t i = start; i < end; ++i) {
        const auto& inst = train_set[order[i]];
        const double p = backprop_instance(net, inst.report_vec, inst.method_vec, inst.label,
                                           spec, grads, nullptr);
        batch_loss += loss(spec, p, inst.label);
      }
      if (!std::isfinite(batch_loss))
        throw NonFiniteLoss("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(start / cfg.batch_size));
      scale_gradients(grads, 1.0 / static_cast<double>(end - start));
      apply_net_update(opt, net, grads);
      epoch_loss += batch_loss;
    }

    const double valid_loss = mean_loss(net, valid_set, spec);
    if (!std::isfinite(valid_loss))
      throw NonFiniteLoss("non-finite validation loss at epoch " + std::to_string(epoch));
    result.history.push_back(
        EpochRecord{epoch, epoch_loss / static_cast<double>(train_set.size()), valid_loss});

    if (valid_loss < best_valid) {
      best_valid = valid_loss;
      best = net;
      best_epoch = epoch;
      since_improvement = 0;
    } else if (++since_improvement >= cfg.early_stop_patience) {
      break;
    }
  }

  result.net = std::move(best);
  result.best_epoch = best_epoch;
  return result;
}

double forward_joint(const JointModel& model, const JointInstance& instance) {
  const auto method = codeast::embed_method(model.code_params, instance.contexts);
  return forward(model.net, instance.report_vec, method.vec);
}

JointGradients gradient_joint(const JointModel& model,
                              const std::vector<JointInstance>& batch,
                              const LossSpec& spec) {
  if (batch.empty()) throw InvariantViolation("gradient of an empty batch");
  JointGradients out;
  out.net = make_zero_gradients(model.net);
  out.code.d_combine = Matrix(model.code_params.combine_weights.rows,
                              model.code_params.combine_weights.cols);
  out.code.d_attention.assign(codeast::kMethodVectorDim, 0.0);

  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (const auto& inst : batch) {
    const auto method = codeast::embed_method(model.code_params, inst.contexts);
    Vector d_method_input;
    backprop_instance(model.net, inst.report_vec, method.vec, inst.label, spec, out.net,
                      &d_method_input);
    if (method.degenerate) continue;  // no contexts, nothing flows into the aggregator

    const auto code_grads =
        codeast::embed_method_backward(model.code_params, inst.contexts, d_method_input);
    for (std::size_t i = 0; i < code_grads.d_combine.a.size(); ++i)
      out.code.d_combine.a[i] += code_grads.d_combine.a[i] * inv_n;
    for (std::size_t i = 0; i < code_grads.d_attention.size(); ++i)
      out.code.d_attention[i] += code_grads.d_attention[i] * inv_n;
    for (const auto& [key, grad] : code_grads.d_tokens) {
      auto& slot = out.code.d_tokens[key];
      if (slot.empty()) slot.assign(grad.size(), 0.0);
      axpy(inv_n, grad, slot);
    }
    for (const auto& [key, grad] : code_grads.d_paths) {
      auto& slot = out.code.d_paths[key];
      if (slot.empty()) slot.assign(grad.size(), 0.0);
      axpy(inv_n, grad, slot);
    }
  }
  scale_gradients(out.net, inv_n);
  return out;
}

namespace {

double mean_loss_joint(const JointModel& model, const std::vector<JointInstance>& set,
                       const LossSpec& spec) {
  double total = 0.0;
  for (const auto& inst : set) total += loss(spec, forward_joint(model, inst), inst.label);
  return total / static_cast<double>(set.size());
}

void apply_code_update(ParamOptimizer& opt, codeast::CodeVectorizerParams& params,
                       const codeast::AttentionGradients& grads) {
  opt.apply("c.w", params.combine_weights.a, grads.d_combine.a);
  opt.apply("c.a", params.attention_vector, grads.d_attention);
  for (const auto& [key, grad] : grads.d_tokens) {
    auto& target = key.empty() ? params.unk_token : params.token_vocab.at(key);
    opt.apply("c.t." + key, target, grad);
  }
  for (const auto& [key, grad] : grads.d_paths) {
    auto& target = key.empty() ? params.unk_path : params.path_vocab.at(key);
    opt.apply("c.p." + key, target, grad);
  }
}

}  // namespace

JointTrainResult train_joint(const JointModel& initial,
                             const std::vector<JointInstance>& train_set,
                             const std::vector<JointInstance>& valid_set,
                             const LossSpec& spec, const TrainConfig& cfg) {
  if (train_set.empty() || valid_set.empty())
    throw InvariantViolation("train and validation sets must be nonempty");
  spec.validate();

  JointTrainResult result;
  result.model = initial;
  if (cfg.epochs == 0) return result;

  JointModel model = initial;
  JointModel best = initial;
  double best_valid = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  std::size_t since_improvement = 0;

  Rng rng(cfg.rng_seed);
  ParamOptimizer opt(cfg.optimizer, cfg.learning_rate);
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<JointInstance> batch;
      batch.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) batch.push_back(train_set[order[i]]);

      for (const auto& inst : batch) epoch_loss += loss(spec, forward_joint(model, inst), inst.label);

      const JointGradients grads = gradient_joint(model, batch, spec);
      apply_net_update(opt, model.net, grads.net);
      apply_code_update(opt, model.code_params, grads.code);
    }
    if (!std::isfinite(epoch_loss))
      throw NonFiniteLoss("non-finite loss at epoch " + std::to_string(epoch));

    const double valid_loss = mean_loss_joint(model, valid_set, spec);
    if (!std::isfinite(valid_loss))
      throw NonFiniteLoss("non-finite validation loss at epoch " + std::to_string(epoch));
    result.history.push_back(
        EpochRecord{epoch, epoch_loss / static_cast<double>(train_set.size()), valid_loss});

    if (valid_loss < best_valid) {
      best_valid = valid_loss;
      best = model;
      best_epoch = epoch;
      since_improvement = 0;
    } else if (++since_improvement >= cfg.early_stop_patience) {
      break;
    }
  }

  result.model = std::move(best);
  result.best_epoch = best_epoch;
  return result;
}

std::vector<double> score_batch(const Network& net, const Vector& report_vec,
                                const std::vector<const Vector*>& method_vecs,
                                ExecMode mode) {
  // The report half does not depend on the candidate; run it once.
  const Vector report_out = tower_forward(net.report_tower, report_vec, nullptr);
  const std::size_t t = report_out.size();

  auto score_one = [&](const Vector& method_vec) {
    if (method_vec.size() != net.method_input_dim())
      throw DimensionMismatch("method vector size mismatch in score_batch");
    const Vector method_out = tower_forward(net.method_tower, method_vec, nullptr);
    double z = net.head.biases[0];
    for (std::size_t i = 0; i < t; ++i) z += net.head.weights.a[i] * report_out[i];
    for (std::size_t i = 0; i < method_out.size(); ++i)
      z += net.head.weights.a[t + i] * method_out[i];
    return std::clamp(apply_activation(Activation::Sigmoid, z), kProbEps, 1.0 - kProbEps);
  };

  std::vector<double> scores(method_vecs.size());
  if (mode == ExecMode::Parallel) {
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(method_vecs.size()); ++i)
      scores[static_cast<std::size_t>(i)] = score_one(*method_vecs[static_cast<std::size_t>(i)]);
  } else {
    for (std::size_t i = 0; i < method_vecs.size(); ++i) scores[i] = score_one(*method_vecs[i]);
  }
  return scores;
}

namespace {

nlohmann::json layer_to_json(const DenseLayer& layer) {
  return nlohmann::json{{"in", layer.weights.cols},
                        {"out", layer.weights.rows},
                        {"activation", activation_name(layer.activation)},
                        {"weights", layer.weights.a},
                        {"biases", layer.biases}};
}

DenseLayer layer_from_json(const nlohmann::json& j) {
  DenseLayer layer;
  const auto in = j.at("in").get<std::size_t>();
  const auto out = j.at("out").get<std::size_t>();
  layer.activation = activation_from_name(j.at("activation").get<std::string>());
  layer.weights = Matrix(out, in);
  const auto weights = j.at("weights").get<std::vector<double>>();
  if (weights.size() != out * in)
    throw ParseError("checkpoint layer has " + std::to_string(weights.size()) +
                     " weights, expected " + std::to_string(out * in));
  layer.weights.a = weights;
  layer.biases = j.at("biases").get<std::vector<double>>();
  if (layer.biases.size() != out) throw ParseError("checkpoint layer bias size mismatch");
  for (double v : layer.weights.a)
    if (!std::isfinite(v)) throw ParseError("non-finite weight in checkpoint");
  for (double v : layer.biases)
    if (!std::isfinite(v)) throw ParseError("non-finite bias in checkpoint");
  return layer;
}

}  // namespace

void save_checkpoint(const Network& net, const std::string& path) {
  nlohmann::json towers;
  nlohmann::json report = nlohmann::json::array();
  for (const auto& layer : net.report_tower) report.push_back(layer_to_json(layer));
  nlohmann::json method = nlohmann::json::array();
  for (const auto& layer : net.method_tower) method.push_back(layer_to_json(layer));
  towers["report"] = std::move(report);
  towers["method"] = std::move(method);

  nlohmann::json doc;
  doc["format_version"] = 1;
  doc["config"] = {{"report_input", net.report_input_dim()},
                   {"method_input", net.method_input_dim()}};
  doc["towers"] = std::move(towers);
  doc["head"] = layer_to_json(net.head);

  std::ofstream out(path);
  if (!out) throw ParseError("cannot write checkpoint: " + path);
  out << doc.dump(2) << '\n';
}

Network load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open checkpoint: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("invalid JSON in checkpoint " + path + ": " + e.what());
  }
  try {
    if (doc.at("format_version").get<int>() != 1)
      throw ParseError("unsupported checkpoint format_version in " + path);
    Network net;
    for (const auto& j : doc.at("towers").at("report")) net.report_tower.push_back(layer_from_json(j));
    for (const auto& j : doc.at("towers").at("method")) net.method_tower.push_back(layer_from_json(j));
    net.head = layer_from_json(doc.at("head"));
    if (net.report_tower.empty() || net.method_tower.empty())
      throw ParseError("checkpoint towers must be nonempty");
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("bad checkpoint schema in " + path + ": " + e.what());
  }
}

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Identity: return "identity";
  }
  return "identity";
}

Activation activation_from_name(const std::string& name) {
  if (name == "relu") return Activation::Relu;
  if (name == "tanh") return Activation::Tanh;
  if (name == "sigmoid") return Activation::Sigmoid;
  if (name == "identity") return Activation::Identity;
  throw ParseError("unknown activation '" + name + "'");
}

}  // namespace bugloc::neural
