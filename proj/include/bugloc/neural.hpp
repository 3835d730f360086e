#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "bugloc/codeast.hpp"
#include "bugloc/errors.hpp"
#include "bugloc/linalg.hpp"

namespace bugloc::neural {

enum class Activation { Relu, Tanh, Sigmoid, Identity };

struct TowerConfig {
  std::vector<std::size_t> layer_dims;  // input dimension first
  Activation activation = Activation::Relu;
};

// Default tower layouts: 384-d methods and the three report widths.
std::vector<std::size_t> method_tower_dims();
std::vector<std::size_t> report_tower_dims(std::size_t input_dim);

struct DenseLayer {
  Matrix weights;  // out x in
  Vector biases;
  Activation activation = Activation::Identity;
};

// Two towers ending in the same width t, fused by concatenation into a
// 2t -> 1 sigmoid head. The production configuration is t = 32.
struct Network {
  std::vector<DenseLayer> report_tower;
  std::vector<DenseLayer> method_tower;
  DenseLayer head;

  std::size_t report_input_dim() const { return report_tower.front().weights.cols; }
  std::size_t method_input_dim() const { return method_tower.front().weights.cols; }
};

Network make_network(const TowerConfig& report, const TowerConfig& method,
                     std::uint64_t seed);

enum class LossKind { Bce, Wbce, Focal };

struct LossSpec {
  LossKind kind = LossKind::Bce;
  double alpha = 0.25;
  double gamma = 2.0;
  double weight_neg = 1.0;
  double weight_pos = 1.0;

  void validate() const;
};

struct TrainInstance {
  Vector report_vec;
  Vector method_vec;
  int label = 0;  // 0 or 1
};

enum class Optimizer { Sgd, Adam };

struct TrainConfig {
  Optimizer optimizer = Optimizer::Adam;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t epochs = 0;
  std::uint64_t rng_seed = 0;
  std::size_t early_stop_patience = 5;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double valid_loss = 0.0;
};

struct TrainResult {
  Network net;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;  // 1-based; 0 when no epoch ran
};

double forward(const Network& net, const Vector& report_vec, const Vector& method_vec);

inline double predict_score(const Network& net, const Vector& report_vec,
                            const Vector& method_vec) {
  return forward(net, report_vec, method_vec);
}

// Probability is clamped to [eps, 1-eps] before the logs.
double loss(const LossSpec& spec, double p, int y);

// d loss / d p at the (clamped) probability.
double loss_grad_p(const LossSpec& spec, double p, int y);

struct LayerGradients {
  Matrix d_weights;
  Vector d_biases;
};

struct NetGradients {
  std::vector<LayerGradients> report_tower;
  std::vector<LayerGradients> method_tower;
  LayerGradients head;
};

// Exact analytic gradient of the mean batch loss.
NetGradients gradient(const Network& net, const std::vector<TrainInstance>& batch,
                      const LossSpec& spec);

TrainResult train(const Network& initial, const std::vector<TrainInstance>& train_set,
                  const std::vector<TrainInstance>& valid_set, const LossSpec& spec,
                  const TrainConfig& cfg);

// Joint-training instance: the method side enters as path-contexts and is
// embedded through the attention aggregator inside the loss.
struct JointInstance {
  Vector report_vec;
  std::vector<codeast::PathContext> contexts;
  int label = 0;
};

struct JointModel {
  Network net;
  codeast::CodeVectorizerParams code_params;
};

double forward_joint(const JointModel& model, const JointInstance& instance);

// Gradient of the mean batch loss for the network and, flowing through
// embed_method, for the attention parameters.
struct JointGradients {
  NetGradients net;
  codeast::AttentionGradients code;
};

JointGradients gradient_joint(const JointModel& model,
                              const std::vector<JointInstance>& batch,
                              const LossSpec& spec);

struct JointTrainResult {
  JointModel model;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
};

JointTrainResult train_joint(const JointModel& initial,
                             const std::vector<JointInstance>& train_set,
                             const std::vector<JointInstance>& valid_set,
                             const LossSpec& spec, const TrainConfig& cfg);

// Batch scoring kernel used by the ranker; the parallel path is
// result-identical to the serial reference.
std::vector<double> score_batch(const Network& net, const Vector& report_vec,
                                const std::vector<const Vector*>& method_vecs,
                                ExecMode mode);

// Checkpoint round-trips are value-exact.
void save_checkpoint(const Network& net, const std::string& path);
Network load_checkpoint(const std::string& path);

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

}  // namespace bugloc::neural
