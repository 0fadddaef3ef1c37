#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "lhids/neural.hpp"
#include "lhids/stats.hpp"
#include "lhids/trace_ingest.hpp"

namespace lhids {

enum class Objective { kOneClass, kSoftBoundary };

Objective parse_objective(std::string_view name);
std::string_view objective_name(Objective objective);

// Where the weight-decay gradient enters Adam. coupled adds lambda * W to the
// data gradient before the moment estimates; decoupled applies lr * lambda * W
// directly to the weights, outside the adaptive scaling.
enum class DecayMode { kCoupled, kDecoupled };

DecayMode parse_decay_mode(std::string_view name);
std::string_view decay_mode_name(DecayMode mode);

// Hypersphere in feature space. The center is fixed once initialized.
struct SvddState {
  FeatureVector center;
  double radius = 0.0;
  double weight_decay = 0.0;

  friend bool operator==(const SvddState&, const SvddState&) = default;
};

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 128;
  double learning_rate = 1e-3;
  double weight_decay = 1e-6;
  DecayMode decay_mode = DecayMode::kDecoupled;
  std::uint64_t seed = 0;
  Objective objective = Objective::kOneClass;
  double nu = 0.1;  // soft_boundary only
  double epsilon_c = 0.1;
  std::size_t radius_update_batches = 5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;

  // Throws BadParameter for out-of-range fields.
  void validate() const;
};

// Mean feature of the training windows under the given model, with every
// coordinate pushed to at least epsilon_c in magnitude (0 goes to +epsilon_c).
FeatureVector init_center(const ExtractorModel& model, const std::vector<TokenSequence>& train,
                          double epsilon_c);

// (lambda / 2) * sum of squared weights over every tensor.
double weight_decay_term(const ExtractorModel& model, double lambda);

struct SvddLoss {
  double loss = 0.0;
  std::vector<FeatureVector> grad_features;
  std::vector<double> squared_distances;  // ||phi_i - c||^2
};

// one_class:     (1/n) sum ||phi_i - c||^2 + decay
// soft_boundary: R^2 + 1/(nu n) sum max(0, ||phi_i - c||^2 - R^2) + decay
SvddLoss svdd_loss(std::span<const FeatureVector> features, const SvddState& state,
                   const ExtractorModel& model, const TrainConfig& config);

// Adam with weight decay per DecayMode.
class AdamOptimizer {
 public:
  AdamOptimizer(const ExtractorModel& model, const TrainConfig& config);
  void step(ExtractorModel& model, const GradientSet& grads);

 private:
  double lr_, beta1_, beta2_, eps_, lambda_;
  bool decoupled_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double mean_distance = 0.0;  // mean ||phi - c||^2 over the epoch's windows
  double radius = 0.0;
  double wall_seconds = 0.0;
};

struct TrainResult {
  ExtractorModel model;
  SvddState state;
  std::vector<EpochRecord> history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Mini-batch DeepSVDD training. Bit-reproducible for a given (model, data,
// config) regardless of LIGHT_HIDS_THREADS.
TrainResult train(ExtractorModel model, const DatasetSplit& data, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

}  // namespace lhids
