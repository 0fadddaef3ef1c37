#include "lhids/svdd.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

#include "lhids/errors.hpp"
#include "lhids/parallel.hpp"
#include "lhids/rng.hpp"

namespace lhids {
namespace {

// Samples per gradient partial sum. Fixed so the reduction order does not
// depend on the worker count.
constexpr std::size_t kGradientChunk = 16;

double squared_distance(const FeatureVector& a, const FeatureVector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace

Objective parse_objective(std::string_view name) {
  if (name == "one_class") return Objective::kOneClass;
  if (name == "soft_boundary") return Objective::kSoftBoundary;
  fail(ErrorCode::kConfigError, "unknown objective '" + std::string(name) + "'");
}

std::string_view objective_name(Objective objective) {
  return objective == Objective::kOneClass ? "one_class" : "soft_boundary";
}

void TrainConfig::validate() const {
  auto bad = [](const std::string& what) { fail(ErrorCode::kBadParameter, "train: " + what); };
  if (batch_size == 0) bad("batch_size must be positive");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) bad("learning_rate must be >= 0");
  if (!(weight_decay >= 0.0)) bad("weight_decay must be >= 0");
  if (!(nu > 0.0 && nu <= 1.0)) bad("nu must be in (0, 1]");
  if (!(epsilon_c >= 0.0)) bad("epsilon_c must be >= 0");
  if (radius_update_batches == 0) bad("radius_update_batches must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) bad("adam betas in [0, 1)");
  if (!(adam_epsilon > 0.0)) bad("adam_epsilon must be positive");
}

FeatureVector init_center(const ExtractorModel& model, const std::vector<TokenSequence>& train,
                          double epsilon_c) {
  if (train.empty()) fail(ErrorCode::kEmptyTrainingSet, "no training windows");
  std::vector<FeatureVector> features(train.size());
  parallel_for(train.size(), [&](std::size_t i) {
    features[i] = extract_features(model, train[i].tokens);
  });
  FeatureVector c(model.hyper.feature_dim, 0.0);
  for (const auto& f : features) {
    for (std::size_t j = 0; j < c.size(); ++j) c[j] += f[j];
  }
  for (double& v : c) {
    v /= static_cast<double>(train.size());
    if (std::abs(v) < epsilon_c) v = v < 0.0 ? -epsilon_c : epsilon_c;
  }
  return c;
}

double weight_decay_term(const ExtractorModel& model, double lambda) {
  if (lambda == 0.0) return 0.0;
  double s = 0.0;
  for (auto t : model.parameters()) {
    for (double w : t) s += w * w;
  }
  return 0.5 * lambda * s;
}

SvddLoss svdd_loss(std::span<const FeatureVector> features, const SvddState& state,
                   const ExtractorModel& model, const TrainConfig& config) {
  if (features.empty()) fail(ErrorCode::kEmptyTrainingSet, "empty batch");
  const std::size_t n = features.size();
  const std::size_t d = state.center.size();
  SvddLoss out;
  out.grad_features.assign(n, FeatureVector(d, 0.0));
  out.squared_distances.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (features[i].size() != d) {
      fail(ErrorCode::kShapeMismatch, "feature dim " + std::to_string(features[i].size()) +
                                          " vs center dim " + std::to_string(d));
    }
    out.squared_distances[i] = squared_distance(features[i], state.center);
  }

  const double inv_n = 1.0 / static_cast<double>(n);
  if (config.objective == Objective::kOneClass) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sum += out.squared_distances[i];
      for (std::size_t j = 0; j < d; ++j) {
        out.grad_features[i][j] = 2.0 * inv_n * (features[i][j] - state.center[j]);
      }
    }
    out.loss = sum * inv_n;
  } else {
    const double r2 = state.radius * state.radius;
    const double scale = 1.0 / (config.nu * static_cast<double>(n));
    double hinge = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double excess = out.squared_distances[i] - r2;
      if (excess <= 0.0) continue;
      hinge += excess;
      for (std::size_t j = 0; j < d; ++j) {
        out.grad_features[i][j] = 2.0 * scale * (features[i][j] - state.center[j]);
      }
    }
    out.loss = r2 + scale * hinge;
  }
  out.loss += weight_decay_term(model, config.weight_decay);
  return out;
}

AdamOptimizer::AdamOptimizer(const ExtractorModel& model, const TrainConfig& config)
    : lr_(config.learning_rate),
      beta1_(config.beta1),
      beta2_(config.beta2),
      eps_(config.adam_epsilon),
      lambda_(config.weight_decay),
      decoupled_(config.decay_mode == DecayMode::kDecoupled) {
  for (auto t : model.parameters()) {
    m_.emplace_back(t.size(), 0.0);
    v_.emplace_back(t.size(), 0.0);
  }
}

void AdamOptimizer::step(ExtractorModel& model, const GradientSet& grads) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  auto params = model.parameters();
  const auto gs = grads.tensors();
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < params[k].size(); ++i) {
      const double w = params[k][i];
      const double g = decoupled_ ? gs[k][i] : gs[k][i] + lambda_ * w;
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      double step = m_hat / (std::sqrt(v_hat) + eps_);
      if (decoupled_) step += lambda_ * w;
      params[k][i] = w - lr_ * step;
    }
  }
}

DecayMode parse_decay_mode(std::string_view name) {
  if (name == "coupled") return DecayMode::kCoupled;
  if (name == "decoupled") return DecayMode::kDecoupled;
  fail(ErrorCode::kConfigError, "unknown decay mode '" + std::string(name) + "'");
}

std::string_view decay_mode_name(DecayMode mode) {
  return mode == DecayMode::kCoupled ? "coupled" : "decoupled";
}

TrainResult train(ExtractorModel model, const DatasetSplit& data, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  config.validate();
  validate_model(model);
  if (data.train.empty()) fail(ErrorCode::kEmptyTrainingSet, "no training windows");

  TrainResult result;
  result.state.center = init_center(model, data.train, config.epsilon_c);
  result.state.weight_decay = config.weight_decay;

  AdamOptimizer optimizer(model, config);
  Rng rng = make_rng(config.seed, stream::kTrain);
  const std::size_t n = data.train.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t batches_seen = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);

    double loss_sum = 0.0;
    double dist_sum = 0.0;
    for (std::size_t begin = 0; begin < n; begin += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, n - begin);
      std::vector<ForwardResult> forward(count);
      parallel_for(count, [&](std::size_t i) {
        forward[i] = extractor_forward(model, data.train[order[begin + i]].tokens);
      });
      std::vector<FeatureVector> features(count);
      for (std::size_t i = 0; i < count; ++i) features[i] = std::move(forward[i].feature);

      const SvddLoss loss = svdd_loss(features, result.state, model, config);
      if (!std::isfinite(loss.loss)) {
        fail(ErrorCode::kDivergenceDetected,
             "non-finite loss in epoch " + std::to_string(epoch));
      }

      const std::size_t chunks = (count + kGradientChunk - 1) / kGradientChunk;
      std::vector<GradientSet> partial(chunks);
      parallel_for(chunks, [&](std::size_t c) {
        partial[c] = GradientSet::zeros_like(model);
        for (std::size_t i = c * kGradientChunk; i < std::min(count, (c + 1) * kGradientChunk); ++i) {
          extractor_backward_accumulate(model, forward[i].tape, loss.grad_features[i], partial[c]);
        }
      });
      for (std::size_t c = 1; c < chunks; ++c) partial[0].add(partial[c]);
      optimizer.step(model, partial[0]);

      ++batches_seen;
      if (config.objective == Objective::kSoftBoundary &&
          batches_seen % config.radius_update_batches == 0) {
        std::vector<double> dist(loss.squared_distances.size());
        std::transform(loss.squared_distances.begin(), loss.squared_distances.end(), dist.begin(),
                       [](double d2) { return std::sqrt(d2); });
        result.state.radius = quantile(std::move(dist), 1.0 - config.nu);
      }
      loss_sum += loss.loss * static_cast<double>(count);
      dist_sum += std::accumulate(loss.squared_distances.begin(), loss.squared_distances.end(), 0.0);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.mean_loss = loss_sum / static_cast<double>(n);
    rec.mean_distance = dist_sum / static_cast<double>(n);
    rec.radius = result.state.radius;
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  result.model = std::move(model);
  return result;
}

}  // namespace lhids
