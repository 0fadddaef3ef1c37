#pragma once

// Finite-difference oracle for the extractor's analytic gradients. Uses only
// the forward pass, so it is independent of the backward implementation.

#include <algorithm>
#include <cmath>
#include <random>

#include "lhids/neural.hpp"

namespace lhids::testing {

struct TinyCase {
  ExtractorModel model;
  std::vector<Token> tokens;
  std::vector<double> projection;  // loss = projection . feature
};

// Smallest distance from a non-differentiable point: a ReLU pre-activation
// near zero or a near-tie for a positive pool maximum.
inline double kink_margin(const ExtractorModel& model, const ActivationTape& tape) {
  double margin = INFINITY;
  auto pool_margin = [&](const Activation& in, std::size_t width) {
    for (std::size_t c = 0; c < in.channels; ++c) {
      for (std::size_t w = 0; w < in.length / width; ++w) {
        double best = -INFINITY, second = -INFINITY;
        for (std::size_t t = w * width; t < (w + 1) * width; ++t) {
          const double v = in.at(t, c);
          if (v > best) {
            second = best;
            best = v;
          } else if (v > second) {
            second = v;
          }
        }
        if (best > 0.0 && width > 1) margin = std::min(margin, best - second);
      }
    }
  };
  for (std::size_t i = 0; i < tape.stages.size(); ++i) {
    const Activation& z = tape.stages[i].pre_activation;
    Activation act = z;
    for (double& v : act.data) {
      margin = std::min(margin, std::abs(v));
      v = std::max(v, 0.0);
    }
    pool_margin(act, model.conv_layers[i].pool);
  }
  const Activation& last = tape.stages.empty() ? tape.embedded : tape.stages.back().pooled.values;
  pool_margin(last, model.final_pool);
  return margin;
}

// Random tiny extractor (L <= 8, D <= 4) whose input sits at least `min_margin`
// away from every kink.
inline TinyCase make_tiny_case(std::uint64_t seed, double min_margin = 1e-3) {
  std::mt19937_64 rng(seed);
  for (int attempt = 0;; ++attempt) {
    ArchitectureConfig arch;
    arch.vocab_size = 2 + rng() % 4;
    arch.input_length = std::vector<std::size_t>{2, 4, 8}[rng() % 3];
    arch.embed_dim = 1 + rng() % 3;
    arch.kernel_width = (rng() % 2) ? 3 : 1;
    arch.feature_dim = 1 + rng() % 4;
    arch.channels.clear();
    arch.pools.clear();
    std::size_t len = arch.input_length;
    const std::size_t layers = 1 + rng() % 2;
    for (std::size_t i = 0; i < layers; ++i) {
      arch.channels.push_back(1 + rng() % 3);
      const std::size_t p = (len >= 2 && rng() % 2) ? 2 : 1;
      arch.pools.push_back(p);
      len /= p;
    }
    TinyCase tc;
    tc.model = init_extractor(arch, rng());
    tc.tokens.resize(arch.input_length);
    for (auto& t : tc.tokens) t = static_cast<Token>(rng() % (arch.vocab_size + 1));
    std::normal_distribution<double> normal(0.0, 1.0);
    tc.projection.resize(arch.feature_dim);
    for (auto& p : tc.projection) p = normal(rng);
    const auto fwd = extractor_forward(tc.model, tc.tokens);
    if (kink_margin(tc.model, fwd.tape) >= min_margin || attempt > 200) return tc;
  }
}

inline double projected_loss(const ExtractorModel& model, const TinyCase& tc) {
  const auto f = extract_features(model, tc.tokens);
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += tc.projection[i] * f[i];
  return s;
}

// Central differences for every parameter, in declaration order.
inline std::vector<std::vector<double>> finite_difference_gradients(const TinyCase& tc,
                                                                    double h = 1e-5) {
  ExtractorModel model = tc.model;
  std::vector<std::vector<double>> out;
  for (auto tensor : model.parameters()) {
    std::vector<double> g(tensor.size());
    for (std::size_t i = 0; i < tensor.size(); ++i) {
      const double saved = tensor[i];
      tensor[i] = saved + h;
      const double up = projected_loss(model, tc);
      tensor[i] = saved - h;
      const double down = projected_loss(model, tc);
      tensor[i] = saved;
      g[i] = (up - down) / (2.0 * h);
    }
    out.push_back(std::move(g));
  }
  return out;
}

// |a - n| / max(|a|, |n|), with an absolute floor so entries that are zero up
// to rounding noise do not divide by ~0.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) /
         std::max({std::abs(analytic), std::abs(numeric), floor});
}

}  // namespace lhids::testing
