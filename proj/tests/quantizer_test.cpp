#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lhids/quantizer.hpp"
#include "test_util.hpp"

namespace lhids {
namespace {

TEST(QParams, AllZero) {
  std::vector<double> z(5, 0.0);
  EXPECT_EQ(compute_qparams(z, QuantMode::kSymmetric), (QuantParams{1.0, 0}));
  EXPECT_EQ(compute_qparams(z, QuantMode::kAffine), (QuantParams{1.0, 0}));
}

TEST(QParams, Symmetric) {
  std::vector<double> t{-2.0, 0.5, 1.0};
  auto p = compute_qparams(t, QuantMode::kSymmetric);
  EXPECT_NEAR(p.scale, 2.0 / 127.0, 1e-8);
  EXPECT_GE(p.scale, 2.0 / 127.0);  // rounded up to a float
  EXPECT_EQ(p.scale, static_cast<double>(static_cast<float>(p.scale)));
  EXPECT_EQ(p.zero_point, 0);
}

TEST(QParams, Affine) {
  std::vector<double> t{0.0, 1.0, 2.55};
  auto p = compute_qparams(t, QuantMode::kAffine);
  EXPECT_NEAR(p.scale, 0.01, 1e-8);
  EXPECT_EQ(p.zero_point, -128);
}

TEST(QParams, Errors) {
  EXPECT_LHIDS_ERROR(compute_qparams(std::vector<double>{}, QuantMode::kSymmetric),
                     ErrorCode::kNonFiniteInput);
  EXPECT_LHIDS_ERROR(compute_qparams(std::vector<double>{1.0, NAN}, QuantMode::kSymmetric),
                     ErrorCode::kNonFiniteInput);
  EXPECT_LHIDS_ERROR(compute_qparams(std::vector<double>{INFINITY}, QuantMode::kAffine),
                     ErrorCode::kNonFiniteInput);
}

TEST(QuantizeValue, Examples) {
  QuantParams half{0.5, 0};
  EXPECT_EQ(quantize_value(0.0, {0.3, 0}), 0);
  EXPECT_EQ(quantize_value(1.0, half), 2);
  std::vector<std::int8_t> q{quantize_value(0.74, half)};
  EXPECT_EQ(q[0], 1);
  EXPECT_DOUBLE_EQ(dequantize_tensor(q, half)[0], 0.5);
  // Half-way cases round away from zero.
  EXPECT_EQ(quantize_value(0.25, half), 1);
  EXPECT_EQ(quantize_value(-0.25, half), -1);
  EXPECT_EQ(quantize_value(1000.0, half), 127);
  EXPECT_EQ(quantize_value(-1000.0, half), -128);
  EXPECT_EQ(quantize_value(0.0, {0.1, -7}), -7);
}

TEST(QuantizeProperty, ErrorBoundAndMonotone) {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    const bool affine = trial % 2 == 1;
    std::uniform_real_distribution<double> span(0.01, 50.0);
    const double a = span(rng), b = span(rng);
    std::uniform_real_distribution<double> value(affine ? -a / 3 : -a, b);
    std::vector<double> t(64);
    for (auto& x : t) x = value(rng);
    const auto p = compute_qparams(t, affine ? QuantMode::kAffine : QuantMode::kSymmetric);
    const auto dq = dequantize_tensor(quantize_tensor(t, p), p);
    // The bound covers values inside the representable grid range; an
    // all-positive affine tensor clamps its zero point and overflows the top.
    const double lo = (-128 - p.zero_point) * p.scale;
    const double hi = (127 - p.zero_point) * p.scale;
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (t[i] < lo || t[i] > hi) continue;
      ASSERT_LE(std::abs(dq[i] - t[i]), p.scale / 2 * (1 + 1e-9)) << "trial " << trial;
    }
    auto sorted = t;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 1; i < sorted.size(); ++i) {
      ASSERT_LE(quantize_value(sorted[i - 1], p), quantize_value(sorted[i], p));
    }
  }
}

TEST(QuantizeProperty, GridAlignedIsIdempotent) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> code(-127, 127);
  for (int trial = 0; trial < 50; ++trial) {
    const QuantParams p{std::ldexp(1.0, trial % 7 - 4), 0};
    std::vector<double> t(32);
    for (auto& x : t) x = code(rng) * p.scale;
    EXPECT_EQ(dequantize_tensor(quantize_tensor(t, p), p), t);
  }
}

ArchitectureConfig arch(std::size_t v, std::size_t e, std::vector<std::size_t> ch,
                        std::vector<std::size_t> pools, std::size_t l, std::size_t d,
                        std::size_t k = 3) {
  ArchitectureConfig a;
  a.vocab_size = v;
  a.embed_dim = e;
  a.channels = std::move(ch);
  a.pools = std::move(pools);
  a.input_length = l;
  a.feature_dim = d;
  a.kernel_width = k;
  return a;
}

TEST(QuantizeModel, ZeroModel) {
  auto m = init_extractor(arch(5, 4, {4}, {2}, 8, 3), 1);
  for (auto p : m.parameters()) std::fill(p.begin(), p.end(), 0.0);
  auto q = quantize_model(m);
  for (auto v : q.embedding.values) EXPECT_EQ(v, 0);
  for (auto v : q.dense.values) EXPECT_EQ(v, 0);
  for (const auto& c : q.conv_layers) {
    for (auto v : c.kernels.values) EXPECT_EQ(v, 0);
  }
  std::vector<Token> tokens{1, 2, 3, 4, 5, 1, 2, 3};
  EXPECT_EQ(quantized_forward(q, tokens), FeatureVector(3, 0.0));
}

TEST(QuantizeModel, DefaultArchitecturePayloadRatio) {
  auto m = init_extractor(arch(16, 32, {32, 64, 64}, {2, 2, 2}, 64, 16), 2);
  auto q = quantize_model(m);
  const double ratio = static_cast<double>(quantized_payload_bytes(q)) /
                       static_cast<double>(float_payload_bytes(m));
  EXPECT_LE(ratio, 0.30);
  EXPECT_EQ(float_payload_bytes(m), 4 * m.parameter_count());
  EXPECT_EQ(quantized_payload_bytes(q), m.parameter_count() + 5 * (2 + m.conv_layers.size()));
}

TEST(QuantizeModel, PayloadRatioAcrossArchitectures) {
  std::mt19937_64 rng(3);
  auto pick = [&](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t layers = pick(1, 3);
    std::vector<std::size_t> ch, pools;
    std::size_t len = 1;
    for (std::size_t i = 0; i < layers; ++i) {
      ch.push_back(pick(8, 48));
      pools.push_back(pick(1, 3));
      len *= pools.back();
    }
    len *= pick(1, 4);
    auto m = init_extractor(arch(pick(8, 40), pick(8, 40), ch, pools, len, pick(8, 24),
                                 2 * pick(0, 2) + 1),
                            static_cast<std::uint64_t>(trial));
    auto q = quantize_model(m);
    EXPECT_LE(static_cast<double>(quantized_payload_bytes(q)),
              0.30 * static_cast<double>(float_payload_bytes(m)))
        << "trial " << trial;
  }
}

TEST(QuantizeModel, RoundTripWithinHalfScale) {
  auto m = init_extractor(arch(10, 8, {8, 12}, {2, 2}, 16, 6), 4);
  auto q = quantize_model(m);
  auto back = dequantize_model(q);
  EXPECT_EQ(back.hyper, m.hyper);
  auto src = m.parameters();
  auto dst = back.parameters();
  std::vector<double> scales{q.embedding.params.scale};
  for (const auto& c : q.conv_layers) scales.push_back(c.kernels.params.scale);
  scales.push_back(q.dense.params.scale);
  ASSERT_EQ(src.size(), scales.size());
  for (std::size_t t = 0; t < src.size(); ++t) {
    EXPECT_EQ(compute_qparams(src[t], QuantMode::kSymmetric).zero_point, 0);
    for (std::size_t i = 0; i < src[t].size(); ++i) {
      ASSERT_LE(std::abs(src[t][i] - dst[t][i]), scales[t] / 2 * (1 + 1e-9));
    }
  }
}

double cosine(const FeatureVector& a, const FeatureVector& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

TEST(QuantizedForward, TracksFloatFeatures) {
  auto m = init_extractor(arch(16, 32, {32, 64, 64}, {2, 2, 2}, 64, 16), 5);
  auto q = quantize_model(m);
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<Token> tok(1, 16);
  int good = 0;
  const int n = 100;
  for (int i = 0; i < n; ++i) {
    std::vector<Token> tokens(64);
    for (auto& t : tokens) t = tok(rng);
    if (cosine(extract_features(m, tokens), quantized_forward(q, tokens)) >= 0.99) ++good;
  }
  EXPECT_GE(good, 95);
}

TEST(QuantizedForward, Errors) {
  auto m = init_extractor(arch(5, 4, {4}, {2}, 8, 3), 1);
  auto q = quantize_model(m);
  EXPECT_LHIDS_ERROR(quantized_forward(q, std::vector<Token>{1, 2}), ErrorCode::kShapeMismatch);
  EXPECT_LHIDS_ERROR(quantized_forward(q, std::vector<Token>(8, 9)), ErrorCode::kTokenOutOfRange);
}

}  // namespace
}  // namespace lhids
