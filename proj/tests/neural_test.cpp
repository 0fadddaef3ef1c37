#include "lhids/neural.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <numeric>
#include <random>

#include "gradient_oracle.hpp"
#include "test_util.hpp"

namespace lhids {
namespace {

Activation column(std::initializer_list<double> values) {
  Activation a(values.size(), 1);
  std::copy(values.begin(), values.end(), a.data.begin());
  return a;
}

Kernel kernel1(std::initializer_list<double> taps) {
  Kernel k(1, 1, taps.size());
  std::copy(taps.begin(), taps.end(), k.data.begin());
  return k;
}

// Brute-force padded cross-correlation, written from the definition.
Activation reference_conv(const Activation& in, const Kernel& k) {
  Activation out(in.length, k.out_channels);
  const long half = static_cast<long>(k.width / 2);
  for (std::size_t t = 0; t < in.length; ++t) {
    for (std::size_t o = 0; o < k.out_channels; ++o) {
      double s = 0.0;
      for (std::size_t c = 0; c < k.in_channels; ++c) {
        for (std::size_t j = 0; j < k.width; ++j) {
          const long src = static_cast<long>(t) + static_cast<long>(j) - half;
          if (src < 0 || src >= static_cast<long>(in.length)) continue;
          s += in.at(static_cast<std::size_t>(src), c) * k.at(o, c, j);
        }
      }
      out.at(t, o) = s;
    }
  }
  return out;
}

TEST(Embed, IdentityLookup) {
  Matrix eye(3, 3);
  for (std::size_t i = 0; i < 3; ++i) eye.at(i, i) = 1.0;
  const std::vector<Token> tokens{2, 0};
  const auto out = embed_forward(eye, tokens);
  ASSERT_EQ(out.length, 2u);
  EXPECT_EQ(out.at(0, 2), 1.0);
  EXPECT_EQ(out.at(0, 0), 0.0);
  EXPECT_EQ(out.at(1, 0), 1.0);
}

TEST(Embed, EmptyAndHandLookup) {
  Matrix e(3, 2);
  e.data = {0, 0, 1, 2, 3, 4};
  EXPECT_EQ(embed_forward(e, std::vector<Token>{}).length, 0u);
  const auto out = embed_forward(e, std::vector<Token>{1, 1, 2});
  EXPECT_EQ(out.at(0, 0), 1);
  EXPECT_EQ(out.at(0, 1), 2);
  EXPECT_EQ(out.at(1, 0), 1);
  EXPECT_EQ(out.at(1, 1), 2);
  EXPECT_EQ(out.at(2, 0), 3);
  EXPECT_EQ(out.at(2, 1), 4);
}

TEST(Embed, TokenOutOfRange) {
  Matrix e(3, 2);
  EXPECT_LHIDS_ERROR(embed_forward(e, std::vector<Token>{3}), ErrorCode::kTokenOutOfRange);
  EXPECT_LHIDS_ERROR(embed_forward(e, std::vector<Token>{-1}), ErrorCode::kTokenOutOfRange);
}

TEST(Conv1d, Examples) {
  const auto in = column({1, 2, 3});
  EXPECT_EQ(conv1d_forward(in, kernel1({1})).data, in.data);
  EXPECT_EQ(conv1d_forward(in, kernel1({0, 1, 0})).data, (std::vector<double>{1, 2, 3}));
  EXPECT_EQ(conv1d_forward(in, kernel1({1, 0, -1})).data, (std::vector<double>{-2, -2, 2}));
}

TEST(Conv1d, MatchesBruteForce) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int round = 0; round < 30; ++round) {
    const std::size_t len = 1 + rng() % 12, cin = 1 + rng() % 4, cout = 1 + rng() % 4;
    const std::size_t width = 1 + 2 * (rng() % 3);
    Activation in(len, cin);
    for (auto& v : in.data) v = u(rng);
    Kernel k(cout, cin, width);
    for (auto& v : k.data) v = u(rng);
    const auto fast = conv1d_forward(in, k);
    const auto ref = reference_conv(in, k);
    for (std::size_t i = 0; i < fast.data.size(); ++i) {
      EXPECT_NEAR(fast.data[i], ref.data[i], 1e-12);
    }
  }
}

TEST(Conv1d, ShapeErrors) {
  Activation in(3, 2);
  EXPECT_LHIDS_ERROR(conv1d_forward(in, Kernel(1, 1, 3)), ErrorCode::kShapeMismatch);
  EXPECT_LHIDS_ERROR(conv1d_forward(Activation(0, 1), Kernel(1, 1, 3)),
                     ErrorCode::kShapeMismatch);
}

TEST(Relu, Definition) {
  EXPECT_EQ(relu(std::vector<double>{0, 0}), (std::vector<double>{0, 0}));
  EXPECT_EQ(relu(std::vector<double>{-1, 2}), (std::vector<double>{0, 2}));
  EXPECT_EQ(relu(std::vector<double>{-3.5, 0.0, 7.25}), (std::vector<double>{0.0, 0.0, 7.25}));
}

TEST(MaxPool, Examples) {
  auto r = maxpool_forward(column({3, 1, 4, 1}), 2);
  EXPECT_EQ(r.values.data, (std::vector<double>{3, 4}));
  EXPECT_EQ(r.argmax, (std::vector<std::uint32_t>{0, 2}));

  r = maxpool_forward(column({5, 5}), 2);
  EXPECT_EQ(r.values.data, (std::vector<double>{5}));
  EXPECT_EQ(r.argmax, (std::vector<std::uint32_t>{0}));

  r = maxpool_forward(column({1, 2, 3, 4, 5, 6}), 3);
  EXPECT_EQ(r.values.data, (std::vector<double>{3, 6}));
  EXPECT_EQ(r.argmax, (std::vector<std::uint32_t>{2, 5}));

  EXPECT_LHIDS_ERROR(maxpool_forward(column({1, 2, 3}), 2), ErrorCode::kIndivisibleLength);
}

TEST(MaxPool, BackwardConservesGradientMass) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int round = 0; round < 50; ++round) {
    const std::size_t width = 1 + rng() % 4, out_len = 1 + rng() % 5, ch = 1 + rng() % 3;
    Activation in(width * out_len, ch);
    for (auto& v : in.data) v = u(rng);
    const auto r = maxpool_forward(in, width);
    Activation g(out_len, ch);
    for (auto& v : g.data) v = u(rng);
    const auto back = maxpool_backward(g, r.argmax, in.length);
    const double in_mass = std::accumulate(g.data.begin(), g.data.end(), 0.0);
    const double out_mass = std::accumulate(back.data.begin(), back.data.end(), 0.0);
    EXPECT_NEAR(in_mass, out_mass, 1e-12);
  }
}

ExtractorModel one_layer_model() {
  // L=4, E=1, one identity conv (K=1), pool 4, dense [1].
  ExtractorModel m;
  m.hyper = {4, 4, 1, 1};
  m.embedding = Matrix(5, 1);
  m.embedding.data = {0, 1, 2, 3, 4};
  m.conv_layers.push_back({kernel1({1}), 4});
  m.final_pool = 1;
  m.dense = Matrix(1, 1);
  m.dense.data = {1};
  return m;
}

TEST(Extractor, ComposedOneLayerExample) {
  const auto m = one_layer_model();
  validate_model(m);
  EXPECT_EQ(extract_features(m, std::vector<Token>{1, 2, 3, 4}), (FeatureVector{4}));
  EXPECT_EQ(extract_features(m, std::vector<Token>{4, 2, 3, 1}), (FeatureVector{4}));
}

TEST(Extractor, ZeroEmbeddingGivesZeroFeatures) {
  ArchitectureConfig arch;
  arch.vocab_size = 16;
  auto m = init_extractor(arch, 1);
  std::fill(m.embedding.data.begin(), m.embedding.data.end(), 0.0);
  std::vector<Token> tokens(64);
  std::iota(tokens.begin(), tokens.end(), 0);
  for (auto& t : tokens) t %= 17;
  for (double v : extract_features(m, tokens)) EXPECT_EQ(v, 0.0);
}

TEST(Extractor, DefaultArchitectureShapes) {
  ArchitectureConfig arch;
  arch.vocab_size = 16;
  const auto m = init_extractor(arch, 1);
  validate_model(m);
  EXPECT_EQ(m.embedding.rows, 17u);
  EXPECT_EQ(m.embedding.cols, 32u);
  ASSERT_EQ(m.conv_layers.size(), 3u);
  EXPECT_EQ(m.final_pool, 8u);
  EXPECT_EQ(m.dense.rows, 64u);
  EXPECT_EQ(m.dense.cols, 16u);

  std::vector<Token> tokens(64, 3);
  const auto fwd = extractor_forward(m, tokens);
  std::size_t len = 64;
  for (std::size_t i = 0; i < fwd.tape.stages.size(); ++i) {
    len /= m.conv_layers[i].pool;
    EXPECT_EQ(fwd.tape.stages[i].pooled.values.length, len);
  }
  EXPECT_EQ(fwd.tape.final_pooled.values.length, 1u);
  EXPECT_EQ(fwd.tape.final_pooled.values.channels, m.dense.rows);
  EXPECT_EQ(fwd.feature.size(), 16u);
}

TEST(Extractor, ArchitectureErrors) {
  ArchitectureConfig arch;
  arch.vocab_size = 4;
  arch.input_length = 60;
  arch.pools = {2, 2, 4};
  EXPECT_LHIDS_ERROR(init_extractor(arch, 1), ErrorCode::kIndivisibleLength);
  arch.input_length = 64;
  arch.kernel_width = 2;
  EXPECT_LHIDS_ERROR(init_extractor(arch, 1), ErrorCode::kShapeMismatch);
}

TEST(Extractor, WrongWindowLength) {
  const auto m = one_layer_model();
  EXPECT_LHIDS_ERROR(extractor_forward(m, std::vector<Token>{1, 2}), ErrorCode::kShapeMismatch);
}

TEST(Extractor, DeterministicForwardAndBackward) {
  ArchitectureConfig arch;
  arch.vocab_size = 16;
  const auto m = init_extractor(arch, 9);
  std::vector<Token> tokens(64);
  for (std::size_t i = 0; i < tokens.size(); ++i) tokens[i] = static_cast<Token>((i * 7) % 17);
  const auto a = extractor_forward(m, tokens);
  const auto b = extractor_forward(m, tokens);
  ASSERT_EQ(a.feature.size(), b.feature.size());
  EXPECT_EQ(0, std::memcmp(a.feature.data(), b.feature.data(), a.feature.size() * sizeof(double)));
  std::vector<double> g(16, 0.5);
  EXPECT_EQ(extractor_backward(m, a.tape, g), extractor_backward(m, b.tape, g));
}

TEST(Backward, ZeroAndScaledGradients) {
  const auto tc = testing::make_tiny_case(21);
  const auto fwd = extractor_forward(tc.model, tc.tokens);
  const std::vector<double> zero(tc.projection.size(), 0.0);
  const auto zero_grads = extractor_backward(tc.model, fwd.tape, zero);
  for (auto t : zero_grads.tensors()) {
    for (double v : t) EXPECT_EQ(v, 0.0);
  }
  std::vector<double> doubled = tc.projection;
  for (auto& v : doubled) v *= 2.0;
  const auto g1 = extractor_backward(tc.model, fwd.tape, tc.projection);
  const auto g2 = extractor_backward(tc.model, fwd.tape, doubled);
  const auto t1 = g1.tensors();
  const auto t2 = g2.tensors();
  for (std::size_t i = 0; i < t1.size(); ++i) {
    for (std::size_t j = 0; j < t1[i].size(); ++j) EXPECT_EQ(t2[i][j], 2.0 * t1[i][j]);
  }
}

TEST(Backward, TapeMismatch) {
  const auto tc = testing::make_tiny_case(4);
  auto fwd = extractor_forward(tc.model, tc.tokens);
  fwd.tape.stages.clear();
  EXPECT_LHIDS_ERROR(extractor_backward(tc.model, fwd.tape, tc.projection),
                     ErrorCode::kTapeMismatch);
}

TEST(Backward, MatchesFiniteDifferencesOnTinyModels) {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto tc = testing::make_tiny_case(seed);
    const auto fwd = extractor_forward(tc.model, tc.tokens);
    const auto analytic = extractor_backward(tc.model, fwd.tape, tc.projection);
    const auto numeric = testing::finite_difference_gradients(tc);
    const auto tensors = analytic.tensors();
    ASSERT_EQ(tensors.size(), numeric.size());
    for (std::size_t i = 0; i < tensors.size(); ++i) {
      for (std::size_t j = 0; j < tensors[i].size(); ++j) {
        worst = std::max(worst, testing::relative_error(tensors[i][j], numeric[i][j]));
      }
    }
  }
  EXPECT_LT(worst, 1e-4);
}

}  // namespace
}  // namespace lhids
