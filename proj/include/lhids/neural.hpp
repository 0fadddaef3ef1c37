#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lhids/trace_ingest.hpp"

namespace lhids {

// Row-major dense matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

// A Len x C activation. Stored channel-major so that each channel's time
// series is contiguous for the convolution loops.
struct Activation {
  std::size_t length = 0;
  std::size_t channels = 0;
  std::vector<double> data;

  Activation() = default;
  Activation(std::size_t len, std::size_t ch) : length(len), channels(ch), data(len * ch, 0.0) {}

  double& at(std::size_t t, std::size_t c) { return data[c * length + t]; }
  double at(std::size_t t, std::size_t c) const { return data[c * length + t]; }
  std::span<double> channel(std::size_t c) { return {data.data() + c * length, length}; }
  std::span<const double> channel(std::size_t c) const {
    return {data.data() + c * length, length};
  }

  friend bool operator==(const Activation&, const Activation&) = default;
};

// C_out x C_in x K kernel tensor, row-major in that order.
struct Kernel {
  std::size_t out_channels = 0;
  std::size_t in_channels = 0;
  std::size_t width = 0;
  std::vector<double> data;

  Kernel() = default;
  Kernel(std::size_t o, std::size_t c, std::size_t k)
      : out_channels(o), in_channels(c), width(k), data(o * c * k, 0.0) {}

  double& at(std::size_t o, std::size_t c, std::size_t k) {
    return data[(o * in_channels + c) * width + k];
  }
  double at(std::size_t o, std::size_t c, std::size_t k) const {
    return data[(o * in_channels + c) * width + k];
  }

  friend bool operator==(const Kernel&, const Kernel&) = default;
};

struct ConvLayer {
  Kernel kernels;
  std::size_t pool = 1;

  friend bool operator==(const ConvLayer&, const ConvLayer&) = default;
};

struct ModelHyper {
  std::size_t vocab_size = 0;     // V; the embedding has V + 1 rows
  std::size_t input_length = 64;  // L
  std::size_t embed_dim = 32;     // E
  std::size_t feature_dim = 16;   // D

  friend bool operator==(const ModelHyper&, const ModelHyper&) = default;
};

using FeatureVector = std::vector<double>;

// embedding -> (conv -> ReLU -> maxpool) x N -> global maxpool -> dense.
// No layer carries a bias term.
struct ExtractorModel {
  ModelHyper hyper;
  Matrix embedding;  // (V + 1) x E
  std::vector<ConvLayer> conv_layers;
  // Width of the pool that collapses whatever sequence length remains after
  // the conv stages; 1 when the stages already reduce it to a single step.
  std::size_t final_pool = 1;
  Matrix dense;  // F_last x D

  std::size_t parameter_count() const;
  // Views over every trainable tensor in declaration order.
  std::vector<std::span<double>> parameters();
  std::vector<std::span<const double>> parameters() const;

  friend bool operator==(const ExtractorModel&, const ExtractorModel&) = default;
};

struct ArchitectureConfig {
  std::size_t vocab_size = 0;
  std::size_t input_length = 64;
  std::size_t embed_dim = 32;
  std::vector<std::size_t> channels = {32, 64, 64};
  std::size_t kernel_width = 3;
  std::vector<std::size_t> pools = {2, 2, 2};
  std::size_t feature_dim = 16;
};

// Glorot-uniform initialization of every tensor from a seeded generator.
ExtractorModel init_extractor(const ArchitectureConfig& arch, std::uint64_t seed);

// Throws ShapeMismatch / IndivisibleLength when the model's invariants fail.
void validate_model(const ExtractorModel& model);

// Gradient tensors, shape-congruent with an ExtractorModel.
struct GradientSet {
  Matrix embedding;
  std::vector<Kernel> kernels;
  Matrix dense;

  static GradientSet zeros_like(const ExtractorModel& model);
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;
  void set_zero();
  void add(const GradientSet& other);

  friend bool operator==(const GradientSet&, const GradientSet&) = default;
};

Activation embed_forward(const Matrix& embedding, std::span<const Token> tokens);

// Same-padded cross-correlation (K odd, floor(K/2) zeros each side).
Activation conv1d_forward(const Activation& input, const Kernel& kernels);

// Accumulates d(loss)/d(kernels) into grad_kernels and returns d(loss)/d(input).
Activation conv1d_backward(const Activation& input, const Kernel& kernels,
                           const Activation& grad_output, Kernel& grad_kernels);

void relu_inplace(std::span<double> values);
std::vector<double> relu(std::span<const double> values);

struct PoolResult {
  Activation values;
  // argmax[w * channels + c] = winning time index for window w of channel c.
  std::vector<std::uint32_t> argmax;
};

// Non-overlapping max pooling; ties go to the lowest index.
PoolResult maxpool_forward(const Activation& input, std::size_t width);
Activation maxpool_backward(const Activation& grad_output,
                            std::span<const std::uint32_t> argmax,
                            std::size_t input_length);

struct ConvStageTape {
  Activation pre_activation;  // conv output before ReLU
  PoolResult pooled;          // maxpool(ReLU(pre_activation))
};

struct ActivationTape {
  std::vector<Token> tokens;
  Activation embedded;
  std::vector<ConvStageTape> stages;
  PoolResult final_pooled;  // F_last x 1
};

struct ForwardResult {
  FeatureVector feature;
  ActivationTape tape;
};

ForwardResult extractor_forward(const ExtractorModel& model, std::span<const Token> tokens);
FeatureVector extract_features(const ExtractorModel& model, std::span<const Token> tokens);

GradientSet extractor_backward(const ExtractorModel& model, const ActivationTape& tape,
                               std::span<const double> grad_feature);
// Adds this sample's gradients into an existing set.
void extractor_backward_accumulate(const ExtractorModel& model, const ActivationTape& tape,
                                   std::span<const double> grad_feature, GradientSet& grads);

}  // namespace lhids
