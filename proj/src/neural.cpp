#include "lhids/neural.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lhids/errors.hpp"
#include "lhids/rng.hpp"

namespace lhids {
namespace {

std::string dims(std::size_t a, std::size_t b) {
  return std::to_string(a) + " vs " + std::to_string(b);
}

void glorot_fill(std::span<double> values, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& v : values) v = (2.0 * uniform01(rng) - 1.0) * limit;
}

// Four independent partial sums; the fixed grouping keeps results
// reproducible while letting the compiler pipeline the loop.
double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

// Valid output range [lo, hi) for a tap at offset `shift` over length n.
inline void tap_range(std::ptrdiff_t shift, std::size_t n, std::size_t& lo, std::size_t& hi) {
  const auto len = static_cast<std::ptrdiff_t>(n);
  lo = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, -shift));
  hi = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(len - shift, 0, len));
}

}  // namespace

std::size_t ExtractorModel::parameter_count() const {
  std::size_t n = embedding.data.size() + dense.data.size();
  for (const auto& layer : conv_layers) n += layer.kernels.data.size();
  return n;
}

std::vector<std::span<double>> ExtractorModel::parameters() {
  std::vector<std::span<double>> out;
  out.emplace_back(embedding.data);
  for (auto& layer : conv_layers) out.emplace_back(layer.kernels.data);
  out.emplace_back(dense.data);
  return out;
}

std::vector<std::span<const double>> ExtractorModel::parameters() const {
  std::vector<std::span<const double>> out;
  out.emplace_back(embedding.data);
  for (const auto& layer : conv_layers) out.emplace_back(layer.kernels.data);
  out.emplace_back(dense.data);
  return out;
}

ExtractorModel init_extractor(const ArchitectureConfig& arch, std::uint64_t seed) {
  if (arch.vocab_size == 0 || arch.input_length == 0 || arch.embed_dim == 0 ||
      arch.feature_dim == 0) {
    fail(ErrorCode::kShapeMismatch, "architecture dimensions must be positive");
  }
  if (arch.channels.size() != arch.pools.size()) {
    fail(ErrorCode::kShapeMismatch,
         "one pool width per conv layer expected: " + dims(arch.channels.size(), arch.pools.size()));
  }
  if (arch.kernel_width % 2 == 0) {
    fail(ErrorCode::kShapeMismatch, "kernel width must be odd for same padding");
  }
  ExtractorModel model;
  model.hyper = {arch.vocab_size, arch.input_length, arch.embed_dim, arch.feature_dim};

  std::size_t length = arch.input_length;
  for (std::size_t p : arch.pools) {
    if (p == 0 || length % p != 0) {
      fail(ErrorCode::kIndivisibleLength,
           "pool width " + std::to_string(p) + " does not divide length " + std::to_string(length));
    }
    length /= p;
  }
  model.final_pool = length;

  Rng rng = make_rng(seed, stream::kInit);
  model.embedding = Matrix(arch.vocab_size + 1, arch.embed_dim);
  glorot_fill(model.embedding.data, arch.vocab_size + 1, arch.embed_dim, rng);

  std::size_t in_ch = arch.embed_dim;
  for (std::size_t i = 0; i < arch.channels.size(); ++i) {
    if (arch.channels[i] == 0) fail(ErrorCode::kShapeMismatch, "conv layer with zero channels");
    ConvLayer layer{Kernel(arch.channels[i], in_ch, arch.kernel_width), arch.pools[i]};
    glorot_fill(layer.kernels.data, in_ch * arch.kernel_width,
                arch.channels[i] * arch.kernel_width, rng);
    model.conv_layers.push_back(std::move(layer));
    in_ch = arch.channels[i];
  }
  model.dense = Matrix(in_ch, arch.feature_dim);
  glorot_fill(model.dense.data, in_ch, arch.feature_dim, rng);
  return model;
}

void validate_model(const ExtractorModel& model) {
  const auto& h = model.hyper;
  if (model.embedding.rows != h.vocab_size + 1 || model.embedding.cols != h.embed_dim) {
    fail(ErrorCode::kShapeMismatch, "embedding shape");
  }
  std::size_t in_ch = h.embed_dim;
  std::size_t length = h.input_length;
  for (const auto& layer : model.conv_layers) {
    const Kernel& k = layer.kernels;
    if (k.in_channels != in_ch) {
      fail(ErrorCode::kShapeMismatch, "conv input channels " + dims(k.in_channels, in_ch));
    }
    if (k.width == 0 || k.width % 2 == 0 || k.out_channels == 0 ||
        k.data.size() != k.out_channels * k.in_channels * k.width) {
      fail(ErrorCode::kShapeMismatch, "conv kernel shape");
    }
    if (layer.pool == 0 || length % layer.pool != 0) {
      fail(ErrorCode::kIndivisibleLength, "pool width does not divide sequence length");
    }
    length /= layer.pool;
    in_ch = k.out_channels;
  }
  if (model.final_pool != length) {
    fail(ErrorCode::kShapeMismatch, "final pool must collapse length " + dims(model.final_pool, length));
  }
  if (model.dense.rows != in_ch || model.dense.cols != h.feature_dim) {
    fail(ErrorCode::kShapeMismatch, "dense shape");
  }
}

GradientSet GradientSet::zeros_like(const ExtractorModel& model) {
  GradientSet g;
  g.embedding = Matrix(model.embedding.rows, model.embedding.cols);
  for (const auto& layer : model.conv_layers) {
    const Kernel& k = layer.kernels;
    g.kernels.emplace_back(k.out_channels, k.in_channels, k.width);
  }
  g.dense = Matrix(model.dense.rows, model.dense.cols);
  return g;
}

std::vector<std::span<double>> GradientSet::tensors() {
  std::vector<std::span<double>> out;
  out.emplace_back(embedding.data);
  for (auto& k : kernels) out.emplace_back(k.data);
  out.emplace_back(dense.data);
  return out;
}

std::vector<std::span<const double>> GradientSet::tensors() const {
  std::vector<std::span<const double>> out;
  out.emplace_back(embedding.data);
  for (const auto& k : kernels) out.emplace_back(k.data);
  out.emplace_back(dense.data);
  return out;
}

void GradientSet::set_zero() {
  for (auto t : tensors()) std::fill(t.begin(), t.end(), 0.0);
}

void GradientSet::add(const GradientSet& other) {
  auto mine = tensors();
  const auto theirs = other.tensors();
  for (std::size_t i = 0; i < mine.size(); ++i) {
    for (std::size_t j = 0; j < mine[i].size(); ++j) mine[i][j] += theirs[i][j];
  }
}

Activation embed_forward(const Matrix& embedding, std::span<const Token> tokens) {
  Activation out(tokens.size(), embedding.cols);
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const Token tok = tokens[t];
    if (tok < 0 || static_cast<std::size_t>(tok) >= embedding.rows) {
      fail(ErrorCode::kTokenOutOfRange,
           "token " + std::to_string(tok) + " outside [0, " + std::to_string(embedding.rows - 1) + "]");
    }
    const double* row = &embedding.data[static_cast<std::size_t>(tok) * embedding.cols];
    for (std::size_t c = 0; c < embedding.cols; ++c) out.at(t, c) = row[c];
  }
  return out;
}

Activation conv1d_forward(const Activation& input, const Kernel& kernels) {
  if (input.channels != kernels.in_channels) {
    fail(ErrorCode::kShapeMismatch, "conv input channels " + dims(input.channels, kernels.in_channels));
  }
  if (kernels.width % 2 == 0) fail(ErrorCode::kShapeMismatch, "kernel width must be odd");
  if (input.length == 0) fail(ErrorCode::kShapeMismatch, "empty conv input");

  const std::size_t n = input.length;
  const auto half = static_cast<std::ptrdiff_t>(kernels.width / 2);
  Activation out(n, kernels.out_channels);
  for (std::size_t o = 0; o < kernels.out_channels; ++o) {
    double* dst = out.channel(o).data();
    for (std::size_t c = 0; c < kernels.in_channels; ++c) {
      const double* src = input.channel(c).data();
      for (std::size_t k = 0; k < kernels.width; ++k) {
        const double w = kernels.at(o, c, k);
        const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(k) - half;
        std::size_t lo, hi;
        tap_range(shift, n, lo, hi);
        if (hi <= lo) continue;
        const double* s = src + (static_cast<std::ptrdiff_t>(lo) + shift);
        double* d = dst + lo;
        for (std::size_t t = 0; t < hi - lo; ++t) d[t] += w * s[t];
      }
    }
  }
  return out;
}

Activation conv1d_backward(const Activation& input, const Kernel& kernels,
                           const Activation& grad_output, Kernel& grad_kernels) {
  const std::size_t n = input.length;
  if (grad_output.length != n || grad_output.channels != kernels.out_channels ||
      input.channels != kernels.in_channels) {
    fail(ErrorCode::kShapeMismatch, "conv backward shapes");
  }
  const auto half = static_cast<std::ptrdiff_t>(kernels.width / 2);
  Activation grad_in(n, kernels.in_channels);
  for (std::size_t o = 0; o < kernels.out_channels; ++o) {
    const double* g = grad_output.channel(o).data();
    for (std::size_t c = 0; c < kernels.in_channels; ++c) {
      const double* src = input.channel(c).data();
      double* gin = grad_in.channel(c).data();
      for (std::size_t k = 0; k < kernels.width; ++k) {
        const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(k) - half;
        std::size_t lo, hi;
        tap_range(shift, n, lo, hi);
        if (hi <= lo) continue;
        const std::size_t src_lo = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(lo) + shift);
        grad_kernels.at(o, c, k) += dot(g + lo, src + src_lo, hi - lo);
        const double w = kernels.at(o, c, k);
        double* gi = gin + src_lo;
        const double* gs = g + lo;
        for (std::size_t t = 0; t < hi - lo; ++t) gi[t] += w * gs[t];
      }
    }
  }
  return grad_in;
}

void relu_inplace(std::span<double> values) {
  for (double& v : values) v = v > 0.0 ? v : 0.0;
}

std::vector<double> relu(std::span<const double> values) {
  std::vector<double> out(values.begin(), values.end());
  relu_inplace(out);
  return out;
}

PoolResult maxpool_forward(const Activation& input, std::size_t width) {
  if (width == 0 || input.length % width != 0) {
    fail(ErrorCode::kIndivisibleLength,
         "pool width " + std::to_string(width) + " does not divide length " + std::to_string(input.length));
  }
  const std::size_t out_len = input.length / width;
  PoolResult r{Activation(out_len, input.channels),
               std::vector<std::uint32_t>(out_len * input.channels)};
  for (std::size_t c = 0; c < input.channels; ++c) {
    const double* src = input.channel(c).data();
    for (std::size_t w = 0; w < out_len; ++w) {
      std::size_t best = w * width;
      for (std::size_t t = best + 1; t < (w + 1) * width; ++t) {
        if (src[t] > src[best]) best = t;
      }
      r.values.at(w, c) = src[best];
      r.argmax[w * input.channels + c] = static_cast<std::uint32_t>(best);
    }
  }
  return r;
}

Activation maxpool_backward(const Activation& grad_output,
                            std::span<const std::uint32_t> argmax,
                            std::size_t input_length) {
  if (argmax.size() != grad_output.length * grad_output.channels) {
    fail(ErrorCode::kShapeMismatch, "maxpool backward index count");
  }
  Activation grad_in(input_length, grad_output.channels);
  for (std::size_t c = 0; c < grad_output.channels; ++c) {
    for (std::size_t w = 0; w < grad_output.length; ++w) {
      const std::uint32_t t = argmax[w * grad_output.channels + c];
      if (t >= input_length) fail(ErrorCode::kShapeMismatch, "maxpool index out of range");
      grad_in.at(t, c) += grad_output.at(w, c);
    }
  }
  return grad_in;
}

ForwardResult extractor_forward(const ExtractorModel& model, std::span<const Token> tokens) {
  if (tokens.size() != model.hyper.input_length) {
    fail(ErrorCode::kShapeMismatch,
         "token window length " + dims(tokens.size(), model.hyper.input_length));
  }
  ForwardResult r;
  ActivationTape& tape = r.tape;
  tape.tokens.assign(tokens.begin(), tokens.end());
  tape.embedded = embed_forward(model.embedding, tokens);
  tape.stages.reserve(model.conv_layers.size());

  const Activation* current = &tape.embedded;
  for (const auto& layer : model.conv_layers) {
    ConvStageTape stage;
    stage.pre_activation = conv1d_forward(*current, layer.kernels);
    Activation activated = stage.pre_activation;
    relu_inplace(activated.data);
    stage.pooled = maxpool_forward(activated, layer.pool);
    tape.stages.push_back(std::move(stage));
    current = &tape.stages.back().pooled.values;
  }
  tape.final_pooled = maxpool_forward(*current, model.final_pool);

  const Activation& pooled = tape.final_pooled.values;  // 1 x F_last
  if (pooled.channels != model.dense.rows) {
    fail(ErrorCode::kShapeMismatch, "dense input " + dims(pooled.channels, model.dense.rows));
  }
  r.feature.assign(model.dense.cols, 0.0);
  for (std::size_t f = 0; f < model.dense.rows; ++f) {
    const double x = pooled.data[f];
    const double* row = &model.dense.data[f * model.dense.cols];
    for (std::size_t d = 0; d < model.dense.cols; ++d) r.feature[d] += x * row[d];
  }
  return r;
}

FeatureVector extract_features(const ExtractorModel& model, std::span<const Token> tokens) {
  return extractor_forward(model, tokens).feature;
}

void extractor_backward_accumulate(const ExtractorModel& model, const ActivationTape& tape,
                                   std::span<const double> grad_feature, GradientSet& grads) {
  if (tape.stages.size() != model.conv_layers.size() ||
      tape.tokens.size() != model.hyper.input_length ||
      tape.final_pooled.values.channels != model.dense.rows ||
      grads.kernels.size() != model.conv_layers.size()) {
    fail(ErrorCode::kTapeMismatch, "tape was not produced by this model");
  }
  if (grad_feature.size() != model.dense.cols) {
    fail(ErrorCode::kShapeMismatch, "feature gradient " + dims(grad_feature.size(), model.dense.cols));
  }

  // Dense layer.
  const Activation& pooled = tape.final_pooled.values;
  Activation grad_pooled(1, model.dense.rows);
  for (std::size_t f = 0; f < model.dense.rows; ++f) {
    const double x = pooled.data[f];
    const double* row = &model.dense.data[f * model.dense.cols];
    double* grow = &grads.dense.data[f * model.dense.cols];
    double acc = 0.0;
    for (std::size_t d = 0; d < model.dense.cols; ++d) {
      grow[d] += x * grad_feature[d];
      acc += row[d] * grad_feature[d];
    }
    grad_pooled.data[f] = acc;
  }

  const std::size_t last_len = tape.stages.empty() ? tape.embedded.length
                                                   : tape.stages.back().pooled.values.length;
  Activation grad = maxpool_backward(grad_pooled, tape.final_pooled.argmax, last_len);

  for (std::size_t i = tape.stages.size(); i-- > 0;) {
    const ConvStageTape& stage = tape.stages[i];
    const ConvLayer& layer = model.conv_layers[i];
    Activation grad_pre = maxpool_backward(grad, stage.pooled.argmax, stage.pre_activation.length);
    for (std::size_t j = 0; j < grad_pre.data.size(); ++j) {
      if (!(stage.pre_activation.data[j] > 0.0)) grad_pre.data[j] = 0.0;
    }
    const Activation& input = i == 0 ? tape.embedded : tape.stages[i - 1].pooled.values;
    grad = conv1d_backward(input, layer.kernels, grad_pre, grads.kernels[i]);
  }

  // Embedding rows touched by the window.
  for (std::size_t t = 0; t < tape.tokens.size(); ++t) {
    double* row = &grads.embedding.data[static_cast<std::size_t>(tape.tokens[t]) * grads.embedding.cols];
    for (std::size_t c = 0; c < grads.embedding.cols; ++c) row[c] += grad.at(t, c);
  }
}

GradientSet extractor_backward(const ExtractorModel& model, const ActivationTape& tape,
                               std::span<const double> grad_feature) {
  GradientSet grads = GradientSet::zeros_like(model);
  extractor_backward_accumulate(model, tape, grad_feature, grads);
  return grads;
}

}  // namespace lhids
