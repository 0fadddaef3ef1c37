#include "lhids/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lhids/errors.hpp"

namespace lhids {
namespace {

// Smallest float >= v, so a rounded scale never shrinks the covered range.
double float_ceil(double v) {
  float f = static_cast<float>(v);
  if (static_cast<double>(f) < v) f = std::nextafter(f, INFINITY);
  return static_cast<double>(f);
}

QuantizedTensor quantize_symmetric(std::span<const double> values) {
  QuantizedTensor t;
  t.params = compute_qparams(values, QuantMode::kSymmetric);
  t.values = quantize_tensor(values, t.params);
  return t;
}

// Per-tensor symmetric grid over a real activation, reusing `codes`.
float quantize_activation(std::span<const float> values, std::vector<std::int8_t>& codes) {
  float max_abs = 0.0f;
  for (float v : values) max_abs = std::max(max_abs, std::abs(v));
  codes.resize(values.size());
  if (max_abs == 0.0f) {
    std::fill(codes.begin(), codes.end(), std::int8_t{0});
    return 1.0f;
  }
  const float scale = max_abs / 127.0f;
  const float inv = 127.0f / max_abs;
  for (std::size_t i = 0; i < values.size(); ++i) {
    codes[i] = static_cast<std::int8_t>(std::clamp(std::round(values[i] * inv), -127.0f, 127.0f));
  }
  return scale;
}

}  // namespace

QuantParams compute_qparams(std::span<const double> tensor, QuantMode mode) {
  if (tensor.empty()) fail(ErrorCode::kNonFiniteInput, "cannot quantize an empty tensor");
  double lo = tensor[0], hi = tensor[0];
  for (double v : tensor) {
    if (!std::isfinite(v)) fail(ErrorCode::kNonFiniteInput, "tensor holds a non-finite value");
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  QuantParams p;
  if (mode == QuantMode::kSymmetric) {
    const double m = std::max(std::abs(lo), std::abs(hi));
    if (m == 0.0) return p;
    p.scale = float_ceil(m / 127.0);
    return p;
  }
  if (hi == lo) {
    if (hi == 0.0) return p;
    // Constant tensor: one grid step of |value| centred on zero point 0.
    p.scale = float_ceil(std::abs(hi) / 127.0);
    return p;
  }
  p.scale = float_ceil((hi - lo) / 255.0);
  const double zp = std::round(-128.0 - lo / p.scale);
  p.zero_point = static_cast<std::int32_t>(std::clamp(zp, -128.0, 127.0));
  return p;
}

std::int8_t quantize_value(double x, const QuantParams& params) {
  const double q = std::round(x / params.scale) + params.zero_point;
  return static_cast<std::int8_t>(std::clamp(q, -128.0, 127.0));
}

std::vector<std::int8_t> quantize_tensor(std::span<const double> tensor, const QuantParams& params) {
  std::vector<std::int8_t> out(tensor.size());
  for (std::size_t i = 0; i < tensor.size(); ++i) out[i] = quantize_value(tensor[i], params);
  return out;
}

std::vector<double> dequantize_tensor(std::span<const std::int8_t> tensor,
                                      const QuantParams& params) {
  std::vector<double> out(tensor.size());
  for (std::size_t i = 0; i < tensor.size(); ++i) {
    out[i] = static_cast<double>(static_cast<std::int32_t>(tensor[i]) - params.zero_point) *
             params.scale;
  }
  return out;
}

QuantizedModel quantize_model(const ExtractorModel& model) {
  validate_model(model);
  QuantizedModel q;
  q.hyper = model.hyper;
  q.embedding = quantize_symmetric(model.embedding.data);
  for (const auto& layer : model.conv_layers) {
    const Kernel& k = layer.kernels;
    q.conv_layers.push_back(
        {k.out_channels, k.in_channels, k.width, layer.pool, quantize_symmetric(k.data)});
  }
  q.final_pool = model.final_pool;
  q.dense_rows = model.dense.rows;
  q.dense = quantize_symmetric(model.dense.data);
  return q;
}

ExtractorModel dequantize_model(const QuantizedModel& q) {
  ExtractorModel m;
  m.hyper = q.hyper;
  m.embedding = Matrix(q.hyper.vocab_size + 1, q.hyper.embed_dim);
  m.embedding.data = dequantize_tensor(q.embedding.values, q.embedding.params);
  for (const auto& c : q.conv_layers) {
    ConvLayer layer{Kernel(c.out_channels, c.in_channels, c.width), c.pool};
    layer.kernels.data = dequantize_tensor(c.kernels.values, c.kernels.params);
    m.conv_layers.push_back(std::move(layer));
  }
  m.final_pool = q.final_pool;
  m.dense = Matrix(q.dense_rows, q.hyper.feature_dim);
  m.dense.data = dequantize_tensor(q.dense.values, q.dense.params);
  validate_model(m);
  return m;
}

namespace {

std::int32_t dot_i8(const std::int8_t* a, const std::int8_t* b, std::size_t n) {
  std::int32_t sum = 0;
  for (std::size_t i = 0; i < n; ++i) sum += static_cast<std::int16_t>(a[i]) * static_cast<std::int16_t>(b[i]);
  return sum;
}

}  // namespace

FeatureVector quantized_forward(const QuantizedModel& q, std::span<const Token> tokens) {
  const std::size_t len0 = q.hyper.input_length;
  const std::size_t emb_dim = q.hyper.embed_dim;
  if (tokens.size() != len0) {
    fail(ErrorCode::kShapeMismatch, "token window length " + std::to_string(tokens.size()) +
                                        " vs " + std::to_string(len0));
  }

  // Embedding rows are already on the embedding's int8 grid.
  std::vector<std::int8_t> codes(len0 * emb_dim);
  for (std::size_t t = 0; t < len0; ++t) {
    const Token tok = tokens[t];
    if (tok < 0 || static_cast<std::size_t>(tok) > q.hyper.vocab_size) {
      fail(ErrorCode::kTokenOutOfRange, "token " + std::to_string(tok));
    }
    const std::int8_t* row = &q.embedding.values[static_cast<std::size_t>(tok) * emb_dim];
    for (std::size_t c = 0; c < emb_dim; ++c) codes[c * len0 + t] = row[c];
  }
  float in_scale = static_cast<float>(q.embedding.params.scale);
  std::size_t len = len0;
  std::size_t channels = emb_dim;

  std::vector<std::int32_t> acc;
  std::vector<std::int8_t> padded, packed;
  std::vector<float> activated;
  std::vector<float> pooled;
  for (const auto& layer : q.conv_layers) {
    const std::size_t cout = layer.out_channels;
    const auto half = static_cast<std::ptrdiff_t>(layer.width / 2);
    const std::size_t width = layer.width;
    const std::size_t span = width * channels;
    // Time-major copy with zero rows on both ends: the receptive field of
    // output step t is then the contiguous block starting at row t.
    padded.assign((len + 2 * static_cast<std::size_t>(half)) * channels, 0);
    for (std::size_t c = 0; c < channels; ++c) {
      for (std::size_t t = 0; t < len; ++t) {
        padded[(t + static_cast<std::size_t>(half)) * channels + c] = codes[c * len + t];
      }
    }
    // Kernels regrouped from [o][c][k] to [o][k][c] to match.
    packed.resize(cout * span);
    for (std::size_t o = 0; o < cout; ++o) {
      for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t k = 0; k < width; ++k) {
          packed[(o * width + k) * channels + c] = layer.kernels.values[(o * channels + c) * width + k];
        }
      }
    }
    acc.resize(len * cout);
    for (std::size_t o = 0; o < cout; ++o) {
      const std::int8_t* w = &packed[o * span];
      for (std::size_t t = 0; t < len; ++t) {
        acc[o * len + t] = dot_i8(w, &padded[t * channels], span);
      }
    }
    const float rescale = in_scale * static_cast<float>(layer.kernels.params.scale);
    const std::size_t out_len = len / layer.pool;
    pooled.assign(out_len * cout, 0.0f);
    for (std::size_t o = 0; o < cout; ++o) {
      const std::int32_t* a = &acc[o * len];
      for (std::size_t w = 0; w < out_len; ++w) {
        std::int32_t best = a[w * layer.pool];
        for (std::size_t t = w * layer.pool + 1; t < (w + 1) * layer.pool; ++t) best = std::max(best, a[t]);
        // ReLU commutes with max and the rescale factor is positive.
        pooled[o * out_len + w] = std::max(0.0f, static_cast<float>(best) * rescale);
      }
    }
    len = out_len;
    channels = cout;
    in_scale = quantize_activation(pooled, codes);
  }

  // Global pool over the remaining length, then the dense projection.
  activated.assign(channels, 0.0f);
  for (std::size_t c = 0; c < channels; ++c) {
    std::int8_t best = codes[c * len];
    for (std::size_t t = 1; t < len; ++t) best = std::max(best, codes[c * len + t]);
    activated[c] = static_cast<float>(best) * in_scale;
  }
  const float dense_in_scale = quantize_activation(activated, codes);
  const std::size_t dim = q.hyper.feature_dim;
  std::vector<std::int32_t> out_acc(dim, 0);
  for (std::size_t f = 0; f < channels; ++f) {
    const std::int32_t a = codes[f];
    if (a == 0) continue;
    const std::int8_t* row = &q.dense.values[f * dim];
    for (std::size_t d = 0; d < dim; ++d) out_acc[d] += a * static_cast<std::int32_t>(row[d]);
  }
  const double out_scale = static_cast<double>(dense_in_scale) * q.dense.params.scale;
  FeatureVector feature(dim);
  for (std::size_t d = 0; d < dim; ++d) feature[d] = static_cast<double>(out_acc[d]) * out_scale;
  return feature;
}

std::size_t float_payload_bytes(const ExtractorModel& model) {
  return 4 * model.parameter_count();
}

std::size_t quantized_payload_bytes(const QuantizedModel& q) {
  // f32 scale + i8 zero point per tensor.
  constexpr std::size_t kPerTensor = 5;
  std::size_t n = q.embedding.values.size() + q.dense.values.size() + 2 * kPerTensor;
  for (const auto& c : q.conv_layers) n += c.kernels.values.size() + kPerTensor;
  return n;
}

}  // namespace lhids
