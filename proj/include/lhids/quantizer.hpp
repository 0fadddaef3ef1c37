#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lhids/neural.hpp"

namespace lhids {

enum class QuantMode { kSymmetric, kAffine };

// Affine int8 grid: x ~ (q - zero_point) * scale. The scale is always a value
// representable as a 32-bit float, which is how it is stored on disk.
struct QuantParams {
  double scale = 1.0;
  std::int32_t zero_point = 0;

  friend bool operator==(const QuantParams&, const QuantParams&) = default;
};

QuantParams compute_qparams(std::span<const double> tensor, QuantMode mode);

// clamp(round_half_away(x / scale) + zero_point, -128, 127)
std::int8_t quantize_value(double x, const QuantParams& params);
std::vector<std::int8_t> quantize_tensor(std::span<const double> tensor, const QuantParams& params);
std::vector<double> dequantize_tensor(std::span<const std::int8_t> tensor,
                                      const QuantParams& params);

struct QuantizedTensor {
  std::vector<std::int8_t> values;
  QuantParams params;

  friend bool operator==(const QuantizedTensor&, const QuantizedTensor&) = default;
};

struct QuantizedConv {
  std::size_t out_channels = 0;
  std::size_t in_channels = 0;
  std::size_t width = 0;
  std::size_t pool = 1;
  QuantizedTensor kernels;  // C_out x C_in x K

  friend bool operator==(const QuantizedConv&, const QuantizedConv&) = default;
};

// Per-tensor symmetric int8 copy of an ExtractorModel.
struct QuantizedModel {
  ModelHyper hyper;
  QuantizedTensor embedding;  // (V + 1) x E
  std::vector<QuantizedConv> conv_layers;
  std::size_t final_pool = 1;
  std::size_t dense_rows = 0;
  QuantizedTensor dense;  // F_last x D

  friend bool operator==(const QuantizedModel&, const QuantizedModel&) = default;
};

QuantizedModel quantize_model(const ExtractorModel& model);
ExtractorModel dequantize_model(const QuantizedModel& qmodel);

// Weights stay int8. Each conv/dense input is mapped onto a per-tensor int8
// grid on the fly, products accumulate in int32, and the accumulator is
// rescaled to real values for ReLU and pooling.
FeatureVector quantized_forward(const QuantizedModel& qmodel, std::span<const Token> tokens);

// Bytes of parameter payload when serialized: 4 per weight for the float
// model; 1 per weight plus scale and zero point per tensor when quantized.
std::size_t float_payload_bytes(const ExtractorModel& model);
std::size_t quantized_payload_bytes(const QuantizedModel& qmodel);

}  // namespace lhids
