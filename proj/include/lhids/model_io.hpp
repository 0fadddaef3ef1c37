#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "lhids/neural.hpp"
#include "lhids/quantizer.hpp"
#include "lhids/svdd.hpp"

namespace lhids {

// Model container sections:
//   HYPR  u32 V, L, E, D, conv count, final pool; per conv u32 C_out, C_in, K, P
//   TF32  float model: every tensor as f32 in declaration order
//   TQ8.  quantized model: per tensor f32 scale, i8 zero point, int8 payload
//   SVDD  optional: u32 D, f64 center[D], f64 radius, f64 weight decay
// The float model is kept in 64-bit memory and written at 32-bit precision;
// loading widens, so save(load(save(m))) is byte-identical.
struct StoredModel {
  ExtractorModel model;
  std::optional<SvddState> svdd;
};

struct StoredQuantizedModel {
  QuantizedModel model;
  std::optional<SvddState> svdd;
};

std::string encode_model(const ExtractorModel& model, const std::optional<SvddState>& svdd);
StoredModel decode_model(std::string_view bytes);
void save_model(const std::filesystem::path& path, const ExtractorModel& model,
                const std::optional<SvddState>& svdd = std::nullopt);
StoredModel load_model(const std::filesystem::path& path);

std::string encode_quantized_model(const QuantizedModel& model,
                                   const std::optional<SvddState>& svdd);
StoredQuantizedModel decode_quantized_model(std::string_view bytes);
void save_quantized_model(const std::filesystem::path& path, const QuantizedModel& model,
                          const std::optional<SvddState>& svdd = std::nullopt);
StoredQuantizedModel load_quantized_model(const std::filesystem::path& path);

// Rounds every weight to its 32-bit value, i.e. what a save/load cycle keeps.
ExtractorModel round_to_stored_precision(ExtractorModel model);

}  // namespace lhids
