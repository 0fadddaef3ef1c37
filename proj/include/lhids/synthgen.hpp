#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "lhids/trace_ingest.hpp"

namespace lhids {

struct MarkovModel {
  std::vector<std::string> states;
  std::vector<std::vector<double>> transition;  // row-stochastic
  std::vector<double> initial;
  std::uint64_t seed = 0;
};

// Rows are normalized Gamma(concentration) draws, i.e. symmetric Dirichlet.
// The initial distribution is uniform.
MarkovModel gen_normal_model(std::size_t vocab_size, double concentration, std::uint64_t seed);

std::vector<std::string> sample_trace(const MarkovModel& model, std::size_t length,
                                      std::uint64_t stream_id);

enum class AnomalyKind { kRepeatBurst, kNovelCalls, kShuffled };

AnomalyKind parse_anomaly_kind(std::string_view name);
std::string_view anomaly_kind_name(AnomalyKind kind);

struct AnomalySpec {
  AnomalyKind kind = AnomalyKind::kRepeatBurst;
  double intensity = 0.5;  // fraction of the trace touched
  std::string burst_call = "failauth";
  std::size_t novel_names = 4;  // distinct out-of-vocabulary names to draw from
};

// Touches round(intensity * |trace|) positions; output length == input length.
//   repeat_burst: one contiguous region overwritten with burst_call
//   novel_calls:  that many distinct positions replaced by "novel_<j>" names
//   shuffled:     one contiguous region permuted
std::vector<std::string> inject_anomaly(std::vector<std::string> trace, const AnomalySpec& spec,
                                        std::uint64_t seed);

struct SynthConfig {
  std::size_t vocab_size = 16;
  double concentration = 0.5;
  std::size_t normal_traces = 200;
  std::size_t trace_length = 512;
  std::size_t anomalous_traces = 40;
  std::size_t anomalous_length = 96;
  AnomalySpec anomaly;
  std::uint64_t seed = 0;
};

struct ManifestEntry {
  std::string file;  // relative to the manifest's directory
  Label label = Label::kNormal;
};

// Writes plain-names trace files and manifest.txt into dir; returns the
// manifest entries in file order.
std::vector<ManifestEntry> write_corpus(const std::filesystem::path& dir, const SynthConfig& config);

// Manifest: "# lhids-manifest 1", then "<normal|anomalous> <relative path>" lines.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);

}  // namespace lhids
