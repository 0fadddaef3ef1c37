#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "lhids/isolation_forest.hpp"
#include "lhids/neural.hpp"
#include "lhids/quantizer.hpp"
#include "lhids/trace_ingest.hpp"

namespace lhids {

struct Threshold {
  double mean = 0.0;
  double std = 0.0;
  double k = 2.0;
  double value = 0.0;  // mean + k * std

  bool consistent() const { return value == mean + k * std; }
  friend bool operator==(const Threshold&, const Threshold&) = default;
};

// Population std; value = mean + k * std.
Threshold calibrate_threshold(std::span<const double> val_scores, double k);

// 1 iff score > threshold.value.
int classify(double score, const Threshold& threshold);

struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

  friend bool operator==(const Metrics&, const Metrics&) = default;
};

Metrics evaluate(std::span<const int> predicted, std::span<const int> truth);

// Either extractor variant behind one interface.
class Extractor {
 public:
  explicit Extractor(ExtractorModel model) : model_(std::move(model)) {}
  explicit Extractor(QuantizedModel model) : model_(std::move(model)) {}

  const ModelHyper& hyper() const;
  bool quantized() const { return std::holds_alternative<QuantizedModel>(model_); }
  FeatureVector features(std::span<const Token> tokens) const;

 private:
  std::variant<ExtractorModel, QuantizedModel> model_;
};

// Throws ArtifactMismatch naming the offending pair when the feature width of
// the extractor and the forest differ.
void check_compatible(const Extractor& extractor, const IsolationForestModel& forest);

struct Decision {
  double score = 0.0;
  int label = 0;
  double elapsed_seconds = 0.0;
};

// Feature extraction, forest scoring and thresholding, timed as one chain.
Decision deploy_pipeline(std::span<const Token> tokens, const Extractor& extractor,
                         const IsolationForestModel& forest, const Threshold& threshold);

// Scores only, in input order. Windows are scored in parallel.
std::vector<double> score_windows(const std::vector<TokenSequence>& windows,
                                  const Extractor& extractor, const IsolationForestModel& forest);

struct SampleResult {
  double score = 0.0;
  int predicted = 0;
  int truth = 0;
  std::int64_t recording = 0;
};

struct LatencySummary {
  std::vector<double> per_sample_seconds;
  double mean = 0.0;
  double median = 0.0;
  double p95 = 0.0;
};

LatencySummary summarize_latency(std::vector<double> per_sample_seconds);

struct DetectionReport {
  std::string dataset;
  std::string variant;  // "float" or "quantized"
  std::string model_hash;
  Threshold threshold;
  std::vector<SampleResult> samples;
  Metrics window_metrics;
  std::optional<Metrics> recording_metrics;
  double validation_skewness = 0.0;
};

// Labeled windows only; unlabeled ones are rejected with InsufficientData.
DetectionReport detect(const std::vector<TokenSequence>& windows, const Extractor& extractor,
                       const IsolationForestModel& forest, const Threshold& threshold);

// Single-threaded per-window timing of deploy_pipeline after one discarded
// warm-up pass over the inputs.
LatencySummary time_windows(const std::vector<TokenSequence>& windows, const Extractor& extractor,
                            const IsolationForestModel& forest, const Threshold& threshold,
                            std::size_t repetitions = 1);

// A recording is anomalous when any of its windows is.
Metrics recording_metrics(std::span<const SampleResult> samples);
Metrics window_metrics(std::span<const SampleResult> samples);

std::string report_json(const DetectionReport& report);
DetectionReport parse_report_json(std::string_view text);
std::string report_csv(const DetectionReport& report);
std::string latency_csv(const LatencySummary& latency);

std::string encode_threshold(const Threshold& threshold);
Threshold decode_threshold(std::string_view bytes);
void save_threshold(const std::filesystem::path& path, const Threshold& threshold);
Threshold load_threshold(const std::filesystem::path& path);

}  // namespace lhids
