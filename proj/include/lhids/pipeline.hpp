#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include "lhids/config.hpp"
#include "lhids/detection.hpp"
#include "lhids/errors.hpp"
#include "lhids/model_io.hpp"
#include "lhids/svdd.hpp"

namespace lhids {

// File names inside the output directory. Variant-specific artifacts carry a
// "_q8" suffix for the quantized extractor.
struct ArtifactPaths {
  std::filesystem::path out;

  std::filesystem::path vocab() const { return out / "vocab.txt"; }
  std::filesystem::path dataset() const { return out / "dataset.txt"; }
  std::filesystem::path model() const { return out / "model.bin"; }
  std::filesystem::path quantized_model() const { return out / "model_q8.bin"; }
  std::filesystem::path train_log() const { return out / "train_log.jsonl"; }
  std::filesystem::path forest(bool q) const { return out / (q ? "forest_q8.bin" : "forest.bin"); }
  std::filesystem::path threshold(bool q) const {
    return out / (q ? "threshold_q8.bin" : "threshold.bin");
  }
  std::filesystem::path report_json(bool q) const {
    return out / (q ? "report_q8.json" : "report.json");
  }
  std::filesystem::path report_csv(bool q) const {
    return out / (q ? "report_q8.csv" : "report.csv");
  }
  std::filesystem::path eval(bool q) const { return out / (q ? "eval_q8.txt" : "eval.txt"); }
  std::filesystem::path bench_json() const { return out / "bench.json"; }
  std::filesystem::path bench_text() const { return out / "bench.txt"; }
  std::filesystem::path latency_csv(bool q) const {
    return out / (q ? "latency_q8.csv" : "latency.csv");
  }
};

// An lhids::Error annotated with the pipeline stage that raised it.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause);
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

// Maps an error to the CLI exit code: 2 config, 3 data, 4 artifact, 5 divergence.
int exit_code_for(ErrorCode code);

struct IngestSummary {
  std::size_t normal_traces = 0;
  std::size_t anomalous_traces = 0;
  std::size_t malformed_lines = 0;
  std::size_t vocab_size = 0;
  std::size_t train_windows = 0;
  std::size_t validation_windows = 0;
  std::size_t test_windows = 0;
};

struct LoadedExtractor {
  Extractor extractor;
  std::optional<SvddState> svdd;
  std::string hash;  // of the model file bytes
};

LoadedExtractor load_extractor(const ArtifactPaths& paths, bool quantized);

void stage_synth(const PipelineConfig& config);
IngestSummary stage_ingest(const PipelineConfig& config);
TrainResult stage_train(const PipelineConfig& config, const EpochCallback& on_epoch = {});
void stage_quantize(const PipelineConfig& config);
void stage_fit_forest(const PipelineConfig& config, bool quantized);
Threshold stage_calibrate(const PipelineConfig& config, bool quantized);
DetectionReport stage_detect(const PipelineConfig& config, bool quantized);
// Recomputes metrics from the stored per-sample rows and writes a summary.
Metrics stage_eval(const PipelineConfig& config, bool quantized);

struct VariantBench {
  LatencySummary latency;
  std::size_t payload_bytes = 0;
};

struct BenchReport {
  VariantBench float_model;
  std::optional<VariantBench> quantized_model;
  std::string environment;
};

BenchReport stage_bench(const PipelineConfig& config);
std::string bench_json(const BenchReport& report);

struct RunSummary {
  IngestSummary ingest;
  std::vector<EpochRecord> history;
  Metrics float_metrics;
  std::optional<Metrics> quantized_metrics;
};

// synth (optional) -> ingest -> train -> quantize (optional) -> fit-forest ->
// calibrate -> detect -> eval, for each extractor variant. Stage failures
// surface as StageError.
RunSummary run_pipeline(const PipelineConfig& config, const EpochCallback& on_epoch = {});

// Runs fn, converting an lhids::Error into a StageError naming the stage.
template <typename Fn>
auto in_stage(const std::string& stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(stage, e);
  }
}

}  // namespace lhids
