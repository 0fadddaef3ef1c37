#include "lhids/pipeline.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <thread>

#include "lhids/artifact.hpp"
#include "lhids/isolation_forest.hpp"
#include "lhids/parallel.hpp"
#include "lhids/quantizer.hpp"
#include "lhids/stats.hpp"
#include "lhids/synthgen.hpp"

namespace lhids {
namespace {

using json = nlohmann::json;

void write_text(const std::filesystem::path& path, const std::string& text) {
  write_binary_file(path, text);
}

std::vector<FeatureVector> features_of(const Extractor& e, const std::vector<TokenSequence>& ws) {
  std::vector<FeatureVector> out(ws.size());
  parallel_for(ws.size(), [&](std::size_t i) { out[i] = e.features(ws[i].tokens); });
  return out;
}

std::string metrics_text(const char* title, const Metrics& m) {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed;
  os << title << ": precision " << m.precision << "  recall " << m.recall << "  f1 " << m.f1
     << "  (tp " << m.tp << ", fp " << m.fp << ", fn " << m.fn << ", tn " << m.tn << ")\n";
  return os.str();
}

bool same_metrics(const Metrics& a, const Metrics& b) {
  return a.tp == b.tp && a.fp == b.fp && a.fn == b.fn && a.tn == b.tn &&
         a.precision == b.precision && a.recall == b.recall && a.f1 == b.f1;
}

}  // namespace

StageError::StageError(std::string stage, const Error& cause)
    : Error(cause.code(), "stage " + stage + ": " + cause.what(), Verbatim{}),
      stage_(std::move(stage)) {}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfigError:
    case ErrorCode::kBadParameter:
    case ErrorCode::kIndivisibleLength:
      return 2;
    case ErrorCode::kEmptyTrace:
    case ErrorCode::kEncodingError:
    case ErrorCode::kInsufficientData:
    case ErrorCode::kTokenOutOfRange:
    case ErrorCode::kEmptyTrainingSet:
    case ErrorCode::kNonFiniteInput:
    case ErrorCode::kEmptySample:
    case ErrorCode::kDimensionMismatch:
    case ErrorCode::kInsufficientScores:
    case ErrorCode::kNonFiniteScore:
    case ErrorCode::kLengthMismatch:
      return 3;
    case ErrorCode::kDivergenceDetected:
      return 5;
    default:
      return 4;
  }
}

LoadedExtractor load_extractor(const ArtifactPaths& paths, bool quantized) {
  const auto file = quantized ? paths.quantized_model() : paths.model();
  const std::string bytes = read_binary_file(file);
  const std::string hash = hex64(fnv1a64(bytes));
  if (quantized) {
    auto stored = decode_quantized_model(bytes);
    return {Extractor(std::move(stored.model)), stored.svdd, hash};
  }
  auto stored = decode_model(bytes);
  return {Extractor(std::move(stored.model)), stored.svdd, hash};
}

void stage_synth(const PipelineConfig& config) { write_corpus(config.corpus_dir(), config.synth); }

IngestSummary stage_ingest(const PipelineConfig& config) {
  const auto dir = config.corpus_dir();
  const auto entries = read_manifest(dir / "manifest.txt");
  IngestSummary summary;
  std::vector<ParsedTrace> parsed;
  std::vector<std::vector<SyscallEvent>> normal_events;
  for (const auto& e : entries) {
    parsed.push_back(read_trace_file(dir / e.file, config.ingest.format));
    summary.malformed_lines += parsed.back().malformed_lines;
    if (e.label == Label::kNormal) {
      ++summary.normal_traces;
      normal_events.push_back(parsed.back().events);
    } else {
      ++summary.anomalous_traces;
    }
  }
  // Only normal behaviour defines the vocabulary; anything else maps to 0.
  const Vocabulary vocab = build_vocabulary(normal_events);

  std::vector<TokenSequence> normal, anomalous;
  const auto& ic = config.ingest;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto tokens = tokenize(parsed[i].events, vocab);
    const bool bad = entries[i].label == Label::kAnomalous;
    auto ws = window(tokens, ic.window_length, bad ? ic.detect_stride : ic.train_stride, ic.pad,
                     entries[i].label, static_cast<std::int64_t>(i));
    auto& dst = bad ? anomalous : normal;
    dst.insert(dst.end(), std::make_move_iterator(ws.begin()), std::make_move_iterator(ws.end()));
  }
  const DatasetSplit data = in_stage("split_dataset", [&] {
    return split_dataset(normal, anomalous, ic.train_frac, ic.val_frac, config.seed);
  });

  const ArtifactPaths paths{config.out};
  vocab.save(paths.vocab());
  save_dataset(paths.dataset(), data);
  summary.vocab_size = vocab.size();
  summary.train_windows = data.train.size();
  summary.validation_windows = data.validation.size();
  summary.test_windows = data.test.size();
  return summary;
}

TrainResult stage_train(const PipelineConfig& config, const EpochCallback& on_epoch) {
  const ArtifactPaths paths{config.out};
  const Vocabulary vocab = Vocabulary::load(paths.vocab());
  const DatasetSplit data = load_dataset(paths.dataset());
  ArchitectureConfig arch = config.arch;
  arch.vocab_size = vocab.size();
  arch.input_length = config.ingest.window_length;
  config.train.validate();
  auto model = init_extractor(arch, config.train.seed);

  std::string log;
  auto record = [&](const EpochRecord& r) {
    json j = {{"epoch", r.epoch},
              {"mean_loss", r.mean_loss},
              {"mean_distance", r.mean_distance},
              {"radius", r.radius},
              {"wall_seconds", r.wall_seconds}};
    log += j.dump() + "\n";
    if (on_epoch) on_epoch(r);
  };
  auto result = train(std::move(model), data, config.train, record);
  save_model(paths.model(), result.model, result.state);
  write_text(paths.train_log(), log);
  return result;
}

void stage_quantize(const PipelineConfig& config) {
  const ArtifactPaths paths{config.out};
  const auto stored = load_model(paths.model());
  save_quantized_model(paths.quantized_model(), quantize_model(stored.model), stored.svdd);
}

void stage_fit_forest(const PipelineConfig& config, bool quantized) {
  const ArtifactPaths paths{config.out};
  const auto loaded = load_extractor(paths, quantized);
  const DatasetSplit data = load_dataset(paths.dataset());
  const auto features = features_of(loaded.extractor, data.train);
  save_forest(paths.forest(quantized),
              fit_forest(features, config.forest.trees, config.forest.psi, config.seed));
}

Threshold stage_calibrate(const PipelineConfig& config, bool quantized) {
  const ArtifactPaths paths{config.out};
  const auto loaded = load_extractor(paths, quantized);
  const auto forest = load_forest(paths.forest(quantized));
  const DatasetSplit data = load_dataset(paths.dataset());
  const auto scores = score_windows(data.validation, loaded.extractor, forest);
  const Threshold t = calibrate_threshold(scores, config.threshold_k);
  save_threshold(paths.threshold(quantized), t);
  return t;
}

DetectionReport stage_detect(const PipelineConfig& config, bool quantized) {
  const ArtifactPaths paths{config.out};
  const auto loaded = load_extractor(paths, quantized);
  const auto forest = load_forest(paths.forest(quantized));
  const auto threshold = load_threshold(paths.threshold(quantized));
  const std::string dataset_bytes = read_binary_file(paths.dataset());
  const DatasetSplit data = load_dataset(paths.dataset());

  DetectionReport report = detect(data.test, loaded.extractor, forest, threshold);
  report.dataset = "dataset:" + hex64(fnv1a64(dataset_bytes));
  report.model_hash = loaded.hash;
  if (!config.recording_report) report.recording_metrics.reset();
  const auto val_scores = score_windows(data.validation, loaded.extractor, forest);
  report.validation_skewness = skewness(val_scores);
  write_text(paths.report_json(quantized), report_json(report));
  write_text(paths.report_csv(quantized), report_csv(report));
  return report;
}

Metrics stage_eval(const PipelineConfig& config, bool quantized) {
  const ArtifactPaths paths{config.out};
  const auto report = parse_report_json(read_binary_file(paths.report_json(quantized)));
  if (report.samples.empty()) fail(ErrorCode::kInsufficientData, "report has no samples");
  for (const auto& s : report.samples) {
    if (s.predicted != classify(s.score, report.threshold)) {
      fail(ErrorCode::kCorruptArtifact, "report row disagrees with its threshold");
    }
  }
  const Metrics m = window_metrics(report.samples);
  if (!same_metrics(m, report.window_metrics)) {
    fail(ErrorCode::kCorruptArtifact, "stored window metrics do not match the sample rows");
  }
  std::ostringstream os;
  os.precision(17);
  os << "variant " << report.variant << "\n"
     << "dataset " << report.dataset << "\n"
     << "model " << report.model_hash << "\n"
     << "threshold " << report.threshold.value << " (mean " << report.threshold.mean << ", std "
     << report.threshold.std << ", k " << report.threshold.k << ")\n"
     << "validation skewness " << report.validation_skewness << "\n"
     << "windows " << report.samples.size() << "\n";
  std::string text = os.str() + metrics_text("window", m);
  if (report.recording_metrics) text += metrics_text("recording", recording_metrics(report.samples));
  write_text(paths.eval(quantized), text);
  return m;
}

BenchReport stage_bench(const PipelineConfig& config) {
  const ArtifactPaths paths{config.out};
  const DatasetSplit data = load_dataset(paths.dataset());
  std::vector<TokenSequence> windows = data.test;
  if (config.bench.max_windows && windows.size() > config.bench.max_windows) {
    windows.resize(config.bench.max_windows);
  }

  auto run_variant = [&](bool quantized) {
    const auto loaded = load_extractor(paths, quantized);
    const auto forest = load_forest(paths.forest(quantized));
    const auto threshold = load_threshold(paths.threshold(quantized));
    VariantBench v;
    v.latency = time_windows(windows, loaded.extractor, forest, threshold, config.bench.repetitions);
    write_text(paths.latency_csv(quantized), latency_csv(v.latency));
    return v;
  };

  BenchReport report;
  report.float_model = run_variant(false);
  const auto stored = load_model(paths.model());
  report.float_model.payload_bytes = float_payload_bytes(stored.model);
  if (std::filesystem::exists(paths.quantized_model())) {
    report.quantized_model = run_variant(true);
    report.quantized_model->payload_bytes =
        quantized_payload_bytes(decode_quantized_model(read_binary_file(paths.quantized_model())).model);
  }
  std::ostringstream env;
  env << "single-threaded timing; hardware threads " << std::thread::hardware_concurrency()
      << "; windows " << windows.size() << " x repetitions " << config.bench.repetitions;
#if defined(__VERSION__)
  env << "; compiler " << __VERSION__;
#endif
  report.environment = env.str();

  write_text(paths.bench_json(), bench_json(report));
  std::ostringstream text;
  text.precision(6);
  auto line = [&](const char* name, const VariantBench& v) {
    text << name << ": mean " << v.latency.mean * 1e3 << " ms  median " << v.latency.median * 1e3
         << " ms  p95 " << v.latency.p95 * 1e3 << " ms  payload " << v.payload_bytes << " B\n";
  };
  line("float", report.float_model);
  if (report.quantized_model) {
    line("quantized", *report.quantized_model);
    text << "payload ratio " << static_cast<double>(report.quantized_model->payload_bytes) /
                                    static_cast<double>(report.float_model.payload_bytes)
         << "  speedup " << report.float_model.latency.mean / report.quantized_model->latency.mean
         << "\n";
  }
  text << report.environment << "\n";
  write_text(paths.bench_text(), text.str());
  return report;
}

std::string bench_json(const BenchReport& report) {
  auto variant = [](const VariantBench& v) {
    return json{{"per_sample_seconds", v.latency.per_sample_seconds},
                {"mean", v.latency.mean},
                {"median", v.latency.median},
                {"p95", v.latency.p95},
                {"payload_bytes", v.payload_bytes}};
  };
  json j;
  j["float"] = variant(report.float_model);
  if (report.quantized_model) {
    j["quantized"] = variant(*report.quantized_model);
    j["payload_ratio"] = static_cast<double>(report.quantized_model->payload_bytes) /
                         static_cast<double>(report.float_model.payload_bytes);
  }
  j["environment"] = report.environment;
  return j.dump(2) + "\n";
}

RunSummary run_pipeline(const PipelineConfig& config, const EpochCallback& on_epoch) {
  RunSummary summary;
  if (config.synthesize) in_stage("synth", [&] { stage_synth(config); });
  summary.ingest = in_stage("ingest", [&] { return stage_ingest(config); });
  summary.history = in_stage("train", [&] { return stage_train(config, on_epoch); }).history;
  if (config.quantize) in_stage("quantize", [&] { stage_quantize(config); });
  for (bool q : {false, true}) {
    if (q && !config.quantize) break;
    in_stage("fit-forest", [&] { stage_fit_forest(config, q); });
    in_stage("calibrate", [&] { stage_calibrate(config, q); });
    in_stage("detect", [&] { stage_detect(config, q); });
    const Metrics m = in_stage("eval", [&] { return stage_eval(config, q); });
    if (q) summary.quantized_metrics = m;
    else summary.float_metrics = m;
  }
  return summary;
}

}  // namespace lhids
