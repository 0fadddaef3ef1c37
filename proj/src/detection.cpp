#include "lhids/detection.hpp"

#include <chrono>
#include <cmath>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

#include "lhids/artifact.hpp"
#include "lhids/errors.hpp"
#include "lhids/parallel.hpp"
#include "lhids/stats.hpp"

namespace lhids {
namespace {

constexpr std::uint32_t kThresholdTag = section_tag("THRS");

using json = nlohmann::json;

json metrics_json(const Metrics& m) {
  return {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1},
          {"tp", m.tp},               {"fp", m.fp},         {"fn", m.fn},
          {"tn", m.tn}};
}

Metrics metrics_from_json(const json& j) {
  Metrics m;
  m.precision = j.at("precision").get<double>();
  m.recall = j.at("recall").get<double>();
  m.f1 = j.at("f1").get<double>();
  m.tp = j.at("tp").get<std::size_t>();
  m.fp = j.at("fp").get<std::size_t>();
  m.fn = j.at("fn").get<std::size_t>();
  m.tn = j.at("tn").get<std::size_t>();
  return m;
}

// Shortest text that reads back as the same double.
std::string exact(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

Threshold calibrate_threshold(std::span<const double> val_scores, double k) {
  if (val_scores.size() < 2) {
    fail(ErrorCode::kInsufficientScores,
         "need at least 2 validation scores, got " + std::to_string(val_scores.size()));
  }
  for (double s : val_scores) {
    if (!std::isfinite(s)) fail(ErrorCode::kNonFiniteScore, "validation score is not finite");
  }
  if (!std::isfinite(k)) fail(ErrorCode::kBadParameter, "threshold k is not finite");
  Threshold t;
  t.mean = mean(val_scores);
  t.std = population_std(val_scores);
  t.k = k;
  t.value = t.mean + t.k * t.std;
  return t;
}

int classify(double score, const Threshold& threshold) { return score > threshold.value ? 1 : 0; }

Metrics evaluate(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) {
    fail(ErrorCode::kLengthMismatch, std::to_string(predicted.size()) + " predictions vs " +
                                         std::to_string(truth.size()) + " labels");
  }
  if (predicted.empty()) fail(ErrorCode::kLengthMismatch, "nothing to evaluate");
  Metrics m;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const bool p = predicted[i] != 0, t = truth[i] != 0;
    if (p && t) ++m.tp;
    else if (p) ++m.fp;
    else if (t) ++m.fn;
    else ++m.tn;
  }
  auto ratio = [](std::size_t a, std::size_t b) {
    return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b);
  };
  m.precision = ratio(m.tp, m.tp + m.fp);
  m.recall = ratio(m.tp, m.tp + m.fn);
  const double denom = m.precision + m.recall;
  m.f1 = denom == 0.0 ? 0.0 : 2.0 * m.precision * m.recall / denom;
  return m;
}

const ModelHyper& Extractor::hyper() const {
  return std::visit([](const auto& m) -> const ModelHyper& { return m.hyper; }, model_);
}

FeatureVector Extractor::features(std::span<const Token> tokens) const {
  if (const auto* q = std::get_if<QuantizedModel>(&model_)) return quantized_forward(*q, tokens);
  return extract_features(std::get<ExtractorModel>(model_), tokens);
}

void check_compatible(const Extractor& extractor, const IsolationForestModel& forest) {
  if (extractor.hyper().feature_dim != forest.dim) {
    fail(ErrorCode::kArtifactMismatch,
         "extractor feature_dim " + std::to_string(extractor.hyper().feature_dim) +
             " vs forest dim " + std::to_string(forest.dim));
  }
}

Decision deploy_pipeline(std::span<const Token> tokens, const Extractor& extractor,
                         const IsolationForestModel& forest, const Threshold& threshold) {
  if (tokens.size() != extractor.hyper().input_length) {
    fail(ErrorCode::kArtifactMismatch,
         "window length " + std::to_string(tokens.size()) + " vs model input_length " +
             std::to_string(extractor.hyper().input_length));
  }
  check_compatible(extractor, forest);
  const auto start = std::chrono::steady_clock::now();
  Decision d;
  d.score = anomaly_score(forest, extractor.features(tokens));
  d.label = classify(d.score, threshold);
  d.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return d;
}

std::vector<double> score_windows(const std::vector<TokenSequence>& windows,
                                  const Extractor& extractor, const IsolationForestModel& forest) {
  check_compatible(extractor, forest);
  const std::size_t len = extractor.hyper().input_length;
  for (const auto& w : windows) {
    if (w.tokens.size() != len) {
      fail(ErrorCode::kArtifactMismatch, "window length " + std::to_string(w.tokens.size()) +
                                             " vs model input_length " + std::to_string(len));
    }
  }
  std::vector<double> scores(windows.size());
  parallel_for(windows.size(), [&](std::size_t i) {
    scores[i] = anomaly_score(forest, extractor.features(windows[i].tokens));
  });
  return scores;
}

LatencySummary summarize_latency(std::vector<double> per_sample_seconds) {
  LatencySummary s;
  s.per_sample_seconds = std::move(per_sample_seconds);
  if (s.per_sample_seconds.empty()) return s;
  s.mean = mean(s.per_sample_seconds);
  s.median = quantile(s.per_sample_seconds, 0.5);
  s.p95 = quantile(s.per_sample_seconds, 0.95);
  return s;
}

Metrics window_metrics(std::span<const SampleResult> samples) {
  std::vector<int> p, t;
  for (const auto& s : samples) {
    p.push_back(s.predicted);
    t.push_back(s.truth);
  }
  return evaluate(p, t);
}

Metrics recording_metrics(std::span<const SampleResult> samples) {
  std::map<std::int64_t, std::pair<int, int>> by_recording;
  for (const auto& s : samples) {
    auto& [p, t] = by_recording[s.recording];
    p |= s.predicted;
    t |= s.truth;
  }
  std::vector<int> p, t;
  for (const auto& [rec, pt] : by_recording) {
    p.push_back(pt.first);
    t.push_back(pt.second);
  }
  return evaluate(p, t);
}

DetectionReport detect(const std::vector<TokenSequence>& windows, const Extractor& extractor,
                       const IsolationForestModel& forest, const Threshold& threshold) {
  if (windows.empty()) fail(ErrorCode::kInsufficientData, "no windows to detect on");
  for (const auto& w : windows) {
    if (w.label == Label::kUnlabeled) {
      fail(ErrorCode::kInsufficientData, "detection windows must be labeled");
    }
  }
  const auto scores = score_windows(windows, extractor, forest);
  DetectionReport r;
  r.variant = extractor.quantized() ? "quantized" : "float";
  r.threshold = threshold;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    r.samples.push_back({scores[i], classify(scores[i], threshold),
                         windows[i].label == Label::kAnomalous ? 1 : 0, windows[i].recording});
  }
  r.window_metrics = window_metrics(r.samples);
  r.recording_metrics = recording_metrics(r.samples);
  return r;
}

LatencySummary time_windows(const std::vector<TokenSequence>& windows, const Extractor& extractor,
                            const IsolationForestModel& forest, const Threshold& threshold,
                            std::size_t repetitions) {
  if (windows.empty()) fail(ErrorCode::kInsufficientData, "no windows to time");
  if (repetitions == 0) fail(ErrorCode::kBadParameter, "repetitions must be positive");
  for (const auto& w : windows) deploy_pipeline(w.tokens, extractor, forest, threshold);
  std::vector<double> seconds;
  seconds.reserve(windows.size() * repetitions);
  for (std::size_t r = 0; r < repetitions; ++r) {
    for (const auto& w : windows) {
      seconds.push_back(deploy_pipeline(w.tokens, extractor, forest, threshold).elapsed_seconds);
    }
  }
  return summarize_latency(std::move(seconds));
}

std::string report_json(const DetectionReport& r) {
  json j;
  j["dataset"] = r.dataset;
  j["variant"] = r.variant;
  j["model_hash"] = r.model_hash;
  j["threshold"] = {{"mean", r.threshold.mean},
                    {"std", r.threshold.std},
                    {"k", r.threshold.k},
                    {"value", r.threshold.value}};
  j["diagnostics"] = {{"validation_skewness", r.validation_skewness}};
  j["window_metrics"] = metrics_json(r.window_metrics);
  if (r.recording_metrics) j["recording_metrics"] = metrics_json(*r.recording_metrics);
  json rows = json::array();
  for (const auto& s : r.samples) {
    rows.push_back({{"score", s.score},
                    {"predicted", s.predicted},
                    {"truth", s.truth},
                    {"recording", s.recording}});
  }
  j["samples"] = std::move(rows);
  return j.dump(2) + "\n";
}

DetectionReport parse_report_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    DetectionReport r;
    r.dataset = j.at("dataset").get<std::string>();
    r.variant = j.at("variant").get<std::string>();
    r.model_hash = j.at("model_hash").get<std::string>();
    const auto& t = j.at("threshold");
    r.threshold = {t.at("mean").get<double>(), t.at("std").get<double>(), t.at("k").get<double>(),
                   t.at("value").get<double>()};
    r.validation_skewness = j.at("diagnostics").at("validation_skewness").get<double>();
    r.window_metrics = metrics_from_json(j.at("window_metrics"));
    if (j.contains("recording_metrics")) r.recording_metrics = metrics_from_json(j["recording_metrics"]);
    for (const auto& s : j.at("samples")) {
      r.samples.push_back({s.at("score").get<double>(), s.at("predicted").get<int>(),
                           s.at("truth").get<int>(), s.at("recording").get<std::int64_t>()});
    }
    return r;
  } catch (const json::exception& e) {
    fail(ErrorCode::kCorruptArtifact, std::string("report: ") + e.what());
  }
}

std::string report_csv(const DetectionReport& r) {
  std::string out = "index,recording,score,predicted,truth\n";
  for (std::size_t i = 0; i < r.samples.size(); ++i) {
    const auto& s = r.samples[i];
    out += std::to_string(i) + "," + std::to_string(s.recording) + "," + exact(s.score) + "," +
           std::to_string(s.predicted) + "," + std::to_string(s.truth) + "\n";
  }
  return out;
}

std::string latency_csv(const LatencySummary& latency) {
  std::string out = "index,seconds\n";
  for (std::size_t i = 0; i < latency.per_sample_seconds.size(); ++i) {
    out += std::to_string(i) + "," + exact(latency.per_sample_seconds[i]) + "\n";
  }
  return out;
}

std::string encode_threshold(const Threshold& t) {
  ByteWriter w;
  w.f64(t.mean);
  w.f64(t.std);
  w.f64(t.k);
  w.f64(t.value);
  return encode_container(ArtifactKind::kThreshold, {{kThresholdTag, w.take()}});
}

Threshold decode_threshold(std::string_view bytes) {
  const auto sections = decode_container(bytes, ArtifactKind::kThreshold);
  ByteReader r(require_section(sections, kThresholdTag, "THRS").payload);
  Threshold t;
  t.mean = r.f64();
  t.std = r.f64();
  t.k = r.f64();
  t.value = r.f64();
  r.expect_done("THRS");
  if (!t.consistent()) fail(ErrorCode::kCorruptArtifact, "threshold value != mean + k * std");
  return t;
}

void save_threshold(const std::filesystem::path& path, const Threshold& threshold) {
  write_binary_file(path, encode_threshold(threshold));
}

Threshold load_threshold(const std::filesystem::path& path) {
  return decode_threshold(read_binary_file(path));
}

}  // namespace lhids
