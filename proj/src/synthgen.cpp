#include "lhids/synthgen.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "lhids/errors.hpp"
#include "lhids/rng.hpp"

namespace lhids {
namespace {

std::size_t draw_categorical(const std::vector<double>& p, Rng& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    acc += p[i];
    last = i;
    if (u < acc) return i;
  }
  return last;  // rounding left u above the final cumulative sum
}

std::string state_name(std::size_t i) {
  std::string digits = std::to_string(i);
  if (digits.size() < 2) digits.insert(0, "0");
  return "call_" + digits;
}

std::string trace_text(const std::vector<std::string>& calls) {
  std::string out;
  for (const auto& c : calls) {
    out += c;
    out += '\n';
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) fail(ErrorCode::kIoError, "cannot write " + path.string());
}

std::string numbered(std::string_view prefix, std::size_t i) {
  std::string digits = std::to_string(i);
  if (digits.size() < 4) digits.insert(0, 4 - digits.size(), '0');
  return std::string(prefix) + "_" + digits + ".trace";
}

}  // namespace

MarkovModel gen_normal_model(std::size_t vocab_size, double concentration, std::uint64_t seed) {
  if (vocab_size < 2) fail(ErrorCode::kBadParameter, "vocab_size must be >= 2");
  if (!(concentration > 0.0) || !std::isfinite(concentration)) {
    fail(ErrorCode::kBadParameter, "concentration must be positive");
  }
  Rng rng = make_rng(seed, stream::kSynthModel);
  std::gamma_distribution<double> gamma(concentration, 1.0);
  MarkovModel m;
  m.seed = seed;
  for (std::size_t i = 0; i < vocab_size; ++i) m.states.push_back(state_name(i));
  m.initial.assign(vocab_size, 1.0 / static_cast<double>(vocab_size));
  for (std::size_t i = 0; i < vocab_size; ++i) {
    std::vector<double> row(vocab_size);
    double sum = 0.0;
    while (sum == 0.0) {  // every draw underflowing is possible for tiny concentrations
      for (auto& x : row) x = gamma(rng);
      sum = 0.0;
      for (double x : row) sum += x;
    }
    for (auto& x : row) x /= sum;
    m.transition.push_back(std::move(row));
  }
  return m;
}

std::vector<std::string> sample_trace(const MarkovModel& model, std::size_t length,
                                      std::uint64_t stream_id) {
  if (length == 0) fail(ErrorCode::kBadParameter, "trace length must be >= 1");
  Rng rng(derive_seed(derive_seed(model.seed, stream::kSynthTrace), stream_id));
  std::vector<std::string> out;
  out.reserve(length);
  std::size_t s = draw_categorical(model.initial, rng);
  out.push_back(model.states[s]);
  while (out.size() < length) {
    s = draw_categorical(model.transition[s], rng);
    out.push_back(model.states[s]);
  }
  return out;
}

AnomalyKind parse_anomaly_kind(std::string_view name) {
  if (name == "repeat_burst") return AnomalyKind::kRepeatBurst;
  if (name == "novel_calls") return AnomalyKind::kNovelCalls;
  if (name == "shuffled") return AnomalyKind::kShuffled;
  fail(ErrorCode::kConfigError, "unknown anomaly kind '" + std::string(name) + "'");
}

std::string_view anomaly_kind_name(AnomalyKind kind) {
  switch (kind) {
    case AnomalyKind::kRepeatBurst: return "repeat_burst";
    case AnomalyKind::kNovelCalls: return "novel_calls";
    case AnomalyKind::kShuffled: return "shuffled";
  }
  return "?";
}

std::vector<std::string> inject_anomaly(std::vector<std::string> trace, const AnomalySpec& spec,
                                        std::uint64_t seed) {
  if (trace.empty()) fail(ErrorCode::kBadParameter, "cannot inject into an empty trace");
  if (!(spec.intensity > 0.0 && spec.intensity <= 1.0)) {
    fail(ErrorCode::kBadParameter, "intensity must be in (0, 1]");
  }
  const std::size_t n = trace.size();
  const auto count = static_cast<std::size_t>(std::round(spec.intensity * static_cast<double>(n)));
  Rng rng = make_rng(seed, stream::kSynthAnomaly);
  switch (spec.kind) {
    case AnomalyKind::kRepeatBurst: {
      if (spec.burst_call.empty()) fail(ErrorCode::kBadParameter, "burst call name is empty");
      if (count == 0) break;
      const std::size_t start = uniform_index(rng, n - count + 1);
      std::fill(trace.begin() + static_cast<std::ptrdiff_t>(start),
                trace.begin() + static_cast<std::ptrdiff_t>(start + count), spec.burst_call);
      break;
    }
    case AnomalyKind::kNovelCalls: {
      if (spec.novel_names == 0) fail(ErrorCode::kBadParameter, "novel_names must be >= 1");
      std::vector<std::size_t> pos(n);
      for (std::size_t i = 0; i < n; ++i) pos[i] = i;
      for (std::size_t i = 0; i < count; ++i) {
        std::swap(pos[i], pos[i + uniform_index(rng, n - i)]);
        trace[pos[i]] = "novel_" + std::to_string(uniform_index(rng, spec.novel_names));
      }
      break;
    }
    case AnomalyKind::kShuffled: {
      if (count < 2) break;
      const std::size_t start = uniform_index(rng, n - count + 1);
      for (std::size_t i = count - 1; i > 0; --i) {
        std::swap(trace[start + i], trace[start + uniform_index(rng, i + 1)]);
      }
      break;
    }
  }
  return trace;
}

std::vector<ManifestEntry> write_corpus(const std::filesystem::path& dir, const SynthConfig& c) {
  if (c.normal_traces == 0) fail(ErrorCode::kBadParameter, "need at least one normal trace");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorCode::kIoError, "cannot create " + dir.string() + ": " + ec.message());
  const MarkovModel model = gen_normal_model(c.vocab_size, c.concentration, c.seed);
  std::vector<ManifestEntry> entries;
  for (std::size_t i = 0; i < c.normal_traces; ++i) {
    entries.push_back({numbered("normal", i), Label::kNormal});
    write_text(dir / entries.back().file, trace_text(sample_trace(model, c.trace_length, i)));
  }
  for (std::size_t i = 0; i < c.anomalous_traces; ++i) {
    auto base = sample_trace(model, c.anomalous_length, c.normal_traces + i);
    auto trace = inject_anomaly(std::move(base), c.anomaly, derive_seed(c.seed, i));
    entries.push_back({numbered("anomalous", i), Label::kAnomalous});
    write_text(dir / entries.back().file, trace_text(trace));
  }
  write_manifest(dir / "manifest.txt", entries);
  return entries;
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
  std::string text = "# lhids-manifest 1\n";
  for (const auto& e : entries) {
    text += e.label == Label::kAnomalous ? "anomalous " : "normal ";
    text += e.file + "\n";
  }
  write_text(path, text);
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIoError, "cannot read manifest " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "# lhids-manifest 1") {
    fail(ErrorCode::kCorruptArtifact, path.string() + ": missing manifest header");
  }
  std::vector<ManifestEntry> entries;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string label, file;
    fields >> label >> file;
    ManifestEntry e;
    e.file = file;
    if (label == "normal") e.label = Label::kNormal;
    else if (label == "anomalous") e.label = Label::kAnomalous;
    else fail(ErrorCode::kCorruptArtifact, path.string() + ":" + std::to_string(lineno) + ": bad label");
    if (file.empty()) fail(ErrorCode::kCorruptArtifact, path.string() + ":" + std::to_string(lineno) + ": missing file");
    entries.push_back(std::move(e));
  }
  return entries;
}

}  // namespace lhids
