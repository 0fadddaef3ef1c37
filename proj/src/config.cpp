#include "lhids/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "lhids/errors.hpp"

namespace lhids {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& v, const std::string& key) {
  T out{};
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || p != end) fail(ErrorCode::kConfigError, key + ": bad number '" + v + "'");
  return out;
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  fail(ErrorCode::kConfigError, key + ": expected true or false, got '" + v + "'");
}

std::vector<std::size_t> parse_list(const std::string& v, const std::string& key) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<std::size_t>(trim(item), key));
  if (out.empty()) fail(ErrorCode::kConfigError, key + ": empty list");
  return out;
}

// Shortest text that reads back to the same double.
std::string fmt(double v) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string fmt(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::string fmt(bool v) { return v ? "true" : "false"; }

struct Key {
  std::string section;
  std::string name;
  std::function<void(PipelineConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

#define LHIDS_SIZE(sec, key, expr)                                                            \
  Key {                                                                                       \
    sec, key,                                                                                 \
        [](PipelineConfig& c, const std::string& v, const std::string& k) {                   \
          expr = parse_number<std::remove_reference_t<decltype(expr)>>(v, k);                 \
        },                                                                                    \
        [](const PipelineConfig& c) { return std::to_string(expr); }                          \
  }
#define LHIDS_REAL(sec, key, expr)                                                            \
  Key {                                                                                       \
    sec, key,                                                                                 \
        [](PipelineConfig& c, const std::string& v, const std::string& k) {                   \
          expr = parse_number<double>(v, k);                                                  \
        },                                                                                    \
        [](const PipelineConfig& c) { return fmt(expr); }                                     \
  }
#define LHIDS_BOOL(sec, key, expr)                                                            \
  Key {                                                                                       \
    sec, key,                                                                                 \
        [](PipelineConfig& c, const std::string& v, const std::string& k) {                   \
          expr = parse_bool(v, k);                                                            \
        },                                                                                    \
        [](const PipelineConfig& c) { return fmt(expr); }                                     \
  }

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      LHIDS_SIZE("pipeline", "seed", c.seed),
      Key{"pipeline", "out", [](PipelineConfig& c, const std::string& v, const std::string&) { c.out = v; },
          [](const PipelineConfig& c) { return c.out.string(); }},
      LHIDS_BOOL("pipeline", "synthesize", c.synthesize),
      LHIDS_BOOL("pipeline", "quantize", c.quantize),
      LHIDS_BOOL("pipeline", "recording_report", c.recording_report),

      LHIDS_SIZE("synth", "vocab_size", c.synth.vocab_size),
      LHIDS_REAL("synth", "concentration", c.synth.concentration),
      LHIDS_SIZE("synth", "normal_traces", c.synth.normal_traces),
      LHIDS_SIZE("synth", "trace_length", c.synth.trace_length),
      LHIDS_SIZE("synth", "anomalous_traces", c.synth.anomalous_traces),
      LHIDS_SIZE("synth", "anomalous_length", c.synth.anomalous_length),
      Key{"synth", "anomaly",
          [](PipelineConfig& c, const std::string& v, const std::string&) {
            c.synth.anomaly.kind = parse_anomaly_kind(v);
          },
          [](const PipelineConfig& c) { return std::string(anomaly_kind_name(c.synth.anomaly.kind)); }},
      LHIDS_REAL("synth", "intensity", c.synth.anomaly.intensity),
      Key{"synth", "burst_call",
          [](PipelineConfig& c, const std::string& v, const std::string& k) {
            if (v.empty()) fail(ErrorCode::kConfigError, k + ": empty");
            c.synth.anomaly.burst_call = v;
          },
          [](const PipelineConfig& c) { return c.synth.anomaly.burst_call; }},
      LHIDS_SIZE("synth", "novel_names", c.synth.anomaly.novel_names),

      Key{"ingest", "corpus",
          [](PipelineConfig& c, const std::string& v, const std::string&) { c.ingest.corpus = v; },
          [](const PipelineConfig& c) { return c.ingest.corpus.string(); }},
      Key{"ingest", "format",
          [](PipelineConfig& c, const std::string& v, const std::string&) {
            c.ingest.format = parse_trace_format(v);
          },
          [](const PipelineConfig& c) { return std::string(trace_format_name(c.ingest.format)); }},
      LHIDS_SIZE("ingest", "window_length", c.ingest.window_length),
      LHIDS_SIZE("ingest", "train_stride", c.ingest.train_stride),
      LHIDS_SIZE("ingest", "detect_stride", c.ingest.detect_stride),
      Key{"ingest", "pad",
          [](PipelineConfig& c, const std::string& v, const std::string&) { c.ingest.pad = parse_pad_mode(v); },
          [](const PipelineConfig& c) { return std::string(pad_mode_name(c.ingest.pad)); }},
      LHIDS_REAL("ingest", "train_frac", c.ingest.train_frac),
      LHIDS_REAL("ingest", "val_frac", c.ingest.val_frac),

      LHIDS_SIZE("model", "embed_dim", c.arch.embed_dim),
      Key{"model", "channels",
          [](PipelineConfig& c, const std::string& v, const std::string& k) { c.arch.channels = parse_list(v, k); },
          [](const PipelineConfig& c) { return fmt(c.arch.channels); }},
      LHIDS_SIZE("model", "kernel_width", c.arch.kernel_width),
      Key{"model", "pools",
          [](PipelineConfig& c, const std::string& v, const std::string& k) { c.arch.pools = parse_list(v, k); },
          [](const PipelineConfig& c) { return fmt(c.arch.pools); }},
      LHIDS_SIZE("model", "feature_dim", c.arch.feature_dim),

      Key{"train", "objective",
          [](PipelineConfig& c, const std::string& v, const std::string&) { c.train.objective = parse_objective(v); },
          [](const PipelineConfig& c) { return std::string(objective_name(c.train.objective)); }},
      LHIDS_SIZE("train", "epochs", c.train.epochs),
      LHIDS_SIZE("train", "batch_size", c.train.batch_size),
      LHIDS_REAL("train", "learning_rate", c.train.learning_rate),
      LHIDS_REAL("train", "weight_decay", c.train.weight_decay),
      Key{"train", "decay_mode",
          [](PipelineConfig& c, const std::string& v, const std::string&) { c.train.decay_mode = parse_decay_mode(v); },
          [](const PipelineConfig& c) { return std::string(decay_mode_name(c.train.decay_mode)); }},
      LHIDS_REAL("train", "nu", c.train.nu),
      LHIDS_REAL("train", "epsilon_c", c.train.epsilon_c),
      LHIDS_SIZE("train", "radius_update_batches", c.train.radius_update_batches),
      LHIDS_REAL("train", "beta1", c.train.beta1),
      LHIDS_REAL("train", "beta2", c.train.beta2),
      LHIDS_REAL("train", "adam_epsilon", c.train.adam_epsilon),

      LHIDS_SIZE("forest", "trees", c.forest.trees),
      LHIDS_SIZE("forest", "psi", c.forest.psi),

      LHIDS_REAL("calibrate", "k", c.threshold_k),

      LHIDS_SIZE("bench", "repetitions", c.bench.repetitions),
      LHIDS_SIZE("bench", "max_windows", c.bench.max_windows),
  };
  return table;
}

#undef LHIDS_SIZE
#undef LHIDS_REAL
#undef LHIDS_BOOL

}  // namespace

void PipelineConfig::apply_seed(std::uint64_t s) {
  seed = s;
  synth.seed = s;
  train.seed = s;
}

std::filesystem::path PipelineConfig::corpus_dir() const {
  return ingest.corpus.empty() ? out / "corpus" : ingest.corpus;
}

PipelineConfig parse_config(std::string_view text) {
  PipelineConfig c;
  std::string section;
  std::set<std::string> seen;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const auto where = "line " + std::to_string(lineno);
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(ErrorCode::kConfigError, where + ": unterminated section header");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      const bool known = std::any_of(keys().begin(), keys().end(),
                                     [&](const Key& k) { return k.section == section; });
      if (!known) fail(ErrorCode::kConfigError, where + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(ErrorCode::kConfigError, where + ": expected key = value");
    const std::string name = trim(std::string_view(line).substr(0, eq));
    std::string_view rest = std::string_view(line).substr(eq + 1);
    // "# ..." after whitespace is a trailing comment.
    for (std::size_t i = 1; i < rest.size(); ++i) {
      if (rest[i] == '#' && (rest[i - 1] == ' ' || rest[i - 1] == '\t')) {
        rest = rest.substr(0, i);
        break;
      }
    }
    const std::string value = trim(rest);
    if (section.empty()) fail(ErrorCode::kConfigError, where + ": '" + name + "' outside a section");
    const std::string full = section + "." + name;
    const auto it = std::find_if(keys().begin(), keys().end(), [&](const Key& k) {
      return k.section == section && k.name == name;
    });
    if (it == keys().end()) fail(ErrorCode::kConfigError, where + ": unknown key " + full);
    if (!seen.insert(full).second) fail(ErrorCode::kConfigError, where + ": duplicate key " + full);
    it->set(c, value, full);
  }
  // The pipeline seed drives every stage unless it was never given.
  if (seen.count("pipeline.seed")) c.apply_seed(c.seed);
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kConfigError, "cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string echo_config(const PipelineConfig& config) {
  std::string out;
  std::string section;
  for (const auto& k : keys()) {
    if (k.section != section) {
      out += (section.empty() ? "[" : "\n[") + k.section + "]\n";
      section = k.section;
    }
    out += k.name + " = " + k.get(config) + "\n";
  }
  return out;
}

}  // namespace lhids
