#include "lhids/trace_ingest.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>

#include "lhids/errors.hpp"
#include "lhids/rng.hpp"

namespace lhids {
namespace {

bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t extra;
    std::uint32_t cp;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      extra = 1;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      extra = 2;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      extra = 3;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + extra >= s.size()) return false;
    for (std::size_t k = 1; k <= extra; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    // Overlong forms, surrogates and out-of-range code points.
    if ((extra == 1 && cp < 0x80) || (extra == 2 && cp < 0x800) ||
        (extra == 3 && cp < 0x10000) || cp > 0x10FFFF ||
        (cp >= 0xD800 && cp <= 0xDFFF)) {
      return false;
    }
    i += extra + 1;
  }
  return true;
}

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' ||
         c == '\f';
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) ++i;
    const std::size_t start = i;
    while (i < line.size() && !is_space(line[i])) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

ParsedTrace parse_trace(std::string_view raw, TraceFormat format) {
  if (!valid_utf8(raw)) fail(ErrorCode::kEncodingError, "trace is not valid UTF-8");

  ParsedTrace result;
  std::size_t line_index = 0;
  std::size_t pos = 0;
  while (pos < raw.size()) {
    std::size_t nl = raw.find('\n', pos);
    if (nl == std::string_view::npos) nl = raw.size();
    const std::string_view line = raw.substr(pos, nl - pos);
    pos = nl + 1;

    const auto fields = split_fields(line);
    if (fields.empty() || fields.front().front() == '#') continue;

    SyscallEvent ev;
    if (format == TraceFormat::kPlainNames) {
      if (fields.size() != 1) {
        ++result.malformed_lines;
        continue;
      }
      ev.timestamp = static_cast<double>(line_index);
      ev.call_name = std::string(fields[0]);
    } else {
      // Fields past the call name (arguments, return values) are ignored.
      if (fields.size() < 3 || !parse_number(fields[0], ev.timestamp) ||
          !parse_number(fields[1], ev.process_id) || !(ev.timestamp >= 0.0) ||
          (!result.events.empty() &&
           ev.timestamp < result.events.back().timestamp)) {
        ++result.malformed_lines;
        continue;
      }
      ev.call_name = std::string(fields[2]);
    }
    result.events.push_back(std::move(ev));
    ++line_index;
  }
  if (result.events.empty()) fail(ErrorCode::kEmptyTrace, "no valid events in trace");
  return result;
}

ParsedTrace read_trace_file(const std::filesystem::path& path,
                            TraceFormat format) {
  try {
    return parse_trace(read_file(path), format);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

TraceFormat parse_trace_format(std::string_view name) {
  if (name == "lid_ds_like") return TraceFormat::kLidDsLike;
  if (name == "plain_names") return TraceFormat::kPlainNames;
  fail(ErrorCode::kConfigError, "unknown trace format '" + std::string(name) + "'");
}

std::string_view trace_format_name(TraceFormat format) {
  return format == TraceFormat::kLidDsLike ? "lid_ds_like" : "plain_names";
}

Token Vocabulary::add(const std::string& name) {
  if (auto it = name_to_id_.find(name); it != name_to_id_.end()) return it->second;
  names_.push_back(name);
  const auto id = static_cast<Token>(names_.size());
  name_to_id_.emplace(name, id);
  return id;
}

Token Vocabulary::lookup(std::string_view name) const {
  auto it = name_to_id_.find(name);
  return it == name_to_id_.end() ? kUnknownId : it->second;
}

bool Vocabulary::contains(std::string_view name) const {
  return name_to_id_.find(name) != name_to_id_.end();
}

std::string Vocabulary::serialize() const {
  std::ostringstream out;
  out << "magic = lhids-vocab\n";
  out << "version = 1\n";
  out << "size = " << names_.size() << "\n";
  for (std::size_t i = 0; i < names_.size(); ++i) {
    out << "call " << names_[i] << " = " << (i + 1) << "\n";
  }
  return out.str();
}

Vocabulary Vocabulary::deserialize(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  auto expect_kv = [&](std::string_view key) -> std::string {
    if (!std::getline(in, line)) fail(ErrorCode::kCorruptArtifact, "vocabulary truncated");
    const auto f = split_fields(line);
    if (f.size() != 3 || f[0] != key || f[1] != "=") {
      fail(ErrorCode::kCorruptArtifact, "vocabulary: expected '" + std::string(key) + "'");
    }
    return std::string(f[2]);
  };
  if (!std::getline(in, line)) fail(ErrorCode::kCorruptArtifact, "vocabulary truncated");
  {
    const auto f = split_fields(line);
    if (f.size() != 3 || f[0] != "magic") {
      fail(ErrorCode::kWrongKind, "not a vocabulary file");
    }
    if (f[2] != "lhids-vocab") fail(ErrorCode::kWrongKind, "not a vocabulary file");
  }
  if (expect_kv("version") != "1") fail(ErrorCode::kVersionMismatch, "vocabulary version");
  std::size_t size = 0;
  if (!parse_number(std::string_view(expect_kv("size")), size)) {
    fail(ErrorCode::kCorruptArtifact, "vocabulary size");
  }
  Vocabulary vocab;
  for (std::size_t i = 0; i < size; ++i) {
    if (!std::getline(in, line)) fail(ErrorCode::kCorruptArtifact, "vocabulary truncated");
    const auto f = split_fields(line);
    std::size_t id = 0;
    if (f.size() != 4 || f[0] != "call" || f[2] != "=" || !parse_number(f[3], id) ||
        id != i + 1 || vocab.contains(f[1])) {
      fail(ErrorCode::kCorruptArtifact, "vocabulary record " + std::to_string(i + 1));
    }
    vocab.add(std::string(f[1]));
  }
  return vocab;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIoError, "cannot write " + path.string());
  out << serialize();
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  return deserialize(read_file(path));
}

Vocabulary build_vocabulary(const std::vector<std::vector<SyscallEvent>>& traces) {
  Vocabulary vocab;
  for (const auto& trace : traces) {
    for (const auto& ev : trace) vocab.add(ev.call_name);
  }
  if (vocab.size() == 0) fail(ErrorCode::kEmptyTrace, "no events to build a vocabulary from");
  return vocab;
}

std::vector<Token> tokenize(const std::vector<SyscallEvent>& events,
                            const Vocabulary& vocab) {
  std::vector<Token> out;
  out.reserve(events.size());
  for (const auto& ev : events) out.push_back(vocab.lookup(ev.call_name));
  return out;
}

PadMode parse_pad_mode(std::string_view name) {
  if (name == "drop_tail") return PadMode::kDropTail;
  if (name == "zero_pad") return PadMode::kZeroPad;
  fail(ErrorCode::kConfigError, "unknown pad mode '" + std::string(name) + "'");
}

std::string_view pad_mode_name(PadMode mode) {
  return mode == PadMode::kDropTail ? "drop_tail" : "zero_pad";
}

std::vector<TokenSequence> window(const std::vector<Token>& tokens,
                                  std::size_t length, std::size_t stride,
                                  PadMode pad, Label label,
                                  std::int64_t recording) {
  if (length == 0 || stride == 0) {
    fail(ErrorCode::kBadParameter, "window length and stride must be positive");
  }
  std::vector<TokenSequence> out;
  for (std::size_t start = 0; start < tokens.size(); start += stride) {
    const std::size_t end = start + length;
    if (end > tokens.size()) {
      // A trace shorter than one window still yields a padded window.
      if (pad == PadMode::kDropTail) break;
      TokenSequence seq{std::vector<Token>(length, 0), label, recording};
      std::copy(tokens.begin() + static_cast<std::ptrdiff_t>(start), tokens.end(),
                seq.tokens.begin());
      out.push_back(std::move(seq));
      break;
    }
    out.push_back({std::vector<Token>(tokens.begin() + static_cast<std::ptrdiff_t>(start),
                                      tokens.begin() + static_cast<std::ptrdiff_t>(end)),
                   label, recording});
  }
  return out;
}

DatasetSplit split_dataset(const std::vector<TokenSequence>& normal,
                           const std::vector<TokenSequence>& anomalous,
                           double train_frac, double val_frac,
                           std::uint64_t seed) {
  if (!(train_frac > 0.0) || !(val_frac > 0.0) || !(train_frac + val_frac < 1.0)) {
    fail(ErrorCode::kBadParameter,
         "split_dataset: need 0 < train_frac, 0 < val_frac, train_frac + val_frac < 1");
  }
  const std::size_t n = normal.size();
  // The epsilon keeps products like 0.7 * 10 from flooring to 6.
  const auto n_train =
      static_cast<std::size_t>(train_frac * static_cast<double>(n) + 1e-9);
  const auto n_val = static_cast<std::size_t>(val_frac * static_cast<double>(n) + 1e-9);
  if (n_train == 0 || n_val == 0 || n_train + n_val >= n) {
    fail(ErrorCode::kInsufficientData,
         "split_dataset: " + std::to_string(n) +
             " normal windows leave an empty train, validation or test partition");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = make_rng(seed, stream::kSplit);
  for (std::size_t i = n; i > 1; --i) {
    std::swap(order[i - 1], order[uniform_index(rng, i)]);
  }

  DatasetSplit split;
  for (std::size_t i = 0; i < n; ++i) {
    TokenSequence seq = normal[order[i]];
    seq.label = Label::kNormal;
    if (i < n_train) {
      split.train.push_back(std::move(seq));
    } else if (i < n_train + n_val) {
      split.validation.push_back(std::move(seq));
    } else {
      split.test.push_back(std::move(seq));
    }
  }
  for (TokenSequence seq : anomalous) {
    seq.label = Label::kAnomalous;
    split.test.push_back(std::move(seq));
  }
  return split;
}

void save_dataset(const std::filesystem::path& path, const DatasetSplit& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIoError, "cannot write " + path.string());
  out << "# lhids-dataset 1\n";
  auto emit = [&](const char* part, const std::vector<TokenSequence>& seqs) {
    for (const auto& s : seqs) {
      out << part << ' ' << static_cast<int>(s.label) << ' ' << s.recording;
      for (Token t : s.tokens) out << ' ' << t;
      out << '\n';
    }
  };
  emit("train", data.train);
  emit("val", data.validation);
  emit("test", data.test);
}

DatasetSplit load_dataset(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  if (text.rfind("# lhids-dataset 1\n", 0) != 0) {
    fail(ErrorCode::kCorruptArtifact, path.string() + " is not a dataset file");
  }
  DatasetSplit data;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    const std::string_view line(text.data() + pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    const auto f = split_fields(line);
    if (f.empty() || f[0].front() == '#') continue;
    TokenSequence seq;
    int label = 0;
    if (f.size() < 3 || !parse_number(f[1], label) || label < 0 || label > 2 ||
        !parse_number(f[2], seq.recording)) {
      fail(ErrorCode::kCorruptArtifact, "dataset line " + std::to_string(line_no));
    }
    seq.label = static_cast<Label>(label);
    for (std::size_t i = 3; i < f.size(); ++i) {
      Token t = 0;
      if (!parse_number(f[i], t)) {
        fail(ErrorCode::kCorruptArtifact, "dataset line " + std::to_string(line_no));
      }
      seq.tokens.push_back(t);
    }
    if (f[0] == "train") {
      data.train.push_back(std::move(seq));
    } else if (f[0] == "val") {
      data.validation.push_back(std::move(seq));
    } else if (f[0] == "test") {
      data.test.push_back(std::move(seq));
    } else {
      fail(ErrorCode::kCorruptArtifact, "dataset line " + std::to_string(line_no));
    }
  }
  return data;
}

}  // namespace lhids
