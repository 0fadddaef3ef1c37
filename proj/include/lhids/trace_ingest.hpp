#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace lhids {

using Token = std::int32_t;

struct SyscallEvent {
  double timestamp = 0.0;
  std::uint64_t process_id = 0;
  std::string call_name;

  friend bool operator==(const SyscallEvent&, const SyscallEvent&) = default;
};

enum class TraceFormat { kLidDsLike, kPlainNames };

struct ParsedTrace {
  std::vector<SyscallEvent> events;
  std::size_t malformed_lines = 0;
};

// Reads one event per non-empty, non-comment line. Timestamps and pids are
// kept on the event so callers can drop them explicitly; only call names feed
// the tokenizer.
ParsedTrace parse_trace(std::string_view raw, TraceFormat format);
ParsedTrace read_trace_file(const std::filesystem::path& path,
                            TraceFormat format);

TraceFormat parse_trace_format(std::string_view name);
std::string_view trace_format_name(TraceFormat format);

class Vocabulary {
 public:
  static constexpr Token kUnknownId = 0;

  Vocabulary() = default;

  // Assigns the next dense ID if the name is new; returns the name's ID.
  Token add(const std::string& name);
  Token lookup(std::string_view name) const;
  bool contains(std::string_view name) const;

  // V: number of named calls; valid tokens are {0..V}.
  std::size_t size() const { return names_.size(); }
  // names()[i] carries ID i + 1.
  const std::vector<std::string>& names() const { return names_; }

  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);
  std::string serialize() const;
  static Vocabulary deserialize(std::string_view text);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.names_ == b.names_;
  }

 private:
  std::map<std::string, Token, std::less<>> name_to_id_;
  std::vector<std::string> names_;
};

Vocabulary build_vocabulary(const std::vector<std::vector<SyscallEvent>>& traces);

std::vector<Token> tokenize(const std::vector<SyscallEvent>& events,
                            const Vocabulary& vocab);

enum class Label : std::uint8_t { kNormal = 0, kAnomalous = 1, kUnlabeled = 2 };

struct TokenSequence {
  std::vector<Token> tokens;
  Label label = Label::kUnlabeled;
  // Index of the source recording; -1 when unknown.
  std::int64_t recording = -1;

  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

enum class PadMode { kDropTail, kZeroPad };

PadMode parse_pad_mode(std::string_view name);
std::string_view pad_mode_name(PadMode mode);

std::vector<TokenSequence> window(const std::vector<Token>& tokens,
                                  std::size_t length, std::size_t stride,
                                  PadMode pad, Label label = Label::kUnlabeled,
                                  std::int64_t recording = -1);

struct DatasetSplit {
  std::vector<TokenSequence> train;
  std::vector<TokenSequence> validation;
  std::vector<TokenSequence> test;

  friend bool operator==(const DatasetSplit&, const DatasetSplit&) = default;
};

// Shuffles the normal pool with the seeded generator and cuts it into
// train/validation/test by the fractions (floor for train and validation,
// remainder to test). Every anomalous window lands in test after the normal
// test windows.
DatasetSplit split_dataset(const std::vector<TokenSequence>& normal,
                           const std::vector<TokenSequence>& anomalous,
                           double train_frac, double val_frac,
                           std::uint64_t seed);

// Dataset file: one window per line, "<split> <label> <recording> t0 t1 ...".
void save_dataset(const std::filesystem::path& path, const DatasetSplit& data);
DatasetSplit load_dataset(const std::filesystem::path& path);

}  // namespace lhids
