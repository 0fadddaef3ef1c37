#include "lhids/trace_ingest.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "test_util.hpp"

namespace lhids {
namespace {

std::vector<SyscallEvent> events_of(std::initializer_list<const char*> names) {
  std::vector<SyscallEvent> out;
  double t = 0;
  for (const char* n : names) out.push_back({t++, 0, n});
  return out;
}

std::vector<TokenSequence> numbered(std::size_t n, Label label) {
  std::vector<TokenSequence> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({{static_cast<Token>(i)}, label, static_cast<std::int64_t>(i)});
  }
  return out;
}

TEST(ParseTrace, EmptyInputIsEmptyTrace) {
  EXPECT_LHIDS_ERROR(parse_trace("", TraceFormat::kPlainNames), ErrorCode::kEmptyTrace);
  EXPECT_LHIDS_ERROR(parse_trace("# only a comment\n\n", TraceFormat::kLidDsLike),
                     ErrorCode::kEmptyTrace);
}

TEST(ParseTrace, PlainNamesUseLineIndexAsTimestamp) {
  const auto r = parse_trace("openat\nread\nclose\n", TraceFormat::kPlainNames);
  ASSERT_EQ(r.events.size(), 3u);
  EXPECT_EQ(r.events[0], (SyscallEvent{0.0, 0, "openat"}));
  EXPECT_EQ(r.events[1], (SyscallEvent{1.0, 0, "read"}));
  EXPECT_EQ(r.events[2], (SyscallEvent{2.0, 0, "close"}));
  EXPECT_EQ(r.malformed_lines, 0u);
}

TEST(ParseTrace, LidDsLikeFields) {
  const auto r = parse_trace("0.01 734 execve\n0.02 734 brk\n", TraceFormat::kLidDsLike);
  ASSERT_EQ(r.events.size(), 2u);
  EXPECT_EQ(r.events[0], (SyscallEvent{0.01, 734, "execve"}));
  EXPECT_EQ(r.events[1], (SyscallEvent{0.02, 734, "brk"}));
}

TEST(ParseTrace, MalformedLinesAreCountedAndSkipped) {
  const auto r = parse_trace(
      "# header\n0.01 734 execve\nnot_a_time 1 read\n0.5 x close\n0.02\n"
      "0.001 734 early\n0.03 734 write fd=3 ret=0\n",
      TraceFormat::kLidDsLike);
  ASSERT_EQ(r.events.size(), 2u);
  EXPECT_EQ(r.events[1].call_name, "write");
  // bad timestamp, bad pid, too few fields, timestamp going backwards
  EXPECT_EQ(r.malformed_lines, 4u);

  const auto p = parse_trace("read\ntwo names\nclose\n", TraceFormat::kPlainNames);
  EXPECT_EQ(p.events.size(), 2u);
  EXPECT_EQ(p.malformed_lines, 1u);
}

TEST(ParseTrace, InvalidUtf8) {
  EXPECT_LHIDS_ERROR(parse_trace("read\n\xff\xfe\n", TraceFormat::kPlainNames),
                     ErrorCode::kEncodingError);
  EXPECT_LHIDS_ERROR(parse_trace("read\xc3", TraceFormat::kPlainNames),
                     ErrorCode::kEncodingError);
  // Multi-byte names are fine.
  EXPECT_EQ(parse_trace("r\xc3\xa9" "ad\n", TraceFormat::kPlainNames).events.size(), 1u);
}

TEST(BuildVocabulary, FirstAppearanceOrder) {
  const auto single = build_vocabulary({events_of({"read", "read", "read"})});
  EXPECT_EQ(single.size(), 1u);
  EXPECT_EQ(single.lookup("read"), 1);

  const auto v = build_vocabulary({events_of({"open", "read", "open", "close"})});
  EXPECT_EQ(v.size(), 3u);
  EXPECT_EQ(v.lookup("open"), 1);
  EXPECT_EQ(v.lookup("read"), 2);
  EXPECT_EQ(v.lookup("close"), 3);

  const auto two = build_vocabulary({events_of({"a", "b"}), events_of({"b", "c"})});
  EXPECT_EQ(two.lookup("a"), 1);
  EXPECT_EQ(two.lookup("b"), 2);
  EXPECT_EQ(two.lookup("c"), 3);
}

TEST(BuildVocabulary, NoEvents) {
  EXPECT_LHIDS_ERROR(build_vocabulary({}), ErrorCode::kEmptyTrace);
  EXPECT_LHIDS_ERROR(build_vocabulary({{}, {}}), ErrorCode::kEmptyTrace);
}

TEST(Tokenize, LookupAndUnknown) {
  Vocabulary v;
  v.add("read");
  EXPECT_EQ(tokenize(events_of({"read"}), v), std::vector<Token>{1});
  EXPECT_EQ(tokenize(events_of({"mmap"}), v), std::vector<Token>{0});

  const auto ev = events_of({"open", "read", "close"});
  const auto vocab = build_vocabulary({events_of({"open", "read", "open", "close"})});
  EXPECT_EQ(tokenize(ev, vocab), (std::vector<Token>{1, 2, 3}));
}

TEST(Tokenize, OwnVocabularyNeverYieldsUnknown) {
  std::mt19937_64 rng(7);
  for (int round = 0; round < 50; ++round) {
    std::vector<SyscallEvent> ev;
    const std::size_t n = 1 + rng() % 200;
    for (std::size_t i = 0; i < n; ++i) {
      ev.push_back({static_cast<double>(i), 0, "c" + std::to_string(rng() % 40)});
    }
    const auto vocab = build_vocabulary({ev});
    const auto tokens = tokenize(ev, vocab);
    ASSERT_EQ(tokens.size(), ev.size());
    EXPECT_TRUE(std::none_of(tokens.begin(), tokens.end(), [](Token t) { return t == 0; }));
    // Dense IDs {1..V}.
    std::set<Token> ids(tokens.begin(), tokens.end());
    EXPECT_EQ(ids.size(), vocab.size());
    EXPECT_EQ(*ids.rbegin(), static_cast<Token>(vocab.size()));
  }
}

TEST(Vocabulary, FileRoundTrip) {
  const auto dir = scratch_dir("vocab");
  const auto v = build_vocabulary({events_of({"open", "read", "close", "futex"})});
  v.save(dir / "vocab.txt");
  const auto loaded = Vocabulary::load(dir / "vocab.txt");
  EXPECT_EQ(loaded, v);
  EXPECT_EQ(loaded.lookup("futex"), 4);
  EXPECT_EQ(loaded.serialize(), v.serialize());
}

TEST(Vocabulary, RejectsForeignAndCorruptFiles) {
  EXPECT_LHIDS_ERROR(Vocabulary::deserialize("magic = other\n"), ErrorCode::kWrongKind);
  EXPECT_LHIDS_ERROR(Vocabulary::deserialize("magic = lhids-vocab\nversion = 9\n"),
                     ErrorCode::kVersionMismatch);
  EXPECT_LHIDS_ERROR(Vocabulary::deserialize("magic = lhids-vocab\nversion = 1\nsize = 2\n"
                                             "call a = 1\n"),
                     ErrorCode::kCorruptArtifact);
  EXPECT_LHIDS_ERROR(Vocabulary::deserialize("magic = lhids-vocab\nversion = 1\nsize = 2\n"
                                             "call a = 1\ncall a = 2\n"),
                     ErrorCode::kCorruptArtifact);
}

std::vector<std::vector<Token>> tokens_of(const std::vector<TokenSequence>& seqs) {
  std::vector<std::vector<Token>> out;
  for (const auto& s : seqs) out.push_back(s.tokens);
  return out;
}

TEST(Window, Examples) {
  using V = std::vector<std::vector<Token>>;
  EXPECT_EQ(tokens_of(window({1, 2, 3, 4}, 2, 2, PadMode::kDropTail)), (V{{1, 2}, {3, 4}}));
  EXPECT_EQ(tokens_of(window({1, 2, 3}, 2, 2, PadMode::kDropTail)), (V{{1, 2}}));
  EXPECT_EQ(tokens_of(window({1, 2, 3}, 2, 1, PadMode::kZeroPad)),
            (V{{1, 2}, {2, 3}, {3, 0}}));
}

TEST(Window, ShortInput) {
  EXPECT_TRUE(window({1, 2}, 4, 1, PadMode::kDropTail).empty());
  const auto padded = window({1, 2}, 4, 1, PadMode::kZeroPad);
  ASSERT_EQ(padded.size(), 1u);
  EXPECT_EQ(padded[0].tokens, (std::vector<Token>{1, 2, 0, 0}));
  EXPECT_TRUE(window({}, 4, 1, PadMode::kZeroPad).empty());
  EXPECT_LHIDS_ERROR(window({1}, 0, 1, PadMode::kDropTail), ErrorCode::kBadParameter);
}

TEST(Window, CarriesLabelAndRecording) {
  const auto w = window({1, 2, 3, 4}, 2, 2, PadMode::kDropTail, Label::kAnomalous, 17);
  for (const auto& s : w) {
    EXPECT_EQ(s.label, Label::kAnomalous);
    EXPECT_EQ(s.recording, 17);
  }
}

TEST(Window, TilingConservesPrefix) {
  std::mt19937_64 rng(11);
  for (int round = 0; round < 100; ++round) {
    const std::size_t n = rng() % 100;
    const std::size_t len = 1 + rng() % 10;
    std::vector<Token> tokens(n);
    for (auto& t : tokens) t = static_cast<Token>(rng() % 20);
    std::vector<Token> joined;
    const auto windows = window(tokens, len, len, PadMode::kDropTail);
    for (const auto& w : windows) {
      ASSERT_EQ(w.tokens.size(), len);
      joined.insert(joined.end(), w.tokens.begin(), w.tokens.end());
    }
    const std::size_t prefix = len * (n / len);
    EXPECT_EQ(joined, std::vector<Token>(tokens.begin(), tokens.begin() + prefix));
  }
}

TEST(SplitDataset, FractionArithmetic) {
  const auto s = split_dataset(numbered(10, Label::kNormal), {}, 0.6, 0.2, 1);
  EXPECT_EQ(s.train.size(), 6u);
  EXPECT_EQ(s.validation.size(), 2u);
  EXPECT_EQ(s.test.size(), 2u);
  for (const auto& t : s.test) EXPECT_EQ(t.label, Label::kNormal);
}

TEST(SplitDataset, AnomaliesOnlyInTest) {
  const auto s = split_dataset(numbered(10, Label::kNormal), numbered(4, Label::kAnomalous),
                               0.6, 0.2, 1);
  const auto anomalous = std::count_if(s.test.begin(), s.test.end(),
                                       [](const auto& t) { return t.label == Label::kAnomalous; });
  EXPECT_EQ(anomalous, 4);
  EXPECT_EQ(s.test.size(), 6u);
  for (const auto& t : s.train) EXPECT_EQ(t.label, Label::kNormal);
  for (const auto& t : s.validation) EXPECT_EQ(t.label, Label::kNormal);
}

TEST(SplitDataset, Deterministic) {
  const auto normal = numbered(50, Label::kNormal);
  const auto anomalous = numbered(5, Label::kAnomalous);
  EXPECT_EQ(split_dataset(normal, anomalous, 0.7, 0.15, 99),
            split_dataset(normal, anomalous, 0.7, 0.15, 99));
  EXPECT_NE(split_dataset(normal, anomalous, 0.7, 0.15, 99),
            split_dataset(normal, anomalous, 0.7, 0.15, 100));
}

TEST(SplitDataset, PartitionsAreDisjointAndCover) {
  std::mt19937_64 rng(5);
  for (int round = 0; round < 50; ++round) {
    const std::size_t n = 10 + rng() % 200;
    const auto normal = numbered(n, Label::kNormal);
    const auto s = split_dataset(normal, numbered(rng() % 5, Label::kAnomalous), 0.7, 0.15, rng());
    std::multiset<Token> seen;
    for (const auto* part : {&s.train, &s.validation, &s.test}) {
      for (const auto& t : *part) {
        if (t.label == Label::kNormal) seen.insert(t.tokens[0]);
      }
    }
    ASSERT_EQ(seen.size(), n);
    EXPECT_EQ(std::set<Token>(seen.begin(), seen.end()).size(), n);
    for (const auto& t : s.train) EXPECT_NE(t.label, Label::kAnomalous);
    for (const auto& t : s.validation) EXPECT_NE(t.label, Label::kAnomalous);
  }
}

TEST(SplitDataset, Errors) {
  const auto normal = numbered(10, Label::kNormal);
  EXPECT_LHIDS_ERROR(split_dataset(normal, {}, 0.8, 0.2, 1), ErrorCode::kBadParameter);
  EXPECT_LHIDS_ERROR(split_dataset(normal, {}, 0.0, 0.2, 1), ErrorCode::kBadParameter);
  EXPECT_LHIDS_ERROR(split_dataset(numbered(3, Label::kNormal), {}, 0.5, 0.2, 1),
                     ErrorCode::kInsufficientData);
}

TEST(Dataset, FileRoundTrip) {
  const auto dir = scratch_dir("dataset");
  const auto s = split_dataset(numbered(20, Label::kNormal), numbered(3, Label::kAnomalous),
                               0.7, 0.15, 4);
  save_dataset(dir / "d.txt", s);
  EXPECT_EQ(load_dataset(dir / "d.txt"), s);
}

}  // namespace
}  // namespace lhids
