#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "lhids/neural.hpp"
#include "lhids/svdd.hpp"
#include "lhids/synthgen.hpp"
#include "lhids/trace_ingest.hpp"

namespace lhids {

struct IngestConfig {
  std::filesystem::path corpus;  // directory holding manifest.txt; empty = <out>/corpus
  TraceFormat format = TraceFormat::kPlainNames;
  std::size_t window_length = 64;
  std::size_t train_stride = 64;
  std::size_t detect_stride = 16;
  PadMode pad = PadMode::kDropTail;
  double train_frac = 0.7;
  double val_frac = 0.15;
};

struct ForestConfig {
  std::size_t trees = 100;
  std::uint64_t psi = 256;
};

struct BenchConfig {
  std::size_t repetitions = 1;
  std::size_t max_windows = 256;  // 0 = every test window
};

struct PipelineConfig {
  std::uint64_t seed = 0;
  std::filesystem::path out = "lhids-out";
  bool synthesize = true;
  bool quantize = true;
  bool recording_report = true;

  SynthConfig synth;
  IngestConfig ingest;
  ArchitectureConfig arch;  // vocab_size and input_length are filled in at train time
  TrainConfig train;
  ForestConfig forest;
  double threshold_k = 2.0;
  BenchConfig bench;

  // Pushes the pipeline seed into every stage that draws random numbers.
  void apply_seed(std::uint64_t s);
  std::filesystem::path corpus_dir() const;
};

// Flat "key = value" text with [section] headers and '#' comments. Unknown
// sections or keys, malformed values and duplicate keys raise ConfigError.
PipelineConfig parse_config(std::string_view text);
PipelineConfig load_config(const std::filesystem::path& path);
// Every setting, resolved, in a form parse_config reads back.
std::string echo_config(const PipelineConfig& config);

}  // namespace lhids
