// Command-line driver for the detection pipeline.
#include <CLI11.hpp>
#include <iostream>
#include <optional>

#include "lhids/artifact.hpp"
#include "lhids/pipeline.hpp"

namespace {

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool quantized = false;
};

lhids::PipelineConfig resolve(const Options& o) {
  lhids::PipelineConfig c;
  if (!o.config_path.empty()) c = lhids::load_config(o.config_path);
  if (o.seed) c.apply_seed(*o.seed);
  if (!o.out.empty()) c.out = o.out;
  return c;
}

void print_metrics(const char* name, const lhids::Metrics& m) {
  std::cout << name << ": precision " << m.precision << " recall " << m.recall << " f1 " << m.f1
            << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lightweight syscall-trace anomaly detection pipeline"};
  app.require_subcommand(1);
  Options opt;

  auto add_common = [&](CLI::App* sub, bool variant) {
    sub->add_option("--config", opt.config_path, "Pipeline config file");
    sub->add_option("--seed", opt.seed, "Overrides the config seed");
    sub->add_option("--out", opt.out, "Output directory");
    if (variant) sub->add_flag("--quantized", opt.quantized, "Use the int8 extractor");
    return sub;
  };

  std::string stage;
  std::function<void(const lhids::PipelineConfig&)> action;
  auto on = [&](CLI::App* sub, std::function<void(const lhids::PipelineConfig&)> fn) {
    sub->callback([&, sub, fn] {
      stage = sub->get_name();
      action = fn;
    });
  };

  on(add_common(app.add_subcommand("synth", "Generate a synthetic corpus"), false),
     [](const auto& c) {
       lhids::stage_synth(c);
       std::cout << "corpus written to " << c.corpus_dir().string() << "\n";
     });
  on(add_common(app.add_subcommand("ingest", "Tokenize, window and split the corpus"), false),
     [](const auto& c) {
       const auto s = lhids::stage_ingest(c);
       std::cout << "vocabulary " << s.vocab_size << ", windows train/val/test " << s.train_windows
                 << "/" << s.validation_windows << "/" << s.test_windows << ", malformed lines "
                 << s.malformed_lines << "\n";
     });
  on(add_common(app.add_subcommand("train", "Train the feature extractor"), false),
     [](const auto& c) {
       lhids::stage_train(c, [](const lhids::EpochRecord& r) {
         std::cout << "epoch " << r.epoch << " loss " << r.mean_loss << " ("
                   << r.wall_seconds << " s)\n";
       });
     });
  on(add_common(app.add_subcommand("quantize", "Write the int8 extractor"), false),
     [](const auto& c) { lhids::stage_quantize(c); });
  on(add_common(app.add_subcommand("fit-forest", "Fit the isolation forest"), true),
     [&](const auto& c) { lhids::stage_fit_forest(c, opt.quantized); });
  on(add_common(app.add_subcommand("calibrate", "Set the decision threshold"), true),
     [&](const auto& c) {
       const auto t = lhids::stage_calibrate(c, opt.quantized);
       std::cout << "threshold " << t.value << " (mean " << t.mean << ", std " << t.std << ")\n";
     });
  on(add_common(app.add_subcommand("detect", "Score and label the test windows"), true),
     [&](const auto& c) {
       print_metrics("window", lhids::stage_detect(c, opt.quantized).window_metrics);
     });
  on(add_common(app.add_subcommand("eval", "Check a report and summarize its metrics"), true),
     [&](const auto& c) { print_metrics("window", lhids::stage_eval(c, opt.quantized)); });
  on(add_common(app.add_subcommand("bench", "Time per-window inference"), false),
     [](const auto& c) {
       lhids::stage_bench(c);
       std::cout << lhids::read_binary_file(lhids::ArtifactPaths{c.out}.bench_text());
     });
  on(add_common(app.add_subcommand("run", "Run every stage in order"), false),
     [](const auto& c) {
       const auto s = lhids::run_pipeline(c, [](const lhids::EpochRecord& r) {
         std::cout << "epoch " << r.epoch << " loss " << r.mean_loss << "\n";
       });
       print_metrics("float", s.float_metrics);
       if (s.quantized_metrics) print_metrics("quantized", *s.quantized_metrics);
     });
  on(add_common(app.add_subcommand("echo-config", "Print the resolved configuration"), false),
     [](const auto& c) { std::cout << lhids::echo_config(c); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const auto config = lhids::in_stage("config", [&] { return resolve(opt); });
    lhids::in_stage(stage, [&] { action(config); });
  } catch (const lhids::Error& e) {
    std::cerr << "lhids: " << e.what() << "\n";
    return lhids::exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "lhids: stage " << stage << ": " << e.what() << "\n";
    return 4;
  }
  return 0;
}
