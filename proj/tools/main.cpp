#include <cstdint>
#include <cstdio>
#include <exception>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mionset/common.hpp"
#include "mionset/pipeline.hpp"

namespace {

struct StageArgs {
  std::string config;
  std::string in_dir;
  std::string out;
  std::string bundle = "bundle";
  std::string decisions = "decisions.csv";
  std::uint64_t seed = 0;
  int workers = 1;
  std::vector<int> hidden_sizes;
  std::vector<double> output_lens;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* out_opt = nullptr;
};

void add_common(CLI::App* cmd, StageArgs& args, const char* out_default, const char* out_help) {
  cmd->add_option("--config", args.config, "Pipeline config file (JSON); omitted or empty means defaults");
  args.out = out_default;
  args.out_opt = cmd->add_option("--out", args.out, out_help);
  args.seed_opt = cmd->add_option("--seed", args.seed,
                                  "Override the config seeds (synthesis, stream layout, training)");
}

void add_sweep(CLI::App* cmd, StageArgs& args) {
  cmd->add_option("--hidden-sizes", args.hidden_sizes, "Hidden sizes to grid over (runs the full sweep)")
      ->delimiter(',');
  cmd->add_option("--output-lens", args.output_lens, "Decoder lengths in seconds to grid over")
      ->delimiter(',');
}

mionset::PipelineConfig load_config(const StageArgs& args) {
  mionset::PipelineConfig cfg;
  if (!args.config.empty()) {
    cfg = mionset::parse_config_file(args.config);
  } else {
    cfg.validate();
  }
  if (args.seed_opt != nullptr && args.seed_opt->count() > 0) {
    cfg.synth.rng_seed = args.seed;
    cfg.stream.rng_seed = mionset::mix_seed(args.seed, 1);
    cfg.train.rng_seed = mionset::mix_seed(args.seed, 2);
  }
  return cfg;
}

std::string metric_cell(const std::optional<double>& v) {
  return v ? mionset::strfmt("%.6f", *v) : std::string("NA");
}

void print_eval(const mionset::EvalPair& eval) {
  std::printf("metrics,precision,tpr,tnr,fpr,fnr,f1\n");
  const mionset::EvalReport* reports[2] = {&eval.raw, &eval.corrected};
  const char* names[2] = {"raw", "corrected"};
  for (int i = 0; i < 2; ++i) {
    const mionset::EvalReport& r = *reports[i];
    std::printf("%s,%s,%s,%s,%s,%s,%s\n", names[i], metric_cell(r.precision).c_str(),
                metric_cell(r.tpr).c_str(), metric_cell(r.tnr).c_str(), metric_cell(r.fpr).c_str(),
                metric_cell(r.fnr).c_str(), metric_cell(r.f1).c_str());
  }
}

bool wants_sweep(const StageArgs& args) { return !args.hidden_sizes.empty() || !args.output_lens.empty(); }

void run_grid(const StageArgs& args) {
  const std::string root = args.out_opt->count() > 0 ? args.out : std::string("run");
  const auto rows = mionset::run_sweep(load_config(args), args.hidden_sizes, args.output_lens, root,
                                       args.workers);
  std::printf("output_len_s,hidden_size,raw_f1,corrected_f1\n");
  for (const auto& row : rows) {
    std::printf("%.6f,%d,%s,%s\n", row.output_len_s, row.hidden_size, metric_cell(row.eval.raw.f1).c_str(),
                metric_cell(row.eval.corrected.f1).c_str());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-paced motor-imagery onset detection on streaming EEG"};
  app.require_subcommand(1);

  StageArgs synth_args, prep_args, train_args, tune_args, detect_args, eval_args, pipe_args;

  CLI::App* synth = app.add_subcommand("synth", "Generate the synthetic trial corpus");
  add_common(synth, synth_args, "data", "Directory for the trial recordings");

  CLI::App* prep = app.add_subcommand("preprocess", "Filter, project, and window the corpus");
  add_common(prep, prep_args, "prep", "Directory for the preprocessed tensors");
  prep->add_option("--in", prep_args.in_dir, "Trial corpus directory")->capture_default_str();
  prep_args.in_dir = "data";

  CLI::App* train = app.add_subcommand("train", "Train the predictor bank");
  add_common(train, train_args, "bundle", "Directory for the model bundle");
  train->add_option("--in", train_args.in_dir, "Preprocessed tensor directory");
  train_args.in_dir = "prep";
  train->add_option("--workers", train_args.workers, "Parallel training workers");
  add_sweep(train, train_args);

  CLI::App* tune = app.add_subcommand("tune", "Cross-validate the detection threshold");
  add_common(tune, tune_args, "bundle", "Model bundle directory (updated in place)");
  tune->add_option("--in", tune_args.in_dir, "Preprocessed tensor directory");
  tune_args.in_dir = "prep";
  tune->add_option("--workers", tune_args.workers, "Parallel training workers");

  CLI::App* detect = app.add_subcommand("detect", "Run the detector over the continuous stream");
  add_common(detect, detect_args, "decisions.csv", "Decision CSV path");
  detect->add_option("--in", detect_args.in_dir, "Preprocessed tensor directory");
  detect_args.in_dir = "prep";
  detect->add_option("--bundle", detect_args.bundle, "Model bundle directory");
  detect->add_option("--workers", detect_args.workers, "Parallel training workers (sweep mode)");
  add_sweep(detect, detect_args);

  CLI::App* evaluate = app.add_subcommand("evaluate", "Score decisions against ground truth");
  add_common(evaluate, eval_args, ".", "Directory for the report files");
  evaluate->add_option("--in", eval_args.in_dir, "Preprocessed tensor directory");
  eval_args.in_dir = "prep";
  evaluate->add_option("--bundle", eval_args.bundle, "Model bundle directory");
  evaluate->add_option("--decisions", eval_args.decisions, "Decision CSV path");

  CLI::App* pipeline = app.add_subcommand("pipeline", "Run every stage end to end");
  add_common(pipeline, pipe_args, "run", "Workspace root directory");
  pipeline->add_option("--workers", pipe_args.workers, "Parallel training workers");
  add_sweep(pipeline, pipe_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      mionset::run_synth(load_config(synth_args), synth_args.out);
      std::printf("wrote trial corpus to %s\n", synth_args.out.c_str());
    } else if (prep->parsed()) {
      mionset::run_preprocess(load_config(prep_args), prep_args.in_dir, prep_args.out);
      std::printf("wrote preprocessed tensors to %s\n", prep_args.out.c_str());
    } else if (train->parsed()) {
      if (wants_sweep(train_args)) {
        run_grid(train_args);
      } else {
        mionset::run_train(load_config(train_args), train_args.in_dir, train_args.out, train_args.workers);
        std::printf("wrote model bundle to %s\n", train_args.out.c_str());
      }
    } else if (tune->parsed()) {
      const double s_th = mionset::run_tune(load_config(tune_args), tune_args.in_dir, tune_args.out,
                                            tune_args.workers);
      std::printf("threshold %.6f written to %s\n", s_th, tune_args.out.c_str());
    } else if (detect->parsed()) {
      if (wants_sweep(detect_args)) {
        run_grid(detect_args);
      } else {
        const auto decisions = mionset::run_detect(detect_args.in_dir, detect_args.bundle, detect_args.out);
        std::printf("wrote %zu segment decisions to %s\n", decisions.size(), detect_args.out.c_str());
      }
    } else if (evaluate->parsed()) {
      const mionset::EvalPair eval = mionset::run_evaluate(eval_args.in_dir, eval_args.bundle,
                                                           eval_args.decisions, eval_args.out);
      print_eval(eval);
    } else if (pipeline->parsed()) {
      if (wants_sweep(pipe_args)) {
        run_grid(pipe_args);
      } else {
        const mionset::EvalPair eval = mionset::run_pipeline(load_config(pipe_args), pipe_args.out,
                                                             pipe_args.workers);
        print_eval(eval);
      }
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
