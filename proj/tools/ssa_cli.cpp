// Command-line front end: dataset generation, baseline training, SSA
// adaptation, evaluation, embedding analysis, and the adapting-ratio sweep.

#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ssa/commands.hpp"

namespace {

struct CommonOpts {
  std::string config_file;
  std::vector<std::string> overrides;
  std::string out_dir = "out";
  std::string seed;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("-c,--config", opts.config_file,
                  "Config file (key = value per line, # comments)");
  cmd->add_option("-D,--set", opts.overrides,
                  "Override a config key, e.g. -D loss.rho=0.7 (repeatable)");
  cmd->add_option("-o,--out", opts.out_dir, "Output directory");
  cmd->add_option("--seed", opts.seed, "Shorthand for -D seed=<value>");
}

ssa::Config resolve(const CommonOpts& opts) {
  ssa::Config config = ssa::Config::defaults();
  if (!opts.config_file.empty()) config.load_file(opts.config_file);
  for (const std::string& o : opts.overrides) config.apply_override(o);
  if (!opts.seed.empty())
    config.set("seed", opts.seed, ssa::Config::Source::kOverride);
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "SimSiam Adapting: domain-adaptive embedding training and biometric "
      "evaluation on a synthetic two-domain benchmark"};
  app.require_subcommand(1);

  CommonOpts gen_o, train_o, adapt_o, eval_o, analyze_o, sweep_o;
  std::string ckpt, source_path, target_path, dataset_path;

  CLI::App* gen = app.add_subcommand(
      "gen", "Generate the synthetic two-domain datasets");
  add_common(gen, gen_o);

  CLI::App* train = app.add_subcommand(
      "train-baseline", "Pretrain the embedding network with focal "
                        "cross-entropy on the labeled source set");
  add_common(train, train_o);
  train->add_option("--source", source_path, "Labeled source dataset (.ssad)")
      ->required();

  CLI::App* adapt = app.add_subcommand(
      "adapt", "Adapt a baseline checkpoint with the SSA loss");
  add_common(adapt, adapt_o);
  adapt->add_option("--checkpoint", ckpt, "Baseline checkpoint")->required();
  adapt->add_option("--source", source_path, "Labeled source dataset")
      ->required();
  adapt->add_option("--target", target_path, "Unlabeled target dataset")
      ->required();

  CLI::App* eval = app.add_subcommand(
      "eval", "Run verification / identification protocols on a checkpoint");
  add_common(eval, eval_o);
  eval->add_option("--checkpoint", ckpt, "Checkpoint to evaluate")->required();
  eval->add_option("--dataset", dataset_path, "Labeled evaluation dataset")
      ->required();

  CLI::App* analyze = app.add_subcommand(
      "analyze", "Embedding statistics (mirror/intra/inter similarity, "
                 "embedding length) plus an embedding CSV export");
  add_common(analyze, analyze_o);
  analyze->add_option("--checkpoint", ckpt, "Checkpoint to analyze")
      ->required();
  analyze->add_option("--dataset", dataset_path, "Labeled dataset")
      ->required();

  CLI::App* sweep = app.add_subcommand(
      "sweep", "Train a baseline, adapt at each adapting ratio in "
               "sweep.rhos, and emit a comparison table");
  add_common(sweep, sweep_o);

  CLI11_PARSE(app, argc, argv);

  return ssa::cli::run([&] {
    if (gen->parsed()) {
      ssa::cli::cmd_gen(resolve(gen_o), gen_o.out_dir);
    } else if (train->parsed()) {
      ssa::cli::cmd_train_baseline(resolve(train_o), source_path,
                                   train_o.out_dir);
    } else if (adapt->parsed()) {
      ssa::cli::cmd_adapt(resolve(adapt_o), ckpt, source_path, target_path,
                          adapt_o.out_dir);
    } else if (eval->parsed()) {
      ssa::cli::cmd_eval(resolve(eval_o), ckpt, dataset_path, eval_o.out_dir);
    } else if (analyze->parsed()) {
      ssa::cli::cmd_analyze(resolve(analyze_o), ckpt, dataset_path,
                            analyze_o.out_dir);
    } else if (sweep->parsed()) {
      ssa::cli::cmd_sweep(resolve(sweep_o), sweep_o.out_dir);
    }
  });
}
