#include "ssa/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;

namespace ssa::cli {

SyntheticSpec synthetic_spec_from(const Config& config) {
  SyntheticSpec spec;
  spec.side = config.get_size("data.side");
  spec.classes_source = config.get_size("data.classes_source");
  spec.classes_target = config.get_size("data.classes_target");
  spec.samples_per_class = config.get_size("data.samples_per_class");
  spec.class_contrast = config.get_double("data.class_contrast");
  spec.template_symmetry = config.get_double("data.template_symmetry");
  spec.noise_sigma = config.get_double("data.noise_sigma");
  spec.shift_contrast = config.get_double("data.shift_contrast");
  spec.shift_brightness = config.get_double("data.shift_brightness");
  spec.shift_blur_width = config.get_size("data.shift_blur_width");
  spec.seed = config.get_u64("seed");
  return spec;
}

ModelSpec model_spec_from(const Config& config, std::size_t classes) {
  ModelSpec spec;
  const std::size_t side = config.get_size("data.side");
  spec.input_dim = side * side;
  spec.hidden = config.get_size_list("model.hidden");
  spec.embedding_dim = config.get_size("model.embedding_dim");
  spec.classes = classes;
  const std::string& mode = config.get("model.classifier");
  if (mode == "softmax")
    spec.classifier_mode = ClassifierMode::kSoftmax;
  else if (mode == "angular-margin")
    spec.classifier_mode = ClassifierMode::kAngularMargin;
  else
    throw ConfigError("model.classifier must be softmax or angular-margin");
  spec.scale = config.get_double("model.scale");
  spec.margin = config.get_double("model.margin");
  return spec;
}

TrainConfig train_config_from(const Config& config, TrainStage stage) {
  TrainConfig tc;
  tc.stage = stage;
  tc.epochs = config.get_size("train.epochs");
  tc.base_lr = stage == TrainStage::kBaseline
                   ? config.get_double("train.lr")
                   : config.get_double("train.adapt_lr");
  tc.decay_divisor = config.get_double("train.decay_divisor");
  tc.decay_interval = config.get_size("train.decay_interval");
  tc.momentum = config.get_double("train.momentum");
  tc.batch_source = config.get_size("train.batch_source");
  tc.batch_target = config.get_size("train.batch_target");
  tc.loss.gamma = config.get_double("loss.gamma");
  tc.loss.rho = config.get_double("loss.rho");
  tc.seed = config.get_u64("seed");
  tc.mirror_in_baseline = config.get_bool("data.mirror_in_baseline");
  return tc;
}

EvalConfig eval_config_from(const Config& config) {
  EvalConfig ec;
  ec.fpr_targets = config.get_double_list("eval.fpr_targets");
  ec.fpir_targets = config.get_double_list("eval.fpir_targets");
  ec.rank_ks = config.get_size_list("eval.rank_ks");
  ec.known_fraction = config.get_double("eval.known_fraction");
  if (ec.fpr_targets.empty())
    throw ProtocolError("eval.fpr_targets must not be empty");
  return ec;
}

namespace {

std::string prepare_out_dir(const std::string& out_dir, const Config& config) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir))
    throw FormatError("cannot create output directory: " + out_dir, 0);
  config.write_snapshot(out_dir + "/config.snapshot.txt");
  return out_dir;
}

}  // namespace

void cmd_gen(const Config& config, const std::string& out_dir) {
  SyntheticSpec spec = synthetic_spec_from(config);
  spec.validate();
  prepare_out_dir(out_dir, config);
  GeneratedData data = generate(spec);
  save_dataset(data.source, out_dir + "/source.ssad");
  save_dataset(data.target, out_dir + "/target.ssad");
  save_dataset(data.target_labeled, out_dir + "/target_eval.ssad");
  export_dataset_csv(data.source, out_dir + "/source.csv");
  export_dataset_csv(data.target, out_dir + "/target.csv");

  std::ofstream manifest(out_dir + "/manifest.txt", std::ios::trunc);
  manifest << "source: source.ssad labels=[" << data.source.class_lo << ","
           << data.source.class_hi << ") count=" << data.source.count << "\n";
  manifest << "target: target.ssad labels=[" << data.target.class_lo << ","
           << data.target.class_hi << ") count=" << data.target.count
           << " (unlabeled)\n";
  manifest << "target_eval: target_eval.ssad (same samples, ground-truth "
              "labels for protocols)\n";
}

void cmd_train_baseline(const Config& config, const std::string& source_path,
                        const std::string& out_dir) {
  prepare_out_dir(out_dir, config);
  DomainDataset source = load_dataset(source_path);
  if (!source.labeled())
    throw ContractError("train-baseline needs a labeled source dataset");
  ModelSpec mspec = model_spec_from(config, source.class_hi);
  mspec.input_dim = source.dim();
  TrainConfig tc = train_config_from(config, TrainStage::kBaseline);
  TrainLog log;
  Model model = train_baseline(source, mspec, tc, &log);
  save_checkpoint(model, out_dir + "/baseline.ckpt");
  log.write_file(out_dir + "/train_log.txt");
}

void cmd_adapt(const Config& config, const std::string& checkpoint_path,
               const std::string& source_path, const std::string& target_path,
               const std::string& out_dir) {
  prepare_out_dir(out_dir, config);
  Model model = load_checkpoint(checkpoint_path);
  DomainDataset source = load_dataset(source_path);
  DomainDataset target = load_dataset(target_path);
  TrainConfig tc = train_config_from(config, TrainStage::kAdapt);
  TrainLog log;
  adapt_ssa(model, source, target, tc, &log);
  save_checkpoint(model, out_dir + "/adapted.ckpt");
  log.write_file(out_dir + "/train_log.txt");
}

void cmd_eval(const Config& config, const std::string& checkpoint_path,
              const std::string& dataset_path, const std::string& out_dir) {
  prepare_out_dir(out_dir, config);
  Model model = load_checkpoint(checkpoint_path);
  DomainDataset dataset = load_dataset(dataset_path);
  EvalReport report = evaluate(model, dataset, eval_config_from(config));
  write_report_file(report, out_dir + "/report.txt");
  write_roc_csv(report, out_dir + "/roc.csv");
}

void cmd_analyze(const Config& config, const std::string& checkpoint_path,
                 const std::string& dataset_path, const std::string& out_dir) {
  prepare_out_dir(out_dir, config);
  Model model = load_checkpoint(checkpoint_path);
  DomainDataset dataset = load_dataset(dataset_path);
  EmbeddingStats stats = embedding_stats(model, dataset);
  std::ofstream os(out_dir + "/stats.txt", std::ios::trunc);
  if (!os) throw FormatError("cannot write stats: " + out_dir, 0);
  char buf[96];
  std::snprintf(buf, sizeof buf, "mirror_similarity: %.6f\n",
                stats.mirror_similarity);
  os << buf;
  std::snprintf(buf, sizeof buf, "intra_class_similarity: %.6f\n",
                stats.intra_class_similarity);
  os << buf;
  std::snprintf(buf, sizeof buf, "inter_class_similarity: %.6f\n",
                stats.inter_class_similarity);
  os << buf;
  std::snprintf(buf, sizeof buf, "mean_embedding_length: %.6f\n",
                stats.mean_length);
  os << buf;
  os << "skipped_classes:";
  for (std::uint32_t c : stats.skipped_classes) os << " " << c;
  os << "\n";
  export_embeddings_csv(model, dataset, out_dir + "/embeddings.csv");
}

void cmd_sweep(const Config& config, const std::string& out_dir) {
  const std::vector<double> rhos = config.get_double_list("sweep.rhos");
  if (rhos.empty())
    throw ConfigError("sweep.rhos must list at least one adapting ratio");
  prepare_out_dir(out_dir, config);

  SyntheticSpec dspec = synthetic_spec_from(config);
  GeneratedData data = generate(dspec);
  ModelSpec mspec = model_spec_from(config, data.source.class_hi);
  EvalConfig ec = eval_config_from(config);

  TrainConfig base_tc = train_config_from(config, TrainStage::kBaseline);
  Model baseline = train_baseline(data.source, mspec, base_tc, nullptr);
  save_checkpoint(baseline, out_dir + "/baseline.ckpt");

  std::ofstream table(out_dir + "/sweep_report.txt", std::ios::trunc);
  if (!table) throw FormatError("cannot write sweep report: " + out_dir, 0);
  table << "method";
  for (double a : ec.fpr_targets) table << "\ttpr@fpr=" << a;
  for (double a : ec.fpir_targets) table << "\ttpir@fpir=" << a;
  for (std::size_t k : ec.rank_ks) table << "\trank" << k;
  table << "\n";

  auto emit = [&](const std::string& name, const EvalReport& report) {
    table << name;
    char buf[32];
    for (const auto& [_, v] : report.verification) {
      std::snprintf(buf, sizeof buf, "\t%.4f", v);
      table << buf;
    }
    for (const auto& [_, v] : report.open_set) {
      std::snprintf(buf, sizeof buf, "\t%.4f", v);
      table << buf;
    }
    for (const auto& [_, v] : report.closed_set) {
      std::snprintf(buf, sizeof buf, "\t%.4f", v);
      table << buf;
    }
    table << "\n";
  };

  emit("baseline", evaluate(baseline, data.target_labeled, ec));

  for (double rho : rhos) {
    std::string row = "ssa(rho=" + std::to_string(rho) + ")";
    try {
      Model model = baseline;  // adapt from the shared pretrained model
      TrainConfig tc = train_config_from(config, TrainStage::kAdapt);
      tc.loss.rho = rho;
      adapt_ssa(model, data.source, data.target, tc, nullptr);
      char tag[32];
      std::snprintf(tag, sizeof tag, "rho_%.2f", rho);
      save_checkpoint(model, out_dir + "/adapted_" + tag + ".ckpt");
      emit(row, evaluate(model, data.target_labeled, ec));
    } catch (const Error& e) {
      // keep partial results; mark the failed configuration
      table << row << "\tFAILED: " << e.what() << "\n";
    }
  }
}

}  // namespace ssa::cli
