#ifndef SSA_COMMANDS_HPP_
#define SSA_COMMANDS_HPP_

#include <cstdio>
#include <string>

#include "ssa/config.hpp"
#include "ssa/data.hpp"
#include "ssa/eval.hpp"
#include "ssa/model.hpp"
#include "ssa/train.hpp"

namespace ssa::cli {

// Config -> typed structs.
SyntheticSpec synthetic_spec_from(const Config& config);
ModelSpec model_spec_from(const Config& config, std::size_t classes);
TrainConfig train_config_from(const Config& config, TrainStage stage);
EvalConfig eval_config_from(const Config& config);

// Command bodies. Each writes its outputs plus a resolved-config snapshot
// (config.snapshot.txt) into out_dir. Errors are thrown; run() maps them to
// exit codes.
void cmd_gen(const Config& config, const std::string& out_dir);
void cmd_train_baseline(const Config& config, const std::string& source_path,
                        const std::string& out_dir);
void cmd_adapt(const Config& config, const std::string& checkpoint_path,
               const std::string& source_path, const std::string& target_path,
               const std::string& out_dir);
void cmd_eval(const Config& config, const std::string& checkpoint_path,
              const std::string& dataset_path, const std::string& out_dir);
void cmd_analyze(const Config& config, const std::string& checkpoint_path,
                 const std::string& dataset_path, const std::string& out_dir);
void cmd_sweep(const Config& config, const std::string& out_dir);

// Runs fn(), translating ssa errors into CLI exit codes (0 ok, 2 config,
// 3 data/format, 4 numerical, 5 protocol).
template <typename Fn>
int run(Fn&& fn) {
  try {
    fn();
    return 0;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return static_cast<int>(e.exit_code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return static_cast<int>(ExitCode::kNumerical);
  }
}

}  // namespace ssa::cli

#endif  // SSA_COMMANDS_HPP_
