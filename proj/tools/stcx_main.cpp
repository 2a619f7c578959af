#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "stcx/harness.hpp"

namespace {

// Exit codes: 0 success, 1 validation/config error, 2 numerical failure,
// 3 I/O error.
enum ExitCode { kOk = 0, kConfigError = 1, kNumericError = 2, kIoError = 3 };

stcx::RunConfig make_config(const std::string& config_path, bool has_seed, uint64_t seed,
                            const std::string& out_path) {
    stcx::RunConfig cfg;
    if (!config_path.empty()) cfg = stcx::load_config(config_path);
    if (has_seed) cfg.seed = seed;
    if (!out_path.empty()) cfg.report_path = out_path;
    cfg.validate();
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"spatio-temporal context head harness"};
    app.require_subcommand(1);
    app.fallthrough(true);

    std::string config_path, checkpoint_path, out_path;
    uint64_t seed = 0;
    bool has_seed = false;
    app.add_option("--config", config_path, "path to a key=value run config");
    app.add_option("--checkpoint", checkpoint_path, "checkpoint path override");
    app.add_option("--out", out_path, "report output path override");
    app.add_option("--seed", seed, "seed override")->each([&](const std::string&) {
        has_seed = true;
    });

    auto* generate = app.add_subcommand("generate", "write the synthetic dataset to disk");
    auto* train = app.add_subcommand("train", "train the head and write a checkpoint");
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the validation split");
    auto* ablate = app.add_subcommand("ablate", "train and evaluate all ablation variants");
    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient suite");

    CLI11_PARSE(app, argc, argv);

    try {
        stcx::RunConfig cfg = make_config(config_path, has_seed, seed, out_path);
        if (!checkpoint_path.empty()) cfg.checkpoint_path = checkpoint_path;
        if (generate->parsed()) {
            stcx::cmd_generate(cfg);
        } else if (train->parsed()) {
            stcx::cmd_train(cfg);
        } else if (eval->parsed()) {
            stcx::EvalResult result = stcx::cmd_eval(cfg, cfg.checkpoint_path);
            std::cout << result.report();
        } else if (ablate->parsed()) {
            stcx::cmd_ablate(cfg);
        } else if (gradcheck->parsed()) {
            if (!stcx::cmd_gradcheck(cfg)) return kNumericError;
        }
    } catch (const stcx::NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kNumericError;
    } catch (const stcx::IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kIoError;
    } catch (const stcx::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfigError;
    }
    return kOk;
}
