#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cdae/checkpoint.hpp"
#include "cdae/config.hpp"
#include "cdae/pipeline.hpp"
#include "cdae/runner.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 1;
constexpr int kExitDataError = 2;
constexpr int kExitNumericError = 3;

struct GlobalOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    std::string corruption;
    std::string precision;
};

cdae::RunConfig resolve_config(const GlobalOptions& g) {
    if (g.config_path.empty()) {
        throw cdae::ConfigError("--config <path> is required");
    }
    cdae::RunConfig cfg = cdae::parse_config(g.config_path, g.seed);
    if (!g.out_dir.empty()) cfg.out_dir = g.out_dir;
    if (!g.corruption.empty()) {
        try {
            cfg.corruption.kind = cdae::parse_corruption_kind(g.corruption);
        } catch (const std::exception& e) {
            throw cdae::ConfigError(e.what());
        }
    }
    if (!g.precision.empty()) {
        if (g.precision == "f64") cfg.precision = cdae::Precision::f64;
        else if (g.precision == "f32") cfg.precision = cdae::Precision::f32;
        else throw cdae::ConfigError("--precision expects f64 or f32");
    }
    return cfg;
}

void add_global_options(CLI::App* cmd, GlobalOptions& g) {
    cmd->add_option("--config", g.config_path, "run configuration file (JSON)");
    cmd->add_option("--seed", g.seed, "override the master seed");
    cmd->add_option("--out", g.out_dir, "override the run directory");
    cmd->add_option("--corruption", g.corruption, "override corruption: chaotic|mask|gaussian");
    cmd->add_option("--precision", g.precision, "override numeric precision: f64|f32");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"chaotic-denoising self-supervised training pipeline"};
    app.require_subcommand(1);

    GlobalOptions g;
    std::string corrupt_in, corrupt_out;
    std::string eval_model = "stage3", eval_split = "test";

    auto* cmd_generate = app.add_subcommand("generate-data", "export the configured dataset as an image folder");
    auto* cmd_corrupt = app.add_subcommand("corrupt", "emit corrupted copies of an image folder");
    auto* cmd_stage1 = app.add_subcommand("stage1", "train the supervised backbone B1");
    auto* cmd_pretrain = app.add_subcommand("pretrain", "denoising-autoencoder pretraining of B2's encoder");
    auto* cmd_stage2 = app.add_subcommand("stage2", "finetune the pretrained encoder as classifier B2");
    auto* cmd_stage3 = app.add_subcommand("stage3", "train the attention fusion over frozen B1+B2");
    auto* cmd_eval = app.add_subcommand("eval", "evaluate a trained model on a dataset split");
    auto* cmd_ablate = app.add_subcommand("ablate", "compare chaotic/mask/gaussian pretraining");
    auto* cmd_report = app.add_subcommand("report", "summarize a run directory");

    for (auto* cmd : {cmd_generate, cmd_corrupt, cmd_stage1, cmd_pretrain, cmd_stage2, cmd_stage3,
                      cmd_eval, cmd_ablate, cmd_report}) {
        add_global_options(cmd, g);
    }
    cmd_corrupt->add_option("--in", corrupt_in, "input image folder (defaults to the configured dataset)");
    cmd_corrupt->add_option("--out-folder", corrupt_out, "destination folder")->required();
    cmd_eval->add_option("--model", eval_model, "stage1|stage2|stage3 (default stage3)");
    cmd_eval->add_option("--split", eval_split, "train|val|test (default test)");

    CLI11_PARSE(app, argc, argv);

    try {
        const cdae::RunConfig cfg = resolve_config(g);
        if (cmd_generate->parsed()) cdae::run_generate_data(cfg);
        else if (cmd_corrupt->parsed()) cdae::run_corrupt(cfg, corrupt_in, corrupt_out);
        else if (cmd_stage1->parsed()) cdae::run_stage1(cfg);
        else if (cmd_pretrain->parsed()) cdae::run_pretrain(cfg);
        else if (cmd_stage2->parsed()) cdae::run_stage2(cfg);
        else if (cmd_stage3->parsed()) cdae::run_stage3(cfg);
        else if (cmd_eval->parsed()) cdae::run_eval(cfg, eval_model, eval_split);
        else if (cmd_ablate->parsed()) cdae::run_ablate(cfg);
        else if (cmd_report->parsed()) cdae::run_report(cfg);
    } catch (const cdae::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const cdae::NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kExitNumericError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDataError;
    }
    return kExitOk;
}
