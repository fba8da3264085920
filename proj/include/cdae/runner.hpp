#pragma once

#include <string>

#include "cdae/config.hpp"
#include "cdae/data.hpp"

namespace cdae {

// Stage drivers working against cfg.out_dir. Each writes the resolved
// config snapshot, its checkpoint, and its train log; eval writes the
// metrics report. The CLI is a thin shell over these.

void apply_precision(const RunConfig& cfg);

std::string config_snapshot_path(const RunConfig& cfg);
std::string checkpoint_path(const RunConfig& cfg, const std::string& stage);
std::string train_log_path(const RunConfig& cfg, const std::string& stage);
std::string metrics_path(const RunConfig& cfg);
std::string ablate_report_path(const RunConfig& cfg);

Splits run_splits(const RunConfig& cfg, const Dataset& dataset);

void run_generate_data(const RunConfig& cfg);  // exports to <out_dir>/dataset/
void run_corrupt(const RunConfig& cfg, const std::string& input_folder,
                 const std::string& output_folder);
void run_stage1(const RunConfig& cfg);
void run_pretrain(const RunConfig& cfg);
void run_stage2(const RunConfig& cfg);
void run_stage3(const RunConfig& cfg);

// Evaluates a trained model ("stage1", "stage2" or "stage3") on one split
// ("train", "val", "test"); returns the report text it wrote.
std::string run_eval(const RunConfig& cfg, const std::string& model = "stage3",
                     const std::string& split = "test");

// Chaotic/mask/gaussian pretraining runs through the identical loop,
// differing only in the corruption callback; emits a comparison report.
std::string run_ablate(const RunConfig& cfg);

// Aggregates the run directory into a human-readable summary.
std::string run_report(const RunConfig& cfg);

}  // namespace cdae
