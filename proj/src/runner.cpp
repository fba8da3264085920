#include "cdae/runner.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "cdae/checkpoint.hpp"
#include "cdae/corruption.hpp"
#include "cdae/pipeline.hpp"

namespace fs = std::filesystem;

namespace cdae {

namespace {

void write_text(const std::string& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write '" + path + "'");
    os << text;
}

std::string read_text(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read '" + path + "'");
    std::ostringstream buf;
    buf << is.rdbuf();
    return buf.str();
}

void prepare_run_dir(const RunConfig& cfg) {
    fs::create_directories(cfg.out_dir);
    apply_precision(cfg);
    write_text(config_snapshot_path(cfg), config_to_text(cfg));
}

CheckpointMeta make_meta(const StageConfig& stage) {
    return CheckpointMeta{stage_name(stage.stage), stage.epochs, stage.seed};
}

}  // namespace

void apply_precision(const RunConfig& cfg) { set_precision(cfg.precision); }

std::string config_snapshot_path(const RunConfig& cfg) {
    return (fs::path(cfg.out_dir) / "config.json").string();
}

std::string checkpoint_path(const RunConfig& cfg, const std::string& stage) {
    return (fs::path(cfg.out_dir) / (stage + ".ckpt")).string();
}

std::string train_log_path(const RunConfig& cfg, const std::string& stage) {
    return (fs::path(cfg.out_dir) / (stage + ".log")).string();
}

std::string metrics_path(const RunConfig& cfg) {
    return (fs::path(cfg.out_dir) / "metrics.txt").string();
}

std::string ablate_report_path(const RunConfig& cfg) {
    return (fs::path(cfg.out_dir) / "ablate_report.txt").string();
}

Splits run_splits(const RunConfig& cfg, const Dataset& dataset) {
    return stratified_split(dataset, cfg.split, cfg.split_seed);
}

void run_generate_data(const RunConfig& cfg) {
    prepare_run_dir(cfg);
    const Dataset dataset = build_dataset(cfg);
    export_image_folder(dataset, (fs::path(cfg.out_dir) / "dataset").string());
    std::cout << "wrote " << dataset.size() << " images across " << dataset.num_classes()
              << " classes to " << (fs::path(cfg.out_dir) / "dataset").string() << "\n";
}

void run_corrupt(const RunConfig& cfg, const std::string& input_folder,
                 const std::string& output_folder) {
    prepare_run_dir(cfg);
    Dataset dataset;
    if (input_folder.empty()) {
        dataset = build_dataset(cfg);
    } else {
        FolderLoadOptions opts;
        if (cfg.dataset.folder) {
            opts.extensions.clear();
            for (const auto& e : cfg.dataset.folder->extensions) opts.extensions.insert(e);
            opts.image_size = cfg.dataset.folder->image_size;
            opts.strict = cfg.dataset.folder->strict;
        }
        dataset = load_image_folder(input_folder, opts);
    }
    const Corruptor corrupt = build_corruptor(cfg.corruption);
    Dataset corrupted = dataset;
    corrupted.images = corrupt(dataset.images, cfg.seed);
    export_image_folder(corrupted, output_folder);
    std::cout << "wrote " << corrupted.size() << " corrupted images ("
              << corruption_kind_name(cfg.corruption.kind) << ") to " << output_folder << "\n";
}

void run_stage1(const RunConfig& cfg) {
    prepare_run_dir(cfg);
    const Dataset dataset = build_dataset(cfg);
    const Splits splits = run_splits(cfg, dataset);
    auto result = train_stage1(cfg.stage1, cfg.b1, splits.train);
    write_train_log(result.log, train_log_path(cfg, "stage1"));
    save_checkpoint(result.model, make_meta(cfg.stage1), checkpoint_path(cfg, "stage1"));
    std::cout << "stage1 done: final train loss " << result.log.epochs.back().loss << "\n";
}

void run_pretrain(const RunConfig& cfg) {
    prepare_run_dir(cfg);
    const Dataset dataset = build_dataset(cfg);
    const Splits splits = run_splits(cfg, dataset);
    auto result = pretrain_cdae(cfg.pretrain, cfg.b2, splits.train, build_corruptor(cfg.corruption));
    write_train_log(result.log, train_log_path(cfg, "pretrain"));
    save_checkpoint(result.autoencoder, make_meta(cfg.pretrain), checkpoint_path(cfg, "pretrain"));
    std::cout << "pretrain done (" << corruption_kind_name(cfg.corruption.kind)
              << "): final reconstruction mse " << result.log.epochs.back().loss << "\n";
}

void run_stage2(const RunConfig& cfg) {
    prepare_run_dir(cfg);
    const Dataset dataset = build_dataset(cfg);
    const Splits splits = run_splits(cfg, dataset);
    Autoencoder ae = load_autoencoder_checkpoint(checkpoint_path(cfg, "pretrain"));
    auto result = finetune_stage2(cfg.stage2, ae.encoder, dataset.num_classes(), splits.train);
    write_train_log(result.log, train_log_path(cfg, "stage2"));
    save_checkpoint(result.model, make_meta(cfg.stage2), checkpoint_path(cfg, "stage2"));
    std::cout << "stage2 done: final train loss " << result.log.epochs.back().loss << "\n";
}

void run_stage3(const RunConfig& cfg) {
    prepare_run_dir(cfg);
    const Dataset dataset = build_dataset(cfg);
    const Splits splits = run_splits(cfg, dataset);
    ClassifierModel b1 = load_classifier_checkpoint(checkpoint_path(cfg, "stage1"));
    ClassifierModel b2 = load_classifier_checkpoint(checkpoint_path(cfg, "stage2"));
    auto result = train_stage3(cfg.stage3, b1, b2, cfg.se_ratio, splits.train);
    write_train_log(result.log, train_log_path(cfg, "stage3"));
    save_checkpoint(result.model, make_meta(cfg.stage3), checkpoint_path(cfg, "stage3"));
    std::cout << "stage3 done: final train loss " << result.log.epochs.back().loss << "\n";
}

std::string run_eval(const RunConfig& cfg, const std::string& model, const std::string& split) {
    prepare_run_dir(cfg);
    const Dataset dataset = build_dataset(cfg);
    const Splits splits = run_splits(cfg, dataset);
    const Dataset* target = nullptr;
    if (split == "train") target = &splits.train;
    else if (split == "val") target = &splits.val;
    else if (split == "test") target = &splits.test;
    else throw ConfigError("unknown split '" + split + "'; expected train|val|test");

    EvalResult result;
    if (model == "stage3") {
        result = evaluate(load_fusion_checkpoint(checkpoint_path(cfg, "stage3")), *target);
    } else if (model == "stage1" || model == "stage2") {
        result = evaluate(load_classifier_checkpoint(checkpoint_path(cfg, model)), *target);
    } else {
        throw ConfigError("unknown model '" + model + "'; expected stage1|stage2|stage3");
    }
    const std::string text = to_text(result.metrics);
    write_text(metrics_path(cfg), text);
    std::cout << text;
    return text;
}

std::string run_ablate(const RunConfig& cfg) {
    prepare_run_dir(cfg);
    const Dataset dataset = build_dataset(cfg);
    const Splits splits = run_splits(cfg, dataset);

    std::ostringstream report;
    report << "corruption_ablation\n";
    for (const auto kind : {CorruptionKind::chaotic, CorruptionKind::mask,
                            CorruptionKind::gaussian}) {
        CorruptionConfig cc = cfg.corruption;
        cc.kind = kind;
        // Identical stage config and seeds for all three runs; the
        // corruption callback is the only difference.
        auto result = pretrain_cdae(cfg.pretrain, cfg.b2, splits.train, build_corruptor(cc));
        const std::string name = corruption_kind_name(kind);
        write_train_log(result.log, train_log_path(cfg, "pretrain_" + name));
        save_checkpoint(result.autoencoder, make_meta(cfg.pretrain),
                        checkpoint_path(cfg, "pretrain_" + name));
        char line[160];
        std::snprintf(line, sizeof(line), "corruption %s epoch1_mse %.17g final_mse %.17g\n",
                      name.c_str(), result.log.epochs.front().loss, result.log.epochs.back().loss);
        report << line;
    }
    const std::string text = report.str();
    write_text(ablate_report_path(cfg), text);
    std::cout << text;
    return text;
}

std::string run_report(const RunConfig& cfg) {
    std::ostringstream out;
    out << "run directory: " << cfg.out_dir << "\n";
    for (const char* stage : {"stage1", "pretrain", "stage2", "stage3"}) {
        const std::string log_path = train_log_path(cfg, stage);
        if (fs::exists(log_path)) {
            const std::string text = read_text(log_path);
            std::istringstream is(text);
            std::string line, last;
            std::int64_t count = 0;
            while (std::getline(is, line)) {
                if (!line.empty()) {
                    last = line;
                    ++count;
                }
            }
            out << stage << ": " << count << " epochs, last: " << last << "\n";
        } else {
            out << stage << ": (not run)\n";
        }
    }
    if (fs::exists(metrics_path(cfg))) {
        out << "metrics:\n" << read_text(metrics_path(cfg));
    } else {
        out << "metrics: (not evaluated)\n";
    }
    if (fs::exists(ablate_report_path(cfg))) {
        out << read_text(ablate_report_path(cfg));
    }
    const std::string text = out.str();
    std::cout << text;
    return text;
}

}  // namespace cdae
