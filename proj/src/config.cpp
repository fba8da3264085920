#include "cdae/config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>

#include <json.hpp>

#include "cdae/rng.hpp"

namespace cdae {

namespace {

using nlohmann::json;

// Seed-derivation salts; one per role so streams never collide.
constexpr std::uint64_t kSaltData = 0xda7a;
constexpr std::uint64_t kSaltSplit = 0x5711;
constexpr std::uint64_t kSaltStage1 = 0x5701;
constexpr std::uint64_t kSaltStage2 = 0x5702;
constexpr std::uint64_t kSaltStage3 = 0x5703;
constexpr std::uint64_t kSaltPretrain = 0x57ae;

[[noreturn]] void cfg_fail(const std::string& path, const std::string& why) {
    throw ConfigError("config error at '" + path + "': " + why);
}

std::string join_path(const std::string& base, const std::string& key) {
    return base.empty() ? key : base + "." + key;
}

void require_keys(const json& obj, const std::string& path,
                  std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) cfg_fail(path.empty() ? "<root>" : path, "expected an object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* k : allowed) {
            if (it.key() == k) {
                known = true;
                break;
            }
        }
        if (!known) cfg_fail(join_path(path, it.key()), "unknown key");
    }
}

std::int64_t get_int(const json& obj, const std::string& path, const char* key, std::int64_t def) {
    if (!obj.contains(key)) return def;
    const auto& v = obj.at(key);
    if (!v.is_number_integer() && !v.is_number_unsigned()) {
        cfg_fail(join_path(path, key), "expected an integer");
    }
    return v.get<std::int64_t>();
}

std::uint64_t get_u64(const json& obj, const std::string& path, const char* key, std::uint64_t def) {
    if (!obj.contains(key)) return def;
    const auto& v = obj.at(key);
    if (!v.is_number_integer() && !v.is_number_unsigned()) {
        cfg_fail(join_path(path, key), "expected an integer");
    }
    return v.get<std::uint64_t>();
}

double get_double(const json& obj, const std::string& path, const char* key, double def) {
    if (!obj.contains(key)) return def;
    const auto& v = obj.at(key);
    if (!v.is_number()) cfg_fail(join_path(path, key), "expected a number");
    return v.get<double>();
}

bool get_bool(const json& obj, const std::string& path, const char* key, bool def) {
    if (!obj.contains(key)) return def;
    const auto& v = obj.at(key);
    if (!v.is_boolean()) cfg_fail(join_path(path, key), "expected a boolean");
    return v.get<bool>();
}

std::string get_string(const json& obj, const std::string& path, const char* key,
                       const std::string& def) {
    if (!obj.contains(key)) return def;
    const auto& v = obj.at(key);
    if (!v.is_string()) cfg_fail(join_path(path, key), "expected a string");
    return v.get<std::string>();
}

std::vector<std::int64_t> get_int_array(const json& obj, const std::string& path, const char* key,
                                        std::vector<std::int64_t> def) {
    if (!obj.contains(key)) return def;
    const auto& v = obj.at(key);
    if (!v.is_array()) cfg_fail(join_path(path, key), "expected an array of integers");
    std::vector<std::int64_t> out;
    for (const auto& e : v) {
        if (!e.is_number_integer() && !e.is_number_unsigned()) {
            cfg_fail(join_path(path, key), "expected an array of integers");
        }
        out.push_back(e.get<std::int64_t>());
    }
    return out;
}

StageConfig parse_stage(const json& root, const std::string& key, StageConfig def,
                        std::uint64_t master, std::uint64_t salt) {
    StageConfig cfg = def;
    if (root.contains(key)) {
        const auto& obj = root.at(key);
        require_keys(obj, key, {"epochs", "lr", "batch_size", "seed", "weight_decay", "eta_min",
                                "shuffle"});
        cfg.epochs = get_int(obj, key, "epochs", def.epochs);
        cfg.lr = get_double(obj, key, "lr", def.lr);
        cfg.batch_size = get_int(obj, key, "batch_size", def.batch_size);
        cfg.weight_decay = get_double(obj, key, "weight_decay", def.weight_decay);
        cfg.eta_min = get_double(obj, key, "eta_min", def.eta_min);
        cfg.shuffle = get_bool(obj, key, "shuffle", def.shuffle);
        cfg.seed = get_u64(obj, key, "seed", derive_seed(master, salt));
    } else {
        cfg.seed = derive_seed(master, salt);
    }
    if (cfg.epochs <= 0) cfg_fail(key + ".epochs", "must be >= 1");
    if (!(cfg.lr > 0.0)) cfg_fail(key + ".lr", "must be > 0");
    if (cfg.batch_size <= 0) cfg_fail(key + ".batch_size", "must be >= 1");
    if (cfg.weight_decay < 0.0) cfg_fail(key + ".weight_decay", "must be >= 0");
    if (cfg.eta_min < 0.0) cfg_fail(key + ".eta_min", "must be >= 0");
    return cfg;
}

EncoderConfig parse_encoder(const json& root, const std::string& key, EncoderConfig def) {
    EncoderConfig cfg = def;
    if (root.contains(key)) {
        const auto& obj = root.at(key);
        require_keys(obj, key, {"stage_channels", "kernel_size"});
        cfg.stage_channels = get_int_array(obj, key, "stage_channels", def.stage_channels);
        cfg.kernel_size = get_int(obj, key, "kernel_size", def.kernel_size);
    }
    try {
        validate_encoder_config(cfg);
    } catch (const std::exception& e) {
        cfg_fail(key, e.what());
    }
    return cfg;
}

json encoder_to_json(const EncoderConfig& cfg) {
    return json{{"stage_channels", cfg.stage_channels}, {"kernel_size", cfg.kernel_size}};
}

json stage_to_json(const StageConfig& cfg) {
    return json{{"epochs", cfg.epochs},       {"lr", cfg.lr},
                {"batch_size", cfg.batch_size}, {"seed", cfg.seed},
                {"weight_decay", cfg.weight_decay}, {"eta_min", cfg.eta_min},
                {"shuffle", cfg.shuffle}};
}

StageConfig make_stage_default(std::int64_t epochs, double lr, Stage stage) {
    StageConfig cfg;
    cfg.epochs = epochs;
    cfg.lr = lr;
    cfg.stage = stage;
    return cfg;
}

RunConfig from_json(const json& j, std::optional<std::uint64_t> seed_override) {
    require_keys(j, "", {"seed", "out_dir", "precision", "dataset", "split", "split_seed", "b1",
                         "b2", "se_ratio", "corruption", "stage1", "stage2", "stage3", "pretrain"});

    RunConfig cfg;
    if (seed_override) {
        cfg.seed = *seed_override;
    } else if (j.contains("seed")) {
        cfg.seed = get_u64(j, "", "seed", 0);
    } else {
        cfg_fail("seed", "required field is missing");
    }
    cfg.out_dir = get_string(j, "", "out_dir", cfg.out_dir);

    const std::string precision = get_string(j, "", "precision", "f64");
    if (precision == "f64") {
        cfg.precision = Precision::f64;
    } else if (precision == "f32") {
        cfg.precision = Precision::f32;
    } else {
        cfg_fail("precision", "expected \"f64\" or \"f32\", got \"" + precision + "\"");
    }

    if (!j.contains("dataset")) cfg_fail("dataset", "required field is missing");
    const auto& ds = j.at("dataset");
    require_keys(ds, "dataset", {"synthetic", "folder"});
    if (ds.contains("synthetic") == ds.contains("folder")) {
        cfg_fail("dataset", "exactly one of 'synthetic' or 'folder' must be given");
    }
    if (ds.contains("synthetic")) {
        const auto& s = ds.at("synthetic");
        const std::string path = "dataset.synthetic";
        require_keys(s, path, {"num_classes", "samples_per_class", "image_size", "channels",
                               "frequency_bands", "noise_level", "seed"});
        SyntheticTextureConfig sc;
        sc.num_classes = get_int(s, path, "num_classes", sc.num_classes);
        sc.samples_per_class = get_int_array(s, path, "samples_per_class", sc.samples_per_class);
        if (s.contains("num_classes") && !s.contains("samples_per_class")) {
            sc.samples_per_class.assign(static_cast<std::size_t>(sc.num_classes), 100);
        }
        sc.image_size = get_int(s, path, "image_size", sc.image_size);
        sc.channels = get_int(s, path, "channels", sc.channels);
        sc.noise_level = get_double(s, path, "noise_level", sc.noise_level);
        sc.seed = get_u64(s, path, "seed", derive_seed(cfg.seed, kSaltData));
        if (s.contains("frequency_bands")) {
            const auto& bands = s.at("frequency_bands");
            if (!bands.is_array()) cfg_fail(path + ".frequency_bands", "expected [[low,high],...]");
            for (const auto& b : bands) {
                if (!b.is_array() || b.size() != 2 || !b[0].is_number() || !b[1].is_number()) {
                    cfg_fail(path + ".frequency_bands", "expected [[low,high],...]");
                }
                sc.frequency_bands.emplace_back(b[0].get<double>(), b[1].get<double>());
            }
        }
        if (sc.num_classes <= 0) cfg_fail(path + ".num_classes", "must be >= 1");
        if (static_cast<std::int64_t>(sc.samples_per_class.size()) != sc.num_classes) {
            cfg_fail(path + ".samples_per_class", "needs one entry per class");
        }
        cfg.dataset.synthetic = sc;
    } else {
        const auto& f = ds.at("folder");
        const std::string path = "dataset.folder";
        require_keys(f, path, {"path", "image_size", "extensions", "strict"});
        FolderDatasetConfig fc;
        fc.path = get_string(f, path, "path", "");
        if (fc.path.empty()) cfg_fail(path + ".path", "required field is missing");
        fc.image_size = get_int(f, path, "image_size", fc.image_size);
        if (f.contains("extensions")) {
            const auto& exts = f.at("extensions");
            if (!exts.is_array()) cfg_fail(path + ".extensions", "expected an array of strings");
            fc.extensions.clear();
            for (const auto& e : exts) {
                if (!e.is_string()) cfg_fail(path + ".extensions", "expected an array of strings");
                fc.extensions.push_back(e.get<std::string>());
            }
        }
        fc.strict = get_bool(f, path, "strict", fc.strict);
        cfg.dataset.folder = fc;
    }

    if (j.contains("split")) {
        const auto& sp = j.at("split");
        require_keys(sp, "split", {"train", "val", "test"});
        cfg.split.train = get_double(sp, "split", "train", cfg.split.train);
        cfg.split.val = get_double(sp, "split", "val", cfg.split.val);
        cfg.split.test = get_double(sp, "split", "test", cfg.split.test);
    }
    if (!(cfg.split.train > 0.0 && cfg.split.val > 0.0 && cfg.split.test > 0.0)) {
        cfg_fail("split", "fractions must be positive");
    }
    if (std::abs(cfg.split.train + cfg.split.val + cfg.split.test - 1.0) > 1e-9) {
        cfg_fail("split", "fractions must sum to 1");
    }
    cfg.split_seed = get_u64(j, "", "split_seed", derive_seed(cfg.seed, kSaltSplit));

    cfg.b1 = parse_encoder(j, "b1", cfg.b1);
    cfg.b2 = parse_encoder(j, "b2", cfg.b2);
    cfg.se_ratio = get_int(j, "", "se_ratio", cfg.se_ratio);
    if (cfg.se_ratio <= 0) cfg_fail("se_ratio", "must be >= 1");

    if (j.contains("corruption")) {
        const auto& c = j.at("corruption");
        require_keys(c, "corruption", {"kind", "r", "mask_ratio", "patch_size", "sigma"});
        const std::string kind = get_string(c, "corruption", "kind", "chaotic");
        try {
            cfg.corruption.kind = parse_corruption_kind(kind);
        } catch (const std::exception& e) {
            cfg_fail("corruption.kind", e.what());
        }
        cfg.corruption.chaos.r = get_double(c, "corruption", "r", cfg.corruption.chaos.r);
        cfg.corruption.baseline.mask_ratio =
            get_double(c, "corruption", "mask_ratio", cfg.corruption.baseline.mask_ratio);
        cfg.corruption.baseline.patch_size =
            get_int(c, "corruption", "patch_size", cfg.corruption.baseline.patch_size);
        cfg.corruption.baseline.sigma =
            get_double(c, "corruption", "sigma", cfg.corruption.baseline.sigma);
    }
    if (!(cfg.corruption.chaos.r > 0.0 && cfg.corruption.chaos.r <= 4.0)) {
        cfg_fail("corruption.r", "must lie in (0,4]; the map would leave [0,1]");
    }
    if (!(cfg.corruption.baseline.mask_ratio >= 0.0 && cfg.corruption.baseline.mask_ratio <= 1.0)) {
        cfg_fail("corruption.mask_ratio", "must lie in [0,1]");
    }
    if (cfg.corruption.baseline.patch_size <= 0) cfg_fail("corruption.patch_size", "must be >= 1");
    if (cfg.corruption.baseline.sigma < 0.0) cfg_fail("corruption.sigma", "must be >= 0");

    cfg.stage1 = parse_stage(j, "stage1", make_stage_default(20, 1e-4, Stage::stage1), cfg.seed,
                             kSaltStage1);
    cfg.stage2 = parse_stage(j, "stage2", make_stage_default(20, 1e-4, Stage::stage2_finetune),
                             cfg.seed, kSaltStage2);
    cfg.stage3 = parse_stage(j, "stage3", make_stage_default(10, 1e-4, Stage::stage3), cfg.seed,
                             kSaltStage3);
    cfg.pretrain = parse_stage(j, "pretrain", make_stage_default(30, 1e-3, Stage::cdae_pretrain),
                               cfg.seed, kSaltPretrain);

    // Channel counts follow the dataset.
    const std::int64_t channels = cfg.dataset.synthetic ? cfg.dataset.synthetic->channels : 3;
    cfg.b1.input_channels = channels;
    cfg.b2.input_channels = channels;

    const std::int64_t image_size =
        cfg.dataset.synthetic ? cfg.dataset.synthetic->image_size : cfg.dataset.folder->image_size;
    const std::int64_t b2_factor = std::int64_t{1} << cfg.b2.num_stages();
    if (image_size % b2_factor != 0) {
        cfg_fail("b2.stage_channels", "image size " + std::to_string(image_size) +
                                          " is not divisible by the encoder's downsampling " +
                                          std::to_string(b2_factor));
    }
    for (const auto* enc : {&cfg.b1, &cfg.b2}) {
        if ((image_size >> enc->num_stages()) < 1) {
            cfg_fail("b1/b2", "too many stages for image size " + std::to_string(image_size));
        }
    }
    return cfg;
}

}  // namespace

std::string corruption_kind_name(CorruptionKind k) {
    switch (k) {
        case CorruptionKind::chaotic: return "chaotic";
        case CorruptionKind::mask: return "mask";
        case CorruptionKind::gaussian: return "gaussian";
    }
    return "unknown";
}

CorruptionKind parse_corruption_kind(const std::string& name) {
    if (name == "chaotic") return CorruptionKind::chaotic;
    if (name == "mask") return CorruptionKind::mask;
    if (name == "gaussian") return CorruptionKind::gaussian;
    throw std::invalid_argument("unknown corruption kind '" + name +
                                "'; expected chaotic|mask|gaussian");
}

RunConfig default_config(std::uint64_t master_seed) {
    json j{{"seed", master_seed}, {"dataset", {{"synthetic", json::object()}}}};
    return from_json(j, std::nullopt);
}

RunConfig parse_config_text(const std::string& json_text,
                            std::optional<std::uint64_t> seed_override) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return from_json(j, seed_override);
}

RunConfig parse_config(const std::string& path, std::optional<std::uint64_t> seed_override) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << is.rdbuf();
    return parse_config_text(buf.str(), seed_override);
}

std::string config_to_text(const RunConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["out_dir"] = cfg.out_dir;
    j["precision"] = cfg.precision == Precision::f64 ? "f64" : "f32";
    if (cfg.dataset.synthetic) {
        const auto& s = *cfg.dataset.synthetic;
        json bands = json::array();
        for (const auto& [lo, hi] : s.frequency_bands) bands.push_back(json::array({lo, hi}));
        j["dataset"]["synthetic"] = json{{"num_classes", s.num_classes},
                                         {"samples_per_class", s.samples_per_class},
                                         {"image_size", s.image_size},
                                         {"channels", s.channels},
                                         {"noise_level", s.noise_level},
                                         {"seed", s.seed}};
        if (!bands.empty()) j["dataset"]["synthetic"]["frequency_bands"] = bands;
    } else if (cfg.dataset.folder) {
        const auto& f = *cfg.dataset.folder;
        j["dataset"]["folder"] = json{{"path", f.path},
                                      {"image_size", f.image_size},
                                      {"extensions", f.extensions},
                                      {"strict", f.strict}};
    }
    j["split"] = json{{"train", cfg.split.train}, {"val", cfg.split.val}, {"test", cfg.split.test}};
    j["split_seed"] = cfg.split_seed;
    j["b1"] = encoder_to_json(cfg.b1);
    j["b2"] = encoder_to_json(cfg.b2);
    j["se_ratio"] = cfg.se_ratio;
    j["corruption"] = json{{"kind", corruption_kind_name(cfg.corruption.kind)},
                           {"r", cfg.corruption.chaos.r},
                           {"mask_ratio", cfg.corruption.baseline.mask_ratio},
                           {"patch_size", cfg.corruption.baseline.patch_size},
                           {"sigma", cfg.corruption.baseline.sigma}};
    j["stage1"] = stage_to_json(cfg.stage1);
    j["stage2"] = stage_to_json(cfg.stage2);
    j["stage3"] = stage_to_json(cfg.stage3);
    j["pretrain"] = stage_to_json(cfg.pretrain);
    return j.dump(2) + "\n";
}

Dataset build_dataset(const RunConfig& cfg) {
    if (cfg.dataset.synthetic) {
        return generate_synthetic(*cfg.dataset.synthetic);
    }
    FolderLoadOptions opts;
    opts.extensions.clear();
    for (const auto& e : cfg.dataset.folder->extensions) opts.extensions.insert(e);
    opts.image_size = cfg.dataset.folder->image_size;
    opts.strict = cfg.dataset.folder->strict;
    return load_image_folder(cfg.dataset.folder->path, opts);
}

Corruptor build_corruptor(const CorruptionConfig& cc) {
    switch (cc.kind) {
        case CorruptionKind::chaotic: return chaotic_corruptor(cc.chaos);
        case CorruptionKind::mask: return mask_corruptor(cc.baseline);
        case CorruptionKind::gaussian: return gaussian_corruptor(cc.baseline);
    }
    throw std::invalid_argument("unreachable corruption kind");
}

}  // namespace cdae
