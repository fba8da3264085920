#include "cdae/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <random>
#include <stdexcept>

#include "cdae/image_io.hpp"
#include "cdae/rng.hpp"

namespace fs = std::filesystem;

namespace cdae {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

std::vector<std::pair<double, double>> default_bands(std::int64_t k) {
    // 0.4-cycle bands spaced 0.7 apart. Kept low-frequency so the
    // autoencoder's downsampled latent can actually carry the texture;
    // still far enough apart for classification.
    std::vector<std::pair<double, double>> bands;
    for (std::int64_t i = 0; i < k; ++i) {
        const double lo = 0.7 + 0.7 * static_cast<double>(i);
        bands.emplace_back(lo, lo + 0.4);
    }
    return bands;
}

void validate_texture_config(const SyntheticTextureConfig& cfg,
                             const std::vector<std::pair<double, double>>& bands) {
    if (cfg.num_classes <= 0) throw std::invalid_argument("num_classes must be >= 1");
    if (static_cast<std::int64_t>(cfg.samples_per_class.size()) != cfg.num_classes) {
        throw std::invalid_argument("samples_per_class needs one entry per class");
    }
    for (auto n : cfg.samples_per_class) {
        if (n <= 0) throw std::invalid_argument("samples_per_class entries must be >= 1");
    }
    if (cfg.image_size < 2 || cfg.channels <= 0) {
        throw std::invalid_argument("invalid image_size/channels");
    }
    if (cfg.noise_level < 0.0) throw std::invalid_argument("noise_level must be >= 0");
    if (static_cast<std::int64_t>(bands.size()) != cfg.num_classes) {
        throw std::invalid_argument("frequency_bands needs one (low,high) pair per class");
    }
    for (const auto& [lo, hi] : bands) {
        if (!(lo > 0.0 && hi > lo)) throw std::invalid_argument("each band needs 0 < low < high");
    }
    auto sorted = bands;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 1; i < sorted.size(); ++i) {
        if (sorted[i].first < sorted[i - 1].second) {
            throw std::invalid_argument("frequency bands overlap; classes would not be separable");
        }
    }
}

struct WaveComponent {
    double freq;
    double angle;
    double phase;
    double amplitude;
    double channel_shift;
};

}  // namespace

void validate_dataset(const Dataset& d) {
    if (!d.images || d.images->shape.size() != 4) {
        throw std::invalid_argument("dataset images must be [N,C,H,W]");
    }
    const std::int64_t n = d.images->shape[0];
    if (n < 1) throw std::invalid_argument("dataset must contain at least one sample");
    if (static_cast<std::int64_t>(d.labels.size()) != n) {
        throw std::invalid_argument("dataset label count does not match image count");
    }
    const std::int64_t k = d.num_classes();
    for (int label : d.labels) {
        if (label < 0 || label >= k) {
            throw std::invalid_argument("dataset label " + std::to_string(label) +
                                        " outside [0," + std::to_string(k) + ")");
        }
    }
    for (double v : d.images->data) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw std::invalid_argument("dataset pixel " + std::to_string(v) + " outside [0,1]");
        }
    }
}

Dataset generate_synthetic(const SyntheticTextureConfig& cfg) {
    const auto bands = cfg.frequency_bands.empty() ? default_bands(cfg.num_classes)
                                                   : cfg.frequency_bands;
    validate_texture_config(cfg, bands);

    const std::int64_t S = cfg.image_size;
    const std::int64_t C = cfg.channels;
    std::int64_t total = 0;
    for (auto n : cfg.samples_per_class) total += n;

    std::vector<double> pixels(static_cast<std::size_t>(total * C * S * S));
    std::vector<int> labels(static_cast<std::size_t>(total));

    std::int64_t sample = 0;
    for (std::int64_t cls = 0; cls < cfg.num_classes; ++cls) {
        const auto [lo, hi] = bands[static_cast<std::size_t>(cls)];
        // Class carrier: fixed frequency/orientation so the class has a
        // nonzero mean pattern (keeps even a linear probe viable).
        const double carrier_freq = 0.5 * (lo + hi);
        const double carrier_angle = 2.399963229728653 * static_cast<double>(cls);  // golden angle

        for (std::int64_t i = 0; i < cfg.samples_per_class[static_cast<std::size_t>(cls)]; ++i, ++sample) {
            std::mt19937_64 rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(cls) * 0x100000 +
                                                          static_cast<std::uint64_t>(i)));
            std::uniform_real_distribution<double> unit(0.0, 1.0);

            std::vector<WaveComponent> waves;
            waves.push_back({carrier_freq, carrier_angle, 0.0, 1.0, kTwoPi / 3.0});
            waves.push_back({lo + (hi - lo) * unit(rng), M_PI * unit(rng), kTwoPi * unit(rng),
                             0.3 + 0.5 * unit(rng), kTwoPi * unit(rng)});

            double* img = pixels.data() + sample * C * S * S;
            double mn = std::numeric_limits<double>::infinity();
            double mx = -mn;
            for (std::int64_t c = 0; c < C; ++c) {
                for (std::int64_t y = 0; y < S; ++y) {
                    for (std::int64_t x = 0; x < S; ++x) {
                        double v = 0.0;
                        for (const auto& w : waves) {
                            const double u = (static_cast<double>(x) * std::cos(w.angle) +
                                              static_cast<double>(y) * std::sin(w.angle)) /
                                             static_cast<double>(S);
                            v += w.amplitude *
                                 std::sin(kTwoPi * w.freq * u + w.phase +
                                          w.channel_shift * static_cast<double>(c));
                        }
                        v += cfg.noise_level * (2.0 * unit(rng) - 1.0);
                        img[(c * S + y) * S + x] = v;
                        mn = std::min(mn, v);
                        mx = std::max(mx, v);
                    }
                }
            }
            const double range = mx - mn;
            for (std::int64_t j = 0; j < C * S * S; ++j) {
                img[j] = range > 0.0 ? (img[j] - mn) / range : 0.5;
            }
            labels[static_cast<std::size_t>(sample)] = static_cast<int>(cls);
        }
    }

    Dataset d;
    d.images = make_tensor({total, C, S, S}, std::move(pixels), false);
    d.labels = std::move(labels);
    for (std::int64_t cls = 0; cls < cfg.num_classes; ++cls) {
        d.class_names.push_back("class_" + std::to_string(cls));
    }
    validate_dataset(d);
    return d;
}

Dataset load_image_folder(const std::string& root, const FolderLoadOptions& opts) {
    if (!fs::is_directory(root)) {
        throw std::runtime_error("dataset root '" + root + "' is not a directory");
    }
    std::vector<std::string> class_dirs;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (entry.is_directory()) class_dirs.push_back(entry.path().filename().string());
    }
    std::sort(class_dirs.begin(), class_dirs.end());
    if (class_dirs.empty()) {
        throw std::runtime_error("dataset root '" + root + "' has no class subdirectories");
    }

    const std::int64_t S = opts.image_size;
    std::vector<double> pixels;
    std::vector<int> labels;
    for (std::size_t cls = 0; cls < class_dirs.size(); ++cls) {
        std::vector<std::string> files;
        for (const auto& entry : fs::directory_iterator(fs::path(root) / class_dirs[cls])) {
            if (!entry.is_regular_file()) continue;
            std::string ext = entry.path().extension().string();
            if (!ext.empty() && ext[0] == '.') ext.erase(0, 1);
            std::transform(ext.begin(), ext.end(), ext.begin(),
                           [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
            if (opts.extensions.count(ext)) files.push_back(entry.path().string());
        }
        std::sort(files.begin(), files.end());

        std::int64_t loaded = 0;
        for (const auto& file : files) {
            ImageU8 img;
            try {
                img = resize_bilinear(read_image(file), S, S);
            } catch (const std::exception& e) {
                if (opts.strict) throw;
                std::cerr << "warning: skipping undecodable image: " << e.what() << "\n";
                continue;
            }
            for (std::int64_t c = 0; c < 3; ++c) {
                for (std::int64_t y = 0; y < S; ++y) {
                    for (std::int64_t x = 0; x < S; ++x) {
                        pixels.push_back(static_cast<double>(img.rgb[(y * S + x) * 3 + c]) / 255.0);
                    }
                }
            }
            labels.push_back(static_cast<int>(cls));
            ++loaded;
        }
        if (loaded == 0) {
            throw std::runtime_error("class directory '" + class_dirs[cls] +
                                     "' contains no decodable images");
        }
    }

    Dataset d;
    const std::int64_t n = static_cast<std::int64_t>(labels.size());
    d.images = make_tensor({n, 3, S, S}, std::move(pixels), false);
    d.labels = std::move(labels);
    d.class_names = class_dirs;
    validate_dataset(d);
    return d;
}

void export_image_folder(const Dataset& d, const std::string& root) {
    validate_dataset(d);
    const std::int64_t C = d.channels(), H = d.height(), W = d.width();
    for (const auto& name : d.class_names) {
        fs::create_directories(fs::path(root) / name);
    }
    std::vector<std::int64_t> per_class_index(d.class_names.size(), 0);
    for (std::int64_t i = 0; i < d.size(); ++i) {
        const int cls = d.labels[static_cast<std::size_t>(i)];
        ImageU8 img{W, H, std::vector<std::uint8_t>(static_cast<std::size_t>(H * W * 3))};
        for (std::int64_t y = 0; y < H; ++y) {
            for (std::int64_t x = 0; x < W; ++x) {
                for (std::int64_t c = 0; c < 3; ++c) {
                    const std::int64_t src_c = C == 1 ? 0 : std::min(c, C - 1);
                    const double v = d.images->data[static_cast<std::size_t>(
                        ((i * C + src_c) * H + y) * W + x)];
                    img.rgb[(y * W + x) * 3 + c] = static_cast<std::uint8_t>(std::lround(v * 255.0));
                }
            }
        }
        const auto idx = per_class_index[static_cast<std::size_t>(cls)]++;
        char name[32];
        std::snprintf(name, sizeof(name), "%06lld.ppm", static_cast<long long>(idx));
        write_ppm((fs::path(root) / d.class_names[static_cast<std::size_t>(cls)] / name).string(), img);
    }
}

Splits stratified_split(const Dataset& d, const SplitFractions& fractions, std::uint64_t seed) {
    validate_dataset(d);
    const double pieces[3] = {fractions.train, fractions.val, fractions.test};
    double total_frac = 0.0;
    for (double f : pieces) {
        if (f <= 0.0) throw std::invalid_argument("split fractions must be positive");
        total_frac += f;
    }
    if (std::abs(total_frac - 1.0) > 1e-9) {
        throw std::invalid_argument("split fractions must sum to 1, got " + std::to_string(total_frac));
    }

    const std::int64_t k = d.num_classes();
    std::vector<std::vector<std::int64_t>> by_class(static_cast<std::size_t>(k));
    for (std::int64_t i = 0; i < d.size(); ++i) {
        by_class[static_cast<std::size_t>(d.labels[static_cast<std::size_t>(i)])].push_back(i);
    }

    std::vector<std::vector<std::int64_t>> selected(3);
    for (std::int64_t cls = 0; cls < k; ++cls) {
        auto& idx = by_class[static_cast<std::size_t>(cls)];
        if (static_cast<std::int64_t>(idx.size()) < 3) {
            throw std::invalid_argument("class " + std::to_string(cls) + " has only " +
                                        std::to_string(idx.size()) +
                                        " samples; need at least one per split");
        }
        std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(cls)));
        std::shuffle(idx.begin(), idx.end(), rng);

        // Largest-remainder allocation: exact, exhaustive, within one
        // sample of the target proportion.
        const double n = static_cast<double>(idx.size());
        std::int64_t counts[3];
        double remainders[3];
        std::int64_t assigned = 0;
        for (int s = 0; s < 3; ++s) {
            const double want = pieces[s] * n;
            counts[s] = static_cast<std::int64_t>(std::floor(want));
            remainders[s] = want - std::floor(want);
            assigned += counts[s];
        }
        while (assigned < static_cast<std::int64_t>(idx.size())) {
            int best = 0;
            for (int s = 1; s < 3; ++s) {
                if (remainders[s] > remainders[best]) best = s;
            }
            ++counts[best];
            remainders[best] = -1.0;
            ++assigned;
        }

        std::int64_t cursor = 0;
        for (int s = 0; s < 3; ++s) {
            for (std::int64_t j = 0; j < counts[s]; ++j) {
                selected[static_cast<std::size_t>(s)].push_back(idx[static_cast<std::size_t>(cursor++)]);
            }
        }
    }

    auto subset = [&](std::vector<std::int64_t>& indices) {
        std::sort(indices.begin(), indices.end());
        const std::int64_t C = d.channels(), H = d.height(), W = d.width();
        const std::int64_t per = C * H * W;
        Dataset out;
        std::vector<double> pixels;
        pixels.reserve(static_cast<std::size_t>(per * static_cast<std::int64_t>(indices.size())));
        for (auto i : indices) {
            const double* src = d.images->data.data() + i * per;
            pixels.insert(pixels.end(), src, src + per);
            out.labels.push_back(d.labels[static_cast<std::size_t>(i)]);
        }
        out.images = make_tensor({static_cast<std::int64_t>(indices.size()), C, H, W},
                                 std::move(pixels), false);
        out.class_names = d.class_names;
        return out;
    };

    return Splits{subset(selected[0]), subset(selected[1]), subset(selected[2])};
}

std::vector<Batch> batches(const Dataset& d, std::int64_t batch_size,
                           std::optional<std::uint64_t> shuffle_seed) {
    validate_dataset(d);
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    std::vector<std::int64_t> order(static_cast<std::size_t>(d.size()));
    std::iota(order.begin(), order.end(), 0);
    if (shuffle_seed) {
        std::mt19937_64 rng(*shuffle_seed);
        std::shuffle(order.begin(), order.end(), rng);
    }

    const std::int64_t C = d.channels(), H = d.height(), W = d.width();
    const std::int64_t per = C * H * W;
    std::vector<Batch> out;
    for (std::int64_t start = 0; start < d.size(); start += batch_size) {
        const std::int64_t n = std::min(batch_size, d.size() - start);
        std::vector<double> pixels(static_cast<std::size_t>(n * per));
        Batch b;
        for (std::int64_t j = 0; j < n; ++j) {
            const std::int64_t src = order[static_cast<std::size_t>(start + j)];
            std::copy_n(d.images->data.data() + src * per, per, pixels.data() + j * per);
            b.labels.push_back(d.labels[static_cast<std::size_t>(src)]);
        }
        b.images = make_tensor({n, C, H, W}, std::move(pixels), false);
        out.push_back(std::move(b));
    }
    return out;
}

}  // namespace cdae
