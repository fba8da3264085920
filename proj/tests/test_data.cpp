#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>

#include "cdae/data.hpp"
#include "cdae/hash.hpp"
#include "cdae/image_io.hpp"
#include "cdae/nn.hpp"
#include "cdae/optim.hpp"

using namespace cdae;
namespace fs = std::filesystem;

namespace {

SyntheticTextureConfig small_config() {
    SyntheticTextureConfig cfg;
    cfg.num_classes = 3;
    cfg.samples_per_class = {5, 8, 4};
    cfg.image_size = 16;
    cfg.channels = 1;
    cfg.seed = 7;
    return cfg;
}

// Per-sample content hashes, order-independent once sorted.
std::vector<std::uint64_t> sample_hashes(const Dataset& d) {
    const std::int64_t per = d.channels() * d.height() * d.width();
    std::vector<std::uint64_t> hashes;
    for (std::int64_t i = 0; i < d.size(); ++i) {
        std::uint64_t h = fnv1a64(d.images->data.data() + i * per,
                                  static_cast<std::size_t>(per) * sizeof(double));
        h ^= static_cast<std::uint64_t>(d.labels[static_cast<std::size_t>(i)]) * 0x9e3779b97f4a7c15ULL;
        hashes.push_back(h);
    }
    return hashes;
}

fs::path make_temp_dir() {
    static std::mt19937_64 rng(std::random_device{}());
    const fs::path dir = fs::temp_directory_path() /
                         ("cdae_data_test_" + std::to_string(rng()));
    fs::create_directories(dir);
    return dir;
}

struct TempDir {
    fs::path path = make_temp_dir();
    ~TempDir() { fs::remove_all(path); }
};

ImageU8 solid_image(std::int64_t size, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    ImageU8 img{size, size, std::vector<std::uint8_t>(static_cast<std::size_t>(size * size * 3))};
    for (std::int64_t i = 0; i < size * size; ++i) {
        img.rgb[static_cast<std::size_t>(i * 3)] = r;
        img.rgb[static_cast<std::size_t>(i * 3 + 1)] = g;
        img.rgb[static_cast<std::size_t>(i * 3 + 2)] = b;
    }
    return img;
}

// Hand-rolled 24-bit BMP so the loader is tested against independently
// constructed bytes.
void write_bmp24(const fs::path& path, const ImageU8& img) {
    const std::int64_t w = img.width, h = img.height;
    const std::size_t row_stride = ((static_cast<std::size_t>(w) * 3 + 3) / 4) * 4;
    const std::size_t data_size = row_stride * static_cast<std::size_t>(h);
    const std::uint32_t file_size = static_cast<std::uint32_t>(54 + data_size);

    std::vector<std::uint8_t> bytes(54 + data_size, 0);
    bytes[0] = 'B';
    bytes[1] = 'M';
    auto put32 = [&](std::size_t off, std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes[off + static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(v >> (8 * i));
    };
    put32(2, file_size);
    put32(10, 54);
    put32(14, 40);
    put32(18, static_cast<std::uint32_t>(w));
    put32(22, static_cast<std::uint32_t>(h));
    bytes[26] = 1;           // planes
    bytes[28] = 24;          // bpp
    put32(34, static_cast<std::uint32_t>(data_size));
    for (std::int64_t y = 0; y < h; ++y) {
        const std::int64_t src_y = h - 1 - y;  // bottom-up storage
        for (std::int64_t x = 0; x < w; ++x) {
            const std::uint8_t* px = img.rgb.data() + (src_y * w + x) * 3;
            std::uint8_t* dst = bytes.data() + 54 + row_stride * static_cast<std::size_t>(y) +
                                static_cast<std::size_t>(x) * 3;
            dst[0] = px[2];
            dst[1] = px[1];
            dst[2] = px[0];
        }
    }
    std::ofstream os(path, std::ios::binary);
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("synthetic generation is bit-identical for a fixed seed") {
    const auto cfg = small_config();
    const auto a = generate_synthetic(cfg);
    const auto b = generate_synthetic(cfg);
    CHECK(a.images->data == b.images->data);
    CHECK(a.labels == b.labels);

    auto different = cfg;
    different.seed = 8;
    CHECK_FALSE(generate_synthetic(different).images->data == a.images->data);
}

TEST_CASE("per-class counts match the configuration exactly") {
    const auto d = generate_synthetic(small_config());
    std::vector<std::int64_t> counts(3, 0);
    for (int label : d.labels) ++counts[static_cast<std::size_t>(label)];
    CHECK(counts == std::vector<std::int64_t>{5, 8, 4});
    CHECK(d.size() == 17);
    CHECK(d.num_classes() == 3);
}

TEST_CASE("every pixel leaves the generator inside the unit interval") {
    const auto d = generate_synthetic(small_config());
    for (double v : d.images->data) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("overlapping frequency bands are rejected") {
    auto cfg = small_config();
    cfg.frequency_bands = {{1.0, 2.0}, {1.5, 3.0}, {4.0, 5.0}};
    CHECK_THROWS_AS(generate_synthetic(cfg), std::invalid_argument);
    cfg.frequency_bands = {{1.0, 2.0}, {2.0, 3.0}, {4.0, 5.0}};  // touching is fine
    CHECK_NOTHROW(generate_synthetic(cfg));
}

TEST_CASE("a linear probe on raw pixels separates two well-separated classes") {
    SyntheticTextureConfig cfg;
    cfg.num_classes = 2;
    cfg.samples_per_class = {40, 40};
    cfg.image_size = 16;
    cfg.channels = 1;
    cfg.frequency_bands = {{1.5, 2.5}, {6.5, 7.5}};
    cfg.noise_level = 0.05;
    cfg.seed = 0;
    const auto d = generate_synthetic(cfg);

    const std::int64_t dim = 16 * 16;
    LinearLayer probe(dim, 2, 99);
    AdamW opt(probe.parameters(), AdamWConfig{.weight_decay = 0.0});
    auto flat = reshape(d.images, {d.size(), dim});
    for (int epoch = 0; epoch < 60; ++epoch) {
        opt.zero_grad();
        backward(cross_entropy(linear_forward(probe, flat), d.labels));
        opt.step(0.05);
    }
    auto logits = linear_forward(probe, flat);
    std::int64_t correct = 0;
    for (std::int64_t i = 0; i < d.size(); ++i) {
        const int pred = logits->data[static_cast<std::size_t>(i * 2)] >=
                                 logits->data[static_cast<std::size_t>(i * 2 + 1)]
                             ? 0
                             : 1;
        if (pred == d.labels[static_cast<std::size_t>(i)]) ++correct;
    }
    CHECK(static_cast<double>(correct) / static_cast<double>(d.size()) >= 0.8);
}

TEST_CASE("stratified split hits the documented counting example") {
    SyntheticTextureConfig cfg;
    cfg.num_classes = 2;
    cfg.samples_per_class = {50, 50};
    cfg.image_size = 8;
    cfg.channels = 1;
    cfg.seed = 1;
    const auto d = generate_synthetic(cfg);
    const auto splits = stratified_split(d, SplitFractions{0.8, 0.1, 0.1}, 3);

    CHECK(splits.train.size() == 80);
    CHECK(splits.val.size() == 10);
    CHECK(splits.test.size() == 10);
    auto count = [](const Dataset& s, int label) {
        return std::count(s.labels.begin(), s.labels.end(), label);
    };
    CHECK(count(splits.train, 0) == 40);
    CHECK(count(splits.train, 1) == 40);
    CHECK(count(splits.val, 0) == 5);
    CHECK(count(splits.val, 1) == 5);
    CHECK(count(splits.test, 0) == 5);
    CHECK(count(splits.test, 1) == 5);
}

TEST_CASE("splits partition the dataset exactly") {
    const auto d = generate_synthetic(small_config());
    const auto splits = stratified_split(d, SplitFractions{0.7, 0.1, 0.2}, 11);
    CHECK(splits.train.size() + splits.val.size() + splits.test.size() == d.size());

    auto all = sample_hashes(splits.train);
    for (const auto& part : {splits.val, splits.test}) {
        const auto h = sample_hashes(part);
        all.insert(all.end(), h.begin(), h.end());
    }
    auto original = sample_hashes(d);
    std::sort(all.begin(), all.end());
    std::sort(original.begin(), original.end());
    CHECK(all == original);
}

TEST_CASE("splitting is reproducible from the seed") {
    const auto d = generate_synthetic(small_config());
    const auto a = stratified_split(d, SplitFractions{0.7, 0.1, 0.2}, 5);
    const auto b = stratified_split(d, SplitFractions{0.7, 0.1, 0.2}, 5);
    CHECK(a.train.images->data == b.train.images->data);
    CHECK(a.train.labels == b.train.labels);
    CHECK(a.test.images->data == b.test.images->data);
}

TEST_CASE("split rejects bad fractions and too-small classes") {
    const auto d = generate_synthetic(small_config());
    CHECK_THROWS_AS(stratified_split(d, SplitFractions{0.5, 0.2, 0.2}, 0), std::invalid_argument);
    CHECK_THROWS_AS(stratified_split(d, SplitFractions{-0.1, 0.55, 0.55}, 0), std::invalid_argument);

    SyntheticTextureConfig tiny = small_config();
    tiny.samples_per_class = {2, 8, 4};  // class 0 cannot feed three splits
    CHECK_THROWS_AS(stratified_split(generate_synthetic(tiny), SplitFractions{0.7, 0.1, 0.2}, 0),
                    std::invalid_argument);
}

TEST_CASE("batching sizes, order, and shuffle permutation") {
    SyntheticTextureConfig cfg = small_config();
    cfg.samples_per_class = {4, 3, 3};  // N = 10
    const auto d = generate_synthetic(cfg);

    auto plain = batches(d, 3, std::nullopt);
    REQUIRE(plain.size() == 4);
    CHECK(plain[0].images->shape[0] == 3);
    CHECK(plain[3].images->shape[0] == 1);  // final partial batch emitted

    // unshuffled order is the dataset order
    std::vector<int> seen;
    for (const auto& b : plain) seen.insert(seen.end(), b.labels.begin(), b.labels.end());
    CHECK(seen == d.labels);

    // the shuffled epoch is a permutation: same multiset of samples
    auto shuffled = batches(d, 3, 17);
    Dataset reassembled;
    std::vector<double> pixels;
    for (const auto& b : shuffled) {
        pixels.insert(pixels.end(), b.images->data.begin(), b.images->data.end());
        reassembled.labels.insert(reassembled.labels.end(), b.labels.begin(), b.labels.end());
    }
    reassembled.images = make_tensor(d.images->shape, std::move(pixels), false);
    reassembled.class_names = d.class_names;
    auto a = sample_hashes(reassembled);
    auto b = sample_hashes(d);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);

    CHECK_THROWS_AS(batches(d, 0, std::nullopt), std::invalid_argument);
}

TEST_CASE("image folder loading with mixed formats") {
    TempDir tmp;
    fs::create_directories(tmp.path / "lesion");
    fs::create_directories(tmp.path / "normal");

    write_ppm((tmp.path / "lesion" / "a.ppm").string(), solid_image(8, 255, 0, 0));
    write_png((tmp.path / "lesion" / "b.png").string(), solid_image(8, 0, 255, 0));
    write_bmp24(tmp.path / "lesion" / "c.bmp", solid_image(8, 0, 0, 255));
    write_ppm((tmp.path / "normal" / "a.ppm").string(), solid_image(8, 10, 20, 30));
    write_png((tmp.path / "normal" / "b.png").string(), solid_image(8, 200, 100, 50));
    write_bmp24(tmp.path / "normal" / "c.bmp", solid_image(8, 1, 2, 3));

    FolderLoadOptions opts;
    opts.image_size = 8;
    const auto d = load_image_folder(tmp.path.string(), opts);
    CHECK(d.size() == 6);
    CHECK(d.num_classes() == 2);
    CHECK(d.class_names == std::vector<std::string>{"lesion", "normal"});

    // first lesion image is pure red: channel 0 saturated at 1.0
    CHECK(d.images->data[0] == 1.0);                    // R plane of sample 0
    CHECK(d.images->data[8 * 8] == 0.0);                // G plane
    CHECK(d.labels == std::vector<int>{0, 0, 0, 1, 1, 1});

    // deterministic ordering: loading twice gives identical tensors
    const auto again = load_image_folder(tmp.path.string(), opts);
    CHECK(again.images->data == d.images->data);
}

TEST_CASE("undecodable files are fatal when strict, skipped when lenient") {
    TempDir tmp;
    fs::create_directories(tmp.path / "only");
    write_ppm((tmp.path / "only" / "good.ppm").string(), solid_image(8, 9, 9, 9));
    std::ofstream(tmp.path / "only" / "broken.ppm") << "not an image";

    FolderLoadOptions strict;
    strict.image_size = 8;
    CHECK_THROWS(load_image_folder(tmp.path.string(), strict));

    FolderLoadOptions lenient = strict;
    lenient.strict = false;
    const auto d = load_image_folder(tmp.path.string(), lenient);
    CHECK(d.size() == 1);
}

TEST_CASE("a class directory without decodable images is rejected") {
    TempDir tmp;
    fs::create_directories(tmp.path / "full");
    fs::create_directories(tmp.path / "empty");
    write_ppm((tmp.path / "full" / "img.ppm").string(), solid_image(8, 5, 5, 5));
    CHECK_THROWS(load_image_folder(tmp.path.string(), FolderLoadOptions{.extensions = {"ppm"},
                                                                        .image_size = 8}));
}

TEST_CASE("export then reload round-trips the quantized dataset") {
    SyntheticTextureConfig cfg = small_config();
    cfg.channels = 3;
    const auto d = generate_synthetic(cfg);
    TempDir tmp;
    export_image_folder(d, tmp.path.string());

    FolderLoadOptions opts;
    opts.image_size = cfg.image_size;
    const auto loaded = load_image_folder(tmp.path.string(), opts);
    CHECK(loaded.size() == d.size());
    CHECK(loaded.num_classes() == d.num_classes());
    // 8-bit quantization: every pixel within half a step
    for (std::size_t i = 0; i < loaded.images->data.size(); ++i) {
        CHECK(std::abs(loaded.images->data[i] - d.images->data[i]) <= 0.5 / 255.0 + 1e-12);
    }
}

TEST_CASE("bilinear resize reaches the configured size and scales 255 to one") {
    TempDir tmp;
    fs::create_directories(tmp.path / "c");
    write_ppm((tmp.path / "c" / "big.ppm").string(), solid_image(32, 255, 255, 255));
    FolderLoadOptions opts;
    opts.image_size = 8;
    const auto d = load_image_folder(tmp.path.string(), opts);
    CHECK(d.height() == 8);
    CHECK(d.width() == 8);
    for (double v : d.images->data) CHECK(v == 1.0);
}

}  // TEST_SUITE
