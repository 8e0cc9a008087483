#include "doctest.h"

#include <cstdio>
#include <fstream>

#include "cola/configfile.hpp"
#include "cola/dataset.hpp"
#include "cola/engine.hpp"
#include "cola/metrics.hpp"

using namespace cola;

namespace {

void write_idx_images(const std::string& path, const std::vector<unsigned char>& pixels, int n, int rows,
                      int cols, std::uint32_t magic = 0x00000803u) {
    std::ofstream f(path, std::ios::binary);
    auto be = [&](std::uint32_t v) {
        unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
        f.write(reinterpret_cast<char*>(b), 4);
    };
    be(magic);
    be(static_cast<std::uint32_t>(n));
    be(static_cast<std::uint32_t>(rows));
    be(static_cast<std::uint32_t>(cols));
    f.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
}

void write_idx_labels(const std::string& path, const std::vector<unsigned char>& labels,
                      std::uint32_t magic = 0x00000801u) {
    std::ofstream f(path, std::ios::binary);
    auto be = [&](std::uint32_t v) {
        unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
        f.write(reinterpret_cast<char*>(b), 4);
    };
    be(magic);
    be(static_cast<std::uint32_t>(labels.size()));
    f.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
}

} // namespace

TEST_CASE("IDX loader: scaling, counts, magic and truncation errors") {
    const std::string imgs = "idx_imgs_test", labs = "idx_labs_test";
    std::vector<unsigned char> pixels = {0, 128, 255, 51, 255, 0, 10, 20, 30, 40, 50, 60};
    write_idx_images(imgs, pixels, 3, 2, 2);
    write_idx_labels(labs, {7, 0, 9});

    DatasetHandle ds = load_mnist_idx(imgs, labs);
    CHECK(ds.n == 3);
    CHECK(ds.dim == 4);
    CHECK(ds.labels[0] == 7);
    CHECK(ds.inputs[0] == 0.0f);
    CHECK(ds.inputs[2] == 1.0f); // pixel 255 -> exactly 1.0
    CHECK(ds.inputs[1] == doctest::Approx(128.0 / 255.0));

    write_idx_images(imgs, pixels, 3, 2, 2, 0x00000802u);
    CHECK_THROWS_WITH_AS(load_mnist_idx(imgs, labs), doctest::Contains("0x00000802"), FormatError);

    write_idx_images(imgs, pixels, 3, 2, 2);
    write_idx_labels(labs, {7, 0});
    CHECK_THROWS_AS(load_mnist_idx(imgs, labs), FormatError); // count mismatch

    write_idx_labels(labs, {7, 0, 9});
    std::vector<unsigned char> short_pixels(pixels.begin(), pixels.begin() + 6);
    write_idx_images(imgs, short_pixels, 3, 2, 2);
    CHECK_THROWS_AS(load_mnist_idx(imgs, labs), FormatError); // truncated

    std::remove(imgs.c_str());
    std::remove(labs.c_str());
}

TEST_CASE("synthetic data: deterministic, separation controls learnability") {
    DatasetHandle a = synth_dataset(4, 50, 16, 3.0, 99);
    DatasetHandle b = synth_dataset(4, 50, 16, 3.0, 99);
    CHECK(a.inputs == b.inputs);
    CHECK(a.labels == b.labels);
    DatasetHandle c = synth_dataset(4, 50, 16, 3.0, 100);
    CHECK(a.inputs != c.inputs);

    auto train_linear_acc = [](double sep, std::uint64_t seed) {
        auto [train, test] = split_dataset(synth_dataset(5, 120, 16, sep, seed), 2.0 / 3.0);
        BaseModel m = build_model({{LayerKind::Affine, 16, 5, true}}, seed);
        TrainOptions o;
        o.variant = Variant::Classical;
        o.adapter_kind = AdapterKind::Linear;
        o.batch_size = 20;
        o.epochs = 30;
        o.lr = 0.5;
        o.task_optim = sgd_spec();
        o.fit_optim = sgd_spec();
        o.seed = seed;
        o.timing = false;
        o.eval_each_epoch = false;
        TrainResult r = run_training(m, o, train, nullptr);
        return evaluate(m, &r.adapters[0], test, false).accuracy;
    };
    CHECK(train_linear_acc(0.0, 7) == doctest::Approx(0.2).epsilon(0.3)); // chance for 5 classes
    CHECK(train_linear_acc(10.0, 7) >= 0.99);
}

TEST_CASE("config parsing: sections, defaults, unknown keys, bad values") {
    const std::string text = R"(
# comment
[run]
name = demo
seed = 42
precision = f32

[train]
variant = merged
batch_size = 16
lr = 0.05
interval = 4

[adapter]
kind = linear
alpha = 0.5
)";
    RunConfig cfg = parse_config_text(text);
    CHECK(cfg.name == "demo");
    CHECK(cfg.seed == 42);
    CHECK(cfg.precision == "f32");
    CHECK(cfg.variant == "merged");
    CHECK(cfg.batch_size == 16);
    CHECK(cfg.interval == 4);
    CHECK(cfg.adapter == "linear");
    CHECK(cfg.alpha == 0.5);
    CHECK(cfg.epochs == 1); // default

    TrainOptions o = to_train_options(cfg);
    CHECK(o.variant == Variant::Merged);
    CHECK(o.precision == Dtype::F32);
    CHECK(o.adapter_kind == AdapterKind::Linear);

    CHECK_THROWS_AS(parse_config_text("[run]\nnames = x\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("[train]\nbatch_size = abc\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("[train]\nbatch_size\n"), ConfigError);
}

TEST_CASE("metric lines are stable and self-describing") {
    MetricPoint p{12, 2, "train", 0.5, 0.25, 0.0, -1};
    CHECK(metric_json_line(p) == "{\"iter\":12,\"epoch\":2,\"split\":\"train\",\"loss\":0.5,\"accuracy\":0.25,\"wall_s\":0}");
    MetricPoint q{3, 1, "test", 1.0 / 3.0, 0.125, 0.0, 4};
    const std::string line = metric_json_line(q);
    CHECK(line.find("\"user\":4") != std::string::npos);
    CHECK(line == metric_json_line(q));
}

TEST_CASE("run metadata documents the conventions and echoes the config") {
    RunConfig cfg;
    cfg.name = "meta_demo";
    cfg.mlp_hidden = 96;
    const std::string j = run_metadata_json(cfg);
    CHECK(j.find("meta_demo") != std::string::npos);
    CHECK(j.find("lowrank_init") != std::string::npos);
    CHECK(j.find("96") != std::string::npos);
}
