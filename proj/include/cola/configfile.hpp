#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include "cola/dataset.hpp"
#include "cola/engine.hpp"

namespace cola {

// Flat key = value configuration with [section] headers and '#' comments.
// Unknown keys are errors; reproducibility beats convenience.
struct RunConfig {
    // [run]
    std::string name = "run";
    std::uint64_t seed = 0;
    std::string precision = "f64";
    bool timing = true;
    std::string out_dir = "runs";

    // [data]
    std::string dataset = "synth"; // synth | mnist
    std::string mnist_dir;         // empty -> $COLA_MNIST_DIR or data/mnist
    int synth_classes = 10;
    int synth_per_class = 200;
    int synth_test_per_class = 50;
    int synth_dims = 32;
    double synth_sep = 3.0;
    std::uint64_t data_seed = 12345;

    // [model]
    std::string preset = "linear"; // linear | mlp
    int mlp_hidden = 128;

    // [train]
    std::string variant = "merged";
    int batch_size = 32;
    int epochs = 1;
    long iterations = 0;
    // Fine-tuning defaults: AdamW at 3e-4 with 5e-4 weight decay and linear
    // decay with 5% warmup. The exact-equivalence runs select plain SGD.
    double lr = 3e-4;
    std::string schedule = "linear_warmup";
    double warmup_frac = 0.05;
    int interval = 1;
    std::string optimizer = "adamw"; // task path: sgd | adamw
    double momentum = 0.0;
    double weight_decay = 5e-4;
    std::string fit_optimizer = "adamw"; // offloaded fits
    double fit_weight_decay = 5e-4;
    int users = 1;
    std::string collab = "joint";
    int workers = 1;
    std::string offload_mode = "sync"; // sync | concurrent
    int log_every = 0;
    bool eval_each_epoch = true;
    std::string message_log; // optional path

    // [adapter]
    std::string adapter = "lowrank"; // lowrank | linear | mlp | none
    int rank = 8;
    int adapter_hidden = 128;
    double alpha = 1.0;
};

RunConfig parse_config_text(const std::string& text, const std::string& origin = "<memory>");
RunConfig parse_config_file(const std::string& path);

TrainOptions to_train_options(const RunConfig& cfg);
BaseModel build_from_config(const RunConfig& cfg);
// (train, test)
std::pair<DatasetHandle, DatasetHandle> load_data(const RunConfig& cfg);

// RunMetadata: config snapshot, seeds, precision, artifact version and the
// conventions chosen where the method leaves them open. Deterministic.
std::string run_metadata_json(const RunConfig& cfg);

inline constexpr const char* kArtifactVersion = "0.1.0";

} // namespace cola
