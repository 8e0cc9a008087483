#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cola/dataset.hpp"
#include "cola/model.hpp"
#include "cola/offload.hpp"
#include "cola/records.hpp"
#include "cola/router.hpp"

namespace cola {

// Training variants. detached/unmerged/merged follow the decoupled training
// loop; classical is the ordinary-backprop oracle for adapters; ft trains
// the base parameters themselves.
enum class Variant : std::uint8_t { Classical, Detached, Unmerged, Merged, Ft };
Variant variant_from_name(const std::string& name);
const char* variant_name(Variant v);

struct TrainOptions {
    Variant variant = Variant::Classical;
    int batch_size = 32;
    int epochs = 1;
    long iterations = 0; // when > 0, overrides epochs
    double lr = 0.1;
    LrSchedule schedule = LrSchedule::Constant;
    double warmup_frac = 0.05;
    int interval = 1; // I: batches buffered per adapter update
    OptimSpec task_optim;
    OptimSpec fit_optim;
    std::uint64_t seed = 0;
    Dtype precision = Dtype::F64;

    // Adapters (one per fine-tunable layer). use_adapters=false only for ft.
    bool use_adapters = true;
    AdapterKind adapter_kind = AdapterKind::LowRank;
    int rank = 8;
    int adapter_hidden = 128;
    double alpha = 1.0;

    // Multi-user
    int users = 1;
    CollabMode collab = CollabMode::Joint;

    // Offload
    int workers = 1;
    OffloadMode offload_mode = OffloadMode::Synchronous;
    std::chrono::milliseconds flush_timeout{30000};
    std::chrono::milliseconds simulated_latency{0};
    std::string message_log_path;

    // Metrics
    bool eval_each_epoch = true;
    int log_every = 0; // extra train lines every N iterations (0 = epoch end only)
    bool timing = true;

    void validate() const;
};

struct MetricPoint {
    long iter = 0;
    int epoch = 0;
    std::string split; // "train" / "test"
    double loss = 0.0;
    double accuracy = 0.0;
    double wall_s = 0.0;
    int user = -1; // >= 0 for per-user rows
};

struct TrainResult {
    std::vector<MetricPoint> history;
    std::vector<AdapterSet> adapters; // per user
    BaseModel model;                  // trained copy for ft, the input model otherwise
    Counters counters;
    OffloadRuntime::Accounting offload;
    double final_train_loss = 0.0;
};

// One decoupled training step (detached/unmerged/merged): exactly one
// forward and one backward on the base device, taps harvested into
// per-(m, k) records. Does not touch adapter parameters.
struct StepOutcome {
    double loss = 0.0;
    Tensor logits;
    std::vector<AdaptationRecord> records;
};
StepOutcome cola_step(const BaseModel& model, std::vector<AdapterSet>& users, const RoutedBatch& batch,
                      Variant variant, long t, Counters& counters);

// Full training loop per the decoupled algorithm. The model is taken by
// value; ft trains the copy, every other variant leaves parameters
// bit-identical (hash-checked by tests).
using MetricsSink = std::function<void(const MetricPoint&)>;
TrainResult run_training(BaseModel model, const TrainOptions& options, const DatasetHandle& train,
                         const DatasetHandle* eval_set, const MetricsSink& sink = {});

struct EvalResult {
    double loss = 0.0;
    double accuracy = 0.0;
    std::size_t n = 0;
};
// Accuracy/loss over a dataset. merged=true folds the adapters into a copy
// of the base weights first (linear adapters only).
EvalResult evaluate(const BaseModel& model, const AdapterSet* adapters, const DatasetHandle& data,
                    bool merged, int eval_batch = 256);

// Plain helpers shared by the engine, CLI and tests.
double ce_loss_plain(const Tensor& logits, const std::vector<int>& labels);
double accuracy_of(const Tensor& logits, const std::vector<int>& labels);

// Adapter construction for a model: one adapter per fine-tunable layer with
// per-(m, k) seeds derived from the base seed.
std::vector<AdapterSet> make_adapter_grid(const BaseModel& model, int users, AdapterKind kind, int rank,
                                          int hidden, double alpha, std::uint64_t seed);

} // namespace cola
