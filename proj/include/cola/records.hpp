#pragma once

#include <span>
#include <utility>
#include <vector>

#include "cola/tensor.hpp"

namespace cola {

// One offloaded block of adaptation data for adapter (m, k): detached copies
// of the layer's hidden input rows and the per-sample gradient of the loss
// with respect to the fine-tuned output rows.
struct AdaptationRecord {
    int layer = -1; // m
    int user = 0;   // k
    Tensor input;   // x_m rows
    Tensor grad;    // d loss_i / d h^_m rows (per-sample, not batch-mean)
    long iter = 0;  // t
};

// Concatenates record blocks (already ordered by t) into one (x, grad) pair.
std::pair<Tensor, Tensor> stack_records(std::span<const AdaptationRecord> records);

// Call counters for the structural assertions (one backward per iteration,
// merge/unmerge usage per mode, flush bookkeeping).
struct Counters {
    long backwards = 0;
    long merges = 0;
    long unmerges = 0;
    long flushes = 0;
    long records_dispatched = 0;
    long record_samples = 0;
};

} // namespace cola
