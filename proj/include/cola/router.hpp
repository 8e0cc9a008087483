#pragma once

#include <string>
#include <vector>

#include "cola/model.hpp"
#include "cola/records.hpp"

namespace cola {

// A batch whose rows belong to different users of the service.
struct RoutedBatch {
    Tensor inputs;           // [n x in]
    std::vector<int> labels; // n
    std::vector<int> owner;  // n, user id in [0, K)

    std::size_t rows() const { return labels.size(); }
    void validate(int users) const;
    // Row indices owned by user k, in row order.
    std::vector<std::int64_t> rows_of(int k) const;
};

enum class CollabMode : std::uint8_t { Joint, Alone, Collaboration };
CollabMode collab_from_name(const std::string& name);
const char* collab_name(CollabMode m);

// Forward over one tape where rows owned by user k receive the delta of
// adapter (m, k). One backward then yields every user's gradient slices.
ForwardGraph route_forward(Tape& tape, const BaseModel& model, const RoutedBatch& batch,
                           const std::vector<AdapterSet>& users, bool capture_taps);

// Partitions tap captures into per-(m, k) adaptation records. Tap gradients
// are batch-mean gradients; records store per-sample gradients, so rows are
// scaled by the full batch row count before splitting.
std::vector<AdaptationRecord> split_records(const std::vector<TapPoint>& taps,
                                            const std::vector<int>& owner, int users, long t);

// Model copy with every user's adapters folded into the base weights:
// theta^ = theta + sum_k alpha_k * dense(adapter_{m,k}). Adapters are marked
// merged. Throws NotMergeableError if any adapter is not linear.
BaseModel merge_all(const BaseModel& model, std::vector<AdapterSet>& users, Counters* counters = nullptr);

// Reverses merge_all on the merged copy (restores theta up to roundoff) and
// clears the merged marks. Callers that kept the original model may discard
// the restored values.
void unmerge_all(BaseModel& merged, std::vector<AdapterSet>& users, Counters* counters = nullptr);

} // namespace cola
