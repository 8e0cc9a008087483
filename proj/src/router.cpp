#include "cola/router.hpp"

#include "cola/dispatch.hpp"

namespace cola {

void RoutedBatch::validate(int users) const {
    if (inputs.rows() != labels.size() || labels.size() != owner.size())
        throw ShapeError("routed batch: inputs/labels/owner row counts disagree");
    for (int k : owner)
        if (k < 0 || k >= users)
            throw ConfigError("routed batch: unknown owner id " + std::to_string(k));
}

std::vector<std::int64_t> RoutedBatch::rows_of(int k) const {
    std::vector<std::int64_t> idx;
    for (std::size_t i = 0; i < owner.size(); ++i)
        if (owner[i] == k) idx.push_back(static_cast<std::int64_t>(i));
    return idx;
}

CollabMode collab_from_name(const std::string& name) {
    if (name == "joint") return CollabMode::Joint;
    if (name == "alone") return CollabMode::Alone;
    if (name == "collab" || name == "collaboration") return CollabMode::Collaboration;
    throw ConfigError("unknown collaboration mode '" + name + "'");
}

const char* collab_name(CollabMode m) {
    switch (m) {
    case CollabMode::Joint: return "joint";
    case CollabMode::Alone: return "alone";
    case CollabMode::Collaboration: return "collaboration";
    }
    return "?";
}

ForwardGraph route_forward(Tape& tape, const BaseModel& model, const RoutedBatch& batch,
                           const std::vector<AdapterSet>& users, bool capture_taps) {
    const int K = static_cast<int>(users.size());
    batch.validate(K);
    std::vector<std::vector<std::int64_t>> idx(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) idx[static_cast<std::size_t>(k)] = batch.rows_of(k);

    DeltaBuilder delta = [&](Tape& t, int m, Val x) -> std::optional<Val> {
        // Accumulate per-user deltas into a zero block, row-routed by owner.
        Val acc;
        bool have = false;
        for (int k = 0; k < K; ++k) {
            const auto& set = users[static_cast<std::size_t>(k)];
            const auto& a =
                set.slots.size() > static_cast<std::size_t>(m) ? set.slots[static_cast<std::size_t>(m)] : nullptr;
            if (!a || idx[static_cast<std::size_t>(k)].empty()) continue;
            Val xk = t.gather_rows(x, idx[static_cast<std::size_t>(k)]);
            Val dk = build_delta_graph(t, *a, xk, /*params_require_grad=*/false);
            if (!have) {
                const Tensor& xv = t.value(x);
                acc = t.constant(
                    Tensor::zeros({xv.rows(), static_cast<std::size_t>(a->spec().out_dim)}, xv.dtype()));
                have = true;
            }
            acc = t.scatter_add_rows(acc, dk, idx[static_cast<std::size_t>(k)]);
        }
        if (!have) return std::nullopt;
        return acc;
    };
    return forward_graph(tape, model, batch.inputs, /*theta_requires_grad=*/false, capture_taps, delta);
}

std::vector<AdaptationRecord> split_records(const std::vector<TapPoint>& taps,
                                            const std::vector<int>& owner, int users, long t) {
    std::vector<AdaptationRecord> out;
    const std::size_t n = owner.size();
    for (const auto& tp : taps) {
        if (!tp.grad_filled)
            throw TapeError("split_records: tap for layer " + std::to_string(tp.layer) + " has no gradient");
        if (tp.input.rows() != n || tp.grad.rows() != n)
            throw ShapeError("split_records: owner count does not cover the tap rows");
        for (int k = 0; k < users; ++k) {
            std::vector<std::int64_t> idx;
            for (std::size_t i = 0; i < n; ++i)
                if (owner[i] == k) idx.push_back(static_cast<std::int64_t>(i));
            if (idx.empty()) continue;
            AdaptationRecord r;
            r.layer = tp.layer;
            r.user = k;
            r.iter = t;
            r.input = tp.input.take_rows(idx);
            r.grad = tp.grad.take_rows(idx);
            // Batch-mean gradient -> per-sample gradient.
            const double scale = static_cast<double>(n);
            with_dtype(r.grad.dtype(), [&](auto z) {
                using T = decltype(z);
                auto p = data_of<T>(r.grad);
                for (std::size_t i = 0; i < p.size(); ++i) p[i] = static_cast<T>(scale) * p[i];
            });
            out.push_back(std::move(r));
        }
    }
    return out;
}

BaseModel merge_all(const BaseModel& model, std::vector<AdapterSet>& users, Counters* counters) {
    // Validate first so a rejection cannot leave earlier adapters marked.
    for (const auto& set : users)
        for (const auto& a : set.slots)
            if (a && !a->mergeable())
                throw NotMergeableError("merge_all: '" +
                                        std::string(adapter_kind_name(a->spec().kind)) +
                                        "' adapter is not a linear map of its input");
    BaseModel merged = model;
    const auto slots = model.tunable_slots();
    for (std::size_t m = 0; m < slots.size(); ++m) {
        for (auto& set : users) {
            if (set.slots.size() <= m || !set.slots[m]) continue;
            Tensor& w = merged.weights[static_cast<std::size_t>(slots[m])];
            w = set.slots[m]->merge_into(w);
            if (counters) ++counters->merges;
        }
    }
    return merged;
}

void unmerge_all(BaseModel& merged, std::vector<AdapterSet>& users, Counters* counters) {
    const auto slots = merged.tunable_slots();
    for (std::size_t m = slots.size(); m-- > 0;) {
        for (std::size_t k = users.size(); k-- > 0;) {
            auto& set = users[k];
            if (set.slots.size() <= m || !set.slots[m]) continue;
            Tensor& w = merged.weights[static_cast<std::size_t>(slots[m])];
            w = set.slots[m]->unmerge_from(w);
            if (counters) ++counters->unmerges;
        }
    }
}

} // namespace cola
