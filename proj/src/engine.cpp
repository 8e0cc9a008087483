#include "cola/engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "cola/dispatch.hpp"
#include "cola/rng.hpp"

namespace cola {

Variant variant_from_name(const std::string& name) {
    if (name == "classical") return Variant::Classical;
    if (name == "detached") return Variant::Detached;
    if (name == "unmerged") return Variant::Unmerged;
    if (name == "merged") return Variant::Merged;
    if (name == "ft") return Variant::Ft;
    throw ConfigError("unknown variant '" + name + "'");
}

const char* variant_name(Variant v) {
    switch (v) {
    case Variant::Classical: return "classical";
    case Variant::Detached: return "detached";
    case Variant::Unmerged: return "unmerged";
    case Variant::Merged: return "merged";
    case Variant::Ft: return "ft";
    }
    return "?";
}

std::pair<Tensor, Tensor> stack_records(std::span<const AdaptationRecord> records) {
    if (records.empty()) throw Error("stack_records: empty buffer");
    std::size_t rows = 0;
    const std::size_t in = records.front().input.cols();
    const std::size_t out = records.front().grad.cols();
    const Dtype dt = records.front().input.dtype();
    for (const auto& r : records) {
        if (r.input.cols() != in || r.grad.cols() != out)
            throw ShapeError("stack_records: record width mismatch");
        if (r.input.rows() != r.grad.rows()) throw ShapeError("stack_records: input/grad row mismatch");
        rows += r.input.rows();
    }
    Tensor x({rows, in}, dt);
    Tensor g({rows, out}, dt);
    std::size_t at = 0;
    for (const auto& r : records) {
        std::memcpy(x.bytes().data() + at * in * (dt == Dtype::F32 ? 4 : 8), r.input.bytes().data(),
                    r.input.bytes().size());
        std::memcpy(g.bytes().data() + at * out * (dt == Dtype::F32 ? 4 : 8), r.grad.bytes().data(),
                    r.grad.bytes().size());
        at += r.input.rows();
    }
    return {std::move(x), std::move(g)};
}

double ce_loss_plain(const Tensor& logits, const std::vector<int>& labels) {
    const std::size_t n = logits.rows(), c = logits.cols();
    if (labels.size() != n) throw ShapeError("ce_loss_plain: label count mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double m = logits.at(i * c);
        for (std::size_t j = 1; j < c; ++j) m = std::max(m, logits.at(i * c + j));
        double se = 0.0;
        for (std::size_t j = 0; j < c; ++j) se += std::exp(logits.at(i * c + j) - m);
        total += std::log(se) - (logits.at(i * c + static_cast<std::size_t>(labels[i])) - m);
    }
    return total / static_cast<double>(n);
}

double accuracy_of(const Tensor& logits, const std::vector<int>& labels) {
    const std::size_t n = logits.rows(), c = logits.cols();
    std::size_t hit = 0;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < c; ++j)
            if (logits.at(i * c + j) > logits.at(i * c + best)) best = j;
        if (static_cast<int>(best) == labels[i]) ++hit;
    }
    return n ? static_cast<double>(hit) / static_cast<double>(n) : 0.0;
}

std::vector<AdapterSet> make_adapter_grid(const BaseModel& model, int users, AdapterKind kind, int rank,
                                          int hidden, double alpha, std::uint64_t seed) {
    const int M = model.num_tunable();
    Rng root(seed);
    std::vector<AdapterSet> grid(static_cast<std::size_t>(users));
    for (int k = 0; k < users; ++k) {
        grid[static_cast<std::size_t>(k)].slots.resize(static_cast<std::size_t>(M));
        for (int m = 0; m < M; ++m) {
            AdapterSpec spec;
            spec.kind = kind;
            spec.in_dim = model.tunable_in_dim(m);
            spec.out_dim = model.tunable_out_dim(m);
            spec.rank = rank;
            spec.hidden = hidden;
            spec.alpha = alpha;
            const std::uint64_t aseed = root.fork(static_cast<std::uint64_t>(m) * 1000003ULL +
                                                  static_cast<std::uint64_t>(k))
                                            .next_u64();
            grid[static_cast<std::size_t>(k)].slots[static_cast<std::size_t>(m)] =
                std::make_shared<Adapter>(Adapter::init(spec, aseed, model.dtype));
        }
    }
    return grid;
}

StepOutcome cola_step(const BaseModel& model, std::vector<AdapterSet>& users, const RoutedBatch& batch,
                      Variant variant, long t, Counters& counters) {
    if (!model.frozen) throw Error("decoupled training requires a frozen base model");
    const int K = static_cast<int>(users.size());
    batch.validate(K);

    Tape tape;
    ForwardGraph fg;
    BaseModel merged; // keeps merged weights alive through the backward
    switch (variant) {
    case Variant::Merged: {
        merged = merge_all(model, users, &counters);
        fg = forward_graph(tape, merged, batch.inputs, /*theta_requires_grad=*/false,
                           /*capture_taps=*/true, {});
        break;
    }
    case Variant::Unmerged: {
        if (K == 1)
            fg = forward_with_adapters(tape, model, batch.inputs, &users[0],
                                       /*adapter_params_require_grad=*/false, /*capture_taps=*/true);
        else
            fg = route_forward(tape, model, batch, users, /*capture_taps=*/true);
        break;
    }
    case Variant::Detached: {
        if (K != 1) throw ConfigError("detached variant is single-user only");
        fg = forward_detached(tape, model, batch.inputs, &users[0], /*capture_taps=*/true);
        break;
    }
    default:
        throw ConfigError("cola_step handles detached/unmerged/merged variants only");
    }

    Val loss = tape.softmax_cross_entropy(fg.logits, batch.labels);
    tape.backward(loss);
    ++counters.backwards;

    StepOutcome out;
    out.loss = tape.value(loss).at(0);
    out.logits = tape.value(fg.logits);
    out.records = split_records(tape.taps(), batch.owner, K, t);
    if (variant == Variant::Merged) unmerge_all(merged, users, &counters);
    return out;
}

void TrainOptions::validate() const {
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (epochs < 1 && iterations <= 0) throw ConfigError("epochs or iterations required");
    if (interval < 1) throw ConfigError("adaptation interval must be >= 1");
    if (users < 1) throw ConfigError("users must be >= 1");
    if (workers < 1) throw ConfigError("workers must be >= 1");
    const bool multi = users > 1;
    switch (variant) {
    case Variant::Classical:
        if (multi) throw ConfigError("variant=classical is the single-user oracle (users=1)");
        break;
    case Variant::Ft:
        if (multi) throw ConfigError("variant=ft is single-user");
        if (use_adapters) throw ConfigError("variant=ft trains theta; disable adapters");
        break;
    case Variant::Detached:
        if (multi) throw ConfigError("variant=detached is single-user only");
        break;
    default:
        break;
    }
    if (multi) {
        if (collab == CollabMode::Alone && variant != Variant::Unmerged)
            throw ConfigError("alone mode never merges during training (variant must be unmerged)");
        if (collab == CollabMode::Collaboration && variant != Variant::Merged)
            throw ConfigError("collaboration mode merges each step (variant must be merged)");
    }
    if (variant != Variant::Ft && !use_adapters) throw ConfigError("this variant requires adapters");
}

namespace {

struct BatchPlanner {
    const DatasetHandle& data;
    int users; // routing users (1 for joint/single)
    int batch;
    std::uint64_t seed;
    Dtype dtype;

    std::vector<std::vector<std::int64_t>> shards; // per user, dataset rows
    std::vector<std::vector<std::int64_t>> perms;  // per user, current epoch order
    std::vector<int> quota;
    long iters_per_epoch = 0;
    int current_epoch = 0;

    BatchPlanner(const DatasetHandle& d, int k, int b, std::uint64_t s, Dtype dt)
        : data(d), users(k), batch(b), seed(s), dtype(dt) {
        shards.resize(static_cast<std::size_t>(users));
        for (std::size_t i = 0; i < d.n; ++i)
            shards[i % static_cast<std::size_t>(users)].push_back(static_cast<std::int64_t>(i));
        for (const auto& s2 : shards)
            if (s2.empty()) throw ConfigError("more users than dataset rows");
        quota.resize(static_cast<std::size_t>(users));
        for (int k2 = 0; k2 < users; ++k2)
            quota[static_cast<std::size_t>(k2)] = batch / users + (k2 < batch % users ? 1 : 0);
        iters_per_epoch = static_cast<long>((d.n + static_cast<std::size_t>(batch) - 1) /
                                            static_cast<std::size_t>(batch));
    }

    void start_epoch(int epoch) {
        current_epoch = epoch;
        perms = shards;
        for (int k = 0; k < users; ++k) {
            Rng rng = Rng(seed).fork(0xe90c4ULL + static_cast<std::uint64_t>(epoch) *
                                                      static_cast<std::uint64_t>(users + 1) +
                                     static_cast<std::uint64_t>(k));
            shuffle(perms[static_cast<std::size_t>(k)], rng);
        }
    }

    // j is the 0-based iteration within the epoch.
    RoutedBatch assemble(long j) const {
        RoutedBatch rb;
        std::vector<std::int64_t> rows;
        if (users == 1) {
            const auto& perm = perms[0];
            const std::size_t lo = static_cast<std::size_t>(j) * static_cast<std::size_t>(batch);
            const std::size_t hi = std::min(perm.size(), lo + static_cast<std::size_t>(batch));
            rows.assign(perm.begin() + static_cast<std::ptrdiff_t>(lo),
                        perm.begin() + static_cast<std::ptrdiff_t>(hi));
            rb.owner.assign(rows.size(), 0);
        } else {
            for (int k = 0; k < users; ++k) {
                const auto& perm = perms[static_cast<std::size_t>(k)];
                const int q = quota[static_cast<std::size_t>(k)];
                for (int r = 0; r < q; ++r) {
                    const std::size_t pos =
                        (static_cast<std::size_t>(j) * static_cast<std::size_t>(q) +
                         static_cast<std::size_t>(r)) %
                        perm.size();
                    rows.push_back(perm[pos]);
                    rb.owner.push_back(k);
                }
            }
        }
        rb.inputs = data.gather(rows, dtype);
        rb.labels = data.gather_labels(rows);
        return rb;
    }
};

} // namespace

EvalResult evaluate(const BaseModel& model, const AdapterSet* adapters, const DatasetHandle& data,
                    bool merged, int eval_batch) {
    BaseModel work = model;
    const AdapterSet* use = adapters;
    if (merged && adapters) {
        for (const auto& a : adapters->slots)
            if (a && !a->mergeable())
                throw NotMergeableError("evaluate: merged inference needs linear adapters");
        const auto slots = model.tunable_slots();
        for (std::size_t m = 0; m < slots.size(); ++m) {
            if (adapters->slots.size() <= m || !adapters->slots[m]) continue;
            Tensor& w = work.weights[static_cast<std::size_t>(slots[m])];
            w = adapters->slots[m]->merge_into(w);
        }
        // Restore the merged marks; the merged weight copies stay in `work`.
        for (std::size_t m = 0; m < slots.size(); ++m) {
            if (adapters->slots.size() <= m || !adapters->slots[m]) continue;
            (void)adapters->slots[m]->unmerge_from(work.weights[static_cast<std::size_t>(slots[m])]);
        }
        use = nullptr;
    }
    EvalResult res;
    double loss_sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t at = 0; at < data.n; at += static_cast<std::size_t>(eval_batch)) {
        const std::size_t hi = std::min(data.n, at + static_cast<std::size_t>(eval_batch));
        std::vector<std::int64_t> rows;
        for (std::size_t i = at; i < hi; ++i) rows.push_back(static_cast<std::int64_t>(i));
        const Tensor x = data.gather(rows, model.dtype);
        const auto labels = data.gather_labels(rows);
        const Tensor logits = model_infer(work, x, use);
        loss_sum += ce_loss_plain(logits, labels) * static_cast<double>(rows.size());
        hits += static_cast<std::size_t>(std::lround(accuracy_of(logits, labels) *
                                                     static_cast<double>(rows.size())));
    }
    res.n = data.n;
    res.loss = data.n ? loss_sum / static_cast<double>(data.n) : 0.0;
    res.accuracy = data.n ? static_cast<double>(hits) / static_cast<double>(data.n) : 0.0;
    return res;
}

TrainResult run_training(BaseModel model, const TrainOptions& options, const DatasetHandle& train,
                         const DatasetHandle* eval_set, const MetricsSink& sink) {
    options.validate();
    if (model.dtype != options.precision)
        throw ConfigError("model precision differs from configured run precision");
    const auto t0 = std::chrono::steady_clock::now();
    auto wall = [&]() {
        if (!options.timing) return 0.0;
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };

    TrainResult result;
    const bool cola_variant = options.variant == Variant::Detached ||
                              options.variant == Variant::Unmerged || options.variant == Variant::Merged;
    const int K_train = (options.users > 1 && options.collab != CollabMode::Joint) ? options.users : 1;

    if (options.variant == Variant::Ft) model.frozen = false;
    result.model = model;

    if (options.use_adapters)
        result.adapters = make_adapter_grid(result.model, K_train, options.adapter_kind, options.rank,
                                            options.adapter_hidden, options.alpha, options.seed);

    std::unique_ptr<OffloadRuntime> offload;
    if (cola_variant) {
        OffloadOptions oo;
        oo.workers = options.workers;
        oo.mode = options.offload_mode;
        oo.fit_optim = options.fit_optim;
        oo.flush_timeout = options.flush_timeout;
        oo.simulated_latency = options.simulated_latency;
        oo.message_log_path = options.message_log_path;
        offload = OffloadRuntime::spawn(oo);
        for (int m = 0; m < result.model.num_tunable(); ++m)
            for (int k = 0; k < K_train; ++k)
                offload->register_adapter(m, k, *result.adapters[static_cast<std::size_t>(k)]
                                                     .slots[static_cast<std::size_t>(m)]);
    }

    BatchPlanner planner(train, K_train, options.batch_size, options.seed, options.precision);
    const long T = options.iterations > 0 ? options.iterations
                                          : static_cast<long>(options.epochs) * planner.iters_per_epoch;
    LrPlan plan{options.schedule, options.lr, T, options.warmup_frac};

    std::vector<OptimState> classical_states(
        static_cast<std::size_t>(std::max(1, result.model.num_tunable())));
    OptimState ft_state;

    double epoch_loss = 0.0, epoch_acc = 0.0;
    long epoch_batches = 0;

    auto emit = [&](MetricPoint p) {
        if (sink) sink(p);
        result.history.push_back(std::move(p));
    };

    auto install_uploads = [&](std::vector<OffloadRuntime::Upload> uploads) {
        for (auto& up : uploads)
            result.adapters[static_cast<std::size_t>(up.k)].slots[static_cast<std::size_t>(up.m)] =
                std::make_shared<Adapter>(std::move(up.adapter));
    };

    auto eval_lines = [&](long t, int epoch) {
        if (!eval_set) return;
        if (K_train == 1) {
            const AdapterSet* set = result.adapters.empty() ? nullptr : &result.adapters[0];
            EvalResult ev = evaluate(result.model, set, *eval_set, /*merged=*/false);
            emit({t, epoch, "test", ev.loss, ev.accuracy, wall(), -1});
            return;
        }
        // Per-user shards mirror the training shards.
        double agg_loss = 0.0, agg_acc = 0.0;
        std::size_t agg_n = 0;
        for (int k = 0; k < K_train; ++k) {
            DatasetHandle shard;
            shard.name = eval_set->name;
            shard.split = eval_set->split;
            shard.dim = eval_set->dim;
            shard.classes = eval_set->classes;
            for (std::size_t i = static_cast<std::size_t>(k); i < eval_set->n;
                 i += static_cast<std::size_t>(K_train)) {
                shard.labels.push_back(eval_set->labels[i]);
                shard.inputs.insert(shard.inputs.end(), eval_set->inputs.begin() + i * eval_set->dim,
                                    eval_set->inputs.begin() + (i + 1) * eval_set->dim);
                ++shard.n;
            }
            EvalResult ev;
            if (options.collab == CollabMode::Collaboration) {
                BaseModel merged = merge_all(result.model, result.adapters);
                ev = evaluate(merged, nullptr, shard, false);
                unmerge_all(merged, result.adapters);
            } else {
                ev = evaluate(result.model, &result.adapters[static_cast<std::size_t>(k)], shard, false);
            }
            emit({t, epoch, "test", ev.loss, ev.accuracy, wall(), k});
            agg_loss += ev.loss * static_cast<double>(ev.n);
            agg_acc += ev.accuracy * static_cast<double>(ev.n);
            agg_n += ev.n;
        }
        if (agg_n)
            emit({t, epoch, "test", agg_loss / static_cast<double>(agg_n),
                  agg_acc / static_cast<double>(agg_n), wall(), -1});
        // Post-hoc merge of every user's adapters (equal weighting), the
        // "all merged" inference column. Reported at the end of training
        // when the adapters are linear.
        if (t == T) {
            bool all_linear = true;
            for (const auto& set : result.adapters)
                for (const auto& a : set.slots) all_linear = all_linear && a && a->mergeable();
            if (all_linear) {
                BaseModel merged = merge_all(result.model, result.adapters);
                EvalResult ev = evaluate(merged, nullptr, *eval_set, false);
                unmerge_all(merged, result.adapters);
                emit({t, epoch, "test_merged", ev.loss, ev.accuracy, wall(), -1});
            }
        }
    };

    for (long t = 1; t <= T; ++t) {
        const int epoch = static_cast<int>((t - 1) / planner.iters_per_epoch) + 1;
        const long j = (t - 1) % planner.iters_per_epoch;
        if (j == 0) planner.start_epoch(epoch);
        RoutedBatch batch = planner.assemble(j);
        const double lr_t = lr_at(plan, t);

        double loss = 0.0, acc = 0.0;
        if (options.variant == Variant::Classical) {
            Tensor logits;
            loss = classical_step(result.model, result.adapters[0], batch.inputs, batch.labels,
                                  options.task_optim, classical_states, lr_t, &logits);
            ++result.counters.backwards;
            acc = accuracy_of(logits, batch.labels);
        } else if (options.variant == Variant::Ft) {
            Tensor logits;
            loss = ft_step(result.model, batch.inputs, batch.labels, options.task_optim, ft_state, lr_t,
                           &logits);
            ++result.counters.backwards;
            acc = accuracy_of(logits, batch.labels);
        } else {
            StepOutcome step = cola_step(result.model, result.adapters, batch, options.variant, t,
                                         result.counters);
            loss = step.loss;
            acc = accuracy_of(step.logits, batch.labels);
            result.counters.records_dispatched += static_cast<long>(step.records.size());
            for (const auto& r : step.records)
                result.counters.record_samples += static_cast<long>(r.input.rows());
            offload->dispatch(std::move(step.records));
            // Periodic adaptation, plus a final flush of any partial buffer
            // so the returned adapters reflect every record.
            if (t % options.interval == 0 || t == T) {
                install_uploads(offload->flush(t, lr_t));
                ++result.counters.flushes;
            }
        }

        epoch_loss += loss;
        epoch_acc += acc;
        ++epoch_batches;
        result.final_train_loss = loss;

        if (options.log_every > 0 && t % options.log_every == 0)
            emit({t, epoch, "train", loss, acc, wall(), -1});

        const bool epoch_end = (j + 1 == planner.iters_per_epoch) || t == T;
        if (epoch_end) {
            emit({t, epoch, "train", epoch_loss / static_cast<double>(epoch_batches),
                  epoch_acc / static_cast<double>(epoch_batches), wall(), -1});
            epoch_loss = epoch_acc = 0.0;
            epoch_batches = 0;
            if (options.eval_each_epoch || t == T) eval_lines(t, epoch);
        }
    }

    if (offload) result.offload = offload->accounting();
    return result;
}

} // namespace cola
