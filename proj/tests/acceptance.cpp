// Acceptance suite: one line per criterion, exit 0 only if every criterion
// that runs passes. --skip-mnist runs the self-contained criteria; --only-mnist
// runs the MNIST criterion alone and exits 77 when the dataset is absent.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "cola/checkpoint.hpp"
#include "cola/configfile.hpp"
#include "cola/costmodel.hpp"
#include "cola/engine.hpp"
#include "cola/metrics.hpp"
#include "cola/rng.hpp"
#include "cola/verify.hpp"

using namespace cola;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int id;
    std::string name;
    bool pass = false;
    bool skipped = false;
    std::string detail;
    double seconds = 0.0;
};

std::vector<Outcome> g_outcomes;

template <typename F>
void criterion(int id, const std::string& name, F&& body) {
    Outcome out;
    out.id = id;
    out.name = name;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        body(out);
        if (out.detail.empty() && !out.pass && !out.skipped) out.detail = "assertions failed";
    } catch (const std::exception& e) {
        out.pass = false;
        out.detail = std::string("exception: ") + e.what();
    }
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ostringstream line;
    line << "[" << (id < 10 ? " " : "") << id << "/10] "
         << (out.skipped ? "SKIP" : out.pass ? "PASS" : "FAIL") << " " << name;
    if (!out.detail.empty()) line << "  (" << out.detail << ")";
    line << "  " << out.seconds << "s";
    std::cout << line.str() << std::endl;
    g_outcomes.push_back(std::move(out));
}

BaseModel frozen_mlp(std::uint64_t seed) {
    return build_model({{LayerKind::Affine, 20, 16, true},
                        {LayerKind::Relu, 16, 16, false},
                        {LayerKind::Affine, 16, 12, true},
                        {LayerKind::Relu, 12, 12, false},
                        {LayerKind::Affine, 12, 4, true}},
                       seed);
}

std::vector<AdapterSet> randomized(const BaseModel& m, AdapterKind kind, std::uint64_t seed) {
    auto grid = make_adapter_grid(m, 1, kind, 4, 16, 1.0, seed);
    Rng rng = Rng(seed).fork(2);
    for (auto& a : grid[0].slots)
        for (std::size_t p = 0; p < a->num_params(); ++p)
            for (std::size_t i = 0; i < a->param(p).size(); ++i) a->param(p).set(i, 0.3 * rng.gaussian());
    return grid;
}

RoutedBatch random_batch(const BaseModel& m, int rows, std::uint64_t seed, int users = 1) {
    Rng rng(seed);
    RoutedBatch b;
    b.inputs = Tensor::zeros({static_cast<std::size_t>(rows), static_cast<std::size_t>(m.in_dim())});
    for (std::size_t i = 0; i < b.inputs.size(); ++i) b.inputs.set(i, rng.uniform(-1.0, 1.0));
    for (int i = 0; i < rows; ++i) {
        b.labels.push_back(static_cast<int>(rng.next_below(static_cast<std::uint64_t>(m.out_dim()))));
        b.owner.push_back(i % users);
    }
    return b;
}

// Per-layer fit gradients from one decoupled step's records.
std::vector<std::vector<Tensor>> record_fit_gradients(const BaseModel& m, std::vector<AdapterSet>& grid,
                                                      const RoutedBatch& batch, Variant v) {
    Counters c;
    StepOutcome s = cola_step(m, grid, batch, v, 1, c);
    std::vector<std::vector<Tensor>> out(static_cast<std::size_t>(m.num_tunable()));
    for (int mm = 0; mm < m.num_tunable(); ++mm) {
        std::vector<AdaptationRecord> mine;
        for (const auto& r : s.records)
            if (r.layer == mm) mine.push_back(r);
        auto [x, g] = stack_records(mine);
        fit_gradient(*grid[0].slots[static_cast<std::size_t>(mm)], x, g, out[static_cast<std::size_t>(mm)]);
    }
    return out;
}

double worst_layer_rel(const std::vector<std::vector<Tensor>>& a,
                       const std::vector<std::vector<Tensor>>& b) {
    double worst = 0.0;
    for (std::size_t m = 0; m < a.size(); ++m)
        for (std::size_t p = 0; p < a[m].size(); ++p) worst = std::max(worst, max_rel_err(a[m][p], b[m][p]));
    return worst;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

std::string mnist_dir() {
    if (const char* env = std::getenv("COLA_MNIST_DIR")) return env;
    return "data/mnist";
}

bool mnist_present() {
    const std::string dir = mnist_dir();
    return fs::exists(dir + "/train-images-idx3-ubyte") && fs::exists(dir + "/train-labels-idx1-ubyte") &&
           fs::exists(dir + "/t10k-images-idx3-ubyte") && fs::exists(dir + "/t10k-labels-idx1-ubyte");
}

void run_core_criteria() {
    criterion(1, "gradient equivalence of unmerged/merged records vs classical backprop", [](Outcome& out) {
        const auto start = std::chrono::steady_clock::now();
        double worst = 0.0;
        for (AdapterKind kind : {AdapterKind::LowRank, AdapterKind::Linear, AdapterKind::Mlp}) {
            BaseModel m = frozen_mlp(1000 + static_cast<std::uint64_t>(kind));
            auto grid = randomized(m, kind, 2000 + static_cast<std::uint64_t>(kind));
            RoutedBatch batch = random_batch(m, 8, 3000 + static_cast<std::uint64_t>(kind));
            std::vector<std::vector<Tensor>> classical;
            classical_gradients(m, grid[0], batch.inputs, batch.labels, classical);
            auto unmerged = record_fit_gradients(m, grid, batch, Variant::Unmerged);
            worst = std::max(worst, worst_layer_rel(unmerged, classical));
            if (kind != AdapterKind::Mlp) { // merged training requires linear adapters
                auto merged = record_fit_gradients(m, grid, batch, Variant::Merged);
                worst = std::max(worst, worst_layer_rel(merged, classical));
            }
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        out.pass = worst <= 1e-8 && secs < 5.0;
        std::ostringstream d;
        d << "max rel err " << worst
          << " tol 1e-8; unmerged over lowrank/linear/mlp, merged over lowrank/linear, batch 8; "
          << secs << "s < 5s";
        out.detail = d.str();
    });

    criterion(2, "detached variant matches only the final layer", [](Outcome& out) {
        BaseModel m = frozen_mlp(4000);
        auto grid = make_adapter_grid(m, 1, AdapterKind::LowRank, 4, 16, 1.0, 4100);
        std::vector<OptimState> states(3);
        for (int s = 0; s < 5; ++s) {
            RoutedBatch b = random_batch(m, 16, 4200 + static_cast<std::uint64_t>(s));
            classical_step(m, grid[0], b.inputs, b.labels, sgd_spec(), states, 0.3);
        }
        RoutedBatch batch = random_batch(m, 8, 4300);
        std::vector<std::vector<Tensor>> classical;
        classical_gradients(m, grid[0], batch.inputs, batch.labels, classical);
        auto det = record_fit_gradients(m, grid, batch, Variant::Detached);
        double final_err = 0.0, early_err = 0.0;
        for (std::size_t p = 0; p < det[2].size(); ++p)
            final_err = std::max(final_err, max_rel_err(det[2][p], classical[2][p]));
        for (std::size_t mm = 0; mm < 2; ++mm)
            for (std::size_t p = 0; p < det[mm].size(); ++p)
                early_err = std::max(early_err, max_rel_err(det[mm][p], classical[mm][p]));
        out.pass = final_err <= 1e-8 && early_err > 1e-3;
        std::ostringstream d;
        d << "final layer err " << final_err << " (tol 1e-8), earlier layer err " << early_err
          << " (must exceed 1e-3)";
        out.detail = d.str();
    });

    criterion(3, "auxiliary-loss gradient identity over 20 seeds", [](Outcome& out) {
        const auto start = std::chrono::steady_clock::now();
        double worst = 0.0;
        const AdapterKind kinds[] = {AdapterKind::LowRank, AdapterKind::Linear, AdapterKind::Mlp};
        for (std::uint64_t seed = 1; seed <= 20; ++seed) {
            BaseModel m = frozen_mlp(seed * 31);
            auto grid = randomized(m, kinds[seed % 3], seed * 77);
            RoutedBatch batch = random_batch(m, 8, seed * 131);
            std::vector<std::vector<Tensor>> classical;
            classical_gradients(m, grid[0], batch.inputs, batch.labels, classical);
            auto fit = record_fit_gradients(m, grid, batch, Variant::Unmerged);
            worst = std::max(worst, worst_layer_rel(fit, classical));
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        out.pass = worst <= 1e-10 && secs < 10.0;
        std::ostringstream d;
        d << "max elementwise rel err " << worst << " tol 1e-10; " << secs << "s < 10s";
        out.detail = d.str();
    });

    criterion(4, "merge succeeds exactly for linear adapters and round-trips", [](Outcome& out) {
        Rng rng(5100);
        bool ok = true;
        std::ostringstream d;
        double fwd_err = 0.0, round_err = 0.0;
        for (AdapterKind kind : {AdapterKind::Linear, AdapterKind::LowRank}) {
            BaseModel m = frozen_mlp(5200 + static_cast<std::uint64_t>(kind));
            auto grid = randomized(m, kind, 5300 + static_cast<std::uint64_t>(kind));
            Tensor x = Tensor::zeros({16, 20});
            for (std::size_t i = 0; i < x.size(); ++i) x.set(i, rng.uniform(-1, 1));
            const Tensor with_adapters = model_infer(m, x, &grid[0]);
            BaseModel merged = merge_all(m, grid);
            const Tensor merged_out = model_infer(merged, x, nullptr);
            fwd_err = std::max(fwd_err, max_abs_err(with_adapters, merged_out));
            unmerge_all(merged, grid);
            for (std::size_t s = 0; s < m.weights.size(); ++s)
                round_err = std::max(round_err, max_abs_err(merged.weights[s], m.weights[s]));
        }
        ok = ok && fwd_err <= 1e-9 && round_err <= 1e-12;

        bool mlp_rejected = false;
        try {
            BaseModel m = frozen_mlp(5400);
            auto grid = randomized(m, AdapterKind::Mlp, 5500);
            (void)merge_all(m, grid);
        } catch (const NotMergeableError&) {
            mlp_rejected = true;
        }
        ok = ok && mlp_rejected;
        out.pass = ok;
        d << "forward-equivalence err " << fwd_err << " (tol 1e-9), round-trip err " << round_err
          << " (tol 1e-12), mlp rejected " << (mlp_rejected ? "yes" : "NO");
        out.detail = d.str();
    });

    criterion(5, "inner-loop contraction and whitened-update residual factor", [](Outcome& out) {
        VerifyCheck c50 = check_contraction(8, 5, std::vector<double>(50, 0.1), 6100);
        const double expect = std::pow(0.9, 50);
        const double ratio_err = std::fabs(c50.measured - expect) / expect;
        VerifyCheck wres = check_whitened_equivalence(10, 6, 25, 0.15, 0.4, 6200);
        out.pass = ratio_err <= 1e-6 && c50.pass && wres.pass && wres.max_rel_err <= 1e-8;
        std::ostringstream d;
        d << "ratio " << c50.measured << " vs 0.9^50 " << expect << " rel err " << ratio_err
          << " (tol 1e-6); residual-factor err " << wres.max_rel_err << " (tol 1e-8)";
        out.detail = d.str();
    });

    criterion(6, "effective batch: (B=8, I=4) equals classical batch 32 after 200 iterations", [](Outcome& out) {
        auto all = synth_dataset(4, 400, 20, 3.0, 6300); // 1600 rows
        TrainOptions small;
        small.variant = Variant::Merged;
        small.batch_size = 8;
        small.iterations = 200;
        small.interval = 4;
        small.lr = 0.2;
        small.task_optim = sgd_spec();
        small.fit_optim = sgd_spec();
        small.seed = 6400;
        small.adapter_kind = AdapterKind::LowRank;
        small.rank = 4;
        small.timing = false;
        small.eval_each_epoch = false;
        TrainOptions big = small;
        big.variant = Variant::Classical;
        big.batch_size = 32;
        big.iterations = 50;
        big.interval = 1;

        BaseModel m = frozen_mlp(6500);
        TrainResult ra = run_training(m, small, all, nullptr);
        TrainResult rb = run_training(m, big, all, nullptr);
        double worst = 0.0;
        for (int mm = 0; mm < 3; ++mm) {
            const Adapter& a = *ra.adapters[0].slots[static_cast<std::size_t>(mm)];
            const Adapter& b = *rb.adapters[0].slots[static_cast<std::size_t>(mm)];
            for (std::size_t p = 0; p < a.num_params(); ++p)
                worst = std::max(worst, max_rel_err(a.param(p), b.param(p), 1e-8));
        }
        out.pass = worst <= 1e-8;
        std::ostringstream d;
        d << "final-parameter max rel err " << worst << " tol 1e-8, flushes " << ra.counters.flushes;
        out.detail = d.str();
    });

    criterion(8, "cost-model structure per the computation-space table", [](Outcome& out) {
        BaseModel m = build_model(Preset::Mlp, 6600);
        auto spec_for = [&](AdapterKind kind) {
            std::vector<AdapterSpec> specs;
            for (int mm = 0; mm < m.num_tunable(); ++mm) {
                AdapterSpec s;
                s.kind = kind;
                s.in_dim = m.tunable_in_dim(mm);
                s.out_dim = m.tunable_out_dim(mm);
                s.rank = 8;
                s.hidden = 128;
                specs.push_back(s);
            }
            return specs;
        };
        // ColA merged base-device learning count: invariant to K and adapter kind.
        std::vector<std::size_t> base_counts;
        for (int K : {1, 8})
            for (AdapterKind kind : {AdapterKind::LowRank, AdapterKind::Linear, AdapterKind::Mlp})
                base_counts.push_back(
                    cost_report(m, spec_for(kind), K, CostMethod::ColaMerged, CostMode::Learning, 16)
                        .base_total());
        bool invariant = true;
        for (std::size_t i = 1; i < base_counts.size(); ++i) invariant &= base_counts[i] == base_counts[0];

        // ColA unmerged vs PEFT unmerged: the base difference is exactly -|grad w|.
        bool diff_ok = true;
        for (int K : {1, 8}) {
            const auto specs = spec_for(AdapterKind::LowRank);
            const auto cola = cost_report(m, specs, K, CostMethod::ColaUnmerged, CostMode::Learning, 16);
            const auto peft = cost_report(m, specs, K, CostMethod::PeftUnmerged, CostMode::Learning, 16);
            std::size_t grad_w = 0;
            for (const auto& term : peft.backward_params)
                if (term.symbol == "grad_w") grad_w = term.count;
            diff_ok &= peft.base_total() - cola.base_total() == grad_w;
            diff_ok &= cola.offload_total() == grad_w;
        }
        out.pass = invariant && diff_ok;
        std::ostringstream d;
        d << "merged base count " << base_counts[0] << " invariant over K x kind: " << (invariant ? "yes" : "NO")
          << "; unmerged-vs-peft difference equals |grad_w|: " << (diff_ok ? "yes" : "NO");
        out.detail = d.str();
    });

    criterion(9, "router equivalence and K=1 collaboration reduction", [](Outcome& out) {
        BaseModel m = frozen_mlp(6700);
        const int K = 3;
        auto grid = make_adapter_grid(m, K, AdapterKind::LowRank, 4, 16, 1.0, 6800);
        Rng rng = Rng(6800).fork(4);
        for (auto& set : grid)
            for (auto& a : set.slots)
                for (std::size_t p = 0; p < a->num_params(); ++p)
                    for (std::size_t i = 0; i < a->param(p).size(); ++i)
                        a->param(p).set(i, 0.3 * rng.gaussian());
        RoutedBatch batch = random_batch(m, 9, 6900, K);

        Counters c;
        StepOutcome joint = cola_step(m, grid, batch, Variant::Unmerged, 1, c);
        bool per_user_ok = c.backwards == 1;
        double worst = 0.0;
        for (int k = 0; k < K; ++k) {
            const auto idx = batch.rows_of(k);
            RoutedBatch solo;
            solo.inputs = batch.inputs.take_rows(idx);
            for (std::int64_t i : idx) solo.labels.push_back(batch.labels[static_cast<std::size_t>(i)]);
            solo.owner.assign(idx.size(), 0);
            std::vector<AdapterSet> one = {grid[static_cast<std::size_t>(k)]};
            Counters cs;
            StepOutcome alone = cola_step(m, one, solo, Variant::Unmerged, 1, cs);
            worst = std::max(worst, max_abs_err(joint.logits.take_rows(idx), alone.logits));
            for (int mm = 0; mm < 3; ++mm) {
                const AdaptationRecord *jr = nullptr, *ar = nullptr;
                for (const auto& r : joint.records)
                    if (r.layer == mm && r.user == k) jr = &r;
                for (const auto& r : alone.records)
                    if (r.layer == mm) ar = &r;
                if (!jr || !ar) {
                    per_user_ok = false;
                    continue;
                }
                worst = std::max(worst, max_rel_err(jr->grad, ar->grad, 1e-10));
            }
        }
        per_user_ok = per_user_ok && worst <= 1e-10;

        // K=1 collaboration vs single-user merged: identical metrics and
        // final adapters in synchronous mode.
        auto data = synth_dataset(4, 100, 20, 3.0, 7000);
        TrainOptions collab;
        collab.variant = Variant::Merged;
        collab.users = 1;
        collab.collab = CollabMode::Collaboration;
        collab.batch_size = 10;
        collab.epochs = 2;
        collab.lr = 0.2;
        collab.task_optim = sgd_spec();
        collab.fit_optim = sgd_spec();
        collab.seed = 7100;
        collab.timing = false;
        collab.adapter_kind = AdapterKind::LowRank;
        collab.rank = 4;
        TrainOptions single = collab;
        single.collab = CollabMode::Joint;

        BaseModel base = frozen_mlp(7200);
        TrainResult r1 = run_training(base, collab, data, nullptr);
        TrainResult r2 = run_training(base, single, data, nullptr);
        bool reduce_ok = r1.history.size() == r2.history.size();
        for (std::size_t i = 0; reduce_ok && i < r1.history.size(); ++i)
            reduce_ok = metric_json_line(r1.history[i]) == metric_json_line(r2.history[i]);
        for (int mm = 0; mm < 3 && reduce_ok; ++mm) {
            const auto b1 = adapter_to_bytes(*r1.adapters[0].slots[static_cast<std::size_t>(mm)]);
            const auto b2 = adapter_to_bytes(*r2.adapters[0].slots[static_cast<std::size_t>(mm)]);
            reduce_ok = b1.size() == b2.size() && std::equal(b1.begin(), b1.end(), b2.begin());
        }
        out.pass = per_user_ok && reduce_ok;
        std::ostringstream d;
        d << "per-user record/logit err " << worst << " (tol 1e-10) with one backward; K=1 collaboration "
          << (reduce_ok ? "bit-identical" : "DIVERGED");
        out.detail = d.str();
    });

    criterion(10, "bit-exact reruns of train and verify", [](Outcome& out) {
        const char* cli = std::getenv("COLA_CLI_BIN");
        const fs::path work = fs::temp_directory_path() / "cola_acceptance_c10";
        fs::remove_all(work);
        fs::create_directories(work);
        bool ok = true;
        std::string how;
        if (cli && fs::exists(cli)) {
            how = "via CLI";
            const fs::path cfg = work / "det.cfg";
            {
                std::ofstream f(cfg);
                f << "[run]\nname = det\nseed = 9\ntiming = false\n";
                f << "[data]\ndataset = synth\nsynth_classes = 5\nsynth_per_class = 60\n";
                f << "synth_test_per_class = 20\nsynth_dims = 16\nsynth_sep = 3.0\n";
                f << "[model]\npreset = mlp\n";
                f << "[train]\nvariant = merged\nbatch_size = 10\nepochs = 3\nlr = 0.2\ninterval = 2\n";
                f << "[adapter]\nkind = lowrank\nrank = 4\n";
            }
            auto sh = [&](const std::string& cmd) {
                const int rc = std::system(cmd.c_str());
                return rc == 0;
            };
            const std::string base = std::string("\"") + cli + "\"";
            ok &= sh(base + " train --config " + cfg.string() + " --out " + (work / "a").string() +
                     " > /dev/null");
            ok &= sh(base + " train --config " + cfg.string() + " --out " + (work / "b").string() +
                     " > /dev/null");
            ok &= slurp(work / "a" / "det.metrics.jsonl") == slurp(work / "b" / "det.metrics.jsonl");
            ok &= !slurp(work / "a" / "det.metrics.jsonl").empty();
            ok &= slurp(work / "a" / "det.meta.json") == slurp(work / "b" / "det.meta.json");
            ok &= slurp(work / "a" / "det.adapters.cola") == slurp(work / "b" / "det.adapters.cola");
            ok &= sh(base + " verify --seed 5 --json " + (work / "v1.json").string() + " > /dev/null");
            ok &= sh(base + " verify --seed 5 --json " + (work / "v2.json").string() + " > /dev/null");
            ok &= slurp(work / "v1.json") == slurp(work / "v2.json");
            ok &= !slurp(work / "v1.json").empty();
        } else {
            how = "in-process (CLI binary not advertised)";
            auto run_once = [&]() {
                auto data = synth_dataset(5, 80, 16, 3.0, 7300);
                auto [train, test] = split_dataset(data, 0.75);
                TrainOptions o;
                o.variant = Variant::Merged;
                o.batch_size = 10;
                o.epochs = 3;
                o.lr = 0.2;
                o.interval = 2;
                o.task_optim = sgd_spec();
                o.fit_optim = sgd_spec();
                o.seed = 7400;
                o.timing = false;
                o.adapter_kind = AdapterKind::LowRank;
                o.rank = 4;
                BaseModel m = frozen_mlp(7500);
                std::string lines;
                run_training(m, o, train, &test, [&](const MetricPoint& p) { lines += metric_json_line(p) + "\n"; });
                return lines;
            };
            const std::string a = run_once(), b = run_once();
            ok = !a.empty() && a == b;
            VerifyReport v1 = run_verify(5), v2 = run_verify(5);
            ok &= v1.json() == v2.json();
        }
        out.pass = ok;
        out.detail = ok ? ("metrics, metadata, checkpoint and verify report identical " + how)
                        : ("byte mismatch between reruns " + how);
        fs::remove_all(work);
    });
}

void run_mnist_criterion(bool mark_skip_as_77) {
    criterion(7, "from-scratch digit benchmark at 50 epochs", [&](Outcome& out) {
        if (!mnist_present()) {
            out.skipped = true;
            out.detail = "MNIST IDX files not found under '" + mnist_dir() +
                         "' (set COLA_MNIST_DIR or run tools/fetch_mnist.sh); criterion not evaluated";
            return;
        }
        const std::string dir = mnist_dir();
        DatasetHandle train = load_mnist_idx(dir + "/train-images-idx3-ubyte", dir + "/train-labels-idx1-ubyte");
        train.split = "train";
        DatasetHandle test = load_mnist_idx(dir + "/t10k-images-idx3-ubyte", dir + "/t10k-labels-idx1-ubyte");
        test.split = "test";

        struct RunDef {
            const char* label;
            Preset preset;
            Variant variant;
            AdapterKind kind;
            double lr;
        };
        const RunDef runs[] = {
            {"ft_linear", Preset::Linear, Variant::Ft, AdapterKind::Linear, 0.3},
            {"cola_linear", Preset::Linear, Variant::Merged, AdapterKind::Linear, 0.3},
            {"cola_lowrank", Preset::Linear, Variant::Merged, AdapterKind::LowRank, 0.3},
            {"mlp_cola_linear", Preset::Mlp, Variant::Merged, AdapterKind::Linear, 0.1},
            {"mlp_cola_lowrank", Preset::Mlp, Variant::Merged, AdapterKind::LowRank, 0.1},
        };
        double acc[5] = {0, 0, 0, 0, 0};
        double slowest = 0.0;
        std::ostringstream d;
        for (int i = 0; i < 5; ++i) {
            const auto t0 = std::chrono::steady_clock::now();
            BaseModel model = build_model(runs[i].preset, 42, Dtype::F32);
            TrainOptions o;
            o.variant = runs[i].variant;
            o.use_adapters = runs[i].variant != Variant::Ft;
            o.adapter_kind = runs[i].kind;
            o.rank = 8;
            o.batch_size = 32;
            o.epochs = 50;
            o.lr = runs[i].lr;
            o.schedule = LrSchedule::Cosine;
            o.task_optim = sgd_spec();
            o.fit_optim = sgd_spec();
            o.seed = 42;
            o.precision = Dtype::F32;
            o.eval_each_epoch = false;
            o.timing = false;
            TrainResult r = run_training(model, o, train, nullptr);
            const AdapterSet* set = r.adapters.empty() ? nullptr : &r.adapters[0];
            EvalResult ev = evaluate(r.model, set, test, /*merged=*/false);
            acc[i] = 100.0 * ev.accuracy;
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            slowest = std::max(slowest, secs);
            d << runs[i].label << "=" << acc[i] << " (" << static_cast<long>(secs) << "s) ";
        }
        const bool ft_ok = acc[0] >= 91.8;
        const bool close_ok = std::fabs(acc[1] - acc[0]) <= 0.5;
        const bool rank_ok = acc[2] <= acc[1];
        const bool gap_ok = acc[3] - acc[4] >= 1.0;
        const bool time_ok = slowest <= 15.0 * 60.0;
        out.pass = ft_ok && close_ok && rank_ok && gap_ok && time_ok;
        d << "| ft>=91.8:" << (ft_ok ? "y" : "N") << " |linear-ft|<=0.5:" << (close_ok ? "y" : "N")
          << " lowrank<=linear:" << (rank_ok ? "y" : "N") << " mlp gap>=1.0:" << (gap_ok ? "y" : "N")
          << " per-run<=15min:" << (time_ok ? "y" : "N");
        out.detail = d.str();
    });
    (void)mark_skip_as_77;
}

} // namespace

int main(int argc, char** argv) {
    bool skip_mnist = false, only_mnist = false;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--skip-mnist") skip_mnist = true;
        if (a == "--only-mnist") only_mnist = true;
    }

    if (only_mnist) {
        run_mnist_criterion(true);
    } else {
        run_core_criteria();
        if (!skip_mnist) run_mnist_criterion(false);
    }

    int failed = 0, skipped = 0;
    for (const auto& o : g_outcomes) {
        failed += (!o.pass && !o.skipped) ? 1 : 0;
        skipped += o.skipped ? 1 : 0;
    }
    std::cout << g_outcomes.size() - static_cast<std::size_t>(failed + skipped) << " passed, " << failed
              << " failed, " << skipped << " skipped" << std::endl;
    if (failed) return 1;
    if (only_mnist && skipped) return 77;
    return 0;
}
