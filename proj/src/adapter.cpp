#include "cola/adapter.hpp"

#include <algorithm>
#include <cmath>

#include "cola/dispatch.hpp"
#include "cola/kernels.hpp"
#include "cola/rng.hpp"

namespace cola {

AdapterKind adapter_kind_from_name(const std::string& name) {
    if (name == "lowrank" || name == "low_rank" || name == "lora") return AdapterKind::LowRank;
    if (name == "linear") return AdapterKind::Linear;
    if (name == "mlp") return AdapterKind::Mlp;
    throw ConfigError("unknown adapter kind '" + name + "'");
}

const char* adapter_kind_name(AdapterKind k) {
    switch (k) {
    case AdapterKind::LowRank: return "lowrank";
    case AdapterKind::Linear: return "linear";
    case AdapterKind::Mlp: return "mlp";
    }
    return "?";
}

void AdapterSpec::validate() const {
    if (in_dim <= 0 || out_dim <= 0)
        throw ConfigError("adapter dims must be positive, got " + std::to_string(in_dim) + "->" +
                          std::to_string(out_dim));
    if (kind == AdapterKind::LowRank) {
        if (rank < 1) throw ConfigError("low-rank adapter needs rank >= 1");
        if (rank > std::min(in_dim, out_dim))
            throw ConfigError("rank " + std::to_string(rank) + " exceeds min(in,out)=" +
                              std::to_string(std::min(in_dim, out_dim)));
    }
    if (kind == AdapterKind::Mlp && hidden < 1) throw ConfigError("mlp adapter needs hidden >= 1");
}

std::size_t AdapterSpec::param_count() const {
    switch (kind) {
    case AdapterKind::LowRank:
        return static_cast<std::size_t>(rank) * in_dim + static_cast<std::size_t>(out_dim) * rank;
    case AdapterKind::Linear:
        return static_cast<std::size_t>(out_dim) * in_dim;
    case AdapterKind::Mlp:
        return static_cast<std::size_t>(hidden) * in_dim + hidden +
               static_cast<std::size_t>(out_dim) * hidden + out_dim;
    }
    return 0;
}

Adapter Adapter::init(const AdapterSpec& spec, std::uint64_t seed, Dtype dt) {
    spec.validate();
    Adapter a;
    a.spec_ = spec;
    Rng rng = Rng(seed).fork(0xada47e5ULL);
    switch (spec.kind) {
    case AdapterKind::LowRank: {
        // A seeded gaussian N(0, 1/r), B zero: the product starts at exactly 0.
        Tensor A({static_cast<std::size_t>(spec.rank), static_cast<std::size_t>(spec.in_dim)}, dt);
        const double sd = 1.0 / std::sqrt(static_cast<double>(spec.rank));
        for (std::size_t i = 0; i < A.size(); ++i) A.set(i, rng.gaussian(0.0, sd));
        Tensor B({static_cast<std::size_t>(spec.out_dim), static_cast<std::size_t>(spec.rank)}, dt);
        a.params_ = {std::move(A), std::move(B)};
        a.names_ = {"A", "B"};
        break;
    }
    case AdapterKind::Linear: {
        Tensor W({static_cast<std::size_t>(spec.out_dim), static_cast<std::size_t>(spec.in_dim)}, dt);
        a.params_ = {std::move(W)};
        a.names_ = {"W"};
        break;
    }
    case AdapterKind::Mlp: {
        // Hidden layer fan-in gaussian, output layer zero: zero initial delta.
        Tensor W1({static_cast<std::size_t>(spec.hidden), static_cast<std::size_t>(spec.in_dim)}, dt);
        const double sd = 1.0 / std::sqrt(static_cast<double>(spec.in_dim));
        for (std::size_t i = 0; i < W1.size(); ++i) W1.set(i, rng.gaussian(0.0, sd));
        Tensor b1({static_cast<std::size_t>(spec.hidden)}, dt);
        Tensor W2({static_cast<std::size_t>(spec.out_dim), static_cast<std::size_t>(spec.hidden)}, dt);
        Tensor b2({static_cast<std::size_t>(spec.out_dim)}, dt);
        a.params_ = {std::move(W1), std::move(b1), std::move(W2), std::move(b2)};
        a.names_ = {"W1", "b1", "W2", "b2"};
        break;
    }
    }
    return a;
}

Adapter Adapter::from_params(const AdapterSpec& spec, std::vector<Tensor> params) {
    spec.validate();
    Adapter a;
    a.spec_ = spec;
    a.params_ = std::move(params);
    switch (spec.kind) {
    case AdapterKind::LowRank: a.names_ = {"A", "B"}; break;
    case AdapterKind::Linear: a.names_ = {"W"}; break;
    case AdapterKind::Mlp: a.names_ = {"W1", "b1", "W2", "b2"}; break;
    }
    if (a.params_.size() != a.names_.size())
        throw FormatError("adapter parameter count does not match its kind");
    return a;
}

Dtype Adapter::dtype() const { return params_.empty() ? Dtype::F64 : params_[0].dtype(); }

// Plain (tape-free) math, op-for-op identical to build_delta_graph so that a
// recomputed delta is bit-equal to the recorded one.
Tensor Adapter::apply(const Tensor& x) const {
    if (x.cols() != static_cast<std::size_t>(spec_.in_dim))
        throw ShapeError("adapter apply: input width " + std::to_string(x.cols()) + " != " +
                         std::to_string(spec_.in_dim));
    const std::size_t n = x.rows();
    auto mm_nt = [](const Tensor& a, const Tensor& w) {
        Tensor out({a.rows(), w.rows()}, a.dtype());
        with_dtype(a.dtype(), [&](auto z) {
            using T = decltype(z);
            kern::mm_nt_acc<T>(data_of<T>(a).data(), data_of<T>(w).data(), data_of<T>(out).data(),
                               a.rows(), a.cols(), w.rows());
        });
        return out;
    };
    auto add_bias = [](Tensor& t, const Tensor& b) {
        const std::size_t rows = t.rows(), d = t.cols();
        with_dtype(t.dtype(), [&](auto z) {
            using T = decltype(z);
            auto pt = data_of<T>(t);
            auto pb = data_of<T>(b);
            for (std::size_t i = 0; i < rows; ++i)
                for (std::size_t j = 0; j < d; ++j) pt[i * d + j] += pb[j];
        });
    };
    Tensor y;
    switch (spec_.kind) {
    case AdapterKind::LowRank: {
        Tensor u = mm_nt(x, params_[0]); // [n x r]
        y = mm_nt(u, params_[1]);        // [n x out]
        break;
    }
    case AdapterKind::Linear:
        y = mm_nt(x, params_[0]);
        break;
    case AdapterKind::Mlp: {
        Tensor h = mm_nt(x, params_[0]);
        add_bias(h, params_[1]);
        with_dtype(h.dtype(), [&](auto z) {
            using T = decltype(z);
            auto p = data_of<T>(h);
            for (std::size_t i = 0; i < p.size(); ++i) p[i] = p[i] > T(0) ? p[i] : T(0);
        });
        y = mm_nt(h, params_[2]);
        add_bias(y, params_[3]);
        break;
    }
    }
    with_dtype(y.dtype(), [&](auto z) {
        using T = decltype(z);
        auto p = data_of<T>(y);
        const T al = static_cast<T>(spec_.alpha);
        for (std::size_t i = 0; i < p.size(); ++i) p[i] = al * p[i];
    });
    (void)n;
    return y;
}

Tensor Adapter::dense() const {
    switch (spec_.kind) {
    case AdapterKind::LowRank: {
        const Tensor& A = params_[0]; // [r x in]
        const Tensor& B = params_[1]; // [out x r]
        Tensor out({B.rows(), A.cols()}, A.dtype());
        with_dtype(A.dtype(), [&](auto z) {
            using T = decltype(z);
            kern::mm_nn_acc<T>(data_of<T>(B).data(), data_of<T>(A).data(), data_of<T>(out).data(),
                               B.rows(), B.cols(), A.cols());
        });
        return out;
    }
    case AdapterKind::Linear:
        return params_[0];
    case AdapterKind::Mlp:
        throw NotMergeableError("mlp adapter has no dense linear form");
    }
    throw NotMergeableError("unknown adapter kind");
}

Tensor Adapter::merge_into(const Tensor& theta_w) {
    if (!mergeable())
        throw NotMergeableError("merge requires a linear adapter; '" +
                                std::string(adapter_kind_name(spec_.kind)) + "' is not");
    if (merged_) throw Error("adapter is already merged");
    Tensor d = dense();
    if (!d.same_shape(theta_w))
        throw ShapeError("merge: adapter dense form " + d.shape_str() + " vs layer weight " + theta_w.shape_str());
    Tensor out = theta_w;
    with_dtype(out.dtype(), [&](auto z) {
        using T = decltype(z);
        kern::axpy<T>(data_of<T>(d).data(), data_of<T>(out).data(), static_cast<T>(spec_.alpha), out.size());
    });
    merged_ = true;
    return out;
}

Tensor Adapter::unmerge_from(const Tensor& theta_hat) {
    if (!merged_) throw Error("unmerge called on an adapter that is not merged");
    Tensor d = dense();
    Tensor out = theta_hat;
    with_dtype(out.dtype(), [&](auto z) {
        using T = decltype(z);
        kern::axpy<T>(data_of<T>(d).data(), data_of<T>(out).data(), static_cast<T>(-spec_.alpha), out.size());
    });
    merged_ = false;
    return out;
}

Val build_delta_graph(Tape& tape, const Adapter& adapter, Val x, bool params_require_grad,
                      AdapterGraph* refs) {
    const AdapterSpec& spec = adapter.spec();
    std::vector<Val> pv(adapter.num_params());
    for (std::size_t i = 0; i < adapter.num_params(); ++i) {
        Tensor t = adapter.param(i);
        t.requires_grad = params_require_grad;
        pv[i] = tape.leaf(std::move(t));
    }
    Val y;
    switch (spec.kind) {
    case AdapterKind::LowRank:
        y = tape.matmul_nt(tape.matmul_nt(x, pv[0]), pv[1]);
        break;
    case AdapterKind::Linear:
        y = tape.matmul_nt(x, pv[0]);
        break;
    case AdapterKind::Mlp: {
        Val h = tape.relu(tape.add(tape.matmul_nt(x, pv[0]), pv[1]));
        y = tape.add(tape.matmul_nt(h, pv[2]), pv[3]);
        break;
    }
    }
    y = tape.scale(y, spec.alpha);
    if (refs) refs->params = std::move(pv);
    return y;
}

double fit_gradient(const Adapter& adapter, const Tensor& x, const Tensor& grad_rows,
                    std::vector<Tensor>& out_grads) {
    if (x.rows() == 0) throw Error("fit: empty record batch");
    if (x.cols() != static_cast<std::size_t>(adapter.spec().in_dim) ||
        grad_rows.cols() != static_cast<std::size_t>(adapter.spec().out_dim) || x.rows() != grad_rows.rows())
        throw ShapeError("fit: record shapes " + x.shape_str() + "/" + grad_rows.shape_str() +
                         " do not match adapter " + std::to_string(adapter.spec().in_dim) + "->" +
                         std::to_string(adapter.spec().out_dim));

    Tape tape;
    Val xin = tape.constant(x);
    AdapterGraph refs;
    Val pred = build_delta_graph(tape, adapter, xin, /*params_require_grad=*/true, &refs);
    // Fixed target (delta_h^t - grad): delta_h^t is the freshly computed
    // prediction, detached from the graph at the current parameters.
    Tensor target = tape.value(pred);
    with_dtype(target.dtype(), [&](auto z) {
        using T = decltype(z);
        auto pt = data_of<T>(target);
        auto pg = data_of<T>(grad_rows);
        for (std::size_t i = 0; i < pt.size(); ++i) pt[i] -= pg[i];
    });
    Val loss = tape.mse_half(pred, tape.constant(std::move(target)));
    tape.backward(loss);

    out_grads.clear();
    for (Val p : refs.params) {
        if (tape.has_grad(p))
            out_grads.push_back(tape.grad(p));
        else
            out_grads.push_back(Tensor::zeros(tape.value(p).shape(), tape.value(p).dtype()));
    }
    return tape.value(loss).at(0);
}

double fit_step(Adapter& adapter, const Tensor& x, const Tensor& grad_rows, const OptimSpec& spec,
                OptimState& state, double lr) {
    std::vector<Tensor> grads;
    const double loss = fit_gradient(adapter, x, grad_rows, grads);
    std::vector<Tensor*> params;
    std::vector<const Tensor*> gptrs;
    for (std::size_t i = 0; i < adapter.num_params(); ++i) {
        params.push_back(&adapter.param(i));
        gptrs.push_back(&grads[i]);
    }
    optim_step(spec, state, params, gptrs, lr);
    return loss;
}

} // namespace cola
