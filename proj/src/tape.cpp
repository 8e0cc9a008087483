#include "cola/tape.hpp"

#include <cmath>
#include <cstring>

#include "cola/dispatch.hpp"
#include "cola/kernels.hpp"

namespace cola {

void Tape::check_val(Val v) const {
    if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size())
        throw TapeError("value id " + std::to_string(v.id) + " is not on this tape");
}

int Tape::push(Node n, Tensor value) {
    nodes_.push_back(std::move(n));
    values_.push_back(std::move(value));
    grads_.emplace_back();
    return static_cast<int>(nodes_.size()) - 1;
}

Tensor& Tape::grad_slot(int id) {
    if (grads_[id].empty()) grads_[id] = Tensor::zeros(values_[id].shape(), values_[id].dtype());
    return grads_[id];
}

Val Tape::leaf(Tensor t) {
    t.check_finite("leaf");
    Node n{};
    n.op = Op::Leaf;
    n.requires_grad = t.requires_grad;
    return Val{push(std::move(n), std::move(t))};
}

Val Tape::constant(Tensor t) {
    t.requires_grad = false;
    return leaf(std::move(t));
}

static void require_same_dtype(const Tensor& a, const Tensor& b, const char* op) {
    if (a.dtype() != b.dtype())
        throw ShapeError(std::string(op) + ": mixed dtypes (" + dtype_name(a.dtype()) + " vs " +
                         dtype_name(b.dtype()) + ")");
}

Val Tape::matmul(Val a, Val b) {
    check_val(a);
    check_val(b);
    const Tensor& ta = values_[a.id];
    const Tensor& tb = values_[b.id];
    require_same_dtype(ta, tb, "matmul");
    if (ta.cols() != tb.rows())
        throw ShapeError("matmul: inner dimensions disagree " + ta.shape_str() + " * " + tb.shape_str());
    Tensor out({ta.rows(), tb.cols()}, ta.dtype());
    with_dtype(ta.dtype(), [&](auto z) {
        using T = decltype(z);
        kern::mm_nn_acc<T>(data_of<T>(ta).data(), data_of<T>(tb).data(), data_of<T>(out).data(),
                           ta.rows(), ta.cols(), tb.cols());
    });
    out.check_finite("matmul");
    Node n{};
    n.op = Op::MatmulNN;
    n.a = a.id;
    n.b = b.id;
    return Val{push(std::move(n), std::move(out))};
}

Val Tape::matmul_nt(Val a, Val b) {
    check_val(a);
    check_val(b);
    const Tensor& ta = values_[a.id];
    const Tensor& tb = values_[b.id];
    require_same_dtype(ta, tb, "matmul_nt");
    if (ta.cols() != tb.cols())
        throw ShapeError("matmul_nt: inner dimensions disagree " + ta.shape_str() + " * " + tb.shape_str() + "^T");
    Tensor out({ta.rows(), tb.rows()}, ta.dtype());
    with_dtype(ta.dtype(), [&](auto z) {
        using T = decltype(z);
        kern::mm_nt_acc<T>(data_of<T>(ta).data(), data_of<T>(tb).data(), data_of<T>(out).data(),
                           ta.rows(), ta.cols(), tb.rows());
    });
    out.check_finite("matmul_nt");
    Node n{};
    n.op = Op::MatmulNT;
    n.a = a.id;
    n.b = b.id;
    return Val{push(std::move(n), std::move(out))};
}

static bool is_bias_broadcast(const Tensor& a, const Tensor& b) {
    return a.ndim() == 2 && b.ndim() == 1 && b.size() == a.cols();
}

Val Tape::add(Val a, Val b, double alpha) {
    check_val(a);
    check_val(b);
    const Tensor& ta = values_[a.id];
    const Tensor& tb = values_[b.id];
    require_same_dtype(ta, tb, "add");
    const bool bias = is_bias_broadcast(ta, tb);
    if (!bias && !ta.same_shape(tb))
        throw ShapeError("add: incompatible shapes " + ta.shape_str() + " + " + tb.shape_str());
    Tensor out = ta;
    out.requires_grad = false;
    with_dtype(ta.dtype(), [&](auto z) {
        using T = decltype(z);
        auto po = data_of<T>(out);
        auto pb = data_of<T>(tb);
        const T al = static_cast<T>(alpha);
        if (bias) {
            const std::size_t n = ta.rows(), d = ta.cols();
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < d; ++j) po[i * d + j] += al * pb[j];
        } else {
            kern::axpy<T>(pb.data(), po.data(), al, po.size());
        }
    });
    out.check_finite("add");
    Node n{};
    n.op = Op::Add;
    n.a = a.id;
    n.b = b.id;
    n.alpha = alpha;
    return Val{push(std::move(n), std::move(out))};
}

Val Tape::relu(Val a) {
    check_val(a);
    const Tensor& ta = values_[a.id];
    Tensor out(ta.shape(), ta.dtype());
    with_dtype(ta.dtype(), [&](auto z) {
        using T = decltype(z);
        auto pi = data_of<T>(ta);
        auto po = data_of<T>(out);
        for (std::size_t i = 0; i < pi.size(); ++i) po[i] = pi[i] > T(0) ? pi[i] : T(0);
    });
    Node n{};
    n.op = Op::Relu;
    n.a = a.id;
    return Val{push(std::move(n), std::move(out))};
}

Val Tape::scale(Val a, double c) {
    check_val(a);
    const Tensor& ta = values_[a.id];
    Tensor out(ta.shape(), ta.dtype());
    with_dtype(ta.dtype(), [&](auto z) {
        using T = decltype(z);
        auto pi = data_of<T>(ta);
        auto po = data_of<T>(out);
        const T cc = static_cast<T>(c);
        for (std::size_t i = 0; i < pi.size(); ++i) po[i] = cc * pi[i];
    });
    out.check_finite("scale");
    Node n{};
    n.op = Op::Scale;
    n.a = a.id;
    n.alpha = c;
    return Val{push(std::move(n), std::move(out))};
}

Val Tape::softmax_cross_entropy(Val logits, std::vector<int> labels) {
    check_val(logits);
    const Tensor& tl = values_[logits.id];
    const std::size_t n = tl.rows(), c = tl.cols();
    if (labels.size() != n)
        throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(n) + " rows");
    for (int y : labels)
        if (y < 0 || static_cast<std::size_t>(y) >= c)
            throw ShapeError("softmax_cross_entropy: label " + std::to_string(y) + " out of range [0," +
                             std::to_string(c) + ")");
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double m = tl.at(i * c);
        for (std::size_t j = 1; j < c; ++j) m = std::max(m, tl.at(i * c + j));
        double se = 0.0;
        for (std::size_t j = 0; j < c; ++j) se += std::exp(tl.at(i * c + j) - m);
        total += std::log(se) - (tl.at(i * c + static_cast<std::size_t>(labels[i])) - m);
    }
    Tensor out = Tensor::full({1}, total / static_cast<double>(n), tl.dtype());
    out.check_finite("softmax_cross_entropy");
    Node n2{};
    n2.op = Op::SoftmaxCE;
    n2.a = logits.id;
    n2.labels = std::move(labels);
    return Val{push(std::move(n2), std::move(out))};
}

Val Tape::mse_half(Val pred, Val target) {
    check_val(pred);
    check_val(target);
    const Tensor& tp = values_[pred.id];
    const Tensor& tt = values_[target.id];
    require_same_dtype(tp, tt, "mse_half");
    if (!tp.same_shape(tt))
        throw ShapeError("mse_half: shape mismatch " + tp.shape_str() + " vs " + tt.shape_str());
    const std::size_t records = tp.ndim() >= 2 ? tp.shape()[0] : 1;
    double total = 0.0;
    for (std::size_t i = 0; i < tp.size(); ++i) {
        const double d = tp.at(i) - tt.at(i);
        total += d * d;
    }
    Tensor out = Tensor::full({1}, total / (2.0 * static_cast<double>(records)), tp.dtype());
    out.check_finite("mse_half");
    Node n{};
    n.op = Op::MseHalf;
    n.a = pred.id;
    n.b = target.id;
    return Val{push(std::move(n), std::move(out))};
}

Val Tape::sum(Val a) {
    check_val(a);
    const Tensor& ta = values_[a.id];
    Tensor out = Tensor::full({1}, ta.sum(), ta.dtype());
    out.check_finite("sum");
    Node n{};
    n.op = Op::Sum;
    n.a = a.id;
    return Val{push(std::move(n), std::move(out))};
}

Val Tape::gather_rows(Val a, std::vector<std::int64_t> idx) {
    check_val(a);
    const Tensor& ta = values_[a.id];
    Tensor out = ta.take_rows(idx);
    Node n{};
    n.op = Op::GatherRows;
    n.a = a.id;
    n.idx = std::move(idx);
    return Val{push(std::move(n), std::move(out))};
}

Val Tape::scatter_add_rows(Val base, Val rows, std::vector<std::int64_t> idx) {
    check_val(base);
    check_val(rows);
    const Tensor& tb = values_[base.id];
    const Tensor& tr = values_[rows.id];
    require_same_dtype(tb, tr, "scatter_add_rows");
    if (tb.cols() != tr.cols())
        throw ShapeError("scatter_add_rows: width mismatch " + tb.shape_str() + " vs " + tr.shape_str());
    if (idx.size() != tr.rows()) throw ShapeError("scatter_add_rows: index count != row count");
    Tensor out = tb;
    out.requires_grad = false;
    const std::size_t d = tb.cols();
    with_dtype(tb.dtype(), [&](auto z) {
        using T = decltype(z);
        auto po = data_of<T>(out);
        auto pr = data_of<T>(tr);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            if (idx[i] < 0 || static_cast<std::size_t>(idx[i]) >= tb.rows())
                throw ShapeError("scatter_add_rows: row index out of range");
            for (std::size_t j = 0; j < d; ++j)
                po[static_cast<std::size_t>(idx[i]) * d + j] += pr[i * d + j];
        }
    });
    out.check_finite("scatter_add_rows");
    Node n{};
    n.op = Op::ScatterAddRows;
    n.a = base.id;
    n.b = rows.id;
    n.idx = std::move(idx);
    return Val{push(std::move(n), std::move(out))};
}

Val Tape::tap(Val a, int layer) {
    check_val(a);
    TapPoint tp;
    tp.layer = layer;
    tp.output = values_[a.id];
    tp.output.requires_grad = false;
    taps_.push_back(std::move(tp));
    Node n{};
    n.op = Op::Tap;
    n.a = a.id;
    n.tap_index = static_cast<int>(taps_.size()) - 1;
    Tensor out = values_[a.id];
    out.requires_grad = false;
    return Val{push(std::move(n), std::move(out))};
}

const Tensor& Tape::value(Val v) const {
    check_val(v);
    return values_[v.id];
}

bool Tape::has_grad(Val v) const {
    check_val(v);
    return !grads_[v.id].empty();
}

const Tensor& Tape::grad(Val v) const {
    check_val(v);
    if (grads_[v.id].empty()) throw TapeError("no gradient recorded for value id " + std::to_string(v.id));
    return grads_[v.id];
}

TapPoint* Tape::tap_for_layer(int layer) {
    for (auto& t : taps_)
        if (t.layer == layer) return &t;
    return nullptr;
}

void Tape::backward(Val loss) {
    check_val(loss);
    if (backward_done_) throw TapeError("backward already ran on this tape (tapes are single-use)");
    if (values_[loss.id].size() != 1)
        throw TapeError("backward: loss is not scalar, shape " + values_[loss.id].shape_str());
    backward_done_ = true;

    // A value's gradient is worth computing only if a gradient sink
    // (requires_grad leaf or tap) sits somewhere below it.
    std::vector<char> sink(nodes_.size(), 0);
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const Node& n = nodes_[i];
        char s = 0;
        if (n.op == Op::Leaf)
            s = n.requires_grad ? 1 : 0;
        else if (n.op == Op::Tap)
            s = 1;
        if (!s && n.a >= 0) s = sink[n.a];
        if (!s && n.b >= 0) s = sink[n.b];
        sink[i] = s;
    }

    if (!sink[loss.id]) return; // nothing to differentiate
    grad_slot(loss.id).set(0, 1.0);

    for (int i = loss.id; i >= 0; --i) {
        if (grads_[i].empty()) continue;
        const Node& n = nodes_[i];
        const Tensor& g = grads_[i];
        g.check_finite("backward");
        switch (n.op) {
        case Op::Leaf:
            break;
        case Op::MatmulNN: {
            const Tensor& ta = values_[n.a];
            const Tensor& tb = values_[n.b];
            with_dtype(ta.dtype(), [&](auto z) {
                using T = decltype(z);
                if (sink[n.a])
                    kern::mm_nt_acc<T>(data_of<T>(g).data(), data_of<T>(tb).data(),
                                       data_of<T>(grad_slot(n.a)).data(), ta.rows(), tb.cols(), ta.cols());
                if (sink[n.b])
                    kern::mm_tn_acc<T>(data_of<T>(ta).data(), data_of<T>(g).data(),
                                       data_of<T>(grad_slot(n.b)).data(), ta.rows(), ta.cols(), tb.cols());
            });
            break;
        }
        case Op::MatmulNT: {
            const Tensor& ta = values_[n.a];
            const Tensor& tb = values_[n.b];
            with_dtype(ta.dtype(), [&](auto z) {
                using T = decltype(z);
                if (sink[n.a])
                    kern::mm_nn_acc<T>(data_of<T>(g).data(), data_of<T>(tb).data(),
                                       data_of<T>(grad_slot(n.a)).data(), ta.rows(), tb.rows(), ta.cols());
                if (sink[n.b])
                    kern::mm_tn_acc<T>(data_of<T>(g).data(), data_of<T>(ta).data(),
                                       data_of<T>(grad_slot(n.b)).data(), ta.rows(), tb.rows(), ta.cols());
            });
            break;
        }
        case Op::Add: {
            const Tensor& ta = values_[n.a];
            const Tensor& tb = values_[n.b];
            with_dtype(ta.dtype(), [&](auto z) {
                using T = decltype(z);
                auto pg = data_of<T>(g);
                if (sink[n.a]) kern::axpy<T>(pg.data(), data_of<T>(grad_slot(n.a)).data(), T(1), pg.size());
                if (sink[n.b]) {
                    auto pb = data_of<T>(grad_slot(n.b));
                    const T al = static_cast<T>(n.alpha);
                    if (is_bias_broadcast(ta, tb)) {
                        const std::size_t rows = ta.rows(), d = ta.cols();
                        for (std::size_t r = 0; r < rows; ++r)
                            for (std::size_t j = 0; j < d; ++j) pb[j] += al * pg[r * d + j];
                    } else {
                        kern::axpy<T>(pg.data(), pb.data(), al, pg.size());
                    }
                }
            });
            break;
        }
        case Op::Relu: {
            if (!sink[n.a]) break;
            const Tensor& ta = values_[n.a];
            with_dtype(ta.dtype(), [&](auto z) {
                using T = decltype(z);
                auto pa = data_of<T>(ta);
                auto pg = data_of<T>(g);
                auto pd = data_of<T>(grad_slot(n.a));
                // Subgradient 0 at exactly 0.
                for (std::size_t e = 0; e < pa.size(); ++e)
                    if (pa[e] > T(0)) pd[e] += pg[e];
            });
            break;
        }
        case Op::Scale: {
            if (!sink[n.a]) break;
            with_dtype(g.dtype(), [&](auto z) {
                using T = decltype(z);
                auto pg = data_of<T>(g);
                kern::axpy<T>(pg.data(), data_of<T>(grad_slot(n.a)).data(), static_cast<T>(n.alpha), pg.size());
            });
            break;
        }
        case Op::SoftmaxCE: {
            if (!sink[n.a]) break;
            const Tensor& tl = values_[n.a];
            const std::size_t rows = tl.rows(), c = tl.cols();
            const double gs = g.at(0);
            Tensor& d = grad_slot(n.a);
            for (std::size_t r = 0; r < rows; ++r) {
                double m = tl.at(r * c);
                for (std::size_t j = 1; j < c; ++j) m = std::max(m, tl.at(r * c + j));
                double se = 0.0;
                for (std::size_t j = 0; j < c; ++j) se += std::exp(tl.at(r * c + j) - m);
                for (std::size_t j = 0; j < c; ++j) {
                    const double p = std::exp(tl.at(r * c + j) - m) / se;
                    const double onehot = (static_cast<std::size_t>(n.labels[r]) == j) ? 1.0 : 0.0;
                    d.set(r * c + j, d.at(r * c + j) + gs * (p - onehot) / static_cast<double>(rows));
                }
            }
            break;
        }
        case Op::MseHalf: {
            const Tensor& tp = values_[n.a];
            const Tensor& tt = values_[n.b];
            const std::size_t records = tp.ndim() >= 2 ? tp.shape()[0] : 1;
            const double gs = g.at(0) / static_cast<double>(records);
            if (sink[n.a]) {
                Tensor& d = grad_slot(n.a);
                for (std::size_t e = 0; e < tp.size(); ++e) d.set(e, d.at(e) + gs * (tp.at(e) - tt.at(e)));
            }
            if (sink[n.b]) {
                Tensor& d = grad_slot(n.b);
                for (std::size_t e = 0; e < tp.size(); ++e) d.set(e, d.at(e) - gs * (tp.at(e) - tt.at(e)));
            }
            break;
        }
        case Op::Sum: {
            if (!sink[n.a]) break;
            const double gs = g.at(0);
            Tensor& d = grad_slot(n.a);
            for (std::size_t e = 0; e < d.size(); ++e) d.set(e, d.at(e) + gs);
            break;
        }
        case Op::GatherRows: {
            if (!sink[n.a]) break;
            Tensor& d = grad_slot(n.a);
            const std::size_t w = d.cols();
            with_dtype(d.dtype(), [&](auto z) {
                using T = decltype(z);
                auto pd = data_of<T>(d);
                auto pg = data_of<T>(g);
                for (std::size_t r = 0; r < n.idx.size(); ++r)
                    for (std::size_t j = 0; j < w; ++j)
                        pd[static_cast<std::size_t>(n.idx[r]) * w + j] += pg[r * w + j];
            });
            break;
        }
        case Op::ScatterAddRows: {
            with_dtype(g.dtype(), [&](auto z) {
                using T = decltype(z);
                auto pg = data_of<T>(g);
                if (sink[n.a]) kern::axpy<T>(pg.data(), data_of<T>(grad_slot(n.a)).data(), T(1), pg.size());
                if (sink[n.b]) {
                    Tensor& d = grad_slot(n.b);
                    const std::size_t w = d.cols();
                    auto pd = data_of<T>(d);
                    for (std::size_t r = 0; r < n.idx.size(); ++r)
                        for (std::size_t j = 0; j < w; ++j)
                            pd[r * w + j] += pg[static_cast<std::size_t>(n.idx[r]) * w + j];
                }
            });
            break;
        }
        case Op::Tap: {
            TapPoint& tp = taps_[static_cast<std::size_t>(n.tap_index)];
            tp.grad = g;
            tp.grad_filled = true;
            if (sink[n.a]) {
                with_dtype(g.dtype(), [&](auto z) {
                    using T = decltype(z);
                    auto pg = data_of<T>(g);
                    kern::axpy<T>(pg.data(), data_of<T>(grad_slot(n.a)).data(), T(1), pg.size());
                });
            }
            break;
        }
        }
    }
}

} // namespace cola
