#pragma once

#include <cstdint>
#include <vector>

#include "cola/tensor.hpp"

namespace cola {

// Handle to a value recorded on a tape.
struct Val {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Capture point for one fine-tuned layer: the layer's hidden input, its
// fine-tuned output, and the gradient of the loss with respect to that
// output (filled during backward).
struct TapPoint {
    int layer = -1;   // m
    Tensor input;     // x_m, set by the forward builder
    Tensor output;    // h^_m, copied when the tap is inserted
    Tensor grad;      // d loss / d h^_m
    bool grad_filled = false;
};

// Reverse-mode tape. Eager: each op computes its forward value when
// recorded. Single use: one backward per tape.
class Tape {
public:
    enum class Op : std::uint8_t {
        Leaf,
        MatmulNN,
        MatmulNT,
        Add,
        Relu,
        Scale,
        SoftmaxCE,
        MseHalf,
        Sum,
        GatherRows,
        ScatterAddRows,
        Tap,
    };

    // Leaves. `leaf` honors t.requires_grad; `constant` clears it.
    Val leaf(Tensor t);
    Val constant(Tensor t);

    // out = a[n,k] * b[k,p]
    Val matmul(Val a, Val b);
    // out = a[n,k] * b[p,k]^T   (row-major weight convention)
    Val matmul_nt(Val a, Val b);
    // out = a + alpha*b. Shapes must match exactly, or b may be a 1-D bias
    // row broadcast over the rows of 2-D a.
    Val add(Val a, Val b, double alpha = 1.0);
    Val relu(Val a);
    Val scale(Val a, double c);
    // Mean over rows of -log softmax(logits)[label]; scalar output.
    Val softmax_cross_entropy(Val logits, std::vector<int> labels);
    // (1 / (2 * n_records)) * sum((pred - target)^2), n_records = rows of pred.
    Val mse_half(Val pred, Val target);
    Val sum(Val a);
    Val gather_rows(Val a, std::vector<std::int64_t> idx);
    // out = base; out[idx[i], :] += rows[i, :]
    Val scatter_add_rows(Val base, Val rows, std::vector<std::int64_t> idx);
    // Identity pass-through that captures (value, gradient) for layer m.
    Val tap(Val a, int layer);

    const Tensor& value(Val v) const;

    // Seeds d(loss)/d(loss) = 1 and sweeps the tape once in reverse.
    // Gradients are produced for every requires_grad leaf and every tap.
    void backward(Val loss);
    bool backward_done() const { return backward_done_; }

    bool has_grad(Val v) const;
    const Tensor& grad(Val v) const;

    std::vector<TapPoint>& taps() { return taps_; }
    const std::vector<TapPoint>& taps() const { return taps_; }
    TapPoint* tap_for_layer(int layer);

    std::size_t num_nodes() const { return nodes_.size(); }

private:
    struct Node {
        Op op;
        int a = -1;
        int b = -1;
        double alpha = 1.0;
        std::vector<int> labels;
        std::vector<std::int64_t> idx;
        int tap_index = -1;
        bool requires_grad = false;
    };

    int push(Node n, Tensor value);
    void check_val(Val v) const;
    Tensor& grad_slot(int id);

    std::vector<Node> nodes_;
    std::vector<Tensor> values_;
    std::vector<Tensor> grads_; // parallel to nodes_; empty tensor = not allocated
    std::vector<TapPoint> taps_;
    bool backward_done_ = false;
};

} // namespace cola
