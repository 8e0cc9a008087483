#include "cola/model.hpp"

#include <cmath>

#include "cola/dispatch.hpp"
#include "cola/hash.hpp"
#include "cola/kernels.hpp"
#include "cola/rng.hpp"

namespace cola {

Preset preset_from_name(const std::string& name) {
    if (name == "linear") return Preset::Linear;
    if (name == "mlp") return Preset::Mlp;
    throw ConfigError("unknown model preset '" + name + "'");
}

int BaseModel::in_dim() const { return layers.empty() ? 0 : layers.front().in_dim; }
int BaseModel::out_dim() const { return layers.empty() ? 0 : layers.back().out_dim; }

int BaseModel::num_tunable() const {
    int m = 0;
    for (const auto& l : layers) m += l.fine_tunable ? 1 : 0;
    return m;
}

std::vector<int> BaseModel::tunable_slots() const {
    std::vector<int> out;
    int slot = 0;
    for (const auto& l : layers) {
        if (l.kind == LayerKind::Affine) {
            if (l.fine_tunable) out.push_back(slot);
            ++slot;
        }
    }
    return out;
}

int BaseModel::tunable_out_dim(int m) const {
    const auto slots = tunable_slots();
    return static_cast<int>(weights[static_cast<std::size_t>(slots.at(static_cast<std::size_t>(m)))].rows());
}

int BaseModel::tunable_in_dim(int m) const {
    const auto slots = tunable_slots();
    return static_cast<int>(weights[static_cast<std::size_t>(slots.at(static_cast<std::size_t>(m)))].cols());
}

std::size_t BaseModel::param_count() const {
    std::size_t n = 0;
    for (const auto& w : weights) n += w.size();
    for (const auto& b : biases) n += b.size();
    return n;
}

std::string BaseModel::theta_hash() const {
    Sha256 h;
    for (const auto& w : weights) h.update(w.bytes());
    for (const auto& b : biases) h.update(b.bytes());
    const auto d = h.digest();
    static const char* k = "0123456789abcdef";
    std::string out;
    for (std::uint8_t b : d) {
        out.push_back(k[b >> 4]);
        out.push_back(k[b & 0xf]);
    }
    return out;
}

static void validate_layers(const std::vector<LayerSpec>& specs) {
    if (specs.empty()) throw ConfigError("model needs at least one layer");
    int cur = specs.front().in_dim;
    for (const auto& l : specs) {
        if (l.in_dim <= 0 || l.out_dim <= 0) throw ConfigError("layer dims must be positive");
        if (l.kind == LayerKind::Relu) {
            if (l.in_dim != l.out_dim) throw ConfigError("activation layer must preserve width");
            if (l.fine_tunable) throw ConfigError("activation layers are never fine-tunable");
        }
        if (l.in_dim != cur) throw ConfigError("layer input width does not chain");
        cur = l.out_dim;
    }
}

BaseModel build_model(std::vector<LayerSpec> specs, std::uint64_t seed, Dtype dt) {
    validate_layers(specs);
    BaseModel model;
    model.layers = std::move(specs);
    model.dtype = dt;
    Rng root(seed);
    int slot = 0;
    for (const auto& l : model.layers) {
        if (l.kind != LayerKind::Affine) continue;
        Rng rng = root.fork(static_cast<std::uint64_t>(slot));
        Tensor w({static_cast<std::size_t>(l.out_dim), static_cast<std::size_t>(l.in_dim)}, dt);
        const double bound = 1.0 / std::sqrt(static_cast<double>(l.in_dim));
        for (std::size_t i = 0; i < w.size(); ++i) w.set(i, rng.uniform(-bound, bound));
        model.weights.push_back(std::move(w));
        model.biases.push_back(Tensor::zeros({static_cast<std::size_t>(l.out_dim)}, dt));
        ++slot;
    }
    return model;
}

BaseModel build_model(Preset preset, std::uint64_t seed, Dtype dt, int mlp_hidden) {
    std::vector<LayerSpec> specs;
    if (preset == Preset::Linear) {
        specs.push_back({LayerKind::Affine, 784, 10, true});
    } else {
        const int h = mlp_hidden;
        specs.push_back({LayerKind::Affine, 784, h, true});
        specs.push_back({LayerKind::Relu, h, h, false});
        specs.push_back({LayerKind::Affine, h, h, true});
        specs.push_back({LayerKind::Relu, h, h, false});
        specs.push_back({LayerKind::Affine, h, 10, true});
    }
    return build_model(std::move(specs), seed, dt);
}

ForwardGraph forward_graph(Tape& tape, const BaseModel& model, const Tensor& batch,
                           bool theta_requires_grad, bool capture_taps, const DeltaBuilder& delta) {
    if (batch.cols() != static_cast<std::size_t>(model.in_dim()))
        throw ShapeError("forward: batch width " + std::to_string(batch.cols()) + " != model input " +
                         std::to_string(model.in_dim()));
    if (batch.dtype() != model.dtype) throw ShapeError("forward: batch dtype differs from model dtype");
    if (theta_requires_grad && model.frozen)
        throw Error("theta gradients requested for a frozen model");

    ForwardGraph out;
    Val x = tape.constant(batch);
    int slot = 0, m = 0;
    for (const auto& l : model.layers) {
        if (l.kind == LayerKind::Relu) {
            x = tape.relu(x);
            continue;
        }
        Tensor w = model.weights[static_cast<std::size_t>(slot)];
        Tensor b = model.biases[static_cast<std::size_t>(slot)];
        w.requires_grad = theta_requires_grad;
        b.requires_grad = theta_requires_grad;
        Val wv = tape.leaf(std::move(w));
        Val bv = tape.leaf(std::move(b));
        out.weight_vals.push_back(wv);
        out.bias_vals.push_back(bv);
        Val hidden_input = x;
        Val h = tape.add(tape.matmul_nt(x, wv), bv);
        if (l.fine_tunable) {
            std::optional<Val> dh = delta ? delta(tape, m, hidden_input) : std::nullopt;
            Val hhat = dh ? tape.add(h, *dh) : h;
            if (capture_taps) {
                Val tapped = tape.tap(hhat, m);
                tape.taps().back().input = tape.value(hidden_input);
                x = tapped;
            } else {
                x = hhat;
            }
            ++m;
        } else {
            x = h;
        }
        ++slot;
    }
    out.logits = x;
    return out;
}

ForwardGraph forward_with_adapters(Tape& tape, const BaseModel& model, const Tensor& batch,
                                   const AdapterSet* adapters, bool adapter_params_require_grad,
                                   bool capture_taps, AdapterGraphRefs* refs) {
    if (refs) refs->by_slot.assign(static_cast<std::size_t>(model.num_tunable()), AdapterGraph{});
    DeltaBuilder delta;
    if (adapters) {
        const auto slots = model.tunable_slots();
        for (int m = 0; m < model.num_tunable(); ++m) {
            const auto& a = adapters->slots.size() > static_cast<std::size_t>(m)
                                ? adapters->slots[static_cast<std::size_t>(m)]
                                : nullptr;
            if (!a) continue;
            if (a->spec().in_dim != model.tunable_in_dim(m) || a->spec().out_dim != model.tunable_out_dim(m))
                throw ShapeError("adapter dims do not match fine-tunable layer " + std::to_string(m));
        }
        delta = [adapters, adapter_params_require_grad, refs](Tape& t, int m, Val x) -> std::optional<Val> {
            const auto& a = adapters->slots.size() > static_cast<std::size_t>(m)
                                ? adapters->slots[static_cast<std::size_t>(m)]
                                : nullptr;
            if (!a) return std::nullopt;
            AdapterGraph g;
            Val dh = build_delta_graph(t, *a, x, adapter_params_require_grad, &g);
            if (refs) refs->by_slot[static_cast<std::size_t>(m)] = std::move(g);
            return dh;
        };
    }
    return forward_graph(tape, model, batch, /*theta_requires_grad=*/false, capture_taps, delta);
}

ForwardGraph forward_detached(Tape& tape, const BaseModel& model, const Tensor& batch,
                              const AdapterSet* adapters, bool capture_taps) {
    DeltaBuilder delta;
    if (adapters) {
        delta = [adapters](Tape& t, int m, Val x) -> std::optional<Val> {
            const auto& a = adapters->slots.size() > static_cast<std::size_t>(m)
                                ? adapters->slots[static_cast<std::size_t>(m)]
                                : nullptr;
            if (!a) return std::nullopt;
            // Stop-gradient: evaluate off-tape and insert as a constant.
            return t.constant(a->apply(t.value(x)));
        };
    }
    return forward_graph(tape, model, batch, /*theta_requires_grad=*/false, capture_taps, delta);
}

Tensor model_infer(const BaseModel& model, const Tensor& batch, const AdapterSet* adapters) {
    if (batch.cols() != static_cast<std::size_t>(model.in_dim()))
        throw ShapeError("infer: batch width mismatch");
    Tensor x = batch;
    int slot = 0, m = 0;
    for (const auto& l : model.layers) {
        if (l.kind == LayerKind::Relu) {
            with_dtype(x.dtype(), [&](auto z) {
                using T = decltype(z);
                auto p = data_of<T>(x);
                for (std::size_t i = 0; i < p.size(); ++i) p[i] = p[i] > T(0) ? p[i] : T(0);
            });
            continue;
        }
        const Tensor& w = model.weights[static_cast<std::size_t>(slot)];
        const Tensor& b = model.biases[static_cast<std::size_t>(slot)];
        Tensor h({x.rows(), w.rows()}, x.dtype());
        with_dtype(x.dtype(), [&](auto z) {
            using T = decltype(z);
            kern::mm_nt_acc<T>(data_of<T>(x).data(), data_of<T>(w).data(), data_of<T>(h).data(), x.rows(),
                               x.cols(), w.rows());
            auto ph = data_of<T>(h);
            auto pb = data_of<T>(b);
            for (std::size_t i = 0; i < h.rows(); ++i)
                for (std::size_t j = 0; j < h.cols(); ++j) ph[i * h.cols() + j] += pb[j];
        });
        if (l.fine_tunable) {
            const auto a = (adapters && adapters->slots.size() > static_cast<std::size_t>(m))
                               ? adapters->slots[static_cast<std::size_t>(m)]
                               : nullptr;
            if (a) {
                Tensor dh = a->apply(x);
                with_dtype(h.dtype(), [&](auto z) {
                    using T = decltype(z);
                    kern::axpy<T>(data_of<T>(dh).data(), data_of<T>(h).data(), T(1), h.size());
                });
            }
            ++m;
        }
        x = std::move(h);
        ++slot;
    }
    return x;
}

double classical_gradients(const BaseModel& model, const AdapterSet& adapters, const Tensor& batch,
                           const std::vector<int>& labels, std::vector<std::vector<Tensor>>& out_grads,
                           Tensor* out_logits) {
    if (!model.frozen) throw Error("classical adapter training requires a frozen model");
    Tape tape;
    AdapterGraphRefs refs;
    ForwardGraph fg = forward_with_adapters(tape, model, batch, &adapters,
                                            /*adapter_params_require_grad=*/true,
                                            /*capture_taps=*/false, &refs);
    Val loss = tape.softmax_cross_entropy(fg.logits, labels);
    tape.backward(loss);
    if (out_logits) *out_logits = tape.value(fg.logits);
    out_grads.assign(refs.by_slot.size(), {});
    for (std::size_t m = 0; m < refs.by_slot.size(); ++m) {
        for (Val p : refs.by_slot[m].params) {
            if (tape.has_grad(p))
                out_grads[m].push_back(tape.grad(p));
            else
                out_grads[m].push_back(Tensor::zeros(tape.value(p).shape(), tape.value(p).dtype()));
        }
    }
    return tape.value(loss).at(0);
}

double classical_step(const BaseModel& model, AdapterSet& adapters, const Tensor& batch,
                      const std::vector<int>& labels, const OptimSpec& opt,
                      std::vector<OptimState>& states, double lr, Tensor* out_logits) {
    std::vector<std::vector<Tensor>> grads;
    const double loss = classical_gradients(model, adapters, batch, labels, grads, out_logits);
    if (states.size() < grads.size()) states.resize(grads.size());
    for (std::size_t m = 0; m < grads.size(); ++m) {
        auto& a = adapters.slots[m];
        if (!a || grads[m].empty()) continue;
        std::vector<Tensor*> params;
        std::vector<const Tensor*> gptrs;
        for (std::size_t i = 0; i < a->num_params(); ++i) {
            params.push_back(&a->param(i));
            gptrs.push_back(&grads[m][i]);
        }
        optim_step(opt, states[m], params, gptrs, lr);
    }
    return loss;
}

double ft_step(BaseModel& model, const Tensor& batch, const std::vector<int>& labels,
               const OptimSpec& opt, OptimState& state, double lr, Tensor* out_logits) {
    if (model.frozen) throw Error("full fine-tuning requires an unfrozen model");
    Tape tape;
    ForwardGraph fg = forward_graph(tape, model, batch, /*theta_requires_grad=*/true,
                                    /*capture_taps=*/false, {});
    Val loss = tape.softmax_cross_entropy(fg.logits, labels);
    tape.backward(loss);
    if (out_logits) *out_logits = tape.value(fg.logits);
    std::vector<Tensor*> params;
    std::vector<Tensor> grads;
    for (std::size_t s = 0; s < model.weights.size(); ++s) {
        params.push_back(&model.weights[s]);
        grads.push_back(tape.grad(fg.weight_vals[s]));
        params.push_back(&model.biases[s]);
        grads.push_back(tape.grad(fg.bias_vals[s]));
    }
    std::vector<const Tensor*> gptrs;
    for (const auto& g : grads) gptrs.push_back(&g);
    optim_step(opt, state, params, gptrs, lr);
    return tape.value(loss).at(0);
}

} // namespace cola
