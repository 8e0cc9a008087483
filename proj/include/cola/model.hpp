#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cola/adapter.hpp"
#include "cola/optim.hpp"
#include "cola/tape.hpp"
#include "cola/tensor.hpp"

namespace cola {

enum class LayerKind : std::uint8_t { Affine, Relu };

struct LayerSpec {
    LayerKind kind = LayerKind::Affine;
    int in_dim = 0;
    int out_dim = 0;
    bool fine_tunable = false;
};

enum class Preset : std::uint8_t { Linear, Mlp };
Preset preset_from_name(const std::string& name);

// Base model f_theta: a chain of affine and activation layers with M
// designated fine-tuning (affine) layers. Frozen by default: no theta
// gradient is computed or applied anywhere in the training paths.
struct BaseModel {
    std::vector<LayerSpec> layers;
    std::vector<Tensor> weights; // per affine layer in order, [out x in]
    std::vector<Tensor> biases;  // per affine layer in order, [out]
    bool frozen = true;
    Dtype dtype = Dtype::F64;

    int in_dim() const;
    int out_dim() const;
    int num_tunable() const; // M
    // Affine-slot index for each fine-tunable layer, in order (m = 0..M-1).
    std::vector<int> tunable_slots() const;
    // Output width of fine-tunable layer m.
    int tunable_out_dim(int m) const;
    int tunable_in_dim(int m) const;
    std::size_t param_count() const;
    // SHA-256 of all parameter bytes; the frozen contract asserts this is
    // unchanged by any training path.
    std::string theta_hash() const;
};

BaseModel build_model(Preset preset, std::uint64_t seed, Dtype dt = Dtype::F64, int mlp_hidden = 128);
BaseModel build_model(std::vector<LayerSpec> specs, std::uint64_t seed, Dtype dt = Dtype::F64);

// Per-layer delta hook used by the graph builder: return the (alpha-scaled)
// delta value for fine-tunable layer m given its hidden input, or nullopt.
using DeltaBuilder = std::function<std::optional<Val>(Tape&, int m, Val x)>;

struct ForwardGraph {
    Val logits;
    // Leaf handles for theta (parallel to BaseModel::weights/biases); only
    // meaningful when theta_requires_grad was set.
    std::vector<Val> weight_vals;
    std::vector<Val> bias_vals;
};

// Builds the forward graph. Taps are registered at every fine-tunable layer
// when capture_taps is set: TapPoint m holds (x_m, h^_m) and receives the
// gradient of h^_m during backward.
ForwardGraph forward_graph(Tape& tape, const BaseModel& model, const Tensor& batch,
                           bool theta_requires_grad, bool capture_taps, const DeltaBuilder& delta);

// Convenience: single-user forward with adapters evaluated inside the graph.
// adapters may be nullptr (plain forward). params_require_grad controls the
// adapter parameter leaves (classical mode sets it).
struct AdapterGraphRefs {
    std::vector<AdapterGraph> by_slot; // size M (empty params when no adapter)
};
ForwardGraph forward_with_adapters(Tape& tape, const BaseModel& model, const Tensor& batch,
                                   const AdapterSet* adapters, bool adapter_params_require_grad,
                                   bool capture_taps, AdapterGraphRefs* refs = nullptr);

// Forward with adapter outputs inserted as constants (stop-gradient), the
// flawed variant kept for the negative test.
ForwardGraph forward_detached(Tape& tape, const BaseModel& model, const Tensor& batch,
                              const AdapterSet* adapters, bool capture_taps);

// Plain inference without a tape; adapters optional.
Tensor model_infer(const BaseModel& model, const Tensor& batch, const AdapterSet* adapters);

// Classical PEFT update: ordinary backprop gradients for the adapter
// parameters of a frozen model plus one optimizer step. Returns the loss.
// states is parallel to the adapter slots.
double classical_step(const BaseModel& model, AdapterSet& adapters, const Tensor& batch,
                      const std::vector<int>& labels, const OptimSpec& opt,
                      std::vector<OptimState>& states, double lr, Tensor* out_logits = nullptr);

// Classical gradients only (no step): per slot, gradients parallel to the
// adapter's parameter list. Returns the loss.
double classical_gradients(const BaseModel& model, const AdapterSet& adapters, const Tensor& batch,
                           const std::vector<int>& labels, std::vector<std::vector<Tensor>>& out_grads,
                           Tensor* out_logits = nullptr);

// Full fine-tuning step (theta itself trains); requires an unfrozen model.
double ft_step(BaseModel& model, const Tensor& batch, const std::vector<int>& labels,
               const OptimSpec& opt, OptimState& state, double lr, Tensor* out_logits = nullptr);

} // namespace cola
