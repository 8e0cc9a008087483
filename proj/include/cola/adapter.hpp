#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "cola/optim.hpp"
#include "cola/tape.hpp"
#include "cola/tensor.hpp"

namespace cola {

enum class AdapterKind : std::uint8_t { LowRank, Linear, Mlp };

AdapterKind adapter_kind_from_name(const std::string& name);
const char* adapter_kind_name(AdapterKind k);

struct AdapterSpec {
    AdapterKind kind = AdapterKind::LowRank;
    int in_dim = 0;
    int out_dim = 0;
    int rank = 8;       // LowRank
    int hidden = 128;   // Mlp
    double alpha = 1.0; // scale applied to the adapter output and at merge

    void validate() const;
    std::size_t param_count() const;
};

// Auxiliary model attached to one fine-tuned layer. Freshly initialized
// adapters output exactly zero for every input.
class Adapter {
public:
    Adapter() = default;
    static Adapter init(const AdapterSpec& spec, std::uint64_t seed, Dtype dt = Dtype::F64);
    // Assembles an adapter from pre-built parameter tensors (deserialization).
    static Adapter from_params(const AdapterSpec& spec, std::vector<Tensor> params);

    const AdapterSpec& spec() const { return spec_; }
    Dtype dtype() const;
    std::size_t param_count() const { return spec_.param_count(); }

    std::size_t num_params() const { return params_.size(); }
    Tensor& param(std::size_t i) { return params_[i]; }
    const Tensor& param(std::size_t i) const { return params_[i]; }
    const std::string& param_name(std::size_t i) const { return names_[i]; }

    // Delta for a row batch x [n x in] -> [n x out], alpha included.
    Tensor apply(const Tensor& x) const;

    // True iff the adapter output is a linear map of its input.
    bool mergeable() const { return spec_.kind != AdapterKind::Mlp; }
    // Dense [out x in] matrix of the adapter's linear action, alpha excluded.
    Tensor dense() const;

    bool merged() const { return merged_; }
    // theta_hat = theta + alpha * dense(). Marks the adapter merged.
    Tensor merge_into(const Tensor& theta_w);
    // theta = theta_hat - alpha * dense(). Requires a prior merge.
    Tensor unmerge_from(const Tensor& theta_hat);

private:
    AdapterSpec spec_;
    std::vector<Tensor> params_;
    std::vector<std::string> names_;
    bool merged_ = false;
};

// One adapter slot per fine-tunable layer of a model (nullptr = none).
struct AdapterSet {
    std::vector<std::shared_ptr<Adapter>> slots;

    bool any() const {
        for (const auto& a : slots)
            if (a) return true;
        return false;
    }
};

// Tape subgraph computing the adapter delta for input value x. Parameter
// leaves are registered with the given requires_grad flag; their handles are
// returned through `refs` (aligned with the adapter's parameter order).
struct AdapterGraph {
    std::vector<Val> params;
};
Val build_delta_graph(Tape& tape, const Adapter& adapter, Val x, bool params_require_grad,
                      AdapterGraph* refs = nullptr);

// Gradient of the auxiliary quadratic loss
//   mean over records of 1/2 * || g_w(x) - (g_w(x)|detached - grad_rows) ||^2
// at the adapter's current parameters. grad_rows holds per-sample
// d(loss)/d(h^) rows. Returns the loss value; fills out_grads parallel to the
// parameter list.
double fit_gradient(const Adapter& adapter, const Tensor& x, const Tensor& grad_rows,
                    std::vector<Tensor>& out_grads);

// One optimizer step on the auxiliary loss above.
double fit_step(Adapter& adapter, const Tensor& x, const Tensor& grad_rows, const OptimSpec& spec,
                OptimState& state, double lr);

} // namespace cola
