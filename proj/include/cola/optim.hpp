#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cola/tensor.hpp"

namespace cola {

enum class OptimKind : std::uint8_t { Sgd, AdamW };

struct OptimSpec {
    OptimKind kind = OptimKind::Sgd;
    double momentum = 0.0;      // Sgd
    double beta1 = 0.9;         // AdamW
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;  // decoupled (AdamW); L2 ignored for plain Sgd
};

inline OptimSpec sgd_spec(double momentum = 0.0) {
    OptimSpec s;
    s.kind = OptimKind::Sgd;
    s.momentum = momentum;
    return s;
}

inline OptimSpec adamw_spec(double weight_decay = 5e-4) {
    OptimSpec s;
    s.kind = OptimKind::AdamW;
    s.weight_decay = weight_decay;
    return s;
}

// Per-parameter-list optimizer state. Owned by whichever device fits the
// parameters (offload worker for adapters, trainer for classical paths).
struct OptimState {
    long step = 0;
    std::vector<Tensor> m; // momentum / first moment
    std::vector<Tensor> v; // second moment (AdamW)
};

// One update step at the given learning rate. params and grads are parallel.
void optim_step(const OptimSpec& spec, OptimState& state, const std::vector<Tensor*>& params,
                const std::vector<const Tensor*>& grads, double lr);

enum class LrSchedule : std::uint8_t { Constant, Cosine, LinearWarmup };

LrSchedule schedule_from_name(const std::string& name);
const char* schedule_name(LrSchedule s);

struct LrPlan {
    LrSchedule schedule = LrSchedule::Constant;
    double base_lr = 0.1;
    long total_steps = 1;
    double warmup_frac = 0.05; // LinearWarmup only
};

// Learning rate at 1-based step t.
double lr_at(const LrPlan& plan, long t);

} // namespace cola
