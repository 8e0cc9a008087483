#include "cola/optim.hpp"

#include <cmath>

#include "cola/dispatch.hpp"

namespace cola {

LrSchedule schedule_from_name(const std::string& name) {
    if (name == "constant") return LrSchedule::Constant;
    if (name == "cosine") return LrSchedule::Cosine;
    if (name == "linear_warmup" || name == "linear") return LrSchedule::LinearWarmup;
    throw ConfigError("unknown lr schedule '" + name + "'");
}

const char* schedule_name(LrSchedule s) {
    switch (s) {
    case LrSchedule::Constant: return "constant";
    case LrSchedule::Cosine: return "cosine";
    case LrSchedule::LinearWarmup: return "linear_warmup";
    }
    return "?";
}

double lr_at(const LrPlan& plan, long t) {
    const double T = static_cast<double>(plan.total_steps);
    const double x = static_cast<double>(t);
    switch (plan.schedule) {
    case LrSchedule::Constant:
        return plan.base_lr;
    case LrSchedule::Cosine:
        // cosine annealing from base_lr to 0 over total_steps
        return plan.base_lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * std::min(x, T) / T));
    case LrSchedule::LinearWarmup: {
        const double w = std::max(1.0, plan.warmup_frac * T);
        if (x <= w) return plan.base_lr * x / w;
        return plan.base_lr * std::max(0.0, (T - x) / (T - w));
    }
    }
    return plan.base_lr;
}

static void ensure_state(OptimState& st, const OptimSpec& spec, const std::vector<Tensor*>& params) {
    const bool need_m = spec.kind == OptimKind::AdamW || spec.momentum != 0.0;
    const bool need_v = spec.kind == OptimKind::AdamW;
    if (need_m && st.m.size() != params.size()) {
        st.m.clear();
        for (const Tensor* p : params) st.m.push_back(Tensor::zeros(p->shape(), p->dtype()));
    }
    if (need_v && st.v.size() != params.size()) {
        st.v.clear();
        for (const Tensor* p : params) st.v.push_back(Tensor::zeros(p->shape(), p->dtype()));
    }
}

void optim_step(const OptimSpec& spec, OptimState& state, const std::vector<Tensor*>& params,
                const std::vector<const Tensor*>& grads, double lr) {
    if (params.size() != grads.size()) throw ShapeError("optim_step: params/grads size mismatch");
    ensure_state(state, spec, params);
    ++state.step;
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i];
        const Tensor& g = *grads[i];
        if (!p.same_shape(g)) throw ShapeError("optim_step: grad shape mismatch for parameter " + std::to_string(i));
        with_dtype(p.dtype(), [&](auto z) {
            using T = decltype(z);
            auto pp = data_of<T>(p);
            auto pg = data_of<T>(g);
            if (spec.kind == OptimKind::Sgd) {
                if (spec.momentum == 0.0) {
                    const T step_size = static_cast<T>(lr);
                    for (std::size_t e = 0; e < pp.size(); ++e) pp[e] -= step_size * pg[e];
                } else {
                    auto pm = data_of<T>(state.m[i]);
                    const T mu = static_cast<T>(spec.momentum);
                    const T step_size = static_cast<T>(lr);
                    for (std::size_t e = 0; e < pp.size(); ++e) {
                        pm[e] = mu * pm[e] + pg[e];
                        pp[e] -= step_size * pm[e];
                    }
                }
            } else {
                auto pm = data_of<T>(state.m[i]);
                auto pv = data_of<T>(state.v[i]);
                const double b1 = spec.beta1, b2 = spec.beta2;
                const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
                const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
                for (std::size_t e = 0; e < pp.size(); ++e) {
                    const double ge = static_cast<double>(pg[e]);
                    double me = b1 * static_cast<double>(pm[e]) + (1.0 - b1) * ge;
                    double ve = b2 * static_cast<double>(pv[e]) + (1.0 - b2) * ge * ge;
                    pm[e] = static_cast<T>(me);
                    pv[e] = static_cast<T>(ve);
                    const double mhat = me / bc1;
                    const double vhat = ve / bc2;
                    double pe = static_cast<double>(pp[e]);
                    pe -= lr * spec.weight_decay * pe;
                    pe -= lr * mhat / (std::sqrt(vhat) + spec.eps);
                    pp[e] = static_cast<T>(pe);
                }
            }
        });
    }
}

} // namespace cola
