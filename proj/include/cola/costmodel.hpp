#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cola/adapter.hpp"
#include "cola/model.hpp"

namespace cola {

enum class CostMethod : std::uint8_t { Ft, PeftUnmerged, PeftMerged, ColaUnmerged, ColaMerged };
enum class CostMode : std::uint8_t { Inference, Learning };

CostMethod cost_method_from_name(const std::string& name);
const char* cost_method_name(CostMethod m);

// One symbolic term of the computation-space model: a named tensor family
// and its float-element count, tagged with the device that stores it.
struct CostTerm {
    std::string symbol; // h, h~, theta, w, grad_h, grad_h~, grad_theta, grad_w
    std::size_t count = 0;
    bool offload = false; // true = lives on a low-cost device
};

struct CostReport {
    CostMethod method;
    CostMode mode;
    int users = 1;
    int batch = 1;
    std::vector<CostTerm> forward_reps;
    std::vector<CostTerm> forward_params;
    std::vector<CostTerm> backward_reps;
    std::vector<CostTerm> backward_params;

    std::size_t base_total() const;
    std::size_t offload_total() const;
    std::vector<const CostTerm*> all_terms() const;
};

// Symbolic per-device float counts for one method/mode cell. Adapter specs
// are per fine-tunable layer; every user k carries the same per-layer specs.
// Per-user batch shares are equal quotas summing to B.
CostReport cost_report(const BaseModel& model, const std::vector<AdapterSpec>& adapter_specs, int users,
                       CostMethod method, CostMode mode, int batch);

// Aligned text table over several reports (one row per method/mode).
std::string format_cost_table(const std::vector<CostReport>& reports);
std::string format_cost_csv(const std::vector<CostReport>& reports);

} // namespace cola
