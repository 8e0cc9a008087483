#include "cola/costmodel.hpp"

#include <algorithm>
#include <sstream>

namespace cola {

CostMethod cost_method_from_name(const std::string& name) {
    if (name == "ft") return CostMethod::Ft;
    if (name == "peft_unmerged" || name == "peft") return CostMethod::PeftUnmerged;
    if (name == "peft_merged") return CostMethod::PeftMerged;
    if (name == "cola_unmerged") return CostMethod::ColaUnmerged;
    if (name == "cola_merged" || name == "cola") return CostMethod::ColaMerged;
    throw ConfigError("unknown cost method '" + name + "'");
}

const char* cost_method_name(CostMethod m) {
    switch (m) {
    case CostMethod::Ft: return "FT";
    case CostMethod::PeftUnmerged: return "PEFT (unmerged)";
    case CostMethod::PeftMerged: return "PEFT (merged)";
    case CostMethod::ColaUnmerged: return "ColA (unmerged)";
    case CostMethod::ColaMerged: return "ColA (merged)";
    }
    return "?";
}

std::size_t CostReport::base_total() const {
    std::size_t n = 0;
    for (const auto* t : all_terms())
        if (!t->offload) n += t->count;
    return n;
}

std::size_t CostReport::offload_total() const {
    std::size_t n = 0;
    for (const auto* t : all_terms())
        if (t->offload) n += t->count;
    return n;
}

std::vector<const CostTerm*> CostReport::all_terms() const {
    std::vector<const CostTerm*> out;
    for (const auto& t : forward_reps) out.push_back(&t);
    for (const auto& t : forward_params) out.push_back(&t);
    for (const auto& t : backward_reps) out.push_back(&t);
    for (const auto& t : backward_params) out.push_back(&t);
    return out;
}

namespace {

// Count of the auxiliary model's own representations for one input row.
std::size_t tilde_dims(const AdapterSpec& s) {
    switch (s.kind) {
    case AdapterKind::LowRank: return static_cast<std::size_t>(s.rank) + static_cast<std::size_t>(s.out_dim);
    case AdapterKind::Linear: return static_cast<std::size_t>(s.out_dim);
    case AdapterKind::Mlp: return static_cast<std::size_t>(s.hidden) + static_cast<std::size_t>(s.out_dim);
    }
    return 0;
}

} // namespace

CostReport cost_report(const BaseModel& model, const std::vector<AdapterSpec>& adapter_specs, int users,
                       CostMethod method, CostMode mode, int batch) {
    if (users < 1 || batch < 1) throw ConfigError("cost_report: users and batch must be >= 1");
    if (method != CostMethod::Ft && adapter_specs.size() != static_cast<std::size_t>(model.num_tunable()))
        throw ConfigError("cost_report: one adapter spec per fine-tunable layer required");

    const std::size_t theta = model.param_count();
    std::size_t h = 0;
    for (int m = 0; m < model.num_tunable(); ++m)
        h += static_cast<std::size_t>(batch) * static_cast<std::size_t>(model.tunable_out_dim(m));
    std::size_t w = 0, h_tilde = 0;
    for (const auto& s : adapter_specs) {
        w += static_cast<std::size_t>(users) * s.param_count();
        // Equal per-user quotas summing to B: the adapter representations
        // total B * dims regardless of K.
        h_tilde += static_cast<std::size_t>(batch) * tilde_dims(s);
    }

    CostReport r;
    r.method = method;
    r.mode = mode;
    r.users = users;
    r.batch = batch;

    const bool learning = mode == CostMode::Learning;
    switch (method) {
    case CostMethod::Ft:
        r.forward_params = {{"theta", theta, false}};
        if (learning) {
            r.forward_reps = {{"h", h, false}};
            r.backward_reps = {{"grad_h", h, false}};
            r.backward_params = {{"grad_theta", theta, false}};
        }
        break;
    case CostMethod::PeftUnmerged:
        r.forward_params = {{"theta", theta, false}, {"w", w, false}};
        if (learning) {
            r.forward_reps = {{"h", h, false}, {"h~", h_tilde, false}};
            r.backward_reps = {{"grad_h", h, false}, {"grad_h~", h_tilde, false}};
            r.backward_params = {{"grad_w", w, false}};
        }
        break;
    case CostMethod::PeftMerged:
        if (learning) throw ConfigError("merged PEFT has no learning mode; it is inference-only");
        r.forward_params = {{"theta", theta, false}};
        break;
    case CostMethod::ColaUnmerged:
        r.forward_params = {{"theta", theta, false}, {"w", w, false}};
        if (learning) {
            r.forward_reps = {{"h", h, false}, {"h~", h_tilde, false}};
            r.backward_reps = {{"grad_h", h, false}, {"grad_h~", h_tilde, false}};
            r.backward_params = {{"grad_w", w, true}};
        }
        break;
    case CostMethod::ColaMerged:
        if (learning) {
            r.forward_reps = {{"h", h, false}, {"h~", h_tilde, true}};
            r.forward_params = {{"theta", theta, false}, {"w", w, true}};
            r.backward_reps = {{"grad_h", h, false}, {"grad_h~", h_tilde, true}};
            r.backward_params = {{"grad_w", w, true}};
        } else {
            r.forward_params = {{"theta", theta, false}};
        }
        break;
    }
    return r;
}

namespace {

std::string terms_str(const std::vector<CostTerm>& terms) {
    if (terms.empty()) return "-";
    std::ostringstream os;
    for (std::size_t i = 0; i < terms.size(); ++i) {
        if (i) os << " + ";
        if (terms[i].offload)
            os << "{" << terms[i].symbol << ":" << terms[i].count << "}";
        else
            os << terms[i].symbol << ":" << terms[i].count;
    }
    return os.str();
}

} // namespace

std::string format_cost_table(const std::vector<CostReport>& reports) {
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"method", "mode", "fwd reps", "fwd params", "bwd reps", "bwd params", "base", "offload"});
    for (const auto& r : reports) {
        rows.push_back({cost_method_name(r.method), r.mode == CostMode::Learning ? "learning" : "inference",
                        terms_str(r.forward_reps), terms_str(r.forward_params), terms_str(r.backward_reps),
                        terms_str(r.backward_params), std::to_string(r.base_total()),
                        std::to_string(r.offload_total())});
    }
    std::vector<std::size_t> width(rows[0].size(), 0);
    for (const auto& row : rows)
        for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
    std::ostringstream os;
    os << "float-element counts; {braces} = stored on low-cost devices\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t c = 0; c < rows[i].size(); ++c) {
            os << rows[i][c] << std::string(width[c] - rows[i][c].size() + 2, ' ');
        }
        os << "\n";
        if (i == 0) {
            std::size_t total = 0;
            for (std::size_t wd : width) total += wd + 2;
            os << std::string(total, '-') << "\n";
        }
    }
    return os.str();
}

std::string format_cost_csv(const std::vector<CostReport>& reports) {
    std::ostringstream os;
    os << "method,mode,column,symbol,count,device\n";
    for (const auto& r : reports) {
        const char* mode = r.mode == CostMode::Learning ? "learning" : "inference";
        auto emit = [&](const char* col, const std::vector<CostTerm>& terms) {
            for (const auto& t : terms)
                os << cost_method_name(r.method) << "," << mode << "," << col << "," << t.symbol << ","
                   << t.count << "," << (t.offload ? "offload" : "base") << "\n";
        };
        emit("forward_reps", r.forward_reps);
        emit("forward_params", r.forward_params);
        emit("backward_reps", r.backward_reps);
        emit("backward_params", r.backward_params);
    }
    return os.str();
}

} // namespace cola
