#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cola/tensor.hpp"

namespace cola {

// Whitened linear-adapter setup for the inner-loop analysis: g(x) = w U x
// with U^T U = (V + eps I)^{-1}, V the empirical input covariance.
struct WhitenedSetup {
    Tensor inputs;   // X [n x d]
    Tensor whitened; // rows U x_i [n x d]
    Tensor cov;      // V [d x d]
    Tensor whitener; // U [d x d], symmetric
    Tensor grads;    // per-sample d loss / d h rows [n x o]
    Tensor w0;       // initial adapter state [o x d]
    double epsilon = 1e-8;
};

WhitenedSetup make_whitened_setup(int in_dim, int out_dim, int samples, double scale, std::uint64_t seed);

// Symmetric eigendecomposition (cyclic Jacobi). A is row-major d x d; fills
// eigenvalues and an orthonormal matrix whose COLUMNS are eigenvectors.
void sym_eig(const std::vector<double>& a, int d, std::vector<double>& evals, std::vector<double>& evecs);

struct VerifyCheck {
    std::string name;
    double max_abs_err = 0.0;
    double max_rel_err = 0.0;
    double tolerance = 0.0;
    // Headline measured quantity and its closed-form prediction, where the
    // check has one (contraction ratio, residual factor).
    double measured = 0.0;
    double expected = 0.0;
    bool pass = false;
    std::uint64_t seed = 0;
    std::string note;
};

struct VerifyReport {
    std::vector<VerifyCheck> checks;
    std::uint64_t seed = 0;

    bool all_pass() const;
    std::string text() const;
    std::string json() const;
};

// Gradient identity: d/dw of the auxiliary quadratic loss at w^t equals the
// ordinary task-loss gradient, for every adapter kind and several batch
// sizes. One entry per adapter kind.
std::vector<VerifyCheck> check_gradient_identity(std::uint64_t seed);

// Per-layer gradient match of the detached / unmerged / merged record paths
// against ordinary backprop, with nonzero adapters. unmerged and merged must
// match on all layers; detached must match only on the final layer.
std::vector<VerifyCheck> check_variant_matrix(std::uint64_t seed);

// Inner-loop contraction: ||w^l - c|| = prod_j (1 - alpha_j) * ||w^0 - c||
// for explicit gradient descent on the whitened quadratic objective.
VerifyCheck check_contraction(int in_dim, int out_dim, const std::vector<double>& alphas,
                              std::uint64_t seed);

// A-step inner update vs one-shot gradient descent: the residual equals
// gamma * E_n[grad x^T U^T] * prod_j (1 - alpha_j) exactly.
VerifyCheck check_whitened_equivalence(int in_dim, int out_dim, int steps, double alpha, double gamma,
                                       std::uint64_t seed);

// Linearity probe and merge behavior for every adapter kind; the MLP adapter
// must fail the probe and be rejected by merge.
std::vector<VerifyCheck> check_merge_linearity(std::uint64_t seed);

// Full suite with fixed sub-seeds derived from `seed`.
VerifyReport run_verify(std::uint64_t seed);

} // namespace cola
