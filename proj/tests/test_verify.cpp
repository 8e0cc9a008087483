#include "doctest.h"

#include <chrono>
#include <cmath>

#include "cola/rng.hpp"
#include "cola/verify.hpp"

using namespace cola;

TEST_CASE("symmetric eigensolver reconstructs and whitens") {
    Rng rng(3);
    const int d = 7;
    std::vector<double> a(static_cast<std::size_t>(d) * d, 0.0);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j <= i; ++j) {
            const double v = rng.gaussian();
            a[static_cast<std::size_t>(i) * d + j] = v;
            a[static_cast<std::size_t>(j) * d + i] = v;
        }
    std::vector<double> evals, evecs;
    sym_eig(a, d, evals, evecs);
    // A == V diag(evals) V^T
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            double v = 0.0;
            for (int l = 0; l < d; ++l)
                v += evecs[static_cast<std::size_t>(i) * d + l] * evals[static_cast<std::size_t>(l)] *
                     evecs[static_cast<std::size_t>(j) * d + l];
            CHECK(v == doctest::Approx(a[static_cast<std::size_t>(i) * d + j]).epsilon(1e-10));
        }

    WhitenedSetup s = make_whitened_setup(6, 3, 48, 10.0, 5);
    // E[u u^T] must be the identity to verification depth.
    const std::size_t n = s.whitened.rows();
    for (int r = 0; r < 6; ++r)
        for (int c = 0; c < 6; ++c) {
            double v = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                v += s.whitened.at(i * 6 + static_cast<std::size_t>(r)) *
                     s.whitened.at(i * 6 + static_cast<std::size_t>(c)) / static_cast<double>(n);
            CHECK(std::fabs(v - (r == c ? 1.0 : 0.0)) < 1e-6);
        }
}

TEST_CASE("contraction: constant alpha=0.1 for 50 steps lands on 0.9^50") {
    VerifyCheck c = check_contraction(8, 5, std::vector<double>(50, 0.1), 11);
    CHECK(c.pass);
    CHECK(c.expected == doctest::Approx(5.1537752e-3).epsilon(1e-6));
    CHECK(std::fabs(c.measured - c.expected) / c.expected < 1e-6);
}

TEST_CASE("contraction: alpha_1 = 1 converges in one step") {
    VerifyCheck c = check_contraction(6, 4, {1.0, 0.25}, 13);
    CHECK(c.pass);
    CHECK(c.measured < 1e-10);
}

TEST_CASE("whitened update: residual factor equals the product, A=0 is a no-op, doubling squares it") {
    VerifyCheck a25 = check_whitened_equivalence(10, 6, 25, 0.15, 0.4, 17);
    CHECK(a25.pass);
    CHECK(a25.measured == doctest::Approx(std::pow(0.85, 25)).epsilon(1e-8));

    VerifyCheck a0 = check_whitened_equivalence(10, 6, 0, 0.15, 0.4, 17);
    CHECK(a0.pass);
    CHECK(a0.measured == doctest::Approx(1.0).epsilon(1e-12));

    VerifyCheck a50 = check_whitened_equivalence(10, 6, 50, 0.15, 0.4, 17);
    CHECK(a50.pass);
    CHECK(a50.measured == doctest::Approx(a25.measured * a25.measured).epsilon(1e-8));
}

TEST_CASE("gradient-identity and variant-matrix checks pass") {
    for (const auto& c : check_gradient_identity(23)) CHECK(c.pass);
    for (const auto& c : check_variant_matrix(29)) CHECK(c.pass);
}

TEST_CASE("full verification suite is deterministic, green and fast") {
    const auto t0 = std::chrono::steady_clock::now();
    VerifyReport r1 = run_verify(7);
    CHECK(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() < 30.0);
    CHECK(r1.all_pass());
    VerifyReport r2 = run_verify(7);
    CHECK(r1.json() == r2.json());
    VerifyReport r3 = run_verify(8);
    CHECK(r3.all_pass());
}
