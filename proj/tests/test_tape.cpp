#include "doctest.h"

#include <cmath>

#include "cola/tape.hpp"

#include "testsupport.hpp"

using namespace cola;
using coltest::bit_equal;
using coltest::finite_diff;
using coltest::rand_tensor;

TEST_CASE("matmul forward: identity and 1x2 * 2x1") {
    Tape tape;
    Val eye = tape.constant(Tensor::from_values({2, 2}, std::vector<double>{1, 0, 0, 1}));
    Val a = tape.constant(Tensor::from_values({2, 2}, std::vector<double>{1, 2, 3, 4}));
    Val prod = tape.matmul(eye, a);
    CHECK(bit_equal(tape.value(prod), tape.value(a)));

    Val r = tape.constant(Tensor::from_values({1, 2}, std::vector<double>{1, 2}));
    Val c = tape.constant(Tensor::from_values({2, 1}, std::vector<double>{3, 4}));
    Val p2 = tape.matmul(r, c);
    CHECK(tape.value(p2).at(0) == 11.0);

    CHECK_THROWS_AS((void)tape.matmul(r, r), ShapeError);
}

TEST_CASE("matmul backward matches central finite differences") {
    Rng rng(42);
    Tensor A = rand_tensor({4, 3}, rng);
    Tensor B = rand_tensor({3, 5}, rng);

    auto loss_of_a = [&](const Tensor& a) {
        Tape t;
        return t.value(t.sum(t.matmul(t.constant(a), t.constant(B)))).at(0);
    };
    const Tensor fd = finite_diff(A, loss_of_a);

    Tape t;
    Tensor Ag = A;
    Ag.requires_grad = true;
    Val av = t.leaf(Ag);
    Val loss = t.sum(t.matmul(av, t.constant(B)));
    t.backward(loss);
    CHECK(max_rel_err(t.grad(av), fd) < 1e-7);
}

TEST_CASE("matmul_nt backward matches finite differences") {
    Rng rng(7);
    Tensor X = rand_tensor({3, 4}, rng);
    Tensor W = rand_tensor({6, 4}, rng);
    auto loss_of_w = [&](const Tensor& w) {
        Tape t;
        return t.value(t.sum(t.matmul_nt(t.constant(X), t.constant(w)))).at(0);
    };
    const Tensor fd = finite_diff(W, loss_of_w);
    Tape t;
    Tensor Wg = W;
    Wg.requires_grad = true;
    Val wv = t.leaf(Wg);
    t.backward(t.sum(t.matmul_nt(t.constant(X), wv)));
    CHECK(max_rel_err(t.grad(wv), fd) < 1e-7);
}

TEST_CASE("elementwise add: identity, scaled residual gradients, bias broadcast") {
    Rng rng(3);
    Tensor h = rand_tensor({4, 3}, rng);
    Tensor d = rand_tensor({4, 3}, rng);

    {
        Tape t;
        Val a = t.constant(h);
        Val z = t.constant(Tensor::zeros({4, 3}));
        CHECK(bit_equal(t.value(t.add(a, z)), h));
    }

    // backward of (h + 1*dh): grad(dh) == grad(h^); with 0.5: grad(dh) == 0.5*grad(h^)
    for (double alpha : {1.0, 0.5}) {
        Tape t;
        Tensor hh = h;
        hh.requires_grad = true;
        Tensor dd = d;
        dd.requires_grad = true;
        Val hv = t.leaf(hh);
        Val dv = t.leaf(dd);
        Val out = t.add(hv, dv, alpha);
        Val loss = t.mse_half(out, t.constant(Tensor::zeros({4, 3})));
        t.backward(loss);
        const Tensor& gh = t.grad(hv);
        const Tensor& gd = t.grad(dv);
        for (std::size_t i = 0; i < gh.size(); ++i)
            CHECK(gd.at(i) == doctest::Approx(alpha * gh.at(i)).epsilon(1e-15));
    }

    {
        Tape t;
        Tensor bias = rand_tensor({3}, rng);
        bias.requires_grad = true;
        Val x = t.constant(h);
        Val b = t.leaf(bias);
        Val out = t.add(x, b);
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = 0; j < 3; ++j)
                CHECK(t.value(out).at(i * 3 + j) == h.at(i * 3 + j) + bias.at(j));
        t.backward(t.sum(out));
        for (std::size_t j = 0; j < 3; ++j) CHECK(t.grad(b).at(j) == 4.0);
    }

    {
        Tape t;
        Val a = t.constant(Tensor::zeros({2, 3}));
        Val b = t.constant(Tensor::zeros({3, 2}));
        CHECK_THROWS_AS((void)t.add(a, b), ShapeError);
    }
}

TEST_CASE("relu forward, tie-at-zero gradient, finite differences away from zero") {
    Tape t;
    Tensor x = Tensor::from_values({3}, std::vector<double>{-1, 0, 2});
    x.requires_grad = true;
    Val xv = t.leaf(x);
    Val y = t.relu(xv);
    CHECK(t.value(y).at(0) == 0.0);
    CHECK(t.value(y).at(1) == 0.0);
    CHECK(t.value(y).at(2) == 2.0);
    t.backward(t.sum(y));
    CHECK(t.grad(xv).at(0) == 0.0);
    CHECK(t.grad(xv).at(1) == 0.0); // subgradient 0 at the tie
    CHECK(t.grad(xv).at(2) == 1.0);

    Rng rng(11);
    Tensor far = rand_tensor({4, 4}, rng);
    for (std::size_t i = 0; i < far.size(); ++i)
        if (std::fabs(far.at(i)) < 0.05) far.set(i, 0.1);
    auto loss_of = [&](const Tensor& v) {
        Tape tt;
        return tt.value(tt.sum(tt.relu(tt.constant(v)))).at(0);
    };
    const Tensor fd = finite_diff(far, loss_of);
    Tape tt;
    Tensor fg = far;
    fg.requires_grad = true;
    Val fv = tt.leaf(fg);
    tt.backward(tt.sum(tt.relu(fv)));
    CHECK(max_rel_err(tt.grad(fv), fd) < 1e-7);
}

TEST_CASE("softmax cross entropy: uniform logits, margin monotonicity, finite differences") {
    {
        Tape t;
        Val logits = t.constant(Tensor::zeros({2, 10}));
        Val loss = t.softmax_cross_entropy(logits, {3, 7});
        CHECK(t.value(loss).at(0) == doctest::Approx(std::log(10.0)).epsilon(1e-12));
    }
    {
        double prev = 1e9;
        for (double margin : {1.0, 5.0, 10.0}) {
            Tape t;
            Tensor l = Tensor::zeros({1, 4});
            l.set(2, margin);
            Val loss = t.softmax_cross_entropy(t.constant(l), {2});
            const double v = t.value(loss).at(0);
            CHECK(v < prev);
            prev = v;
        }
        CHECK(prev < 0.01); // large margin drives the loss toward 0
    }
    {
        Rng rng(5);
        Tensor logits = rand_tensor({4, 5}, rng);
        const std::vector<int> labels = {0, 3, 2, 4};
        auto loss_of = [&](const Tensor& v) {
            Tape t;
            return t.value(t.softmax_cross_entropy(t.constant(v), labels)).at(0);
        };
        const Tensor fd = finite_diff(logits, loss_of);
        Tape t;
        Tensor lg = logits;
        lg.requires_grad = true;
        Val lv = t.leaf(lg);
        t.backward(t.softmax_cross_entropy(lv, labels));
        CHECK(max_rel_err(t.grad(lv), fd) < 1e-7);
    }
    {
        Tape t;
        Val logits = t.constant(Tensor::zeros({1, 3}));
        CHECK_THROWS_AS((void)t.softmax_cross_entropy(logits, {3}), ShapeError);
    }
}

TEST_CASE("mse: zero at equality, half-sum-of-squares per record, finite differences") {
    {
        Tape t;
        Tensor p = Tensor::from_values({2, 2}, std::vector<double>{1, 2, 3, 4});
        Val loss = t.mse_half(t.constant(p), t.constant(p));
        CHECK(t.value(loss).at(0) == 0.0);
    }
    {
        Tape t;
        Val p = t.constant(Tensor::from_values({2}, std::vector<double>{1, 1}));
        Val q = t.constant(Tensor::from_values({2}, std::vector<double>{0, 0}));
        CHECK(t.value(t.mse_half(p, q)).at(0) == 1.0); // one record
    }
    {
        Rng rng(9);
        Tensor pred = rand_tensor({3, 4}, rng);
        Tensor target = rand_tensor({3, 4}, rng);
        auto loss_of = [&](const Tensor& v) {
            Tape t;
            return t.value(t.mse_half(t.constant(v), t.constant(target))).at(0);
        };
        const Tensor fd = finite_diff(pred, loss_of);
        Tape t;
        Tensor pg = pred;
        pg.requires_grad = true;
        Val pv = t.leaf(pg);
        t.backward(t.mse_half(pv, t.constant(target)));
        CHECK(max_rel_err(t.grad(pv), fd) < 1e-8);
    }
    {
        Tape t;
        Val p = t.constant(Tensor::zeros({2, 2}));
        Val q = t.constant(Tensor::zeros({2, 3}));
        CHECK_THROWS_AS((void)t.mse_half(p, q), ShapeError);
    }
}

TEST_CASE("backward: ones for sum, hand-computed two-layer chain, single use") {
    {
        Tape t;
        Tensor x = Tensor::zeros({2, 3});
        x.requires_grad = true;
        Val xv = t.leaf(x);
        t.backward(t.sum(xv));
        for (std::size_t i = 0; i < 6; ++i) CHECK(t.grad(xv).at(i) == 1.0);
    }
    {
        // loss = sum(W2 * (W1 * x)); dL/dW1 computed by hand for 2x2 values.
        Tensor x = Tensor::from_values({2, 1}, std::vector<double>{1, 2});
        Tensor W1 = Tensor::from_values({2, 2}, std::vector<double>{1, 2, 3, 4});
        Tensor W2 = Tensor::from_values({2, 2}, std::vector<double>{5, 6, 7, 8});
        W1.requires_grad = true;
        Tape t;
        Val w1 = t.leaf(W1);
        Val h = t.matmul(w1, t.constant(x));
        Val y = t.matmul(t.constant(W2), h);
        t.backward(t.sum(y));
        // dL/dh = W2^T * ones = [12, 14]; dL/dW1 = dL/dh * x^T
        const Tensor& g = t.grad(w1);
        CHECK(g.at(0) == 12.0);
        CHECK(g.at(1) == 24.0);
        CHECK(g.at(2) == 14.0);
        CHECK(g.at(3) == 28.0);
    }
    {
        Tape t;
        Tensor x = Tensor::zeros({2});
        x.requires_grad = true;
        Val xv = t.leaf(x);
        Val loss = t.sum(xv);
        t.backward(loss);
        CHECK_THROWS_AS(t.backward(loss), TapeError);
    }
    {
        Tape t;
        Tensor x = Tensor::zeros({2});
        x.requires_grad = true;
        Val xv = t.leaf(x);
        CHECK_THROWS_AS(t.backward(xv), TapeError); // not scalar
        CHECK_THROWS_AS(t.backward(Val{99}), TapeError);
    }
}

TEST_CASE("tap: pass-through capture without disturbing the rest of the graph") {
    Rng rng(13);
    Tensor x = rand_tensor({3, 4}, rng);
    Tensor W = rand_tensor({5, 4}, rng);
    W.requires_grad = true;
    const std::vector<int> labels = {1, 0, 4};

    // Untapped run.
    Tape t1;
    Val w1 = t1.leaf(W);
    Val h1 = t1.matmul_nt(t1.constant(x), w1);
    Val loss1 = t1.softmax_cross_entropy(h1, labels);
    t1.backward(loss1);

    // Tapped run.
    Tape t2;
    Val w2 = t2.leaf(W);
    Val h2 = t2.matmul_nt(t2.constant(x), w2);
    Val tapped = t2.tap(h2, 0);
    Val loss2 = t2.softmax_cross_entropy(tapped, labels);
    t2.backward(loss2);

    CHECK(bit_equal(t1.value(loss1), t2.value(loss2)));
    CHECK(bit_equal(t1.grad(w1), t2.grad(w2)));

    const TapPoint& tp = t2.taps().front();
    CHECK(tp.grad_filled);
    CHECK(tp.output.shape() == t2.value(h2).shape());
    CHECK(tp.grad.shape() == tp.output.shape());
    CHECK(bit_equal(tp.grad, t1.grad(h1)));
    CHECK(bit_equal(tp.output, t1.value(h1)));
}

TEST_CASE("tap rejects foreign value ids") {
    Tape t;
    CHECK_THROWS_AS((void)t.tap(Val{5}, 0), TapeError);
    CHECK_THROWS_AS((void)t.tap(Val{-1}, 0), TapeError);
}

TEST_CASE("tap on the loss itself sees gradient one") {
    Tape t;
    Tensor x = Tensor::from_values({2}, std::vector<double>{3, 4});
    x.requires_grad = true;
    Val xv = t.leaf(x);
    Val s = t.sum(xv);
    Val tapped = t.tap(s, 0);
    t.backward(tapped);
    CHECK(t.taps().front().grad.at(0) == 1.0);
}

TEST_CASE("gather/scatter rows round trip and gradients") {
    Rng rng(21);
    Tensor x = rand_tensor({5, 3}, rng);
    const std::vector<std::int64_t> idx = {4, 0, 2};

    Tape t;
    Tensor xg = x;
    xg.requires_grad = true;
    Val xv = t.leaf(xg);
    Val g = t.gather_rows(xv, idx);
    for (std::size_t r = 0; r < idx.size(); ++r)
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(t.value(g).at(r * 3 + j) == x.at(static_cast<std::size_t>(idx[r]) * 3 + j));

    Val base = t.constant(Tensor::zeros({5, 3}));
    Val back = t.scatter_add_rows(base, g, idx);
    t.backward(t.sum(back));
    for (std::size_t i = 0; i < 5; ++i) {
        const bool picked = i == 4 || i == 0 || i == 2;
        for (std::size_t j = 0; j < 3; ++j) CHECK(t.grad(xv).at(i * 3 + j) == (picked ? 1.0 : 0.0));
    }
}

TEST_CASE("non-finite values are rejected") {
    Tape t;
    Tensor bad = Tensor::zeros({2});
    bad.set(0, std::numeric_limits<double>::quiet_NaN());
    CHECK_THROWS_AS((void)t.constant(bad), NumericError);

    Tensor huge = Tensor::full({2, 2}, 1e308);
    Val h = t.constant(huge);
    CHECK_THROWS_AS((void)t.matmul(h, h), NumericError); // overflow to inf
}

TEST_CASE("f32 path works and mixed dtypes are rejected") {
    Rng rng(2);
    Tensor a32 = rand_tensor({3, 3}, rng, -1, 1, Dtype::F32);
    Tensor b32 = rand_tensor({3, 3}, rng, -1, 1, Dtype::F32);
    Tape t;
    Tensor ag = a32;
    ag.requires_grad = true;
    Val av = t.leaf(ag);
    Val prod = t.matmul(av, t.constant(b32));
    CHECK(t.value(prod).dtype() == Dtype::F32);
    t.backward(t.sum(prod));
    CHECK(t.grad(av).dtype() == Dtype::F32);

    Val a64 = t.constant(rand_tensor({3, 3}, rng));
    CHECK_THROWS_AS((void)t.matmul(av, a64), ShapeError);
}

TEST_CASE("property: finite differences agree for every differentiable op") {
    Rng rng(31337);
    for (int trial = 0; trial < 3; ++trial) {
        Tensor x = rand_tensor({3, 4}, rng);
        Tensor w = rand_tensor({2, 4}, rng);
        Tensor b = rand_tensor({2}, rng);
        const std::vector<int> labels = {1, 0, 1};
        auto forward = [&](const Tensor& wv) {
            Tape t;
            Val xv = t.constant(x);
            Val hv = t.add(t.matmul_nt(xv, t.constant(wv)), t.constant(b));
            Val rv = t.relu(t.scale(hv, 0.7));
            return t.value(t.softmax_cross_entropy(rv, labels)).at(0);
        };
        const Tensor fd = finite_diff(w, forward);
        Tape t;
        Tensor wg = w;
        wg.requires_grad = true;
        Val wv = t.leaf(wg);
        Val hv = t.add(t.matmul_nt(t.constant(x), wv), t.constant(b));
        Val rv = t.relu(t.scale(hv, 0.7));
        t.backward(t.softmax_cross_entropy(rv, labels));
        CHECK(max_rel_err(t.grad(wv), fd) < 1e-6);
    }
}
