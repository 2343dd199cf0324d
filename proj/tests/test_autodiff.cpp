#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fd_check.hpp"
#include "phykan/adam.hpp"
#include "phykan/rng.hpp"
#include "phykan/tensor.hpp"

#include <cmath>
#include <complex>

using namespace phykan;
using namespace phykan::ad;

namespace {

Parameter make_param(const std::string& name, Shape s, Rng& rng, double scale = 1.0) {
    std::vector<double> v(s.count());
    for (auto& x : v) x = scale * rng.normal();
    return Parameter(name, s, std::move(v));
}

}  // namespace

TEST_CASE("matmul identity maps a vector to itself") {
    std::vector<double> eye = {1, 0, 0, 0, 1, 0, 0, 0, 1};
    Tensor I = Tensor::constant({3, 3}, eye);
    Tensor x = Tensor::constant({3, 1}, {0.3, -1.7, 2.5});
    Tensor y = matmul(I, x);
    for (int i = 0; i < 3; ++i) CHECK(y.values()[i] == x.values()[i]);
}

TEST_CASE("sum of concat equals sum of parts") {
    Tensor a = Tensor::constant({1, 3}, {1.0, 2.0, 3.0});
    Tensor b = Tensor::constant({1, 2}, {-4.0, 0.5});
    double lhs = sum_all(concat_cols({a, b})).scalar_value();
    double rhs = sum_all(a).scalar_value() + sum_all(b).scalar_value();
    CHECK(lhs == doctest::Approx(rhs));
}

TEST_CASE("gradient of sum(sin(x)) at zero is all ones") {
    Tape tape;
    Parameter x("x", {1, 4}, {0.0, 0.0, 0.0, 0.0});
    Tensor loss = sum_all(sin(tape.leaf(x)));
    tape.backward(loss);
    for (double g : x.grad()) CHECK(g == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("linear loss gives exact gradient") {
    Tape tape;
    Parameter w("w", {1, 3}, {0.1, 0.2, 0.3});
    Tensor x = Tensor::constant({1, 3}, {5.0, -7.0, 11.0});
    Tensor loss = sum_all(mul(tape.leaf(w), x));
    tape.backward(loss);
    CHECK(w.grad()[0] == 5.0);
    CHECK(w.grad()[1] == -7.0);
    CHECK(w.grad()[2] == 11.0);
}

TEST_CASE("backward on a non-scalar is rejected") {
    Tape tape;
    Parameter w("w", {1, 3}, {1.0, 2.0, 3.0});
    Tensor y = scale(tape.leaf(w), 2.0);
    CHECK_THROWS_AS(tape.backward(y), std::invalid_argument);
}

TEST_CASE("shape mismatch names the shapes") {
    Tensor a = Tensor::constant({1, 3}, {1, 2, 3});
    Tensor b = Tensor::constant({3, 1}, {1, 2, 3});
    try {
        add(a, b);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        std::string msg = e.what();
        CHECK(msg.find("[1,3]") != std::string::npos);
        CHECK(msg.find("[3,1]") != std::string::npos);
    }
}

TEST_CASE("gradients accumulate across backward calls") {
    Tape tape;
    Parameter w("w", {1, 2}, {1.0, 2.0});
    Tensor loss = sum_all(tape.leaf(w));
    tape.backward(loss);
    tape.backward(loss);
    CHECK(w.grad()[0] == 2.0);
    CHECK(w.grad()[1] == 2.0);
    w.zero_grad();
    tape.backward(loss);
    CHECK(w.grad()[0] == 1.0);
}

TEST_CASE("three-layer composition matches central finite differences") {
    Rng rng(42);
    Parameter w1 = make_param("w1", {4, 8}, rng, 0.5);
    Parameter w2 = make_param("w2", {8, 8}, rng, 0.5);
    Parameter w3 = make_param("w3", {8, 1}, rng, 0.5);
    Tensor x = Tensor::constant({5, 4}, [&] {
        std::vector<double> v(20);
        for (auto& e : v) e = rng.normal();
        return v;
    }());

    auto build = [&](Tape& tape) {
        Tensor h1 = silu(matmul(x, tape.leaf(w1)));
        Tensor h2 = sin(matmul(h1, tape.leaf(w2)));
        Tensor h3 = matmul(h2, tape.leaf(w3));
        return mean_all(mul(h3, h3));
    };
    auto loss_fn = [&] {
        Tape t;
        return build(t).scalar_value();
    };
    auto backward_fn = [&] {
        Tape t;
        t.backward(build(t));
    };
    auto rep = testing::fd_gradient_check({&w1, &w2, &w3}, loss_fn, backward_fn, 64);
    CHECK(rep.checked >= 100);
    CHECK(rep.max_rel_err < 1e-5);
}

TEST_CASE("every primitive passes finite-difference checks away from kinks") {
    Rng rng(7);
    // x kept in (0.2, 1.8) so relu/div/power are smooth at the probe points
    Parameter x = [&] {
        std::vector<double> v(12);
        for (auto& e : v) e = 0.2 + 1.6 * rng.uniform();
        return Parameter("x", {3, 4}, std::move(v));
    }();
    Parameter y = [&] {
        std::vector<double> v(12);
        for (auto& e : v) e = 0.5 + rng.uniform();
        return Parameter("y", {3, 4}, std::move(v));
    }();

    using Builder = std::function<Tensor(Tape&)>;
    std::vector<std::pair<std::string, Builder>> cases;
    cases.emplace_back("add", [&](Tape& t) { return add(t.leaf(x), t.leaf(y)); });
    cases.emplace_back("sub", [&](Tape& t) { return sub(t.leaf(x), t.leaf(y)); });
    cases.emplace_back("mul", [&](Tape& t) { return mul(t.leaf(x), t.leaf(y)); });
    cases.emplace_back("div", [&](Tape& t) { return div(t.leaf(x), t.leaf(y)); });
    cases.emplace_back("matmul", [&](Tape& t) { return matmul(t.leaf(x), transpose(t.leaf(y))); });
    cases.emplace_back("power", [&](Tape& t) { return power(t.leaf(x), 3.0); });
    cases.emplace_back("sin", [&](Tape& t) { return sin(t.leaf(x)); });
    cases.emplace_back("cos", [&](Tape& t) { return cos(t.leaf(x)); });
    cases.emplace_back("exp", [&](Tape& t) { return exp(t.leaf(x)); });
    cases.emplace_back("silu", [&](Tape& t) { return silu(t.leaf(x)); });
    cases.emplace_back("relu", [&](Tape& t) { return relu(t.leaf(x)); });
    cases.emplace_back("concat+slice", [&](Tape& t) {
        Tensor c = concat_cols({t.leaf(x), t.leaf(y)});
        return slice_cols(c, 2, 6);
    });
    cases.emplace_back("gather", [&](Tape& t) { return gather_rows(t.leaf(x), {2, 0, 1, 2}); });
    cases.emplace_back("sum_cols", [&](Tape& t) { return sum_cols(t.leaf(x)); });
    cases.emplace_back("colblock_sum", [&](Tape& t) { return colblock_sum(t.leaf(x), 2); });
    cases.emplace_back("tile_rows", [&](Tape& t) { return tile_rows(slice_rows(t.leaf(x), 0, 1), 5); });
    cases.emplace_back("bspline", [&](Tape& t) { return bspline_basis(t.leaf(x), BsplineGrid{}); });
    cases.emplace_back("fourier", [&](Tape& t) { return fourier_features(t.leaf(x), 4, 1.0); });

    for (auto& [name, builder] : cases) {
        CAPTURE(name);
        auto wrap = [&](Tape& t) {
            Tensor o = builder(t);
            return mean_all(mul(o, o));
        };
        auto loss_fn = [&] {
            Tape t;
            return wrap(t).scalar_value();
        };
        auto backward_fn = [&] {
            Tape t;
            t.backward(wrap(t));
        };
        auto rep = testing::fd_gradient_check({&x, &y}, loss_fn, backward_fn, 25);
        CHECK_MESSAGE(rep.max_rel_err < 1e-6, name, " rel err ", rep.max_rel_err);
    }
}

TEST_CASE("complex multiply from paired real channels matches std::complex") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        double ar = rng.normal(), ai = rng.normal(), br = rng.normal(), bi = rng.normal();
        Tensor are = Tensor::scalar(ar), aim = Tensor::scalar(ai);
        Tensor bre = Tensor::scalar(br), bim = Tensor::scalar(bi);
        Tensor re = sub(mul(are, bre), mul(aim, bim));
        Tensor im = add(mul(are, bim), mul(aim, bre));
        auto z = std::complex<double>(ar, ai) * std::complex<double>(br, bi);
        CHECK(std::fabs(re.scalar_value() - z.real()) < 1e-14);
        CHECK(std::fabs(im.scalar_value() - z.imag()) < 1e-14);
    }
}

TEST_CASE("B-spline basis sums to one inside the grid") {
    BsplineGrid grid;
    double b[32], db[32];
    for (double xv = -2.0; xv <= 2.0001; xv += 0.0917) {
        double x = std::min(xv, 2.0);
        grid.eval(x, b, db);
        double s = 0.0, ds = 0.0;
        for (int i = 0; i < grid.num_basis(); ++i) {
            s += b[i];
            ds += db[i];
        }
        CHECK(std::fabs(s - 1.0) < 1e-12);
        CHECK(std::fabs(ds) < 1e-10);
    }
}

TEST_CASE("B-spline extrapolates linearly outside the grid") {
    BsplineGrid grid;
    double b1[32], db1[32], b2[32], db2[32], bh[32], dbh[32];
    grid.eval(3.0, b1, db1);
    grid.eval(4.0, b2, db2);
    grid.eval(2.0, bh, dbh);
    for (int i = 0; i < grid.num_basis(); ++i) {
        CHECK(b1[i] == doctest::Approx(bh[i] + dbh[i] * 1.0).epsilon(1e-12));
        CHECK(b2[i] - b1[i] == doctest::Approx(db1[i]).epsilon(1e-12));
    }
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
    Parameter w("w", {1, 3}, {1.0, -2.0, 3.0});
    Adam opt({&w}, {});
    w.zero_grad();
    opt.step();
    CHECK(w.value()[0] == 1.0);
    CHECK(w.value()[1] == -2.0);
    CHECK(w.value()[2] == 3.0);
}

TEST_CASE("adam: constant gradient approaches the nominal learning rate") {
    Parameter w("w", {1, 1}, {0.0});
    AdamConfig cfg;
    Adam opt({&w}, cfg);
    double prev = 0.0;
    double last_step = 0.0;
    for (int i = 0; i < 400; ++i) {
        w.grad()[0] = 1.0;
        prev = w.value()[0];
        opt.step();
        last_step = prev - w.value()[0];
    }
    CHECK(last_step == doctest::Approx(cfg.lr).epsilon(1e-6));
}

TEST_CASE("adam: first-step update matches the hand-evaluated formula") {
    // g=1, lr=1e-3: m=0.1, v=1e-3, mhat=1, vhat=1 -> delta = -1e-3/(1+1e-8)
    Parameter w("w", {1, 1}, {1.0});
    Adam opt({&w}, {});
    w.grad()[0] = 1.0;
    opt.step();
    double expected = 1.0 - 1e-3 * (1.0 / (1.0 + 1e-8));
    CHECK(w.value()[0] == doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("identical seeds give bit-identical parameter streams") {
    Rng a(99), b(99);
    for (int i = 0; i < 1000; ++i) CHECK(a.normal() == b.normal());
}
