#include <catch_amalgamated.hpp>

#include <cmath>
#include <functional>

#include "wunet/autodiff.hpp"
#include "wunet/fusion.hpp"
#include "wunet/rng.hpp"

using namespace wunet;

namespace {

// Hybrid absolute/relative bound for finite-difference comparisons.
void expect_close(double got, double want, double tol) {
    REQUIRE(std::fabs(got - want) <= tol * std::max(1.0, std::fabs(want)));
}

double loss_value(const std::function<VarPtr(Tape&)>& build) {
    Tape t;
    return build(t)->value[0];
}

// Central finite differences against the analytic gradient for every element
// of every leaf. The build closure must reconstruct the graph from the leaves'
// current values each call.
void fd_check(const std::function<VarPtr(Tape&)>& build, const std::vector<VarPtr>& leaves,
              double h, double tol) {
    for (const auto& l : leaves) std::fill(l->grad.begin(), l->grad.end(), 0.0f);
    Tape tape;
    VarPtr loss = build(tape);
    tape.backward(loss);
    for (const auto& leaf : leaves)
        for (size_t i = 0; i < leaf->size(); ++i) {
            float keep = leaf->value[i];
            leaf->value[i] = static_cast<float>(keep + h);
            double fp = loss_value(build);
            leaf->value[i] = static_cast<float>(keep - h);
            double fm = loss_value(build);
            leaf->value[i] = keep;
            expect_close(leaf->grad[i], (fp - fm) / (2.0 * h), tol);
        }
}

std::vector<float> random_values(size_t n, uint64_t seed, double lo, double hi) {
    Rng r(seed);
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(lo + (hi - lo) * r.next_double());
    return v;
}

// Dense reference conv: cross-correlation, stride 1, zero pad (k-1)/2.
std::vector<float> conv_ref(const std::vector<float>& x, int cin, int h, int w,
                            const std::vector<float>& k, int cout, int ksz,
                            const std::vector<float>& bias) {
    int p = ksz / 2;
    std::vector<float> out(static_cast<size_t>(cout) * h * w, 0.0f);
    for (int o = 0; o < cout; ++o)
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                double acc = bias[o];
                for (int c = 0; c < cin; ++c)
                    for (int u = 0; u < ksz; ++u)
                        for (int v = 0; v < ksz; ++v) {
                            int ii = i + u - p, jj = j + v - p;
                            if (ii < 0 || ii >= h || jj < 0 || jj >= w) continue;
                            acc += static_cast<double>(
                                       k[((static_cast<size_t>(o) * cin + c) * ksz + u) * ksz + v]) *
                                   x[(static_cast<size_t>(c) * h + ii) * w + jj];
                        }
                out[(static_cast<size_t>(o) * h + i) * w + j] = static_cast<float>(acc);
            }
    return out;
}

}  // namespace

TEST_CASE("conv2d forward matches a dense reference") {
    const int cin = 2, h = 4, w = 5, cout = 3;
    auto xv = random_values(static_cast<size_t>(cin) * h * w, 1, -1.0, 1.0);
    auto bv = random_values(cout, 2, -0.5, 0.5);
    for (int ksz : {1, 3}) {
        auto kv = random_values(static_cast<size_t>(cout) * cin * ksz * ksz, 3 + ksz, -0.6, 0.6);
        VarPtr x = make_var({cin, h, w}, xv);
        VarPtr kernel = make_var({cout, cin, ksz, ksz}, kv);
        VarPtr bias = make_var({cout}, bv);
        Tape t;
        VarPtr out = ad::conv2d(t, x, kernel, bias);
        REQUIRE(out->shape == std::vector<int>({cout, h, w}));
        auto want = conv_ref(xv, cin, h, w, kv, cout, ksz, bv);
        for (size_t i = 0; i < want.size(); ++i)
            REQUIRE(out->value[i] == Catch::Approx(want[i]).margin(2e-5));
    }
}

TEST_CASE("conv2d gradients pass finite differences") {
    const int cin = 2, h = 4, w = 4, cout = 2;
    for (int ksz : {1, 3}) {
        VarPtr x = make_var({cin, h, w}, random_values(static_cast<size_t>(cin) * h * w, 10, -1.0, 1.0));
        VarPtr kernel = make_var({cout, cin, ksz, ksz},
                                 random_values(static_cast<size_t>(cout) * cin * ksz * ksz, 11, -0.5, 0.5));
        VarPtr bias = make_var({cout}, random_values(cout, 12, -0.3, 0.3));
        auto target = random_values(static_cast<size_t>(cout) * h * w, 13, 0.0, 1.0);
        auto build = [&](Tape& t) {
            return ad::sum_squared_error(t, ad::conv2d(t, x, kernel, bias), target);
        };
        fd_check(build, {x, kernel, bias}, 1e-3, 2e-3);
    }
}

TEST_CASE("relu forward and gradient away from the kink") {
    // FD around the kink is meaningless, so inputs sit at least 0.35 from 0.
    Rng r(20);
    std::vector<float> vals(24);
    for (auto& v : vals) {
        double mag = 0.35 + 0.4 * r.next_double();
        v = static_cast<float>(r.next_double() < 0.5 ? -mag : mag);
    }
    VarPtr x = make_var({2, 3, 4}, vals);
    {
        Tape t;
        VarPtr y = ad::relu(t, x);
        for (size_t i = 0; i < vals.size(); ++i)
            REQUIRE(y->value[i] == std::max(0.0f, vals[i]));
    }
    auto target = random_values(24, 21, 0.0, 1.0);
    auto build = [&](Tape& t) { return ad::sum_squared_error(t, ad::relu(t, x), target); };
    fd_check(build, {x}, 1e-2, 2e-3);
    // Negative inputs get exactly zero gradient.
    std::fill(x->grad.begin(), x->grad.end(), 0.0f);
    Tape t;
    VarPtr loss = build(t);
    t.backward(loss);
    for (size_t i = 0; i < vals.size(); ++i)
        if (vals[i] < 0.0f) REQUIRE(x->grad[i] == 0.0f);
}

TEST_CASE("concat_channels stacks values and splits gradients") {
    VarPtr a = make_var({1, 2, 2}, {1, 2, 3, 4});
    VarPtr b = make_var({2, 2, 2}, random_values(8, 30, -1.0, 1.0));
    {
        Tape t;
        VarPtr c = ad::concat_channels(t, a, b);
        REQUIRE(c->shape == std::vector<int>({3, 2, 2}));
        REQUIRE(c->value[0] == 1.0f);
        REQUIRE(c->value[4] == b->value[0]);
    }
    auto target = random_values(12, 31, 0.0, 1.0);
    auto build = [&](Tape& t) {
        return ad::sum_squared_error(t, ad::concat_channels(t, a, b), target);
    };
    fd_check(build, {a, b}, 1e-3, 2e-3);
}

TEST_CASE("add_scaled and scale are linear with the stated coefficients") {
    VarPtr a = make_var({1, 2, 3}, random_values(6, 40, -1.0, 1.0));
    VarPtr b = make_var({1, 2, 3}, random_values(6, 41, -1.0, 1.0));
    {
        Tape t;
        VarPtr y = ad::add_scaled(t, a, b, 0.7f, -0.2f);
        for (size_t i = 0; i < 6; ++i)
            REQUIRE(y->value[i] == Catch::Approx(0.7f * a->value[i] - 0.2f * b->value[i]).margin(1e-7));
        VarPtr z = ad::scale(t, a, 2.5f);
        for (size_t i = 0; i < 6; ++i)
            REQUIRE(z->value[i] == Catch::Approx(2.5f * a->value[i]).margin(1e-7));
    }
    auto target = random_values(6, 42, 0.0, 1.0);
    auto build = [&](Tape& t) {
        VarPtr y = ad::add_scaled(t, a, b, 0.7f, -0.2f);
        return ad::sum_squared_error(t, ad::scale(t, y, 2.5f), target);
    };
    fd_check(build, {a, b}, 1e-3, 2e-3);
}

TEST_CASE("dwt_node and idwt_node differentiate through the transforms") {
    VarPtr x = make_var({1, 4, 4}, random_values(16, 50, -1.0, 1.0));
    auto target = random_values(16, 51, 0.0, 1.0);
    auto build_d = [&](Tape& t) { return ad::sum_squared_error(t, ad::dwt_node(t, x), target); };
    fd_check(build_d, {x}, 1e-3, 2e-3);

    VarPtr s = make_var({4, 2, 2}, random_values(16, 52, -1.0, 1.0));
    auto build_i = [&](Tape& t) { return ad::sum_squared_error(t, ad::idwt_node(t, s), target); };
    fd_check(build_i, {s}, 1e-3, 2e-3);

    Tape t;
    VarPtr round = ad::idwt_node(t, ad::dwt_node(t, x));
    for (size_t i = 0; i < 16; ++i)
        REQUIRE(round->value[i] == Catch::Approx(x->value[i]).margin(1e-6));
}

TEST_CASE("pca_node differentiates through a fixed basis with nonzero mean") {
    // Basis fitted on a different tensor: mean is a constant offset and must
    // not perturb the gradient.
    ImageTensor other(1, 4, 4);
    Rng r(60);
    for (auto& v : other.data) v = static_cast<float>(r.next_double());
    auto basis = std::make_shared<const PcaBasis>(fit_pca_from_tensor(other));
    REQUIRE(basis->mean[0] != 0.0f);

    VarPtr x = make_var({1, 4, 4}, random_values(16, 61, -1.0, 1.0));
    auto target = random_values(16, 62, 0.0, 1.0);
    auto build = [&](Tape& t) {
        return ad::sum_squared_error(t, ad::pca_node(t, x, basis), target);
    };
    fd_check(build, {x}, 1e-3, 2e-3);
}

TEST_CASE("sum_squared_error value and gradient oracles") {
    VarPtr rr = make_var({2}, {1.0f, 2.0f});
    Tape t;
    VarPtr loss = ad::sum_squared_error(t, rr, {0.5f, 0.5f});
    REQUIRE(loss->value[0] == Catch::Approx(2.5).margin(1e-7));  // 0.25 + 2.25
    t.backward(loss);
    REQUIRE(rr->grad[0] == Catch::Approx(1.0).margin(1e-6));  // 2 (1 - 0.5)
    REQUIRE(rr->grad[1] == Catch::Approx(3.0).margin(1e-6));  // 2 (2 - 0.5)
}

TEST_CASE("add_scalars sums values and fans out the gradient") {
    VarPtr a = make_var({1}, std::vector<float>{1.5f});
    VarPtr b = make_var({1}, std::vector<float>{2.0f});
    Tape t;
    VarPtr s = ad::add_scalars(t, {a, b});
    REQUIRE(s->value[0] == 3.5f);
    t.backward(s);
    REQUIRE(a->grad[0] == 1.0f);
    REQUIRE(b->grad[0] == 1.0f);
    REQUIRE_THROWS_AS(ad::add_scalars(t, {}), Error);
}

TEST_CASE("ops reject mismatched shapes") {
    Tape t;
    VarPtr x = make_var({2, 4, 4});
    REQUIRE_THROWS_AS(ad::conv2d(t, x, make_var({2, 2, 2, 2}), make_var({2})), Error);  // even k
    REQUIRE_THROWS_AS(ad::conv2d(t, x, make_var({2, 3, 3, 3}), make_var({2})), Error);  // cin
    REQUIRE_THROWS_AS(ad::conv2d(t, x, make_var({2, 2, 3, 3}), make_var({3})), Error);  // bias
    REQUIRE_THROWS_AS(ad::concat_channels(t, x, make_var({1, 4, 5})), Error);
    REQUIRE_THROWS_AS(ad::add_scaled(t, x, make_var({2, 4, 5}), 1.0f, 1.0f), Error);
    REQUIRE_THROWS_AS(ad::idwt_node(t, make_var({3, 2, 2})), Error);  // channels not 4C
    REQUIRE_THROWS_AS(ad::dwt_node(t, make_var({1, 3, 4})), Error);   // odd H
    REQUIRE_THROWS_AS(ad::sum_squared_error(t, x, std::vector<float>(5, 0.0f)), Error);
    REQUIRE_THROWS_AS(t.backward(x), Error);  // loss must be scalar
}

TEST_CASE("non-finite op outputs raise NumericFault") {
    Tape t;
    VarPtr x = make_var({1, 2, 2}, {1.0f, std::numeric_limits<float>::quiet_NaN(), 0.0f, 0.0f});
    VarPtr kernel = make_var({1, 1, 1, 1}, std::vector<float>{1.0f});
    VarPtr bias = make_var({1}, std::vector<float>{0.0f});
    try {
        ad::conv2d(t, x, kernel, bias);
        FAIL("expected an error");
    } catch (const Error& e) {
        REQUIRE(e.code() == ErrorCode::NumericFault);
    }
    VarPtr big = make_var({1}, std::vector<float>{std::numeric_limits<float>::max()});
    REQUIRE_THROWS_AS(ad::scale(t, big, 1e10f), Error);  // overflows to inf
}

TEST_CASE("parameter sets reject duplicate names and track totals") {
    ParameterSet pset;
    VarPtr k = pset.add("enc0.k", ParamKind::Kernel, {4, 2, 3, 3});
    pset.add("enc0.b", ParamKind::Bias, {4});
    try {
        pset.add("enc0.k", ParamKind::Kernel, {1, 1, 1, 1});
        FAIL("expected an error");
    } catch (const Error& e) {
        REQUIRE(e.code() == ErrorCode::ConfigInvalid);
    }
    REQUIRE(pset.total_values() == 4 * 2 * 3 * 3 + 4);
    REQUIRE(pset.find("enc0.k") != nullptr);
    REQUIRE(*pset.find("enc0.k") == k);
    REQUIRE(pset.find("missing") == nullptr);
    k->grad.assign(k->size(), 2.0f);
    pset.zero_grad();
    for (float g : k->grad) REQUIRE(g == 0.0f);
}

TEST_CASE("init_parameters draws He kernels and zero biases") {
    ParameterSet pset;
    VarPtr k = pset.add("k", ParamKind::Kernel, {16, 8, 3, 3});
    VarPtr b = pset.add("b", ParamKind::Bias, {16});
    b->value.assign(16, 5.0f);
    init_parameters(pset, 11);
    for (float v : b->value) REQUIRE(v == 0.0f);
    double mean = 0, var = 0;
    for (float v : k->value) mean += v;
    mean /= k->size();
    for (float v : k->value) var += (v - mean) * (v - mean);
    var /= k->size();
    double want_sd = std::sqrt(2.0 / (8 * 3 * 3));  // fan_in = Cin k k
    REQUIRE(std::fabs(mean) < 0.02);
    REQUIRE(std::sqrt(var) == Catch::Approx(want_sd).epsilon(0.15));

    ParameterSet again;
    VarPtr k2 = again.add("k", ParamKind::Kernel, {16, 8, 3, 3});
    again.add("b", ParamKind::Bias, {16});
    init_parameters(again, 11);
    REQUIRE(k2->value == k->value);
    init_parameters(again, 12);
    REQUIRE(k2->value != k->value);
}

TEST_CASE("the tape records nodes only when gradients are needed") {
    Tape t;
    VarPtr frozen = make_var({1, 2, 2}, random_values(4, 70, 0.1, 1.0), /*requires_grad=*/false);
    ad::relu(t, frozen);
    REQUIRE(t.node_count() == 0);
    VarPtr hot = make_var({1, 2, 2}, random_values(4, 71, 0.1, 1.0));
    ad::relu(t, hot);
    REQUIRE(t.node_count() == 1);
}
