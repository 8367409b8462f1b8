// Fast invariant suite behind `selftest`: wavelet round trip, PCA
// orthonormality, a conv2d gradient check, and the metric identities.
// SELFTEST_INJECT=<check name> flips that check's measured error to force a
// failure; the hook exists so the failure path itself stays testable.
#pragma once

#include <cstdlib>
#include <string>
#include <vector>

#include "wunet/autodiff.hpp"
#include "wunet/metrics.hpp"
#include "wunet/pca.hpp"
#include "wunet/rng.hpp"
#include "wunet/wavelet.hpp"

namespace wunet {

struct SelfTestCheck {
    std::string name;
    bool passed = false;
    std::string detail;
};

namespace detail {

inline bool inject_requested(const char* name) {
    const char* v = std::getenv("SELFTEST_INJECT");
    return v != nullptr && std::string(v) == name;
}

inline void validate_inject_value() {
    const char* v = std::getenv("SELFTEST_INJECT");
    if (!v || !*v) return;
    std::string s(v);
    if (s != "dwt" && s != "pca" && s != "grad" && s != "metric")
        fail(ErrorCode::ConfigInvalid, "SELFTEST_INJECT names no known check: " + s);
}

inline std::string err_detail(const char* what, double err, double tol) {
    std::ostringstream os;
    os << what << " err " << err << " (tol " << tol << ")";
    return os.str();
}

}  // namespace detail

inline SelfTestCheck selftest_dwt() {
    Rng rng(11);
    double worst = 0.0, worst_energy = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
        ImageTensor x(3, 16, 16);
        for (float& v : x.data) v = static_cast<float>(rng.next_double());
        SubbandStack s = dwt2(x);
        ImageTensor back = idwt2(s);
        for (size_t i = 0; i < x.size(); ++i)
            worst = std::max(worst, static_cast<double>(std::abs(back.data[i] - x.data[i])));
        double ex = sum_squares(x.data), es = sum_squares(s.data);
        worst_energy = std::max(worst_energy, std::abs(es - ex) / ex);
    }
    if (detail::inject_requested("dwt")) worst += 1.0;
    SelfTestCheck c{"dwt", worst <= 1e-6 && worst_energy <= 1e-5,
                    detail::err_detail("roundtrip", worst, 1e-6)};
    return c;
}

inline SelfTestCheck selftest_pca() {
    Rng rng(13);
    const int n = 40, d = 12;
    std::vector<float> samples(static_cast<size_t>(n) * d);
    for (float& v : samples) v = static_cast<float>(rng.normal());
    PcaBasis basis = fit_pca(samples, n, d, d);

    double worst = 0.0;
    for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) {
            double dot = 0.0;
            for (int j = 0; j < d; ++j)
                dot += static_cast<double>(basis.b(r, j)) * basis.b(c, j);
            worst = std::max(worst, std::abs(dot - (r == c ? 1.0 : 0.0)));
        }
    if (detail::inject_requested("pca")) worst += 1.0;
    return {"pca", worst <= 1e-5, detail::err_detail("orthonormality", worst, 1e-5)};
}

inline SelfTestCheck selftest_grad() {
    Rng rng(17);
    Tape tape;
    VarPtr x = make_var({2, 6, 6});
    VarPtr k = make_var({2, 2, 3, 3});
    VarPtr b = make_var({2});
    for (float& v : x->value) v = static_cast<float>(rng.normal(0.0, 0.5));
    for (float& v : k->value) v = static_cast<float>(rng.normal(0.0, 0.5));
    for (float& v : b->value) v = static_cast<float>(rng.normal(0.0, 0.5));

    VarPtr out = ad::conv2d(tape, x, k, b);
    std::vector<float> target(out->size(), 0.0f);
    VarPtr loss = ad::sum_squared_error(tape, out, target);
    tape.backward(loss);

    auto loss_at = [&](VarPtr t, size_t i, float v) {
        float saved = t->value[i];
        t->value[i] = v;
        Tape tp;
        VarPtr o = ad::conv2d(tp, x, k, b);
        double acc = 0.0;
        for (float u : o->value) acc += static_cast<double>(u) * u;
        t->value[i] = saved;
        return acc;
    };

    double worst = 0.0;
    const float h = 1e-3f;
    for (size_t i = 0; i < k->size(); i += 5) {
        double fd = (loss_at(k, i, k->value[i] + h) - loss_at(k, i, k->value[i] - h)) / (2.0 * h);
        double an = k->grad[i];
        double denom = std::max({std::abs(fd), std::abs(an), 1e-4});
        worst = std::max(worst, std::abs(fd - an) / denom);
    }
    if (detail::inject_requested("grad")) worst += 1.0;
    return {"grad", worst <= 1e-3, detail::err_detail("conv2d fd", worst, 1e-3)};
}

inline SelfTestCheck selftest_metric() {
    double err = 0.0;
    PsnrResult p = psnr_from_mse(0.01, 1.0);
    if (p.infinite || p.db != 20.0) err = std::max(err, std::abs(p.db - 20.0) + (p.infinite ? 1.0 : 0.0));

    Rng rng(19);
    ImageTensor x(3, 16, 16);
    for (float& v : x.data) v = static_cast<float>(rng.next_double());
    MetricsConfig cfg;
    cfg.ssim_window = 11;
    err = std::max(err, std::abs(ssim(x, x, cfg) - 1.0));

    if (detail::inject_requested("metric")) err += 1.0;
    return {"metric", err <= 1e-9, detail::err_detail("identity", err, 1e-9)};
}

/// Runs all checks. Throws ConfigInvalid when SELFTEST_INJECT names no
/// known check.
inline std::vector<SelfTestCheck> run_selftests() {
    detail::validate_inject_value();
    return {selftest_dwt(), selftest_pca(), selftest_grad(), selftest_metric()};
}

}  // namespace wunet
