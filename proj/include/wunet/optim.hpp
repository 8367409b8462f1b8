// Bias-corrected Adam and the warmup + cosine learning-rate schedule.
#pragma once

#include <cmath>
#include <vector>

#include "wunet/autodiff.hpp"
#include "wunet/core.hpp"

namespace wunet {

struct TrainConfig {
    int batch_size = 4;
    int epochs = 20;
    double lr_init = 1e-4;
    double lr_min = 1e-6;
    double warmup_fraction = 0.05;
    float sigma = 25.0f / 255.0f;  // Gaussian noise std on the [0,1] scale
    uint64_t seed = 0;
    int patch_size = 32;
    int patches_per_image = 4;
    int checkpoint_every = 10;  // epochs; 0 disables periodic checkpoints

    void validate() const {
        if (batch_size < 1) fail(ErrorCode::ConfigInvalid, "batch_size must be >= 1");
        if (epochs < 1) fail(ErrorCode::ConfigInvalid, "epochs must be >= 1");
        if (!(lr_init > 0.0) || !(lr_min > 0.0) || lr_min > lr_init)
            fail(ErrorCode::ConfigInvalid, "need 0 < lr_min <= lr_init");
        if (!(warmup_fraction > 0.0) || !(warmup_fraction < 1.0))
            fail(ErrorCode::ConfigInvalid, "warmup_fraction must be in (0,1)");
        if (sigma < 0.0f) fail(ErrorCode::ConfigInvalid, "sigma must be >= 0");
        if (patch_size < 2) fail(ErrorCode::ConfigInvalid, "patch_size must be >= 2");
        if (patches_per_image < 1) fail(ErrorCode::ConfigInvalid, "patches_per_image must be >= 1");
        if (checkpoint_every < 0) fail(ErrorCode::ConfigInvalid, "checkpoint_every must be >= 0");
    }
};

/// First/second moments per parameter tensor, in ParameterSet registration
/// order. t counts completed steps.
struct AdamState {
    static constexpr double beta1 = 0.9;
    static constexpr double beta2 = 0.999;
    static constexpr double epsilon = 1e-8;

    std::vector<std::vector<float>> m;
    std::vector<std::vector<float>> v;
    int64_t t = 0;

    static AdamState for_params(const ParameterSet& pset) {
        AdamState s;
        s.m.reserve(pset.items.size());
        s.v.reserve(pset.items.size());
        for (const auto& it : pset.items) {
            s.m.emplace_back(it.tensor->size(), 0.0f);
            s.v.emplace_back(it.tensor->size(), 0.0f);
        }
        return s;
    }

    bool matches(const ParameterSet& pset) const {
        if (m.size() != pset.items.size() || v.size() != pset.items.size()) return false;
        for (size_t i = 0; i < m.size(); ++i)
            if (m[i].size() != pset.items[i].tensor->size() ||
                v[i].size() != pset.items[i].tensor->size())
                return false;
        return true;
    }
};

/// One standard Adam update from the currently populated gradients.
/// Gradients are left untouched; the caller zeroes them.
inline void adam_step(ParameterSet& pset, AdamState& state, double lr) {
    if (!state.matches(pset)) fail(ErrorCode::ShapeMismatch, "adam state does not match parameters");
    state.t += 1;
    const float c1 = static_cast<float>(1.0 / (1.0 - std::pow(AdamState::beta1, static_cast<double>(state.t))));
    const float c2 = static_cast<float>(1.0 / (1.0 - std::pow(AdamState::beta2, static_cast<double>(state.t))));
    const float b1 = static_cast<float>(AdamState::beta1);
    const float b2 = static_cast<float>(AdamState::beta2);
    const float eps = static_cast<float>(AdamState::epsilon);
    const float lrf = static_cast<float>(lr);

    for (size_t i = 0; i < pset.items.size(); ++i) {
        auto& theta = pset.items[i].tensor->value;
        const auto& grad = pset.items[i].tensor->grad;
        auto& m = state.m[i];
        auto& v = state.v[i];
        for (size_t j = 0; j < theta.size(); ++j) {
            float g = grad[j];
            m[j] = b1 * m[j] + (1.0f - b1) * g;
            v[j] = b2 * v[j] + (1.0f - b2) * g * g;
            float update = lrf * (m[j] * c1) / (std::sqrt(v[j] * c2) + eps);
            theta[j] -= update;
            if (!std::isfinite(theta[j]))
                fail(ErrorCode::NumericFault, "adam_step produced a non-finite parameter");
        }
    }
}

/// Linear ramp lr_min -> lr_init over the first ceil(warmup_fraction*total)
/// steps, then cosine decay lr_init -> lr_min. Continuous at the junction,
/// bounded by [lr_min, lr_init].
inline double lr_at(int64_t step, int64_t total_steps, const TrainConfig& cfg) {
    if (step < 0 || step > total_steps) fail(ErrorCode::ConfigInvalid, "lr_at: step out of range");
    int64_t warm = static_cast<int64_t>(
        std::ceil(cfg.warmup_fraction * static_cast<double>(total_steps)));
    if (step <= warm) {
        if (warm == 0) return cfg.lr_init;
        double f = static_cast<double>(step) / static_cast<double>(warm);
        return cfg.lr_min + (cfg.lr_init - cfg.lr_min) * f;
    }
    double f = static_cast<double>(step - warm) / static_cast<double>(total_steps - warm);
    return cfg.lr_min + 0.5 * (cfg.lr_init - cfg.lr_min) * (1.0 + std::cos(3.141592653589793 * f));
}

}  // namespace wunet
