// The fused downsample that replaces pooling: alpha * DWT(x) + beta * PCA(x),
// both branches producing (4C, H/2, W/2).
#pragma once

#include <memory>

#include "wunet/core.hpp"
#include "wunet/pca.hpp"
#include "wunet/rng.hpp"
#include "wunet/wavelet.hpp"

#include <Eigen/QR>

namespace wunet {

struct FusionConfig {
    float alpha = 1.0f;
    float beta = 1.0f;

    void validate() const {
        if (!std::isfinite(alpha) || !std::isfinite(beta))
            fail(ErrorCode::ConfigInvalid, "fusion coefficients must be finite");
    }
};

/// How the PCA branch obtains its basis.
///   PerInput:    fit from the very patches being projected, each call.
///   Identity:    identity rows (space-to-depth).
///   FixedRandom: a seeded random orthonormal basis, constant per dim.
///   Provided:    caller supplies the basis.
enum class BasisPolicyKind { PerInput, Identity, FixedRandom, Provided };

struct BasisPolicy {
    BasisPolicyKind kind = BasisPolicyKind::PerInput;
    uint64_t seed = 0;                        // FixedRandom only
    std::shared_ptr<const PcaBasis> provided;  // Provided only

    static BasisPolicy per_input() { return {}; }
    static BasisPolicy identity() { return {BasisPolicyKind::Identity, 0, nullptr}; }
    static BasisPolicy fixed_random(uint64_t seed) {
        return {BasisPolicyKind::FixedRandom, seed, nullptr};
    }
    static BasisPolicy provided_basis(std::shared_ptr<const PcaBasis> b) {
        return {BasisPolicyKind::Provided, 0, std::move(b)};
    }
};

/// Deterministic random orthonormal d x d basis (QR of seeded Gaussians,
/// rows sign-fixed the same way as fit_pca).
inline PcaBasis random_orthonormal_basis(int dim, uint64_t seed) {
    Rng rng(seed);
    Eigen::MatrixXd g(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) g(i, j) = rng.normal();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ();
    Eigen::MatrixXd rows = q.transpose();
    detail::fix_row_signs(rows);

    PcaBasis out;
    out.dim = dim;
    out.rank = dim;
    out.mean.assign(dim, 0.0f);
    out.singular_values.assign(dim, 0.0f);
    out.basis.resize(static_cast<size_t>(dim) * dim);
    for (int r = 0; r < dim; ++r)
        for (int c = 0; c < dim; ++c)
            out.basis[static_cast<size_t>(r) * dim + c] = static_cast<float>(rows(r, c));
    return out;
}

inline PcaBasis resolve_basis(const ImageTensor& x, const BasisPolicy& policy) {
    int d = 4 * x.channels;
    switch (policy.kind) {
        case BasisPolicyKind::PerInput: return fit_pca_from_tensor(x);
        case BasisPolicyKind::Identity: return identity_basis(d);
        case BasisPolicyKind::FixedRandom: return random_orthonormal_basis(d, policy.seed);
        case BasisPolicyKind::Provided:
            if (!policy.provided) fail(ErrorCode::ConfigInvalid, "no provided basis");
            return *policy.provided;
    }
    fail(ErrorCode::ConfigInvalid, "bad basis policy");
}

/// alpha * DWT(x) + beta * PCA(x). A branch with coefficient exactly 0 is
/// skipped, so (1, 0) reproduces dwt2 bitwise and no basis fit happens.
inline ImageTensor fused_downsample(const ImageTensor& x, const FusionConfig& cfg,
                                    const BasisPolicy& policy = BasisPolicy::per_input()) {
    cfg.validate();
    require_even_dims(x.height, x.width, "fused_downsample");

    ImageTensor out(4 * x.channels, x.height / 2, x.width / 2);
    if (cfg.alpha != 0.0f) {
        SubbandStack s = dwt2(x);
        for (size_t i = 0; i < out.size(); ++i) out.data[i] = cfg.alpha * s.data[i];
    }
    if (cfg.beta != 0.0f) {
        PcaBasis basis = resolve_basis(x, policy);
        ImageTensor proj = pca_project(x, basis);
        for (size_t i = 0; i < out.size(); ++i) out.data[i] += cfg.beta * proj.data[i];
    }
    return out;
}

}  // namespace wunet
