// The denoising U-Net: conv encoder stages whose downsampling is the fused
// wavelet+PCA transform, IDWT upsampling with skip connections, and a
// residual head. denoise() = clamp(y - forward(y), 0, 1) with reflection
// padding for dims not divisible by 2^depth.
#pragma once

#include <memory>
#include <string>
#include <vector>

#include "wunet/autodiff.hpp"
#include "wunet/fusion.hpp"
#include "wunet/imageops.hpp"

namespace wunet {

struct ModelConfig {
    int in_channels = 3;
    int base_channels = 16;
    int depth = 2;
    FusionConfig fusion;
    uint64_t seed = 0;
    // Per-input basis is the default behavior; the other policies exist for
    // controlled experiments where the PCA map must be a fixed linear op.
    BasisPolicy basis_policy = BasisPolicy::per_input();

    void validate() const {
        if (in_channels < 1) fail(ErrorCode::ConfigInvalid, "in_channels must be >= 1");
        if (base_channels < 1) fail(ErrorCode::ConfigInvalid, "base_channels must be >= 1");
        if (depth < 1 || depth > 8) fail(ErrorCode::ConfigInvalid, "depth must be in [1, 8]");
        fusion.validate();
    }

    int stage_width(int stage) const { return base_channels << stage; }
    int alignment() const { return 1 << depth; }
};

class Model {
public:
    explicit Model(ModelConfig cfg) : cfg_(std::move(cfg)) {
        cfg_.validate();
        build();
        init_parameters(params_, cfg_.seed);
        // Zero residual head: the untrained model is the identity denoiser,
        // which keeps early training out of the output-shrinking regime that
        // tends to kill narrow ReLU layers.
        std::fill(head_k_->value.begin(), head_k_->value.end(), 0.0f);
        fixed_bases_.assign(static_cast<size_t>(cfg_.depth), nullptr);
    }

    const ModelConfig& config() const { return cfg_; }
    ParameterSet& params() { return params_; }
    const ParameterSet& params() const { return params_; }

    /// Residual map R(y). H and W must be divisible by 2^depth.
    VarPtr forward(Tape& tape, const VarPtr& x) const {
        ad::require_chw(x, "forward");
        if (x->dim(0) != cfg_.in_channels)
            fail(ErrorCode::ShapeMismatch, "forward: input channel count mismatch");
        int m = cfg_.alignment();
        if (x->dim(1) % m != 0 || x->dim(2) % m != 0)
            fail(ErrorCode::ShapeMismatch, "forward: H and W must be divisible by 2^depth");

        std::vector<VarPtr> skips;
        skips.reserve(static_cast<size_t>(cfg_.depth));
        VarPtr h = x;
        for (int i = 0; i < cfg_.depth; ++i) {
            const auto& st = enc_[static_cast<size_t>(i)];
            h = ad::relu(tape, ad::conv2d(tape, h, st.conv1_k, st.conv1_b));
            h = ad::relu(tape, ad::conv2d(tape, h, st.conv2_k, st.conv2_b));
            skips.push_back(h);
            h = fused_down(tape, h, i);
            h = ad::conv2d(tape, h, st.down_k, st.down_b);
        }

        h = ad::relu(tape, ad::conv2d(tape, h, bot1_k_, bot1_b_));
        h = ad::relu(tape, ad::conv2d(tape, h, bot2_k_, bot2_b_));

        for (int i = cfg_.depth - 1; i >= 0; --i) {
            const auto& st = dec_[static_cast<size_t>(i)];
            h = ad::conv2d(tape, h, st.up_k, st.up_b);
            h = ad::idwt_node(tape, h);
            h = ad::concat_channels(tape, h, skips[static_cast<size_t>(i)]);
            h = ad::relu(tape, ad::conv2d(tape, h, st.conv1_k, st.conv1_b));
            h = ad::relu(tape, ad::conv2d(tape, h, st.conv2_k, st.conv2_b));
        }

        return ad::conv2d(tape, h, head_k_, head_b_);
    }

    /// clamp(y - forward(y), 0, 1), padding odd dims by reflection to the
    /// next multiple of 2^depth and cropping back.
    ImageTensor denoise(const ImageTensor& y) const {
        if (y.channels != cfg_.in_channels)
            fail(ErrorCode::ShapeMismatch, "denoise: input channel count mismatch");
        int m = cfg_.alignment();
        int th = (y.height + m - 1) / m * m;
        int tw = (y.width + m - 1) / m * m;
        ImageTensor padded = pad_reflect_to(y, th, tw);

        Tape tape;
        VarPtr x = make_var({padded.channels, padded.height, padded.width}, padded.data,
                            /*requires_grad=*/false);
        VarPtr r = forward(tape, x);

        ImageTensor out(cfg_.in_channels, th, tw);
        for (size_t i = 0; i < out.size(); ++i)
            out.data[i] = std::clamp(padded.data[i] - r->value[i], 0.0f, 1.0f);
        if (th == y.height && tw == y.width) return out;
        return crop(out, 0, 0, y.height, y.width);
    }

private:
    struct EncStage {
        VarPtr conv1_k, conv1_b, conv2_k, conv2_b;
        VarPtr down_k, down_b;  // 1x1, 4*c_i -> c_{i+1}
    };
    struct DecStage {
        VarPtr up_k, up_b;  // 1x1, c_{i+1} -> 4*c_i
        VarPtr conv1_k, conv1_b, conv2_k, conv2_b;
    };

    void build() {
        for (int i = 0; i < cfg_.depth; ++i) {
            int c = cfg_.stage_width(i);
            int cin = i == 0 ? cfg_.in_channels : c;
            std::string p = "enc" + std::to_string(i);
            EncStage st;
            st.conv1_k = params_.add(p + ".conv1.kernel", ParamKind::Kernel, {c, cin, 3, 3});
            st.conv1_b = params_.add(p + ".conv1.bias", ParamKind::Bias, {c});
            st.conv2_k = params_.add(p + ".conv2.kernel", ParamKind::Kernel, {c, c, 3, 3});
            st.conv2_b = params_.add(p + ".conv2.bias", ParamKind::Bias, {c});
            st.down_k = params_.add(p + ".down.kernel", ParamKind::Kernel, {2 * c, 4 * c, 1, 1});
            st.down_b = params_.add(p + ".down.bias", ParamKind::Bias, {2 * c});
            enc_.push_back(std::move(st));
        }

        int cb = cfg_.stage_width(cfg_.depth);
        bot1_k_ = params_.add("bottleneck.conv1.kernel", ParamKind::Kernel, {cb, cb, 3, 3});
        bot1_b_ = params_.add("bottleneck.conv1.bias", ParamKind::Bias, {cb});
        bot2_k_ = params_.add("bottleneck.conv2.kernel", ParamKind::Kernel, {cb, cb, 3, 3});
        bot2_b_ = params_.add("bottleneck.conv2.bias", ParamKind::Bias, {cb});

        for (int i = 0; i < cfg_.depth; ++i) {
            int c = cfg_.stage_width(i);
            std::string p = "dec" + std::to_string(i);
            DecStage st;
            st.up_k = params_.add(p + ".up.kernel", ParamKind::Kernel, {4 * c, 2 * c, 1, 1});
            st.up_b = params_.add(p + ".up.bias", ParamKind::Bias, {4 * c});
            st.conv1_k = params_.add(p + ".conv1.kernel", ParamKind::Kernel, {c, 2 * c, 3, 3});
            st.conv1_b = params_.add(p + ".conv1.bias", ParamKind::Bias, {c});
            st.conv2_k = params_.add(p + ".conv2.kernel", ParamKind::Kernel, {c, c, 3, 3});
            st.conv2_b = params_.add(p + ".conv2.bias", ParamKind::Bias, {c});
            dec_.push_back(std::move(st));
        }

        head_k_ = params_.add("head.kernel", ParamKind::Kernel, {cfg_.in_channels, cfg_.stage_width(0), 3, 3});
        head_b_ = params_.add("head.bias", ParamKind::Bias, {cfg_.in_channels});
    }

    // alpha * DWT(h) + beta * PCA(h); a branch with coefficient exactly 0 is
    // never built, so (1, 0) matches a PCA-free model bitwise.
    VarPtr fused_down(Tape& tape, const VarPtr& h, int stage) const {
        const float a = cfg_.fusion.alpha, b = cfg_.fusion.beta;
        if (a != 0.0f && b != 0.0f)
            return ad::add_scaled(tape, ad::dwt_node(tape, h), pca_branch(tape, h, stage), a, b);
        if (a != 0.0f) {
            VarPtr dw = ad::dwt_node(tape, h);
            return a == 1.0f ? dw : ad::scale(tape, dw, a);
        }
        if (b != 0.0f) {
            VarPtr pc = pca_branch(tape, h, stage);
            return b == 1.0f ? pc : ad::scale(tape, pc, b);
        }
        return ad::scale(tape, ad::dwt_node(tape, h), 0.0f);
    }

    VarPtr pca_branch(Tape& tape, const VarPtr& h, int stage) const {
        return ad::pca_node(tape, h, stage_basis(h, stage));
    }

    std::shared_ptr<const PcaBasis> stage_basis(const VarPtr& h, int stage) const {
        int d = 4 * h->dim(0);
        switch (cfg_.basis_policy.kind) {
            case BasisPolicyKind::PerInput: {
                ImageTensor t(h->dim(0), h->dim(1), h->dim(2), h->value);
                return std::make_shared<const PcaBasis>(fit_pca_from_tensor(t));
            }
            case BasisPolicyKind::Identity:
                return std::make_shared<const PcaBasis>(identity_basis(d));
            case BasisPolicyKind::FixedRandom: {
                auto& slot = fixed_bases_[static_cast<size_t>(stage)];
                if (!slot)
                    slot = std::make_shared<const PcaBasis>(
                        random_orthonormal_basis(d, derive_seed(cfg_.basis_policy.seed,
                                                                static_cast<uint64_t>(stage))));
                return slot;
            }
            case BasisPolicyKind::Provided:
                if (!cfg_.basis_policy.provided)
                    fail(ErrorCode::ConfigInvalid, "no provided basis");
                if (cfg_.basis_policy.provided->dim != d)
                    fail(ErrorCode::DimMismatch, "provided basis dim does not match stage");
                return cfg_.basis_policy.provided;
        }
        fail(ErrorCode::ConfigInvalid, "bad basis policy");
    }

    ModelConfig cfg_;
    ParameterSet params_;
    std::vector<EncStage> enc_;
    VarPtr bot1_k_, bot1_b_, bot2_k_, bot2_b_;
    std::vector<DecStage> dec_;
    VarPtr head_k_, head_b_;
    mutable std::vector<std::shared_ptr<const PcaBasis>> fixed_bases_;
};

}  // namespace wunet
