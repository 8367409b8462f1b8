// Single-level orthonormal 2D Haar transform. Each input channel maps to a
// [LL, LH, HL, HH] group of half-resolution subbands; the filter pair is
// scaled so the transform preserves energy exactly and the inverse is the
// adjoint.
#pragma once

#include <vector>

#include "wunet/core.hpp"

namespace wunet {

/// DWT output: (4C, H/2, W/2), subband order [LL, LH, HL, HH] per input
/// channel (output channel 4c+b holds band b of input channel c).
struct SubbandStack {
    int channels_in = 0;  // C of the source tensor
    int height = 0;       // H/2
    int width = 0;        // W/2
    std::vector<float> data;

    SubbandStack() = default;
    SubbandStack(int c_in, int h, int w)
        : channels_in(c_in), height(h), width(w),
          data(static_cast<size_t>(4) * c_in * h * w, 0.0f) {}

    float& at(int channel, int y, int x) {
        return data[(static_cast<size_t>(channel) * height + y) * width + x];
    }
    float at(int channel, int y, int x) const {
        return data[(static_cast<size_t>(channel) * height + y) * width + x];
    }

    // band: 0=LL 1=LH 2=HL 3=HH
    float& band(int c, int b, int y, int x) { return at(4 * c + b, y, x); }
    float band(int c, int b, int y, int x) const { return at(4 * c + b, y, x); }
};

namespace detail {

inline void dwt2_block(float p00, float p01, float p10, float p11, float& ll, float& lh, float& hl,
                       float& hh) {
    ll = 0.5f * (p00 + p01 + p10 + p11);
    lh = 0.5f * (p00 + p01 - p10 - p11);
    hl = 0.5f * (p00 - p01 + p10 - p11);
    hh = 0.5f * (p00 - p01 - p10 + p11);
}

inline void idwt2_block(float ll, float lh, float hl, float hh, float& p00, float& p01, float& p10,
                        float& p11) {
    p00 = 0.5f * (ll + lh + hl + hh);
    p01 = 0.5f * (ll + lh - hl - hh);
    p10 = 0.5f * (ll - lh + hl - hh);
    p11 = 0.5f * (ll - lh - hl + hh);
}

}  // namespace detail

inline void require_even_dims(int h, int w, const char* where) {
    if (h % 2 != 0 || w % 2 != 0)
        fail(ErrorCode::OddDimension, std::string(where) + ": H and W must be even");
}

inline SubbandStack dwt2(const ImageTensor& x) {
    require_even_dims(x.height, x.width, "dwt2");
    SubbandStack s(x.channels, x.height / 2, x.width / 2);
    for (int c = 0; c < x.channels; ++c)
        for (int y = 0; y < s.height; ++y)
            for (int xx = 0; xx < s.width; ++xx)
                detail::dwt2_block(x.at(c, 2 * y, 2 * xx), x.at(c, 2 * y, 2 * xx + 1),
                                   x.at(c, 2 * y + 1, 2 * xx), x.at(c, 2 * y + 1, 2 * xx + 1),
                                   s.band(c, 0, y, xx), s.band(c, 1, y, xx), s.band(c, 2, y, xx),
                                   s.band(c, 3, y, xx));
    return s;
}

inline ImageTensor idwt2(const SubbandStack& s) {
    ImageTensor x(s.channels_in, 2 * s.height, 2 * s.width);
    for (int c = 0; c < s.channels_in; ++c)
        for (int y = 0; y < s.height; ++y)
            for (int xx = 0; xx < s.width; ++xx)
                detail::idwt2_block(s.band(c, 0, y, xx), s.band(c, 1, y, xx), s.band(c, 2, y, xx),
                                    s.band(c, 3, y, xx), x.at(c, 2 * y, 2 * xx),
                                    x.at(c, 2 * y, 2 * xx + 1), x.at(c, 2 * y + 1, 2 * xx),
                                    x.at(c, 2 * y + 1, 2 * xx + 1));
    return x;
}

// Raw-buffer forms used by the autodiff nodes; layouts match dwt2/idwt2.
inline void dwt2_buffer(const float* src, float* dst, int channels, int h, int w) {
    int hh = h / 2, hw = w / 2;
    for (int c = 0; c < channels; ++c) {
        const float* in = src + static_cast<size_t>(c) * h * w;
        float* out = dst + static_cast<size_t>(4 * c) * hh * hw;
        for (int y = 0; y < hh; ++y)
            for (int x = 0; x < hw; ++x) {
                size_t o = static_cast<size_t>(y) * hw + x;
                detail::dwt2_block(in[(2 * y) * w + 2 * x], in[(2 * y) * w + 2 * x + 1],
                                   in[(2 * y + 1) * w + 2 * x], in[(2 * y + 1) * w + 2 * x + 1],
                                   out[o], out[static_cast<size_t>(hh) * hw + o],
                                   out[2 * static_cast<size_t>(hh) * hw + o],
                                   out[3 * static_cast<size_t>(hh) * hw + o]);
            }
    }
}

inline void idwt2_buffer(const float* src, float* dst, int channels_in, int hh, int hw) {
    int h = 2 * hh, w = 2 * hw;
    for (int c = 0; c < channels_in; ++c) {
        const float* in = src + static_cast<size_t>(4 * c) * hh * hw;
        float* out = dst + static_cast<size_t>(c) * h * w;
        for (int y = 0; y < hh; ++y)
            for (int x = 0; x < hw; ++x) {
                size_t o = static_cast<size_t>(y) * hw + x;
                detail::idwt2_block(in[o], in[static_cast<size_t>(hh) * hw + o],
                                    in[2 * static_cast<size_t>(hh) * hw + o],
                                    in[3 * static_cast<size_t>(hh) * hw + o], out[(2 * y) * w + 2 * x],
                                    out[(2 * y) * w + 2 * x + 1], out[(2 * y + 1) * w + 2 * x],
                                    out[(2 * y + 1) * w + 2 * x + 1]);
            }
    }
}

}  // namespace wunet
