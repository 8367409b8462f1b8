// Classical wavelet soft-threshold denoising (the VisuShrink universal
// threshold): one DWT level, detail bands shrunk by tau = sigma*sqrt(2 ln n),
// LL untouched, inverse transform, clamp.
#pragma once

#include "wunet/imageops.hpp"
#include "wunet/wavelet.hpp"

namespace wunet {

inline float soft_threshold(float v, float tau) {
    if (v > tau) return v - tau;
    if (v < -tau) return v + tau;
    return 0.0f;
}

inline ImageTensor baseline_wavelet_threshold(const ImageTensor& y, float sigma) {
    if (sigma < 0.0f) fail(ErrorCode::ConfigInvalid, "sigma must be >= 0");

    // n from the original pixel count, before any alignment padding
    double n = static_cast<double>(y.height) * y.width;
    float tau = n > 1.0 ? static_cast<float>(sigma * std::sqrt(2.0 * std::log(n))) : 0.0f;

    int th = (y.height + 1) / 2 * 2;
    int tw = (y.width + 1) / 2 * 2;
    ImageTensor padded = pad_reflect_to(y, th, tw);

    SubbandStack s = dwt2(padded);
    for (int c = 0; c < s.channels_in; ++c)
        for (int b = 1; b < 4; ++b)
            for (int yy = 0; yy < s.height; ++yy)
                for (int xx = 0; xx < s.width; ++xx)
                    s.band(c, b, yy, xx) = soft_threshold(s.band(c, b, yy, xx), tau);

    ImageTensor out = idwt2(s);
    clamp01(out);
    if (th == y.height && tw == y.width) return out;
    return crop(out, 0, 0, y.height, y.width);
}

}  // namespace wunet
