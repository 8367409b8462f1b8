// Image-space operations: reflection padding, cropping, channel promotion,
// synthetic noise, and patch extraction.
#pragma once

#include <cstdint>
#include <vector>

#include "wunet/core.hpp"
#include "wunet/rng.hpp"

namespace wunet {

enum class NoiseKind { Gaussian, StampOverlay, Composite };

struct NoiseSpec {
    NoiseKind kind = NoiseKind::Gaussian;
    float sigma = 0.0f;       // Gaussian std on the [0,1] scale
    int stamp_count = 0;      // elliptical ring strokes per image
    uint64_t seed = 0;

    void validate() const {
        if (sigma < 0.0f) fail(ErrorCode::ConfigInvalid, "noise sigma must be >= 0");
        if (stamp_count < 0) fail(ErrorCode::ConfigInvalid, "stamp_count must be >= 0");
    }
};

// Mirror index into [0, n) without repeating the edge sample.
// Valid for offsets within one reflection period (|i| <= n-1 past either end).
inline int reflect_index(int i, int n) {
    if (i < 0) return -i;
    if (i >= n) return 2 * n - 2 - i;
    return i;
}

inline ImageTensor pad_reflect(const ImageTensor& img, int p) {
    if (p < 0 || (p > 0 && p >= std::min(img.height, img.width)))
        fail(ErrorCode::PadTooLarge, "reflection pad must satisfy 0 <= p < min(H, W)");
    if (p == 0) return img;

    ImageTensor out(img.channels, img.height + 2 * p, img.width + 2 * p);
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < out.height; ++y) {
            int sy = reflect_index(y - p, img.height);
            for (int x = 0; x < out.width; ++x)
                out.at(c, y, x) = img.at(c, sy, reflect_index(x - p, img.width));
        }
    return out;
}

// Asymmetric variant used to reach the next multiple of some block size.
inline ImageTensor pad_reflect_to(const ImageTensor& img, int target_h, int target_w) {
    if (target_h < img.height || target_w < img.width)
        fail(ErrorCode::ShapeMismatch, "pad target smaller than image");
    if (target_h == img.height && target_w == img.width) return img;
    if (target_h - img.height >= img.height || target_w - img.width >= img.width)
        fail(ErrorCode::PadTooLarge, "reflection pad exceeds image size");

    ImageTensor out(img.channels, target_h, target_w);
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < target_h; ++y) {
            int sy = reflect_index(y, img.height);
            for (int x = 0; x < target_w; ++x)
                out.at(c, y, x) = img.at(c, sy, reflect_index(x, img.width));
        }
    return out;
}

inline ImageTensor crop(const ImageTensor& img, int y0, int x0, int h, int w) {
    if (y0 < 0 || x0 < 0 || y0 + h > img.height || x0 + w > img.width)
        fail(ErrorCode::ShapeMismatch, "crop window out of bounds");
    ImageTensor out(img.channels, h, w);
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) out.at(c, y, x) = img.at(c, y0 + y, x0 + x);
    return out;
}

// Grayscale -> C copies; already-matching images pass through.
inline ImageTensor promote_channels(const ImageTensor& img, int target_channels) {
    if (img.channels == target_channels) return img;
    if (img.channels != 1)
        fail(ErrorCode::ShapeMismatch, "can only promote a 1-channel image");
    ImageTensor out(target_channels, img.height, img.width);
    for (int c = 0; c < target_channels; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) out.at(c, y, x) = img.at(0, y, x);
    return out;
}

inline ImageTensor mean_to_single_channel(const ImageTensor& img) {
    ImageTensor out(1, img.height, img.width);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            float s = 0.0f;
            for (int c = 0; c < img.channels; ++c) s += img.at(c, y, x);
            out.at(0, y, x) = s / static_cast<float>(img.channels);
        }
    return out;
}

namespace detail {

// One elliptical ring stroke, alpha-composited. Channel 0 is boosted on RGB
// (seal red); grayscale gets dark gray.
inline void draw_stamp(ImageTensor& img, Rng& rng) {
    const double cx = rng.next_double() * img.width;
    const double cy = rng.next_double() * img.height;
    const double r_base = 0.08 + 0.17 * rng.next_double();  // fraction of min dim
    const double rmin = r_base * std::min(img.width, img.height);
    const double rx = rmin * (0.8 + 0.4 * rng.next_double());
    const double ry = rmin * (0.8 + 0.4 * rng.next_double());
    const double theta = rng.next_double() * 3.141592653589793;
    const double thickness = 0.12 + 0.12 * rng.next_double();  // of radius
    const double alpha = 0.6;
    const double ct = std::cos(theta), st = std::sin(theta);

    float color[3] = {0.75f, 0.12f, 0.12f};
    if (img.channels == 1) color[0] = 0.25f;

    int x0 = std::max(0, static_cast<int>(cx - rx - ry) - 2);
    int x1 = std::min(img.width, static_cast<int>(cx + rx + ry) + 2);
    int y0 = std::max(0, static_cast<int>(cy - rx - ry) - 2);
    int y1 = std::min(img.height, static_cast<int>(cy + rx + ry) + 2);
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
            double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
            double u = (ct * dx + st * dy) / rx;
            double v = (-st * dx + ct * dy) / ry;
            double rho = std::sqrt(u * u + v * v);
            double cover = 1.0 - std::abs(rho - 1.0) / thickness;
            if (cover <= 0.0) continue;
            float a = static_cast<float>(alpha * std::min(1.0, cover));
            for (int c = 0; c < img.channels; ++c)
                img.at(c, y, x) = (1.0f - a) * img.at(c, y, x) + a * color[std::min(c, 2)];
        }
}

}  // namespace detail

/// Applies the requested degradation: optional stamp overlays first,
/// then i.i.d. Gaussian noise, then clamp to [0,1]. Pure function of
/// (img, spec): the same seed always yields the same output.
inline ImageTensor add_noise(const ImageTensor& img, const NoiseSpec& spec) {
    spec.validate();
    ImageTensor out = img;

    if (spec.kind != NoiseKind::Gaussian && spec.stamp_count > 0) {
        Rng stamp_rng(derive_seed(spec.seed, 1));
        for (int i = 0; i < spec.stamp_count; ++i) detail::draw_stamp(out, stamp_rng);
    }
    if (spec.kind != NoiseKind::StampOverlay && spec.sigma > 0.0f) {
        Rng noise_rng(derive_seed(spec.seed, 2));
        for (float& v : out.data)
            v += static_cast<float>(noise_rng.normal(0.0, spec.sigma));
    }
    clamp01(out);
    return out;
}

inline ImageTensor add_gaussian_noise(const ImageTensor& img, float sigma, uint64_t seed) {
    NoiseSpec spec;
    spec.kind = NoiseKind::Gaussian;
    spec.sigma = sigma;
    spec.seed = seed;
    return add_noise(img, spec);
}

/// All grid-aligned patches of the given size/stride, in seed-shuffled order.
inline std::vector<ImageTensor> extract_patches(const ImageTensor& img, int size, int stride,
                                                uint64_t seed) {
    if (size <= 0 || size > std::min(img.height, img.width))
        fail(ErrorCode::PatchTooLarge, "patch size must satisfy 0 < size <= min(H, W)");
    if (stride < 1) fail(ErrorCode::ConfigInvalid, "stride must be >= 1");

    int ny = (img.height - size) / stride + 1;
    int nx = (img.width - size) / stride + 1;
    std::vector<std::pair<int, int>> origins;
    origins.reserve(static_cast<size_t>(ny) * nx);
    for (int gy = 0; gy < ny; ++gy)
        for (int gx = 0; gx < nx; ++gx) origins.emplace_back(gy * stride, gx * stride);

    Rng rng(seed);
    rng.shuffle(origins);

    std::vector<ImageTensor> patches;
    patches.reserve(origins.size());
    for (auto [y, x] : origins) patches.push_back(crop(img, y, x, size, size));
    return patches;
}

}  // namespace wunet
