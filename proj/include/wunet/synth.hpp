// Deterministic synthetic test images: smooth low-frequency fields, and
// handwriting-like pages (paper texture plus dark pen strokes) standing in
// for scanned signature data. Everything is a pure function of the seed.
#pragma once

#include <filesystem>

#include "wunet/image_io.hpp"
#include "wunet/imageops.hpp"
#include "wunet/rng.hpp"

namespace wunet {

enum class SynthKind { Smooth, Signature };

/// Sum of a few random low-frequency cosine waves, normalized into a
/// mid-range band, with mild per-channel variation.
inline ImageTensor synth_smooth_image(int channels, int h, int w, uint64_t seed) {
    if (channels < 1 || h < 1 || w < 1) fail(ErrorCode::ConfigInvalid, "bad synth image shape");
    Rng rng(seed);

    const int waves = 3;
    struct Wave {
        double fx, fy, phase, amp;
    };
    std::vector<Wave> base(waves);
    for (auto& wv : base) {
        wv.fx = 0.3 + 1.2 * rng.next_double();
        wv.fy = 0.3 + 1.2 * rng.next_double();
        wv.phase = 2.0 * 3.141592653589793 * rng.next_double();
        wv.amp = 0.5 + 0.5 * rng.next_double();
    }
    std::vector<Wave> tint(static_cast<size_t>(channels));
    for (auto& wv : tint) {
        wv.fx = 0.2 + 0.6 * rng.next_double();
        wv.fy = 0.2 + 0.6 * rng.next_double();
        wv.phase = 2.0 * 3.141592653589793 * rng.next_double();
        wv.amp = 0.15;
    }

    auto eval = [&](const Wave& wv, int y, int x) {
        return wv.amp * std::cos(2.0 * 3.141592653589793 *
                                     (wv.fx * x / static_cast<double>(w) +
                                      wv.fy * y / static_cast<double>(h)) +
                                 wv.phase);
    };

    std::vector<double> field(static_cast<size_t>(h) * w);
    double lo = 1e300, hi = -1e300;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double v = 0.0;
            for (const auto& wv : base) v += eval(wv, y, x);
            field[static_cast<size_t>(y) * w + x] = v;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    double scale = hi > lo ? 0.5 / (hi - lo) : 0.0;

    ImageTensor img(channels, h, w);
    for (int c = 0; c < channels; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double v = 0.25 + (field[static_cast<size_t>(y) * w + x] - lo) * scale +
                           eval(tint[static_cast<size_t>(c)], y, x);
                img.at(c, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
            }
    return img;
}

namespace detail {

// Anti-aliased disc of the pen tip, alpha-composited toward the ink color.
inline void stamp_disc(ImageTensor& img, double cx, double cy, double radius, const float* ink) {
    int x0 = std::max(0, static_cast<int>(cx - radius) - 1);
    int x1 = std::min(img.width, static_cast<int>(cx + radius) + 2);
    int y0 = std::max(0, static_cast<int>(cy - radius) - 1);
    int y1 = std::min(img.height, static_cast<int>(cy + radius) + 2);
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
            double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
            double d = std::sqrt(dx * dx + dy * dy);
            double cover = std::clamp(radius - d + 0.5, 0.0, 1.0);
            if (cover <= 0.0) continue;
            float a = static_cast<float>(cover);
            for (int c = 0; c < img.channels; ++c)
                img.at(c, y, x) =
                    (1.0f - a) * img.at(c, y, x) + a * ink[std::min(c, 2)];
        }
}

}  // namespace detail

/// Light paper with gentle shading and a handful of dark quadratic pen
/// strokes.
inline ImageTensor synth_signature_image(int channels, int h, int w, uint64_t seed) {
    if (channels < 1 || h < 4 || w < 4) fail(ErrorCode::ConfigInvalid, "bad synth image shape");
    Rng rng(seed);

    ImageTensor img(channels, h, w);
    double gx = (rng.next_double() - 0.5) * 0.06;
    double gy = (rng.next_double() - 0.5) * 0.06;
    for (int c = 0; c < channels; ++c) {
        double base = 0.88 + 0.04 * rng.next_double();
        if (channels >= 3 && c == 2) base -= 0.03;  // slightly warm paper
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double v = base + gx * (x / static_cast<double>(w) - 0.5) +
                           gy * (y / static_cast<double>(h) - 0.5) +
                           0.015 * (rng.next_double() - 0.5);
                img.at(c, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
            }
    }

    int strokes = 3 + static_cast<int>(rng.below(4));
    for (int s = 0; s < strokes; ++s) {
        double p0x = rng.next_double() * w, p0y = rng.next_double() * h;
        double p1x = rng.next_double() * w, p1y = rng.next_double() * h;
        double p2x = rng.next_double() * w, p2y = rng.next_double() * h;
        double radius = 0.6 + 1.2 * rng.next_double();
        float shade = static_cast<float>(0.08 + 0.2 * rng.next_double());
        float ink[3] = {shade, shade, static_cast<float>(shade + 0.05)};

        double len = std::abs(p1x - p0x) + std::abs(p2x - p1x) + std::abs(p1y - p0y) +
                     std::abs(p2y - p1y) + 1.0;
        int steps = std::max(8, static_cast<int>(2.0 * len));
        for (int i = 0; i <= steps; ++i) {
            double t = static_cast<double>(i) / steps;
            double u = 1.0 - t;
            double bx = u * u * p0x + 2.0 * u * t * p1x + t * t * p2x;
            double by = u * u * p0y + 2.0 * u * t * p1y + t * t * p2y;
            detail::stamp_disc(img, bx, by, radius, ink);
        }
    }
    return img;
}

inline ImageTensor synth_image(SynthKind kind, int channels, int h, int w, uint64_t seed) {
    return kind == SynthKind::Smooth ? synth_smooth_image(channels, h, w, seed)
                                     : synth_signature_image(channels, h, w, seed);
}

/// Writes `count` PNGs named synth_000.png, synth_001.png, ... so the
/// lexicographic dataset ordering matches the generation order.
inline void write_synth_dataset(const std::filesystem::path& dir, SynthKind kind, int count,
                                int channels, int h, int w, uint64_t seed) {
    if (count < 1) fail(ErrorCode::ConfigInvalid, "count must be >= 1");
    std::filesystem::create_directories(dir);
    for (int i = 0; i < count; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "synth_%03d.png", i);
        ImageTensor img = synth_image(kind, channels, h, w, derive_seed(seed, static_cast<uint64_t>(i)));
        save_image(img, (dir / name).string());
    }
}

}  // namespace wunet
