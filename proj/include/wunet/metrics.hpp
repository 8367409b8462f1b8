// Image quality metrics: MSE, PSNR with an explicit infinite sentinel, and
// SSIM (Gaussian-windowed mean SSIM by default, single full-image window in
// global mode). All accumulation in double so the identity cases hold to
// 1e-9.
#pragma once

#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "wunet/core.hpp"

namespace wunet {

struct MetricsConfig {
    double max_i = 1.0;   // dynamic range of the image values
    int ssim_window = 11;
    double ssim_sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    bool ssim_global = false;  // single full-image window, uniform weights

    double c1() const { return (k1 * max_i) * (k1 * max_i); }
    double c2() const { return (k2 * max_i) * (k2 * max_i); }

    void validate() const {
        if (!(max_i > 0.0)) fail(ErrorCode::ConfigInvalid, "max_i must be > 0");
        if (ssim_window < 1 || ssim_window % 2 == 0)
            fail(ErrorCode::ConfigInvalid, "ssim_window must be odd and >= 1");
        if (!(ssim_sigma > 0.0)) fail(ErrorCode::ConfigInvalid, "ssim_sigma must be > 0");
    }
};

inline double mse(const ImageTensor& x, const ImageTensor& y) {
    require_same_shape(x, y, "mse");
    if (x.size() == 0) fail(ErrorCode::EmptyInput, "mse of empty tensors");
    double acc = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        double d = static_cast<double>(x.data[i]) - y.data[i];
        acc += d * d;
    }
    return acc / static_cast<double>(x.size());
}

/// PSNR in dB, or the explicit infinite sentinel when mse is 0.
struct PsnrResult {
    bool infinite = false;
    double db = 0.0;
};

inline PsnrResult psnr_from_mse(double mse_value, double max_i) {
    if (mse_value < 0.0) fail(ErrorCode::ConfigInvalid, "psnr: mse must be >= 0");
    if (mse_value == 0.0) return {true, 0.0};
    return {false, 10.0 * std::log10(max_i * max_i / mse_value)};
}

inline PsnrResult psnr(const ImageTensor& x, const ImageTensor& y, const MetricsConfig& cfg = {}) {
    cfg.validate();
    return psnr_from_mse(mse(x, y), cfg.max_i);
}

namespace detail {

// Valid-mode separable filtering, double precision.
inline void filter_rows(const std::vector<double>& in, std::vector<double>& out, int h, int w,
                        const std::vector<double>& g) {
    int k = static_cast<int>(g.size());
    int wv = w - k + 1;
    out.assign(static_cast<size_t>(h) * wv, 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < wv; ++x) {
            double acc = 0.0;
            for (int i = 0; i < k; ++i) acc += g[i] * in[static_cast<size_t>(y) * w + x + i];
            out[static_cast<size_t>(y) * wv + x] = acc;
        }
}

inline void filter_cols(const std::vector<double>& in, std::vector<double>& out, int h, int w,
                        const std::vector<double>& g) {
    int k = static_cast<int>(g.size());
    int hv = h - k + 1;
    out.assign(static_cast<size_t>(hv) * w, 0.0);
    for (int y = 0; y < hv; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = 0; i < k; ++i) acc += g[i] * in[static_cast<size_t>(y + i) * w + x];
            out[static_cast<size_t>(y) * w + x] = acc;
        }
}

inline void gaussian_filter_valid(const std::vector<double>& in, std::vector<double>& out, int h,
                                  int w, const std::vector<double>& g) {
    std::vector<double> tmp;
    filter_rows(in, tmp, h, w, g);
    filter_cols(tmp, out, h, w - static_cast<int>(g.size()) + 1, g);
}

inline std::vector<double> gaussian_kernel(int size, double sigma) {
    std::vector<double> g(static_cast<size_t>(size));
    double c = (size - 1) / 2.0;
    double sum = 0.0;
    for (int i = 0; i < size; ++i) {
        g[static_cast<size_t>(i)] = std::exp(-(i - c) * (i - c) / (2.0 * sigma * sigma));
        sum += g[static_cast<size_t>(i)];
    }
    for (double& v : g) v /= sum;
    return g;
}

inline double ssim_from_stats(double mu_x, double mu_y, double sx2, double sy2, double sxy,
                              double c1, double c2) {
    sx2 = std::max(0.0, sx2);  // numerical floor: variances may dip below 0 by rounding
    sy2 = std::max(0.0, sy2);
    double num = (2.0 * mu_x * mu_y + c1) * (2.0 * sxy + c2);
    double den = (mu_x * mu_x + mu_y * mu_y + c1) * (sx2 + sy2 + c2);
    return num / den;
}

inline double ssim_channel_global(const float* x, const float* y, size_t n, double c1, double c2) {
    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sx2 = 0.0, sy2 = 0.0, sxy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double dx = x[i] - mx, dy = y[i] - my;
        sx2 += dx * dx;
        sy2 += dy * dy;
        sxy += dx * dy;
    }
    sx2 /= static_cast<double>(n);
    sy2 /= static_cast<double>(n);
    sxy /= static_cast<double>(n);
    return ssim_from_stats(mx, my, sx2, sy2, sxy, c1, c2);
}

inline double ssim_channel_windowed(const float* x, const float* y, int h, int w,
                                    const std::vector<double>& g, double c1, double c2) {
    size_t n = static_cast<size_t>(h) * w;
    std::vector<double> px(n), py(n), pxx(n), pyy(n), pxy(n);
    for (size_t i = 0; i < n; ++i) {
        double a = x[i], b = y[i];
        px[i] = a;
        py[i] = b;
        pxx[i] = a * a;
        pyy[i] = b * b;
        pxy[i] = a * b;
    }
    std::vector<double> mx, my, mxx, myy, mxy;
    gaussian_filter_valid(px, mx, h, w, g);
    gaussian_filter_valid(py, my, h, w, g);
    gaussian_filter_valid(pxx, mxx, h, w, g);
    gaussian_filter_valid(pyy, myy, h, w, g);
    gaussian_filter_valid(pxy, mxy, h, w, g);

    double acc = 0.0;
    for (size_t i = 0; i < mx.size(); ++i) {
        double sx2 = mxx[i] - mx[i] * mx[i];
        double sy2 = myy[i] - my[i] * my[i];
        double sxy = mxy[i] - mx[i] * my[i];
        acc += ssim_from_stats(mx[i], my[i], sx2, sy2, sxy, c1, c2);
    }
    return acc / static_cast<double>(mx.size());
}

}  // namespace detail

/// Mean SSIM: per channel, then averaged across channels.
inline double ssim(const ImageTensor& x, const ImageTensor& y, const MetricsConfig& cfg = {}) {
    cfg.validate();
    require_same_shape(x, y, "ssim");
    if (x.size() == 0) fail(ErrorCode::EmptyInput, "ssim of empty tensors");

    double acc = 0.0;
    if (cfg.ssim_global) {
        for (int c = 0; c < x.channels; ++c)
            acc += detail::ssim_channel_global(x.plane(c), y.plane(c),
                                               static_cast<size_t>(x.height) * x.width, cfg.c1(),
                                               cfg.c2());
    } else {
        if (std::min(x.height, x.width) < cfg.ssim_window)
            fail(ErrorCode::ImageTooSmall, "ssim: image smaller than the ssim window");
        auto g = detail::gaussian_kernel(cfg.ssim_window, cfg.ssim_sigma);
        for (int c = 0; c < x.channels; ++c)
            acc += detail::ssim_channel_windowed(x.plane(c), y.plane(c), x.height, x.width, g,
                                                 cfg.c1(), cfg.c2());
    }
    return acc / static_cast<double>(x.channels);
}

// ---------------------------------------------------------------------------
// aggregate reporting
// ---------------------------------------------------------------------------

struct EvalPair {
    std::string name;
    ImageTensor reference;
    ImageTensor candidate;
};

struct ImageMetrics {
    std::string image;
    PsnrResult psnr;
    double ssim = 0.0;
};

namespace detail {

inline std::string format_psnr(const PsnrResult& p, int precision) {
    if (p.infinite) return "inf";
    std::ostringstream os;
    os << std::fixed << std::setprecision(precision) << p.db;
    return os.str();
}

inline std::string format_fixed(double v, int precision) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(precision) << v;
    return os.str();
}

}  // namespace detail

/// Table-style "PSNR/SSIM" cell, e.g. "27.43/0.9105".
inline std::string psnr_ssim_cell(const PsnrResult& p, double ssim_value) {
    return detail::format_psnr(p, 2) + "/" + detail::format_fixed(ssim_value, 4);
}

struct MetricsReport {
    std::vector<ImageMetrics> rows;
    double mean_psnr_db = 0.0;  // over finite entries only
    int infinite_psnr_count = 0;
    double mean_ssim = 0.0;

    std::string to_csv() const {
        std::ostringstream os;
        os << "image,psnr_db,ssim\n";
        for (const auto& r : rows)
            os << r.image << ',' << detail::format_psnr(r.psnr, 6) << ','
               << detail::format_fixed(r.ssim, 6) << '\n';
        return os.str();
    }

    std::string to_markdown() const {
        std::ostringstream os;
        os << "| Image | PSNR/SSIM |\n|---|---|\n";
        for (const auto& r : rows)
            os << "| " << r.image << " | " << psnr_ssim_cell(r.psnr, r.ssim) << " |\n";
        os << "| mean";
        if (infinite_psnr_count > 0) os << " (" << infinite_psnr_count << " inf PSNR skipped)";
        os << " | " << detail::format_fixed(mean_psnr_db, 2) << "/"
           << detail::format_fixed(mean_ssim, 4) << " |\n";
        return os.str();
    }
};

/// Per-image metrics plus arithmetic means; infinite PSNR entries are
/// excluded from the PSNR mean and counted instead.
inline MetricsReport evaluate_set(const std::vector<EvalPair>& pairs,
                                  const MetricsConfig& cfg = {}) {
    if (pairs.empty()) fail(ErrorCode::EmptyInput, "evaluate_set: no image pairs");
    MetricsReport rep;
    double psnr_acc = 0.0, ssim_acc = 0.0;
    int finite = 0;
    for (const auto& p : pairs) {
        ImageMetrics m;
        m.image = p.name;
        m.psnr = psnr(p.reference, p.candidate, cfg);
        m.ssim = ssim(p.reference, p.candidate, cfg);
        if (m.psnr.infinite) {
            rep.infinite_psnr_count += 1;
        } else {
            psnr_acc += m.psnr.db;
            finite += 1;
        }
        ssim_acc += m.ssim;
        rep.rows.push_back(std::move(m));
    }
    if (finite > 0) rep.mean_psnr_db = psnr_acc / finite;
    rep.mean_ssim = ssim_acc / static_cast<double>(pairs.size());
    return rep;
}

}  // namespace wunet
