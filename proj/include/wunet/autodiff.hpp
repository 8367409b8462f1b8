// Tape-based reverse-mode autodiff over dense float tensors, with the
// operator set the denoising network needs: conv2d (odd kernel, stride 1,
// zero pad, cross-correlation), ReLU, channel concat, scaled add, the
// wavelet/PCA transforms as differentiable nodes, and squared-error
// reductions. Every op validates shapes and checks its output for
// NaN/Inf.
#pragma once

#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "wunet/core.hpp"
#include "wunet/pca.hpp"
#include "wunet/rng.hpp"
#include "wunet/wavelet.hpp"

namespace wunet {

struct GradTensor {
    std::vector<int> shape;
    std::vector<float> value;
    std::vector<float> grad;
    bool requires_grad = true;

    size_t size() const { return value.size(); }

    int dim(int i) const { return shape[static_cast<size_t>(i)]; }
    int ndim() const { return static_cast<int>(shape.size()); }
};

using VarPtr = std::shared_ptr<GradTensor>;

inline size_t shape_numel(const std::vector<int>& shape) {
    size_t n = 1;
    for (int d : shape) n *= static_cast<size_t>(d);
    return n;
}

inline VarPtr make_var(std::vector<int> shape, bool requires_grad = true) {
    auto t = std::make_shared<GradTensor>();
    t->shape = std::move(shape);
    size_t n = shape_numel(t->shape);
    t->value.assign(n, 0.0f);
    t->grad.assign(n, 0.0f);
    t->requires_grad = requires_grad;
    return t;
}

inline VarPtr make_var(std::vector<int> shape, std::vector<float> values, bool requires_grad = true) {
    auto t = make_var(std::move(shape), requires_grad);
    if (values.size() != t->size()) fail(ErrorCode::ShapeMismatch, "make_var: value length mismatch");
    t->value = std::move(values);
    return t;
}

inline void ensure_finite(const std::vector<float>& v, const char* where) {
    for (float x : v)
        if (!std::isfinite(x)) fail(ErrorCode::NumericFault, std::string(where) + ": non-finite value");
}

/// Records backward closures in construction order; backward() replays them
/// in reverse. One tape per forward/backward pass, no retention across steps.
class Tape {
public:
    void record(std::function<void()> fn) { nodes_.push_back(std::move(fn)); }

    void backward(const VarPtr& loss) {
        if (loss->size() != 1) fail(ErrorCode::ShapeMismatch, "backward: loss must be a scalar");
        loss->grad[0] += 1.0f;
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
    }

    void clear() { nodes_.clear(); }
    size_t node_count() const { return nodes_.size(); }

private:
    std::vector<std::function<void()>> nodes_;
};

namespace ad {

inline void require_chw(const VarPtr& x, const char* where) {
    if (x->ndim() != 3) fail(ErrorCode::ShapeMismatch, std::string(where) + ": expected a (C,H,W) tensor");
}

// ---------------------------------------------------------------------------
// conv2d, stride 1, zero padding (k-1)/2, cross-correlation convention
// ---------------------------------------------------------------------------

namespace detail {

// out[i][j] += kval * img[i+dy][j+dx] over the in-bounds rectangle.
inline void shift_axpy(float kval, const float* img, float* out, int h, int w, int dy, int dx) {
    int i0 = std::max(0, -dy), i1 = std::min(h, h - dy);
    int j0 = std::max(0, -dx), j1 = std::min(w, w - dx);
    for (int i = i0; i < i1; ++i) {
        const float* src = img + static_cast<size_t>(i + dy) * w + dx;
        float* dst = out + static_cast<size_t>(i) * w;
        for (int j = j0; j < j1; ++j) dst[j] += kval * src[j];
    }
}

// sum over i,j of a[i][j] * b[i+dy][j+dx] over the in-bounds rectangle.
inline double shift_dot(const float* a, const float* b, int h, int w, int dy, int dx) {
    int i0 = std::max(0, -dy), i1 = std::min(h, h - dy);
    int j0 = std::max(0, -dx), j1 = std::min(w, w - dx);
    double acc = 0.0;
    for (int i = i0; i < i1; ++i) {
        const float* pa = a + static_cast<size_t>(i) * w;
        const float* pb = b + static_cast<size_t>(i + dy) * w + dx;
        for (int j = j0; j < j1; ++j) acc += static_cast<double>(pa[j]) * pb[j];
    }
    return acc;
}

}  // namespace detail

inline VarPtr conv2d(Tape& tape, const VarPtr& x, const VarPtr& kernel, const VarPtr& bias) {
    require_chw(x, "conv2d");
    if (kernel->ndim() != 4 || kernel->dim(2) != kernel->dim(3) || kernel->dim(2) % 2 == 0)
        fail(ErrorCode::ShapeMismatch, "conv2d: kernel must be (Cout,Cin,k,k) with odd k");
    if (kernel->dim(1) != x->dim(0))
        fail(ErrorCode::ShapeMismatch, "conv2d: kernel Cin does not match input channels");
    if (bias->ndim() != 1 || bias->dim(0) != kernel->dim(0))
        fail(ErrorCode::ShapeMismatch, "conv2d: bias must be (Cout)");

    const int cin = x->dim(0), h = x->dim(1), w = x->dim(2);
    const int cout = kernel->dim(0), k = kernel->dim(2), p = k / 2;
    const size_t plane = static_cast<size_t>(h) * w;

    VarPtr out = make_var({cout, h, w});
    for (int o = 0; o < cout; ++o) {
        float* op = out->value.data() + o * plane;
        std::fill(op, op + plane, bias->value[o]);
        for (int c = 0; c < cin; ++c) {
            const float* xp = x->value.data() + c * plane;
            const float* kp = kernel->value.data() + (static_cast<size_t>(o) * cin + c) * k * k;
            for (int u = 0; u < k; ++u)
                for (int v = 0; v < k; ++v)
                    detail::shift_axpy(kp[u * k + v], xp, op, h, w, u - p, v - p);
        }
    }
    ensure_finite(out->value, "conv2d");

    out->requires_grad = x->requires_grad || kernel->requires_grad || bias->requires_grad;
    if (out->requires_grad)
        tape.record([x, kernel, bias, out, cin, cout, h, w, k, p, plane] {
            for (int o = 0; o < cout; ++o) {
                const float* gp = out->grad.data() + o * plane;
                if (bias->requires_grad) {
                    double acc = 0.0;
                    for (size_t i = 0; i < plane; ++i) acc += gp[i];
                    bias->grad[o] += static_cast<float>(acc);
                }
                for (int c = 0; c < cin; ++c) {
                    const size_t koff = (static_cast<size_t>(o) * cin + c) * k * k;
                    const float* kp = kernel->value.data() + koff;
                    if (x->requires_grad) {
                        float* gx = x->grad.data() + c * plane;
                        for (int u = 0; u < k; ++u)
                            for (int v = 0; v < k; ++v)
                                detail::shift_axpy(kp[u * k + v], gp, gx, h, w, -(u - p), -(v - p));
                    }
                    if (kernel->requires_grad) {
                        const float* xp = x->value.data() + c * plane;
                        float* gk = kernel->grad.data() + koff;
                        for (int u = 0; u < k; ++u)
                            for (int v = 0; v < k; ++v)
                                gk[u * k + v] += static_cast<float>(
                                    detail::shift_dot(gp, xp, h, w, u - p, v - p));
                    }
                }
            }
        });
    return out;
}

// ---------------------------------------------------------------------------
// pointwise and structural ops
// ---------------------------------------------------------------------------

inline VarPtr relu(Tape& tape, const VarPtr& x) {
    VarPtr out = make_var(x->shape);
    for (size_t i = 0; i < x->size(); ++i) out->value[i] = x->value[i] > 0.0f ? x->value[i] : 0.0f;
    ensure_finite(out->value, "relu");

    out->requires_grad = x->requires_grad;
    if (out->requires_grad)
        tape.record([x, out] {
            for (size_t i = 0; i < x->size(); ++i)
                if (x->value[i] > 0.0f) x->grad[i] += out->grad[i];
        });
    return out;
}

inline VarPtr concat_channels(Tape& tape, const VarPtr& a, const VarPtr& b) {
    require_chw(a, "concat_channels");
    require_chw(b, "concat_channels");
    if (a->dim(1) != b->dim(1) || a->dim(2) != b->dim(2))
        fail(ErrorCode::ShapeMismatch, "concat_channels: spatial dims differ");

    VarPtr out = make_var({a->dim(0) + b->dim(0), a->dim(1), a->dim(2)});
    std::copy(a->value.begin(), a->value.end(), out->value.begin());
    std::copy(b->value.begin(), b->value.end(), out->value.begin() + a->size());

    out->requires_grad = a->requires_grad || b->requires_grad;
    if (out->requires_grad)
        tape.record([a, b, out] {
            if (a->requires_grad)
                for (size_t i = 0; i < a->size(); ++i) a->grad[i] += out->grad[i];
            if (b->requires_grad)
                for (size_t i = 0; i < b->size(); ++i) b->grad[i] += out->grad[a->size() + i];
        });
    return out;
}

inline VarPtr add_scaled(Tape& tape, const VarPtr& a, const VarPtr& b, float alpha, float beta) {
    if (a->shape != b->shape) fail(ErrorCode::ShapeMismatch, "add_scaled: shapes differ");
    VarPtr out = make_var(a->shape);
    for (size_t i = 0; i < a->size(); ++i)
        out->value[i] = alpha * a->value[i] + beta * b->value[i];
    ensure_finite(out->value, "add_scaled");

    out->requires_grad = a->requires_grad || b->requires_grad;
    if (out->requires_grad)
        tape.record([a, b, out, alpha, beta] {
            if (a->requires_grad)
                for (size_t i = 0; i < a->size(); ++i) a->grad[i] += alpha * out->grad[i];
            if (b->requires_grad)
                for (size_t i = 0; i < b->size(); ++i) b->grad[i] += beta * out->grad[i];
        });
    return out;
}

inline VarPtr scale(Tape& tape, const VarPtr& x, float s) {
    VarPtr out = make_var(x->shape);
    for (size_t i = 0; i < x->size(); ++i) out->value[i] = s * x->value[i];
    ensure_finite(out->value, "scale");

    out->requires_grad = x->requires_grad;
    if (out->requires_grad)
        tape.record([x, out, s] {
            for (size_t i = 0; i < x->size(); ++i) x->grad[i] += s * out->grad[i];
        });
    return out;
}

// ---------------------------------------------------------------------------
// transform nodes: orthonormal, so each backward is the paired transform
// applied to the upstream gradient
// ---------------------------------------------------------------------------

inline VarPtr dwt_node(Tape& tape, const VarPtr& x) {
    require_chw(x, "dwt_node");
    const int c = x->dim(0), h = x->dim(1), w = x->dim(2);
    require_even_dims(h, w, "dwt_node");

    VarPtr out = make_var({4 * c, h / 2, w / 2});
    dwt2_buffer(x->value.data(), out->value.data(), c, h, w);
    ensure_finite(out->value, "dwt_node");

    out->requires_grad = x->requires_grad;
    if (out->requires_grad)
        tape.record([x, out, c, h, w] {
            std::vector<float> tmp(x->size());
            idwt2_buffer(out->grad.data(), tmp.data(), c, h / 2, w / 2);
            for (size_t i = 0; i < x->size(); ++i) x->grad[i] += tmp[i];
        });
    return out;
}

inline VarPtr idwt_node(Tape& tape, const VarPtr& s) {
    require_chw(s, "idwt_node");
    if (s->dim(0) % 4 != 0) fail(ErrorCode::ShapeMismatch, "idwt_node: channels must be 4C");
    const int c = s->dim(0) / 4, hh = s->dim(1), hw = s->dim(2);

    VarPtr out = make_var({c, 2 * hh, 2 * hw});
    idwt2_buffer(s->value.data(), out->value.data(), c, hh, hw);
    ensure_finite(out->value, "idwt_node");

    out->requires_grad = s->requires_grad;
    if (out->requires_grad)
        tape.record([s, out, c, hh, hw] {
            std::vector<float> tmp(s->size());
            dwt2_buffer(out->grad.data(), tmp.data(), c, 2 * hh, 2 * hw);
            for (size_t i = 0; i < s->size(); ++i) s->grad[i] += tmp[i];
        });
    return out;
}

/// PCA projection with the basis held constant: gradients flow through the
/// fixed linear map only.
inline VarPtr pca_node(Tape& tape, const VarPtr& x, std::shared_ptr<const PcaBasis> basis) {
    require_chw(x, "pca_node");
    const int c = x->dim(0), h = x->dim(1), w = x->dim(2);
    require_even_dims(h, w, "pca_node");
    if (basis->dim != 4 * c) fail(ErrorCode::DimMismatch, "pca_node: basis.dim must equal 4C");

    VarPtr out = make_var({4 * c, h / 2, w / 2});
    pca_project_buffer(x->value.data(), out->value.data(), c, h, w, *basis);
    ensure_finite(out->value, "pca_node");

    out->requires_grad = x->requires_grad;
    if (out->requires_grad)
        tape.record([x, out, basis, c, h, w] {
            std::vector<float> tmp(x->size());
            pca_backproject_buffer(out->grad.data(), tmp.data(), c, h, w, *basis,
                                   /*add_mean=*/false);
            for (size_t i = 0; i < x->size(); ++i) x->grad[i] += tmp[i];
        });
    return out;
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

/// Sum of squared differences against a constant target.
inline VarPtr sum_squared_error(Tape& tape, const VarPtr& r, std::vector<float> target) {
    if (r->size() != target.size())
        fail(ErrorCode::ShapeMismatch, "sum_squared_error: target length mismatch");
    auto t = std::make_shared<std::vector<float>>(std::move(target));

    VarPtr out = make_var({1});
    double acc = 0.0;
    for (size_t i = 0; i < r->size(); ++i) {
        double diff = static_cast<double>(r->value[i]) - (*t)[i];
        acc += diff * diff;
    }
    out->value[0] = static_cast<float>(acc);
    ensure_finite(out->value, "sum_squared_error");

    out->requires_grad = r->requires_grad;
    if (out->requires_grad)
        tape.record([r, t, out] {
            float g = out->grad[0];
            for (size_t i = 0; i < r->size(); ++i)
                r->grad[i] += 2.0f * (r->value[i] - (*t)[i]) * g;
        });
    return out;
}

inline VarPtr add_scalars(Tape& tape, const std::vector<VarPtr>& xs) {
    if (xs.empty()) fail(ErrorCode::EmptyInput, "add_scalars: no inputs");
    VarPtr out = make_var({1});
    double acc = 0.0;
    bool needs = false;
    for (const auto& x : xs) {
        if (x->size() != 1) fail(ErrorCode::ShapeMismatch, "add_scalars: inputs must be scalars");
        acc += x->value[0];
        needs = needs || x->requires_grad;
    }
    out->value[0] = static_cast<float>(acc);
    ensure_finite(out->value, "add_scalars");

    out->requires_grad = needs;
    if (needs)
        tape.record([xs, out] {
            for (const auto& x : xs)
                if (x->requires_grad) x->grad[0] += out->grad[0];
        });
    return out;
}

}  // namespace ad

// ---------------------------------------------------------------------------
// parameters
// ---------------------------------------------------------------------------

enum class ParamKind { Kernel, Bias };

/// Named parameter tensors in registration order.
struct ParameterSet {
    struct Item {
        std::string name;
        ParamKind kind;
        VarPtr tensor;
    };
    std::vector<Item> items;

    VarPtr add(const std::string& name, ParamKind kind, std::vector<int> shape) {
        for (const auto& it : items)
            if (it.name == name) fail(ErrorCode::ConfigInvalid, "duplicate parameter name: " + name);
        VarPtr t = make_var(std::move(shape), /*requires_grad=*/true);
        items.push_back({name, kind, t});
        return t;
    }

    const VarPtr* find(const std::string& name) const {
        for (const auto& it : items)
            if (it.name == name) return &it.tensor;
        return nullptr;
    }

    void zero_grad() {
        for (auto& it : items) std::fill(it.tensor->grad.begin(), it.tensor->grad.end(), 0.0f);
    }

    size_t total_values() const {
        size_t n = 0;
        for (const auto& it : items) n += it.tensor->size();
        return n;
    }
};

/// He-normal kernels (std sqrt(2/fan_in), fan_in = Cin*k*k), zero biases,
/// drawn in registration order from one seeded stream.
inline void init_parameters(ParameterSet& pset, uint64_t seed) {
    Rng rng(seed);
    for (auto& it : pset.items) {
        if (it.kind == ParamKind::Bias) {
            std::fill(it.tensor->value.begin(), it.tensor->value.end(), 0.0f);
            continue;
        }
        const auto& shape = it.tensor->shape;
        if (shape.size() != 4) fail(ErrorCode::ShapeMismatch, "kernel parameters must be 4-D");
        double fan_in = static_cast<double>(shape[1]) * shape[2] * shape[3];
        double stddev = std::sqrt(2.0 / fan_in);
        for (float& v : it.tensor->value) v = static_cast<float>(rng.normal(0.0, stddev));
    }
}

}  // namespace wunet
