// PCA over 2x2xC image patches. The basis comes from the eigendecomposition
// of the centered scatter matrix, which yields exactly the right singular
// vectors and singular values of the centered data matrix, and stays well
// defined when there are fewer samples than dimensions (null directions
// complete the basis with singular value 0).
#pragma once

#include <vector>

#include <Eigen/Dense>

#include "wunet/core.hpp"

namespace wunet {

struct PcaBasis {
    int dim = 0;   // d = 4C
    int rank = 0;  // k <= d
    std::vector<float> mean;             // length d
    std::vector<float> basis;            // k x d row-major, rows = principal directions
    std::vector<float> singular_values;  // length k, non-increasing

    float b(int row, int col) const { return basis[static_cast<size_t>(row) * dim + col]; }
};

/// Identity-rows basis (projection degenerates to space-to-depth).
inline PcaBasis identity_basis(int dim) {
    PcaBasis out;
    out.dim = dim;
    out.rank = dim;
    out.mean.assign(dim, 0.0f);
    out.basis.assign(static_cast<size_t>(dim) * dim, 0.0f);
    out.singular_values.assign(dim, 0.0f);
    for (int i = 0; i < dim; ++i) out.basis[static_cast<size_t>(i) * dim + i] = 1.0f;
    return out;
}

namespace detail {

// Largest-magnitude entry of each row made non-negative; ties break to the
// lowest index.
inline void fix_row_signs(Eigen::MatrixXd& rows) {
    for (Eigen::Index r = 0; r < rows.rows(); ++r) {
        Eigen::Index arg = 0;
        double best = -1.0;
        for (Eigen::Index c = 0; c < rows.cols(); ++c) {
            double a = std::abs(rows(r, c));
            if (a > best) {
                best = a;
                arg = c;
            }
        }
        if (rows(r, arg) < 0.0) rows.row(r) = -rows.row(r);
    }
}

}  // namespace detail

/// Fits mean + top-k principal directions of an n x d sample matrix
/// (row-major). Zero-variance input falls back to the identity basis.
inline PcaBasis fit_pca(const std::vector<float>& samples, int n, int d, int rank) {
    if (n < 1 || samples.size() != static_cast<size_t>(n) * d)
        fail(ErrorCode::EmptyInput, "fit_pca needs at least one sample vector");
    if (rank < 1 || rank > d) fail(ErrorCode::DimMismatch, "fit_pca rank must be in [1, d]");

    Eigen::MatrixXd X(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) X(i, j) = samples[static_cast<size_t>(i) * d + j];

    Eigen::RowVectorXd mean = X.colwise().mean();
    X.rowwise() -= mean;

    Eigen::MatrixXd scatter = X.transpose() * X;  // d x d
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(scatter);
    if (eig.info() != Eigen::Success) fail(ErrorCode::NumericFault, "eigendecomposition failed");

    PcaBasis out;
    out.dim = d;
    out.rank = rank;
    out.mean.resize(d);
    for (int j = 0; j < d; ++j) out.mean[j] = static_cast<float>(mean(j));

    // eigenvalues come back ascending; take the top `rank` in descending order
    Eigen::MatrixXd rows(rank, d);
    out.singular_values.resize(rank);
    double top = std::max(0.0, eig.eigenvalues()(d - 1));
    if (top <= 1e-24) {
        // zero variance: fall back to identity rows
        out.basis.assign(static_cast<size_t>(rank) * d, 0.0f);
        for (int r = 0; r < rank; ++r) out.basis[static_cast<size_t>(r) * d + r] = 1.0f;
        std::fill(out.singular_values.begin(), out.singular_values.end(), 0.0f);
        return out;
    }
    for (int r = 0; r < rank; ++r) {
        int src = d - 1 - r;
        rows.row(r) = eig.eigenvectors().col(src).transpose();
        out.singular_values[r] =
            static_cast<float>(std::sqrt(std::max(0.0, eig.eigenvalues()(src))));
    }
    detail::fix_row_signs(rows);

    out.basis.resize(static_cast<size_t>(rank) * d);
    for (int r = 0; r < rank; ++r)
        for (int j = 0; j < d; ++j)
            out.basis[static_cast<size_t>(r) * d + j] = static_cast<float>(rows(r, j));
    return out;
}

// Patch vector layout: index c*4 + k, with k running over p00, p01, p10, p11.
inline void gather_patch_vectors(const float* src, int channels, int h, int w,
                                 std::vector<float>& out) {
    int hh = h / 2, hw = w / 2;
    int d = 4 * channels;
    out.resize(static_cast<size_t>(hh) * hw * d);
    for (int y = 0; y < hh; ++y)
        for (int x = 0; x < hw; ++x) {
            float* v = out.data() + (static_cast<size_t>(y) * hw + x) * d;
            for (int c = 0; c < channels; ++c) {
                const float* in = src + static_cast<size_t>(c) * h * w;
                v[c * 4 + 0] = in[(2 * y) * w + 2 * x];
                v[c * 4 + 1] = in[(2 * y) * w + 2 * x + 1];
                v[c * 4 + 2] = in[(2 * y + 1) * w + 2 * x];
                v[c * 4 + 3] = in[(2 * y + 1) * w + 2 * x + 1];
            }
        }
}

inline void scatter_patch_vectors(const std::vector<float>& vecs, float* dst, int channels, int h,
                                  int w) {
    int hh = h / 2, hw = w / 2;
    int d = 4 * channels;
    for (int y = 0; y < hh; ++y)
        for (int x = 0; x < hw; ++x) {
            const float* v = vecs.data() + (static_cast<size_t>(y) * hw + x) * d;
            for (int c = 0; c < channels; ++c) {
                float* out = dst + static_cast<size_t>(c) * h * w;
                out[(2 * y) * w + 2 * x] = v[c * 4 + 0];
                out[(2 * y) * w + 2 * x + 1] = v[c * 4 + 1];
                out[(2 * y + 1) * w + 2 * x] = v[c * 4 + 2];
                out[(2 * y + 1) * w + 2 * x + 1] = v[c * 4 + 3];
            }
        }
}

/// Fits a full-rank basis from the 2x2xC patches of x itself.
inline PcaBasis fit_pca_from_tensor(const ImageTensor& x) {
    if (x.height % 2 != 0 || x.width % 2 != 0)
        fail(ErrorCode::OddDimension, "fit_pca_from_tensor: H and W must be even");
    int d = 4 * x.channels;
    std::vector<float> vecs;
    gather_patch_vectors(x.data.data(), x.channels, x.height, x.width, vecs);
    return fit_pca(vecs, (x.height / 2) * (x.width / 2), d, d);
}

// Buffer-level projection: coefficients of basis rows become output channels,
// ordered by component importance. Channels past basis.rank stay zero.
inline void pca_project_buffer(const float* src, float* dst, int channels, int h, int w,
                               const PcaBasis& basis) {
    int hh = h / 2, hw = w / 2;
    int d = 4 * channels;
    if (basis.dim != d) fail(ErrorCode::DimMismatch, "pca_project: basis.dim != 4C");
    size_t plane = static_cast<size_t>(hh) * hw;
    std::fill(dst, dst + static_cast<size_t>(d) * plane, 0.0f);
    std::vector<float> v(d);
    for (int y = 0; y < hh; ++y)
        for (int x = 0; x < hw; ++x) {
            for (int c = 0; c < channels; ++c) {
                const float* in = src + static_cast<size_t>(c) * h * w;
                v[c * 4 + 0] = in[(2 * y) * w + 2 * x] - basis.mean[c * 4 + 0];
                v[c * 4 + 1] = in[(2 * y) * w + 2 * x + 1] - basis.mean[c * 4 + 1];
                v[c * 4 + 2] = in[(2 * y + 1) * w + 2 * x] - basis.mean[c * 4 + 2];
                v[c * 4 + 3] = in[(2 * y + 1) * w + 2 * x + 1] - basis.mean[c * 4 + 3];
            }
            size_t o = static_cast<size_t>(y) * hw + x;
            for (int r = 0; r < basis.rank; ++r) {
                const float* row = basis.basis.data() + static_cast<size_t>(r) * d;
                float acc = 0.0f;
                for (int j = 0; j < d; ++j) acc += row[j] * v[j];
                dst[r * plane + o] = acc;
            }
        }
}

// Adjoint of the projection (no mean): used by backward passes.
inline void pca_backproject_buffer(const float* src, float* dst, int channels, int h, int w,
                                   const PcaBasis& basis, bool add_mean) {
    int hh = h / 2, hw = w / 2;
    int d = 4 * channels;
    size_t plane = static_cast<size_t>(hh) * hw;
    std::vector<float> v(d);
    for (int y = 0; y < hh; ++y)
        for (int x = 0; x < hw; ++x) {
            size_t o = static_cast<size_t>(y) * hw + x;
            for (int j = 0; j < d; ++j) v[j] = add_mean ? basis.mean[j] : 0.0f;
            for (int r = 0; r < basis.rank; ++r) {
                const float* row = basis.basis.data() + static_cast<size_t>(r) * d;
                float coeff = src[r * plane + o];
                for (int j = 0; j < d; ++j) v[j] += coeff * row[j];
            }
            for (int c = 0; c < channels; ++c) {
                float* out = dst + static_cast<size_t>(c) * h * w;
                out[(2 * y) * w + 2 * x] = v[c * 4 + 0];
                out[(2 * y) * w + 2 * x + 1] = v[c * 4 + 1];
                out[(2 * y + 1) * w + 2 * x] = v[c * 4 + 2];
                out[(2 * y + 1) * w + 2 * x + 1] = v[c * 4 + 3];
            }
        }
}

inline ImageTensor pca_project(const ImageTensor& x, const PcaBasis& basis) {
    if (x.height % 2 != 0 || x.width % 2 != 0)
        fail(ErrorCode::OddDimension, "pca_project: H and W must be even");
    if (basis.dim != 4 * x.channels)
        fail(ErrorCode::DimMismatch, "pca_project: basis.dim must equal 4C");
    ImageTensor out(4 * x.channels, x.height / 2, x.width / 2);
    pca_project_buffer(x.data.data(), out.data.data(), x.channels, x.height, x.width, basis);
    return out;
}

inline ImageTensor pca_reconstruct(const ImageTensor& coeffs, const PcaBasis& basis) {
    if (coeffs.channels != basis.dim)
        fail(ErrorCode::DimMismatch, "pca_reconstruct: coeffs channels must equal basis.dim");
    int channels = basis.dim / 4;
    ImageTensor out(channels, coeffs.height * 2, coeffs.width * 2);
    pca_backproject_buffer(coeffs.data.data(), out.data.data(), channels, out.height, out.width,
                           basis, /*add_mean=*/true);
    return out;
}

}  // namespace wunet
