#pragma once

// Objective functions for the factorization V ~ W^T H and their block
// gradients. W is R x M, H is R x N, V is M x N; both losses separate over
// the columns of the active factor, which is what makes the alternating
// solvers work one block at a time.

#include <cmath>
#include <limits>

#include "fastmu/matrix.hpp"

namespace fastmu {

enum class Loss { Frobenius, KL };

namespace detail {

inline void check_factor_shapes(const DenseMatrix& v, const DenseMatrix& w,
                                const DenseMatrix& h) {
    check_arg(w.rows() == h.rows(), "factors must share the inner rank");
    check_arg(w.cols() == v.rows() && h.cols() == v.cols(),
              "factor shapes do not match the data");
}

} // namespace detail

/// Frobenius: 0.5 * sum (v - (W^T H))^2.
/// Generalized KL: sum v*log(v/(W^T H)) - v + (W^T H), with v = 0 entries
/// contributing only the model term. The KL value includes the v*(log v - 1)
/// part, so reported numbers are comparable across runs and algorithms.
/// A nonpositive model entry under KL is a domain error; it signals factors
/// that were not clipped to epsilon.
inline double loss_value(const DenseMatrix& v, const DenseMatrix& w, const DenseMatrix& h,
                         Loss loss) {
    detail::check_factor_shapes(v, w, h);
    const DenseMatrix model = matmul(transposed(w), h);
    double acc = 0.0;
    if (loss == Loss::Frobenius) {
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double d = v.data()[i] - model.data()[i];
            acc += 0.5 * d * d;
        }
    } else {
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double x = v.data()[i];
            const double m = model.data()[i];
            detail::check_arg(x >= 0.0, "KL loss requires nonnegative data");
            detail::check_domain(m > 0.0, "KL loss: nonpositive model entry");
            acc += (x > 0.0) ? x * std::log(x / m) - x + m : m;
        }
    }
    return acc;
}

/// loss_value divided by the number of data entries M*N.
inline double loss_normalized(const DenseMatrix& v, const DenseMatrix& w,
                              const DenseMatrix& h, Loss loss) {
    return loss_value(v, w, h, loss) / static_cast<double>(v.size());
}

/// Gradient of loss(data, fixed, active) with respect to the active block,
/// where data ~ fixed^T active. Frobenius: F F^T X - F A. KL: F 1 - F (A / F^T X).
inline DenseMatrix block_gradient(const DenseMatrix& data, const DenseMatrix& fixed,
                                  const DenseMatrix& active, Loss loss) {
    detail::check_factor_shapes(data, fixed, active);
    if (loss == Loss::Frobenius) {
        const DenseMatrix gram = matmul(fixed, transposed(fixed));
        return sub(matmul(gram, active), matmul(fixed, data));
    }
    const DenseMatrix model = matmul(transposed(fixed), active);
    detail::check_domain(min_entry(model) > 0.0, "KL gradient: nonpositive model entry");
    const DenseMatrix ratio = div_ew(data, model);
    DenseMatrix g = matmul(fixed, ratio);
    const std::vector<double> ones_term = row_sums(fixed);
    for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t n = 0; n < g.cols(); ++n) g(r, n) = ones_term[r] - g(r, n);
    return g;
}

/// d loss / d H, an R x N matrix.
inline DenseMatrix grad_h(const DenseMatrix& v, const DenseMatrix& w, const DenseMatrix& h,
                          Loss loss) {
    return block_gradient(v, w, h, loss);
}

/// d loss / d W, an R x M matrix; the mirror of grad_h with V transposed.
inline DenseMatrix grad_w(const DenseMatrix& v, const DenseMatrix& w, const DenseMatrix& h,
                          Loss loss) {
    return block_gradient(transposed(v), h, w, loss);
}

namespace detail {

/// Largest eigenvalue of a symmetric PSD matrix by power iteration, to
/// 1e-10 relative tolerance with a fixed 1000-iteration cap. The all-ones
/// start vector cannot be orthogonal to the dominant eigenvector of a
/// nonnegative matrix.
inline double spectral_norm_sym(const DenseMatrix& a) {
    const std::size_t r = a.rows();
    std::vector<double> v(r, 1.0 / std::sqrt(static_cast<double>(r)));
    double lambda = 0.0;
    for (int it = 0; it < 1000; ++it) {
        std::vector<double> av(r, 0.0);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < r; ++j) av[i] += a(i, j) * v[j];
        double rayleigh = 0.0, norm2 = 0.0;
        for (std::size_t i = 0; i < r; ++i) {
            rayleigh += v[i] * av[i];
            norm2 += av[i] * av[i];
        }
        const double norm = std::sqrt(norm2);
        if (norm == 0.0) return 0.0; // iterate fell in the kernel
        for (std::size_t i = 0; i < r; ++i) v[i] = av[i] / norm;
        if (std::abs(rayleigh - lambda) <= 1e-10 * std::max(std::abs(rayleigh), 1e-30)) {
            lambda = rayleigh;
            break;
        }
        lambda = rayleigh;
    }
    return lambda;
}

} // namespace detail

/// Largest eigenvalue of W W^T, the Lipschitz constant of the Frobenius
/// block gradient. Domain error on an all-zero W.
inline double lipschitz_h(const DenseMatrix& w) {
    detail::check_arg(!w.empty(), "lipschitz_h: empty matrix");
    const DenseMatrix a = matmul(w, transposed(w));
    detail::check_domain(max_entry(a) > 0.0, "lipschitz_h: zero matrix");
    return detail::spectral_norm_sym(a);
}

} // namespace fastmu
