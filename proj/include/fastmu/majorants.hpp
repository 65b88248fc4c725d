#pragma once

// Diagonal majorant metrics. For a symmetric nonnegative matrix B and any
// positive vector u, Diag((B u) / u) - B is positive semi-definite, so the
// diagonal matrix Diag((B u) / u) majorizes B. The classical multiplicative
// update picks u equal to the current iterate; the fast variants pick u to
// make the diagonal as small as possible, which shortens the implied step
// metric and allows larger moves.

#include <cmath>
#include <vector>

#include "fastmu/losses.hpp"
#include "fastmu/matrix.hpp"

namespace fastmu {

enum class MajorantKind {
    MuFro,          // (W W^T x) / x
    MuKl,           // (W 1) / x
    FastMuFro,      // (W W^T s) / s with s = sqrt(W v / W 1)
    FastMuKlExact,  // W ((v . c) / (W^T x)^2), rebuilt at every iterate
    FastMuKlApprox  // W (c / v), iterate-independent
};

/// The core construction: z = (B u) / u for positive u, so Diag(z) - B is PSD.
inline std::vector<double> diag_majorant(const DenseMatrix& b, const std::vector<double>& u) {
    detail::check_arg(b.rows() == b.cols() && b.rows() == u.size(),
                      "diag_majorant: shape mismatch");
    std::vector<double> z(u.size(), 0.0);
    for (std::size_t i = 0; i < u.size(); ++i) {
        detail::check_domain(u[i] > 0.0, "diag_majorant: u must be positive");
        for (std::size_t j = 0; j < u.size(); ++j) z[i] += b(i, j) * u[j];
        z[i] /= u[i];
    }
    return z;
}

namespace detail {

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations. Small
/// matrices only; the ranks here never exceed a few dozen.
inline std::vector<double> symmetric_eigenvalues(DenseMatrix a) {
    check_arg(a.rows() == a.cols(), "symmetric_eigenvalues: not square");
    const std::size_t n = a.rows();
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off_sq = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off_sq += a(p, q) * a(p, q);
        const double norm = frobenius_norm(a);
        if (off_sq <= 1e-30 * std::max(1.0, norm * norm)) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::abs(apq) < 1e-300) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
            }
        }
    }
    std::vector<double> eig(n);
    for (std::size_t i = 0; i < n; ++i) eig[i] = a(i, i);
    std::sort(eig.begin(), eig.end());
    return eig;
}

} // namespace detail

struct PsdReport {
    bool psd = false;
    double min_eig = 0.0;
};

/// Forms D = Diag((B u) / u) and reports the minimum eigenvalue of D - B.
/// psd holds when that eigenvalue is >= -1e-10. B must be symmetric with
/// nonnegative entries and u strictly positive.
inline PsdReport check_majorant_psd(const DenseMatrix& b, const std::vector<double>& u) {
    detail::check_arg(b.rows() == b.cols() && b.rows() == u.size(),
                      "check_majorant_psd: shape mismatch");
    const double scale = std::max(1.0, std::abs(max_entry(b)));
    for (std::size_t i = 0; i < b.rows(); ++i) {
        for (std::size_t j = 0; j < b.cols(); ++j) {
            detail::check_arg(b(i, j) >= 0.0, "check_majorant_psd: negative entry");
            if (j > i)
                detail::check_domain(std::abs(b(i, j) - b(j, i)) <= 1e-12 * scale,
                                     "check_majorant_psd: matrix not symmetric");
        }
    }
    const std::vector<double> z = diag_majorant(b, u);
    DenseMatrix d_minus_b = scaled(b, -1.0);
    for (std::size_t i = 0; i < b.rows(); ++i) d_minus_b(i, i) += z[i];
    const std::vector<double> eig = detail::symmetric_eigenvalues(d_minus_b);
    return {eig.front() >= -1e-10, eig.front()};
}

/// Minimizer of ||b / u||_1 over u >= 0 subject to ||W^T u||_1 = v_l1, for
/// nonnegative b and W. The solution direction is sqrt(b / (W 1)); the scale
/// is fixed by the constraint. Entries with b_i = 0 would be 0 at the
/// unconstrained optimum and are clipped to epsilon instead so the resulting
/// metric stays invertible. Note the constraint normalizer is
/// v_l1 / sum_i sqrt(b_i (W 1)_i); the returned u satisfies the constraint
/// up to the epsilon-clipped entries.
inline std::vector<double> solve_u(const std::vector<double>& b, const DenseMatrix& w,
                                   double v_l1, double epsilon = 1e-16) {
    detail::check_arg(b.size() == w.rows(), "solve_u: b length must match rows of W");
    detail::check_arg(v_l1 > 0.0, "solve_u: v_l1 must be positive");
    const std::vector<double> w1 = row_sums(w);
    double denom = 0.0;
    bool any_positive = false;
    for (std::size_t i = 0; i < b.size(); ++i) {
        detail::check_arg(b[i] >= 0.0, "solve_u: b must be nonnegative");
        detail::check_domain(w1[i] > 0.0, "solve_u: zero row sum in W");
        if (b[i] > 0.0) {
            any_positive = true;
            denom += std::sqrt(b[i] * w1[i]);
        }
    }
    detail::check_domain(any_positive, "solve_u: b is identically zero");
    const double alpha = v_l1 / denom;
    std::vector<double> u(b.size());
    for (std::size_t i = 0; i < b.size(); ++i)
        u[i] = (b[i] > 0.0) ? alpha * std::sqrt(b[i] / w1[i]) : epsilon;
    return u;
}

namespace detail {

// Column n of the metric for each kind, assembled for all columns at once.
// The helpers below are shared with the solvers so the formulas live in one
// place; precomputable pieces are taken as arguments.

inline DenseMatrix metric_mu_fro(const DenseMatrix& gram, const DenseMatrix& x) {
    return div_ew(matmul(gram, x), x);
}

inline DenseMatrix metric_mu_kl(const std::vector<double>& w_row_sums, const DenseMatrix& x) {
    DenseMatrix z(x.rows(), x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t n = 0; n < x.cols(); ++n) z(r, n) = w_row_sums[r] / x(r, n);
    return z;
}

inline DenseMatrix metric_fastmu_fro(const DenseMatrix& gram, const DenseMatrix& s) {
    return div_ew(matmul(gram, s), s);
}

// weighted = V with each row m scaled by c_m = column sum of W; model = W^T X.
inline DenseMatrix metric_fastmu_kl_exact(const DenseMatrix& w, const DenseMatrix& weighted,
                                          const DenseMatrix& model) {
    return matmul(w, div_ew(weighted, mul_ew(model, model)));
}

// ratio = (c 1^T) / max(V, eps_v), an M x N matrix.
inline DenseMatrix metric_fastmu_kl_approx(const DenseMatrix& w, const DenseMatrix& ratio) {
    return matmul(w, ratio);
}

// s = sqrt((W V) / (W 1)) columnwise, with a positive floor on the result.
inline DenseMatrix fastmu_fro_direction(const DenseMatrix& wv,
                                        const std::vector<double>& w_row_sums,
                                        double floor_value) {
    DenseMatrix s(wv.rows(), wv.cols());
    for (std::size_t r = 0; r < wv.rows(); ++r) {
        check_domain(w_row_sums[r] > 0.0, "metric: zero row sum in W");
        for (std::size_t n = 0; n < wv.cols(); ++n)
            s(r, n) = std::max(std::sqrt(std::max(wv(r, n), 0.0) / w_row_sums[r]), floor_value);
    }
    return s;
}

inline DenseMatrix kl_weighted_data(const DenseMatrix& v, const std::vector<double>& w_col_sums) {
    DenseMatrix t(v.rows(), v.cols());
    for (std::size_t m = 0; m < v.rows(); ++m)
        for (std::size_t n = 0; n < v.cols(); ++n) t(m, n) = v(m, n) * w_col_sums[m];
    return t;
}

inline DenseMatrix kl_approx_ratio(const DenseMatrix& v, const std::vector<double>& w_col_sums,
                                   double eps_v) {
    DenseMatrix t(v.rows(), v.cols());
    for (std::size_t m = 0; m < v.rows(); ++m)
        for (std::size_t n = 0; n < v.cols(); ++n)
            t(m, n) = w_col_sums[m] / std::max(v(m, n), eps_v);
    return t;
}

} // namespace detail

/// Builds the diagonal metric for every column of the active block X at
/// once; column n of the result is the diagonal of the majorant metric for
/// column n's subproblem. V is the data, W the fixed factor, X the active
/// iterate. For FastMuKlApprox, data entries below eps_v are clipped before
/// division. Zero divisors arising from zero rows/columns of W are domain
/// errors; the caller is expected to clip W to epsilon.
inline DenseMatrix metric(MajorantKind kind, const DenseMatrix& v, const DenseMatrix& w,
                          const DenseMatrix& x, double eps_v = 1e-8) {
    detail::check_factor_shapes(v, w, x);
    switch (kind) {
        case MajorantKind::MuFro: {
            detail::check_domain(min_entry(x) > 0.0, "metric: nonpositive iterate entry");
            return detail::metric_mu_fro(matmul(w, transposed(w)), x);
        }
        case MajorantKind::MuKl: {
            detail::check_domain(min_entry(x) > 0.0, "metric: nonpositive iterate entry");
            return detail::metric_mu_kl(row_sums(w), x);
        }
        case MajorantKind::FastMuFro: {
            const DenseMatrix s =
                detail::fastmu_fro_direction(matmul(w, v), row_sums(w), 1e-150);
            return detail::metric_fastmu_fro(matmul(w, transposed(w)), s);
        }
        case MajorantKind::FastMuKlExact: {
            const DenseMatrix model = matmul(transposed(w), x);
            detail::check_domain(min_entry(model) > 0.0, "metric: zero column in W");
            return detail::metric_fastmu_kl_exact(w, detail::kl_weighted_data(v, col_sums(w)),
                                                  model);
        }
        case MajorantKind::FastMuKlApprox:
            return detail::metric_fastmu_kl_approx(w,
                                                   detail::kl_approx_ratio(v, col_sums(w), eps_v));
    }
    throw std::invalid_argument("metric: unknown kind");
}

} // namespace fastmu
