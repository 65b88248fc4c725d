#pragma once

// Alternating solvers. The outer loop visits the H block then the W block;
// each visit runs an inner loop of one-block steps with a dynamic stopping
// rule on the squared displacement. All per-block code is role-agnostic:
// the W update is the H update applied to the transposed data with factor
// roles exchanged.

#include <chrono>
#include <cmath>
#include <iostream>
#include <limits>
#include <optional>
#include <utility>

#include "fastmu/losses.hpp"
#include "fastmu/majorants.hpp"
#include "fastmu/matrix.hpp"

namespace fastmu {

enum class AlgorithmKind { FastMu, FastMuExtrapolated, Mu, Hals, NeNmf, Gd };
enum class KlHessian { Exact, Approx };
enum class BlockId { H, W };

struct Algorithm {
    AlgorithmKind kind = AlgorithmKind::FastMu;
    Loss loss = Loss::Frobenius;
    KlHessian kl_hessian = KlHessian::Exact; // FastMu with KL loss only
};

struct SolverConfig {
    Algorithm algorithm;
    double epsilon = 1e-16;    // positivity floor for factor entries
    double gamma = 1.9;        // step size in (0,2); forced to 1 when extrapolating
    double delta = 0.1;        // inner stopping tolerance in [0,1)
    int max_inner = 100;
    int max_outer = 20000;     // trace length cap, counting the initial state
    std::optional<double> time_budget_s;
    std::uint64_t seed = 0;
    bool warm_start_mu_kl = true; // refine a KL init with one multiplicative update
    double eps_v = 1e-8;          // data floor for the approximate KL metric
    bool update_h_first = true;
};

struct FactorPair {
    DenseMatrix w; // R x M
    DenseMatrix h; // R x N
};

struct TracePoint {
    double loss_normalized = 0.0;
    double elapsed_s = 0.0;
    int inner_h = 0;
    int inner_w = 0;
};

struct ConvergenceTrace {
    std::vector<TracePoint> points;
    // Observed range of metric diagonal entries, for the fastMU variants
    // only; left at the inf sentinels otherwise.
    double metric_min = std::numeric_limits<double>::infinity();
    double metric_max = -std::numeric_limits<double>::infinity();
};

struct SolveResult {
    FactorPair factors;
    ConvergenceTrace trace;
};

struct NlsResult {
    DenseMatrix h;
    ConvergenceTrace trace;
};

inline void validate_config(const SolverConfig& cfg) {
    detail::check_arg(cfg.epsilon > 0.0, "config: epsilon must be positive");
    detail::check_arg(cfg.gamma > 0.0 && cfg.gamma < 2.0, "config: gamma must lie in (0,2)");
    detail::check_arg(cfg.delta >= 0.0 && cfg.delta < 1.0, "config: delta must lie in [0,1)");
    detail::check_arg(cfg.max_inner >= 1, "config: max_inner must be at least 1");
    detail::check_arg(cfg.max_outer >= 1, "config: max_outer must be at least 1");
    detail::check_arg(cfg.eps_v > 0.0, "config: eps_v must be positive");
    const Algorithm& a = cfg.algorithm;
    if (a.loss == Loss::KL) {
        detail::check_arg(a.kind != AlgorithmKind::Hals, "config: HALS needs the Frobenius loss");
        detail::check_arg(a.kind != AlgorithmKind::NeNmf,
                          "config: NeNMF diverges under KL and is Frobenius-only");
        detail::check_arg(a.kind != AlgorithmKind::FastMuExtrapolated,
                          "config: extrapolation diverges under KL and is Frobenius-only");
        detail::check_arg(a.kind != AlgorithmKind::Gd, "config: GD needs the Frobenius loss");
    }
}

/// One variable-metric forward-backward step:
/// X' = max(X - gamma * (grad / Z), epsilon) entrywise.
inline DenseMatrix inner_step_fastmu(const DenseMatrix& x, const DenseMatrix& grad,
                                     const DenseMatrix& z, double gamma, double epsilon) {
    detail::check_arg(same_shape(x, grad) && same_shape(x, z), "inner_step: shape mismatch");
    DenseMatrix next(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) {
        detail::check_domain(z.data()[i] > 0.0, "inner_step: nonpositive metric entry");
        next.data()[i] = std::max(x.data()[i] - gamma * grad.data()[i] / z.data()[i], epsilon);
    }
    return next;
}

namespace detail {

struct BlockResult {
    DenseMatrix x;
    int count = 0;
};

struct MetricRange {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    void note(const DenseMatrix& z) {
        lo = std::min(lo, min_entry(z));
        hi = std::max(hi, max_entry(z));
    }
    void merge(const MetricRange& o) {
        lo = std::min(lo, o.lo);
        hi = std::max(hi, o.hi);
    }
};

/// Runs step() until max_inner or until the squared displacement falls
/// below delta times the first displacement. The first step always runs;
/// an exactly stationary first step stops the loop.
template <class Step>
BlockResult displacement_loop(DenseMatrix x, const SolverConfig& cfg, Step step) {
    double first = 0.0;
    int count = 0;
    for (int j = 0; j < cfg.max_inner; ++j) {
        DenseMatrix next = step(x, j);
        const double disp = squared_distance(next, x);
        x = std::move(next);
        ++count;
        if (j == 0) {
            first = disp;
            if (disp == 0.0) break;
        } else if (disp < cfg.delta * first) {
            break;
        }
    }
    return {std::move(x), count};
}

// beta_{j} = (t_j - 1)/t_{j+1} with t_0 = 1, t_{j+1} = (1 + sqrt(1+4 t_j^2))/2.
struct FastGradientSchedule {
    double t = 1.0;
    double next_beta() {
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        const double beta = (t - 1.0) / t_next;
        t = t_next;
        return beta;
    }
};

inline DenseMatrix mu_step_fro(const DenseMatrix& gram, const DenseMatrix& fa,
                               const DenseMatrix& x, double eps) {
    const DenseMatrix denom = matmul(gram, x);
    DenseMatrix next(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) {
        check_domain(denom.data()[i] > 0.0, "mu step: zero divisor entry");
        next.data()[i] = std::max(x.data()[i] * fa.data()[i] / denom.data()[i], eps);
    }
    return next;
}

inline DenseMatrix mu_step_kl(const DenseMatrix& data, const DenseMatrix& fixed,
                              const DenseMatrix& fixed_t, const std::vector<double>& f_row_sums,
                              const DenseMatrix& x, double eps) {
    const DenseMatrix model = matmul(fixed_t, x);
    check_domain(min_entry(model) > 0.0, "mu step: nonpositive model entry");
    const DenseMatrix numer = matmul(fixed, div_ew(data, model));
    DenseMatrix next(x.rows(), x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        check_domain(f_row_sums[r] > 0.0, "mu step: zero divisor entry");
        for (std::size_t n = 0; n < x.cols(); ++n)
            next(r, n) = std::max(x(r, n) * numer(r, n) / f_row_sums[r], eps);
    }
    return next;
}

/// One full sweep of rank-one row updates against already-updated rows.
inline DenseMatrix hals_sweep(const DenseMatrix& gram, const DenseMatrix& fa, DenseMatrix x,
                              double eps, bool* warned) {
    const std::size_t rank = x.rows(), n = x.cols();
    for (std::size_t r = 0; r < rank; ++r) {
        const double grr = gram(r, r);
        if (grr < eps * eps) {
            if (warned && !*warned) {
                std::cerr << "hals: skipping degenerate component " << r << "\n";
                *warned = true;
            }
            continue;
        }
        std::vector<double> resid(n);
        for (std::size_t j = 0; j < n; ++j) resid[j] = fa(r, j);
        for (std::size_t s = 0; s < rank; ++s) {
            const double g = gram(r, s);
            if (g == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) resid[j] -= g * x(s, j);
        }
        for (std::size_t j = 0; j < n; ++j)
            x(r, j) = std::max(x(r, j) + resid[j] / grr, eps);
    }
    return x;
}

/// Inner loop on one block: data ~ fixed^T x. Dispatches on the configured
/// algorithm; precomputes everything that does not depend on the moving
/// iterate before entering the loop.
inline BlockResult update_block(const DenseMatrix& data, const DenseMatrix& fixed,
                                DenseMatrix x, const SolverConfig& cfg,
                                MetricRange* range = nullptr) {
    const Algorithm alg = cfg.algorithm;
    const double eps = cfg.epsilon;
    switch (alg.kind) {
        case AlgorithmKind::Mu: {
            if (alg.loss == Loss::Frobenius) {
                const DenseMatrix gram = matmul(fixed, transposed(fixed));
                const DenseMatrix fa = matmul(fixed, data);
                return displacement_loop(std::move(x), cfg, [&](const DenseMatrix& cur, int) {
                    return mu_step_fro(gram, fa, cur, eps);
                });
            }
            const DenseMatrix fixed_t = transposed(fixed);
            const std::vector<double> sums = row_sums(fixed);
            return displacement_loop(std::move(x), cfg, [&](const DenseMatrix& cur, int) {
                return mu_step_kl(data, fixed, fixed_t, sums, cur, eps);
            });
        }
        case AlgorithmKind::Hals: {
            const DenseMatrix gram = matmul(fixed, transposed(fixed));
            const DenseMatrix fa = matmul(fixed, data);
            bool warned = false;
            return displacement_loop(std::move(x), cfg, [&](const DenseMatrix& cur, int) {
                return hals_sweep(gram, fa, cur, eps, &warned);
            });
        }
        case AlgorithmKind::Gd: {
            const DenseMatrix gram = matmul(fixed, transposed(fixed));
            const DenseMatrix fa = matmul(fixed, data);
            const double lip = spectral_norm_sym(gram);
            check_domain(lip > 0.0, "gd: zero Lipschitz constant");
            const double step_size = cfg.gamma / lip;
            return displacement_loop(std::move(x), cfg, [&](const DenseMatrix& cur, int) {
                const DenseMatrix grad = sub(matmul(gram, cur), fa);
                DenseMatrix next(cur.rows(), cur.cols());
                for (std::size_t i = 0; i < cur.size(); ++i)
                    next.data()[i] = std::max(cur.data()[i] - step_size * grad.data()[i], eps);
                return next;
            });
        }
        case AlgorithmKind::NeNmf: {
            const DenseMatrix gram = matmul(fixed, transposed(fixed));
            const DenseMatrix fa = matmul(fixed, data);
            const double lip = spectral_norm_sym(gram);
            check_domain(lip > 0.0, "nenmf: zero Lipschitz constant");
            DenseMatrix pairing = x;
            FastGradientSchedule sched;
            return displacement_loop(std::move(x), cfg, [&](const DenseMatrix& prev, int) {
                const DenseMatrix grad = sub(matmul(gram, pairing), fa);
                DenseMatrix next(prev.rows(), prev.cols());
                for (std::size_t i = 0; i < prev.size(); ++i)
                    next.data()[i] =
                        std::max(pairing.data()[i] - grad.data()[i] / lip, eps);
                const double beta = sched.next_beta();
                for (std::size_t i = 0; i < next.size(); ++i)
                    pairing.data()[i] =
                        next.data()[i] + beta * (next.data()[i] - prev.data()[i]);
                return next;
            });
        }
        case AlgorithmKind::FastMu: {
            if (alg.loss == Loss::Frobenius) {
                const DenseMatrix gram = matmul(fixed, transposed(fixed));
                const DenseMatrix fa = matmul(fixed, data);
                const DenseMatrix dir = fastmu_fro_direction(fa, row_sums(fixed), 1e-150);
                const DenseMatrix z = metric_fastmu_fro(gram, dir);
                if (range) range->note(z);
                return displacement_loop(std::move(x), cfg, [&](const DenseMatrix& cur, int) {
                    const DenseMatrix grad = sub(matmul(gram, cur), fa);
                    DenseMatrix next(cur.rows(), cur.cols());
                    for (std::size_t i = 0; i < cur.size(); ++i) {
                        const double zi = std::max(z.data()[i], eps);
                        next.data()[i] =
                            std::max(cur.data()[i] - cfg.gamma * grad.data()[i] / zi, eps);
                    }
                    return next;
                });
            }
            const DenseMatrix fixed_t = transposed(fixed);
            const std::vector<double> sums = row_sums(fixed);
            if (alg.kl_hessian == KlHessian::Approx) {
                const DenseMatrix z =
                    metric_fastmu_kl_approx(fixed, kl_approx_ratio(data, col_sums(fixed),
                                                                   cfg.eps_v));
                if (range) range->note(z);
                return displacement_loop(std::move(x), cfg, [&](const DenseMatrix& cur, int) {
                    const DenseMatrix model = matmul(fixed_t, cur);
                    check_domain(min_entry(model) > 0.0, "fastmu: nonpositive model entry");
                    const DenseMatrix numer = matmul(fixed, div_ew(data, model));
                    DenseMatrix next(cur.rows(), cur.cols());
                    for (std::size_t r = 0; r < cur.rows(); ++r)
                        for (std::size_t n = 0; n < cur.cols(); ++n) {
                            const double g = sums[r] - numer(r, n);
                            const double zi = std::max(z(r, n), eps);
                            next(r, n) = std::max(cur(r, n) - cfg.gamma * g / zi, eps);
                        }
                    return next;
                });
            }
            // Exact KL metric: depends on the iterate, rebuilt every step.
            const DenseMatrix weighted = kl_weighted_data(data, col_sums(fixed));
            return displacement_loop(std::move(x), cfg, [&](const DenseMatrix& cur, int) {
                const DenseMatrix model = matmul(fixed_t, cur);
                check_domain(min_entry(model) > 0.0, "fastmu: nonpositive model entry");
                const DenseMatrix numer = matmul(fixed, div_ew(data, model));
                const DenseMatrix z =
                    metric_fastmu_kl_exact(fixed, weighted, model);
                if (range) range->note(z);
                DenseMatrix next(cur.rows(), cur.cols());
                for (std::size_t r = 0; r < cur.rows(); ++r)
                    for (std::size_t n = 0; n < cur.cols(); ++n) {
                        const double g = sums[r] - numer(r, n);
                        const double zi = std::max(z(r, n), eps);
                        next(r, n) = std::max(cur(r, n) - cfg.gamma * g / zi, eps);
                    }
                return next;
            });
        }
        case AlgorithmKind::FastMuExtrapolated: {
            check_arg(alg.loss == Loss::Frobenius,
                      "extrapolated fastMU needs the Frobenius loss");
            const DenseMatrix gram = matmul(fixed, transposed(fixed));
            const DenseMatrix fa = matmul(fixed, data);
            const DenseMatrix dir = fastmu_fro_direction(fa, row_sums(fixed), 1e-150);
            const DenseMatrix z = metric_fastmu_fro(gram, dir);
            if (range) range->note(z);
            DenseMatrix pairing = x;
            FastGradientSchedule sched;
            // gamma is pinned to 1; larger steps diverge once extrapolation
            // is in play.
            return displacement_loop(std::move(x), cfg, [&](const DenseMatrix& prev, int) {
                const DenseMatrix grad = sub(matmul(gram, pairing), fa);
                DenseMatrix next(prev.rows(), prev.cols());
                for (std::size_t i = 0; i < prev.size(); ++i) {
                    const double zi = std::max(z.data()[i], eps);
                    next.data()[i] = std::max(pairing.data()[i] - grad.data()[i] / zi, eps);
                }
                const double beta = sched.next_beta();
                for (std::size_t i = 0; i < next.size(); ++i)
                    pairing.data()[i] =
                        next.data()[i] + beta * (next.data()[i] - prev.data()[i]);
                return next;
            });
        }
    }
    throw std::invalid_argument("update_block: unknown algorithm");
}

} // namespace detail

/// Runs the configured inner loop on one block and reports the number of
/// inner iterations actually performed.
inline std::pair<DenseMatrix, int> run_inner_loop(BlockId block, const DenseMatrix& v,
                                                  const DenseMatrix& w, const DenseMatrix& h,
                                                  const SolverConfig& cfg) {
    validate_config(cfg);
    detail::BlockResult res = (block == BlockId::H)
                                  ? detail::update_block(v, w, h, cfg)
                                  : detail::update_block(transposed(v), h, w, cfg);
    return {std::move(res.x), res.count};
}

/// Inner loop with fast-gradient extrapolation of the iterates; Frobenius
/// loss only.
inline std::pair<DenseMatrix, int> run_inner_loop_extrapolated(BlockId block,
                                                               const DenseMatrix& v,
                                                               const DenseMatrix& w,
                                                               const DenseMatrix& h,
                                                               SolverConfig cfg) {
    detail::check_arg(cfg.algorithm.loss == Loss::Frobenius,
                      "extrapolated inner loop needs the Frobenius loss");
    cfg.algorithm.kind = AlgorithmKind::FastMuExtrapolated;
    cfg.gamma = 1.0;
    return run_inner_loop(block, v, w, h, cfg);
}

/// One multiplicative update of the requested block.
inline DenseMatrix mu_inner(BlockId block, const DenseMatrix& v, const DenseMatrix& w,
                            const DenseMatrix& h, Loss loss, double epsilon = 1e-16) {
    const DenseMatrix& data_src = v;
    const DenseMatrix data = (block == BlockId::H) ? data_src : transposed(v);
    const DenseMatrix& fixed = (block == BlockId::H) ? w : h;
    const DenseMatrix& active = (block == BlockId::H) ? h : w;
    if (loss == Loss::Frobenius)
        return detail::mu_step_fro(matmul(fixed, transposed(fixed)), matmul(fixed, data),
                                   active, epsilon);
    return detail::mu_step_kl(data, fixed, transposed(fixed), row_sums(fixed), active, epsilon);
}

/// One full HALS sweep over the rows of H; Frobenius loss only.
inline DenseMatrix hals_inner(const DenseMatrix& v, const DenseMatrix& w, const DenseMatrix& h,
                              double epsilon = 1e-16) {
    bool warned = false;
    return detail::hals_sweep(matmul(w, transposed(w)), matmul(w, v), h, epsilon, &warned);
}

/// One projected gradient step on H with step gamma / L, L the largest
/// eigenvalue of W W^T.
inline DenseMatrix gd_inner(const DenseMatrix& v, const DenseMatrix& w, const DenseMatrix& h,
                            double gamma = 1.9, double epsilon = 1e-16) {
    const double lip = lipschitz_h(w);
    detail::check_domain(lip > 0.0, "gd_inner: zero Lipschitz constant");
    const DenseMatrix grad = grad_h(v, w, h, Loss::Frobenius);
    DenseMatrix next(h.rows(), h.cols());
    for (std::size_t i = 0; i < h.size(); ++i)
        next.data()[i] = std::max(h.data()[i] - (gamma / lip) * grad.data()[i], epsilon);
    return next;
}

/// Fast-gradient inner loop on H with step 1/L and the displacement
/// stopping rule; Frobenius loss only.
inline std::pair<DenseMatrix, int> nenmf_inner(const DenseMatrix& v, const DenseMatrix& w,
                                               const DenseMatrix& h, SolverConfig cfg) {
    cfg.algorithm.kind = AlgorithmKind::NeNmf;
    cfg.algorithm.loss = Loss::Frobenius;
    return run_inner_loop(BlockId::H, v, w, h, cfg);
}

namespace detail {

class OuterClock {
public:
    OuterClock() : start_(std::chrono::steady_clock::now()) {}
    double elapsed() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }
    /// Strictly increasing stamps, even if the clock ticks coarsely.
    double stamp() {
        double t = elapsed();
        if (t <= prev_) t = prev_ + 1e-9;
        prev_ = t;
        return t;
    }

private:
    std::chrono::steady_clock::time_point start_;
    double prev_ = 0.0;
};

} // namespace detail

/// Alternating factorization of V into W^T H with the configured algorithm.
/// Without an explicit init, factors are i.i.d. uniform [0,1) from the seed
/// (W drawn first), clipped to epsilon. A KL run refines the init with one
/// multiplicative update when warm_start_mu_kl is set. The trace records the
/// initial state at index 0 and one point per outer iteration after it, up
/// to max_outer points in total; the last point always describes the
/// returned factors.
inline SolveResult solve(const DenseMatrix& v, std::size_t rank, const SolverConfig& cfg,
                         const std::optional<FactorPair>& init = {}) {
    validate_config(cfg);
    detail::check_arg(!v.empty(), "solve: empty data");
    detail::check_arg(min_entry(v) >= 0.0, "solve: data must be nonnegative");
    detail::check_arg(rank >= 1 && rank <= std::min(v.rows(), v.cols()),
                      "solve: rank must lie in [1, min(M,N)]");
    detail::OuterClock clock;

    DenseMatrix w, h;
    if (init) {
        detail::check_arg(init->w.rows() == rank && init->w.cols() == v.rows() &&
                              init->h.rows() == rank && init->h.cols() == v.cols(),
                          "solve: init factor shapes do not match");
        w = clip_min(init->w, cfg.epsilon);
        h = clip_min(init->h, cfg.epsilon);
    } else {
        Rng rng(cfg.seed);
        w = clip_min(uniform_matrix(rng, rank, v.rows()), cfg.epsilon);
        h = clip_min(uniform_matrix(rng, rank, v.cols()), cfg.epsilon);
    }
    if (cfg.algorithm.loss == Loss::KL && cfg.warm_start_mu_kl) {
        if (cfg.update_h_first) {
            h = mu_inner(BlockId::H, v, w, h, Loss::KL, cfg.epsilon);
            w = mu_inner(BlockId::W, v, w, h, Loss::KL, cfg.epsilon);
        } else {
            w = mu_inner(BlockId::W, v, w, h, Loss::KL, cfg.epsilon);
            h = mu_inner(BlockId::H, v, w, h, Loss::KL, cfg.epsilon);
        }
    }

    ConvergenceTrace trace;
    trace.points.reserve(static_cast<std::size_t>(cfg.max_outer));
    detail::MetricRange range;
    const auto record = [&](int inner_h, int inner_w) {
        TracePoint p;
        p.loss_normalized = loss_normalized(v, w, h, cfg.algorithm.loss);
        p.elapsed_s = clock.stamp();
        p.inner_h = inner_h;
        p.inner_w = inner_w;
        trace.points.push_back(p);
    };
    record(0, 0);

    const DenseMatrix vt = transposed(v);
    for (int k = 1; k < cfg.max_outer; ++k) {
        if (cfg.time_budget_s && clock.elapsed() >= *cfg.time_budget_s) break;
        int count_h = 0, count_w = 0;
        if (cfg.update_h_first) {
            detail::BlockResult rh = detail::update_block(v, w, h, cfg, &range);
            h = std::move(rh.x);
            count_h = rh.count;
            detail::BlockResult rw = detail::update_block(vt, h, w, cfg, &range);
            w = std::move(rw.x);
            count_w = rw.count;
        } else {
            detail::BlockResult rw = detail::update_block(vt, h, w, cfg, &range);
            w = std::move(rw.x);
            count_w = rw.count;
            detail::BlockResult rh = detail::update_block(v, w, h, cfg, &range);
            h = std::move(rh.x);
            count_h = rh.count;
        }
        record(count_h, count_w);
    }
    trace.metric_min = range.lo;
    trace.metric_max = range.hi;
    return {FactorPair{std::move(w), std::move(h)}, std::move(trace)};
}

/// Nonnegative least-squares mode: W stays fixed (clipped to epsilon) and
/// only the H block is iterated. The subproblem is convex, so every valid
/// algorithm approaches the same minimum.
inline NlsResult solve_nls(const DenseMatrix& v, const DenseMatrix& w_fixed,
                           const SolverConfig& cfg,
                           const std::optional<DenseMatrix>& init_h = {}) {
    validate_config(cfg);
    detail::check_arg(!v.empty(), "solve_nls: empty data");
    detail::check_arg(min_entry(v) >= 0.0, "solve_nls: data must be nonnegative");
    detail::check_arg(w_fixed.cols() == v.rows(), "solve_nls: W shape does not match data");
    detail::OuterClock clock;

    const DenseMatrix w = clip_min(w_fixed, cfg.epsilon);
    DenseMatrix h;
    if (init_h) {
        detail::check_arg(init_h->rows() == w.rows() && init_h->cols() == v.cols(),
                          "solve_nls: init shape does not match");
        h = clip_min(*init_h, cfg.epsilon);
    } else {
        Rng rng(cfg.seed);
        h = clip_min(uniform_matrix(rng, w.rows(), v.cols()), cfg.epsilon);
    }
    if (cfg.algorithm.loss == Loss::KL && cfg.warm_start_mu_kl)
        h = mu_inner(BlockId::H, v, w, h, Loss::KL, cfg.epsilon);

    ConvergenceTrace trace;
    trace.points.reserve(static_cast<std::size_t>(cfg.max_outer));
    detail::MetricRange range;
    const auto record = [&](int inner_h) {
        TracePoint p;
        p.loss_normalized = loss_normalized(v, w, h, cfg.algorithm.loss);
        p.elapsed_s = clock.stamp();
        p.inner_h = inner_h;
        trace.points.push_back(p);
    };
    record(0);
    for (int k = 1; k < cfg.max_outer; ++k) {
        if (cfg.time_budget_s && clock.elapsed() >= *cfg.time_budget_s) break;
        detail::BlockResult rh = detail::update_block(v, w, h, cfg, &range);
        h = std::move(rh.x);
        record(rh.count);
    }
    trace.metric_min = range.lo;
    trace.metric_max = range.hi;
    return {std::move(h), std::move(trace)};
}

} // namespace fastmu
