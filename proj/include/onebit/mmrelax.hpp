#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "likelihood.hpp"
#include "relax.hpp"
#include "signal_model.hpp"

namespace onebit {

struct MmConfig {
    int t_m = 20;
    int t_c = 20;
    double tol_outer = 1e-7;
    double tol_inner = 1e-9;
    Index n1_factor = 64; ///< N1 = n1_factor * N
    bool exhaustive_init = false; ///< slow grid-search seeding, tiny N only

    void validate() const
    {
        detail::require(t_m > 0 && t_c > 0 && tol_outer > 0.0 && tol_inner > 0.0 && n1_factor >= 1,
                        "MmConfig: all settings must be positive");
    }
};

struct MmResult {
    ScaledParams params;
    std::vector<double> nll_history; ///< l at the start and after every MM iteration
    std::vector<std::vector<double>> surrogate_history; ///< G after every inner update, per MM iteration
    int mm_iterations = 0;
    int inner_iterations = 0;
    bool low_information = false;

    double nll() const { return nll_history.back(); }
};

namespace detail {

inline bool low_information(const SignedMatrix& y)
{
    const auto& v = y.values();
    for (Index n = 0; n < v.rows(); ++n)
        if ((v.row(n).array() != v(n, 0)).any()) return false;
    return true;
}

/// Half squared residual ||R - lambda H - Z||^2 / 2.
inline double mm_surrogate(const MatrixXd& r, const MatrixXd& h, const MatrixXd& z, double lambda)
{
    return 0.5 * (r - lambda * h - z).squaredNorm();
}

} // namespace detail

/**
 * MM iterations on the one-bit likelihood for a fixed number of sinusoids.
 * Each MM step rebuilds the auxiliary matrix Z, then cycles through the
 * components starting from the last: closed-form lambda, residual V^k,
 * single-component RELAX update.
 */
inline MmResult mm_solve_k(const SignedMatrix& y, const MatrixXd& h, const ScaledParams& init, const MmConfig& cfg)
{
    cfg.validate();
    const Index n = y.n_fast();
    const Index m = y.m_slow();
    detail::require_shape(h.rows() == n && h.cols() == m, "mm_solve_k: shape mismatch");
    detail::require(init.k() >= 1, "mm_solve_k: need at least one component");
    detail::require(init.lambda >= 0.0, "mm_solve_k: lambda must be >= 0");
    for (const auto& c : init.components) {
        detail::require(c.omega > 0.0 && c.omega < std::numbers::pi, "mm_solve_k: init frequency outside (0, pi)");
        detail::require_shape(c.a.size() == m && c.b.size() == m, "mm_solve_k: amplitude length mismatch");
    }

    const Index k_count = init.k();
    const Index n1 = cfg.n1_factor * n;
    MmResult out;
    out.params = init;
    out.low_information = detail::low_information(y);
    auto& comps = out.params.components;
    double& lambda = out.params.lambda;

    std::vector<MatrixXd> parts;
    parts.reserve(static_cast<std::size_t>(k_count));
    MatrixXd total = MatrixXd::Zero(n, m);
    for (const auto& c : comps) {
        parts.push_back(component_matrix(c, n));
        total += parts.back();
    }

    double nll = neg_log_likelihood(y, h, total, lambda);
    out.nll_history.push_back(nll);

    for (int i = 0; i < cfg.t_m; ++i) {
        const MatrixXd z = majorizer_aux(y, h, total, lambda);
        std::vector<double> g_hist{detail::mm_surrogate(total, h, z, lambda)};
        double g_cycle_start = g_hist.front();
        Index k = k_count - 1;
        for (int j = 1; j <= cfg.t_c; ++j) {
            lambda = update_lambda(h, total, z);
            const auto ks = static_cast<std::size_t>(k);
            const MatrixXd v = z + lambda * h - (total - parts[ks]);
            comps[ks] = relax_update(v, n1, &comps[ks]);
            total -= parts[ks];
            parts[ks] = component_matrix(comps[ks], n);
            total += parts[ks];
            g_hist.push_back(detail::mm_surrogate(total, h, z, lambda));
            ++out.inner_iterations;
            k = (k + 1) % k_count;
            if (j % k_count == 0) {
                const double g = g_hist.back();
                const bool settled = std::abs(g_cycle_start - g) <= cfg.tol_inner * std::abs(g_cycle_start);
                g_cycle_start = g;
                if (settled) break;
            }
        }
        out.surrogate_history.push_back(std::move(g_hist));
        ++out.mm_iterations;

        const double nll_new = neg_log_likelihood(y, h, total, lambda);
        out.nll_history.push_back(nll_new);
        const bool done = std::abs(nll - nll_new) <= cfg.tol_outer * std::abs(nll);
        nll = nll_new;
        if (done) break;
    }
    return out;
}

namespace detail {

/**
 * Damped Newton on the convex problem
 *   min_{a, b, lambda >= 0} sum f(Y (base + c a^T + s b^T - lambda H))
 * where base holds the fixed components. Returns the objective; a, b,
 * lambda are updated in place.
 */
inline double convex_component_fit(const SignedMatrix& y, const MatrixXd& h, const MatrixXd& base,
                                   const VectorXd& c, const VectorXd& s, VectorXd& a, VectorXd& b,
                                   double& lambda, int max_iter = 100)
{
    const Index n = y.n_fast();
    const Index m = y.m_slow();
    const auto& yv = y.values();
    const Index p = 2 * m + 1;
    auto eval = [&](const VectorXd& aa, const VectorXd& bb, double lam) {
        double acc = 0.0;
        for (Index j = 0; j < m; ++j)
            for (Index i = 0; i < n; ++i)
                acc -= log_Phi(yv(i, j) * (base(i, j) + c[i] * aa[j] + s[i] * bb[j] - lam * h(i, j)));
        return acc;
    };
    double val = eval(a, b, lambda);
    for (int it = 0; it < max_iter; ++it) {
        VectorXd grad = VectorXd::Zero(p);
        MatrixXd hess = MatrixXd::Zero(p, p);
        for (Index j = 0; j < m; ++j) {
            for (Index i = 0; i < n; ++i) {
                const double yy = yv(i, j);
                const double x = yy * (base(i, j) + c[i] * a[j] + s[i] * b[j] - lambda * h(i, j));
                const double fp = f_prime(x);
                const double fpp = std::max(fp * (fp - x), 0.0);
                // d x / d(a_j, b_j, lambda) = y (c_i, s_i, -h_ij)
                const double da = yy * c[i];
                const double db = yy * s[i];
                const double dl = -yy * h(i, j);
                grad[2 * j] += fp * da;
                grad[2 * j + 1] += fp * db;
                grad[p - 1] += fp * dl;
                hess(2 * j, 2 * j) += fpp * da * da;
                hess(2 * j, 2 * j + 1) += fpp * da * db;
                hess(2 * j + 1, 2 * j + 1) += fpp * db * db;
                hess(2 * j, p - 1) += fpp * da * dl;
                hess(2 * j + 1, p - 1) += fpp * db * dl;
                hess(p - 1, p - 1) += fpp * dl * dl;
            }
        }
        hess = hess.selfadjointView<Eigen::Upper>();
        hess.diagonal().array() += 1e-12 * (1.0 + hess.diagonal().cwiseAbs().maxCoeff());
        const VectorXd step = hess.ldlt().solve(-grad);
        if (!step.allFinite()) break;
        double t = 1.0;
        bool moved = false;
        for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
            VectorXd a2 = a;
            VectorXd b2 = b;
            for (Index j = 0; j < m; ++j) {
                a2[j] += t * step[2 * j];
                b2[j] += t * step[2 * j + 1];
            }
            const double l2 = std::max(0.0, lambda + t * step[p - 1]);
            const double v2 = eval(a2, b2, l2);
            if (v2 <= val + 1e-4 * t * grad.dot(step) || v2 < val) {
                moved = v2 < val;
                a = a2;
                b = b2;
                lambda = l2;
                val = v2;
                break;
            }
        }
        if (!moved || std::abs(grad.dot(step)) < 1e-14 * (1.0 + std::abs(val))) break;
    }
    return val;
}

/// Exhaustive seeding of one new component over the N1-point grid in (0, pi).
inline SinusoidComponent exhaustive_seed(const SignedMatrix& y, const MatrixXd& h, const MatrixXd& base,
                                         double& lambda, Index n1)
{
    const Index n = y.n_fast();
    const Index m = y.m_slow();
    double best = std::numeric_limits<double>::infinity();
    SinusoidComponent out;
    double best_lambda = lambda;
    for (Index q = 1; 2 * q < n1; ++q) {
        const double w = 2.0 * std::numbers::pi * static_cast<double>(q) / static_cast<double>(n1);
        const VectorXd c = cos_column(w, n);
        const VectorXd s = sin_column(w, n);
        VectorXd a = VectorXd::Zero(m);
        VectorXd b = VectorXd::Zero(m);
        double lam = lambda > 0.0 ? lambda : 1.0;
        const double val = convex_component_fit(y, h, base, c, s, a, b, lam);
        if (val < best) {
            best = val;
            out = SinusoidComponent{w, a, b};
            best_lambda = lam;
        }
    }
    lambda = best_lambda;
    return out;
}

} // namespace detail

struct MmrelaxResult {
    std::vector<MmResult> stages; ///< stage k holds the (k+1)-component fit
};

/**
 * Grows the model one sinusoid at a time. Stage K~ seeds the new component
 * at freq_inits[K~ - 1] with amplitudes fitted to the current residual
 * Z + lambda H - R, then runs mm_solve_k over all K~ components.
 */
inline MmrelaxResult mmrelax_full(const SignedMatrix& y, const MatrixXd& h, Index k_hat,
                                  const std::vector<double>& freq_inits, const MmConfig& cfg, double lambda0)
{
    cfg.validate();
    detail::require(k_hat >= 1, "mmrelax_full: K_hat must be >= 1");
    if (!cfg.exhaustive_init && static_cast<Index>(freq_inits.size()) < k_hat)
        throw std::invalid_argument("mmrelax_full: fewer frequency inits than K_hat");
    detail::require(lambda0 >= 0.0, "mmrelax_full: lambda0 must be >= 0");
    const Index n = y.n_fast();
    const Index m = y.m_slow();
    detail::require_shape(h.rows() == n && h.cols() == m, "mmrelax_full: shape mismatch");

    MmrelaxResult out;
    ScaledParams cur;
    cur.lambda = lambda0;
    for (Index kk = 0; kk < k_hat; ++kk) {
        const MatrixXd r = cur.rfi_matrix(n, m);
        SinusoidComponent seed;
        if (cfg.exhaustive_init) {
            seed = detail::exhaustive_seed(y, h, r, cur.lambda, cfg.n1_factor * n);
        } else {
            const MatrixXd z = majorizer_aux(y, h, r, cur.lambda);
            seed = fit_amp_phase(z + cur.lambda * h - r, freq_inits[static_cast<std::size_t>(kk)]);
        }
        cur.components.push_back(std::move(seed));
        MmResult stage = mm_solve_k(y, h, cur, cfg);
        cur = stage.params;
        out.stages.push_back(std::move(stage));
    }
    return out;
}

inline MmrelaxResult mmrelax_full(const SignedMatrix& y, const ThresholdMatrix& h, Index k_hat,
                                  const std::vector<double>& freq_inits, const MmConfig& cfg, double lambda0)
{
    return mmrelax_full(y, h.dense(), k_hat, freq_inits, cfg, lambda0);
}

} // namespace onebit
