#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "admm.hpp"
#include "errors.hpp"
#include "likelihood.hpp"
#include "signal_model.hpp"

namespace onebit {

struct FiConfig {
    double zeta1 = 1.0;
    AdmmTolerances tol{};
    int admm_cap = 10;
    int mm_cap = 5;
    double mm_tol = 1e-7;
    Index grid_size = 0; ///< Q; 0 means Q = N
    double rho0 = 1.0;

    void validate() const
    {
        detail::require(zeta1 >= 0.0, "FiConfig: zeta1 must be nonnegative");
        detail::require(tol.eps_abs > 0.0 && tol.eps_rel > 0.0 && tol.eps_lambda > 0.0,
                        "FiConfig: tolerances must be positive");
        detail::require(admm_cap > 0 && mm_cap > 0 && mm_tol > 0.0 && rho0 > 0.0,
                        "FiConfig: caps and rho0 must be positive");
        detail::require(grid_size >= 0, "FiConfig: grid size must be nonnegative");
    }
};

/// F = [cos block | sin block] on w_q = q pi / Q, q = 0..Q-1.
struct GridDictionary {
    MatrixXd F;
    VectorXd omegas;

    Index q() const { return omegas.size(); }
};

inline GridDictionary grid_dictionary(Index n, Index q)
{
    detail::require(n >= 1 && q >= 1, "grid_dictionary: N and Q must be positive");
    GridDictionary d;
    d.omegas.resize(q);
    d.F.resize(n, 2 * q);
    for (Index k = 0; k < q; ++k) {
        d.omegas[k] = std::numbers::pi * static_cast<double>(k) / static_cast<double>(q);
        d.F.col(k) = cos_column(d.omegas[k], n);
        d.F.col(q + k) = sin_column(d.omegas[k], n);
    }
    return d;
}

/// Row-wise group shrinkage of (rho B - Upsilon), then division by rho.
inline MatrixXd update_A(const MatrixXd& b, const MatrixXd& upsilon, double rho, double zeta1)
{
    detail::require(rho > 0.0, "update_A: rho must be positive");
    detail::require_shape(b.rows() == upsilon.rows() && b.cols() == upsilon.cols(),
                          "update_A: shape mismatch");
    MatrixXd out = rho * b - upsilon;
    for (Index r = 0; r < out.rows(); ++r) {
        const double nrm = out.row(r).norm();
        const double c = nrm > 0.0 ? std::max(0.0, 1.0 - zeta1 / nrm) : 0.0;
        out.row(r) *= c / rho;
    }
    return out;
}

inline double update_lambda_fi(const MatrixXd& h, const MatrixXd& fb, const MatrixXd& z_tilde)
{
    return update_lambda(h, fb, z_tilde);
}

/// (F^T F + rho I)^{-1} (lambda F^T H + F^T Z + Upsilon + rho A), by a fresh Cholesky factor.
inline MatrixXd update_B(const MatrixXd& f, const MatrixXd& h, const MatrixXd& z_tilde,
                         const MatrixXd& upsilon, const MatrixXd& a, double lambda, double rho)
{
    detail::require(rho > 0.0, "update_B: rho must be positive");
    detail::require_shape(h.rows() == f.rows() && z_tilde.rows() == f.rows() &&
                              h.cols() == z_tilde.cols() && a.rows() == f.cols() &&
                              upsilon.rows() == f.cols() && a.cols() == h.cols() &&
                              upsilon.cols() == h.cols(),
                          "update_B: shape mismatch");
    MatrixXd sys = f.transpose() * f;
    sys.diagonal().array() += rho;
    const Eigen::LLT<MatrixXd> llt(sys);
    const MatrixXd rhs = f.transpose() * (lambda * h + z_tilde) + upsilon + rho * a;
    return llt.solve(rhs);
}

inline MatrixXd update_upsilon(const MatrixXd& upsilon, const MatrixXd& a, const MatrixXd& b, double rho)
{
    detail::require(rho > 0.0, "update_upsilon: rho must be positive");
    return upsilon + rho * (a - b);
}

/// Residuals and next penalty for one ADMM step of the frequency initializer.
inline AdmmResiduals residuals_and_rho(const MatrixXd& a, const MatrixXd& b_prev, const MatrixXd& b_next,
                                       const MatrixXd& upsilon, double lambda_prev, double lambda_next,
                                       double rho, const AdmmTolerances& tol = {})
{
    const double dim = static_cast<double>(a.rows()) * static_cast<double>(a.cols());
    return admm_residuals((a - b_next).norm(), rho * (b_next - b_prev).norm(), lambda_prev, lambda_next,
                          std::sqrt(dim), a.norm(), b_next.norm(), upsilon.norm(), rho, tol);
}

namespace detail {

/**
 * Applies (F^T F + rho I)^{-1} for any rho via the eigen-decomposition of
 * the small Gram matrix F F^T: with G having orthonormal rows spanning the
 * row space of F and F^T F = G^T S G,
 * (F^T F + rho I)^{-1} W = W / rho - G^T diag(s / (rho (s + rho))) G W.
 */
class GramInverse {
public:
    explicit GramInverse(const MatrixXd& f)
    {
        const Eigen::SelfAdjointEigenSolver<MatrixXd> es(f * f.transpose());
        const VectorXd& ev = es.eigenvalues();
        const double cut = 1e-12 * std::max(ev.maxCoeff(), 0.0);
        Index keep = 0;
        for (Index i = 0; i < ev.size(); ++i)
            if (ev[i] > cut) ++keep;
        s_.resize(keep);
        g_.resize(keep, f.cols());
        Index r = 0;
        for (Index i = 0; i < ev.size(); ++i) {
            if (!(ev[i] > cut)) continue;
            s_[r] = ev[i];
            g_.row(r) = (es.eigenvectors().col(i).transpose() * f) / std::sqrt(ev[i]);
            ++r;
        }
    }

    MatrixXd solve(const MatrixXd& w, double rho) const
    {
        const VectorXd scale = (s_.array() / (rho * (s_.array() + rho))).matrix();
        const MatrixXd gw = g_ * w;
        return w / rho - g_.transpose() * (scale.asDiagonal() * gw);
    }

private:
    VectorXd s_;
    MatrixXd g_;
};

inline double group_norm(const MatrixXd& a)
{
    double acc = 0.0;
    for (Index r = 0; r < a.rows(); ++r) acc += a.row(r).norm();
    return acc;
}

} // namespace detail

/// zeta1 ||A||_{1,2} + sum f(Y (F A - lambda H)).
inline double fi_objective(const SignedMatrix& y, const MatrixXd& h, const MatrixXd& f, const MatrixXd& a,
                           double lambda, double zeta1)
{
    return zeta1 * detail::group_norm(a) + neg_log_likelihood(y, h, f * a, lambda);
}

struct FiDiagnostics {
    std::vector<double> objective_history;     ///< full objective after each accepted MM step
    std::vector<int> admm_iterations;          ///< per MM step
    std::vector<bool> admm_cap_hit;            ///< per MM step
    std::vector<AdmmResiduals> final_residuals; ///< per MM step
    std::vector<double> surrogate_before;
    std::vector<double> surrogate_after;
    int mm_iterations = 0;
    int rejected_steps = 0;
};

struct FiResult {
    std::vector<double> freqs; ///< descending by row mass; empty if no RFI detected
    double lambda = 0.0;
    MatrixXd a_tilde;  ///< 2Q x M
    VectorXd row_mass; ///< l1 norm over slow time of the per-frequency magnitude, length Q
    VectorXd grid;     ///< candidate frequencies, length Q
    FiDiagnostics diagnostics;
};

/// Grid rows ordered by descending mass, DC row excluded, ties to the lower index.
inline std::vector<Index> rank_grid_rows(const VectorXd& row_mass)
{
    std::vector<Index> idx(static_cast<std::size_t>(std::max<Index>(row_mass.size() - 1, 0)));
    std::iota(idx.begin(), idx.end(), Index{1});
    std::stable_sort(idx.begin(), idx.end(), [&](Index l, Index r) { return row_mass[l] > row_mass[r]; });
    return idx;
}

/// Group-sparse MM + ADMM fit over a fixed frequency grid; returns the
/// K_max strongest grid frequencies and the fitted scale.
inline FiResult fast_freq_init(const SignedMatrix& y, const MatrixXd& h, const FiConfig& cfg, Index k_max)
{
    cfg.validate();
    const Index n = y.n_fast();
    const Index m = y.m_slow();
    detail::require_shape(h.rows() == n && h.cols() == m, "fast_freq_init: shape mismatch");
    const Index q = cfg.grid_size == 0 ? n : cfg.grid_size;
    detail::require(k_max >= 1 && k_max < q, "fast_freq_init: need 1 <= K_max < Q");
    const double hmax = h.cwiseAbs().maxCoeff();
    detail::require(hmax > 0.0, "fast_freq_init: all-zero threshold matrix");

    const GridDictionary dict = grid_dictionary(n, q);
    const MatrixXd& f = dict.F;
    const detail::GramInverse gram(f);
    const MatrixXd fth = f.transpose() * h;
    const double hh = h.squaredNorm();
    const double dim_sqrt = std::sqrt(static_cast<double>(2 * q) * static_cast<double>(m));

    MatrixXd a = MatrixXd::Zero(2 * q, m);
    MatrixXd b = MatrixXd::Zero(2 * q, m);
    MatrixXd ups = MatrixXd::Zero(2 * q, m);
    double lambda = 1.0 / hmax;

    FiResult out;
    FiDiagnostics& diag = out.diagnostics;
    double obj = fi_objective(y, h, f, a, lambda, cfg.zeta1);
    diag.objective_history.push_back(obj);

    for (int it = 0; it < cfg.mm_cap; ++it) {
        const MatrixXd fa = f * a;
        const MatrixXd z = majorizer_aux(y, h, fa, lambda);
        const MatrixXd ftz = f.transpose() * z;
        const double hz = (h.array() * z.array()).sum();
        auto surrogate = [&](const MatrixXd& fa_, const MatrixXd& a_, double lam) {
            return cfg.zeta1 * detail::group_norm(a_) + 0.5 * (fa_ - lam * h - z).squaredNorm();
        };
        const double s_old = surrogate(fa, a, lambda);

        double rho = cfg.rho0;
        MatrixXd a_new = a;
        double lam_new = lambda;
        AdmmResiduals res;
        int j = 0;
        bool converged = false;
        while (j < cfg.admm_cap) {
            ++j;
            a_new = update_A(b, ups, rho, cfg.zeta1);
            const double lam_prev = lam_new;
            lam_new = std::max(0.0, ((fth.array() * b.array()).sum() - hz) / hh);
            const MatrixXd w = lam_new * fth + ftz + ups + rho * a_new;
            MatrixXd b_next = gram.solve(w, rho);
            ups += rho * (a_new - b_next);
            res = admm_residuals((a_new - b_next).norm(), rho * (b_next - b).norm(), lam_prev, lam_new,
                                 dim_sqrt, a_new.norm(), b_next.norm(), ups.norm(), rho, cfg.tol);
            b = std::move(b_next);
            if (res.converged) {
                converged = true;
                break;
            }
            rho = res.rho_next;
        }
        diag.admm_iterations.push_back(j);
        diag.admm_cap_hit.push_back(!converged);
        diag.final_residuals.push_back(res);

        const MatrixXd fa_new = f * a_new;
        const double s_new = surrogate(fa_new, a_new, lam_new);
        diag.surrogate_before.push_back(s_old);
        diag.surrogate_after.push_back(s_new);
        ++diag.mm_iterations;
        if (s_new > s_old) {
            // The inexact inner solve did not descend; keep the current point.
            ++diag.rejected_steps;
            break;
        }
        a = a_new;
        lambda = lam_new;
        const double obj_new = fi_objective(y, h, f, a, lambda, cfg.zeta1);
        diag.objective_history.push_back(obj_new);
        const bool done = std::abs(obj - obj_new) <= cfg.mm_tol * std::abs(obj);
        obj = obj_new;
        if (done) break;
    }

    out.lambda = lambda;
    out.a_tilde = a;
    out.grid = dict.omegas;
    out.row_mass.resize(q);
    for (Index k = 0; k < q; ++k)
        out.row_mass[k] = (a.row(k).array().square() + a.row(q + k).array().square()).sqrt().sum();

    const std::vector<Index> order = rank_grid_rows(out.row_mass);
    if (order.empty() || out.row_mass[order.front()] <= 0.0) return out;
    for (Index i = 0; i < k_max && i < static_cast<Index>(order.size()); ++i)
        out.freqs.push_back(dict.omegas[order[static_cast<std::size_t>(i)]]);
    return out;
}

inline FiResult fast_freq_init(const SignedMatrix& y, const ThresholdMatrix& h, const FiConfig& cfg,
                               Index k_max)
{
    return fast_freq_init(y, h.dense(), cfg, k_max);
}

} // namespace onebit
