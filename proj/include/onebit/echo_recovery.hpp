#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "admm.hpp"
#include "errors.hpp"
#include "likelihood.hpp"
#include "signal_model.hpp"

namespace onebit {

struct ErConfig {
    double zeta2 = 0.04;
    AdmmTolerances tol{};
    int admm_cap = 100;
    int mm_cap = 50;
    double mm_tol = 1e-7;
    double rho0 = 1.0;

    void validate() const
    {
        detail::require(zeta2 >= 0.0, "ErConfig: zeta2 must be nonnegative");
        detail::require(tol.eps_abs > 0.0 && tol.eps_rel > 0.0 && tol.eps_lambda > 0.0,
                        "ErConfig: tolerances must be positive");
        detail::require(admm_cap > 0 && mm_cap > 0 && mm_tol > 0.0 && rho0 > 0.0,
                        "ErConfig: caps and rho0 must be positive");
    }
};

inline double soft_threshold(double x, double a)
{
    detail::require(a >= 0.0, "soft_threshold: threshold must be nonnegative");
    if (x <= -a) return x + a;
    if (x >= a) return x - a;
    return 0.0;
}

inline VectorXd soft_threshold(const VectorXd& x, double a)
{
    return x.unaryExpr([a](double v) { return soft_threshold(v, a); });
}

/// softthreshold(mean_m(B[:, m] - Upsilon[:, m] / rho), zeta2 / rho).
inline VectorXd update_gamma(const MatrixXd& b, const MatrixXd& upsilon, double rho, double zeta2, Index m_slow)
{
    detail::require(rho > 0.0, "update_gamma: rho must be positive");
    detail::require_shape(b.rows() == upsilon.rows() && b.cols() == upsilon.cols() && b.cols() == m_slow,
                          "update_gamma: shape mismatch");
    const VectorXd avg = (b - upsilon / rho).rowwise().sum() / static_cast<double>(m_slow);
    return soft_threshold(avg, zeta2 / rho);
}

inline double update_lambda_er(const MatrixXd& u, const MatrixXd& db, const MatrixXd& z_tilde)
{
    detail::require_shape(u.rows() == db.rows() && u.cols() == db.cols() && z_tilde.rows() == u.rows() &&
                              z_tilde.cols() == u.cols(),
                          "update_lambda_er: shape mismatch");
    const double uu = u.squaredNorm();
    if (uu == 0.0) throw std::invalid_argument("update_lambda_er: all-zero U");
    return std::max(0.0, (u.array() * (db - z_tilde).array()).sum() / uu);
}

/// (D^T D + rho I)^{-1} (lambda D^T U + D^T Z + Upsilon + rho Gamma), Gamma = gamma repeated.
inline MatrixXd update_B_er(const MatrixXd& d, const MatrixXd& u, const MatrixXd& z_tilde,
                            const MatrixXd& upsilon, const VectorXd& gamma, double lambda, double rho)
{
    detail::require(rho > 0.0, "update_B_er: rho must be positive");
    const Index n = d.rows();
    detail::require_shape(d.cols() == n && u.rows() == n && z_tilde.rows() == n && upsilon.rows() == n &&
                              gamma.size() == n && z_tilde.cols() == u.cols() &&
                              upsilon.cols() == u.cols(),
                          "update_B_er: shape mismatch");
    MatrixXd sys = d.transpose() * d;
    sys.diagonal().array() += rho;
    const Eigen::LLT<MatrixXd> llt(sys);
    MatrixXd rhs = d.transpose() * (lambda * u + z_tilde) + upsilon;
    rhs.colwise() += rho * gamma;
    return llt.solve(rhs);
}

/// zeta2 M ||gamma||_1 + sum f(Y (D gamma - lambda U)).
inline double er_objective(const SignedMatrix& y, const MatrixXd& u, const MatrixXd& d, const VectorXd& gamma,
                           double lambda, double zeta2)
{
    const Index m = y.m_slow();
    MatrixXd r = MatrixXd::Zero(u.rows(), m);
    r.colwise() += d * gamma;
    // The likelihood helper takes R - lambda H; here H plays the role of U.
    return zeta2 * static_cast<double>(m) * gamma.lpNorm<1>() + neg_log_likelihood(y, u, r, lambda);
}

struct ErDiagnostics {
    std::vector<double> objective_history; ///< full objective after each accepted MM step
    std::vector<int> admm_iterations;
    std::vector<bool> admm_cap_hit;
    std::vector<AdmmResiduals> final_residuals;
    std::vector<double> surrogate_before;
    std::vector<double> surrogate_after;
    std::vector<double> consensus_gap; ///< max_m ||gamma - B[:, m]|| at ADMM exit
    int mm_iterations = 0;
    int rejected_steps = 0;
    bool low_information = false; ///< every measurement has the same sign
};

struct ErResult {
    VectorXd s_hat;
    VectorXd gamma_tilde;
    double lambda = 0.0;
    ErDiagnostics diagnostics;
};

/**
 * Sparse echo recovery by MM around a consensus ADMM. The ADMM runs in the
 * eigenbasis of D^T D = V diag(l) V^T, where the B-update is diagonal, so one
 * ADMM step costs O(NM). Only gamma and lambda leave that basis.
 */
inline ErResult recover_echo(const SignedMatrix& y, const MatrixXd& h, const MatrixXd& r_hat, const MatrixXd& d,
                             const ErConfig& cfg, double lambda_init)
{
    cfg.validate();
    const Index n = y.n_fast();
    const Index m = y.m_slow();
    detail::require_shape(h.rows() == n && h.cols() == m && r_hat.rows() == n && r_hat.cols() == m &&
                              d.rows() == n && d.cols() == n,
                          "recover_echo: shape mismatch");
    detail::require(lambda_init >= 0.0 && std::isfinite(lambda_init), "recover_echo: lambda_init must be >= 0");

    const MatrixXd u = h - r_hat;
    const double uu = u.squaredNorm();
    if (uu == 0.0) throw std::invalid_argument("recover_echo: all-zero U");

    const Eigen::SelfAdjointEigenSolver<MatrixXd> es(d.transpose() * d);
    const MatrixXd& v = es.eigenvectors();
    const VectorXd& ev = es.eigenvalues();
    const MatrixXd dv_t = (d * v).transpose();
    const MatrixXd wu = dv_t * u;
    const double dim_sqrt = std::sqrt(static_cast<double>(n) * static_cast<double>(m));
    const double l1_weight = cfg.zeta2 * static_cast<double>(m);

    ErResult out;
    ErDiagnostics& diag = out.diagnostics;
    const auto& yv = y.values();
    diag.low_information = (yv.array() == yv(0, 0)).all();

    VectorXd gamma = VectorXd::Zero(n);
    double lambda = lambda_init;
    // One sign everywhere: the likelihood has no finite maximiser in gamma.
    if (diag.low_information) {
        diag.objective_history.push_back(er_objective(y, u, d, gamma, lambda, cfg.zeta2));
        out.gamma_tilde = gamma;
        out.lambda = lambda;
        out.s_hat = VectorXd::Zero(n);
        return out;
    }

    MatrixXd bh = MatrixXd::Zero(n, m);  // B in the eigenbasis
    MatrixXd uph = MatrixXd::Zero(n, m); // Upsilon in the eigenbasis

    double obj = er_objective(y, u, d, gamma, lambda, cfg.zeta2);
    diag.objective_history.push_back(obj);

    for (int it = 0; it < cfg.mm_cap; ++it) {
        MatrixXd dg = MatrixXd::Zero(n, m);
        dg.colwise() += d * gamma;
        const MatrixXd z = majorizer_aux(y, u, dg, lambda);
        const MatrixXd wz = dv_t * z;
        const double uz = (u.array() * z.array()).sum();
        auto surrogate = [&](const VectorXd& g, double lam) {
            MatrixXd resid = -lam * u - z;
            resid.colwise() += d * g;
            return l1_weight * g.lpNorm<1>() + 0.5 * resid.squaredNorm();
        };
        const double s_old = surrogate(gamma, lambda);

        double rho = cfg.rho0;
        VectorXd g_new = gamma;
        double lam_new = lambda;
        AdmmResiduals res;
        int j = 0;
        bool converged = false;
        while (j < cfg.admm_cap) {
            ++j;
            const VectorXd avg_h = (bh - uph / rho).rowwise().sum() / static_cast<double>(m);
            g_new = soft_threshold(v * avg_h, cfg.zeta2 / rho);
            const double lam_prev = lam_new;
            lam_new = std::max(0.0, ((wu.array() * bh.array()).sum() - uz) / uu);
            const VectorXd gh = v.transpose() * g_new;
            MatrixXd bh_next = lam_new * wu + wz + uph;
            bh_next.colwise() += rho * gh;
            bh_next.array().colwise() /= (ev.array() + rho);
            MatrixXd gap = -bh_next;
            gap.colwise() += gh;
            uph += rho * gap;
            const double norm_gamma_block = std::sqrt(static_cast<double>(m)) * g_new.norm();
            res = admm_residuals(gap.norm(), rho * (bh_next - bh).norm(), lam_prev, lam_new, dim_sqrt,
                                 norm_gamma_block, bh_next.norm(), uph.norm(), rho, cfg.tol);
            bh = std::move(bh_next);
            if (res.converged) {
                converged = true;
                diag.consensus_gap.push_back(gap.colwise().norm().maxCoeff());
                break;
            }
            if (j == cfg.admm_cap) diag.consensus_gap.push_back(gap.colwise().norm().maxCoeff());
            rho = res.rho_next;
        }
        diag.admm_iterations.push_back(j);
        diag.admm_cap_hit.push_back(!converged);
        diag.final_residuals.push_back(res);

        const double s_new = surrogate(g_new, lam_new);
        diag.surrogate_before.push_back(s_old);
        diag.surrogate_after.push_back(s_new);
        ++diag.mm_iterations;
        if (s_new > s_old) {
            ++diag.rejected_steps;
            break;
        }
        gamma = g_new;
        lambda = lam_new;
        const double obj_new = er_objective(y, u, d, gamma, lambda, cfg.zeta2);
        diag.objective_history.push_back(obj_new);
        const bool done = std::abs(obj - obj_new) <= cfg.mm_tol * std::abs(obj);
        obj = obj_new;
        if (done) break;
    }

    if (!(lambda > 0.0)) throw ScaleUnidentifiable();
    out.gamma_tilde = gamma;
    out.lambda = lambda;
    out.s_hat = d * gamma / lambda;
    return out;
}

inline ErResult recover_echo(const SignedMatrix& y, const ThresholdMatrix& h, const MatrixXd& r_hat,
                             const Dictionary& dict, const ErConfig& cfg, double lambda_init)
{
    return recover_echo(y, h.dense(), r_hat, dict.atoms, cfg, lambda_init);
}

} // namespace onebit
