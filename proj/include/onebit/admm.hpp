#pragma once

#include <algorithm>
#include <cmath>

namespace onebit {

struct AdmmTolerances {
    double eps_abs = 1e-3;
    double eps_rel = 1e-7;
    double eps_lambda = 1e-3;
};

/// One evaluation of the stopping test and the adaptive penalty rule.
struct AdmmResiduals {
    double r_pri = 0.0;
    double r_dual = 0.0;
    double r_lambda = 0.0;
    double eps_pri = 0.0;
    double eps_dual = 0.0;
    double rho_next = 1.0;
    bool converged = false;
};

/// |lambda+ - lambda| / lambda+, with the lambda+ = 0 case mapped to 0 (no
/// move) or 1 (moved onto the boundary).
inline double lambda_residual(double lambda_prev, double lambda_next)
{
    if (lambda_next == 0.0) return lambda_prev == 0.0 ? 0.0 : 1.0;
    return std::abs(lambda_next - lambda_prev) / lambda_next;
}

/// Penalty update with the factor-10 balance test in both directions.
inline double next_rho(double rho, double r_pri, double r_dual)
{
    if (r_pri > 10.0 * r_dual) return 2.0 * rho;
    if (r_dual > 10.0 * r_pri) return 0.5 * rho;
    return rho;
}

/**
 * dim_sqrt is the square root of the consensus variable's size.
 * norm_x, norm_b: norms of the two split variables; norm_dual: norm of the multiplier.
 */
inline AdmmResiduals admm_residuals(double r_pri, double r_dual, double lambda_prev, double lambda_next,
                                    double dim_sqrt, double norm_x, double norm_b, double norm_dual,
                                    double rho, const AdmmTolerances& tol)
{
    AdmmResiduals r;
    r.r_pri = r_pri;
    r.r_dual = r_dual;
    r.r_lambda = lambda_residual(lambda_prev, lambda_next);
    r.eps_pri = dim_sqrt * tol.eps_abs + tol.eps_rel * std::max(norm_x, norm_b);
    r.eps_dual = dim_sqrt * tol.eps_abs + tol.eps_rel * norm_dual;
    r.rho_next = next_rho(rho, r_pri, r_dual);
    r.converged = r.r_pri <= r.eps_pri && r.r_dual <= r.eps_dual && r.r_lambda <= tol.eps_lambda;
    return r;
}

} // namespace onebit
