#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <boost/math/tools/roots.hpp>
#include <Eigen/Dense>

#include "errors.hpp"
#include "likelihood.hpp"
#include "mmrelax.hpp"
#include "signal_model.hpp"

namespace onebit {

struct BicScore {
    Index k = 0;
    double nll_term = 0.0;
    double penalty = 0.0;
    double total = 0.0;
};

inline double bic_penalty(Index k, Index n_fast, Index m_slow)
{
    return static_cast<double>(k) * (3.0 + 2.0 * static_cast<double>(m_slow)) *
           std::log(static_cast<double>(n_fast));
}

/// 2 l(beta) + k (3 + 2M) ln N; +inf when the fitted lambda is zero.
inline BicScore bic_score(const SignedMatrix& y, const MatrixXd& h, const ScaledParams& fitted, Index k)
{
    detail::require(fitted.k() == k, "bic_score: component count does not match k");
    BicScore s;
    s.k = k;
    s.penalty = bic_penalty(k, y.n_fast(), y.m_slow());
    if (!(fitted.lambda > 0.0)) {
        s.nll_term = std::numeric_limits<double>::infinity();
        s.total = s.nll_term;
        return s;
    }
    s.nll_term = 2.0 * neg_log_likelihood(y, h, fitted);
    s.total = s.nll_term + s.penalty;
    return s;
}

/// Scale-only fit for the empty model: argmin_{lambda >= 0} sum f(-lambda Y H).
inline double fit_noise_only_lambda(const SignedMatrix& y, const MatrixXd& h)
{
    detail::require_shape(h.rows() == y.n_fast() && h.cols() == y.m_slow(), "fit_noise_only_lambda: shape mismatch");
    const auto& yv = y.values();
    auto deriv = [&](double lam) {
        double g = 0.0;
        for (Index j = 0; j < yv.cols(); ++j)
            for (Index i = 0; i < yv.rows(); ++i) {
                const double yh = yv(i, j) * h(i, j);
                g -= f_prime(-lam * yh) * yh;
            }
        return g;
    };
    if (deriv(0.0) >= 0.0) return 0.0;
    const double hmax = h.cwiseAbs().maxCoeff();
    detail::require(hmax > 0.0, "fit_noise_only_lambda: all-zero threshold matrix");
    double hi = 1.0 / hmax;
    // Perfectly separable data has no finite minimiser; cap the scale.
    const double cap = 1e6 / hmax;
    while (deriv(hi) < 0.0) {
        if (hi >= cap) return cap;
        hi *= 2.0;
    }
    std::uintmax_t iters = 200;
    const auto r = boost::math::tools::toms748_solve(deriv, 0.0, hi, boost::math::tools::eps_tolerance<double>(50),
                                                    iters);
    return 0.5 * (r.first + r.second);
}

struct OrderSelection {
    Index k_hat = 0;
    ScaledParams params;           ///< fitted parameters at k_hat
    std::vector<BicScore> scores;  ///< k = 0 .. K_max
};

/// argmin over the empty model and the given stage fits; ties go to the smaller order.
inline OrderSelection select_order(const SignedMatrix& y, const MatrixXd& h, const MmrelaxResult& stages)
{
    OrderSelection out;
    ScaledParams empty;
    empty.lambda = fit_noise_only_lambda(y, h);
    out.scores.push_back(bic_score(y, h, empty, 0));
    out.params = empty;
    double best = out.scores.back().total;
    for (std::size_t i = 0; i < stages.stages.size(); ++i) {
        const auto& p = stages.stages[i].params;
        out.scores.push_back(bic_score(y, h, p, static_cast<Index>(i + 1)));
        if (out.scores.back().total < best) {
            best = out.scores.back().total;
            out.k_hat = static_cast<Index>(i + 1);
            out.params = p;
        }
    }
    return out;
}

inline OrderSelection select_order(const SignedMatrix& y, const MatrixXd& h, Index k_max,
                                   const std::vector<double>& inits, const MmConfig& cfg, double lambda0)
{
    detail::require(k_max >= 1, "select_order: K_max must be >= 1");
    return select_order(y, h, mmrelax_full(y, h, k_max, inits, cfg, lambda0));
}

/// [1 / Phi(x) + 1 / Phi(-x)] exp(-x^2), through log Phi.
inline double xi(double x)
{
    const double x2 = x * x;
    return std::exp(-x2 - log_Phi(x)) + std::exp(-x2 - log_Phi(-x));
}

struct FimEntry {
    std::string entry;
    Index n_fast = 0;
    double value = 0.0;
    double limit = 0.0;
    double rel_error = 0.0; ///< absolute error when the limit is zero
};

/**
 * Normalised finite-N sums of the J1 blocks for R = sum A sin(w n + phi),
 * next to their large-N limits. thresholds holds one level per PRI.
 */
inline std::vector<FimEntry> fim_limit_check(const RfiParams& params, const VectorXd& thresholds,
                                             const std::vector<Index>& n_list)
{
    params.validate();
    const Index k_count = params.k();
    const Index m = thresholds.size();
    detail::require_shape(params.amps_a.cols() == m, "fim_limit_check: threshold count must equal M");
    detail::require(!n_list.empty(), "fim_limit_check: empty N list");
    const Index n_min = *std::min_element(n_list.begin(), n_list.end());
    const double guard = 2.0 * std::numbers::pi * 8.0 / static_cast<double>(n_min);
    for (double w : params.freqs)
        if (w < guard || w > std::numbers::pi - guard)
            throw std::invalid_argument("fim_limit_check: frequency too close to 0 or pi");

    const double sigma = params.sigma;
    const double s2 = sigma * sigma;
    MatrixXd amp(k_count, m);
    MatrixXd phase(k_count, m);
    for (Index k = 0; k < k_count; ++k)
        for (Index j = 0; j < m; ++j) {
            amp(k, j) = std::hypot(params.amps_a(k, j), params.amps_b(k, j));
            phase(k, j) = std::atan2(params.amps_a(k, j), params.amps_b(k, j));
        }
    const double sigma_h2 = thresholds.squaredNorm(); // (1/N) sum_n sum_m H^2 for column-constant H

    std::vector<FimEntry> out;
    auto push = [&](std::string name, Index n, double value, double limit) {
        const double err = limit != 0.0 ? std::abs(value - limit) / std::abs(limit) : std::abs(value);
        out.push_back(FimEntry{std::move(name), n, value, limit, err});
    };

    for (Index n : n_list) {
        const double nd = static_cast<double>(n);
        MatrixXd r = MatrixXd::Zero(n, m);
        for (Index k = 0; k < k_count; ++k)
            for (Index j = 0; j < m; ++j)
                for (Index i = 0; i < n; ++i)
                    r(i, j) += amp(k, j) * std::sin(params.freqs[k] * static_cast<double>(i) +
                                                    phase(k, j));
        MatrixXd rh = r;
        for (Index j = 0; j < m; ++j) rh.col(j).array() -= thresholds[j];

        for (Index k = 0; k < k_count; ++k) {
            const double w = params.freqs[k];
            const std::string tag = "[" + std::to_string(k) + "]";
            double ww = 0.0;
            double wsig = 0.0;
            for (Index j = 0; j < m; ++j) {
                double wa = 0.0;
                double wp = 0.0;
                double aa = 0.0;
                double ap = 0.0;
                double asig = 0.0;
                double pp = 0.0;
                double psig = 0.0;
                const double a_kj = amp(k, j);
                for (Index i = 0; i < n; ++i) {
                    const double t = static_cast<double>(i);
                    const double arg = w * t + phase(k, j);
                    const double sn = std::sin(arg);
                    const double cs = std::cos(arg);
                    ww += t * t * a_kj * a_kj * cs * cs;
                    wsig += t * a_kj * cs * rh(i, j);
                    wa += t * a_kj * cs * sn;
                    wp += t * a_kj * a_kj * cs * cs;
                    aa += sn * sn;
                    ap += a_kj * sn * cs;
                    asig += sn * rh(i, j);
                    pp += a_kj * a_kj * cs * cs;
                    psig += a_kj * cs * rh(i, j);
                }
                const std::string mt = "[" + std::to_string(k) + "," + std::to_string(j) + "]";
                push("omega_A" + mt, n, wa / (s2 * nd * nd), 0.0);
                push("omega_phi" + mt, n, wp / (s2 * nd * nd), a_kj * a_kj / (4.0 * s2));
                push("A_A" + mt, n, aa / (s2 * nd), 1.0 / (2.0 * s2));
                push("A_phi" + mt, n, ap / (s2 * nd), 0.0);
                push("A_sigma" + mt, n, -asig / (s2 * sigma * nd), -a_kj / (2.0 * s2 * sigma));
                push("phi_phi" + mt, n, pp / (s2 * nd), a_kj * a_kj / (2.0 * s2));
                push("phi_sigma" + mt, n, -psig / (s2 * sigma * nd), 0.0);
            }
            push("omega_omega" + tag, n, ww / (s2 * nd * nd * nd), amp.row(k).squaredNorm() / (6.0 * s2));
            push("omega_sigma" + tag, n, -wsig / (s2 * sigma * nd * nd), 0.0);
        }
        const double ss = rh.squaredNorm() / (s2 * s2 * nd);
        push("sigma_sigma", n, ss, (0.5 * amp.squaredNorm() + sigma_h2) / (s2 * s2));
    }
    return out;
}

} // namespace onebit
