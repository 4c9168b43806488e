#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "signal_model.hpp"
#include "sinusoid.hpp"

namespace onebit {

// ---------------------------------------------------------------------------
// Standard normal primitives
// ---------------------------------------------------------------------------

namespace detail {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178; // log(sqrt(2 pi))
inline constexpr double kTailSwitch = -8.0;

/// Mills ratio Q(t) / phi(t) for t >= 8 via the continued fraction
/// 1 / (t + 1 / (t + 2 / (t + 3 / ...))), evaluated with modified Lentz.
inline double mills_ratio(double t)
{
    constexpr double tiny = 1e-300;
    double f = t;
    double c = t;
    double d = 0.0;
    for (int k = 1; k < 500; ++k) {
        const double ak = static_cast<double>(k);
        d = t + ak * d;
        if (d == 0.0) d = tiny;
        c = t + ak / c;
        if (c == 0.0) c = tiny;
        d = 1.0 / d;
        const double delta = c * d;
        f *= delta;
        if (std::abs(delta - 1.0) < 1e-16) break;
    }
    return 1.0 / f;
}

inline double std_normal_pdf(double x)
{
    return std::exp(-0.5 * x * x - kLogSqrt2Pi);
}

} // namespace detail

/// log of the standard normal CDF, finite for any finite x.
inline double log_Phi(double x)
{
    if (x >= detail::kTailSwitch) {
        if (x > 0.0) return std::log1p(-0.5 * std::erfc(x / std::numbers::sqrt2));
        return std::log(0.5 * std::erfc(-x / std::numbers::sqrt2));
    }
    const double t = -x;
    return -0.5 * t * t - detail::kLogSqrt2Pi + std::log(detail::mills_ratio(t));
}

/// Derivative of f(x) = -log Phi(x), i.e. -phi(x) / Phi(x).
inline double f_prime(double x)
{
    if (x > 40.0) x = 40.0;
    if (x >= detail::kTailSwitch)
        return -detail::std_normal_pdf(x) / (0.5 * std::erfc(-x / std::numbers::sqrt2));
    return -1.0 / detail::mills_ratio(-x);
}

// ---------------------------------------------------------------------------
// Scaled parameterisation: a~ = a / sigma, b~ = b / sigma, lambda = 1 / sigma
// ---------------------------------------------------------------------------

struct ScaledParams {
    std::vector<SinusoidComponent> components; ///< scaled amplitudes
    double lambda = 0.0;

    Index k() const { return static_cast<Index>(components.size()); }

    static ScaledParams from_rfi(const RfiParams& p)
    {
        p.validate();
        ScaledParams s;
        s.lambda = 1.0 / p.sigma;
        for (auto c : p.components()) {
            c.a *= s.lambda;
            c.b *= s.lambda;
            s.components.push_back(std::move(c));
        }
        return s;
    }

    /// Back to signal units; needs lambda > 0.
    RfiParams to_rfi(Index m_slow) const
    {
        if (!(lambda > 0.0)) throw ScaleUnidentifiable();
        std::vector<SinusoidComponent> comps = components;
        for (auto& c : comps) {
            c.a /= lambda;
            c.b /= lambda;
        }
        return RfiParams::from_components(comps, m_slow, 1.0 / lambda);
    }

    /// Scaled interference matrix R~ (N x M).
    MatrixXd rfi_matrix(Index n_fast, Index m_slow) const
    {
        return synthesize_components(components, n_fast, m_slow);
    }
};

// ---------------------------------------------------------------------------
// Likelihood and majorizer
// ---------------------------------------------------------------------------

/// Sum over all entries of -log Phi(Y (R~ - lambda H)).
inline double neg_log_likelihood(const SignedMatrix& y, const MatrixXd& h, const MatrixXd& r_tilde,
                                 double lambda)
{
    detail::require_shape(h.rows() == y.n_fast() && h.cols() == y.m_slow() &&
                              r_tilde.rows() == y.n_fast() && r_tilde.cols() == y.m_slow(),
                          "neg_log_likelihood: shape mismatch");
    double acc = 0.0;
    const auto& yv = y.values();
    for (Index m = 0; m < yv.cols(); ++m)
        for (Index n = 0; n < yv.rows(); ++n)
            acc -= log_Phi(yv(n, m) * (r_tilde(n, m) - lambda * h(n, m)));
    return acc;
}

inline double neg_log_likelihood(const SignedMatrix& y, const MatrixXd& h, const ScaledParams& p)
{
    return neg_log_likelihood(y, h, p.rfi_matrix(y.n_fast(), y.m_slow()), p.lambda);
}

/// Auxiliary matrix of the quadratic majorizer:
/// Z~ = Y (X - f'(X)), X = Y (R~ - lambda H).
inline MatrixXd majorizer_aux(const SignedMatrix& y, const MatrixXd& h, const MatrixXd& r_tilde,
                              double lambda)
{
    detail::require_shape(h.rows() == y.n_fast() && h.cols() == y.m_slow() &&
                              r_tilde.rows() == y.n_fast() && r_tilde.cols() == y.m_slow(),
                          "majorizer_aux: shape mismatch");
    const auto& yv = y.values();
    MatrixXd z(yv.rows(), yv.cols());
    for (Index m = 0; m < yv.cols(); ++m)
        for (Index n = 0; n < yv.rows(); ++n) {
            const double x = yv(n, m) * (r_tilde(n, m) - lambda * h(n, m));
            z(n, m) = yv(n, m) * (x - f_prime(x));
        }
    return z;
}

inline MatrixXd majorizer_aux(const SignedMatrix& y, const MatrixXd& h, const ScaledParams& p)
{
    return majorizer_aux(y, h, p.rfi_matrix(y.n_fast(), y.m_slow()), p.lambda);
}

/// Closed-form nonnegative least-squares scale: argmin_{l >= 0} ||R - l H - Z||^2.
inline double update_lambda(const MatrixXd& h, const MatrixXd& r, const MatrixXd& z)
{
    detail::require_shape(h.rows() == r.rows() && h.cols() == r.cols() && z.rows() == r.rows() &&
                              z.cols() == r.cols(),
                          "update_lambda: shape mismatch");
    const double hh = h.squaredNorm();
    if (hh == 0.0) throw std::invalid_argument("update_lambda: all-zero threshold matrix");
    const double num = (h.array() * (r - z).array()).sum();
    return std::max(0.0, num / hh);
}

} // namespace onebit
