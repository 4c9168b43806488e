#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <optional>
#include <vector>

#include <boost/math/tools/minima.hpp>
#include <Eigen/Dense>

#include "errors.hpp"
#include "fft.hpp"
#include "sinusoid.hpp"

namespace onebit {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Sum over columns of |a(omega) V[:, m]|^2, evaluated directly.
inline double periodogram_cost(const MatrixXd& v, double omega)
{
    double total = 0.0;
    for (Index m = 0; m < v.cols(); ++m) {
        std::complex<double> acc = 0.0;
        for (Index n = 0; n < v.rows(); ++n)
            acc += v(n, m) * std::polar(1.0, -omega * static_cast<double>(n));
        total += std::norm(acc);
    }
    return total;
}

/**
 * Multi-column periodogram held as its aggregated autocorrelation
 * r[l] = sum_m sum_n V[n, m] V[n + l, m], so that
 * P(omega) = r[0] + 2 sum_{l >= 1} r[l] cos(omega l).
 * Building it costs one length-2N FFT pair per column; afterwards any
 * N1-point grid costs a single FFT and a point evaluation is O(N).
 */
class Periodogram {
public:
    explicit Periodogram(const MatrixXd& v) : n_(v.rows()), autocorr_(VectorXd::Zero(v.rows()))
    {
        detail::require(n_ >= 1, "Periodogram: empty data");
        const int len = static_cast<int>(2 * n_);
        detail::RealFft fft(len);
        std::vector<double> power(static_cast<std::size_t>(fft.bins()), 0.0);
        for (Index m = 0; m < v.cols(); ++m) {
            double* x = fft.real();
            for (Index n = 0; n < n_; ++n) x[n] = v(n, m);
            std::fill(x + n_, x + len, 0.0);
            fft.forward();
            const auto* bins_out = fft.spectrum();
            for (int k = 0; k < fft.bins(); ++k) power[static_cast<std::size_t>(k)] += std::norm(bins_out[k]);
        }
        auto* bins_out = fft.spectrum();
        for (int k = 0; k < fft.bins(); ++k) bins_out[k] = power[static_cast<std::size_t>(k)];
        fft.inverse();
        for (Index l = 0; l < n_; ++l) autocorr_[l] = fft.real()[l] / static_cast<double>(len);
    }

    Index n_fast() const { return n_; }
    const VectorXd& autocorrelation() const { return autocorr_; }

    double operator()(double omega) const
    {
        double acc = 0.0;
        for (Index l = n_ - 1; l >= 1; --l) acc += autocorr_[l] * std::cos(omega * static_cast<double>(l));
        return autocorr_[0] + 2.0 * acc;
    }

    /// P at omega_k = 2 pi k / n1 for k = 0 .. n1 - 1.
    VectorXd grid(Index n1) const
    {
        detail::require(n1 >= n_, "Periodogram::grid: N1 must be >= N");
        detail::RealFft fft(static_cast<int>(n1));
        double* x = fft.real();
        std::fill(x, x + n1, 0.0);
        x[0] = autocorr_[0];
        for (Index l = 1; l < n_; ++l) x[l] = 2.0 * autocorr_[l];
        fft.forward();
        const auto* bins_out = fft.spectrum();
        VectorXd p(n1);
        for (Index k = 0; k <= n1 / 2; ++k) p[k] = bins_out[k].real();
        for (Index k = n1 / 2 + 1; k < n1; ++k) p[k] = p[n1 - k];
        return p;
    }

    /// First bin kept by the coarse search: everything below one native
    /// resolution cell (2 pi / N) is treated as DC and skipped.
    Index first_searched_bin(Index n1) const { return std::max<Index>(1, (n1 + n_ - 1) / n_); }

    /// Mirror image of first_searched_bin at pi, where the sine regressor vanishes.
    Index last_searched_bin(Index n1) const { return (n1 - 2 * first_searched_bin(n1)) / 2; }

    double coarse_peak(Index n1) const
    {
        const VectorXd p = grid(n1);
        const Index lo = first_searched_bin(n1);
        const Index hi = last_searched_bin(n1);
        Index best = -1;
        double best_val = 0.0;
        for (Index k = lo; k <= hi; ++k) {
            if (p[k] > best_val) { // strict: lowest index wins ties
                best_val = p[k];
                best = k;
            }
        }
        if (best < 0) throw NoSpectralPeak();
        return 2.0 * std::numbers::pi * static_cast<double>(best) / static_cast<double>(n1);
    }

    /// Bounded maximisation over [omega_c - pi/N1, omega_c + pi/N1], clipped to [0, pi).
    double refine_peak(double omega_c, Index n1) const
    {
        const double half = std::numbers::pi / static_cast<double>(n1);
        const double lo = std::max(0.0, omega_c - half);
        const double hi = std::min(std::nextafter(std::numbers::pi, 0.0), omega_c + half);
        // Search in a unit-scaled coordinate so Brent's relative tolerance
        // translates to an absolute one far below 1e-9 rad.
        const double mid = 0.5 * (lo + hi);
        const double scale = 0.5 * (hi - lo);
        if (scale <= 0.0) return mid;
        auto neg = [&](double t) { return -(*this)(mid + scale * t); };
        std::uintmax_t iters = 200;
        const auto r = boost::math::tools::brent_find_minima(neg, -1.0, 1.0, 40, iters);
        double best = mid + scale * r.first;
        // Brent never evaluates the end points; keep the better of interior and edges.
        if ((*this)(lo) > (*this)(best)) best = lo;
        if ((*this)(hi) > (*this)(best)) best = hi;
        return std::clamp(best, lo, hi);
    }

private:
    Index n_;
    VectorXd autocorr_;
};

/// argmax over DFT bins in (0, pi) of the summed zero-padded periodogram.
inline double coarse_peak(const MatrixXd& v, Index n1)
{
    detail::require(n1 >= v.rows(), "coarse_peak: N1 must be >= N");
    return Periodogram(v).coarse_peak(n1);
}

inline double refine_peak(const MatrixXd& v, double omega_coarse, Index n1)
{
    return Periodogram(v).refine_peak(omega_coarse, n1);
}

/// Per-column least-squares (a, b) for a cos + b sin at a fixed frequency.
inline SinusoidComponent fit_amp_phase(const MatrixXd& v, double omega)
{
    const Index n = v.rows();
    detail::require(n >= 2, "fit_amp_phase: need N >= 2");
    const VectorXd c = cos_column(omega, n);
    const VectorXd s = sin_column(omega, n);
    const double cc = c.squaredNorm();
    const double ss = s.squaredNorm();
    const double cs = c.dot(s);
    const double det = cc * ss - cs * cs;
    // det = l_min l_max; reject when the 2x2 normal matrix is numerically rank one.
    const double l_max = 0.5 * (cc + ss) + std::hypot(0.5 * (cc - ss), cs);
    if (!(det > 1e-12 * l_max * l_max))
        throw std::invalid_argument("fit_amp_phase: singular normal matrix");
    const Eigen::RowVectorXd pc = c.transpose() * v;
    const Eigen::RowVectorXd ps = s.transpose() * v;
    SinusoidComponent out;
    out.omega = omega;
    out.a = ((ss * pc - cs * ps) / det).transpose();
    out.b = ((cc * ps - cs * pc) / det).transpose();
    return out;
}

namespace detail {

inline double fit_residual(const MatrixXd& v, const SinusoidComponent& c)
{
    return (v - component_matrix(c, v.rows())).squaredNorm();
}

} // namespace detail

/**
 * One RELAX update of a single component against residual data V:
 * coarse FFT peak, bounded refinement, least-squares amplitudes. When the
 * current component is supplied, its frequency with refitted amplitudes is
 * kept instead if that leaves the smaller residual, so the update never
 * increases ||V - component||^2.
 */
inline SinusoidComponent relax_update(const MatrixXd& v, Index n1,
                                      const SinusoidComponent* current = nullptr)
{
    const Periodogram pg(v);
    const double coarse = pg.coarse_peak(n1);
    const double omega = pg.refine_peak(coarse, n1);
    SinusoidComponent fresh = fit_amp_phase(v, omega);
    if (current == nullptr) return fresh;
    SinusoidComponent kept = fit_amp_phase(v, current->omega);
    return detail::fit_residual(v, fresh) <= detail::fit_residual(v, kept) ? fresh : kept;
}

struct RelaxResult {
    std::vector<SinusoidComponent> components;
    std::vector<double> residual_history; ///< ||V - sum||^2 after each pass
};

/// Classic multi-snapshot RELAX on real-valued data: components are added
/// one at a time and all present components are re-estimated cyclically.
inline RelaxResult relax_multi_pri(const MatrixXd& v, Index k, int max_pass, Index n1 = 0)
{
    detail::require(k >= 1, "relax_multi_pri: K must be >= 1");
    if (n1 == 0) n1 = 64 * v.rows();
    RelaxResult out;
    auto total = [&] { return synthesize_components(out.components, v.rows(), v.cols()); };

    for (Index kk = 0; kk < k; ++kk) {
        out.components.push_back(relax_update(v - total(), n1));
        double prev = (v - total()).squaredNorm();
        out.residual_history.push_back(prev);
        for (int pass = 0; pass < max_pass; ++pass) {
            for (auto& comp : out.components) {
                const MatrixXd others = total() - component_matrix(comp, v.rows());
                comp = relax_update(v - others, n1, &comp);
            }
            const double cur = (v - total()).squaredNorm();
            out.residual_history.push_back(cur);
            const bool done = std::abs(prev - cur) <= 1e-9 * prev;
            prev = cur;
            if (done) break;
        }
    }
    return out;
}

} // namespace onebit
