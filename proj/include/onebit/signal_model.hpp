#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "fft.hpp"
#include "rng.hpp"
#include "sinusoid.hpp"

namespace onebit {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

/// N x M matrix of one-bit comparisons; every entry is exactly +1 or -1.
class SignedMatrix {
public:
    SignedMatrix() = default;

    explicit SignedMatrix(MatrixXd values) : data_(std::move(values))
    {
        detail::require(data_.rows() >= 1 && data_.cols() >= 1, "SignedMatrix: empty matrix");
        for (Index j = 0; j < data_.cols(); ++j)
            for (Index i = 0; i < data_.rows(); ++i)
                if (data_(i, j) != 1.0 && data_(i, j) != -1.0)
                    throw std::invalid_argument("SignedMatrix: entries must be +1 or -1");
    }

    /// Elementwise sign with sign(0) = +1.
    static SignedMatrix from_sign_of(const MatrixXd& x)
    {
        return SignedMatrix(x.unaryExpr([](double v) { return v >= 0.0 ? 1.0 : -1.0; }).eval());
    }

    Index n_fast() const { return data_.rows(); }
    Index m_slow() const { return data_.cols(); }
    double operator()(Index n, Index m) const { return data_(n, m); }
    const MatrixXd& values() const { return data_; }

    friend bool operator==(const SignedMatrix& a, const SignedMatrix& b)
    {
        return a.data_.rows() == b.data_.rows() && a.data_.cols() == b.data_.cols() &&
               a.data_ == b.data_;
    }

private:
    MatrixXd data_;
};

/// Slow-time threshold ramp: H[n, m] = -h + 2 m h / (M - 1), m = 0..M-1.
class ThresholdMatrix {
public:
    ThresholdMatrix(double h, Index n_fast, Index m_slow) : h_(h), n_(n_fast), m_(m_slow)
    {
        detail::require(h > 0.0 && std::isfinite(h), "ThresholdMatrix: h must be positive");
        detail::require(n_fast >= 1, "ThresholdMatrix: N must be >= 1");
        detail::require(m_slow >= 2, "ThresholdMatrix: M must be >= 2");
    }

    double h() const { return h_; }
    Index n_fast() const { return n_; }
    Index m_slow() const { return m_; }
    double step() const { return 2.0 * h_ / static_cast<double>(m_ - 1); }

    double level(Index m) const
    {
        if (m == m_ - 1) return h_;
        return -h_ + 2.0 * static_cast<double>(m) * h_ / static_cast<double>(m_ - 1);
    }

    VectorXd levels() const
    {
        VectorXd l(m_);
        for (Index m = 0; m < m_; ++m) l[m] = level(m);
        return l;
    }

    MatrixXd dense() const { return VectorXd::Ones(n_) * levels().transpose(); }

private:
    double h_;
    Index n_;
    Index m_;
};

/// K sinusoidal interferers with per-PRI amplitudes and a noise scale.
struct RfiParams {
    VectorXd freqs;   ///< K, rad/sample
    MatrixXd amps_a;  ///< K x M cosine amplitudes
    MatrixXd amps_b;  ///< K x M sine amplitudes
    double sigma = 1.0;

    Index k() const { return freqs.size(); }
    Index m_slow() const { return amps_a.cols(); }

    void validate() const
    {
        detail::require(amps_a.rows() == k() && amps_b.rows() == k() &&
                            amps_a.cols() == amps_b.cols(),
                        "RfiParams: amplitude shapes must be K x M");
        detail::require(sigma > 0.0 && std::isfinite(sigma), "RfiParams: sigma must be positive");
        for (Index i = 0; i < k(); ++i)
            detail::require(freqs[i] >= 0.0 && freqs[i] < std::numbers::pi,
                            "RfiParams: frequencies must lie in [0, pi)");
        detail::require(amps_a.allFinite() && amps_b.allFinite(), "RfiParams: non-finite amplitude");
    }

    std::vector<SinusoidComponent> components() const
    {
        std::vector<SinusoidComponent> out;
        out.reserve(static_cast<std::size_t>(k()));
        for (Index i = 0; i < k(); ++i)
            out.push_back({freqs[i], amps_a.row(i).transpose(), amps_b.row(i).transpose()});
        return out;
    }

    static RfiParams from_components(const std::vector<SinusoidComponent>& comps, Index m_slow,
                                     double sigma)
    {
        RfiParams p;
        const auto k = static_cast<Index>(comps.size());
        p.freqs.resize(k);
        p.amps_a.resize(k, m_slow);
        p.amps_b.resize(k, m_slow);
        p.sigma = sigma;
        for (Index i = 0; i < k; ++i) {
            const auto& c = comps[static_cast<std::size_t>(i)];
            p.freqs[i] = c.omega;
            p.amps_a.row(i) = c.a.transpose();
            p.amps_b.row(i) = c.b.transpose();
        }
        return p;
    }
};

/// Sampled transmit pulse; `center` is the 0-based index of the pulse centre.
struct Pulse {
    VectorXd samples;
    Index center = 0;
    double width_samples = 0.0; ///< Gaussian standard deviation chosen by the search
};

/// N x N shift dictionary; column j holds the pulse centred on row j.
struct Dictionary {
    MatrixXd atoms;

    Index size() const { return atoms.cols(); }
};

/// A point scatterer placed on the fast-time grid.
struct Target {
    Index position = 0; ///< 0-based fast-time index of the echo centre
    double amplitude = 0.0;
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

inline SignedMatrix sign_sample(const MatrixXd& signal, const MatrixXd& thresholds)
{
    detail::require_shape(signal.rows() == thresholds.rows() && signal.cols() == thresholds.cols(),
                          "sign_sample: signal and threshold shapes differ");
    return SignedMatrix::from_sign_of(signal - thresholds);
}

inline SignedMatrix sign_sample(const MatrixXd& signal, const ThresholdMatrix& thresholds)
{
    detail::require_shape(signal.rows() == thresholds.n_fast() &&
                              signal.cols() == thresholds.m_slow(),
                          "sign_sample: signal and threshold shapes differ");
    return sign_sample(signal, thresholds.dense());
}

inline MatrixXd synthesize_rfi(const RfiParams& params, Index n_fast, Index m_slow)
{
    params.validate();
    detail::require_shape(params.m_slow() == m_slow, "synthesize_rfi: amplitude columns != M");
    return synthesize_components(params.components(), n_fast, m_slow);
}

/// Frequencies (Hz) and amplitude ratios of the five-source simulated interference.
struct Table5Source {
    double freq_hz;
    double ratio;
};
inline constexpr Table5Source kTable5Sources[] = {
    {500e6, 1.0}, {350e6, 0.95}, {700e6, 0.8}, {900e6, 0.87}, {1050e6, 0.9}};
inline constexpr double kTable5SampleRate = 8e9;

/**
 * Five fixed-frequency interferers with constant amplitudes and i.i.d.
 * uniform phases per PRI, returned in (a, b) form with a = A sin(phi) and
 * b = A cos(phi). Phases are drawn k-major from the seed's phase stream.
 */
inline RfiParams simulate_table5_rfi(double a1, Index m_slow, Index n_fast, std::uint64_t seed,
                                     double fs = kTable5SampleRate)
{
    detail::require(a1 > 0.0, "simulate_table5_rfi: A1 must be positive");
    detail::require(m_slow >= 1 && n_fast >= 1, "simulate_table5_rfi: M, N must be >= 1");
    constexpr Index k = std::size(kTable5Sources);
    RfiParams p;
    p.freqs.resize(k);
    p.amps_a.resize(k, m_slow);
    p.amps_b.resize(k, m_slow);
    p.sigma = 1.0;
    Philox4x32 rng(seed, streams::rfi_phase);
    for (Index i = 0; i < k; ++i) {
        const auto& src = kTable5Sources[i];
        p.freqs[i] = 2.0 * std::numbers::pi * src.freq_hz / fs;
        const double amp = a1 * src.ratio;
        for (Index m = 0; m < m_slow; ++m) {
            const double phi = 2.0 * std::numbers::pi * rng.uniform();
            p.amps_a(i, m) = amp * std::sin(phi);
            p.amps_b(i, m) = amp * std::cos(phi);
        }
    }
    return p;
}

namespace detail {

struct PulseBand {
    double peak_hz;
    double lo_hz;
    double hi_hz;
};

/// -10 dB band of a real pulse via a zero-padded DFT evaluated on [0, fs/2].
inline PulseBand pulse_band(const VectorXd& x, double fs, Index n_dft = 8192)
{
    require(x.size() <= n_dft, "pulse_band: pulse longer than the DFT");
    const Index half = n_dft / 2;
    RealFft fft(static_cast<int>(n_dft));
    std::fill(fft.real(), fft.real() + n_dft, 0.0);
    std::copy(x.data(), x.data() + x.size(), fft.real());
    fft.forward();
    VectorXd mag(half + 1);
    for (Index k = 0; k <= half; ++k) mag[k] = std::abs(fft.spectrum()[k]);
    Index peak = 0;
    mag.maxCoeff(&peak);
    const double floor = mag[peak] * std::pow(10.0, -10.0 / 20.0);
    Index lo = peak;
    while (lo > 0 && mag[lo - 1] >= floor) --lo;
    Index hi = peak;
    while (hi < half && mag[hi + 1] >= floor) ++hi;
    const double df = fs / static_cast<double>(n_dft);
    return {static_cast<double>(peak) * df, static_cast<double>(lo) * df,
            static_cast<double>(hi) * df};
}

inline VectorXd gaussian_derivative(Index length, double width)
{
    const Index c = (length - 1) / 2;
    VectorXd p(length);
    for (Index i = 0; i < length; ++i) {
        const double t = static_cast<double>(i - c);
        p[i] = -t / (width * width) * std::exp(-t * t / (2.0 * width * width));
    }
    return p / p.cwiseAbs().maxCoeff();
}

} // namespace detail

/**
 * First derivative of a Gaussian, `length` samples, unit l2 norm so that every
 * interior dictionary atom has norm 1.
 *
 * The Gaussian width is picked by scanning a fixed grid of widths and keeping
 * those whose -10 dB band covers [f_lo, f_hi] to within 15% at each edge and
 * whose spectral peak falls inside the band; among those, the one whose peak
 * is closest (in log frequency) to sqrt(f_lo * f_hi) wins.
 */
inline Pulse make_pulse(double fs, Index length, double f_lo, double f_hi)
{
    detail::require(length >= 3 && length % 2 == 1, "make_pulse: length must be odd and >= 3");
    detail::require(f_lo > 0.0 && f_hi > f_lo, "make_pulse: need 0 < f_lo < f_hi");
    detail::require(fs > 2.0 * f_hi, "make_pulse: fs must exceed 2 * f_hi");

    const double target = std::log(std::sqrt(f_lo * f_hi));
    double best_width = -1.0;
    double best_score = std::numeric_limits<double>::infinity();
    for (int step = 0;; ++step) {
        const double width = 0.25 + 0.005 * step;
        if (width > static_cast<double>(length) / 2.0) break;
        const VectorXd p = detail::gaussian_derivative(length, width);
        const auto band = detail::pulse_band(p, fs);
        const bool covers = band.lo_hz <= 1.15 * f_lo && band.hi_hz >= 0.85 * f_hi;
        const bool peak_inside = band.peak_hz >= f_lo && band.peak_hz <= f_hi;
        if (!covers || !peak_inside) continue;
        const double score = std::abs(std::log(band.peak_hz) - target);
        if (score < best_score) {
            best_score = score;
            best_width = width;
        }
    }
    if (best_width < 0.0)
        throw std::invalid_argument("make_pulse: band infeasible for this length and sample rate");
    VectorXd p = detail::gaussian_derivative(length, best_width);
    p.normalize();
    return {std::move(p), (length - 1) / 2, best_width};
}

inline Dictionary build_dictionary(const Pulse& pulse, Index n_fast)
{
    const Index len = pulse.samples.size();
    detail::require(n_fast >= len, "build_dictionary: N must be >= pulse length");
    MatrixXd d = MatrixXd::Zero(n_fast, n_fast);
    for (Index j = 0; j < n_fast; ++j) {
        for (Index i = 0; i < len; ++i) {
            const Index row = j + i - pulse.center;
            if (row >= 0 && row < n_fast) d(row, j) = pulse.samples[i];
        }
    }
    return {std::move(d)};
}

inline VectorXd synthesize_echo(const Dictionary& dict, const std::vector<Target>& targets)
{
    VectorXd gamma = VectorXd::Zero(dict.size());
    for (const auto& t : targets) {
        detail::require(t.position >= 0 && t.position < dict.size(),
                        "synthesize_echo: target position out of range");
        gamma[t.position] += t.amplitude;
    }
    return dict.atoms * gamma;
}

/// Unit-variance Gaussian noise drawn row-major from the seed's noise stream.
inline MatrixXd unit_noise(Index n_fast, Index m_slow, std::uint64_t seed)
{
    MatrixXd e(n_fast, m_slow);
    Philox4x32 rng(seed, streams::noise);
    for (Index n = 0; n < n_fast; ++n)
        for (Index m = 0; m < m_slow; ++m) e(n, m) = rng.normal();
    return e;
}

/// Everything needed to regenerate the received (pre-quantisation) data.
struct Scenario {
    VectorXd echo;
    std::optional<RfiParams> rfi;
    double noise_std = 0.0;
    std::uint64_t seed = 0;
    Index m_slow = 1;

    Index n_fast() const { return echo.size(); }

    MatrixXd echo_matrix() const { return echo * Eigen::RowVectorXd::Ones(m_slow); }

    MatrixXd rfi_matrix() const
    {
        if (!rfi) return MatrixXd::Zero(n_fast(), m_slow);
        return synthesize_rfi(*rfi, n_fast(), m_slow);
    }

    MatrixXd noise_matrix() const
    {
        if (noise_std == 0.0) return MatrixXd::Zero(n_fast(), m_slow);
        return noise_std * unit_noise(n_fast(), m_slow, seed);
    }

    MatrixXd received() const { return echo_matrix() + rfi_matrix() + noise_matrix(); }
};

// ---------------------------------------------------------------------------
// Metrics (dB, l2-norm ratios)
// ---------------------------------------------------------------------------

inline double ratio_db(double num, double den, const char* what)
{
    if (den == 0.0) throw std::invalid_argument(std::string(what) + ": zero denominator");
    if (num == 0.0) return -std::numeric_limits<double>::infinity();
    return 20.0 * std::log10(num / den);
}

/// Measured-interference form: the interference already contains its noise.
inline double sinr_db(const MatrixXd& s, const MatrixXd& r)
{
    return ratio_db(s.norm(), r.norm(), "sinr");
}

inline double sinr_db(const MatrixXd& s, const MatrixXd& r, const MatrixXd& e)
{
    return ratio_db(s.norm(), (r + e).norm(), "sinr");
}

inline double inr_db(const MatrixXd& r, const MatrixXd& e)
{
    return ratio_db(r.norm(), e.norm(), "inr");
}

/// Normalised recovery error; -inf when the estimate is exact.
inline double nre_db(const VectorXd& s, const VectorXd& s_hat)
{
    detail::require_shape(s.size() == s_hat.size(), "nre: length mismatch");
    return ratio_db((s - s_hat).norm(), s.norm(), "nre");
}

} // namespace onebit
