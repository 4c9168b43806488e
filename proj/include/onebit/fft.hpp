#pragma once

#include <complex>
#include <memory>
#include <mutex>

#include <fftw3.h>

#include <Eigen/Dense>

namespace onebit::detail {

/// FFTW planning is not thread-safe; execution is.
inline std::mutex& fftw_planner_mutex()
{
    static std::mutex m;
    return m;
}

/// Real-input forward / complex-to-real inverse transforms of one length,
/// with owned buffers. FFTW_ESTIMATE keeps plans (and outputs) deterministic.
class RealFft {
public:
    explicit RealFft(int n) : n_(n)
    {
        real_ = static_cast<double*>(fftw_malloc(sizeof(double) * static_cast<std::size_t>(n)));
        spec_ = static_cast<fftw_complex*>(
            fftw_malloc(sizeof(fftw_complex) * static_cast<std::size_t>(n / 2 + 1)));
        std::lock_guard lock(fftw_planner_mutex());
        fwd_ = fftw_plan_dft_r2c_1d(n, real_, spec_, FFTW_ESTIMATE);
        inv_ = fftw_plan_dft_c2r_1d(n, spec_, real_, FFTW_ESTIMATE);
    }

    RealFft(const RealFft&) = delete;
    RealFft& operator=(const RealFft&) = delete;

    ~RealFft()
    {
        {
            std::lock_guard lock(fftw_planner_mutex());
            fftw_destroy_plan(fwd_);
            fftw_destroy_plan(inv_);
        }
        fftw_free(real_);
        fftw_free(spec_);
    }

    int size() const { return n_; }
    int bins() const { return n_ / 2 + 1; }

    double* real() { return real_; }
    std::complex<double>* spectrum() { return reinterpret_cast<std::complex<double>*>(spec_); }

    void forward() { fftw_execute(fwd_); }
    /// Unnormalised: the result is n times the true inverse.
    void inverse() { fftw_execute(inv_); }

private:
    int n_;
    double* real_ = nullptr;
    fftw_complex* spec_ = nullptr;
    fftw_plan fwd_ = nullptr;
    fftw_plan inv_ = nullptr;
};

} // namespace onebit::detail
