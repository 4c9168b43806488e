#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

namespace onebit {

/// One interferer: a common frequency plus per-PRI cos/sin amplitudes.
struct SinusoidComponent {
    double omega = 0.0;  ///< rad/sample, in [0, pi)
    Eigen::VectorXd a;   ///< cosine amplitude per slow-time index
    Eigen::VectorXd b;   ///< sine amplitude per slow-time index

    Eigen::Index m_slow() const { return a.size(); }
};

inline Eigen::VectorXd cos_column(double omega, Eigen::Index n_fast)
{
    Eigen::VectorXd c(n_fast);
    for (Eigen::Index n = 0; n < n_fast; ++n) c[n] = std::cos(omega * static_cast<double>(n));
    return c;
}

inline Eigen::VectorXd sin_column(double omega, Eigen::Index n_fast)
{
    Eigen::VectorXd s(n_fast);
    for (Eigen::Index n = 0; n < n_fast; ++n) s[n] = std::sin(omega * static_cast<double>(n));
    return s;
}

/// N x M contribution of a single component.
inline Eigen::MatrixXd component_matrix(const SinusoidComponent& c, Eigen::Index n_fast)
{
    const Eigen::VectorXd cs = cos_column(c.omega, n_fast);
    const Eigen::VectorXd sn = sin_column(c.omega, n_fast);
    return cs * c.a.transpose() + sn * c.b.transpose();
}

inline Eigen::MatrixXd synthesize_components(const std::vector<SinusoidComponent>& comps,
                                             Eigen::Index n_fast, Eigen::Index m_slow)
{
    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(n_fast, m_slow);
    for (const auto& c : comps) r += component_matrix(c, n_fast);
    return r;
}

} // namespace onebit
