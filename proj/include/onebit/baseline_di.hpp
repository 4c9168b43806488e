#pragma once

#include <Eigen/Dense>

#include "errors.hpp"
#include "signal_model.hpp"

namespace onebit {

/// Digital integration: counts the +1 comparisons along slow time and maps
/// the count back onto the threshold ramp.
inline Eigen::VectorXd digital_integration(const SignedMatrix& y, const ThresholdMatrix& h)
{
    detail::require_shape(y.n_fast() == h.n_fast() && y.m_slow() == h.m_slow(),
                          "digital_integration: shape mismatch");
    const double dh = h.step();
    const Eigen::VectorXd count = ((y.values().array() + 1.0) * 0.5).rowwise().sum();
    return (dh * count.array() - h.h() - dh).matrix();
}

} // namespace onebit
