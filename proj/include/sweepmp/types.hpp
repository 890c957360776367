#pragma once

#include <Eigen/Core>

namespace sweepmp {

// State, control and adjoint vectors are small (n <= 8); the fixed upper
// bound keeps them off the heap inside the integrators.
inline constexpr int kMaxDim = 8;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

}  // namespace sweepmp
