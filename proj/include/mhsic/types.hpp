#pragma once

#include <Eigen/Core>

#include <vector>

namespace mhsic {

using Index = Eigen::Index;

// Row-major so that one observation is contiguous in memory.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// n x q block of observations of one variable; row i is observation i.
using Sample = Matrix;

/// d row-aligned samples observed jointly (same n, possibly different q).
using MultiSample = std::vector<Sample>;

}  // namespace mhsic
