#pragma once

// Literal, slow transcriptions of the defining formulas. They share no code
// path with the library beyond the Matrix type.

#include <cstdint>
#include <functional>
#include <vector>

#include "mhsic/types.hpp"

namespace oracle {

using mhsic::Index;
using mhsic::Matrix;

/// H = I - (1/n) 11^T.
Matrix centering_matrix(Index n);

/// H K H by explicit matrix products.
Matrix explicit_center(const Matrix& k);

struct Martingale {
    double t = 0.0;
    double sigma = 0.0;
    double eta = 0.0;
};

/// Lower-triangular studentised sum with 1-based indices:
///   T = (1/n) sum_{i=2}^n (1/i) sum_{j=1}^{i-1} P_ij, sigma^2 = (1/n^2) sum_i (...)^2.
Martingale lower_triangular(const std::function<double(Index, Index)>& p, Index n);

/// mHSIC from raw Gram matrices (explicit H products).
Martingale mhsic(const Matrix& kx, const Matrix& ky);

/// Direct d-fold product with explicit H K H.
Martingale naive_product(const std::vector<Matrix>& ks);

/// Split-martingale statistic from full n x n Gram matrices: first-half
/// centring written out term by term, global indices i = m+2..n,
/// j = m+1..i-1, weights 1/(i-m), normaliser n-m.
Martingale split_martingale(const std::vector<Matrix>& ks);

/// dHSIC V-statistic as literal sums over index tuples: n^2 + n^{2d} + n^{d+1} terms.
double dhsic_bruteforce(const std::vector<Matrix>& ks);

/// HSIC V-statistic (1/n^2) tr(K_X H K_Y H) with explicit products.
double hsic_trace_explicit(const Matrix& kx, const Matrix& ky);

/// Centred kernel around the mean feature of the first m rows, evaluated on
/// explicit feature vectors (rows of `features`): returns the (n-m) x (n-m)
/// matrix of <phi_i - mu, phi_j - mu> for i, j in the second half.
Matrix feature_space_split_center(const Matrix& features, Index m);

/// Median of all pairwise distances (lower median for even counts), full sort.
double median_pairwise(const Matrix& x, bool l1);

/// Linear kernel Gram block between row sets.
Matrix linear_gram(const Matrix& a, const Matrix& b);

/// Inhomogeneous quadratic kernel (1 + <a, b>)^2.
Matrix quadratic_gram(const Matrix& a, const Matrix& b);

/// Explicit features of the quadratic kernel for 1-D inputs: (1, sqrt2 x, x^2).
Matrix quadratic_features_1d(const Matrix& x);

/// Random symmetric PSD matrix: A A^T with A n x r Gaussian.
Matrix random_psd(Index n, Index rank, std::uint64_t seed);

}  // namespace oracle
