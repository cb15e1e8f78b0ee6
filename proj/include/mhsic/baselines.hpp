#pragma once

#include <cstdint>
#include <span>

#include "mhsic/kernels.hpp"
#include "mhsic/martingale.hpp"
#include "mhsic/types.hpp"

namespace mhsic {

struct PermutationConfig {
    int permutations = 200;
    std::uint64_t seed = 0;
};

/// Biased HSIC V-statistic (1/n^2) tr(K_X H K_Y H), evaluated as
/// (1/n^2) sum_ij (H K_X H)_ij (K_Y)_ij over the lower triangle.
double hsic_v(const GramMatrix& kx, const GramMatrix& ky);

/// (1/n^2) sum_ij (H K_X H)_ij (H K_Y H)_ij. Algebraically equal to hsic_v.
double hsic_v_elementwise(const GramMatrix& kx, const GramMatrix& ky);

/// dHSIC V-statistic in its O(d n^2) three-term form:
///   (1/n^2) sum_ij prod_k K_k,ij
///   + prod_k (1/n^2) sum_ij K_k,ij
///   - (2/n) sum_i prod_k (1/n) sum_j K_k,ij
double dhsic_v(std::span<const GramMatrix> grams);

/// hsic_v with the rows and columns of K_Y reindexed by `perm`, i.e. the
/// statistic of (X_i, Y_perm[i]). `kx_centered` is H K_X H.
double hsic_v_permuted(const Matrix& kx_centered, const Matrix& ky, std::span<const Index> perm);

enum class PermutationStatistic { Hsic, DHsic };

/// Permutation-calibrated test. Bandwidths are resolved once on the observed
/// data and frozen. Each replicate b draws its own stream from (seed, b) and
/// independently permutes the rows of every variable except the first;
/// permutations reindex cached Gram matrices. p = (1 + #{t_b >= t_0}) / (B + 1),
/// reject iff p <= alpha.
TestResult permutation_test(const MultiSample& xs, PermutationStatistic statistic,
                            std::span<const KernelSpec> kernels, const PermutationConfig& config, double alpha);

}  // namespace mhsic
