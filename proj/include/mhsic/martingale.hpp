#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "mhsic/kernels.hpp"
#include "mhsic/types.hpp"

namespace mhsic {

enum class Method { MHsic, MdHsic, NaiveMdHsic, HsicPerm, DHsicPerm };

std::string_view to_string(Method method);
std::optional<Method> parse_method(std::string_view name);

/// Lower-triangular self-normalised martingale sum.
///
/// For a pairwise score matrix P on n_effective observations:
///   u_i   = (1/i) sum_{j<i} P_ij,   i = 2..n
///   T     = (1/n) sum_i u_i
///   sigma = sqrt((1/n^2) sum_i u_i^2)
///   eta   = T / sigma
/// inner_sums holds u_2..u_n (so it has n - 1 entries).
struct MartingaleSummary {
    double statistic = 0.0;  // T
    double sigma = 0.0;
    double eta = 0.0;
    std::vector<double> inner_sums;
    Index n_effective = 0;
};

struct TestResult {
    Method method = Method::MHsic;
    /// Present for the martingale tests.
    std::optional<MartingaleSummary> summary;
    /// eta for martingale tests, the observed V-statistic for permutation tests.
    double statistic = 0.0;
    /// z_{1-alpha} for martingale tests. For permutation tests, the replicate
    /// order statistic that the observed statistic must exceed (equivalent to
    /// p <= alpha); +inf when alpha (B + 1) < 1.
    double threshold = 0.0;
    double alpha = 0.05;
    bool reject = false;
    std::optional<double> p_value;
    double runtime_seconds = 0.0;
    std::uint64_t seed = 0;
    Index n = 0;
    /// Size of the centring half for mdhsic, 0 otherwise.
    Index m = 0;
    std::vector<double> bandwidths;
};

/// Turns inner sums u_2..u_n into a summary. Throws DegenerateVariance when sigma is 0.
MartingaleSummary studentize(std::vector<double> inner_sums, Index n_effective);

/// Studentised lower-triangular sum of a square score matrix. Only entries
/// strictly below the diagonal are read. `weight_offset` shifts the 1-based
/// row index used in the 1/i weight.
MartingaleSummary studentized_lower_triangular(const Matrix& scores, Index weight_offset = 0);

/// Same as studentized_lower_triangular applied to the entrywise product of
/// the factors, without forming the product matrix.
MartingaleSummary studentized_hadamard(std::span<const Matrix* const> factors);

/// mHSIC from two Gram matrices: full-sample centring of both, then the
/// studentised lower-triangular sum of their entrywise product.
MartingaleSummary mhsic_summary(const GramMatrix& kx, const GramMatrix& ky);

/// Kernel blocks of one variable under the prefix split: first half S1
/// (m rows), second half S2 (n2 rows).
struct SplitBlocks {
    GramMatrix k22;   // n2 x n2
    GramMatrix k12;   // m x n2
    double k11_mean;  // grand mean of the m x m first-half Gram
};

/// Split-martingale statistic: each variable's second-half Gram is centred
/// around its first-half mean embedding, the d centred matrices are
/// multiplied entrywise, and the product is studentised over S2.
MartingaleSummary split_martingale_summary(std::span<const SplitBlocks> blocks);

/// Full-sample-centred d-fold product. Not calibrated for d >= 3 at small n;
/// provided as a diagnostic only.
MartingaleSummary naive_product_summary(std::span<const GramMatrix> grams);

/// Permutation-free independence test of X and Y. One-sided: rejects iff
/// eta > z_{1-alpha}. Median bandwidths are taken on the full sample; `seed`
/// only drives median subsampling.
TestResult mhsic_test(const Sample& x, const Sample& y, double alpha, const KernelSpec& kx, const KernelSpec& ky,
                      std::uint64_t seed = 0);

/// Split-martingale joint-independence test. Requires n >= 6 and d >= 2.
/// Bandwidths must be Fixed or MedianFirstHalf; MedianFull throws
/// BandwidthLeak because it would let S2 influence the centring kernel.
TestResult mdhsic_test(const MultiSample& xs, double alpha, std::span<const KernelSpec> kernels,
                       std::uint64_t seed = 0);

/// Diagnostic: the direct d-fold product with full-sample centring.
/// Not a recommended test; its type-I error inflates once d is comparable to sqrt(n).
TestResult naive_mdhsic_test(const MultiSample& xs, double alpha, std::span<const KernelSpec> kernels,
                             std::uint64_t seed = 0);

/// Checks row alignment and returns the common row count. Throws DimensionMismatch.
Index common_rows(const MultiSample& xs);

void require_alpha(double alpha);

}  // namespace mhsic
