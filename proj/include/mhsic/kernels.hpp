#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

#include "mhsic/types.hpp"

namespace mhsic {

enum class KernelFamily { Gaussian, Laplace };

/// Where a bandwidth comes from. MedianFirstHalf looks only at the first
/// floor(n/2) rows, which is what the split-martingale test requires.
enum class BandwidthSource { Fixed, MedianFull, MedianFirstHalf };

enum class DistanceNorm { L2, L1 };

std::string_view to_string(KernelFamily family);
std::string_view to_string(BandwidthSource source);

/// Translation-invariant kernel bounded by 1:
///   Gaussian  k(x, x') = exp(-|x - x'|_2^2 / (2 h^2))
///   Laplace   k(x, x') = exp(-|x - x'|_1 / h)
/// A median-sourced spec carries bandwidth 0 until resolve_bandwidth fills it in.
struct KernelSpec {
    KernelFamily family = KernelFamily::Gaussian;
    double bandwidth = 0.0;
    BandwidthSource source = BandwidthSource::Fixed;

    static KernelSpec fixed(KernelFamily family, double bandwidth);
    static KernelSpec median(KernelFamily family, BandwidthSource source = BandwidthSource::MedianFull);

    bool resolved() const { return bandwidth > 0.0; }
    DistanceNorm norm() const { return family == KernelFamily::Gaussian ? DistanceNorm::L2 : DistanceNorm::L1; }
};

struct GramMatrix {
    Matrix entries;
    bool symmetric = false;

    Index rows() const { return entries.rows(); }
    Index cols() const { return entries.cols(); }
    double operator()(Index i, Index j) const { return entries(i, j); }
};

enum class CenteringScheme { FullSample, FirstHalf };

struct CenteredGram {
    Matrix entries;
    CenteringScheme scheme = CenteringScheme::FullSample;

    Index size() const { return entries.rows(); }
    double operator()(Index i, Index j) const { return entries(i, j); }
};

/// Rows beyond this count are subsampled (seeded) before the median is taken.
inline constexpr Index kMedianSubsampleCap = 2048;

/// Median of pairwise distances over i < j, using the lower median for even
/// pair counts. Samples with more than kMedianSubsampleCap rows are reduced to
/// a seeded uniform subsample of that size first.
/// Throws DegenerateSample when every pairwise distance is zero.
double median_heuristic(const Sample& sample, DistanceNorm norm, std::uint64_t seed);

/// Returns a copy of `spec` with its bandwidth resolved against `sample`.
/// Fixed specs pass through after validation; MedianFirstHalf only reads the
/// first floor(n/2) rows.
KernelSpec resolve_bandwidth(const KernelSpec& spec, const Sample& sample, std::uint64_t seed);

/// Throws NotSymmetric unless `k` is square and symmetric (the `symmetric`
/// flag short-circuits the entrywise check).
void require_symmetric(const GramMatrix& k, std::string_view what);

double kernel_value(const KernelSpec& spec, const double* a, const double* b, Index dim);

/// Rows of a Gram matrix evaluated on demand, so that nothing n x n is stored.
/// On the direct route (see streams()) the values are bit-identical to the
/// corresponding entries of gram().
class GramRows {
public:
    GramRows(const KernelSpec& spec, const Sample& columns);

    Index size() const { return transposed_.cols(); }

    /// out[j] = k(query, column j) for j < count.
    void evaluate(const double* query, Index count, double* out) const;

    /// Whether gram() evaluates this kernel row by row (low dimension or
    /// Laplace) rather than through a matrix product.
    static bool streams(const KernelSpec& spec, Index dim);

private:
    KernelFamily family_;
    double scale_;
    Matrix transposed_;
};

/// Gram matrix of a sample against itself. Symmetric, unit diagonal.
GramMatrix gram(const KernelSpec& spec, const Sample& rows);

/// Cross Gram matrix; `symmetric` is set only when both arguments are the same object.
GramMatrix gram(const KernelSpec& spec, const Sample& rows_a, const Sample& rows_b);

/// Sum of all entries of gram(spec, rows) without materialising it.
double gram_sum(const KernelSpec& spec, const Sample& rows);

/// HKH via the entrywise formula K_ij - r_i - r_j + g, with r the row means and
/// g the grand mean. Requires a symmetric square input.
CenteredGram center_full(const GramMatrix& k);

/// Centring of the second-half Gram K22 around the first-half mean embedding:
///   K22 - 1 mu^T - mu 1^T + nu 11^T,
/// with mu the column means of the cross block K12 (m x n2) and nu the grand
/// mean of K11 (m x m).
CenteredGram center_split(const GramMatrix& k22, const GramMatrix& k12, const GramMatrix& k11);

/// Same as center_split when only the grand mean of K11 is known.
CenteredGram center_split(const GramMatrix& k22, const GramMatrix& k12, double k11_mean);

}  // namespace mhsic
