#include "mhsic/kernels.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "mhsic/errors.hpp"
#include "mhsic/rng.hpp"

namespace mhsic {

namespace {

// Above this dimension squared L2 distances come from a matrix product
// (|a|^2 + |b|^2 - 2 a.b) instead of a per-pair loop.
constexpr Index kDirectDimMax = 32;

double squared_l2(const double* a, const double* b, Index dim) {
    double acc = 0.0;
    for (Index t = 0; t < dim; ++t) {
        const double diff = a[t] - b[t];
        acc += diff * diff;
    }
    return acc;
}

double l1(const double* a, const double* b, Index dim) {
    double acc = 0.0;
    for (Index t = 0; t < dim; ++t) {
        acc += std::abs(a[t] - b[t]);
    }
    return acc;
}

double distance(DistanceNorm norm, const double* a, const double* b, Index dim) {
    return norm == DistanceNorm::L2 ? std::sqrt(squared_l2(a, b, dim)) : l1(a, b, dim);
}

void require_resolved(const KernelSpec& spec) {
    if (!(spec.bandwidth > 0.0) || !std::isfinite(spec.bandwidth)) {
        throw std::invalid_argument("kernel bandwidth must be a positive finite number (resolve median bandwidths first)");
    }
}

// exp(x) for x <= 0, returning 0 below -708. Branch-free so that loops over
// it vectorise, and free of libm so that a value never depends on whether it
// was computed in a vector lane or a scalar tail. Max error about 1 ulp.
[[gnu::always_inline]] inline double exp_nonpositive(double x) {
    constexpr double log2e = 1.4426950408889634;
    constexpr double ln2_hi = 6.93147180369123816490e-01;
    constexpr double ln2_lo = 1.90821492927058770002e-10;
    constexpr double shifter = 0x1.8p52;
    const double keep = x < -708.0 ? 0.0 : 1.0;
    x = std::max(x, -708.0);
    const double shifted = x * log2e + shifter;
    const auto n = static_cast<std::int64_t>(std::bit_cast<std::uint64_t>(shifted) -
                                             std::bit_cast<std::uint64_t>(shifter));
    const double kd = shifted - shifter;
    const double r = (x - kd * ln2_hi) - kd * ln2_lo;
    double p = 1.0 / 6227020800.0;
    p = p * r + 1.0 / 479001600.0;
    p = p * r + 1.0 / 39916800.0;
    p = p * r + 1.0 / 3628800.0;
    p = p * r + 1.0 / 362880.0;
    p = p * r + 1.0 / 40320.0;
    p = p * r + 1.0 / 5040.0;
    p = p * r + 1.0 / 720.0;
    p = p * r + 1.0 / 120.0;
    p = p * r + 1.0 / 24.0;
    p = p * r + 1.0 / 6.0;
    p = p * r + 0.5;
    p = p * r + 1.0;
    p = p * r + 1.0;
    const double scale = std::bit_cast<double>(static_cast<std::uint64_t>(n + 1023) << 52);
    return p * scale * keep;
}

// Maps the kernel's "raw distance" (squared L2 for Gaussian, L1 for Laplace)
// to the kernel value.
struct KernelProfile {
    double scale;
    double operator()(double raw) const { return exp_nonpositive(-raw * scale); }
};

KernelProfile profile(const KernelSpec& spec) {
    if (spec.family == KernelFamily::Gaussian) {
        return {1.0 / (2.0 * spec.bandwidth * spec.bandwidth)};
    }
    return {1.0 / spec.bandwidth};
}

double raw_distance(const KernelSpec& spec, const double* a, const double* b, Index dim) {
    return spec.family == KernelFamily::Gaussian ? squared_l2(a, b, dim) : l1(a, b, dim);
}

bool use_product_route(const KernelSpec& spec, Index dim) {
    return spec.family == KernelFamily::Gaussian && dim > kDirectDimMax;
}

void fill_lower_and_mirror(Matrix& out) {
    constexpr Index block = 64;
    const Index n = out.rows();
    for (Index bi = 0; bi < n; bi += block) {
        for (Index bj = 0; bj <= bi; bj += block) {
            const Index i_end = std::min(bi + block, n);
            for (Index i = bi; i < i_end; ++i) {
                const Index j_end = std::min({bj + block, i, n});
                for (Index j = bj; j < j_end; ++j) {
                    out(j, i) = out(i, j);
                }
            }
        }
    }
}

}  // namespace

void require_symmetric(const GramMatrix& k, std::string_view what) {
    if (k.rows() != k.cols()) {
        throw NotSymmetric(std::string(what) + ": matrix is not square");
    }
    if (k.symmetric || k.rows() == 0) {
        return;
    }
    const double scale = 1.0 + k.entries.cwiseAbs().maxCoeff();
    for (Index i = 0; i < k.rows(); ++i) {
        for (Index j = 0; j < i; ++j) {
            if (std::abs(k(i, j) - k(j, i)) > 1e-12 * scale) {
                throw NotSymmetric(std::string(what) + ": matrix is not symmetric");
            }
        }
    }
}

std::string_view to_string(KernelFamily family) {
    return family == KernelFamily::Gaussian ? "gaussian" : "laplace";
}

std::string_view to_string(BandwidthSource source) {
    switch (source) {
        case BandwidthSource::Fixed: return "fixed";
        case BandwidthSource::MedianFull: return "median_full";
        case BandwidthSource::MedianFirstHalf: return "median_first_half";
    }
    return "unknown";
}

KernelSpec KernelSpec::fixed(KernelFamily family, double bandwidth) {
    return {family, bandwidth, BandwidthSource::Fixed};
}

KernelSpec KernelSpec::median(KernelFamily family, BandwidthSource source) {
    if (source == BandwidthSource::Fixed) {
        throw std::invalid_argument("KernelSpec::median needs a median bandwidth source");
    }
    return {family, 0.0, source};
}

double median_heuristic(const Sample& sample, DistanceNorm norm, std::uint64_t seed) {
    const Index n = sample.rows();
    if (n < 2) {
        throw DegenerateSample("median heuristic needs at least two observations");
    }
    const Index dim = sample.cols();

    std::vector<Index> rows(static_cast<std::size_t>(n));
    std::iota(rows.begin(), rows.end(), Index{0});
    if (n > kMedianSubsampleCap) {
        // Partial Fisher-Yates: the first cap entries become a uniform subset.
        Rng rng(derive_seed(seed, {stream_tag("median-subsample")}));
        for (Index i = 0; i < kMedianSubsampleCap; ++i) {
            const auto j = i + static_cast<Index>(rng.below(static_cast<std::uint64_t>(n - i)));
            std::swap(rows[static_cast<std::size_t>(i)], rows[static_cast<std::size_t>(j)]);
        }
        rows.resize(static_cast<std::size_t>(kMedianSubsampleCap));
        std::sort(rows.begin(), rows.end());
    }

    const std::size_t count = rows.size();
    std::vector<double> distances;
    distances.reserve(count * (count - 1) / 2);
    for (std::size_t i = 1; i < count; ++i) {
        const double* a = sample.row(rows[i]).data();
        for (std::size_t j = 0; j < i; ++j) {
            distances.push_back(distance(norm, a, sample.row(rows[j]).data(), dim));
        }
    }

    const std::size_t pairs = distances.size();
    const std::size_t k = pairs % 2 == 0 ? pairs / 2 - 1 : pairs / 2;
    std::nth_element(distances.begin(), distances.begin() + static_cast<std::ptrdiff_t>(k), distances.end());
    const double median = distances[k];
    if (!(median > 0.0)) {
        const bool all_zero = std::all_of(distances.begin(), distances.end(), [](double v) { return v == 0.0; });
        throw DegenerateSample(all_zero ? "all pairwise distances are zero"
                                        : "median pairwise distance is zero (too many tied observations)");
    }
    return median;
}

KernelSpec resolve_bandwidth(const KernelSpec& spec, const Sample& sample, std::uint64_t seed) {
    KernelSpec out = spec;
    switch (spec.source) {
        case BandwidthSource::Fixed:
            require_resolved(spec);
            break;
        case BandwidthSource::MedianFull:
            out.bandwidth = median_heuristic(sample, spec.norm(), seed);
            break;
        case BandwidthSource::MedianFirstHalf: {
            const Index m = sample.rows() / 2;
            out.bandwidth = median_heuristic(sample.topRows(m), spec.norm(), seed);
            break;
        }
    }
    return out;
}

double kernel_value(const KernelSpec& spec, const double* a, const double* b, Index dim) {
    require_resolved(spec);
    return profile(spec)(raw_distance(spec, a, b, dim));
}

GramRows::GramRows(const KernelSpec& spec, const Sample& columns)
    : family_(spec.family), scale_((require_resolved(spec), profile(spec).scale)), transposed_(columns.transpose()) {}

bool GramRows::streams(const KernelSpec& spec, Index dim) { return !use_product_route(spec, dim); }

// Each pair is accumulated over coordinates in order, exactly as
// raw_distance does; the coordinate loop is outermost so the pair loop vectorises.
void GramRows::evaluate(const double* query, Index count, double* out) const {
    std::fill(out, out + count, 0.0);
    const bool gaussian = family_ == KernelFamily::Gaussian;
    for (Index t = 0; t < transposed_.rows(); ++t) {
        const double qt = query[t];
        const double* col = transposed_.row(t).data();
        if (gaussian) {
            for (Index j = 0; j < count; ++j) {
                const double diff = qt - col[j];
                out[j] += diff * diff;
            }
        } else {
            for (Index j = 0; j < count; ++j) {
                out[j] += std::abs(qt - col[j]);
            }
        }
    }
    const double scale = scale_;
    for (Index j = 0; j < count; ++j) {
        out[j] = exp_nonpositive(-out[j] * scale);
    }
}

GramMatrix gram(const KernelSpec& spec, const Sample& rows) {
    require_resolved(spec);
    const Index n = rows.rows();
    const Index dim = rows.cols();
    const KernelProfile k = profile(spec);
    GramMatrix out{Matrix(n, n), true};
    Matrix& g = out.entries;

    if (use_product_route(spec, dim)) {
        const Vector norms = rows.rowwise().squaredNorm();
        Matrix inner = Matrix::Zero(n, n);
        inner.selfadjointView<Eigen::Lower>().rankUpdate(rows);
        for (Index i = 0; i < n; ++i) {
            for (Index j = 0; j < i; ++j) {
                const double sq = std::max(0.0, norms(i) + norms(j) - 2.0 * inner(i, j));
                g(i, j) = k(sq);
            }
        }
    } else {
        const GramRows source(spec, rows);
        for (Index i = 1; i < n; ++i) {
            source.evaluate(rows.row(i).data(), i, g.row(i).data());
        }
    }
    for (Index i = 0; i < n; ++i) {
        g(i, i) = 1.0;
    }
    fill_lower_and_mirror(g);
    return out;
}

GramMatrix gram(const KernelSpec& spec, const Sample& rows_a, const Sample& rows_b) {
    if (&rows_a == &rows_b) {
        return gram(spec, rows_a);
    }
    if (rows_a.cols() != rows_b.cols()) {
        throw DimensionMismatch("gram: samples have different ambient dimensions (" + std::to_string(rows_a.cols()) +
                                " vs " + std::to_string(rows_b.cols()) + ")");
    }
    require_resolved(spec);
    const Index na = rows_a.rows();
    const Index nb = rows_b.rows();
    const Index dim = rows_a.cols();
    const KernelProfile k = profile(spec);
    GramMatrix out{Matrix(na, nb), false};
    Matrix& g = out.entries;

    if (use_product_route(spec, dim)) {
        const Vector norms_a = rows_a.rowwise().squaredNorm();
        const Vector norms_b = rows_b.rowwise().squaredNorm();
        const Matrix inner = rows_a * rows_b.transpose();
        for (Index i = 0; i < na; ++i) {
            for (Index j = 0; j < nb; ++j) {
                g(i, j) = k(std::max(0.0, norms_a(i) + norms_b(j) - 2.0 * inner(i, j)));
            }
        }
    } else {
        const GramRows source(spec, rows_b);
        for (Index i = 0; i < na; ++i) {
            source.evaluate(rows_a.row(i).data(), nb, g.row(i).data());
        }
    }
    return out;
}

double gram_sum(const KernelSpec& spec, const Sample& rows) {
    const Index n = rows.rows();
    auto total_of = [n](auto row_of) {
        double total = 0.0;
        for (Index i = 0; i < n; ++i) {
            const double* r = row_of(i);
            double row = 0.0;
            for (Index j = 0; j < i; ++j) {
                row += r[j];
            }
            total += 2.0 * row + 1.0;
        }
        return total;
    };
    if (GramRows::streams(spec, rows.cols())) {
        const GramRows source(spec, rows);
        std::vector<double> buffer(static_cast<std::size_t>(n));
        return total_of([&](Index i) {
            source.evaluate(rows.row(i).data(), i, buffer.data());
            return static_cast<const double*>(buffer.data());
        });
    }
    const GramMatrix g = gram(spec, rows);
    return total_of([&](Index i) { return g.entries.row(i).data(); });
}

CenteredGram center_full(const GramMatrix& k) {
    require_symmetric(k, "center_full");
    const Index n = k.rows();
    if (n < 2) {
        throw std::invalid_argument("center_full: need at least two observations");
    }
    Vector row_mean(n);
    for (Index i = 0; i < n; ++i) {
        double acc = 0.0;
        for (Index j = 0; j < n; ++j) {
            acc += k(i, j);
        }
        row_mean(i) = acc / static_cast<double>(n);
    }
    double grand = 0.0;
    for (Index i = 0; i < n; ++i) {
        grand += row_mean(i);
    }
    grand /= static_cast<double>(n);

    CenteredGram out{Matrix(n, n), CenteringScheme::FullSample};
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j <= i; ++j) {
            out.entries(i, j) = k(i, j) - row_mean(i) - row_mean(j) + grand;
        }
    }
    fill_lower_and_mirror(out.entries);
    return out;
}

CenteredGram center_split(const GramMatrix& k22, const GramMatrix& k12, double k11_mean) {
    require_symmetric(k22, "center_split(K22)");
    const Index n2 = k22.rows();
    const Index m = k12.rows();
    if (k12.cols() != n2) {
        throw DimensionMismatch("center_split: K12 must have as many columns as K22 has rows");
    }
    if (m < 1) {
        throw DimensionMismatch("center_split: first half is empty");
    }
    Vector mu = Vector::Zero(n2);
    for (Index a = 0; a < m; ++a) {
        for (Index j = 0; j < n2; ++j) {
            mu(j) += k12(a, j);
        }
    }
    mu /= static_cast<double>(m);

    CenteredGram out{Matrix(n2, n2), CenteringScheme::FirstHalf};
    for (Index i = 0; i < n2; ++i) {
        for (Index j = 0; j <= i; ++j) {
            out.entries(i, j) = k22(i, j) - mu(i) - mu(j) + k11_mean;
        }
    }
    fill_lower_and_mirror(out.entries);
    return out;
}

CenteredGram center_split(const GramMatrix& k22, const GramMatrix& k12, const GramMatrix& k11) {
    require_symmetric(k11, "center_split(K11)");
    if (k11.rows() != k12.rows()) {
        throw DimensionMismatch("center_split: K11 and K12 disagree on the first-half size");
    }
    const double m = static_cast<double>(k11.rows());
    return center_split(k22, k12, k11.entries.sum() / (m * m));
}

}  // namespace mhsic
