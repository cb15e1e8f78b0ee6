#include "mhsic/martingale.hpp"

#include <array>
#include <memory>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string>

#include "mhsic/errors.hpp"
#include "mhsic/normal.hpp"
#include "mhsic/rng.hpp"

namespace mhsic {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

// Strict lower-triangle rows of a symmetric kernel matrix, either read from
// a stored matrix or evaluated on demand. Both give the same bits on the
// direct kernel route.
class LowerRows {
public:
    explicit LowerRows(const Matrix& stored) : stored_(&stored), n_(stored.rows()) {}
    LowerRows(const KernelSpec& spec, const Sample& sample)
        : stream_(std::make_shared<GramRows>(spec, sample)), sample_(&sample), n_(sample.rows()) {}

    Index size() const { return n_; }

    /// K(i, j) for j < i; may write into `scratch` (at least i entries).
    const double* row(Index i, double* scratch) const {
        if (stored_) {
            return stored_->row(i).data();
        }
        stream_->evaluate(sample_->row(i).data(), i, scratch);
        return scratch;
    }

    double diagonal(Index i) const { return stored_ ? (*stored_)(i, i) : 1.0; }

private:
    const Matrix* stored_ = nullptr;
    std::shared_ptr<const GramRows> stream_;
    const Sample* sample_ = nullptr;
    Index n_ = 0;
};

// Centring constants and the product sums are carried in long double. Under
// the null T is a small difference of many terms, and double rounding of the
// means alone costs a few digits of T.
using Wide = long double;
using WideVector = std::vector<Wide>;

// A centred kernel matrix left implicit: entry (i, j) is
// K(i, j) - shift(i) - shift(j) + offset.
struct CentredFactor {
    LowerRows rows;
    WideVector shift;
    Wide offset;
};

// Sum of all entries of a symmetric kernel matrix from its lower triangle.
Wide full_sum(const LowerRows& rows) {
    std::vector<double> scratch(static_cast<std::size_t>(rows.size()));
    Wide total = 0.0L;
    for (Index i = 0; i < rows.size(); ++i) {
        const double* r = rows.row(i, scratch.data());
        Wide acc = 0.0L;
        for (Index j = 0; j < i; ++j) {
            acc += r[j];
        }
        total += 2.0L * acc + rows.diagonal(i);
    }
    return total;
}

// Full-sample centring: shift = row means, offset = grand mean. Row sums are
// assembled from the lower triangle (row part plus column part).
CentredFactor full_factor(LowerRows rows) {
    const Index n = rows.size();
    WideVector sums(static_cast<std::size_t>(n), 0.0L);
    std::vector<double> scratch(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        const double* r = rows.row(i, scratch.data());
        Wide acc = 0.0L;
        for (Index j = 0; j < i; ++j) {
            acc += r[j];
            sums[static_cast<std::size_t>(j)] += r[j];
        }
        sums[static_cast<std::size_t>(i)] += acc + rows.diagonal(i);
    }
    Wide grand = 0.0L;
    for (Wide& v : sums) {
        v /= static_cast<Wide>(n);
        grand += v;
    }
    return {std::move(rows), std::move(sums), grand / static_cast<Wide>(n)};
}

// Accumulates the column means of the cross block K12 one first-half row at a time.
class ColumnMeans {
public:
    explicit ColumnMeans(Index n2) : sums_(static_cast<std::size_t>(n2), 0.0L) {}

    void add(const double* row) {
        for (std::size_t j = 0; j < sums_.size(); ++j) {
            sums_[j] += row[j];
        }
        ++rows_;
    }

    WideVector means() const {
        if (rows_ < 1) {
            throw DimensionMismatch("center_split: first half is empty");
        }
        WideVector out = sums_;
        for (Wide& v : out) {
            v /= static_cast<Wide>(rows_);
        }
        return out;
    }

private:
    WideVector sums_;
    Index rows_ = 0;
};

// Studentised lower-triangular sum of the entrywise product of the factors,
// centring each entry on the fly.
MartingaleSummary centred_product_summary(std::span<const CentredFactor> factors) {
    if (factors.empty()) {
        throw std::invalid_argument("no variables given");
    }
    const Index n = factors.front().rows.size();
    for (const CentredFactor& f : factors) {
        if (f.rows.size() != n || static_cast<Index>(f.shift.size()) != n) {
            throw DimensionMismatch("centred matrices disagree in size");
        }
    }
    if (n < 2) {
        throw TooFewObservations("martingale sum needs at least two observations");
    }
    const std::size_t d = factors.size();
    std::vector<std::vector<double>> scratch(d, std::vector<double>(static_cast<std::size_t>(n)));
    std::vector<const double*> rows(d);
    std::vector<Wide> row_shift(d);
    // offset - shift(j) per column, so an entry is (K - shift(i)) + column(j).
    std::vector<WideVector> columns(d);
    std::vector<const Wide*> column(d);
    for (std::size_t k = 0; k < d; ++k) {
        columns[k] = factors[k].shift;
        for (Wide& v : columns[k]) {
            v = factors[k].offset - v;
        }
        column[k] = columns[k].data();
    }
    std::vector<double> u;
    u.reserve(static_cast<std::size_t>(n - 1));
    for (Index i = 1; i < n; ++i) {
        for (std::size_t k = 0; k < d; ++k) {
            rows[k] = factors[k].rows.row(i, scratch[k].data());
            row_shift[k] = factors[k].shift[static_cast<std::size_t>(i)];
        }
        Wide acc = 0.0L;
        for (Index j = 0; j < i; ++j) {
            Wide prod = (rows[0][j] - row_shift[0]) + column[0][j];
            for (std::size_t k = 1; k < d; ++k) {
                prod *= (rows[k][j] - row_shift[k]) + column[k][j];
            }
            acc += prod;
        }
        u.push_back(static_cast<double>(acc / static_cast<Wide>(i + 1)));
    }
    return studentize(std::move(u), n);
}

// Full-sample factor for one variable: streamed when the kernel allows it,
// otherwise from a Gram matrix stored in `keep` (which must not reallocate).
CentredFactor full_factor_for(const KernelSpec& spec, const Sample& x, std::vector<GramMatrix>& keep) {
    if (GramRows::streams(spec, x.cols())) {
        return full_factor(LowerRows(spec, x));
    }
    keep.push_back(gram(spec, x));
    return full_factor(LowerRows(keep.back().entries));
}

TestResult finish(Method method, MartingaleSummary summary, double alpha, std::uint64_t seed, Index n, Index m,
                  std::vector<double> bandwidths, Clock::time_point start) {
    TestResult result;
    result.method = method;
    result.statistic = summary.eta;
    result.threshold = normal_quantile(1.0 - alpha);
    result.alpha = alpha;
    result.reject = summary.eta > result.threshold;
    result.summary = std::move(summary);
    result.seed = seed;
    result.n = n;
    result.m = m;
    result.bandwidths = std::move(bandwidths);
    result.runtime_seconds = seconds_since(start);
    return result;
}

void require_kernel_count(const MultiSample& xs, std::span<const KernelSpec> kernels) {
    if (xs.size() < 2) {
        throw std::invalid_argument("joint-independence tests need at least two variables");
    }
    if (kernels.size() != xs.size()) {
        throw std::invalid_argument("expected one kernel per variable (" + std::to_string(xs.size()) + "), got " +
                                    std::to_string(kernels.size()));
    }
}

}  // namespace

std::string_view to_string(Method method) {
    switch (method) {
        case Method::MHsic: return "mhsic";
        case Method::MdHsic: return "mdhsic";
        case Method::NaiveMdHsic: return "naive-mdhsic";
        case Method::HsicPerm: return "hsic-perm";
        case Method::DHsicPerm: return "dhsic-perm";
    }
    return "unknown";
}

std::optional<Method> parse_method(std::string_view name) {
    for (Method m : {Method::MHsic, Method::MdHsic, Method::NaiveMdHsic, Method::HsicPerm, Method::DHsicPerm}) {
        if (to_string(m) == name) {
            return m;
        }
    }
    return std::nullopt;
}

void require_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw std::invalid_argument("alpha must lie strictly between 0 and 1");
    }
}

Index common_rows(const MultiSample& xs) {
    if (xs.empty()) {
        throw std::invalid_argument("no variables given");
    }
    const Index n = xs.front().rows();
    for (std::size_t k = 1; k < xs.size(); ++k) {
        if (xs[k].rows() != n) {
            throw DimensionMismatch("variables are not row-aligned: variable 1 has " + std::to_string(n) +
                                    " rows, variable " + std::to_string(k + 1) + " has " +
                                    std::to_string(xs[k].rows()));
        }
    }
    return n;
}

MartingaleSummary studentize(std::vector<double> inner_sums, Index n_effective) {
    // T is often tiny next to sum |u_i| under the null; wide accumulation keeps
    // the cancellation from costing digits. O(n), so the cost is nil.
    long double total = 0.0L;
    long double total_sq = 0.0L;
    for (double u : inner_sums) {
        total += u;
        total_sq += static_cast<long double>(u) * u;
    }
    const long double n = static_cast<long double>(n_effective);
    MartingaleSummary s;
    s.statistic = static_cast<double>(total / n);
    s.sigma = static_cast<double>(std::sqrt(total_sq / (n * n)));
    if (!(s.sigma > 0.0)) {
        throw DegenerateVariance("studentising scale is zero (constant or degenerate input)");
    }
    s.eta = s.statistic / s.sigma;
    s.inner_sums = std::move(inner_sums);
    s.n_effective = n_effective;
    return s;
}

MartingaleSummary studentized_lower_triangular(const Matrix& scores, Index weight_offset) {
    const Index n = scores.rows();
    if (scores.cols() != n) {
        throw DimensionMismatch("score matrix must be square");
    }
    if (n < 2) {
        throw TooFewObservations("martingale sum needs at least two observations");
    }
    std::vector<double> u;
    u.reserve(static_cast<std::size_t>(n - 1));
    for (Index i = 1; i < n; ++i) {
        const double* row = scores.row(i).data();
        double acc = 0.0;
        for (Index j = 0; j < i; ++j) {
            acc += row[j];
        }
        u.push_back(acc / static_cast<double>(i + 1 + weight_offset));
    }
    return studentize(std::move(u), n);
}

MartingaleSummary studentized_hadamard(std::span<const Matrix* const> factors) {
    if (factors.empty()) {
        throw std::invalid_argument("studentized_hadamard: no factors");
    }
    const Index n = factors.front()->rows();
    for (const Matrix* f : factors) {
        if (f->rows() != n || f->cols() != n) {
            throw DimensionMismatch("studentized_hadamard: factors must be square and equally sized");
        }
    }
    if (n < 2) {
        throw TooFewObservations("martingale sum needs at least two observations");
    }
    std::vector<double> u;
    u.reserve(static_cast<std::size_t>(n - 1));
    if (factors.size() == 2) {
        const Matrix& a = *factors[0];
        const Matrix& b = *factors[1];
        for (Index i = 1; i < n; ++i) {
            const double* ra = a.row(i).data();
            const double* rb = b.row(i).data();
            double acc = 0.0;
            for (Index j = 0; j < i; ++j) {
                acc += ra[j] * rb[j];
            }
            u.push_back(acc / static_cast<double>(i + 1));
        }
    } else {
        for (Index i = 1; i < n; ++i) {
            double acc = 0.0;
            for (Index j = 0; j < i; ++j) {
                double prod = (*factors[0])(i, j);
                for (std::size_t k = 1; k < factors.size(); ++k) {
                    prod *= (*factors[k])(i, j);
                }
                acc += prod;
            }
            u.push_back(acc / static_cast<double>(i + 1));
        }
    }
    return studentize(std::move(u), n);
}

MartingaleSummary mhsic_summary(const GramMatrix& kx, const GramMatrix& ky) {
    if (kx.rows() != ky.rows()) {
        throw DimensionMismatch("mhsic: Gram matrices differ in size");
    }
    require_symmetric(kx, "mhsic(K_X)");
    require_symmetric(ky, "mhsic(K_Y)");
    const std::array<CentredFactor, 2> factors{full_factor(LowerRows(kx.entries)),
                                               full_factor(LowerRows(ky.entries))};
    return centred_product_summary(factors);
}

MartingaleSummary split_martingale_summary(std::span<const SplitBlocks> blocks) {
    std::vector<CentredFactor> factors;
    for (const SplitBlocks& b : blocks) {
        require_symmetric(b.k22, "center_split(K22)");
        if (b.k12.cols() != b.k22.rows()) {
            throw DimensionMismatch("center_split: K12 must have as many columns as K22 has rows");
        }
        ColumnMeans mu(b.k22.rows());
        for (Index a = 0; a < b.k12.rows(); ++a) {
            mu.add(b.k12.entries.row(a).data());
        }
        factors.push_back({LowerRows(b.k22.entries), mu.means(), b.k11_mean});
    }
    return centred_product_summary(factors);
}

MartingaleSummary naive_product_summary(std::span<const GramMatrix> grams) {
    std::vector<CentredFactor> factors;
    for (const GramMatrix& g : grams) {
        require_symmetric(g, "naive product");
        factors.push_back(full_factor(LowerRows(g.entries)));
    }
    return centred_product_summary(factors);
}

TestResult mhsic_test(const Sample& x, const Sample& y, double alpha, const KernelSpec& kx, const KernelSpec& ky,
                      std::uint64_t seed) {
    const auto start = Clock::now();
    require_alpha(alpha);
    if (x.rows() != y.rows()) {
        throw DimensionMismatch("mhsic: x has " + std::to_string(x.rows()) + " rows but y has " +
                                std::to_string(y.rows()));
    }
    if (x.rows() < 2) {
        throw TooFewObservations("mhsic requires at least two observations");
    }
    const KernelSpec rx = resolve_bandwidth(kx, x, derive_seed(seed, {stream_tag("bandwidth"), 0}));
    const KernelSpec ry = resolve_bandwidth(ky, y, derive_seed(seed, {stream_tag("bandwidth"), 1}));
    std::vector<GramMatrix> keep;
    keep.reserve(2);
    const std::array<CentredFactor, 2> factors{full_factor_for(rx, x, keep), full_factor_for(ry, y, keep)};
    MartingaleSummary summary = centred_product_summary(factors);
    return finish(Method::MHsic, std::move(summary), alpha, seed, x.rows(), 0, {rx.bandwidth, ry.bandwidth}, start);
}

TestResult mdhsic_test(const MultiSample& xs, double alpha, std::span<const KernelSpec> kernels, std::uint64_t seed) {
    const auto start = Clock::now();
    require_alpha(alpha);
    require_kernel_count(xs, kernels);
    const Index n = common_rows(xs);
    if (n < 6) {
        throw TooFewObservations("mdhsic requires n >= 6 observations (got " + std::to_string(n) + ")");
    }
    for (std::size_t k = 0; k < kernels.size(); ++k) {
        if (kernels[k].source == BandwidthSource::MedianFull) {
            throw BandwidthLeak("mdhsic: kernel " + std::to_string(k + 1) +
                                " uses a full-sample median bandwidth; bandwidths must depend on the first half only");
        }
    }

    const Index m = n / 2;
    const Index n2 = n - m;
    std::vector<double> bandwidths;
    std::vector<Sample> second_halves;
    std::vector<GramMatrix> keep;
    second_halves.reserve(xs.size());
    keep.reserve(xs.size());
    std::vector<CentredFactor> factors;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        const KernelSpec spec =
            resolve_bandwidth(kernels[k], xs[k], derive_seed(seed, {stream_tag("bandwidth"), k}));
        bandwidths.push_back(spec.bandwidth);
        const Sample first = xs[k].topRows(m);
        second_halves.push_back(xs[k].bottomRows(n2));
        const Sample& second = second_halves.back();
        ColumnMeans mu(n2);
        const Wide m2 = static_cast<Wide>(m) * static_cast<Wide>(m);
        if (GramRows::streams(spec, xs[k].cols())) {
            const Wide k11_mean = full_sum(LowerRows(spec, first)) / m2;
            const GramRows cross(spec, second);
            std::vector<double> row(static_cast<std::size_t>(n2));
            for (Index a = 0; a < m; ++a) {
                cross.evaluate(first.row(a).data(), n2, row.data());
                mu.add(row.data());
            }
            factors.push_back({LowerRows(spec, second), mu.means(), k11_mean});
        } else {
            const Wide k11_mean = full_sum(LowerRows(gram(spec, first).entries)) / m2;
            const GramMatrix k12 = gram(spec, first, second);
            for (Index a = 0; a < m; ++a) {
                mu.add(k12.entries.row(a).data());
            }
            keep.push_back(gram(spec, second));
            factors.push_back({LowerRows(keep.back().entries), mu.means(), k11_mean});
        }
    }
    MartingaleSummary summary = centred_product_summary(factors);
    return finish(Method::MdHsic, std::move(summary), alpha, seed, n, m, std::move(bandwidths), start);
}

TestResult naive_mdhsic_test(const MultiSample& xs, double alpha, std::span<const KernelSpec> kernels,
                             std::uint64_t seed) {
    const auto start = Clock::now();
    require_alpha(alpha);
    require_kernel_count(xs, kernels);
    const Index n = common_rows(xs);
    if (n < 2) {
        throw TooFewObservations("naive-mdhsic requires at least two observations");
    }
    std::vector<double> bandwidths;
    std::vector<GramMatrix> keep;
    keep.reserve(xs.size());
    std::vector<CentredFactor> factors;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        const KernelSpec spec =
            resolve_bandwidth(kernels[k], xs[k], derive_seed(seed, {stream_tag("bandwidth"), k}));
        bandwidths.push_back(spec.bandwidth);
        factors.push_back(full_factor_for(spec, xs[k], keep));
    }
    MartingaleSummary summary = centred_product_summary(factors);
    return finish(Method::NaiveMdHsic, std::move(summary), alpha, seed, n, 0, std::move(bandwidths), start);
}

}  // namespace mhsic
