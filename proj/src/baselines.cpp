#include "mhsic/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "mhsic/errors.hpp"
#include "mhsic/rng.hpp"

namespace mhsic {

namespace {

using Clock = std::chrono::steady_clock;

struct Identity {
    Index operator()(Index i) const { return i; }
};

struct Reindex {
    const Index* perm;
    Index operator()(Index i) const { return perm[i]; }
};

// (1/n^2) sum_ij C_ij K_{p(i) p(j)} for symmetric C and K, summed as
// twice the strict lower triangle plus the diagonal. Both the direct and the
// permuted statistic go through this loop so that reindexing a cached Gram
// matrix and recomputing it from permuted data give bit-identical results.
template <class Map>
double hsic_trace_sum(const Matrix& c, const Matrix& k, Map map) {
    const Index n = c.rows();
    double total = 0.0;
    for (Index i = 0; i < n; ++i) {
        const double* ci = c.row(i).data();
        const double* ki = k.row(map(i)).data();
        double row = 0.0;
        for (Index j = 0; j < i; ++j) {
            row += ci[j] * ki[map(j)];
        }
        total += 2.0 * row + ci[i] * ki[map(i)];
    }
    const double nn = static_cast<double>(n);
    return total / (nn * nn);
}

void require_same_size(std::span<const GramMatrix> grams) {
    if (grams.empty()) {
        throw std::invalid_argument("no Gram matrices given");
    }
    const Index n = grams.front().rows();
    for (const GramMatrix& g : grams) {
        if (g.rows() != n || g.cols() != n) {
            throw DimensionMismatch("Gram matrices must all be n x n with the same n");
        }
    }
}

// Cached per-variable quantities for dHSIC: the Gram matrix, its row means
// and grand mean. All three are invariant (up to reindexing) under a
// permutation of that variable's rows.
struct DhsicCache {
    std::vector<const Matrix*> grams;
    std::vector<Vector> row_means;
    std::vector<double> grand_means;
};

DhsicCache make_cache(std::span<const GramMatrix> grams) {
    DhsicCache cache;
    for (const GramMatrix& g : grams) {
        const Index n = g.rows();
        Vector means(n);
        for (Index i = 0; i < n; ++i) {
            const double* row = g.entries.row(i).data();
            double acc = 0.0;
            for (Index j = 0; j < n; ++j) {
                acc += row[j];
            }
            means(i) = acc / static_cast<double>(n);
        }
        double grand = 0.0;
        for (Index i = 0; i < n; ++i) {
            grand += means(i);
        }
        cache.grams.push_back(&g.entries);
        cache.row_means.push_back(std::move(means));
        cache.grand_means.push_back(grand / static_cast<double>(n));
    }
    return cache;
}

// perms[k] == nullptr means variable k is not permuted.
double dhsic_from_cache(const DhsicCache& cache, std::span<const Index* const> perms) {
    const std::size_t d = cache.grams.size();
    const Index n = cache.grams.front()->rows();
    auto at = [&](std::size_t k, Index i) { return perms[k] ? perms[k][i] : i; };

    std::vector<const double*> rows(d);
    double joint = 0.0;
    for (Index i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < d; ++k) {
            rows[k] = cache.grams[k]->row(at(k, i)).data();
        }
        double row = 0.0;
        for (Index j = 0; j < i; ++j) {
            double prod = rows[0][at(0, j)];
            for (std::size_t k = 1; k < d; ++k) {
                prod *= rows[k][at(k, j)];
            }
            row += prod;
        }
        double diag = rows[0][at(0, i)];
        for (std::size_t k = 1; k < d; ++k) {
            diag *= rows[k][at(k, i)];
        }
        joint += 2.0 * row + diag;
    }
    const double nn = static_cast<double>(n);
    joint /= nn * nn;

    double product_of_marginals = 1.0;
    for (double g : cache.grand_means) {
        product_of_marginals *= g;
    }

    double cross = 0.0;
    for (Index i = 0; i < n; ++i) {
        double prod = 1.0;
        for (std::size_t k = 0; k < d; ++k) {
            prod *= cache.row_means[k](at(k, i));
        }
        cross += prod;
    }
    cross *= 2.0 / nn;

    return joint + product_of_marginals - cross;
}

}  // namespace

double hsic_v(const GramMatrix& kx, const GramMatrix& ky) {
    if (kx.rows() != ky.rows()) {
        throw DimensionMismatch("hsic_v: Gram matrices differ in size");
    }
    require_symmetric(ky, "hsic_v(K_Y)");
    const CenteredGram cx = center_full(kx);
    return hsic_trace_sum(cx.entries, ky.entries, Identity{});
}

double hsic_v_elementwise(const GramMatrix& kx, const GramMatrix& ky) {
    if (kx.rows() != ky.rows()) {
        throw DimensionMismatch("hsic_v: Gram matrices differ in size");
    }
    const CenteredGram cx = center_full(kx);
    const CenteredGram cy = center_full(ky);
    const Index n = cx.size();
    double total = 0.0;
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
            total += cx(i, j) * cy(i, j);
        }
    }
    const double nn = static_cast<double>(n);
    return total / (nn * nn);
}

double hsic_v_permuted(const Matrix& kx_centered, const Matrix& ky, std::span<const Index> perm) {
    if (kx_centered.rows() != ky.rows() || static_cast<Index>(perm.size()) != ky.rows()) {
        throw DimensionMismatch("hsic_v_permuted: sizes disagree");
    }
    return hsic_trace_sum(kx_centered, ky, Reindex{perm.data()});
}

double dhsic_v(std::span<const GramMatrix> grams) {
    if (grams.size() < 2) {
        throw std::invalid_argument("dhsic_v needs at least two variables");
    }
    require_same_size(grams);
    for (const GramMatrix& g : grams) {
        require_symmetric(g, "dhsic_v");
    }
    const DhsicCache cache = make_cache(grams);
    const std::vector<const Index*> identity(grams.size(), nullptr);
    return dhsic_from_cache(cache, identity);
}

TestResult permutation_test(const MultiSample& xs, PermutationStatistic statistic,
                            std::span<const KernelSpec> kernels, const PermutationConfig& config, double alpha) {
    const auto start = Clock::now();
    require_alpha(alpha);
    if (config.permutations < 1) {
        throw std::invalid_argument("permutation count B must be at least 1");
    }
    if (xs.size() < 2 || kernels.size() != xs.size()) {
        throw std::invalid_argument("permutation test needs at least two variables and one kernel per variable");
    }
    if (statistic == PermutationStatistic::Hsic && xs.size() != 2) {
        throw std::invalid_argument("hsic-perm tests exactly two variables; use dhsic-perm for more");
    }
    const Index n = common_rows(xs);
    if (n < 2) {
        throw TooFewObservations("permutation test needs at least two observations");
    }

    std::vector<double> bandwidths;
    std::vector<GramMatrix> grams;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        const KernelSpec spec =
            resolve_bandwidth(kernels[k], xs[k], derive_seed(config.seed, {stream_tag("bandwidth"), k}));
        bandwidths.push_back(spec.bandwidth);
        grams.push_back(gram(spec, xs[k]));
    }

    const auto B = static_cast<std::size_t>(config.permutations);
    std::vector<double> replicates(B);
    std::vector<std::vector<Index>> perms(xs.size(), std::vector<Index>(static_cast<std::size_t>(n)));
    double observed = 0.0;

    auto draw = [&](std::size_t b) {
        Rng rng(derive_seed(config.seed, {stream_tag("permutation"), b}));
        for (std::size_t k = 1; k < xs.size(); ++k) {
            std::iota(perms[k].begin(), perms[k].end(), Index{0});
            rng.shuffle(perms[k]);
        }
    };

    if (statistic == PermutationStatistic::Hsic) {
        const Matrix cx = center_full(grams[0]).entries;
        observed = hsic_trace_sum(cx, grams[1].entries, Identity{});
        for (std::size_t b = 0; b < B; ++b) {
            draw(b);
            replicates[b] = hsic_v_permuted(cx, grams[1].entries, perms[1]);
        }
    } else {
        const DhsicCache cache = make_cache(grams);
        std::vector<const Index*> maps(xs.size(), nullptr);
        observed = dhsic_from_cache(cache, maps);
        for (std::size_t b = 0; b < B; ++b) {
            draw(b);
            for (std::size_t k = 1; k < xs.size(); ++k) {
                maps[k] = perms[k].data();
            }
            replicates[b] = dhsic_from_cache(cache, maps);
        }
    }

    const auto exceed = static_cast<double>(
        std::count_if(replicates.begin(), replicates.end(), [&](double t) { return t >= observed; }));
    const double p = (1.0 + exceed) / (static_cast<double>(B) + 1.0);

    // Reject iff t_0 is beyond the (k+1)-th largest replicate, k = floor(alpha (B+1)) - 1.
    double threshold = std::numeric_limits<double>::infinity();
    const auto allowed = static_cast<long>(std::floor(alpha * (static_cast<double>(B) + 1.0))) - 1;
    if (allowed >= 0) {
        std::vector<double> sorted = replicates;
        std::sort(sorted.begin(), sorted.end(), std::greater<>());
        threshold = sorted[static_cast<std::size_t>(allowed)];
    }

    TestResult result;
    result.method = statistic == PermutationStatistic::Hsic ? Method::HsicPerm : Method::DHsicPerm;
    result.statistic = observed;
    result.threshold = threshold;
    result.alpha = alpha;
    result.p_value = p;
    result.reject = p <= alpha;
    result.seed = config.seed;
    result.n = n;
    result.bandwidths = std::move(bandwidths);
    result.runtime_seconds = std::chrono::duration<double>(Clock::now() - start).count();
    return result;
}

}  // namespace mhsic
