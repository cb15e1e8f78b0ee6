#include <doctest.h>

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <vector>

#include "mhsic/dgp.hpp"
#include "mhsic/rng.hpp"

using namespace mhsic;

namespace {

struct Moments {
    double mean = 0.0;
    double var = 0.0;
};

template <class Draw>
Moments moments(Draw draw, int count) {
    long double s = 0.0L;
    long double s2 = 0.0L;
    for (int i = 0; i < count; ++i) {
        const long double v = draw();
        s += v;
        s2 += v * v;
    }
    const long double mean = s / count;
    return {static_cast<double>(mean), static_cast<double>(s2 / count - mean * mean)};
}

double covariance(const Vector& a, const Vector& b) {
    return ((a.array() - a.mean()) * (b.array() - b.mean())).mean();
}

double phi(const std::array<double, 3>& w, double z) { return w[0] * z + w[1] * z * z * z + w[2] * std::tanh(z); }

Matrix apply_map(const Matrix& in, const Matrix& a, const std::array<double, 3>& w) {
    Matrix z = in * a.transpose();
    return z.unaryExpr([&](double v) { return phi(w, v); });
}

}  // namespace

TEST_CASE("rng: reproducible and seed-sensitive") {
    Rng a(5);
    Rng b(5);
    Rng c(6);
    bool any_diff = false;
    for (int i = 0; i < 100; ++i) {
        const auto va = a.next();
        CHECK(va == b.next());
        any_diff = any_diff || va != c.next();
    }
    CHECK(any_diff);
    CHECK(derive_seed(1, {2, 3}) != derive_seed(1, {3, 2}));
    CHECK(derive_seed(1, {2}) != derive_seed(2, {2}));
    CHECK(derive_seed(9, {stream_tag("x")}) == derive_seed(9, {stream_tag("x")}));
    CHECK(stream_tag("") == 0xcbf29ce484222325ULL);
    CHECK(stream_tag("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("rng: variate moments over 1e6 draws") {
    const int count = 1'000'000;
    Rng rng(42);
    const Moments u = moments([&] { return rng.uniform01(); }, count);
    CHECK(u.mean == doctest::Approx(0.5).epsilon(0.01));
    CHECK(u.var == doctest::Approx(1.0 / 12.0).epsilon(0.01));

    const Moments nrm = moments([&] { return rng.normal(); }, count);
    CHECK(std::abs(nrm.mean) < 0.005);
    CHECK(nrm.var == doctest::Approx(1.0).epsilon(0.01));

    const Moments lap = moments([&] { return rng.laplace_unit(); }, count);
    CHECK(std::abs(lap.mean) < 0.005);
    CHECK(lap.var == doctest::Approx(1.0).epsilon(0.01));

    const Moments uni = moments([&] { return rng.uniform_unit(); }, count);
    CHECK(std::abs(uni.mean) < 0.005);
    CHECK(uni.var == doctest::Approx(1.0).epsilon(0.01));

    const Moments ex = moments([&] { return rng.exponential(); }, count);
    CHECK(ex.mean == doctest::Approx(1.0).epsilon(0.01));
    CHECK(ex.var == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("rng: bounded integers and shuffles") {
    Rng rng(3);
    std::vector<int> counts(7, 0);
    for (int i = 0; i < 70'000; ++i) {
        const auto v = rng.below(7);
        REQUIRE(v < 7);
        ++counts[v];
    }
    for (int c : counts) {
        CHECK(std::abs(c - 10'000) < 600);
    }
    std::vector<Index> idx(50);
    std::iota(idx.begin(), idx.end(), Index{0});
    std::vector<Index> copy = idx;
    rng.shuffle(copy);
    CHECK(copy != idx);
    std::sort(copy.begin(), copy.end());
    CHECK(copy == idx);
}

TEST_CASE("mixture dgp: shapes, ranges and draws") {
    for (Index q : {1, 6, 20}) {
        const MixtureSample s = random_mixture_dgp({q, 100, 0.5, 0.25, 3});
        CHECK(s.x.rows() == 100);
        CHECK(s.x.cols() == q);
        CHECK(s.y.rows() == 100);
        CHECK(s.y.cols() == q);
        CHECK(s.x.maxCoeff() <= 1.0);
        CHECK(s.x.minCoeff() >= -1.0);
        CHECK(s.draw.a_f.rows() == q);
        CHECK(s.draw.a_f.cols() == q);
        for (const auto& w : {s.draw.w_f, s.draw.w_g}) {
            CHECK(w[0] + w[1] + w[2] == doctest::Approx(1.0).epsilon(1e-14));
            CHECK(*std::min_element(w.begin(), w.end()) > 0.0);
        }
    }
}

TEST_CASE("mixture dgp: reproducible per seed") {
    const MixtureSample a = random_mixture_dgp({4, 50, 0.7, 0.25, 11});
    const MixtureSample b = random_mixture_dgp({4, 50, 0.7, 0.25, 11});
    const MixtureSample c = random_mixture_dgp({4, 50, 0.7, 0.25, 12});
    CHECK(a.x == b.x);
    CHECK(a.y == b.y);
    CHECK(a.x != c.x);
}

TEST_CASE("mixture dgp: the signal is a G(F(X)) on top of shared noise") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const MixtureSample null = random_mixture_dgp({3, 40, 0.0, 0.25, seed});
        const MixtureSample alt = random_mixture_dgp({3, 40, 0.6, 0.25, seed});
        CHECK(null.x == alt.x);
        const Matrix expected = 0.6 * apply_map(apply_map(alt.x, alt.draw.a_f, alt.draw.w_f), alt.draw.a_g, alt.draw.w_g);
        CHECK(((alt.y - null.y) - expected).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("mixture dgp: null moments at n = 100000") {
    const MixtureSample s = random_mixture_dgp({2, 100'000, 0.0, 0.25, 8});
    for (Index j = 0; j < 2; ++j) {
        CHECK(covariance(s.y.col(j), s.y.col(j)) == doctest::Approx(0.0625).epsilon(0.003 / 0.0625));
        CHECK(covariance(s.x.col(j), s.x.col(j)) == doctest::Approx(1.0 / 3.0).epsilon(0.01));
        for (Index k = 0; k < 2; ++k) {
            CHECK(std::abs(covariance(s.x.col(j), s.y.col(k))) < 0.02);
        }
    }
}

TEST_CASE("mixture dgp: noise family is drawn uniformly") {
    std::map<NoiseFamily, int> counts;
    for (std::uint64_t seed = 0; seed < 600; ++seed) {
        ++counts[random_mixture_dgp({1, 2, 0.0, 0.25, seed}).draw.noise];
    }
    for (NoiseFamily f : {NoiseFamily::Gaussian, NoiseFamily::Laplace, NoiseFamily::Uniform}) {
        CHECK(counts[f] > 140);
        CHECK(counts[f] < 260);
    }
}

TEST_CASE("linear-Gaussian dgp: shapes and null structure") {
    const MultiSample xs = linear_gaussian_dgp({3, 5, 50'000, 0.0, 4});
    REQUIRE(xs.size() == 3);
    for (const Sample& s : xs) {
        CHECK(s.rows() == 50'000);
        CHECK(s.cols() == 5);
        for (Index j = 0; j < 5; ++j) {
            CHECK(covariance(s.col(j), s.col(j)) == doctest::Approx(1.0).epsilon(0.03));
        }
    }
    for (Index j = 0; j < 5; ++j) {
        for (Index k = 0; k < 5; ++k) {
            CHECK(std::abs(covariance(xs[0].col(j), xs[1].col(k))) < 0.03);
            CHECK(std::abs(covariance(xs[1].col(j), xs[2].col(k))) < 0.03);
        }
    }
}

TEST_CASE("linear-Gaussian dgp: dependence is linear in earlier variables") {
    const MultiSample null = linear_gaussian_dgp({2, 5, 400, 0.0, 6});
    const MultiSample alt = linear_gaussian_dgp({2, 5, 400, 1.0, 6});
    CHECK(null[0] == alt[0]);
    const Matrix diff = alt[1] - null[1];
    // diff = X^1 A^T exactly, so least squares on X^1 leaves no residual.
    const Matrix coef = alt[0].colPivHouseholderQr().solve(diff);
    CHECK((alt[0] * coef - diff).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(diff.cwiseAbs().maxCoeff() > 0.1);

    const MultiSample big = linear_gaussian_dgp({2, 5, 20'000, 1.0, 6});
    double max_cov = 0.0;
    for (Index j = 0; j < 5; ++j) {
        for (Index k = 0; k < 5; ++k) {
            max_cov = std::max(max_cov, std::abs(covariance(big[0].col(j), big[1].col(k))));
        }
    }
    CHECK(max_cov > 0.1);
}

TEST_CASE("linear-Gaussian dgp: reproducible per seed") {
    const MultiSample a = linear_gaussian_dgp({5, 5, 30, 0.4, 1});
    const MultiSample b = linear_gaussian_dgp({5, 5, 30, 0.4, 1});
    for (std::size_t k = 0; k < a.size(); ++k) {
        CHECK(a[k] == b[k]);
    }
}
