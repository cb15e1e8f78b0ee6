#include "mhsic/dgp.hpp"

#include <cmath>
#include <stdexcept>

#include "mhsic/rng.hpp"

namespace mhsic {

namespace {

Matrix gaussian_matrix(Rng& rng, Index rows, Index cols, double variance) {
    const double sd = std::sqrt(variance);
    Matrix out(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        for (Index j = 0; j < cols; ++j) {
            out(i, j) = sd * rng.normal();
        }
    }
    return out;
}

std::array<double, 3> dirichlet_flat(Rng& rng) {
    // Dirichlet(1, 1, 1) as normalised unit exponentials.
    std::array<double, 3> w{rng.exponential(), rng.exponential(), rng.exponential()};
    const double total = w[0] + w[1] + w[2];
    for (double& v : w) {
        v /= total;
    }
    return w;
}

// Rows of `in` are observations; applies z -> phi(A z) to each.
Matrix random_feature_map(const Matrix& in, const Matrix& a, const std::array<double, 3>& w) {
    Matrix z = in * a.transpose();
    for (Index i = 0; i < z.rows(); ++i) {
        for (Index j = 0; j < z.cols(); ++j) {
            const double v = z(i, j);
            z(i, j) = w[0] * v + w[1] * v * v * v + w[2] * std::tanh(v);
        }
    }
    return z;
}

double noise_draw(Rng& rng, NoiseFamily family) {
    switch (family) {
        case NoiseFamily::Gaussian: return rng.normal();
        case NoiseFamily::Laplace: return rng.laplace_unit();
        case NoiseFamily::Uniform: return rng.uniform_unit();
    }
    return 0.0;
}

}  // namespace

std::string_view to_string(NoiseFamily family) {
    switch (family) {
        case NoiseFamily::Gaussian: return "gaussian";
        case NoiseFamily::Laplace: return "laplace";
        case NoiseFamily::Uniform: return "uniform";
    }
    return "unknown";
}

MixtureSample random_mixture_dgp(const MixtureDgpConfig& config) {
    if (config.d_ambient < 1 || config.n < 1) {
        throw std::invalid_argument("mixture DGP needs d_ambient >= 1 and n >= 1");
    }
    if (config.a < 0.0) {
        throw std::invalid_argument("mixture DGP needs a >= 0");
    }
    const Index q = config.d_ambient;
    const Index n = config.n;

    // Separate streams per purpose: at a = 0, Y touches only the noise streams.
    Rng x_rng(derive_seed(config.seed, {stream_tag("mixture/x")}));
    Rng map_rng(derive_seed(config.seed, {stream_tag("mixture/maps")}));
    Rng family_rng(derive_seed(config.seed, {stream_tag("mixture/noise-family")}));
    Rng noise_rng(derive_seed(config.seed, {stream_tag("mixture/noise")}));

    MixtureSample out;
    out.x.resize(n, q);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < q; ++j) {
            out.x(i, j) = x_rng.uniform(-1.0, 1.0);
        }
    }

    MixtureDraw& draw = out.draw;
    draw.a_f = gaussian_matrix(map_rng, q, q, 1.0 / static_cast<double>(q));
    draw.w_f = dirichlet_flat(map_rng);
    draw.a_g = gaussian_matrix(map_rng, q, q, 1.0 / static_cast<double>(q));
    draw.w_g = dirichlet_flat(map_rng);
    draw.noise = static_cast<NoiseFamily>(family_rng.below(3));

    out.y.resize(n, q);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < q; ++j) {
            out.y(i, j) = config.noise_scale * noise_draw(noise_rng, draw.noise);
        }
    }
    if (config.a != 0.0) {
        const Matrix signal = random_feature_map(random_feature_map(out.x, draw.a_f, draw.w_f), draw.a_g, draw.w_g);
        out.y += config.a * signal;
    }
    return out;
}

MultiSample linear_gaussian_dgp(const LinearGaussianDgpConfig& config) {
    if (config.d < 2 || config.p < 1 || config.n < 1) {
        throw std::invalid_argument("linear-Gaussian DGP needs d >= 2, p >= 1 and n >= 1");
    }
    const Index p = config.p;
    const Index n = config.n;
    MultiSample xs;
    xs.reserve(static_cast<std::size_t>(config.d));
    for (Index k = 0; k < config.d; ++k) {
        Rng noise_rng(derive_seed(config.seed, {stream_tag("linear-gaussian/noise"), static_cast<std::uint64_t>(k)}));
        Sample xk = gaussian_matrix(noise_rng, n, p, 1.0);
        if (k > 0 && config.a != 0.0) {
            Rng coef_rng(derive_seed(config.seed, {stream_tag("linear-gaussian/coef"), static_cast<std::uint64_t>(k)}));
            const double variance = 1.0 / (static_cast<double>(p) * static_cast<double>(k + 1));
            for (Index l = 0; l < k; ++l) {
                const Matrix a_l = gaussian_matrix(coef_rng, p, p, variance);
                xk.noalias() += config.a * (xs[static_cast<std::size_t>(l)] * a_l.transpose());
            }
        }
        xs.push_back(std::move(xk));
    }
    return xs;
}

}  // namespace mhsic
