#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <utility>

#include "mhsic/types.hpp"

namespace mhsic {

enum class NoiseFamily { Gaussian, Laplace, Uniform };

std::string_view to_string(NoiseFamily family);

/// Bivariate random-mixture alternative:
///   X ~ Uniform([-1, 1]^q),  Y = a G(F(X)) + noise_scale * eps,
/// with F(x) = phi_F(A_F x), phi(z) = w1 z + w2 z^3 + w3 tanh(z) applied
/// elementwise, A_F with i.i.d. N(0, 1/q) entries and w ~ Dirichlet(1, 1, 1);
/// G is drawn the same way, independently. eps has i.i.d. unit-variance
/// entries from one family picked uniformly per trial.
struct MixtureDgpConfig {
    Index d_ambient = 1;
    Index n = 100;
    double a = 0.0;
    double noise_scale = 0.25;
    std::uint64_t seed = 0;
};

/// Per-trial random draws, exposed for inspection.
struct MixtureDraw {
    Matrix a_f;
    Matrix a_g;
    std::array<double, 3> w_f{};
    std::array<double, 3> w_g{};
    NoiseFamily noise = NoiseFamily::Gaussian;
};

struct MixtureSample {
    Sample x;
    Sample y;
    MixtureDraw draw;
};

MixtureSample random_mixture_dgp(const MixtureDgpConfig& config);

/// Linear-Gaussian joint-independence model with d variables in R^p:
///   X^1 = eps^1,  X^k = a sum_{l<k} A_l^(k) X^l + eps^k,
/// A_l^(k) with i.i.d. N(0, 1/(p k)) entries (k 1-based), eps^k ~ N(0, I_p).
struct LinearGaussianDgpConfig {
    Index d = 2;
    Index p = 5;
    Index n = 100;
    double a = 0.0;
    std::uint64_t seed = 0;
};

MultiSample linear_gaussian_dgp(const LinearGaussianDgpConfig& config);

}  // namespace mhsic
