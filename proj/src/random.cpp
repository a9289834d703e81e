#include "adrbayes/random.hpp"

#include <cmath>
#include <stdexcept>

namespace adrb {

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double draw_normal(Rng& rng, double mean, double sd) {
    std::normal_distribution<double> d(mean, sd);
    return d(rng);
}

double draw_uniform(Rng& rng) {
    std::uniform_real_distribution<double> d(0.0, 1.0);
    return d(rng);
}

namespace {

// Standard normal restricted to [a, inf).
double std_truncated(Rng& rng, double a) {
    if (a < 0.45) {
        // Acceptance probability is at least 1 - Phi(0.45) ~ 0.33.
        std::normal_distribution<double> n01;
        for (;;) {
            const double z = n01(rng);
            if (z >= a) return z;
        }
    }
    // Robert (1995): translated exponential proposal with the optimal rate.
    const double alpha = 0.5 * (a + std::sqrt(a * a + 4.0));
    std::exponential_distribution<double> ex(alpha);
    for (;;) {
        const double z = a + ex(rng);
        const double rho = std::exp(-0.5 * (z - alpha) * (z - alpha));
        if (draw_uniform(rng) <= rho) return z;
    }
}

}  // namespace

double draw_truncated_normal(Rng& rng, double mean, double sd, double lower) {
    if (!(sd > 0.0)) throw std::invalid_argument("truncated normal needs positive sd");
    return mean + sd * std_truncated(rng, (lower - mean) / sd);
}

double draw_inverse_gamma(Rng& rng, double shape, double scale) {
    if (!(shape > 0.0) || !(scale > 0.0)) throw std::invalid_argument("inverse gamma needs positive parameters");
    std::gamma_distribution<double> g(shape, 1.0);
    return scale / g(rng);
}

std::int64_t draw_poisson(Rng& rng, double mean) {
    if (!(mean >= 0.0)) throw std::invalid_argument("Poisson mean must be non-negative");
    if (mean == 0.0) return 0;
    std::poisson_distribution<std::int64_t> d(mean);
    return d(rng);
}

}  // namespace adrb
