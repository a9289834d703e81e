#pragma once

#include <cstdint>
#include <random>

namespace adrb {

/// Every stochastic component draws from this engine; a seed fixes all output.
using Rng = std::mt19937_64;

/// Seed for stream `stream` derived from a base seed (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

double draw_normal(Rng& rng, double mean, double sd);
double draw_uniform(Rng& rng);
/// Exact draw from N(mean, sd^2) conditioned on x >= lower.
double draw_truncated_normal(Rng& rng, double mean, double sd, double lower);
/// Shape/scale parameterization: density proportional to x^{-shape-1} exp(-scale/x).
double draw_inverse_gamma(Rng& rng, double shape, double scale);
/// Exact Poisson draw (libstdc++ uses Devroye's rejection method for large means).
std::int64_t draw_poisson(Rng& rng, double mean);

}  // namespace adrb
