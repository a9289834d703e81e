#pragma once

#include <cstdint>
#include <iosfwd>
#include <string_view>
#include <vector>

#include "adrbayes/grid.hpp"
#include "adrbayes/model.hpp"

namespace adrb {

enum class ErrorMode { Iid, Ar };

/// Ground truth and settings for one synthetic dataset.
///
/// Time runs t = 1..T for observations; u0 is the unobserved field at t = 0.
/// zeta[t] and the t-th slices of nu1/nu2 drive the step u_t -> u_{t+1}
/// (t = 0..T-1), so the arrays hold T entries (times S for the velocities).
struct SimConfig {
    Grid grid = Grid::rectangular(5, 5, {});
    int n_times = 24;
    std::vector<double> delta;
    std::vector<double> zeta;
    std::vector<double> nu1;
    std::vector<double> nu2;
    double sigma2 = 0.1;
    double phi = 0.0;
    ErrorMode errors = ErrorMode::Iid;
    std::vector<double> u0;
    std::uint64_t seed = 1;

    /// Simulation-study truths on a 5x5 unit grid: delta 0.1, growth 0.15 then
    /// 0.01 from t = 6, velocities 0.1 then -0.1 from t = 12, sigma2 0.1, u0 = log 10.
    /// Steps beyond the tabulated 24 keep the final values.
    static SimConfig scenario1(std::uint64_t seed, int n_times = 24);
    /// Scenario 1 with AR(1) errors, phi 0.1 and innovation variance 0.1.
    static SimConfig scenario2(std::uint64_t seed, int n_times = 24);
    /// "scenario1" or "scenario2".
    static SimConfig preset(std::string_view name, std::uint64_t seed, int n_times = 24);

    void validate() const;
};

struct SimResult {
    Observations obs;            // [T][S]
    std::vector<double> u;       // [T][S], u_1..u_T
    std::vector<double> eps;     // [T][S], eps_1..eps_T
    std::vector<double> u0;      // [S]
};

/// Runs the generating process: build H from the step's rates, draw errors,
/// propagate, exponentiate, and draw Poisson counts. Deterministic in the seed.
/// Throws NumericDomainError naming (t, cell) when an intensity overflows.
SimResult simulate(const SimConfig& cfg);

/// Truth file: header "name,t,cell,value". Non-applicable indices are '*'.
void write_truth(std::ostream& out, const SimConfig& cfg, const SimResult& res);

}  // namespace adrb
