#include "adrbayes/simulator.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

#include "adrbayes/csv.hpp"
#include "adrbayes/errors.hpp"
#include "adrbayes/propagator.hpp"
#include "adrbayes/random.hpp"

namespace adrb {

namespace {

// Above this an intensity is no longer a meaningful count rate for double-precision draws.
constexpr double kMaxIntensity = 1e15;

}  // namespace

SimConfig SimConfig::scenario1(std::uint64_t seed, int n_times) {
    SimConfig c;
    c.grid = Grid::rectangular(5, 5, Spacing{1.0, 1.0, 1.0});
    c.n_times = n_times;
    const auto n = static_cast<std::size_t>(c.grid.size());
    c.delta.assign(n, 0.1);
    c.zeta.resize(static_cast<std::size_t>(n_times));
    c.nu1.resize(static_cast<std::size_t>(n_times) * n);
    c.nu2.resize(c.nu1.size());
    for (int t = 0; t < n_times; ++t) {
        c.zeta[t] = t <= 5 ? 0.15 : 0.01;
        const double v = t <= 11 ? 0.1 : -0.1;
        for (std::size_t s = 0; s < n; ++s) {
            c.nu1[t * n + s] = v;
            c.nu2[t * n + s] = v;
        }
    }
    c.sigma2 = 0.1;
    c.phi = 0.0;
    c.errors = ErrorMode::Iid;
    c.u0.assign(n, std::log(10.0));
    c.seed = seed;
    return c;
}

SimConfig SimConfig::scenario2(std::uint64_t seed, int n_times) {
    SimConfig c = scenario1(seed, n_times);
    c.errors = ErrorMode::Ar;
    c.phi = 0.1;
    c.sigma2 = 0.1;
    return c;
}

SimConfig SimConfig::preset(std::string_view name, std::uint64_t seed, int n_times) {
    if (name == "scenario1") return scenario1(seed, n_times);
    if (name == "scenario2") return scenario2(seed, n_times);
    throw std::invalid_argument("unknown simulation preset '" + std::string(name) +
                                "'; valid presets: scenario1, scenario2");
}

void SimConfig::validate() const {
    const auto n = static_cast<std::size_t>(grid.size());
    const auto nt = static_cast<std::size_t>(n_times);
    if (n_times < 1) throw std::invalid_argument("simulation needs T >= 1");
    if (delta.size() != n || u0.size() != n)
        throw std::invalid_argument("delta and u0 need one entry per cell");
    if (zeta.size() != nt) throw std::invalid_argument("zeta needs one entry per step");
    if (nu1.size() != nt * n || nu2.size() != nt * n)
        throw std::invalid_argument("velocities need T x S entries");
    if (!(sigma2 >= 0.0) || !std::isfinite(sigma2)) throw std::invalid_argument("sigma2 must be >= 0");
    if (!(std::abs(phi) < 1.0)) throw std::invalid_argument("|phi| must be < 1");
}

SimResult simulate(const SimConfig& cfg) {
    cfg.validate();
    const int n = cfg.grid.size();
    const auto nz = static_cast<std::size_t>(n);
    Rng rng(cfg.seed);

    SimResult res;
    res.obs = Observations::zeros(cfg.n_times, n);
    res.u.resize(static_cast<std::size_t>(cfg.n_times) * nz);
    res.eps.resize(res.u.size());
    res.u0 = cfg.u0;

    const double sd = std::sqrt(cfg.sigma2);
    const bool ar = cfg.errors == ErrorMode::Ar;
    std::vector<double> prev = cfg.u0;
    std::vector<double> prev_eps(nz, 0.0);
    std::vector<double> next(nz);
    Coefficients coef = Coefficients::uniform(n, 0.0, 0.0, 0.0, 0.0);
    coef.delta = cfg.delta;

    for (int t = 1; t <= cfg.n_times; ++t) {
        const int src = t - 1;
        coef.zeta = cfg.zeta[src];
        for (std::size_t s = 0; s < nz; ++s) {
            coef.nu1[s] = cfg.nu1[src * nz + s];
            coef.nu2[s] = cfg.nu2[src * nz + s];
        }
        const auto h = Propagator::build(cfg.grid, coef);
        h.apply_into(prev, next);
        for (std::size_t s = 0; s < nz; ++s) {
            double e = 0.0;
            if (sd > 0.0) {
                if (!ar) {
                    e = draw_normal(rng, 0.0, sd);
                } else if (t == 1) {
                    e = draw_normal(rng, 0.0, sd / std::sqrt(1.0 - cfg.phi * cfg.phi));
                } else {
                    e = cfg.phi * prev_eps[s] + draw_normal(rng, 0.0, sd);
                }
            }
            next[s] += e;
            prev_eps[s] = e;
            const double lambda = std::exp(next[s]);
            if (!std::isfinite(lambda) || lambda > kMaxIntensity)
                throw NumericDomainError("intensity overflow at t=" + std::to_string(t) +
                                         ", cell=" + std::to_string(s + 1) +
                                         " (u=" + csv::format_double(next[s]) + ")");
            const std::size_t idx = static_cast<std::size_t>(t - 1) * nz + s;
            res.u[idx] = next[s];
            res.eps[idx] = e;
            res.obs.counts[idx] = draw_poisson(rng, lambda);
        }
        prev.swap(next);
    }
    return res;
}

void write_truth(std::ostream& out, const SimConfig& cfg, const SimResult& res) {
    const int n = cfg.grid.size();
    const auto nz = static_cast<std::size_t>(n);
    auto fmt = csv::format_double;
    out << "name,t,cell,value\n";
    for (int s = 0; s < n; ++s) out << "delta,*," << (s + 1) << ',' << fmt(cfg.delta[s]) << '\n';
    for (int t = 0; t < cfg.n_times; ++t) out << "zeta," << t << ",*," << fmt(cfg.zeta[t]) << '\n';
    for (int t = 0; t < cfg.n_times; ++t)
        for (int s = 0; s < n; ++s) out << "nu1," << t << ',' << (s + 1) << ',' << fmt(cfg.nu1[t * nz + s]) << '\n';
    for (int t = 0; t < cfg.n_times; ++t)
        for (int s = 0; s < n; ++s) out << "nu2," << t << ',' << (s + 1) << ',' << fmt(cfg.nu2[t * nz + s]) << '\n';
    out << "sigma2,*,*," << fmt(cfg.sigma2) << '\n';
    out << "phi,*,*," << fmt(cfg.errors == ErrorMode::Ar ? cfg.phi : 0.0) << '\n';
    for (int s = 0; s < n; ++s) out << "u,0," << (s + 1) << ',' << fmt(res.u0[s]) << '\n';
    for (int t = 1; t <= cfg.n_times; ++t)
        for (int s = 0; s < n; ++s)
            out << "u," << t << ',' << (s + 1) << ',' << fmt(res.u[(t - 1) * nz + s]) << '\n';
    for (int t = 1; t <= cfg.n_times; ++t)
        for (int s = 0; s < n; ++s)
            out << "eps," << t << ',' << (s + 1) << ',' << fmt(res.eps[(t - 1) * nz + s]) << '\n';
}

}  // namespace adrb
