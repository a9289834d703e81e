#include "adrbayes/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "adrbayes/errors.hpp"

namespace adrb {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
const double kLog2Pi = std::log(2.0 * std::numbers::pi);

// log Phi(z) for the standard normal CDF.
double log_norm_cdf(double z) {
    if (z < -30.0) return -0.5 * z * z - std::log(-z) - 0.5 * kLog2Pi;
    return std::log(0.5 * std::erfc(-z / std::numbers::sqrt2));
}

}  // namespace

ModelSpec ModelSpec::preset(std::string_view name) {
    ModelSpec s;
    s.name = std::string(name);
    if (name == "wikle") {
        s.nu_present = false;
        s.nu_space_varying = false;
    } else if (name == "m1") {
        // space-varying, time-constant advection; constant growth
    } else if (name == "m2") {
        s.zeta_time_varying = true;
    } else if (name == "m3") {
        s.zeta_time_varying = true;
        s.nu_time_varying = true;
    } else if (name == "m4") {
        s.zeta_time_varying = true;
        s.nu_time_varying = true;
        s.population_adjusted = true;
    } else if (name == "m5") {
        s.zeta_time_varying = true;
        s.nu_time_varying = true;
        s.population_adjusted = true;
        s.ar_errors = true;
    } else {
        std::string valid;
        for (const auto& n : preset_names()) valid += (valid.empty() ? "" : ", ") + n;
        throw std::invalid_argument("unknown model '" + std::string(name) + "'; valid presets: " + valid);
    }
    return s;
}

const std::vector<std::string>& ModelSpec::preset_names() {
    static const std::vector<std::string> names{"wikle", "m1", "m2", "m3", "m4", "m5"};
    return names;
}

Hyperparams Hyperparams::preset(std::string_view name) {
    Hyperparams h;
    if (name == "sim") return h;
    if (name == "set1" || name == "set2" || name == "set3") {
        const double var = name == "set2" ? 100.0 : 10.0;
        const double mean = name == "set3" ? 0.1 : 0.0;
        h.nu1_mean = h.nu2_mean = h.delta_mean = h.zeta_mean = mean;
        h.nu1_var = h.nu2_var = h.delta_var = h.zeta_var = var;
        return h;
    }
    std::string valid;
    for (const auto& n : preset_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw std::invalid_argument("unknown hyperparameter set '" + std::string(name) +
                                "'; valid presets: " + valid);
}

const std::vector<std::string>& Hyperparams::preset_names() {
    static const std::vector<std::string> names{"sim", "set1", "set2", "set3"};
    return names;
}

void Hyperparams::validate() const {
    for (double v : {nu1_var, nu2_var, delta_var, zeta_var, init_var})
        if (!(v > 0.0)) throw std::invalid_argument("prior variances must be positive");
    if (!(q > 0.0) || !(r > 0.0)) throw std::invalid_argument("inverse-gamma shape and scale must be positive");
    for (double m : {nu1_mean, nu2_mean, delta_mean, zeta_mean})
        if (!std::isfinite(m)) throw std::invalid_argument("prior means must be finite");
}

Observations Observations::zeros(int n_times, int n_cells) {
    Observations o;
    o.n_times = n_times;
    o.n_cells = n_cells;
    o.counts.assign(static_cast<std::size_t>(n_times) * n_cells, 0);
    o.observed.assign(o.counts.size(), 1);
    return o;
}

void Observations::validate() const {
    if (n_times < 1 || n_cells < 1) throw std::invalid_argument("observations need T >= 1 and S >= 1");
    const auto n = static_cast<std::size_t>(n_times) * n_cells;
    if (counts.size() != n || observed.size() != n)
        throw std::invalid_argument("observation arrays do not match T x S");
    for (std::size_t i = 0; i < n; ++i)
        if (observed[i] && counts[i] < 0) throw std::invalid_argument("counts must be non-negative");
}

ParamLayout::ParamLayout(const ModelSpec& spec, int n_times, int n_cells)
    : n_times_(n_times),
      n_cells_(n_cells),
      zeta_tv_(spec.zeta_time_varying),
      nu_present_(spec.nu_present),
      nu_tv_(spec.nu_time_varying),
      nu_sv_(spec.nu_space_varying),
      delta_sv_(spec.delta_space_varying) {
    if (n_times < 2) throw std::invalid_argument("at least two time points are required");
    if (n_cells < 1) throw std::invalid_argument("at least one cell is required");
}

// ---- Elementary densities ---------------------------------------------------

double poisson_logpmf(std::int64_t n, double lambda) {
    const auto nd = static_cast<double>(n);
    if (n == 0) return -lambda;
    return nd * std::log(lambda) - lambda - std::lgamma(nd + 1.0);
}

double normal_logpdf(double x, double mean, double var) {
    const double d = x - mean;
    return -0.5 * (kLog2Pi + std::log(var)) - 0.5 * d * d / var;
}

double truncated_normal_logpdf(double x, double mean, double var) {
    if (x < 0.0) return kNegInf;
    return normal_logpdf(x, mean, var) - log_norm_cdf(mean / std::sqrt(var));
}

double inverse_gamma_logpdf(double x, double shape, double scale) {
    if (!(x > 0.0)) return kNegInf;
    return shape * std::log(scale) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - scale / x;
}

// ---- Model stages -----------------------------------------------------------

std::vector<double> log_intensity(std::span<const double> u, const CellPopulation* pop) {
    if (pop && pop->count.size() != u.size())
        throw std::invalid_argument("population length does not match state length");
    std::vector<double> lambda(u.size());
    for (std::size_t s = 0; s < u.size(); ++s) {
        if (!std::isfinite(u[s]))
            throw NumericDomainError("non-finite latent value at cell " + std::to_string(s + 1));
        lambda[s] = pop ? std::exp(u[s] + std::log(pop->count[s])) : std::exp(u[s]);
    }
    return lambda;
}

double obs_loglik(std::span<const std::int64_t> n, std::span<const double> lambda,
                  std::span<const std::uint8_t> observed) {
    if (n.size() != lambda.size() || (!observed.empty() && observed.size() != n.size()))
        throw std::invalid_argument("count and intensity lengths differ");
    double acc = 0.0;
    for (std::size_t s = 0; s < n.size(); ++s) {
        if (!observed.empty() && !observed[s]) continue;
        if (n[s] < 0) throw std::invalid_argument("counts must be non-negative");
        if (!(lambda[s] > 0.0)) throw std::invalid_argument("Poisson intensity must be positive");
        acc += poisson_logpmf(n[s], lambda[s]);
    }
    return acc;
}

double innovation_loglik(std::span<const double> eps, int n_transitions, int n_cells, double sigma2,
                         double phi) {
    if (!(sigma2 > 0.0)) throw std::invalid_argument("sigma2 must be positive");
    if (!(std::abs(phi) < 1.0)) return kNegInf;
    if (eps.size() != static_cast<std::size_t>(n_transitions) * n_cells)
        throw std::invalid_argument("innovation field has wrong size");
    const double w0 = std::sqrt(1.0 - phi * phi);
    double ssr = 0.0;
    for (int k = 0; k < n_transitions; ++k) {
        for (int s = 0; s < n_cells; ++s) {
            const double e = eps[static_cast<std::size_t>(k) * n_cells + s];
            const double eta = k == 0 ? w0 * e : e - phi * eps[static_cast<std::size_t>(k - 1) * n_cells + s];
            ssr += eta * eta;
        }
    }
    const double n_terms = static_cast<double>(n_transitions) * n_cells;
    double ll = -0.5 * n_terms * (kLog2Pi + std::log(sigma2)) - 0.5 * ssr / sigma2;
    if (n_transitions > 0) ll += 0.5 * n_cells * std::log(1.0 - phi * phi);
    return ll;
}

Model::Model(Grid grid, ModelSpec spec, Hyperparams hp, Observations obs,
             std::optional<CellPopulation> population)
    : grid_(std::move(grid)),
      spec_(std::move(spec)),
      hp_(hp),
      obs_(std::move(obs)),
      pop_(std::move(population)),
      layout_(spec_, obs_.n_times, grid_.size()) {
    hp_.validate();
    obs_.validate();
    if (obs_.n_cells != grid_.size())
        throw std::invalid_argument("observations have " + std::to_string(obs_.n_cells) +
                                    " cells, grid has " + std::to_string(grid_.size()));
    if (spec_.population_adjusted) {
        if (!pop_) throw std::invalid_argument("population-adjusted model requires a population");
        pop_->validate(grid_.size());
        log_offset_ = pop_->log_count();
    } else {
        log_offset_.assign(static_cast<std::size_t>(grid_.size()), 0.0);
    }
    init_mean_.resize(static_cast<std::size_t>(grid_.size()));
    for (CellId s = 0; s < grid_.size(); ++s) {
        const double n0 = obs_.is_observed(0, s) ? static_cast<double>(obs_.count(0, s)) : 0.0;
        init_mean_[s] = std::log(n0 + 1.0) - log_offset_[s];
    }
}

void Model::check_shapes(const ParamState& st) const {
    auto need = [](std::size_t have, int want, const char* what) {
        if (have != static_cast<std::size_t>(want))
            throw std::invalid_argument(std::string("parameter block '") + what + "' has size " +
                                        std::to_string(have) + ", expected " + std::to_string(want));
    };
    need(st.zeta.size(), layout_.zeta_size(), "zeta");
    need(st.nu1.size(), layout_.nu_size(), "nu1");
    need(st.nu2.size(), layout_.nu_size(), "nu2");
    need(st.delta.size(), layout_.delta_size(), "delta");
    need(st.u.size(), n_times() * n_cells(), "u");
}

Coefficients Model::coefficients(const ParamState& st, int k) const {
    const int n = n_cells();
    Coefficients c = Coefficients::uniform(n, 0.0, st.zeta[layout_.zeta_index(k)], 0.0, 0.0);
    for (CellId s = 0; s < n; ++s) {
        c.delta[s] = st.delta[layout_.delta_index(s)];
        if (layout_.nu_present()) {
            c.nu1[s] = st.nu1[layout_.nu_index(k, s)];
            c.nu2[s] = st.nu2[layout_.nu_index(k, s)];
        }
    }
    return c;
}

Propagator Model::propagator(const ParamState& st, int k) const {
    return Propagator::build(grid_, coefficients(st, k));
}

std::vector<double> Model::innovations(const ParamState& st) const {
    check_shapes(st);
    const int n = n_cells();
    const int nk = layout_.n_transitions();
    std::vector<double> eps(static_cast<std::size_t>(nk) * n);
    std::vector<double> pred(static_cast<std::size_t>(n));
    for (int k = 0; k < nk; ++k) {
        propagator(st, k).apply_into(st.u_slice(k, n), pred);
        const auto next = st.u_slice(k + 1, n);
        for (CellId s = 0; s < n; ++s) eps[static_cast<std::size_t>(k) * n + s] = next[s] - pred[s];
    }
    return eps;
}

double Model::obs_loglik(const ParamState& st) const {
    check_shapes(st);
    const CellPopulation* pop = spec_.population_adjusted ? &*pop_ : nullptr;
    double acc = 0.0;
    for (int t = 0; t < n_times(); ++t) {
        const auto lambda = log_intensity(st.u_slice(t, n_cells()), pop);
        acc += adrb::obs_loglik(obs_.slice(t), lambda, obs_.mask_slice(t));
    }
    return acc;
}

double Model::process_loglik(const ParamState& st) const {
    if (!(st.sigma2 > 0.0)) throw std::invalid_argument("sigma2 must be positive");
    const auto eps = innovations(st);
    return innovation_loglik(eps, layout_.n_transitions(), n_cells(), st.sigma2,
                             spec_.ar_errors ? st.phi : 0.0);
}

double Model::log_prior(const ParamState& st) const {
    check_shapes(st);
    double lp = 0.0;
    for (double z : st.zeta) lp += normal_logpdf(z, hp_.zeta_mean, hp_.zeta_var);
    for (double v : st.nu1) lp += normal_logpdf(v, hp_.nu1_mean, hp_.nu1_var);
    for (double v : st.nu2) lp += normal_logpdf(v, hp_.nu2_mean, hp_.nu2_var);
    for (double d : st.delta) {
        if (d < 0.0) return kNegInf;
        lp += truncated_normal_logpdf(d, hp_.delta_mean, hp_.delta_var);
    }
    if (!(st.sigma2 > 0.0)) return kNegInf;
    lp += inverse_gamma_logpdf(st.sigma2, hp_.q, hp_.r);
    if (spec_.ar_errors) {
        if (!(std::abs(st.phi) < 1.0)) return kNegInf;
        lp += std::log(0.5);
    }
    const auto u0 = st.u_slice(0, n_cells());
    for (CellId s = 0; s < n_cells(); ++s) lp += normal_logpdf(u0[s], init_mean_[s], hp_.init_var);
    return lp;
}

double Model::log_posterior(const ParamState& st) const {
    const double lp = log_prior(st);
    if (!std::isfinite(lp)) return kNegInf;
    const double proc = process_loglik(st);
    if (!std::isfinite(proc)) return kNegInf;
    return lp + proc + obs_loglik(st);
}

}  // namespace adrb
