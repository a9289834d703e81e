#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "adrbayes/grid.hpp"
#include "adrbayes/propagator.hpp"

namespace adrb {

/// Which rates vary in time or space and which error/offset structure is used.
struct ModelSpec {
    std::string name = "custom";
    bool zeta_time_varying = false;
    bool delta_space_varying = true;
    bool nu_present = true;
    bool nu_time_varying = false;
    bool nu_space_varying = true;
    bool population_adjusted = false;
    bool ar_errors = false;

    /// "wikle", "m1" .. "m5". Throws std::invalid_argument for unknown names.
    static ModelSpec preset(std::string_view name);
    static const std::vector<std::string>& preset_names();
};

struct Hyperparams {
    double nu1_mean = 0.0;
    double nu1_var = 0.1;
    double nu2_mean = 0.0;
    double nu2_var = 0.1;
    double delta_mean = 0.0;
    double delta_var = 0.1;
    double zeta_mean = 0.0;
    double zeta_var = 0.1;
    double q = 0.001;  // inverse-gamma shape of sigma2
    double r = 0.001;  // inverse-gamma scale of sigma2
    double init_var = 10.0;  // prior variance of the first latent slice

    /// "sim" (simulation-study priors), "set1", "set2", "set3".
    static Hyperparams preset(std::string_view name);
    static const std::vector<std::string>& preset_names();
    void validate() const;
};

/// Counts n(t, s), row-major [t][s], with an optional missing mask.
struct Observations {
    int n_times = 0;
    int n_cells = 0;
    std::vector<std::int64_t> counts;
    std::vector<std::uint8_t> observed;

    static Observations zeros(int n_times, int n_cells);
    std::int64_t count(int t, CellId s) const { return counts[idx(t, s)]; }
    bool is_observed(int t, CellId s) const { return observed[idx(t, s)] != 0; }
    std::span<const std::int64_t> slice(int t) const {
        return {counts.data() + idx(t, 0), static_cast<std::size_t>(n_cells)};
    }
    std::span<const std::uint8_t> mask_slice(int t) const {
        return {observed.data() + idx(t, 0), static_cast<std::size_t>(n_cells)};
    }
    void validate() const;

private:
    std::size_t idx(int t, CellId s) const { return static_cast<std::size_t>(t) * n_cells + s; }
};

/// Shapes of every sampled block for a spec and data size. Transition k
/// (0-based) carries u[k] to u[k+1]; there are T - 1 of them.
class ParamLayout {
public:
    ParamLayout(const ModelSpec& spec, int n_times, int n_cells);

    int n_times() const noexcept { return n_times_; }
    int n_cells() const noexcept { return n_cells_; }
    int n_transitions() const noexcept { return n_times_ - 1; }

    int zeta_size() const noexcept { return zeta_tv_ ? n_transitions() : 1; }
    int zeta_index(int k) const noexcept { return zeta_tv_ ? k : 0; }

    int nu_times() const noexcept { return nu_tv_ ? n_transitions() : 1; }
    int nu_cells() const noexcept { return nu_sv_ ? n_cells_ : 1; }
    int nu_size() const noexcept { return nu_present_ ? nu_times() * nu_cells() : 0; }
    int nu_index(int k, CellId s) const noexcept {
        return (nu_tv_ ? k : 0) * nu_cells() + (nu_sv_ ? s : 0);
    }

    int delta_size() const noexcept { return delta_sv_ ? n_cells_ : 1; }
    int delta_index(CellId s) const noexcept { return delta_sv_ ? s : 0; }

    bool nu_present() const noexcept { return nu_present_; }
    bool zeta_time_varying() const noexcept { return zeta_tv_; }
    bool nu_time_varying() const noexcept { return nu_tv_; }
    bool nu_space_varying() const noexcept { return nu_sv_; }
    bool delta_space_varying() const noexcept { return delta_sv_; }

private:
    int n_times_;
    int n_cells_;
    bool zeta_tv_;
    bool nu_present_;
    bool nu_tv_;
    bool nu_sv_;
    bool delta_sv_;
};

/// One point in the joint posterior. `u` is row-major [t][s].
struct ParamState {
    std::vector<double> zeta;
    std::vector<double> nu1;
    std::vector<double> nu2;
    std::vector<double> delta;
    double sigma2 = 0.1;
    double phi = 0.0;
    std::vector<double> u;

    std::span<const double> u_slice(int t, int n_cells) const {
        return {u.data() + static_cast<std::size_t>(t) * n_cells, static_cast<std::size_t>(n_cells)};
    }
};

// ---- Elementary densities ---------------------------------------------------

double poisson_logpmf(std::int64_t n, double lambda);
double normal_logpdf(double x, double mean, double var);
/// Normal restricted to [0, inf) and renormalized; -inf below zero.
double truncated_normal_logpdf(double x, double mean, double var);
double inverse_gamma_logpdf(double x, double shape, double scale);

// ---- Model stages -----------------------------------------------------------

/// lambda = exp(u) or exp(u + log c). Throws NumericDomainError for non-finite u.
std::vector<double> log_intensity(std::span<const double> u, const CellPopulation* pop);

/// Sum over observed cells of log Poisson(n | lambda). Throws std::invalid_argument
/// for negative counts or non-positive intensities.
double obs_loglik(std::span<const std::int64_t> n, std::span<const double> lambda,
                  std::span<const std::uint8_t> observed = {});

/// Gaussian log-density of an innovation field eps [K][S]. With phi != 0 the
/// errors follow eps_k = phi eps_{k-1} + eta_k, the first slice drawn from the
/// stationary N(0, sigma2 / (1 - phi^2)).
double innovation_loglik(std::span<const double> eps, int n_transitions, int n_cells, double sigma2,
                         double phi);

/// Hierarchical model with fixed data: grid, spec, priors and observations.
class Model {
public:
    Model(Grid grid, ModelSpec spec, Hyperparams hp, Observations obs,
          std::optional<CellPopulation> population = std::nullopt);

    const Grid& grid() const noexcept { return grid_; }
    const ModelSpec& spec() const noexcept { return spec_; }
    const Hyperparams& hyperparams() const noexcept { return hp_; }
    const Observations& observations() const noexcept { return obs_; }
    const ParamLayout& layout() const noexcept { return layout_; }
    const std::optional<CellPopulation>& population() const noexcept { return pop_; }
    /// log c(s) under population adjustment, zeros otherwise.
    std::span<const double> log_offset() const noexcept { return log_offset_; }
    /// Prior mean of the first latent slice: log(n + 1) minus the offset.
    std::span<const double> init_mean() const noexcept { return init_mean_; }

    int n_times() const noexcept { return obs_.n_times; }
    int n_cells() const noexcept { return grid_.size(); }

    /// Throws std::invalid_argument if block sizes do not match the layout.
    void check_shapes(const ParamState& state) const;

    Coefficients coefficients(const ParamState& state, int transition) const;
    Propagator propagator(const ParamState& state, int transition) const;
    /// eps[k][s] = u[k+1](s) - (H_k u[k])(s), k = 0 .. T-2.
    std::vector<double> innovations(const ParamState& state) const;

    double obs_loglik(const ParamState& state) const;
    double process_loglik(const ParamState& state) const;
    double log_prior(const ParamState& state) const;
    double log_posterior(const ParamState& state) const;

private:
    Grid grid_;
    ModelSpec spec_;
    Hyperparams hp_;
    Observations obs_;
    std::optional<CellPopulation> pop_;
    ParamLayout layout_;
    std::vector<double> log_offset_;
    std::vector<double> init_mean_;
};

}  // namespace adrb
