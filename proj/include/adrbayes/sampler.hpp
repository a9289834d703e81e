#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adrbayes/model.hpp"

namespace adrb {

/// Which Gibbs blocks run. Disabled blocks keep their initial values.
struct BlockToggles {
    bool u = true;
    bool nu = true;
    bool zeta = true;
    bool delta = true;
    bool sigma2 = true;
    bool phi = true;
};

/// Per-iteration view handed to an observer; valid only during the call.
struct IterationView {
    int chain = 0;
    long iteration = 0;  // 0-based, burn-in included
    const ParamState& state;
    std::span<const double> eps;      // [K][S]
    std::span<const double> u_scale;  // random-walk scale per latent site
    double phi_scale = 0.0;
};

struct SamplerConfig {
    int n_chains = 3;
    long n_iter = 10000;
    long n_burnin = 4000;
    int thin = 1;
    std::uint64_t seed = 1;
    /// 0 runs one thread per chain.
    int threads = 0;

    double u_scale = 0.3;
    /// Single-site sweeps over the latent field per iteration.
    int u_sweeps = 3;
    double phi_scale = 0.1;
    int adapt_window = 50;
    double target_accept = 0.44;
    double init_jitter = 0.1;
    /// Without AR errors, also update zeta, delta and sigma2 with nu integrated
    /// out (sigma2 by Metropolis on that marginal, collapsed_steps times), then
    /// draw nu exactly given the rest.
    bool collapse_nu = true;
    int collapsed_steps = 5;

    /// Keep draws of u (and eps under AR errors); posterior means are kept regardless.
    bool store_latent = true;
    BlockToggles update;
    /// Starting point for every chain (jitter is still applied to free blocks).
    std::optional<ParamState> init;

    std::function<void(const IterationView&)> observer;

    /// Throws std::invalid_argument, e.g. when n_burnin >= n_iter.
    void validate() const;
};

/// Stored quantity: name plus "t:s" index string (1-based; '*' for a collapsed axis).
struct ParamInfo {
    std::string name;
    std::string index;
};

struct ChainResult {
    std::vector<double> draws;  // column-major [param][draw]
    double u_accept = 0.0;      // post-burn-in acceptance rates
    double phi_accept = 0.0;
    std::vector<double> u_mean;    // running post-burn-in means, [T][S]
    std::vector<double> u_sq;      // running second moments
    std::vector<double> eps_mean;  // [K][S]
    std::vector<double> eps_sq;
};

class PosteriorSamples {
public:
    PosteriorSamples(ModelSpec spec, int n_times, int n_cells, bool store_latent);

    const ParamLayout& layout() const noexcept { return layout_; }
    const ModelSpec& spec() const noexcept { return spec_; }
    const std::vector<ParamInfo>& params() const noexcept { return params_; }
    int n_params() const noexcept { return static_cast<int>(params_.size()); }
    int n_chains() const noexcept { return static_cast<int>(chains_.size()); }
    long n_draws() const noexcept { return n_draws_; }
    bool stores_latent() const noexcept { return store_latent_; }

    /// Position of a stored quantity, or -1.
    int find(std::string_view name, std::string_view index) const;
    std::span<const double> draws(int chain, int param) const;
    std::vector<std::span<const double>> all_chains(int param) const;
    const ChainResult& chain(int c) const { return chains_.at(c); }

    /// Posterior means of every block, u from the running means.
    ParamState posterior_mean() const;
    /// Posterior means of the innovations, [K][S].
    std::vector<double> eps_mean() const;
    std::vector<double> u_mean() const;
    /// Draw `d` of chain `c` as a state; u is filled only when latent draws are stored.
    ParamState state_at(int c, long d) const;
    std::vector<double> eps_at(int c, long d) const;

    // Internal: the sampler fills these.
    void set_draw_count(long n) { n_draws_ = n; }
    void add_chain(ChainResult r) { chains_.push_back(std::move(r)); }
    /// Writes the stored quantities of `st` (and `eps`) into draw slot d.
    void record(ChainResult& r, long d, const ParamState& st, std::span<const double> eps) const;

private:
    ModelSpec spec_;
    ParamLayout layout_;
    bool store_latent_;
    std::vector<ParamInfo> params_;
    long n_draws_ = 0;
    std::vector<ChainResult> chains_;
    // Offsets of each block within params_.
    int off_zeta_ = 0, off_nu1_ = 0, off_nu2_ = 0, off_delta_ = 0, off_sigma2_ = 0, off_phi_ = -1;
    int off_u_ = -1, off_eps_ = -1;
};

/// Metropolis-within-Gibbs over u, nu, zeta, delta, sigma2 and phi.
/// Chains are independent and deterministic given (config.seed, chain index).
/// Throws InitializationError if a chain cannot start at a finite posterior and
/// IterationError naming the block and iteration if the state diverges.
PosteriorSamples fit(const Model& model, const SamplerConfig& config);

/// Starting state used by fit() before jitter: u = log(n + 1) - offset,
/// rates at prior means, delta floored at 0.01, sigma2 = 0.1, phi = 0.
ParamState default_init(const Model& model);

}  // namespace adrb
