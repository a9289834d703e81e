#include "adrbayes/sampler.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <stdexcept>
#include <thread>

#include "adrbayes/errors.hpp"
#include "adrbayes/random.hpp"

namespace adrb {

void SamplerConfig::validate() const {
    if (n_chains < 1) throw std::invalid_argument("need at least one chain");
    if (n_iter < 1) throw std::invalid_argument("need at least one iteration");
    if (n_burnin < 0 || n_burnin >= n_iter)
        throw std::invalid_argument("burn-in (" + std::to_string(n_burnin) +
                                    ") must be smaller than the iteration count (" +
                                    std::to_string(n_iter) + ")");
    if (thin < 1) throw std::invalid_argument("thin must be >= 1");
    if (threads < 0) throw std::invalid_argument("threads must be >= 0");
    if (!(u_scale > 0.0) || !(phi_scale > 0.0)) throw std::invalid_argument("proposal scales must be positive");
    if (adapt_window < 1) throw std::invalid_argument("adapt_window must be >= 1");
    if (!(target_accept > 0.0 && target_accept < 1.0))
        throw std::invalid_argument("target_accept must lie in (0, 1)");
    if (!(init_jitter >= 0.0)) throw std::invalid_argument("init_jitter must be >= 0");
    if (u_sweeps < 1) throw std::invalid_argument("u_sweeps must be >= 1");
    if (collapsed_steps < 1) throw std::invalid_argument("collapsed_steps must be >= 1");
}

// ---- PosteriorSamples ---------------------------------------------------------

namespace {

std::string axis(bool present, int value) { return present ? std::to_string(value) : std::string("*"); }

}  // namespace

PosteriorSamples::PosteriorSamples(ModelSpec spec, int n_times, int n_cells, bool store_latent)
    : spec_(std::move(spec)), layout_(spec_, n_times, n_cells), store_latent_(store_latent) {
    const auto& L = layout_;
    off_zeta_ = 0;
    for (int k = 0; k < L.zeta_size(); ++k)
        params_.push_back({"zeta", axis(L.zeta_time_varying(), k + 1) + ":*"});
    auto add_nu = [&](const char* name) {
        for (int k = 0; k < (L.nu_present() ? L.nu_times() : 0); ++k)
            for (int s = 0; s < L.nu_cells(); ++s)
                params_.push_back({name, axis(L.nu_time_varying(), k + 1) + ":" +
                                             axis(L.nu_space_varying(), s + 1)});
    };
    off_nu1_ = n_params();
    add_nu("nu1");
    off_nu2_ = n_params();
    add_nu("nu2");
    off_delta_ = n_params();
    for (int s = 0; s < L.delta_size(); ++s)
        params_.push_back({"delta", "*:" + axis(L.delta_space_varying(), s + 1)});
    off_sigma2_ = n_params();
    params_.push_back({"sigma2", "*:*"});
    if (spec_.ar_errors) {
        off_phi_ = n_params();
        params_.push_back({"phi", "*:*"});
    }
    if (store_latent_) {
        off_u_ = n_params();
        for (int t = 0; t < n_times; ++t)
            for (int s = 0; s < n_cells; ++s)
                params_.push_back({"u", std::to_string(t + 1) + ":" + std::to_string(s + 1)});
        if (spec_.ar_errors) {
            off_eps_ = n_params();
            for (int k = 0; k < L.n_transitions(); ++k)
                for (int s = 0; s < n_cells; ++s)
                    params_.push_back({"eps", std::to_string(k + 2) + ":" + std::to_string(s + 1)});
        }
    }
}

int PosteriorSamples::find(std::string_view name, std::string_view index) const {
    for (int p = 0; p < n_params(); ++p)
        if (params_[p].name == name && params_[p].index == index) return p;
    return -1;
}

std::span<const double> PosteriorSamples::draws(int chain, int param) const {
    const auto& d = chains_.at(chain).draws;
    return {d.data() + static_cast<std::size_t>(param) * n_draws_, static_cast<std::size_t>(n_draws_)};
}

std::vector<std::span<const double>> PosteriorSamples::all_chains(int param) const {
    std::vector<std::span<const double>> out;
    for (int c = 0; c < n_chains(); ++c) out.push_back(draws(c, param));
    return out;
}

void PosteriorSamples::record(ChainResult& r, long d, const ParamState& st, std::span<const double> eps) const {
    auto put = [&](int p, double v) { r.draws[static_cast<std::size_t>(p) * n_draws_ + d] = v; };
    for (std::size_t i = 0; i < st.zeta.size(); ++i) put(off_zeta_ + static_cast<int>(i), st.zeta[i]);
    for (std::size_t i = 0; i < st.nu1.size(); ++i) put(off_nu1_ + static_cast<int>(i), st.nu1[i]);
    for (std::size_t i = 0; i < st.nu2.size(); ++i) put(off_nu2_ + static_cast<int>(i), st.nu2[i]);
    for (std::size_t i = 0; i < st.delta.size(); ++i) put(off_delta_ + static_cast<int>(i), st.delta[i]);
    put(off_sigma2_, st.sigma2);
    if (off_phi_ >= 0) put(off_phi_, st.phi);
    if (off_u_ >= 0)
        for (std::size_t i = 0; i < st.u.size(); ++i) put(off_u_ + static_cast<int>(i), st.u[i]);
    if (off_eps_ >= 0)
        for (std::size_t i = 0; i < eps.size(); ++i) put(off_eps_ + static_cast<int>(i), eps[i]);
}

ParamState PosteriorSamples::state_at(int c, long d) const {
    ParamState st;
    auto get = [&](int p) { return draws(c, p)[static_cast<std::size_t>(d)]; };
    auto fill = [&](std::vector<double>& v, int off, int n) {
        v.resize(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) v[i] = get(off + i);
    };
    fill(st.zeta, off_zeta_, layout_.zeta_size());
    fill(st.nu1, off_nu1_, layout_.nu_size());
    fill(st.nu2, off_nu2_, layout_.nu_size());
    fill(st.delta, off_delta_, layout_.delta_size());
    st.sigma2 = get(off_sigma2_);
    st.phi = off_phi_ >= 0 ? get(off_phi_) : 0.0;
    if (off_u_ >= 0) fill(st.u, off_u_, layout_.n_times() * layout_.n_cells());
    return st;
}

std::vector<double> PosteriorSamples::eps_at(int c, long d) const {
    std::vector<double> e;
    if (off_eps_ < 0) return e;
    const int n = layout_.n_transitions() * layout_.n_cells();
    for (int i = 0; i < n; ++i) e.push_back(draws(c, off_eps_ + i)[static_cast<std::size_t>(d)]);
    return e;
}

namespace {

std::vector<double> average(const std::vector<ChainResult>& chains, std::vector<double> ChainResult::*field) {
    std::vector<double> out;
    for (const auto& c : chains) {
        const auto& v = c.*field;
        if (out.empty()) out.assign(v.size(), 0.0);
        for (std::size_t i = 0; i < v.size(); ++i) out[i] += v[i] / static_cast<double>(chains.size());
    }
    return out;
}

}  // namespace

std::vector<double> PosteriorSamples::u_mean() const { return average(chains_, &ChainResult::u_mean); }
std::vector<double> PosteriorSamples::eps_mean() const { return average(chains_, &ChainResult::eps_mean); }

ParamState PosteriorSamples::posterior_mean() const {
    ParamState st;
    auto mean_of = [&](int p) {
        double acc = 0.0;
        for (int c = 0; c < n_chains(); ++c)
            for (double v : draws(c, p)) acc += v;
        return acc / (static_cast<double>(n_chains()) * static_cast<double>(n_draws_));
    };
    auto fill = [&](std::vector<double>& v, int off, int n) {
        v.resize(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) v[i] = mean_of(off + i);
    };
    fill(st.zeta, off_zeta_, layout_.zeta_size());
    fill(st.nu1, off_nu1_, layout_.nu_size());
    fill(st.nu2, off_nu2_, layout_.nu_size());
    fill(st.delta, off_delta_, layout_.delta_size());
    st.sigma2 = mean_of(off_sigma2_);
    st.phi = off_phi_ >= 0 ? mean_of(off_phi_) : 0.0;
    st.u = u_mean();
    return st;
}

// ---- Initialization -----------------------------------------------------------

ParamState default_init(const Model& model) {
    const auto& L = model.layout();
    const auto& hp = model.hyperparams();
    const auto& obs = model.observations();
    const int T = L.n_times();
    const int S = L.n_cells();
    const auto off = model.log_offset();

    ParamState st;
    st.zeta.assign(static_cast<std::size_t>(L.zeta_size()), hp.zeta_mean);
    st.nu1.assign(static_cast<std::size_t>(L.nu_size()), hp.nu1_mean);
    st.nu2.assign(static_cast<std::size_t>(L.nu_size()), hp.nu2_mean);
    st.delta.assign(static_cast<std::size_t>(L.delta_size()), std::max(hp.delta_mean, 0.01));
    st.sigma2 = 0.1;
    st.phi = 0.0;
    st.u.resize(static_cast<std::size_t>(T) * S);
    for (int t = 0; t < T; ++t)
        for (CellId s = 0; s < S; ++s) {
            const std::size_t i = static_cast<std::size_t>(t) * S + s;
            if (obs.is_observed(t, s))
                st.u[i] = std::log(static_cast<double>(obs.count(t, s)) + 1.0) - off[s];
            else
                st.u[i] = t > 0 ? st.u[i - S] : -off[s];
        }
    return st;
}

// ---- One chain ----------------------------------------------------------------

namespace {

struct Entry {
    int k;
    CellId r;
    double g;  // d eps(k, r) / d theta = -g
};

class ChainRunner {
public:
    ChainRunner(const Model& model, const SamplerConfig& cfg, const PosteriorSamples& out, int chain)
        : m_(model),
          cfg_(cfg),
          out_(out),
          chain_(chain),
          L_(model.layout()),
          T_(L_.n_times()),
          S_(L_.n_cells()),
          K_(L_.n_transitions()),
          ar_(model.spec().ar_errors),
          rng_(derive_seed(cfg.seed, static_cast<std::uint64_t>(chain))),
          sens_(model.grid()) {}

    ChainResult run();

private:
    std::size_t ix(int k, CellId s) const { return static_cast<std::size_t>(k) * S_ + s; }
    double u(int t, CellId s) const { return st_.u[ix(t, s)]; }
    std::span<const double> u_slice(int t) const { return st_.u_slice(t, S_); }
    bool use_collapsed() const {
        return cfg_.collapse_nu && !ar_ && L_.nu_present() && cfg_.update.nu;
    }
    double weight0() const { return ar_ ? std::sqrt(1.0 - st_.phi * st_.phi) : 1.0; }
    double eta(int k, CellId s) const {
        return k == 0 ? w0_ * eps_[ix(0, s)] : eps_[ix(k, s)] - phi_ * eps_[ix(k - 1, s)];
    }

    void initialize();
    void rebuild();
    void update_u();
    bool u_step(int t, CellId s);
    double linear_update(double current, double m0, double v0, bool nonneg);
    void update_nu(bool first);
    void update_zeta();
    void update_delta();
    void update_sigma2();
    void zeta_entries(int a);
    void delta_entries(int a);
    void update_collapsed();
    double collapsed_linear_update(double current, double m0, double v0, bool nonneg);
    void update_phi();
    void adapt(long iter);
    void check_finite(const char* block, std::span<const double> v) const;
    void check_finite(const char* block, double v) const;

    const Model& m_;
    const SamplerConfig& cfg_;
    const PosteriorSamples& out_;
    int chain_;
    const ParamLayout& L_;
    int T_, S_, K_;
    bool ar_;
    Rng rng_;
    StencilSensitivity sens_;

    ParamState st_;
    std::vector<Propagator> H_;
    std::vector<double> eps_;
    double phi_ = 0.0;
    double w0_ = 1.0;
    long iter_ = 0;

    std::vector<Entry> entries_;
    std::vector<double> b_;
    std::vector<std::size_t> touched_;
    std::vector<std::uint8_t> mark_;

    struct NuGroup {
        double a11 = 0, a12 = 0, a22 = 0;  // G'G
        double b1 = 0, b2 = 0;             // G' r
        double rr = 0;
        double n = 0;
        double gram = 0;  // a11 a22 - a12^2, accumulated without cancellation
        // det of V^-1 + G'G / s2 for prior precisions iv1, iv2
        double det(double iv1, double iv2, double s2) const {
            return iv1 * iv2 + (iv1 * a22 + iv2 * a11) / s2 + gram / (s2 * s2);
        }
    };
    std::vector<NuGroup> groups_;
    std::vector<double> row_r_, row_g1_, row_g2_;
    std::vector<int> row_group_;
    struct GroupDelta {
        double bb = 0, rb = 0, gb1 = 0, gb2 = 0;
    };
    std::vector<GroupDelta> gdelta_;
    std::vector<int> touched_groups_;
    std::vector<std::uint8_t> group_mark_;
    double log_s2_scale_ = 0.5;
    int s2_acc_ = 0;

    std::vector<double> u_scale_;
    std::vector<int> u_acc_;
    long u_acc_total_ = 0;
    double phi_scale_ = 0.1;
    int phi_acc_ = 0;
    long phi_acc_total_ = 0;
    int n_batches_ = 0;
};

void ChainRunner::check_finite(const char* block, double v) const {
    if (!std::isfinite(v))
        throw IterationError(block, iter_, "chain " + std::to_string(chain_ + 1) + ": non-finite value");
}

void ChainRunner::check_finite(const char* block, std::span<const double> v) const {
    for (double x : v) check_finite(block, x);
}

void ChainRunner::initialize() {
    st_ = cfg_.init ? *cfg_.init : default_init(m_);
    try {
        m_.check_shapes(st_);
    } catch (const std::exception& e) {
        throw InitializationError(std::string("initial state: ") + e.what());
    }
    const double j = cfg_.init_jitter;
    if (j > 0.0) {
        const auto& up = cfg_.update;
        if (up.u)
            for (double& x : st_.u) x += draw_normal(rng_, 0.0, j);
        if (up.zeta)
            for (double& x : st_.zeta) x += draw_normal(rng_, 0.0, j);
        if (up.nu) {
            for (double& x : st_.nu1) x += draw_normal(rng_, 0.0, j);
            for (double& x : st_.nu2) x += draw_normal(rng_, 0.0, j);
        }
        if (up.delta)
            for (double& x : st_.delta) x *= std::exp(draw_normal(rng_, 0.0, j));
    }
    if (!ar_) st_.phi = 0.0;
    double lp = 0.0;
    try {
        lp = m_.log_posterior(st_);
    } catch (const std::exception& e) {
        throw InitializationError("chain " + std::to_string(chain_ + 1) + ": " + e.what());
    }
    if (!std::isfinite(lp))
        throw InitializationError("chain " + std::to_string(chain_ + 1) +
                                  ": log posterior is not finite at the starting point");

    phi_ = st_.phi;
    w0_ = weight0();
    b_.assign(static_cast<std::size_t>(K_) * S_, 0.0);
    mark_.assign(b_.size(), 0);
    u_scale_.assign(st_.u.size(), cfg_.u_scale);
    u_acc_.assign(st_.u.size(), 0);
    phi_scale_ = cfg_.phi_scale;
    H_.clear();
    for (int k = 0; k < K_; ++k) H_.push_back(m_.propagator(st_, k));
    eps_ = m_.innovations(st_);
}

void ChainRunner::rebuild() {
    for (int k = 0; k < K_; ++k) {
        H_[k] = m_.propagator(st_, k);
        H_[k].apply_into(u_slice(k), std::span<double>(eps_.data() + ix(k, 0), static_cast<std::size_t>(S_)));
        for (CellId s = 0; s < S_; ++s) eps_[ix(k, s)] = u(k + 1, s) - eps_[ix(k, s)];
    }
    check_finite("process", eps_);
}

bool ChainRunner::u_step(int t, CellId s) {
    const std::size_t site = ix(t, s);
    const double cur = st_.u[site];
    const double d = u_scale_[site] * draw_normal(rng_, 0.0, 1.0);
    const double prop = cur + d;

    double dlog = 0.0;
    const auto& obs = m_.observations();
    if (obs.is_observed(t, s)) {
        const double off = m_.log_offset()[s];
        dlog += static_cast<double>(obs.count(t, s)) * d - (std::exp(prop + off) - std::exp(cur + off));
    }
    if (t == 0) {
        const double mu = m_.init_mean()[s];
        const double v = m_.hyperparams().init_var;
        dlog -= ((prop - mu) * (prop - mu) - (cur - mu) * (cur - mu)) / (2.0 * v);
    }

    // Innovations shifted by the move: eps(t-1, s) directly, eps(t, .) through column s of H_t.
    struct Change {
        int k;
        CellId r;
        double de;
    };
    std::array<Change, 6> ch{};
    int nch = 0;
    if (t >= 1) ch[nch++] = {t - 1, s, d};
    if (t < K_) {
        const auto& h = H_[t];
        const auto cols = h.row_columns(s);
        // The pattern is symmetric, so the rows holding column s are s and its active neighbors.
        for (int c : cols) ch[nch++] = {t, c, -h.weight(c, s) * d};
    }
    auto eps_new = [&](int k, CellId r) {
        double e = eps_[ix(k, r)];
        for (int i = 0; i < nch; ++i)
            if (ch[i].k == k && ch[i].r == r) e += ch[i].de;
        return e;
    };
    auto eta_new = [&](int k, CellId r) {
        return k == 0 ? w0_ * eps_new(0, r) : eps_new(k, r) - phi_ * eps_new(k - 1, r);
    };

    std::array<std::pair<int, CellId>, 12> aff{};
    int naff = 0;
    auto add_aff = [&](int k, CellId r) {
        for (int i = 0; i < naff; ++i)
            if (aff[i].first == k && aff[i].second == r) return;
        aff[naff++] = {k, r};
    };
    for (int i = 0; i < nch; ++i) {
        add_aff(ch[i].k, ch[i].r);
        if (ar_ && ch[i].k + 1 < K_) add_aff(ch[i].k + 1, ch[i].r);
    }
    double dss = 0.0;
    for (int i = 0; i < naff; ++i) {
        const double o = eta(aff[i].first, aff[i].second);
        const double n = eta_new(aff[i].first, aff[i].second);
        dss += n * n - o * o;
    }
    dlog -= dss / (2.0 * st_.sigma2);

    if (!(std::log(draw_uniform(rng_)) < dlog)) return false;
    for (int i = 0; i < nch; ++i) eps_[ix(ch[i].k, ch[i].r)] += ch[i].de;
    st_.u[site] = prop;
    return true;
}

void ChainRunner::update_u() {
    for (int t = 0; t < T_; ++t)
        for (CellId s = 0; s < S_; ++s)
            if (u_step(t, s)) {
                ++u_acc_[ix(t, s)];
                if (iter_ >= cfg_.n_burnin) ++u_acc_total_;
            }
}

// Gaussian full conditional of one rate that enters eps linearly through entries_.
double ChainRunner::linear_update(double current, double m0, double v0, bool nonneg) {
    touched_.clear();
    auto bump = [&](int k, CellId r, double v) {
        const std::size_t i = ix(k, r);
        if (!mark_[i]) {
            mark_[i] = 1;
            touched_.push_back(i);
        }
        b_[i] += v;
    };
    for (const auto& e : entries_) {
        bump(e.k, e.r, -e.g * (e.k == 0 ? w0_ : 1.0));
        if (ar_ && e.k + 1 < K_) bump(e.k + 1, e.r, phi_ * e.g);
    }
    double bb = 0.0;
    double eb = 0.0;
    for (std::size_t i : touched_) {
        const int k = static_cast<int>(i / S_);
        const CellId r = static_cast<CellId>(i % S_);
        const double bi = b_[i];
        bb += bi * bi;
        eb += (eta(k, r) - current * bi) * bi;
        b_[i] = 0.0;
        mark_[i] = 0;
    }
    const double prec = bb / st_.sigma2 + 1.0 / v0;
    const double mean = (m0 / v0 - eb / st_.sigma2) / prec;
    const double sd = 1.0 / std::sqrt(prec);
    const double next = nonneg ? draw_truncated_normal(rng_, mean, sd, 0.0) : draw_normal(rng_, mean, sd);
    const double diff = next - current;
    for (const auto& e : entries_) eps_[ix(e.k, e.r)] -= e.g * diff;
    return next;
}

void ChainRunner::update_nu(bool first) {
    const auto& hp = m_.hyperparams();
    auto& vals = first ? st_.nu1 : st_.nu2;
    const double m0 = first ? hp.nu1_mean : hp.nu2_mean;
    const double v0 = first ? hp.nu1_var : hp.nu2_var;
    const bool tv = L_.nu_time_varying();
    const bool sv = L_.nu_space_varying();
    for (int a = 0; a < L_.nu_times(); ++a)
        for (int c = 0; c < L_.nu_cells(); ++c) {
            entries_.clear();
            for (int k = tv ? a : 0; k < (tv ? a + 1 : K_); ++k) {
                const auto uk = u_slice(k);
                for (CellId s = sv ? c : 0; s < (sv ? c + 1 : S_); ++s) {
                    const double g = first ? sens_.nu1(uk, s) : sens_.nu2(uk, s);
                    if (g != 0.0) entries_.push_back({k, s, g});
                }
            }
            double& v = vals[static_cast<std::size_t>(a) * L_.nu_cells() + c];
            v = linear_update(v, m0, v0, false);
            check_finite(first ? "nu1" : "nu2", v);
        }
}

void ChainRunner::zeta_entries(int a) {
    const bool tv = L_.zeta_time_varying();
    entries_.clear();
    for (int k = tv ? a : 0; k < (tv ? a + 1 : K_); ++k) {
        const auto uk = u_slice(k);
        for (CellId s = 0; s < S_; ++s) {
            const double g = sens_.zeta(uk, s);
            if (g != 0.0) entries_.push_back({k, s, g});
        }
    }
}

void ChainRunner::delta_entries(int a) {
    const bool sv = L_.delta_space_varying();
    entries_.clear();
    for (int k = 0; k < K_; ++k) {
        const auto uk = u_slice(k);
        for (CellId j = sv ? a : 0; j < (sv ? a + 1 : S_); ++j)
            for (const auto& term : sens_.delta_terms(j)) {
                const double g = StencilSensitivity::eval(term, uk);
                if (g != 0.0) entries_.push_back({k, term.row, g});
            }
    }
}

void ChainRunner::update_zeta() {
    const auto& hp = m_.hyperparams();
    for (int a = 0; a < L_.zeta_size(); ++a) {
        zeta_entries(a);
        st_.zeta[a] = linear_update(st_.zeta[a], hp.zeta_mean, hp.zeta_var, false);
        check_finite("zeta", st_.zeta[a]);
    }
}

void ChainRunner::update_delta() {
    const auto& hp = m_.hyperparams();
    for (int a = 0; a < L_.delta_size(); ++a) {
        delta_entries(a);
        st_.delta[a] = linear_update(st_.delta[a], hp.delta_mean, hp.delta_var, true);
        check_finite("delta", st_.delta[a]);
    }
}

void ChainRunner::update_sigma2() {
    const auto& hp = m_.hyperparams();
    double ss = 0.0;
    for (int k = 0; k < K_; ++k)
        for (CellId s = 0; s < S_; ++s) {
            const double e = eta(k, s);
            ss += e * e;
        }
    const double n = static_cast<double>(K_) * S_;
    st_.sigma2 = draw_inverse_gamma(rng_, hp.q + 0.5 * n, hp.r + 0.5 * ss);
    if (!(st_.sigma2 > 0.0)) check_finite("sigma2", std::numeric_limits<double>::quiet_NaN());
    check_finite("sigma2", st_.sigma2);
}

// Each nu slot pair touches a disjoint set of rows, so with iid errors the
// innovations of a group are N(G m, sigma2 I + G V G') once nu is integrated out.
// zeta and delta are drawn from that marginal, sigma2 by Metropolis on it, and
// nu last from its full conditional.
void ChainRunner::update_collapsed() {
    const auto& hp = m_.hyperparams();
    const bool tv = L_.nu_time_varying();
    const bool sv = L_.nu_space_varying();
    const int nc = L_.nu_cells();
    groups_.assign(static_cast<std::size_t>(L_.nu_size()), NuGroup{});
    row_r_.resize(eps_.size());
    row_g1_.resize(eps_.size());
    row_g2_.resize(eps_.size());
    row_group_.resize(eps_.size());
    auto group_of = [&](int k, CellId s) { return (tv ? k : 0) * nc + (sv ? s : 0); };
    for (int k = 0; k < K_; ++k) {
        const auto uk = u_slice(k);
        for (CellId s = 0; s < S_; ++s) {
            const std::size_t i = ix(k, s);
            const int gi = group_of(k, s);
            const double g1 = sens_.nu1(uk, s);
            const double g2 = sens_.nu2(uk, s);
            // Residual with nu removed, then centred at the prior mean.
            const double r = eps_[i] + g1 * st_.nu1[gi] + g2 * st_.nu2[gi];
            row_r_[i] = r;
            row_g1_[i] = g1;
            row_g2_[i] = g2;
            row_group_[i] = gi;
            const double rc = r - g1 * hp.nu1_mean - g2 * hp.nu2_mean;
            auto& g = groups_[gi];
            // Lagrange identity: the new row adds sum_j (g1 g2_j - g2 g1_j)^2.
            g.gram += std::max(0.0, g2 * g2 * g.a11 - 2.0 * g1 * g2 * g.a12 + g1 * g1 * g.a22);
            g.a11 += g1 * g1;
            g.a12 += g1 * g2;
            g.a22 += g2 * g2;
            g.b1 += g1 * rc;
            g.b2 += g2 * rc;
            g.rr += rc * rc;
            g.n += 1.0;
        }
    }
    const double iv1 = 1.0 / hp.nu1_var;
    const double iv2 = 1.0 / hp.nu2_var;
    if (cfg_.update.zeta)
        for (int a = 0; a < L_.zeta_size(); ++a) {
            zeta_entries(a);
            st_.zeta[a] = collapsed_linear_update(st_.zeta[a], hp.zeta_mean, hp.zeta_var, false);
            check_finite("zeta", st_.zeta[a]);
        }
    if (cfg_.update.delta)
        for (int a = 0; a < L_.delta_size(); ++a) {
            delta_entries(a);
            st_.delta[a] = collapsed_linear_update(st_.delta[a], hp.delta_mean, hp.delta_var, true);
            check_finite("delta", st_.delta[a]);
        }
    auto log_target = [&](double s2) {
        double lp = inverse_gamma_logpdf(s2, hp.q, hp.r) + std::log(s2);  // log-scale Jacobian
        for (const auto& g : groups_) {
            const double p11 = iv1 + g.a11 / s2;
            const double p12 = g.a12 / s2;
            const double p22 = iv2 + g.a22 / s2;
            const double det = g.det(iv1, iv2, s2);
            const double c1 = g.b1 / s2;
            const double c2 = g.b2 / s2;
            const double quad = (p22 * c1 * c1 - 2.0 * p12 * c1 * c2 + p11 * c2 * c2) / det;
            lp += -0.5 * g.n * std::log(s2) - 0.5 * std::log(det) - 0.5 * g.rr / s2 + 0.5 * quad;
        }
        return lp;
    };
    double cur = st_.sigma2;
    double cur_lp = log_target(cur);
    for (int step = 0; step < (cfg_.update.sigma2 ? cfg_.collapsed_steps : 0); ++step) {
        const double prop = cur * std::exp(log_s2_scale_ * draw_normal(rng_, 0.0, 1.0));
        const double prop_lp = log_target(prop);
        if (std::log(draw_uniform(rng_)) < prop_lp - cur_lp) {
            cur = prop;
            cur_lp = prop_lp;
            ++s2_acc_;
        }
    }
    st_.sigma2 = cur;
    check_finite("sigma2", cur);

    // nu | sigma2: bivariate normal per group.
    for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
        const auto& g = groups_[gi];
        const double p11 = iv1 + g.a11 / cur;
        const double p12 = g.a12 / cur;
        const double p22 = iv2 + g.a22 / cur;
        const double det = g.det(iv1, iv2, cur);
        const double c1 = g.b1 / cur;
        const double c2 = g.b2 / cur;
        const double m1 = (p22 * c1 - p12 * c2) / det;
        const double m2 = (p11 * c2 - p12 * c1) / det;
        // Cholesky of the covariance P^-1 = [p22 -p12; -p12 p11] / det.
        const double s11 = p22 / det;
        const double s12 = -p12 / det;
        const double s22 = p11 / det;
        const double l11 = std::sqrt(s11);
        const double l21 = s12 / l11;
        const double l22 = std::sqrt(std::max(s22 - l21 * l21, 0.0));
        const double z1 = draw_normal(rng_, 0.0, 1.0);
        const double z2 = draw_normal(rng_, 0.0, 1.0);
        st_.nu1[gi] = hp.nu1_mean + m1 + l11 * z1;
        st_.nu2[gi] = hp.nu2_mean + m2 + l21 * z1 + l22 * z2;
        check_finite("nu1", st_.nu1[gi]);
        check_finite("nu2", st_.nu2[gi]);
    }
    for (int k = 0; k < K_; ++k)
        for (CellId s = 0; s < S_; ++s) {
            const std::size_t i = ix(k, s);
            const int gi = group_of(k, s);
            eps_[i] = row_r_[i] - row_g1_[i] * st_.nu1[gi] - row_g2_[i] * st_.nu2[gi];
        }
}

// Like linear_update, but against the nu-marginal of the groups built by
// update_collapsed. Keeps row_r_ and the group sums in step with the draw.
double ChainRunner::collapsed_linear_update(double current, double m0, double v0, bool nonneg) {
    const auto& hp = m_.hyperparams();
    const double s2 = st_.sigma2;
    touched_.clear();
    for (const auto& e : entries_) {
        const std::size_t i = ix(e.k, e.r);
        if (!mark_[i]) {
            mark_[i] = 1;
            touched_.push_back(i);
        }
        b_[i] += e.g;
    }
    gdelta_.resize(groups_.size());
    group_mark_.resize(groups_.size(), 0);
    touched_groups_.clear();
    for (std::size_t i : touched_) {
        const int gi = row_group_[i];
        auto& d = gdelta_[gi];
        if (!group_mark_[gi]) {
            group_mark_[gi] = 1;
            touched_groups_.push_back(gi);
        }
        const double bi = b_[i];
        const double rc = row_r_[i] - row_g1_[i] * hp.nu1_mean - row_g2_[i] * hp.nu2_mean;
        d.bb += bi * bi;
        d.rb += rc * bi;
        d.gb1 += row_g1_[i] * bi;
        d.gb2 += row_g2_[i] * bi;
    }
    // rc(x) = rc - x b with x = theta - current; per group the quadratic form is
    // (rc'rc - c'P^-1 c) / s2 with c = G'rc / s2.
    const double iv1 = 1.0 / hp.nu1_var;
    const double iv2 = 1.0 / hp.nu2_var;
    double A = 0.0, B = 0.0;
    for (int gi : touched_groups_) {
        const auto& g = groups_[gi];
        const auto& d = gdelta_[gi];
        const double p11 = iv1 + g.a11 / s2;
        const double p12 = g.a12 / s2;
        const double p22 = iv2 + g.a22 / s2;
        const double det = g.det(iv1, iv2, s2);
        auto pinv = [&](double x1, double x2, double y1, double y2) {
            return (x1 * (p22 * y1 - p12 * y2) + x2 * (p11 * y2 - p12 * y1)) / det;
        };
        A += std::max(0.0, d.bb / s2 - pinv(d.gb1, d.gb2, d.gb1, d.gb2) / (s2 * s2));
        B += d.rb / s2 - pinv(g.b1, g.b2, d.gb1, d.gb2) / (s2 * s2);
    }
    const double prec = A + 1.0 / v0;
    const double mean = (A * current + B + m0 / v0) / prec;
    const double sd = 1.0 / std::sqrt(prec);
    const double next = nonneg ? draw_truncated_normal(rng_, mean, sd, 0.0) : draw_normal(rng_, mean, sd);
    const double x = next - current;
    for (std::size_t i : touched_) {
        row_r_[i] -= x * b_[i];
        b_[i] = 0.0;
        mark_[i] = 0;
    }
    for (int gi : touched_groups_) {
        auto& g = groups_[gi];
        auto& d = gdelta_[gi];
        g.b1 -= x * d.gb1;
        g.b2 -= x * d.gb2;
        g.rr += -2.0 * x * d.rb + x * x * d.bb;
        d = GroupDelta{};
        group_mark_[gi] = 0;
    }
    return next;
}

void ChainRunner::update_phi() {
    const double prop = phi_ + phi_scale_ * draw_normal(rng_, 0.0, 1.0);
    if (!(std::abs(prop) < 1.0)) return;
    const double cur_ll = innovation_loglik(eps_, K_, S_, st_.sigma2, phi_);
    const double new_ll = innovation_loglik(eps_, K_, S_, st_.sigma2, prop);
    if (std::log(draw_uniform(rng_)) < new_ll - cur_ll) {
        phi_ = prop;
        st_.phi = prop;
        w0_ = weight0();
        ++phi_acc_;
        if (iter_ >= cfg_.n_burnin) ++phi_acc_total_;
    }
}

void ChainRunner::adapt(long iter) {
    if (iter >= cfg_.n_burnin || (iter + 1) % cfg_.adapt_window != 0) return;
    ++n_batches_;
    const double step = std::min(0.5, 1.0 / std::sqrt(static_cast<double>(n_batches_)));
    const double w = static_cast<double>(cfg_.adapt_window);
    for (std::size_t i = 0; i < u_scale_.size(); ++i) {
        const double rate = u_acc_[i] / (w * cfg_.u_sweeps);
        u_scale_[i] *= std::exp(rate > cfg_.target_accept ? step : -step);
        u_acc_[i] = 0;
    }
    if (use_collapsed() && cfg_.update.sigma2) {
        log_s2_scale_ *= std::exp(s2_acc_ / (w * cfg_.collapsed_steps) > cfg_.target_accept ? step : -step);
        s2_acc_ = 0;
    }
    if (ar_ && cfg_.update.phi) {
        phi_scale_ *= std::exp(phi_acc_ / w > cfg_.target_accept ? step : -step);
        phi_scale_ = std::min(phi_scale_, 1.0);
        phi_acc_ = 0;
    }
}

ChainResult ChainRunner::run() {
    initialize();
    const long kept_iters = cfg_.n_iter - cfg_.n_burnin;
    const long n_draws = out_.n_draws();

    ChainResult res;
    res.draws.assign(static_cast<std::size_t>(out_.n_params()) * n_draws, 0.0);
    res.u_mean.assign(st_.u.size(), 0.0);
    res.u_sq.assign(st_.u.size(), 0.0);
    res.eps_mean.assign(eps_.size(), 0.0);
    res.eps_sq.assign(eps_.size(), 0.0);

    const auto& up = cfg_.update;
    long d = 0;
    for (iter_ = 0; iter_ < cfg_.n_iter; ++iter_) {
        if (up.u)
            for (int sweep = 0; sweep < cfg_.u_sweeps; ++sweep) update_u();
        if (use_collapsed()) update_collapsed();
        if (m_.layout().nu_present() && up.nu) {
            update_nu(true);
            update_nu(false);
        }
        if (up.zeta) update_zeta();
        if (up.delta) update_delta();
        if (up.sigma2) update_sigma2();
        if (ar_ && up.phi) update_phi();
        rebuild();
        adapt(iter_);

        if (iter_ >= cfg_.n_burnin) {
            for (std::size_t i = 0; i < st_.u.size(); ++i) {
                res.u_mean[i] += st_.u[i];
                res.u_sq[i] += st_.u[i] * st_.u[i];
            }
            for (std::size_t i = 0; i < eps_.size(); ++i) {
                res.eps_mean[i] += eps_[i];
                res.eps_sq[i] += eps_[i] * eps_[i];
            }
            if ((iter_ - cfg_.n_burnin) % cfg_.thin == 0) out_.record(res, d++, st_, eps_);
        }
        if (cfg_.observer) cfg_.observer(IterationView{chain_, iter_, st_, eps_, u_scale_, phi_scale_});
    }
    const double kept = static_cast<double>(kept_iters);
    for (auto* v : {&res.u_mean, &res.u_sq, &res.eps_mean, &res.eps_sq})
        for (double& x : *v) x /= kept;
    res.u_accept = static_cast<double>(u_acc_total_) / (kept * cfg_.u_sweeps * static_cast<double>(st_.u.size()));
    res.phi_accept = static_cast<double>(phi_acc_total_) / kept;
    return res;
}

}  // namespace

PosteriorSamples fit(const Model& model, const SamplerConfig& config) {
    config.validate();
    PosteriorSamples out(model.spec(), model.n_times(), model.n_cells(), config.store_latent);
    const long kept = config.n_iter - config.n_burnin;
    out.set_draw_count((kept + config.thin - 1) / config.thin);

    const int n = config.n_chains;
    std::vector<ChainResult> results(static_cast<std::size_t>(n));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
    std::atomic<int> next{0};
    auto worker = [&] {
        for (int c = next++; c < n; c = next++) {
            try {
                results[c] = ChainRunner(model, config, out, c).run();
            } catch (...) {
                errors[c] = std::current_exception();
            }
        }
    };
    const int n_threads = std::min(n, config.threads > 0 ? config.threads : n);
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    for (auto& r : results) out.add_chain(std::move(r));
    return out;
}

}  // namespace adrb
