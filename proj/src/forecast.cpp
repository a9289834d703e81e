#include "adrbayes/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "adrbayes/csv.hpp"
#include "adrbayes/diagnostics.hpp"
#include "adrbayes/errors.hpp"
#include "adrbayes/propagator.hpp"
#include "adrbayes/sampler.hpp"

namespace adrb {

ForecastInputs ForecastInputs::from_state(const ParamLayout& L, const ModelSpec& spec, const ParamState& st,
                                          std::span<const double> eps) {
    const int S = L.n_cells();
    const int K = L.n_transitions();
    const int last = K - 1;
    if (st.u.size() != static_cast<std::size_t>(L.n_times()) * S)
        throw std::invalid_argument("forecast needs the full latent field");
    ForecastInputs in;
    const auto uT = st.u_slice(L.n_times() - 1, S);
    in.u_last.assign(uT.begin(), uT.end());
    in.eps_last.assign(static_cast<std::size_t>(S), 0.0);
    if (spec.ar_errors && !eps.empty()) {
        if (eps.size() != static_cast<std::size_t>(K) * S) throw std::invalid_argument("eps must be K x S");
        std::copy_n(eps.begin() + static_cast<std::ptrdiff_t>(last) * S, S, in.eps_last.begin());
    }
    in.zeta = st.zeta.at(static_cast<std::size_t>(L.zeta_index(last)));
    in.delta.resize(static_cast<std::size_t>(S));
    in.nu1.assign(static_cast<std::size_t>(S), 0.0);
    in.nu2.assign(static_cast<std::size_t>(S), 0.0);
    for (CellId s = 0; s < S; ++s) {
        in.delta[s] = st.delta.at(static_cast<std::size_t>(L.delta_index(s)));
        if (L.nu_present()) {
            in.nu1[s] = st.nu1.at(static_cast<std::size_t>(L.nu_index(last, s)));
            in.nu2[s] = st.nu2.at(static_cast<std::size_t>(L.nu_index(last, s)));
        }
    }
    in.phi = spec.ar_errors ? st.phi : 0.0;
    return in;
}

ForecastInputs ForecastInputs::from_posterior(const PosteriorSamples& post) {
    const auto means = post.posterior_mean();
    const auto eps = post.eps_mean();
    return from_state(post.layout(), post.spec(), means, eps);
}

void ForecastInputs::validate(int n) const {
    const auto sz = static_cast<std::size_t>(n);
    if (u_last.size() != sz || eps_last.size() != sz || delta.size() != sz || nu1.size() != sz || nu2.size() != sz)
        throw std::invalid_argument("forecast inputs need one value per cell");
    if (!(std::abs(phi) < 1.0)) throw std::invalid_argument("|phi| must be < 1");
}

namespace {

std::vector<double> one_step(const Grid& grid, const ForecastInputs& in) {
    Coefficients c;
    c.delta = in.delta;
    c.zeta = in.zeta;
    c.nu1 = in.nu1;
    c.nu2 = in.nu2;
    auto u = Propagator::build(grid, c).apply(in.u_last);
    for (std::size_t s = 0; s < u.size(); ++s) u[s] += in.phi * in.eps_last[s];
    return u;
}

std::vector<double> log_population(const ModelSpec& spec, const CellPopulation* pop, int n) {
    std::vector<double> off(static_cast<std::size_t>(n), 0.0);
    if (!spec.population_adjusted) return off;
    if (pop == nullptr) throw std::invalid_argument("population-adjusted spec needs a population");
    pop->validate(n);
    return pop->log_count();
}

}  // namespace

Prediction predict_next(const Grid& grid, const ModelSpec& spec, const ForecastInputs& in, const CellPopulation* pop) {
    in.validate(grid.size());
    const auto off = log_population(spec, pop, grid.size());
    Prediction p;
    p.u_next = one_step(grid, in);
    p.pred_log.resize(p.u_next.size());
    p.pred_count.resize(p.u_next.size());
    for (std::size_t s = 0; s < p.u_next.size(); ++s) {
        p.pred_log[s] = p.u_next[s] + off[s];
        p.pred_count[s] = std::exp(p.pred_log[s]);
        if (!std::isfinite(p.pred_count[s]))
            throw NumericDomainError("predicted intensity overflows at cell " + std::to_string(s + 1));
    }
    return p;
}

PredictiveSummary predict_posterior(const Grid& grid, const PosteriorSamples& post, const CellPopulation* pop,
                                    Rng& rng) {
    if (!post.stores_latent()) throw std::invalid_argument("posterior-predictive forecast needs stored latent draws");
    const int S = grid.size();
    const auto off = log_population(post.spec(), pop, S);
    std::vector<std::vector<double>> per_cell(static_cast<std::size_t>(S));
    for (int c = 0; c < post.n_chains(); ++c)
        for (long d = 0; d < post.n_draws(); ++d) {
            const auto st = post.state_at(c, d);
            const auto eps = post.eps_at(c, d);
            const auto in = ForecastInputs::from_state(post.layout(), post.spec(), st, eps);
            const auto u = one_step(grid, in);
            const double sd = std::sqrt(st.sigma2);
            for (CellId s = 0; s < S; ++s) per_cell[s].push_back(u[s] + draw_normal(rng, 0.0, sd) + off[s]);
        }
    PredictiveSummary out;
    for (auto& v : per_cell) {
        std::sort(v.begin(), v.end());
        out.mean.push_back(moments(v).mean);
        out.q025.push_back(quantile_sorted(v, 0.025));
        out.q975.push_back(quantile_sorted(v, 0.975));
    }
    return out;
}

Evaluation evaluate(std::span<const double> pred_log, std::span<const std::int64_t> observed) {
    if (pred_log.size() != observed.size())
        throw std::invalid_argument("prediction has " + std::to_string(pred_log.size()) + " cells, observations " +
                                    std::to_string(observed.size()));
    Evaluation e;
    double acc = 0.0;
    for (std::size_t s = 0; s < observed.size(); ++s) {
        if (observed[s] < 0) throw std::invalid_argument("negative observed count");
        const double o = std::log(static_cast<double>(observed[s]) + 1.0);
        e.obs_log.push_back(o);
        e.pred_log.push_back(pred_log[s]);
        e.diff.push_back(o - pred_log[s]);
        acc += e.diff.back() * e.diff.back();
    }
    e.mse = observed.empty() ? 0.0 : acc / static_cast<double>(observed.size());
    return e;
}

void write_prediction(std::ostream& out, const Prediction& p) {
    out << "cell,pred_log,pred_count\n";
    for (std::size_t s = 0; s < p.pred_log.size(); ++s)
        out << (s + 1) << ',' << csv::format_double(p.pred_log[s]) << ',' << csv::format_double(p.pred_count[s])
            << '\n';
}

void write_evaluation(std::ostream& out, const Evaluation& e) {
    out << "cell,obs_log,pred_log,diff\n";
    for (std::size_t s = 0; s < e.diff.size(); ++s)
        out << (s + 1) << ',' << csv::format_double(e.obs_log[s]) << ',' << csv::format_double(e.pred_log[s]) << ','
            << csv::format_double(e.diff[s]) << '\n';
    out << "# mse=" << csv::format_double(e.mse) << '\n';
}

std::vector<double> read_prediction_log(std::istream& in) {
    csv::Reader r(in);
    r.expect_header({"cell", "pred_log", "pred_count"});
    std::vector<double> out;
    std::vector<std::string> f;
    while (r.next(f)) {
        const long cell = csv::parse_long(f[0], "cell");
        if (cell != static_cast<long>(out.size()) + 1)
            throw DataError("prediction rows must list cells 1..S in order (line " + std::to_string(r.line_number()) + ")");
        out.push_back(csv::parse_double(f[1], "pred_log"));
    }
    return out;
}

}  // namespace adrb
