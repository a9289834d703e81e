#include "adrbayes/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <stdexcept>

#include "adrbayes/csv.hpp"
#include "adrbayes/diagnostics.hpp"
#include "adrbayes/errors.hpp"

namespace adrb {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v) { return std::isnan(v) ? std::string("NA") : csv::format_double(v); }

}  // namespace

std::string fnv1a_hex(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void write_provenance(std::ostream& out, const Provenance& p) {
    out << "# adrbayes " << kVersion << " cmd=" << p.command << " config=" << p.config_hash << " seed=" << p.seed
        << '\n';
}

void write_counts(std::ostream& out, const Observations& obs) {
    out << "t,cell,count\n";
    for (int t = 0; t < obs.n_times; ++t)
        for (CellId s = 0; s < obs.n_cells; ++s) {
            out << (t + 1) << ',' << (s + 1) << ',';
            if (obs.is_observed(t, s))
                out << obs.count(t, s);
            else
                out << "NA";
            out << '\n';
        }
}

Observations read_counts(std::istream& in, int n_cells) {
    csv::Reader r(in);
    r.expect_header({"t", "cell", "count"});
    struct Row {
        long t, cell;
        std::int64_t count;
        bool observed;
    };
    std::vector<Row> rows;
    std::vector<std::string> f;
    long max_t = 0, max_cell = 0;
    while (r.next(f)) {
        const auto where = " (line " + std::to_string(r.line_number()) + ")";
        const long t = csv::parse_long(f[0], "t");
        const long cell = csv::parse_long(f[1], "cell");
        if (t < 1 || cell < 1) throw DataError("t and cell are 1-based" + where);
        Row row{t, cell, 0, true};
        if (f[2] == "NA" || f[2].empty()) {
            row.observed = false;
        } else {
            const long c = csv::parse_long(f[2], "count");
            if (c < 0) throw DataError("negative count" + where);
            row.count = c;
        }
        max_t = std::max(max_t, t);
        max_cell = std::max(max_cell, cell);
        rows.push_back(row);
    }
    if (rows.empty()) throw DataError("counts file has no rows");
    if (n_cells > 0 && max_cell > n_cells)
        throw DataError("counts refer to cell " + std::to_string(max_cell) + " but the grid has " +
                        std::to_string(n_cells) + " cells");
    const int S = n_cells > 0 ? n_cells : static_cast<int>(max_cell);
    Observations obs = Observations::zeros(static_cast<int>(max_t), S);
    std::fill(obs.observed.begin(), obs.observed.end(), 0);
    std::vector<std::uint8_t> seen(obs.counts.size(), 0);
    for (const auto& row : rows) {
        const std::size_t i = static_cast<std::size_t>(row.t - 1) * S + static_cast<std::size_t>(row.cell - 1);
        if (seen[i]) throw DataError("duplicate row for t=" + std::to_string(row.t) + ", cell=" + std::to_string(row.cell));
        seen[i] = 1;
        obs.counts[i] = row.count;
        obs.observed[i] = row.observed ? 1 : 0;
    }
    return obs;
}

// ---- Summaries ---------------------------------------------------------------------

SummaryRow summarize_draws(std::string param, std::string index, std::span<const std::span<const double>> chains) {
    SummaryRow row;
    row.param = std::move(param);
    row.index = std::move(index);
    std::vector<double> pooled;
    for (const auto& c : chains) pooled.insert(pooled.end(), c.begin(), c.end());
    const auto mo = moments(pooled);
    row.mean = mo.mean;
    row.sd = pooled.size() > 1 ? mo.sd : kNaN;
    std::sort(pooled.begin(), pooled.end());
    row.q025 = quantile_sorted(pooled, 0.025);
    row.q50 = quantile_sorted(pooled, 0.5);
    row.q975 = quantile_sorted(pooled, 0.975);
    row.rhat = chains.size() >= 2 && pooled.size() >= 4 * chains.size() ? rhat(chains) : kNaN;
    row.ess = ess(chains);
    return row;
}

namespace {

// Pooled mean/sd from per-chain running moments, for latent blocks without stored draws.
void add_moment_rows(std::vector<SummaryRow>& rows, const PosteriorSamples& post, const char* name,
                     std::vector<double> ChainResult::*mean, std::vector<double> ChainResult::*sq, int t_offset) {
    const int S = post.layout().n_cells();
    const std::size_t n = (post.chain(0).*mean).size();
    for (std::size_t i = 0; i < n; ++i) {
        double m = 0.0, m2 = 0.0;
        for (int c = 0; c < post.n_chains(); ++c) {
            m += (post.chain(c).*mean)[i];
            m2 += (post.chain(c).*sq)[i];
        }
        m /= post.n_chains();
        m2 /= post.n_chains();
        SummaryRow row;
        row.param = name;
        row.index = std::to_string(static_cast<int>(i) / S + t_offset) + ":" + std::to_string(static_cast<int>(i) % S + 1);
        row.mean = m;
        row.sd = std::sqrt(std::max(m2 - m * m, 0.0));
        row.q025 = row.q50 = row.q975 = row.rhat = row.ess = kNaN;
        rows.push_back(std::move(row));
    }
}

}  // namespace

std::vector<SummaryRow> summarize(const PosteriorSamples& post) {
    std::vector<SummaryRow> rows;
    for (int p = 0; p < post.n_params(); ++p) {
        const auto chains = post.all_chains(p);
        rows.push_back(summarize_draws(post.params()[p].name, post.params()[p].index, chains));
    }
    if (!post.stores_latent() && post.n_chains() > 0) {
        add_moment_rows(rows, post, "u", &ChainResult::u_mean, &ChainResult::u_sq, 1);
        if (post.spec().ar_errors) add_moment_rows(rows, post, "eps", &ChainResult::eps_mean, &ChainResult::eps_sq, 2);
    }
    return rows;
}

void write_summary(std::ostream& out, std::span<const SummaryRow> rows) {
    out << "param,index,mean,sd,q2.5,q50,q97.5,rhat,ess\n";
    for (const auto& r : rows)
        out << r.param << ',' << r.index << ',' << fmt(r.mean) << ',' << fmt(r.sd) << ',' << fmt(r.q025) << ','
            << fmt(r.q50) << ',' << fmt(r.q975) << ',' << fmt(r.rhat) << ',' << fmt(r.ess) << '\n';
}

std::vector<SummaryRow> read_summary(std::istream& in) {
    csv::Reader r(in);
    r.expect_header({"param", "index", "mean", "sd", "q2.5", "q50", "q97.5", "rhat", "ess"});
    std::vector<SummaryRow> rows;
    std::vector<std::string> f;
    while (r.next(f)) {
        SummaryRow row;
        row.param = f[0];
        row.index = f[1];
        row.mean = csv::parse_double(f[2], "mean");
        row.sd = csv::parse_double(f[3], "sd");
        row.q025 = csv::parse_double(f[4], "q2.5");
        row.q50 = csv::parse_double(f[5], "q50");
        row.q975 = csv::parse_double(f[6], "q97.5");
        row.rhat = csv::parse_double(f[7], "rhat");
        row.ess = csv::parse_double(f[8], "ess");
        rows.push_back(std::move(row));
    }
    return rows;
}

ParamState state_from_summary(std::span<const SummaryRow> rows, const ParamLayout& L, std::vector<double>* eps) {
    std::map<std::pair<std::string, std::string>, double> means;
    for (const auto& r : rows) means[{r.param, r.index}] = r.mean;
    auto get = [&](const std::string& name, const std::string& index) {
        const auto it = means.find({name, index});
        if (it == means.end()) throw DataError("summary lacks " + name + "[" + index + "]");
        return it->second;
    };
    auto axis = [](bool present, int v) { return present ? std::to_string(v) : std::string("*"); };

    ParamState st;
    for (int k = 0; k < L.zeta_size(); ++k) st.zeta.push_back(get("zeta", axis(L.zeta_time_varying(), k + 1) + ":*"));
    if (L.nu_present())
        for (int k = 0; k < L.nu_times(); ++k)
            for (int s = 0; s < L.nu_cells(); ++s) {
                const auto idx = axis(L.nu_time_varying(), k + 1) + ":" + axis(L.nu_space_varying(), s + 1);
                st.nu1.push_back(get("nu1", idx));
                st.nu2.push_back(get("nu2", idx));
            }
    for (int s = 0; s < L.delta_size(); ++s) st.delta.push_back(get("delta", "*:" + axis(L.delta_space_varying(), s + 1)));
    st.sigma2 = get("sigma2", "*:*");
    const auto phi = means.find({"phi", "*:*"});
    st.phi = phi == means.end() ? 0.0 : phi->second;
    for (int t = 0; t < L.n_times(); ++t)
        for (int s = 0; s < L.n_cells(); ++s) st.u.push_back(get("u", std::to_string(t + 1) + ":" + std::to_string(s + 1)));
    if (eps != nullptr) {
        eps->clear();
        if (means.count({"eps", "2:1"}) != 0)
            for (int k = 0; k < L.n_transitions(); ++k)
                for (int s = 0; s < L.n_cells(); ++s)
                    eps->push_back(get("eps", std::to_string(k + 2) + ":" + std::to_string(s + 1)));
    }
    return st;
}

// ---- Raw draws -----------------------------------------------------------------------

void write_samples(std::ostream& out, const PosteriorSamples& post, long n_burnin, int thin) {
    out << "chain,iter,param,index,value\n";
    for (int c = 0; c < post.n_chains(); ++c)
        for (long d = 0; d < post.n_draws(); ++d) {
            const long iter = n_burnin + d * thin + 1;
            for (int p = 0; p < post.n_params(); ++p) {
                const auto& info = post.params()[p];
                out << (c + 1) << ',' << iter << ',' << info.name << ',' << info.index << ','
                    << csv::format_double(post.draws(c, p)[static_cast<std::size_t>(d)]) << '\n';
            }
        }
}

DrawTable read_samples(std::istream& in) {
    csv::Reader r(in);
    r.expect_header({"chain", "iter", "param", "index", "value"});
    DrawTable table;
    std::map<std::pair<std::string, std::string>, std::size_t> ids;
    std::vector<std::string> f;
    while (r.next(f)) {
        const long chain = csv::parse_long(f[0], "chain");
        if (chain < 1) throw DataError("chain ids are 1-based (line " + std::to_string(r.line_number()) + ")");
        const double v = csv::parse_double(f[4], "value");
        auto [it, fresh] = ids.try_emplace({f[2], f[3]}, table.params.size());
        if (fresh) {
            table.params.push_back({f[2], f[3]});
            table.draws.emplace_back();
        }
        auto& per_chain = table.draws[it->second];
        if (per_chain.size() < static_cast<std::size_t>(chain)) per_chain.resize(static_cast<std::size_t>(chain));
        per_chain[static_cast<std::size_t>(chain - 1)].push_back(v);
    }
    return table;
}

std::vector<SummaryRow> summarize(const DrawTable& table) {
    std::vector<SummaryRow> rows;
    for (std::size_t p = 0; p < table.params.size(); ++p) {
        std::vector<std::span<const double>> chains;
        for (const auto& c : table.draws[p])
            if (!c.empty()) chains.emplace_back(c);
        rows.push_back(summarize_draws(table.params[p].name, table.params[p].index, chains));
    }
    return rows;
}

}  // namespace adrb
