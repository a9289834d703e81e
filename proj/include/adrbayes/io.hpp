#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "adrbayes/model.hpp"
#include "adrbayes/sampler.hpp"

namespace adrb {

inline constexpr std::string_view kVersion = "0.1.0";

/// Written as the first line of every output file.
struct Provenance {
    std::string command;
    std::string config_hash;
    std::uint64_t seed = 0;
};

/// 64-bit FNV-1a of the text, as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view text);
/// "# adrbayes <version> cmd=<command> config=<hash> seed=<seed>"
void write_provenance(std::ostream& out, const Provenance& p);

/// Counts file "t,cell,count", 1-based, unobserved counts written as NA.
void write_counts(std::ostream& out, const Observations& obs);
/// Missing (t, cell) rows are treated as unobserved. `n_cells` = 0 infers S from
/// the largest cell id. Throws DataError on malformed rows or duplicates.
Observations read_counts(std::istream& in, int n_cells = 0);

// ---- Posterior summaries ---------------------------------------------------------

struct SummaryRow {
    std::string param;
    std::string index;
    double mean = 0.0;
    double sd = 0.0;
    double q025 = 0.0;
    double q50 = 0.0;
    double q975 = 0.0;
    double rhat = 0.0;
    double ess = 0.0;
};

/// Summary of one quantity over chains (R-hat is NaN with a single chain).
SummaryRow summarize_draws(std::string param, std::string index, std::span<const std::span<const double>> chains);

/// One row per stored quantity. Latent rows (u, and eps under AR errors) are always
/// present; when their draws were not kept only mean and sd are filled (others NaN).
std::vector<SummaryRow> summarize(const PosteriorSamples& post);

/// "param,index,mean,sd,q2.5,q50,q97.5,rhat,ess"
void write_summary(std::ostream& out, std::span<const SummaryRow> rows);
std::vector<SummaryRow> read_summary(std::istream& in);

/// Rebuilds the posterior-mean state from summary rows; fills `eps` ([K][S]) when
/// eps rows exist. Throws DataError when a required row is absent.
ParamState state_from_summary(std::span<const SummaryRow> rows, const ParamLayout& layout, std::vector<double>* eps);

// ---- Raw draws -------------------------------------------------------------------

/// "chain,iter,param,index,value": chain 1-based, iter the 1-based sampler iteration.
void write_samples(std::ostream& out, const PosteriorSamples& post, long n_burnin, int thin);

struct DrawTable {
    std::vector<ParamInfo> params;
    std::vector<std::vector<std::vector<double>>> draws;  // [param][chain][draw]
};
DrawTable read_samples(std::istream& in);
std::vector<SummaryRow> summarize(const DrawTable& table);

}  // namespace adrb
