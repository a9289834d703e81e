#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "adrbayes/grid.hpp"
#include "adrbayes/model.hpp"
#include "adrbayes/random.hpp"

namespace adrb {

class PosteriorSamples;

/// Everything the one-step forecast needs, one value per cell unless noted.
struct ForecastInputs {
    std::vector<double> u_last;    // u_T
    std::vector<double> eps_last;  // eps_T; zeros without AR errors
    std::vector<double> delta;
    double zeta = 0.0;
    std::vector<double> nu1;
    std::vector<double> nu2;
    double phi = 0.0;

    /// Rates of the last fitted transition (T-1 -> T) carry the step T -> T+1.
    /// `eps` is [K][S] and may be empty when errors are iid.
    static ForecastInputs from_state(const ParamLayout& layout, const ModelSpec& spec, const ParamState& st,
                                     std::span<const double> eps);
    /// Posterior means, with u_T and eps_T from the running latent means.
    static ForecastInputs from_posterior(const PosteriorSamples& post);

    void validate(int n_cells) const;
};

struct Prediction {
    std::vector<double> u_next;     // H u_T + phi eps_T
    std::vector<double> pred_log;   // u_next (+ log population when adjusted)
    std::vector<double> pred_count; // exp(pred_log)
};

/// Plug-in one-step forecast. Throws std::invalid_argument when the spec is
/// population-adjusted and `pop` is null, or on shape mismatch.
Prediction predict_next(const Grid& grid, const ModelSpec& spec, const ForecastInputs& in,
                        const CellPopulation* pop);

/// Posterior-predictive extension: propagate every stored draw one step with a
/// fresh innovation and summarize pred_log per cell. Needs stored latent draws.
struct PredictiveSummary {
    std::vector<double> mean;
    std::vector<double> q025;
    std::vector<double> q975;
};
PredictiveSummary predict_posterior(const Grid& grid, const PosteriorSamples& post, const CellPopulation* pop,
                                    Rng& rng);

struct Evaluation {
    std::vector<double> obs_log;   // log(n + 1)
    std::vector<double> pred_log;
    std::vector<double> diff;      // obs_log - pred_log
    double mse = 0.0;
};

/// Throws std::invalid_argument on length mismatch or negative counts.
Evaluation evaluate(std::span<const double> pred_log, std::span<const std::int64_t> observed);

/// "cell,pred_log,pred_count", one row per cell.
void write_prediction(std::ostream& out, const Prediction& p);
/// "cell,obs_log,pred_log,diff" then a final "# mse=<value>" record.
void write_evaluation(std::ostream& out, const Evaluation& e);
/// Reads the pred_log column of a prediction file.
std::vector<double> read_prediction_log(std::istream& in);

}  // namespace adrb
