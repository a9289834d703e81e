// adrbayes: simulate, fit, predict, evaluate, ingest and diagnose from the command line.
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "adrbayes/csv.hpp"
#include "adrbayes/errors.hpp"
#include "adrbayes/forecast.hpp"
#include "adrbayes/grid.hpp"
#include "adrbayes/ingest.hpp"
#include "adrbayes/io.hpp"
#include "adrbayes/model.hpp"
#include "adrbayes/sampler.hpp"
#include "adrbayes/simulator.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using namespace adrb;
using adrb::cli::Json;
using adrb::cli::UsageError;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3, kGate = 4 };

// Options every subcommand accepts.
struct Common {
    std::string config;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
};

struct Flags {
    Common common;
    std::optional<std::string> preset, model, hyperparams, grid, counts, population, out, summary, prediction,
        samples, nyt, centroids, polygons, first_month, last_month;
    std::optional<int> n_times, chains, t;
    std::optional<long> iterations, burnin;
    bool require_converged = false;
    bool no_samples = false;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("-c,--config", c.config, "JSON run config");
    sub->add_option("--set", c.sets, "Override a config key, e.g. --set sampler.thin=5");
    sub->add_option("--seed", c.seed, "Random seed");
    sub->add_option("--threads", c.threads, "Worker threads (default: one per chain)");
}

// Effective config: file, then dedicated flags, then --set assignments.
Json effective_config(const std::string& command, const Flags& f) {
    Json cfg = f.common.config.empty() ? Json::object() : cli::load_config(f.common.config);
    auto put = [&](const char* key, const auto& opt) {
        if (opt) cli::set_key(cfg, key, *opt);
    };
    put("seed", f.common.seed);
    put("threads", f.common.threads);
    put("grid", f.grid);
    put("counts", f.counts);
    put("population", f.population);
    put("out", f.out);
    put("model", f.model);
    put("hyperparams", f.hyperparams);
    if (command == "simulate") {
        put("simulate.preset", f.preset);
        put("simulate.n_times", f.n_times);
    }
    put("sampler.chains", f.chains);
    put("sampler.iterations", f.iterations);
    put("sampler.burnin", f.burnin);
    if (f.no_samples) cli::set_key(cfg, "sampler.write_samples", false);
    put("summary", f.summary);
    put("prediction", f.prediction);
    put("samples", f.samples);
    put("t", f.t);
    put("ingest.nyt", f.nyt);
    put("ingest.centroids", f.centroids);
    put("ingest.polygons", f.polygons);
    put("ingest.first_month", f.first_month);
    put("ingest.last_month", f.last_month);
    for (const auto& s : f.common.sets) cli::apply_assignment(cfg, s);
    return cfg;
}

std::ofstream open_out(const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p);
    if (!out) throw DataError("cannot write '" + p.string() + "'");
    return out;
}

std::ifstream open_in(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw DataError("cannot open '" + p.string() + "'");
    return in;
}

void header(std::ostream& out, const std::string& command, const Json& cfg) {
    const auto text = cli::canonical(cfg);
    write_provenance(out, {command, fnv1a_hex(text), cli::seed_of(cfg)});
    out << "# config=" << text << '\n';
}

std::optional<CellPopulation> load_population(const Json& cfg, int n_cells) {
    const auto& p = cli::lookup(cfg, "population");
    if (p.is_null()) return std::nullopt;
    return read_population_file(p.get<std::string>(), n_cells);
}

// ---- Subcommands ---------------------------------------------------------------------

int run_simulate(const Json& cfg) {
    const auto sim = cli::simulation_from(cfg);
    const fs::path dir = cli::lookup(cfg, "out").is_null() ? fs::path("sim_out") : fs::path(cli::require_string(cfg, "out"));
    const auto res = simulate(sim);
    {
        auto out = open_out(dir / "counts.csv");
        header(out, "simulate", cfg);
        write_counts(out, res.obs);
    }
    {
        auto out = open_out(dir / "truth.csv");
        header(out, "simulate", cfg);
        write_truth(out, sim, res);
    }
    {
        auto out = open_out(dir / "grid.txt");
        header(out, "simulate", cfg);
        write_grid(out, sim.grid);
    }
    std::int64_t total = 0, peak = 0;
    for (auto n : res.obs.counts) {
        total += n;
        peak = std::max(peak, n);
    }
    std::cout << "seed=" << sim.seed << " S=" << sim.grid.size() << " T=" << sim.n_times
              << " errors=" << (sim.errors == ErrorMode::Ar ? "ar" : "iid") << " phi="
              << (sim.errors == ErrorMode::Ar ? sim.phi : 0.0) << " total_count=" << total << " max_count=" << peak
              << "\nwrote " << (dir / "counts.csv").string() << ", " << (dir / "truth.csv").string() << ", "
              << (dir / "grid.txt").string() << '\n';
    return kOk;
}

int run_fit(const Json& cfg, bool require_converged) {
    const auto spec = cli::model_from(cfg);
    const auto hp = cli::hyperparams_from(cfg);
    auto scfg = cli::sampler_from(cfg);
    const bool write_samples_file = cli::lookup(cfg, "sampler.write_samples").is_null() ||
                                    cli::lookup(cfg, "sampler.write_samples").get<bool>();
    const auto grid = read_grid_file(cli::require_string(cfg, "grid"));
    auto in = open_in(cli::require_string(cfg, "counts"));
    auto obs = read_counts(in, grid.size());
    auto pop = load_population(cfg, grid.size());
    if (spec.population_adjusted && !pop) throw UsageError("model '" + spec.name + "' needs a population file");
    const fs::path dir = cli::lookup(cfg, "out").is_null() ? fs::path("fit_out") : fs::path(cli::require_string(cfg, "out"));

    Model model(grid, spec, hp, std::move(obs), std::move(pop));
    const auto post = fit(model, scfg);
    const auto rows = summarize(post);
    {
        auto out = open_out(dir / "summary.csv");
        header(out, "fit", cfg);
        write_summary(out, rows);
    }
    if (write_samples_file) {
        auto out = open_out(dir / "samples.csv");
        header(out, "fit", cfg);
        write_samples(out, post, scfg.n_burnin, scfg.thin);
    }

    double worst = 1.0;
    std::string worst_name;
    long over = 0;
    for (const auto& r : rows) {
        if (std::isnan(r.rhat)) continue;
        if (r.rhat >= 1.1) ++over;
        if (r.rhat > worst) {
            worst = r.rhat;
            worst_name = r.param + "[" + r.index + "]";
        }
    }
    double acc = 0.0;
    for (int c = 0; c < post.n_chains(); ++c) acc += post.chain(c).u_accept / post.n_chains();
    std::cout << "model=" << spec.name << " chains=" << scfg.n_chains << " iterations=" << scfg.n_iter
              << " burnin=" << scfg.n_burnin << " draws/chain=" << post.n_draws() << " seed=" << scfg.seed << '\n'
              << "max_rhat=" << worst << (worst_name.empty() ? "" : " at " + worst_name) << " rhat>=1.1: " << over
              << " u_accept=" << acc << '\n'
              << "wrote " << (dir / "summary.csv").string()
              << (write_samples_file ? ", " + (dir / "samples.csv").string() : std::string()) << '\n';
    if (require_converged && over > 0) {
        std::cerr << "convergence gate failed: " << over << " quantities with R-hat >= 1.1\n";
        return kGate;
    }
    return kOk;
}

int run_predict(const Json& cfg) {
    const auto spec = cli::model_from(cfg);
    const auto grid = read_grid_file(cli::require_string(cfg, "grid"));
    auto in = open_in(cli::require_string(cfg, "summary"));
    const auto rows = read_summary(in);
    int T = 0;
    for (const auto& r : rows)
        if (r.param == "u") T = std::max(T, static_cast<int>(csv::parse_long(r.index.substr(0, r.index.find(':')), "t")));
    if (T < 2) throw DataError("summary has no latent field rows");
    ParamLayout layout(spec, T, grid.size());
    std::vector<double> eps;
    const auto st = state_from_summary(rows, layout, &eps);
    const auto inputs = ForecastInputs::from_state(layout, spec, st, eps);
    const auto pop = load_population(cfg, grid.size());
    const auto pred = predict_next(grid, spec, inputs, pop ? &*pop : nullptr);
    const fs::path path = cli::lookup(cfg, "out").is_null() ? fs::path("prediction.csv") : fs::path(cli::require_string(cfg, "out"));
    auto out = open_out(path);
    header(out, "predict", cfg);
    write_prediction(out, pred);
    std::cout << "model=" << spec.name << " S=" << grid.size() << " forecast of t=" << T + 1 << "\nwrote "
              << path.string() << '\n';
    return kOk;
}

int run_evaluate(const Json& cfg) {
    auto pin = open_in(cli::require_string(cfg, "prediction"));
    const auto pred_log = read_prediction_log(pin);
    auto cin = open_in(cli::require_string(cfg, "counts"));
    const auto obs = read_counts(cin, static_cast<int>(pred_log.size()));
    const auto& tj = cli::lookup(cfg, "t");
    const int t = tj.is_null() ? obs.n_times : tj.get<int>();
    if (t < 1 || t > obs.n_times) throw UsageError("t must lie in 1.." + std::to_string(obs.n_times));
    for (CellId s = 0; s < obs.n_cells; ++s)
        if (!obs.is_observed(t - 1, s))
            throw DataError("cell " + std::to_string(s + 1) + " is unobserved at t=" + std::to_string(t));
    const auto ev = evaluate(pred_log, obs.slice(t - 1));
    const fs::path path = cli::lookup(cfg, "out").is_null() ? fs::path("evaluation.csv") : fs::path(cli::require_string(cfg, "out"));
    auto out = open_out(path);
    header(out, "evaluate", cfg);
    write_evaluation(out, ev);
    std::cout << "t=" << t << " cells=" << ev.diff.size() << " mse=" << csv::format_double(ev.mse) << "\nwrote "
              << path.string() << '\n';
    return kOk;
}

int run_ingest(const Json& cfg) {
    const auto grid = read_grid_file(cli::require_string(cfg, "grid"));
    ingest::ParseReport nyt_report, cen_report;
    auto nin = open_in(cli::require_string(cfg, "ingest.nyt"));
    const auto records = ingest::read_nyt(nin, nyt_report);
    auto cin = open_in(cli::require_string(cfg, "ingest.centroids"));
    const auto centroids = ingest::read_centroids(cin, cen_report);
    auto pin = open_in(cli::require_string(cfg, "ingest.polygons"));
    const auto polygons = ingest::CellPolygons::read(pin);
    const ingest::MonthRange months{ingest::parse_month(cli::require_string(cfg, "ingest.first_month")),
                                    ingest::parse_month(cli::require_string(cfg, "ingest.last_month"))};
    if (months.last < months.first) throw UsageError("ingest.last_month precedes ingest.first_month");

    const auto inc = ingest::monthly_new_cases(records, months);
    const auto assignment = ingest::assign_to_grid(centroids, polygons);
    const auto agg = ingest::aggregate(inc, centroids, assignment, grid.size());

    const fs::path dir = cli::lookup(cfg, "out").is_null() ? fs::path("ingest_out") : fs::path(cli::require_string(cfg, "out"));
    {
        auto out = open_out(dir / "counts.csv");
        header(out, "ingest", cfg);
        write_counts(out, agg.obs);
    }
    {
        auto out = open_out(dir / "population.csv");
        header(out, "ingest", cfg);
        write_population(out, agg.population);
    }
    {
        auto out = open_out(dir / "report.csv");
        header(out, "ingest", cfg);
        ingest::write_report(out, agg.report, nyt_report, inc);
    }
    for (const auto& e : nyt_report.errors) std::cerr << "skipped: " << e << '\n';
    for (const auto& e : cen_report.errors) std::cerr << "skipped centroid: " << e << '\n';
    for (const auto& w : inc.warnings) std::cerr << "warning: " << w << '\n';
    for (const auto& f : assignment.unassigned) std::cerr << "unassigned county " << f << '\n';
    for (auto s : agg.empty_cells) std::cerr << "cell " << s + 1 << " has no county; marked unobserved\n";
    ingest::write_report(std::cout, agg.report, nyt_report, inc);
    std::cout << "months " << ingest::format_month(months.first) << " (t=1) to " << ingest::format_month(months.last)
              << " (t=" << months.size() << ")\nwrote " << (dir / "counts.csv").string() << ", "
              << (dir / "population.csv").string() << ", " << (dir / "report.csv").string() << '\n';
    if (!agg.report.balanced()) {
        std::cerr << "count conservation check failed\n";
        return kData;
    }
    return kOk;
}

int run_diagnose(const Json& cfg) {
    auto in = open_in(cli::require_string(cfg, "samples"));
    const auto table = read_samples(in);
    if (table.params.empty()) throw DataError("samples file has no draws");
    const auto rows = summarize(table);
    const auto& o = cli::lookup(cfg, "out");
    if (o.is_null()) {
        write_summary(std::cout, rows);
    } else {
        auto out = open_out(o.get<std::string>());
        header(out, "diagnose", cfg);
        write_summary(out, rows);
        std::cout << "wrote " << o.get<std::string>() << '\n';
    }
    double worst = 1.0;
    for (const auto& r : rows)
        if (!std::isnan(r.rhat)) worst = std::max(worst, r.rhat);
    std::cerr << "quantities=" << rows.size() << " max_rhat=" << worst << '\n';
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian advection-diffusion-reaction model for gridded count data"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);
    Flags f;

    auto* sim = app.add_subcommand("simulate", "Simulate a synthetic dataset");
    add_common(sim, f.common);
    sim->add_option("--preset", f.preset, "scenario1 or scenario2");
    sim->add_option("--n-times", f.n_times, "Number of observed time points");
    sim->add_option("-o,--out", f.out, "Output directory");

    auto* fitc = app.add_subcommand("fit", "Run the MCMC sampler");
    add_common(fitc, f.common);
    fitc->add_option("--model", f.model, "wikle, m1, m2, m3, m4 or m5");
    fitc->add_option("--hyperparams", f.hyperparams, "sim, set1, set2 or set3");
    fitc->add_option("--grid", f.grid, "Grid file");
    fitc->add_option("--counts", f.counts, "Counts file");
    fitc->add_option("--population", f.population, "Population file");
    fitc->add_option("--chains", f.chains, "Number of chains");
    fitc->add_option("--iterations", f.iterations, "Iterations per chain, burn-in included");
    fitc->add_option("--burnin", f.burnin, "Burn-in iterations");
    fitc->add_flag("--no-samples", f.no_samples, "Skip the samples file");
    fitc->add_flag("--require-converged", f.require_converged, "Exit 4 unless every R-hat < 1.1");
    fitc->add_option("-o,--out", f.out, "Output directory");

    auto* pred = app.add_subcommand("predict", "One-step-ahead forecast from a fit summary");
    add_common(pred, f.common);
    pred->add_option("--model", f.model, "Model the summary was fitted with");
    pred->add_option("--grid", f.grid, "Grid file");
    pred->add_option("--summary", f.summary, "Summary file from fit");
    pred->add_option("--population", f.population, "Population file");
    pred->add_option("-o,--out", f.out, "Prediction file");

    auto* eval = app.add_subcommand("evaluate", "Compare a prediction with observed counts");
    add_common(eval, f.common);
    eval->add_option("--prediction", f.prediction, "Prediction file");
    eval->add_option("--counts", f.counts, "Counts file holding the observed slice");
    eval->add_option("--t", f.t, "Time index of the observed slice (default: last)");
    eval->add_option("-o,--out", f.out, "Evaluation file");

    auto* ing = app.add_subcommand("ingest", "Aggregate county cumulative cases to grid-cell months");
    add_common(ing, f.common);
    ing->add_option("--nyt", f.nyt, "County cumulative cases, date,county,state,fips,cases,deaths");
    ing->add_option("--centroids", f.centroids, "County centroids, fips,lon,lat,population");
    ing->add_option("--polygons", f.polygons, "Cell polygon file");
    ing->add_option("--grid", f.grid, "Grid file");
    ing->add_option("--first-month", f.first_month, "First month, YYYY-MM (t = 1)");
    ing->add_option("--last-month", f.last_month, "Last month, YYYY-MM");
    ing->add_option("-o,--out", f.out, "Output directory");

    auto* diag = app.add_subcommand("diagnose", "Recompute R-hat and ESS from a samples file");
    add_common(diag, f.common);
    diag->add_option("--samples", f.samples, "Samples file");
    diag->add_option("-o,--out", f.out, "Summary file (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        const Json cfg = effective_config(command, f);
        if (command == "simulate") return run_simulate(cfg);
        if (command == "fit") return run_fit(cfg, f.require_converged);
        if (command == "predict") return run_predict(cfg);
        if (command == "evaluate") return run_evaluate(cfg);
        if (command == "ingest") return run_ingest(cfg);
        return run_diagnose(cfg);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const Json::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kUsage;
    } catch (const NumericDomainError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return kNumeric;
    } catch (const InitializationError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return kNumeric;
    } catch (const IterationError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return kNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kData;
    }
}
