#include "run_config.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace adrb::cli {

namespace {

const Json kNull = nullptr;

template <class T>
T get_or(const Json& obj, const char* key, T fallback, std::string_view section) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const Json::exception&) {
        throw UsageError(std::string(section) + "." + key + " has the wrong type");
    }
}

void reject_unknown(const Json& obj, const std::set<std::string>& known, std::string_view section) {
    for (const auto& [k, v] : obj.items())
        if (!known.count(k)) throw UsageError("unknown key '" + std::string(section) + "." + k + "'");
}

}  // namespace

Json load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config '" + path.string() + "'");
    Json cfg;
    try {
        cfg = Json::parse(in, nullptr, true, true);
    } catch (const Json::parse_error& e) {
        throw UsageError("config '" + path.string() + "' is not valid JSON: " + e.what());
    }
    if (!cfg.is_object()) throw UsageError("config '" + path.string() + "' must be a JSON object");
    return cfg;
}

void set_key(Json& cfg, std::string_view dotted, Json value) {
    Json* node = &cfg;
    std::size_t start = 0;
    for (;;) {
        const auto dot = dotted.find('.', start);
        const std::string key(dotted.substr(start, dot == std::string_view::npos ? dotted.npos : dot - start));
        if (key.empty()) throw UsageError("bad config key '" + std::string(dotted) + "'");
        if (dot == std::string_view::npos) {
            (*node)[key] = std::move(value);
            return;
        }
        auto& child = (*node)[key];
        // A preset given as a bare string becomes {"preset": name} once a field is overridden.
        if (child.is_string()) child = Json{{"preset", child.get<std::string>()}};
        if (!child.is_object()) child = Json::object();
        node = &child;
        start = dot + 1;
    }
}

void apply_assignment(Json& cfg, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos || eq == 0) throw UsageError("--set expects key=value, got '" + std::string(assignment) + "'");
    const std::string text(assignment.substr(eq + 1));
    Json value = Json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    set_key(cfg, assignment.substr(0, eq), std::move(value));
}

const Json& lookup(const Json& cfg, std::string_view dotted) {
    const Json* node = &cfg;
    std::size_t start = 0;
    for (;;) {
        const auto dot = dotted.find('.', start);
        const std::string key(dotted.substr(start, dot == std::string_view::npos ? dotted.npos : dot - start));
        if (!node->is_object() || !node->contains(key)) return kNull;
        node = &node->at(key);
        if (dot == std::string_view::npos) return *node;
        start = dot + 1;
    }
}

std::string require_string(const Json& cfg, std::string_view dotted) {
    const auto& v = lookup(cfg, dotted);
    if (v.is_null()) throw UsageError("missing required setting '" + std::string(dotted) + "'");
    if (!v.is_string()) throw UsageError("'" + std::string(dotted) + "' must be a string");
    return v.get<std::string>();
}

std::string canonical(const Json& cfg) { return cfg.dump(); }

std::uint64_t seed_of(const Json& cfg) {
    const auto& s = lookup(cfg, "seed");
    if (s.is_null()) return 1;
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0))
        throw UsageError("seed must be a non-negative integer");
    return s.get<std::uint64_t>();
}

ModelSpec model_from(const Json& cfg) {
    const auto& m = lookup(cfg, "model");
    if (m.is_null()) throw UsageError("missing required setting 'model'");
    try {
        if (m.is_string()) return ModelSpec::preset(m.get<std::string>());
        if (!m.is_object()) throw UsageError("'model' must be a preset name or an object");
        reject_unknown(m, {"preset", "zeta_time_varying", "delta_space_varying", "nu_present", "nu_time_varying",
                           "nu_space_varying", "population_adjusted", "ar_errors"},
                       "model");
        ModelSpec s = m.contains("preset") ? ModelSpec::preset(m.at("preset").get<std::string>()) : ModelSpec{};
        s.zeta_time_varying = get_or(m, "zeta_time_varying", s.zeta_time_varying, "model");
        s.delta_space_varying = get_or(m, "delta_space_varying", s.delta_space_varying, "model");
        s.nu_present = get_or(m, "nu_present", s.nu_present, "model");
        s.nu_time_varying = get_or(m, "nu_time_varying", s.nu_time_varying, "model");
        s.nu_space_varying = get_or(m, "nu_space_varying", s.nu_space_varying, "model");
        s.population_adjusted = get_or(m, "population_adjusted", s.population_adjusted, "model");
        s.ar_errors = get_or(m, "ar_errors", s.ar_errors, "model");
        if (m.size() > 1 || !m.contains("preset")) s.name = "custom";
        return s;
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
}

Hyperparams hyperparams_from(const Json& cfg) {
    const auto& h = lookup(cfg, "hyperparams");
    try {
        if (h.is_null()) return Hyperparams::preset("set1");
        if (h.is_string()) return Hyperparams::preset(h.get<std::string>());
        if (!h.is_object()) throw UsageError("'hyperparams' must be a preset name or an object");
        reject_unknown(h, {"preset", "nu1_mean", "nu1_var", "nu2_mean", "nu2_var", "delta_mean", "delta_var",
                           "zeta_mean", "zeta_var", "q", "r", "init_var"},
                       "hyperparams");
        Hyperparams p = Hyperparams::preset(h.contains("preset") ? h.at("preset").get<std::string>() : "set1");
        for (auto [key, field] : {std::pair{"nu1_mean", &Hyperparams::nu1_mean}, {"nu1_var", &Hyperparams::nu1_var},
                                  {"nu2_mean", &Hyperparams::nu2_mean}, {"nu2_var", &Hyperparams::nu2_var},
                                  {"delta_mean", &Hyperparams::delta_mean}, {"delta_var", &Hyperparams::delta_var},
                                  {"zeta_mean", &Hyperparams::zeta_mean}, {"zeta_var", &Hyperparams::zeta_var},
                                  {"q", &Hyperparams::q}, {"r", &Hyperparams::r}, {"init_var", &Hyperparams::init_var}})
            p.*field = get_or(h, key, p.*field, "hyperparams");
        p.validate();
        return p;
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
}

SamplerConfig sampler_from(const Json& cfg) {
    SamplerConfig c;
    c.seed = seed_of(cfg);
    const auto& t = lookup(cfg, "threads");
    if (!t.is_null()) {
        if (!t.is_number_integer() || t.get<int>() < 0) throw UsageError("threads must be a non-negative integer");
        c.threads = t.get<int>();
    }
    const auto& s = lookup(cfg, "sampler");
    if (!s.is_null()) {
        if (!s.is_object()) throw UsageError("'sampler' must be an object");
        reject_unknown(s, {"chains", "iterations", "burnin", "thin", "u_scale", "u_sweeps", "phi_scale",
                           "adapt_window", "target_accept", "init_jitter", "collapse_nu", "store_latent",
                           "write_samples"},
                       "sampler");
        c.n_chains = get_or(s, "chains", c.n_chains, "sampler");
        c.n_iter = get_or(s, "iterations", c.n_iter, "sampler");
        c.n_burnin = get_or(s, "burnin", c.n_burnin, "sampler");
        c.thin = get_or(s, "thin", c.thin, "sampler");
        c.u_scale = get_or(s, "u_scale", c.u_scale, "sampler");
        c.u_sweeps = get_or(s, "u_sweeps", c.u_sweeps, "sampler");
        c.phi_scale = get_or(s, "phi_scale", c.phi_scale, "sampler");
        c.adapt_window = get_or(s, "adapt_window", c.adapt_window, "sampler");
        c.target_accept = get_or(s, "target_accept", c.target_accept, "sampler");
        c.init_jitter = get_or(s, "init_jitter", c.init_jitter, "sampler");
        c.collapse_nu = get_or(s, "collapse_nu", c.collapse_nu, "sampler");
        c.store_latent = get_or(s, "store_latent", false, "sampler");
    } else {
        c.store_latent = false;
    }
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    return c;
}

SimConfig simulation_from(const Json& cfg) {
    const auto& s = lookup(cfg, "simulate");
    if (!s.is_object()) throw UsageError("missing required setting 'simulate.preset'");
    reject_unknown(s, {"preset", "n_times", "sigma2", "phi", "u0"}, "simulate");
    if (!s.contains("preset")) throw UsageError("missing required setting 'simulate.preset'");
    SimConfig c;
    try {
        c = SimConfig::preset(s.at("preset").get<std::string>(), seed_of(cfg), get_or(s, "n_times", 24, "simulate"));
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    c.sigma2 = get_or(s, "sigma2", c.sigma2, "simulate");
    c.phi = get_or(s, "phi", c.phi, "simulate");
    if (s.contains("u0")) c.u0.assign(c.u0.size(), get_or(s, "u0", 0.0, "simulate"));
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    return c;
}

}  // namespace adrb::cli
