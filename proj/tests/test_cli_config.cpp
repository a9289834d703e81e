#include <gtest/gtest.h>

#include "run_config.hpp"

using namespace adrb;
using namespace adrb::cli;

TEST(RunConfig, DottedKeysAndAssignments) {
    Json cfg = Json::object();
    set_key(cfg, "sampler.chains", 4);
    apply_assignment(cfg, "sampler.thin=5");
    apply_assignment(cfg, "model=m2");
    EXPECT_EQ(lookup(cfg, "sampler.chains"), 4);
    EXPECT_EQ(lookup(cfg, "sampler.thin"), 5);
    EXPECT_EQ(lookup(cfg, "model"), "m2");
    EXPECT_TRUE(lookup(cfg, "sampler.missing").is_null());
    EXPECT_THROW(apply_assignment(cfg, "novalue"), UsageError);
    // overriding a field of a preset given by name
    apply_assignment(cfg, "hyperparams=set2");
    apply_assignment(cfg, "hyperparams.q=3");
    const auto hp = hyperparams_from(cfg);
    EXPECT_EQ(hp.zeta_var, 100.0);
    EXPECT_EQ(hp.q, 3.0);
}

TEST(RunConfig, ModelPresetsAndErrors) {
    EXPECT_TRUE(model_from(Json{{"model", "m5"}}).ar_errors);
    const auto custom = model_from(Json{{"model", {{"preset", "m3"}, {"ar_errors", true}}}});
    EXPECT_TRUE(custom.ar_errors);
    EXPECT_EQ(custom.name, "custom");
    try {
        model_from(Json{{"model", "m7"}});
        FAIL();
    } catch (const UsageError& e) {
        EXPECT_NE(std::string(e.what()).find("wikle, m1, m2, m3, m4, m5"), std::string::npos);
    }
    EXPECT_THROW(model_from(Json::object()), UsageError);
    EXPECT_THROW(model_from(Json{{"model", {{"preset", "m1"}, {"bogus", true}}}}), UsageError);
}

TEST(RunConfig, SamplerSettings) {
    const Json cfg{{"seed", 9}, {"threads", 2}, {"sampler", {{"chains", 4}, {"iterations", 100}, {"burnin", 40}}}};
    const auto s = sampler_from(cfg);
    EXPECT_EQ(s.seed, 9u);
    EXPECT_EQ(s.threads, 2);
    EXPECT_EQ(s.n_chains, 4);
    EXPECT_EQ(s.n_iter, 100);
    EXPECT_EQ(s.n_burnin, 40);
    EXPECT_THROW(sampler_from(Json{{"sampler", {{"iterations", 10}, {"burnin", 10}}}}), UsageError);
    EXPECT_THROW(sampler_from(Json{{"seed", -1}}), UsageError);
}

TEST(RunConfig, Simulation) {
    const auto s = simulation_from(Json{{"seed", 7}, {"simulate", {{"preset", "scenario2"}}}});
    EXPECT_EQ(s.seed, 7u);
    EXPECT_EQ(s.phi, 0.1);
    EXPECT_THROW(simulation_from(Json::object()), UsageError);
    EXPECT_THROW(simulation_from(Json{{"simulate", {{"preset", "scenario9"}}}}), UsageError);
}

TEST(RunConfig, CanonicalTextIsKeyOrderIndependent) {
    const auto a = Json::parse(R"({"seed": 1, "model": "m3", "sampler": {"chains": 3, "thin": 2}})");
    const auto b = Json::parse(R"({"sampler": {"thin": 2, "chains": 3}, "model": "m3", "seed": 1})");
    EXPECT_EQ(canonical(a), canonical(b));
}

TEST(RunConfig, ShippedConfigsParse) {
    for (const char* name : {"simulate_scenario1.json", "fit_m3.json", "fit_m5_usa.json", "ingest_usa.json"}) {
        const auto cfg = load_config(std::string(ADRB_SOURCE_DIR "/configs/") + name);
        EXPECT_TRUE(cfg.is_object()) << name;
        if (cfg.contains("model")) EXPECT_NO_THROW(model_from(cfg)) << name;
        if (cfg.contains("sampler")) EXPECT_NO_THROW(sampler_from(cfg)) << name;
        if (cfg.contains("hyperparams")) EXPECT_NO_THROW(hyperparams_from(cfg)) << name;
        if (cfg.contains("simulate")) EXPECT_NO_THROW(simulation_from(cfg)) << name;
    }
}
