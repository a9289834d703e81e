#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "adrbayes/errors.hpp"
#include "adrbayes/io.hpp"
#include "adrbayes/simulator.hpp"

using namespace adrb;

TEST(Counts, RoundTripWithMissing) {
    auto o = Observations::zeros(2, 3);
    o.counts = {1, 2, 3, 4, 0, 6};
    o.observed[4] = 0;
    std::stringstream ss;
    write_provenance(ss, {"test", "0", 1});
    write_counts(ss, o);
    const auto back = read_counts(ss, 3);
    EXPECT_EQ(back.counts, o.counts);
    EXPECT_EQ(back.observed, o.observed);
}

TEST(Counts, AbsentRowsAreUnobservedAndDuplicatesRejected) {
    std::istringstream in("t,cell,count\n1,1,5\n2,2,7\n");
    const auto o = read_counts(in, 2);
    EXPECT_TRUE(o.is_observed(0, 0));
    EXPECT_FALSE(o.is_observed(0, 1));
    EXPECT_EQ(o.count(1, 1), 7);
    std::istringstream dup("t,cell,count\n1,1,5\n1,1,6\n");
    EXPECT_THROW(read_counts(dup, 1), DataError);
    std::istringstream neg("t,cell,count\n1,1,-5\n");
    EXPECT_THROW(read_counts(neg, 1), DataError);
    std::istringstream big("t,cell,count\n1,3,5\n");
    EXPECT_THROW(read_counts(big, 2), DataError);
    std::istringstream header("time,cell,count\n1,1,5\n");
    EXPECT_THROW(read_counts(header, 1), DataError);
}

TEST(Provenance, HeaderLineAndHash) {
    std::ostringstream out;
    write_provenance(out, {"fit", fnv1a_hex("{}"), 7});
    EXPECT_EQ(out.str().rfind("# adrbayes 0.1.0 cmd=fit config=", 0), 0u);
    EXPECT_NE(out.str().find(" seed=7\n"), std::string::npos);
    EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
    EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
}

TEST(Summary, ConstantAndRampDraws) {
    std::vector<double> c(50, 2.5);
    std::vector<std::span<const double>> cc{c, c};
    const auto r = summarize_draws("x", "*:*", cc);
    EXPECT_EQ(r.mean, 2.5);
    EXPECT_EQ(r.sd, 0.0);
    EXPECT_EQ(r.q025, 2.5);
    EXPECT_EQ(r.q975, 2.5);
    EXPECT_TRUE(std::isnan(r.rhat));
    std::vector<double> a, b;
    for (int i = 1; i <= 50; ++i) a.push_back(i);
    for (int i = 51; i <= 100; ++i) b.push_back(i);
    std::vector<std::span<const double>> ab{a, b};
    EXPECT_DOUBLE_EQ(summarize_draws("x", "*:*", ab).q50, 50.5);
}

TEST(Summary, WriteReadRoundTripAndState) {
    auto sim = SimConfig::scenario1(1, 4);
    sim.grid = Grid::rectangular(2, 2, {1, 1, 1});
    sim.delta.assign(4, 0.1);
    sim.nu1.assign(16, 0.1);
    sim.nu2.assign(16, 0.1);
    sim.u0.assign(4, 1.0);
    const auto res = simulate(sim);
    Model m(sim.grid, ModelSpec::preset("m5"), Hyperparams::preset("sim"), res.obs, CellPopulation{{10, 10, 10, 10}});
    SamplerConfig cfg;
    cfg.n_chains = 2;
    cfg.n_iter = 100;
    cfg.n_burnin = 50;
    cfg.store_latent = false;
    const auto post = fit(m, cfg);
    const auto rows = summarize(post);
    std::stringstream ss;
    write_summary(ss, rows);
    const auto back = read_summary(ss);
    ASSERT_EQ(back.size(), rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        EXPECT_EQ(back[i].param, rows[i].param);
        EXPECT_EQ(back[i].index, rows[i].index);
        EXPECT_EQ(back[i].mean, rows[i].mean);
    }
    std::vector<double> eps;
    const auto st = state_from_summary(back, m.layout(), &eps);
    const auto mean = post.posterior_mean();
    EXPECT_EQ(st.zeta, mean.zeta);
    EXPECT_EQ(st.nu1, mean.nu1);
    EXPECT_EQ(st.delta, mean.delta);
    EXPECT_EQ(st.phi, mean.phi);
    EXPECT_EQ(st.u, mean.u);
    EXPECT_EQ(eps, post.eps_mean());
}

TEST(Samples, WriteReadAndSummarize) {
    auto sim = SimConfig::scenario1(1, 3);
    sim.grid = Grid::rectangular(1, 2, {1, 1, 1});
    sim.delta.assign(2, 0.1);
    sim.nu1.assign(6, 0.1);
    sim.nu2.assign(6, 0.1);
    sim.u0.assign(2, 1.0);
    Model m(sim.grid, ModelSpec::preset("wikle"), Hyperparams::preset("sim"), simulate(sim).obs);
    SamplerConfig cfg;
    cfg.n_chains = 2;
    cfg.n_iter = 60;
    cfg.n_burnin = 20;
    cfg.thin = 2;
    const auto post = fit(m, cfg);
    std::stringstream ss;
    write_samples(ss, post, cfg.n_burnin, cfg.thin);
    const auto table = read_samples(ss);
    ASSERT_EQ(table.params.size(), static_cast<std::size_t>(post.n_params()));
    EXPECT_EQ(table.draws[0].size(), 2u);
    EXPECT_EQ(table.draws[0][1].size(), 20u);
    const auto a = summarize(table);
    const auto b = summarize(post);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].mean, b[i].mean);
        if (!std::isnan(b[i].rhat)) EXPECT_EQ(a[i].rhat, b[i].rhat);
    }
}
