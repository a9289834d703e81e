#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "adrbayes/propagator.hpp"
#include "support/reference.hpp"

using namespace adrb;
using adrb::testing::dense_reference;

namespace {

Spacing unit() { return {1.0, 1.0, 1.0}; }

struct RandomCase {
    Grid grid;
    Coefficients coef;
};

RandomCase random_case(std::mt19937_64& rng, int max_n) {
    std::uniform_int_distribution<int> dim(1, max_n);
    const int nx = dim(rng), ny = dim(rng);
    auto m = LatticeMask::full(nx, ny);
    std::bernoulli_distribution on(0.75);
    for (int iy = 0; iy < ny; ++iy)
        for (int ix = 0; ix < nx; ++ix) m.set(ix, iy, on(rng));
    m.set(nx / 2, ny / 2, true);
    std::uniform_real_distribution<double> h(0.5, 2.0);
    auto g = Grid::masked(m, {h(rng), h(rng), h(rng)});
    std::uniform_real_distribution<double> d(0.0, 0.3), v(-0.5, 0.5), z(-0.3, 0.3);
    Coefficients c;
    for (int s = 0; s < g.size(); ++s) {
        c.delta.push_back(d(rng));
        c.nu1.push_back(v(rng));
        c.nu2.push_back(v(rng));
    }
    c.zeta = z(rng);
    return {std::move(g), std::move(c)};
}

}  // namespace

TEST(Propagator, ZeroRatesGiveIdentity) {
    const auto g = Grid::rectangular(4, 3, unit());
    const auto H = Propagator::build(g, Coefficients::uniform(g.size(), 0.0, 0.0, 0.0, 0.0));
    for (int r = 0; r < g.size(); ++r)
        for (int c = 0; c < g.size(); ++c) EXPECT_EQ(H.weight(r, c), r == c ? 1.0 : 0.0);
}

TEST(Propagator, DiffusionOnlyInteriorRow) {
    const auto g = Grid::rectangular(5, 5, unit());
    const auto H = Propagator::build(g, Coefficients::uniform(25, 0.1, 0.0, 0.0, 0.0));
    const int c = 12;
    EXPECT_NEAR(H.weight(c, c), 0.6, 1e-15);
    for (int n : {11, 13, 7, 17}) EXPECT_NEAR(H.weight(c, n), 0.1, 1e-15);
    EXPECT_NEAR(H.row_sum(c), 1.0, 1e-15);
}

TEST(Propagator, AdvectionShiftsWeightUpwind) {
    const auto g = Grid::rectangular(5, 5, unit());
    const auto H = Propagator::build(g, Coefficients::uniform(25, 0.1, 0.0, 0.1, 0.0));
    const int c = 12;
    EXPECT_NEAR(H.weight(c, 11), 0.15, 1e-15);  // left
    EXPECT_NEAR(H.weight(c, 13), 0.05, 1e-15);  // right
    EXPECT_NEAR(H.weight(c, 7), 0.1, 1e-15);
    EXPECT_NEAR(H.weight(c, 17), 0.1, 1e-15);
    EXPECT_NEAR(H.weight(c, c), 0.6, 1e-15);
    EXPECT_NEAR(H.row_sum(c), 1.0, 1e-15);
}

TEST(Propagator, RowsFollowSlotOrder) {
    const auto g = Grid::rectangular(3, 3, unit());
    const auto H = Propagator::build(g, Coefficients::uniform(9, 0.1, 0.0, 0.0, 0.0));
    const auto cols = H.row_columns(4);
    ASSERT_EQ(cols.size(), 5u);
    EXPECT_EQ(cols[0], 4);
    EXPECT_EQ(cols[1], 3);
    EXPECT_EQ(cols[2], 5);
    EXPECT_EQ(cols[3], 7);
    EXPECT_EQ(cols[4], 1);
    EXPECT_EQ(H.row_columns(0).size(), 3u);
}

TEST(Propagator, ApplyIdentityAndGrowth) {
    const auto g = Grid::rectangular(3, 4, unit());
    const std::vector<double> v{0.3, -1.0, 2.0, 4.0, 5.5, 6.0, -7.0, 0.0, 1.0, 2.0, 3.0, 4.0};
    EXPECT_EQ(Propagator::build(g, Coefficients::uniform(12, 0, 0, 0, 0)).apply(v), v);
    const auto out = Propagator::build(g, Coefficients::uniform(12, 0, 0.15, 0, 0)).apply(std::vector<double>(12, 1.0));
    for (double x : out) EXPECT_NEAR(x, 1.15, 1e-15);
}

TEST(Propagator, DirichletLeakageAtBoundary) {
    const auto g = Grid::rectangular(5, 5, unit());
    const auto H = Propagator::build(g, Coefficients::uniform(25, 0.1, 0.0, 0.0, 0.0));
    const auto out = H.apply(std::vector<double>(25, 2.0));
    const auto dense = H.to_dense();
    for (int s = 0; s < 25; ++s) {
        double ref = 0.0;
        for (int c = 0; c < 25; ++c) ref += dense[s * 25 + c] * 2.0;
        EXPECT_NEAR(out[s], ref, 1e-14);
        if (g.is_interior(s))
            EXPECT_NEAR(out[s], 2.0, 1e-14);
        else
            EXPECT_LT(out[s], 2.0);
    }
}

TEST(Propagator, RejectsBadCoefficients) {
    const auto g = Grid::rectangular(2, 2, unit());
    auto c = Coefficients::uniform(4, 0.1, 0.0, 0.0, 0.0);
    c.delta[2] = -0.01;
    EXPECT_THROW(Propagator::build(g, c), std::invalid_argument);
    auto short_nu = Coefficients::uniform(4, 0.1, 0.0, 0.0, 0.0);
    short_nu.nu1.pop_back();
    EXPECT_THROW(Propagator::build(g, short_nu), std::invalid_argument);
    const auto H = Propagator::build(g, Coefficients::uniform(4, 0.1, 0.0, 0.0, 0.0));
    EXPECT_THROW(H.apply(std::vector<double>(3, 0.0)), std::invalid_argument);
}

TEST(Propagator, MatchesDenseReferenceOnRandomGrids) {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 300; ++trial) {
        const auto [g, c] = random_case(rng, 4);
        const auto ref = dense_reference(g.mask(), g.spacing(), c.delta, c.zeta, c.nu1, c.nu2);
        const auto H = Propagator::build(g, c);
        const auto dense = H.to_dense();
        ASSERT_EQ(dense.size(), ref.size());
        for (std::size_t i = 0; i < ref.size(); ++i) ASSERT_NEAR(dense[i], ref[i], 1e-12 * std::max(1.0, std::abs(ref[i])));
        std::vector<double> v(static_cast<std::size_t>(g.size()));
        std::normal_distribution<double> n01;
        for (auto& x : v) x = n01(rng);
        const auto out = H.apply(v);
        for (int s = 0; s < g.size(); ++s) {
            double acc = 0.0;
            for (int k = 0; k < g.size(); ++k) acc += ref[static_cast<std::size_t>(s) * g.size() + k] * v[k];
            ASSERT_NEAR(out[s], acc, 1e-12 * std::max(1.0, std::abs(acc)));
        }
    }
}

TEST(Propagator, InteriorRowSumIsOnePlusGrowth) {
    std::mt19937_64 rng(77);
    int checked = 0;
    for (int trial = 0; trial < 300; ++trial) {
        const auto [g, c] = random_case(rng, 6);
        const auto H = Propagator::build(g, c);
        for (int s = 0; s < g.size(); ++s) {
            if (!g.is_interior(s)) continue;
            const double want = 1.0 + c.zeta * g.dt();
            ASSERT_NEAR(H.row_sum(s), want, 1e-12 * std::abs(want));
            ++checked;
        }
    }
    EXPECT_GT(checked, 100);
}

TEST(Propagator, GrowthEntersOnlyTheDiagonal) {
    std::mt19937_64 rng(8);
    const auto [g, c] = random_case(rng, 5);
    auto c0 = c;
    c0.zeta = 0.0;
    const auto a = Propagator::build(g, c).to_dense();
    const auto b = Propagator::build(g, c0).to_dense();
    const int n = g.size();
    for (int r = 0; r < n; ++r)
        for (int k = 0; k < n; ++k)
            EXPECT_NEAR(a[r * n + k] - b[r * n + k], r == k ? c.zeta * g.dt() : 0.0, 1e-15);
}

TEST(Propagator, AdvectionIsLinearWithHalfStepCoefficients) {
    const auto g = Grid::rectangular(4, 4, {1.0, 2.0, 0.5});
    auto c = Coefficients::uniform(16, 0.05, 0.0, 0.0, 0.0);
    const auto base = Propagator::build(g, c).to_dense();
    const int s = 5;
    c.nu1[s] = 1.0;
    const auto moved = Propagator::build(g, c).to_dense();
    const double k = g.dt() / (2.0 * g.dx());
    for (int r = 0; r < 16; ++r)
        for (int col = 0; col < 16; ++col) {
            double want = 0.0;
            if (r == s && col == g.neighbor(s, Direction::Left)) want = k;
            if (r == s && col == g.neighbor(s, Direction::Right)) want = -k;
            EXPECT_NEAR(moved[r * 16 + col] - base[r * 16 + col], want, 1e-15);
        }
}

TEST(Propagator, StabilityCheck) {
    const auto g = Grid::rectangular(5, 5, unit());
    EXPECT_TRUE(stability_check(g, Coefficients::uniform(25, 0.1, 0.0, 0.0, 0.0)).empty());
    EXPECT_TRUE(stability_check(g, Coefficients::uniform(25, 0.0, 0.0, 0.0, 0.0)).empty());
    const auto w = stability_check(g, Coefficients::uniform(25, 0.3, 0.0, 0.0, 0.0));
    std::vector<int> flagged(25, 0);
    for (const auto& x : w) flagged[x.cell] = 1;
    for (int s = 0; s < 25; ++s) EXPECT_EQ(flagged[s], 1) << "cell " << s;
}

TEST(Propagator, TriplesDump) {
    const auto g = Grid::rectangular(2, 1, unit());
    std::ostringstream out;
    write_triples(out, Propagator::build(g, Coefficients::uniform(2, 0.1, 0.0, 0.0, 0.0)));
    EXPECT_EQ(out.str(), "row,col,weight\n1,1,0.6\n1,2,0.1\n2,2,0.6\n2,1,0.1\n");
}

TEST(Sensitivity, DerivativesMatchFiniteDifferences) {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        const auto [g, c] = random_case(rng, 5);
        const StencilSensitivity sens(g);
        std::vector<double> u(static_cast<std::size_t>(g.size()));
        std::normal_distribution<double> n01;
        for (auto& x : u) x = n01(rng);
        const auto base = Propagator::build(g, c).apply(u);
        for (int s = 0; s < g.size(); ++s) {
            auto cz = c;
            cz.zeta += 1.0;
            EXPECT_NEAR(Propagator::build(g, cz).apply(u)[s] - base[s], sens.zeta(u, s), 1e-12);
            auto c1 = c;
            c1.nu1[s] += 1.0;
            EXPECT_NEAR(Propagator::build(g, c1).apply(u)[s] - base[s], sens.nu1(u, s), 1e-12);
            auto c2 = c;
            c2.nu2[s] += 1.0;
            EXPECT_NEAR(Propagator::build(g, c2).apply(u)[s] - base[s], sens.nu2(u, s), 1e-12);
        }
        for (int j = 0; j < g.size(); ++j) {
            auto cd = c;
            cd.delta[j] += 1.0;
            const auto moved = Propagator::build(g, cd).apply(u);
            std::vector<double> want(static_cast<std::size_t>(g.size()), 0.0);
            for (const auto& t : sens.delta_terms(j)) want[t.row] += StencilSensitivity::eval(t, u);
            for (int r = 0; r < g.size(); ++r) EXPECT_NEAR(moved[r] - base[r], want[r], 1e-12);
        }
    }
}
