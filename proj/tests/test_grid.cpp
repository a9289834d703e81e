#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "adrbayes/grid.hpp"

using namespace adrb;

namespace {

Spacing unit() { return {1.0, 1.0, 1.0}; }

LatticeMask random_mask(std::mt19937_64& rng, int nx, int ny) {
    auto m = LatticeMask::full(nx, ny);
    std::bernoulli_distribution on(0.7);
    for (int iy = 0; iy < ny; ++iy)
        for (int ix = 0; ix < nx; ++ix) m.set(ix, iy, on(rng));
    m.set(0, 0, true);
    return m;
}

Direction opposite(Direction d) {
    switch (d) {
        case Direction::Left: return Direction::Right;
        case Direction::Right: return Direction::Left;
        case Direction::Down: return Direction::Up;
        default: return Direction::Down;
    }
}

}  // namespace

TEST(Grid, FiveByFiveCenterHasFourNeighbors) {
    const auto g = Grid::rectangular(5, 5, unit());
    EXPECT_EQ(g.size(), 25);
    // cell 13 (1-based) is the center
    EXPECT_EQ(g.position(12), (LatticePos{2, 2}));
    EXPECT_EQ(g.active_neighbor_count(12), 4);
    EXPECT_TRUE(g.is_interior(12));
    EXPECT_EQ(g.neighbor(12, Direction::Left), 11);
    EXPECT_EQ(g.neighbor(12, Direction::Right), 13);
    EXPECT_EQ(g.neighbor(12, Direction::Up), 7);
    EXPECT_EQ(g.neighbor(12, Direction::Down), 17);
}

TEST(Grid, SingleCellHasOnlyBoundaries) {
    const auto g = Grid::rectangular(1, 1, unit());
    EXPECT_EQ(g.size(), 1);
    for (auto d : kDirections) EXPECT_EQ(g.neighbor(0, d), kBoundary);
}

TEST(Grid, CornerOfTwoByThreeHasTwoNeighbors) {
    const auto g = Grid::rectangular(2, 3, unit());
    EXPECT_EQ(g.size(), 6);
    EXPECT_EQ(g.active_neighbor_count(0), 2);
    EXPECT_EQ(g.active_neighbor_count(5), 2);
}

TEST(Grid, RejectsBadDimensionsAndSpacing) {
    EXPECT_THROW(Grid::rectangular(0, 3, unit()), std::invalid_argument);
    EXPECT_THROW(Grid::rectangular(3, 3, {0.0, 1.0, 1.0}), std::invalid_argument);
    EXPECT_THROW(Grid::rectangular(3, 3, {1.0, -1.0, 1.0}), std::invalid_argument);
    EXPECT_THROW(Grid::rectangular(3, 3, {1.0, 1.0, 0.0}), std::invalid_argument);
    EXPECT_THROW(Grid::masked(LatticeMask{2, 2, {0, 0, 0, 0}}, unit()), std::invalid_argument);
}

TEST(Grid, LShapedMaskMiddleCellHasTwoNeighbors) {
    // x.
    // xx
    LatticeMask m{2, 2, {1, 0, 1, 1}};
    const auto g = Grid::masked(m, unit());
    ASSERT_EQ(g.size(), 3);
    // row-major over active cells: (0,0), (0,1), (1,1); the corner (0,1) is the middle
    EXPECT_EQ(g.position(1), (LatticePos{0, 1}));
    EXPECT_EQ(g.active_neighbor_count(1), 2);
    EXPECT_EQ(g.active_neighbor_count(0), 1);
    EXPECT_EQ(g.neighbor(0, Direction::Right), kBoundary);
}

TEST(Grid, FullMaskMatchesRectangular) {
    EXPECT_EQ(Grid::masked(LatticeMask::full(5, 5), unit()), Grid::rectangular(5, 5, unit()));
}

TEST(Grid, UsaFixtureHas26Cells) {
    const auto g = read_grid_file(ADRB_SOURCE_DIR "/data/usa26.grid");
    EXPECT_EQ(g.size(), 26);
    EXPECT_EQ(g.nx(), 8);
    EXPECT_EQ(g.ny(), 4);
}

TEST(Grid, NeighborSymmetryAndBijectionOnRandomMasks) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const int nx = 1 + static_cast<int>(rng() % 6), ny = 1 + static_cast<int>(rng() % 6);
        const auto g = Grid::masked(random_mask(rng, nx, ny), unit());
        std::vector<int> seen(static_cast<std::size_t>(nx) * ny, 0);
        for (CellId c = 0; c < g.size(); ++c) {
            const auto p = g.position(c);
            ASSERT_TRUE(g.mask().at(p.ix, p.iy));
            ASSERT_EQ(g.cell_at(p.ix, p.iy), c);
            ++seen[static_cast<std::size_t>(p.iy) * nx + p.ix];
            for (auto d : kDirections) {
                const CellId n = g.neighbor(c, d);
                if (n != kBoundary) ASSERT_EQ(g.neighbor(n, opposite(d)), c);
            }
        }
        for (int iy = 0; iy < ny; ++iy)
            for (int ix = 0; ix < nx; ++ix) ASSERT_EQ(seen[static_cast<std::size_t>(iy) * nx + ix], g.mask().at(ix, iy) ? 1 : 0);
    }
}

TEST(Grid, ConstructionIsPure) {
    std::mt19937_64 rng(3);
    const auto m = random_mask(rng, 6, 5);
    EXPECT_EQ(Grid::masked(m, {2.0, 3.0, 0.5}), Grid::masked(m, {2.0, 3.0, 0.5}));
}

TEST(Grid, FileRoundTrip) {
    std::mt19937_64 rng(5);
    const auto g = Grid::masked(random_mask(rng, 4, 3), {0.5, 2.0, 1.0});
    std::stringstream ss;
    write_grid(ss, g);
    EXPECT_EQ(read_grid(ss), g);
}

TEST(Grid, MalformedFileIsRejected) {
    std::istringstream bad("2 2 1 1 1\n1x\n11\n");
    EXPECT_ANY_THROW(read_grid(bad));
    std::istringstream short_rows("3 2 1 1 1\n111\n");
    EXPECT_ANY_THROW(read_grid(short_rows));
}

TEST(Population, ValidatesAndReadsFile) {
    CellPopulation p{{10.0, 20.0}};
    EXPECT_NO_THROW(p.validate(2));
    EXPECT_THROW(p.validate(3), std::invalid_argument);
    EXPECT_THROW((CellPopulation{{10.0, 0.0}}).validate(2), std::invalid_argument);
    std::stringstream ss;
    write_population(ss, p);
    const auto q = read_population(ss, 2);
    EXPECT_EQ(q.count, p.count);
    EXPECT_NEAR(q.log_count()[1], std::log(20.0), 1e-15);
}
