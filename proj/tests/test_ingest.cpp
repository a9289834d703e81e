#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include "adrbayes/errors.hpp"
#include "adrbayes/ingest.hpp"
#include "adrbayes/io.hpp"

using namespace adrb;
using namespace adrb::ingest;

namespace {

CountyRecord rec(const char* date, const char* fips, std::int64_t cases) {
    return {parse_date(date), fips, "c", "s", cases};
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

CellPolygons two_squares() {
    CellPolygons p;
    p.add(0, {{0, 0}, {1, 0}, {1, 1}, {0, 1}});
    p.add(1, {{1, 0}, {2, 0}, {2, 1}, {1, 1}});
    return p;
}

}  // namespace

TEST(Dates, IsoOnly) {
    const auto d = parse_date("2020-02-29");
    EXPECT_EQ(format_date(d), "2020-02-29");
    EXPECT_THROW(parse_date("2021-02-29"), DataError);
    EXPECT_THROW(parse_date("2020/02/01"), DataError);
    EXPECT_THROW(parse_date("02-01-2020"), DataError);
    EXPECT_THROW(parse_date("2020-2-1"), DataError);
    EXPECT_EQ(parse_month("2020-04") + 22, parse_month("2022-02"));
    EXPECT_EQ(format_month(parse_month("2022-02")), "2022-02");
}

TEST(Monthly, DifferenceOfCumulatives) {
    const std::vector<CountyRecord> r{rec("2020-01-31", "1", 10), rec("2020-02-28", "1", 25)};
    const auto inc = monthly_new_cases(r, {parse_month("2020-01"), parse_month("2020-02")});
    EXPECT_EQ(inc.by_county.at("1"), (std::vector<std::int64_t>{10, 15}));
}

TEST(Monthly, SingleMonthUsesZeroBaseline) {
    const std::vector<CountyRecord> r{rec("2020-03-05", "1", 4), rec("2020-03-30", "1", 9)};
    const auto inc = monthly_new_cases(r, {parse_month("2020-03"), parse_month("2020-03")});
    EXPECT_EQ(inc.by_county.at("1")[0], 9);
}

TEST(Monthly, DecreaseIsClampedAndReported) {
    const std::vector<CountyRecord> r{rec("2020-01-31", "1", 30), rec("2020-02-28", "1", 28)};
    const auto inc = monthly_new_cases(r, {parse_month("2020-01"), parse_month("2020-02")});
    EXPECT_EQ(inc.by_county.at("1")[1], 0);
    EXPECT_EQ(inc.clamped_months, 1);
    EXPECT_EQ(inc.clamped_amount, 2);
    EXPECT_EQ(inc.raw_total, 28);
    ASSERT_EQ(inc.warnings.size(), 1u);
}

TEST(Monthly, OrderIndependent) {
    std::vector<CountyRecord> r;
    std::mt19937_64 rng(1);
    for (int f = 0; f < 6; ++f) {
        std::int64_t cum = 0;
        for (int d = 1; d <= 28; d += 3)
            for (int m = 1; m <= 4; ++m) {
                cum += static_cast<std::int64_t>(rng() % 5);
                char date[16];
                std::snprintf(date, sizeof date, "2020-%02d-%02d", m, d);
                r.push_back(rec(date, std::to_string(f).c_str(), cum));
            }
    }
    const MonthRange mr{parse_month("2020-01"), parse_month("2020-04")};
    const auto a = monthly_new_cases(r, mr);
    std::shuffle(r.begin(), r.end(), rng);
    const auto b = monthly_new_cases(r, mr);
    EXPECT_EQ(a.by_county, b.by_county);
    EXPECT_EQ(a.raw_total, b.raw_total);
}

TEST(Reader, SkipsBadRowsWithReport) {
    std::istringstream in(
        "date,county,state,fips,cases,deaths\n"
        "2020-04-01,A,S,01001,3,0\n"
        "2020-4-01,A,S,01001,3,0\n"
        "2020-04-02,A,S,01001,x,0\n"
        "2020-04-03,Unknown,S,,5,\n");
    ParseReport rep;
    const auto r = read_nyt(in, rep);
    EXPECT_EQ(rep.rows, 4);
    EXPECT_EQ(rep.skipped, 2);
    EXPECT_EQ(rep.errors.size(), 2u);
    ASSERT_EQ(r.size(), 2u);
    EXPECT_TRUE(r[1].fips.empty());
    std::istringstream cen("fips,lon,lat,population\n1,0,0,10\n2,0,0,0\n");
    ParseReport crep;
    EXPECT_EQ(read_centroids(cen, crep).size(), 1u);
    EXPECT_EQ(crep.skipped, 1);
}

TEST(Geometry, InteriorOutsideAndSharedEdge) {
    const auto p = two_squares();
    EXPECT_EQ(p.locate({0.5, 0.5}), 0);
    EXPECT_EQ(p.locate({1.5, 0.5}), 1);
    EXPECT_FALSE(p.locate({3.0, 0.5}).has_value());
    // exactly one owner on the shared edge and at the shared corner
    EXPECT_EQ(p.locate({1.0, 0.5}), 1);
    EXPECT_TRUE(p.locate({1.0, 0.0}).has_value());
}

TEST(Geometry, UsaPolygonsCoverEachGridCellOnce) {
    std::ifstream in(ADRB_SOURCE_DIR "/data/usa26_polygons.txt");
    const auto p = CellPolygons::read(in);
    EXPECT_EQ(p.size(), 26u);
    // cell centers of the 8 x 4 lattice, active ones only
    const char* rows[] = {"11111111", "11111111", "11111110", "00011100"};
    int id = 0;
    for (int iy = 0; iy < 4; ++iy)
        for (int ix = 0; ix < 8; ++ix) {
            const Point c{-125 + 7.5 * ix + 3.75, 49.5 - 6.25 * iy - 3.125};
            if (rows[iy][ix] == '1')
                EXPECT_EQ(p.locate(c), id++);
            else
                EXPECT_FALSE(p.locate(c).has_value());
        }
}

TEST(Aggregate, SumsCountsAndPopulations) {
    MonthlyIncrements inc;
    inc.months = {0, 0};
    inc.by_county["a"] = {3};
    inc.by_county["b"] = {4};
    inc.raw_total = 7;
    const std::vector<CentroidRecord> cen{{"a", 0.2, 0.2, 100}, {"b", 0.7, 0.7, 50}};
    const auto asg = assign_to_grid(cen, two_squares());
    const auto agg = aggregate(inc, cen, asg, 2);
    EXPECT_EQ(agg.obs.count(0, 0), 7);
    EXPECT_EQ(agg.population.count[0], 150.0);
    EXPECT_EQ(agg.empty_cells, (std::vector<CellId>{1}));
    EXPECT_EQ(agg.obs.count(0, 1), 0);
    EXPECT_FALSE(agg.obs.is_observed(0, 1));
    EXPECT_TRUE(agg.report.balanced());
}

TEST(Aggregate, MiniatureFixtureMatchesGolden) {
    const std::string dir = ADRB_SOURCE_DIR "/tests/fixtures/ingest_mini/";
    std::ifstream nin(dir + "nyt.csv"), cin(dir + "centroids.csv"), pin(dir + "polygons.txt");
    ParseReport nrep, crep;
    const auto records = read_nyt(nin, nrep);
    const auto cen = read_centroids(cin, crep);
    const auto poly = CellPolygons::read(pin);
    const auto inc = monthly_new_cases(records, {parse_month("2020-04"), parse_month("2020-06")});
    const auto agg = aggregate(inc, cen, assign_to_grid(cen, poly), 2);
    std::ostringstream counts, pop;
    write_counts(counts, agg.obs);
    write_population(pop, agg.population);
    EXPECT_EQ(counts.str(), slurp(dir + "expected_counts.csv"));
    EXPECT_EQ(pop.str(), slurp(dir + "expected_population.csv"));
    EXPECT_EQ(nrep.skipped, 1);
    const auto& r = agg.report;
    EXPECT_EQ(r.raw_total, 57);
    EXPECT_EQ(r.clamped_added, 1);
    EXPECT_EQ(r.aggregated_total, 42);
    EXPECT_EQ(r.unassigned_total, 11);
    EXPECT_EQ(r.no_centroid_total, 2);
    EXPECT_EQ(r.no_fips_total, 3);
    EXPECT_TRUE(r.balanced());
}

TEST(MovingAverage, ConstantImpulseAndBruteForce) {
    const std::vector<double> c(20, 3.5);
    for (double v : moving_average(c)) EXPECT_DOUBLE_EQ(v, 3.5);
    std::vector<double> imp(21, 0.0);
    imp[10] = 7.0;
    const auto m = moving_average(imp);
    for (int i = 0; i < 21; ++i) EXPECT_DOUBLE_EQ(m[i], (i >= 7 && i <= 13) ? 1.0 : 0.0);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0, 100);
    std::vector<double> x(40);
    for (auto& v : x) v = u(rng);
    const auto s = moving_average(x, 5);
    for (int i = 0; i < 40; ++i) {
        double acc = 0;
        int n = 0;
        for (int j = i - 2; j <= i + 2; ++j)
            if (j >= 0 && j < 40) {
                acc += x[j];
                ++n;
            }
        EXPECT_NEAR(s[i], acc / n, 1e-12);
    }
    EXPECT_THROW(moving_average(x, 4), std::invalid_argument);
}

TEST(Daily, NationalNewCases) {
    const std::vector<CountyRecord> r{rec("2020-04-01", "1", 2), rec("2020-04-03", "1", 5), rec("2020-04-02", "2", 4),
                                      rec("2020-04-03", "2", 3)};
    const auto d = daily_new_cases(r);
    EXPECT_EQ(format_date(d.first), "2020-04-01");
    EXPECT_EQ(d.new_cases, (std::vector<double>{2, 4, 3}));
}
