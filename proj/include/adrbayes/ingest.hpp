#pragma once

#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "adrbayes/grid.hpp"
#include "adrbayes/model.hpp"

namespace adrb::ingest {

using Date = std::chrono::year_month_day;

/// ISO "YYYY-MM-DD" only. Throws DataError otherwise.
Date parse_date(std::string_view s);
std::string format_date(const Date& d);

/// Months as consecutive integers (year * 12 + month - 1).
int month_key(const Date& d);
/// "YYYY-MM" -> month key.
int parse_month(std::string_view s);
std::string format_month(int key);

struct CountyRecord {
    Date date;
    std::string fips;    // empty when the source row has none
    std::string county;  // name, used to group rows without FIPS
    std::string state;
    std::int64_t cases = 0;  // cumulative
};

struct CentroidRecord {
    std::string fips;
    double lon = 0.0;
    double lat = 0.0;
    double population = 0.0;
};

struct ParseReport {
    long rows = 0;
    long skipped = 0;
    std::vector<std::string> errors;  // one message per skipped row
};

/// NYT schema "date,county,state,fips,cases,deaths". Unparseable rows are
/// reported and skipped. A blank FIPS is kept (empty string) for the report.
std::vector<CountyRecord> read_nyt(std::istream& in, ParseReport& report);
/// "fips,lon,lat,population"; population must be positive.
std::vector<CentroidRecord> read_centroids(std::istream& in, ParseReport& report);

struct MonthRange {
    int first = 0;  // month keys, inclusive
    int last = 0;
    int size() const { return last - first + 1; }
};

struct MonthlyIncrements {
    MonthRange months;
    std::map<std::string, std::vector<std::int64_t>> by_county;  // key: FIPS
    std::map<std::string, std::vector<std::int64_t>> no_fips;    // key: "county|state"
    long clamped_months = 0;
    std::int64_t clamped_amount = 0;  // total added by clamping negatives to 0
    std::int64_t raw_total = 0;       // signed sum of unclamped increments, all keys
    std::vector<std::string> warnings;
};

/// Increment for month m = last cumulative at or before the end of m minus the
/// last cumulative before the start of m (0 when the county has no earlier row).
/// Negative increments are clamped to 0 and reported.
MonthlyIncrements monthly_new_cases(std::span<const CountyRecord> records, MonthRange months);

// ---- Geometry ----------------------------------------------------------------------

struct Point {
    double x = 0.0;
    double y = 0.0;
};

/// Cell boundary polygons. Text format, one polygon per line:
///   <cell> <x1>,<y1> <x2>,<y2> ...
/// with 1-based cell ids; '#' lines are comments.
class CellPolygons {
public:
    static CellPolygons read(std::istream& in);
    void add(CellId cell, std::vector<Point> ring);

    /// Cell containing p. Boundaries follow a half-open rule so a point on an
    /// edge shared by two cells belongs to exactly one of them.
    std::optional<CellId> locate(Point p) const;
    std::size_t size() const { return polys_.size(); }

private:
    std::vector<std::pair<CellId, std::vector<Point>>> polys_;
};

struct Assignment {
    std::map<std::string, CellId> cell_of;  // FIPS -> 0-based cell
    std::vector<std::string> unassigned;    // centroid outside every cell
};
Assignment assign_to_grid(std::span<const CentroidRecord> centroids, const CellPolygons& polygons);

struct ConservationReport {
    std::int64_t raw_total = 0;          // signed increments of every county and no-FIPS group
    std::int64_t clamped_added = 0;      // added when clamping negatives
    std::int64_t aggregated_total = 0;   // sum of the output counts
    std::int64_t unassigned_total = 0;   // counties outside every cell
    std::int64_t no_centroid_total = 0;  // FIPS without a centroid record
    std::int64_t no_fips_total = 0;      // rows without FIPS
    long unassigned_counties = 0;
    long no_centroid_counties = 0;
    long no_fips_groups = 0;

    /// raw + clamped == aggregated + unassigned + no_centroid + no_fips
    bool balanced() const {
        return raw_total + clamped_added ==
               aggregated_total + unassigned_total + no_centroid_total + no_fips_total;
    }
};

struct Aggregate {
    Observations obs;        // [months][cells]; cells with no county are unobserved
    CellPopulation population;
    std::vector<CellId> empty_cells;
    ConservationReport report;
};

/// Cell-month counts and cell populations. t = 1 is the first month of the range.
Aggregate aggregate(const MonthlyIncrements& inc, std::span<const CentroidRecord> centroids,
                    const Assignment& assignment, int n_cells);

void write_report(std::ostream& out, const ConservationReport& r, const ParseReport& parse,
                  const MonthlyIncrements& inc);

// ---- Descriptive series --------------------------------------------------------------

/// Centered moving average; windows shrink at the edges. `window` must be odd.
std::vector<double> moving_average(std::span<const double> series, int window = 7);

/// National daily new cases (sum over FIPS counties of clamped day-to-day
/// differences), one entry per calendar day from the first to the last date.
struct DailySeries {
    Date first;
    std::vector<double> new_cases;
};
DailySeries daily_new_cases(std::span<const CountyRecord> records);

}  // namespace adrb::ingest
