#include "adrbayes/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "adrbayes/csv.hpp"
#include "adrbayes/errors.hpp"

namespace adrb::ingest {

namespace {

int parse_digits(std::string_view s, std::string_view whole) {
    int v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) throw DataError("bad date '" + std::string(whole) + "'");
    return v;
}

std::string two(unsigned v) { return (v < 10 ? "0" : "") + std::to_string(v); }

}  // namespace

Date parse_date(std::string_view s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-')
        throw DataError("bad date '" + std::string(s) + "' (expected YYYY-MM-DD)");
    for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u})
        if (s[i] < '0' || s[i] > '9') throw DataError("bad date '" + std::string(s) + "' (expected YYYY-MM-DD)");
    const Date d{std::chrono::year{parse_digits(s.substr(0, 4), s)},
                 std::chrono::month{static_cast<unsigned>(parse_digits(s.substr(5, 2), s))},
                 std::chrono::day{static_cast<unsigned>(parse_digits(s.substr(8, 2), s))}};
    if (!d.ok()) throw DataError("invalid calendar date '" + std::string(s) + "'");
    return d;
}

std::string format_date(const Date& d) {
    return std::to_string(static_cast<int>(d.year())) + "-" + two(static_cast<unsigned>(d.month())) + "-" +
           two(static_cast<unsigned>(d.day()));
}

int month_key(const Date& d) { return static_cast<int>(d.year()) * 12 + static_cast<int>(static_cast<unsigned>(d.month())) - 1; }

int parse_month(std::string_view s) {
    if (s.size() != 7 || s[4] != '-') throw DataError("bad month '" + std::string(s) + "' (expected YYYY-MM)");
    const int y = parse_digits(s.substr(0, 4), s);
    const int m = parse_digits(s.substr(5, 2), s);
    if (m < 1 || m > 12) throw DataError("bad month '" + std::string(s) + "'");
    return y * 12 + m - 1;
}

std::string format_month(int key) { return std::to_string(key / 12) + "-" + two(static_cast<unsigned>(key % 12 + 1)); }

// ---- Readers -----------------------------------------------------------------------

std::vector<CountyRecord> read_nyt(std::istream& in, ParseReport& report) {
    csv::Reader r(in);
    r.expect_header({"date", "county", "state", "fips", "cases", "deaths"});
    r.allow_ragged(true);
    std::vector<CountyRecord> out;
    std::vector<std::string> f;
    while (r.next(f)) {
        ++report.rows;
        try {
            if (f.size() != 6) throw DataError("expected 6 fields, got " + std::to_string(f.size()));
            CountyRecord rec;
            rec.date = parse_date(f[0]);
            rec.county = f[1];
            rec.state = f[2];
            rec.fips = f[3];
            const long cases = csv::parse_long(f[4], "cases");
            if (cases < 0) throw DataError("negative cumulative cases");
            rec.cases = cases;
            out.push_back(std::move(rec));
        } catch (const std::exception& e) {
            ++report.skipped;
            report.errors.push_back("line " + std::to_string(r.line_number()) + ": " + e.what());
        }
    }
    return out;
}

std::vector<CentroidRecord> read_centroids(std::istream& in, ParseReport& report) {
    csv::Reader r(in);
    r.expect_header({"fips", "lon", "lat", "population"});
    r.allow_ragged(true);
    std::vector<CentroidRecord> out;
    std::vector<std::string> f;
    while (r.next(f)) {
        ++report.rows;
        try {
            if (f.size() != 4) throw DataError("expected 4 fields, got " + std::to_string(f.size()));
            CentroidRecord c{f[0], csv::parse_double(f[1], "lon"), csv::parse_double(f[2], "lat"),
                             csv::parse_double(f[3], "population")};
            if (c.fips.empty()) throw DataError("missing FIPS");
            if (!(c.population > 0.0)) throw DataError("population must be positive");
            if (!std::isfinite(c.lon) || !std::isfinite(c.lat)) throw DataError("non-finite coordinates");
            out.push_back(std::move(c));
        } catch (const std::exception& e) {
            ++report.skipped;
            report.errors.push_back("line " + std::to_string(r.line_number()) + ": " + e.what());
        }
    }
    return out;
}

// ---- Monthly increments ----------------------------------------------------------------

MonthlyIncrements monthly_new_cases(std::span<const CountyRecord> records, MonthRange months) {
    if (months.last < months.first) throw std::invalid_argument("empty month range");
    MonthlyIncrements out;
    out.months = months;

    // Group by county, keeping input order within a date so the last row of a day wins.
    std::map<std::pair<bool, std::string>, std::vector<const CountyRecord*>> groups;
    for (const auto& rec : records) {
        const bool has_fips = !rec.fips.empty();
        groups[{has_fips, has_fips ? rec.fips : rec.county + "|" + rec.state}].push_back(&rec);
    }
    for (auto& [key, rows] : groups) {
        std::stable_sort(rows.begin(), rows.end(), [](const CountyRecord* a, const CountyRecord* b) {
            return std::chrono::sys_days(a->date) < std::chrono::sys_days(b->date);
        });
        std::vector<std::int64_t> inc(static_cast<std::size_t>(months.size()), 0);
        std::size_t i = 0;
        std::int64_t prev = 0;
        while (i < rows.size() && month_key(rows[i]->date) < months.first) prev = rows[i++]->cases;
        for (int m = months.first; m <= months.last; ++m) {
            std::int64_t end = prev;
            while (i < rows.size() && month_key(rows[i]->date) == m) end = rows[i++]->cases;
            const std::int64_t d = end - prev;
            out.raw_total += d;
            if (d < 0) {
                ++out.clamped_months;
                out.clamped_amount += -d;
                out.warnings.push_back((key.first ? "county " : "group ") + key.second + " " + format_month(m) +
                                       ": cumulative fell from " + std::to_string(prev) + " to " +
                                       std::to_string(end) + ", increment clamped to 0");
            }
            inc[static_cast<std::size_t>(m - months.first)] = std::max<std::int64_t>(d, 0);
            prev = end;
        }
        (key.first ? out.by_county : out.no_fips)[key.second] = std::move(inc);
    }
    return out;
}

// ---- Geometry ------------------------------------------------------------------------

CellPolygons CellPolygons::read(std::istream& in) {
    CellPolygons polys;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        long cell = 0;
        if (!(ss >> cell) || cell < 1) throw DataError("polygon line " + std::to_string(line_no) + ": bad cell id");
        std::vector<Point> ring;
        std::string tok;
        while (ss >> tok) {
            const auto comma = tok.find(',');
            if (comma == std::string::npos)
                throw DataError("polygon line " + std::to_string(line_no) + ": vertex '" + tok + "' is not x,y");
            ring.push_back({csv::parse_double(tok.substr(0, comma), "x"), csv::parse_double(tok.substr(comma + 1), "y")});
        }
        if (ring.size() < 3) throw DataError("polygon line " + std::to_string(line_no) + ": fewer than 3 vertices");
        polys.add(static_cast<CellId>(cell - 1), std::move(ring));
    }
    return polys;
}

void CellPolygons::add(CellId cell, std::vector<Point> ring) { polys_.emplace_back(cell, std::move(ring)); }

std::optional<CellId> CellPolygons::locate(Point p) const {
    for (const auto& [cell, ring] : polys_) {
        bool inside = false;
        for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
            const Point& a = ring[i];
            const Point& b = ring[j];
            if ((a.y > p.y) != (b.y > p.y)) {
                const double x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if (p.x < x) inside = !inside;
            }
        }
        if (inside) return cell;
    }
    return std::nullopt;
}

Assignment assign_to_grid(std::span<const CentroidRecord> centroids, const CellPolygons& polygons) {
    Assignment a;
    for (const auto& c : centroids) {
        if (const auto cell = polygons.locate({c.lon, c.lat}))
            a.cell_of[c.fips] = *cell;
        else
            a.unassigned.push_back(c.fips);
    }
    return a;
}

Aggregate aggregate(const MonthlyIncrements& inc, std::span<const CentroidRecord> centroids,
                    const Assignment& assignment, int n_cells) {
    const int T = inc.months.size();
    Aggregate out;
    out.obs = Observations::zeros(T, n_cells);
    out.population.count.assign(static_cast<std::size_t>(n_cells), 0.0);
    std::vector<std::uint8_t> has_county(static_cast<std::size_t>(n_cells), 0);
    std::map<std::string, double> pop_of;
    for (const auto& c : centroids) pop_of[c.fips] = c.population;
    for (const auto& [fips, cell] : assignment.cell_of) {
        if (cell < 0 || cell >= n_cells)
            throw DataError("polygon cell " + std::to_string(cell + 1) + " is outside the grid");
        has_county[cell] = 1;
        out.population.count[cell] += pop_of.at(fips);
    }

    auto& rep = out.report;
    rep.raw_total = inc.raw_total;
    rep.clamped_added = inc.clamped_amount;
    for (const auto& [fips, series] : inc.by_county) {
        std::int64_t total = 0;
        for (auto v : series) total += v;
        const auto it = assignment.cell_of.find(fips);
        if (it != assignment.cell_of.end()) {
            for (int t = 0; t < T; ++t)
                out.obs.counts[static_cast<std::size_t>(t) * n_cells + it->second] += series[t];
            rep.aggregated_total += total;
        } else if (pop_of.count(fips) != 0) {
            rep.unassigned_total += total;
            ++rep.unassigned_counties;
        } else {
            rep.no_centroid_total += total;
            ++rep.no_centroid_counties;
        }
    }
    for (const auto& [key, series] : inc.no_fips) {
        for (auto v : series) rep.no_fips_total += v;
        ++rep.no_fips_groups;
    }
    for (CellId s = 0; s < n_cells; ++s)
        if (!has_county[s]) {
            out.empty_cells.push_back(s);
            for (int t = 0; t < T; ++t) out.obs.observed[static_cast<std::size_t>(t) * n_cells + s] = 0;
        }
    return out;
}

void write_report(std::ostream& out, const ConservationReport& r, const ParseReport& parse,
                  const MonthlyIncrements& inc) {
    out << "metric,value\n";
    out << "rows_read," << parse.rows << '\n';
    out << "rows_skipped," << parse.skipped << '\n';
    out << "raw_total," << r.raw_total << '\n';
    out << "clamped_added," << r.clamped_added << '\n';
    out << "clamped_months," << inc.clamped_months << '\n';
    out << "aggregated_total," << r.aggregated_total << '\n';
    out << "unassigned_total," << r.unassigned_total << '\n';
    out << "unassigned_counties," << r.unassigned_counties << '\n';
    out << "no_centroid_total," << r.no_centroid_total << '\n';
    out << "no_centroid_counties," << r.no_centroid_counties << '\n';
    out << "no_fips_total," << r.no_fips_total << '\n';
    out << "no_fips_groups," << r.no_fips_groups << '\n';
    out << "balanced," << (r.balanced() ? "yes" : "no") << '\n';
}

// ---- Descriptive series ------------------------------------------------------------------

std::vector<double> moving_average(std::span<const double> series, int window) {
    if (window < 1 || window % 2 == 0) throw std::invalid_argument("moving-average window must be odd and positive");
    const auto n = static_cast<std::ptrdiff_t>(series.size());
    const std::ptrdiff_t h = window / 2;
    std::vector<double> out(series.size());
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto lo = std::max<std::ptrdiff_t>(0, i - h);
        const auto hi = std::min<std::ptrdiff_t>(n - 1, i + h);
        double acc = 0.0;
        for (auto j = lo; j <= hi; ++j) acc += series[static_cast<std::size_t>(j)];
        out[static_cast<std::size_t>(i)] = acc / static_cast<double>(hi - lo + 1);
    }
    return out;
}

DailySeries daily_new_cases(std::span<const CountyRecord> records) {
    DailySeries out;
    if (records.empty()) return out;
    auto day = [](const Date& d) { return std::chrono::sys_days(d).time_since_epoch().count(); };
    auto lo = day(records.front().date), hi = lo;
    std::map<std::string, std::vector<const CountyRecord*>> by_county;
    for (const auto& r : records) {
        lo = std::min(lo, day(r.date));
        hi = std::max(hi, day(r.date));
        if (!r.fips.empty()) by_county[r.fips].push_back(&r);
    }
    out.first = Date{std::chrono::sys_days{std::chrono::days{lo}}};
    out.new_cases.assign(static_cast<std::size_t>(hi - lo + 1), 0.0);
    for (auto& [fips, rows] : by_county) {
        std::stable_sort(rows.begin(), rows.end(),
                         [&](const CountyRecord* a, const CountyRecord* b) { return day(a->date) < day(b->date); });
        std::int64_t prev = 0;
        for (const auto* r : rows) {
            out.new_cases[static_cast<std::size_t>(day(r->date) - lo)] +=
                static_cast<double>(std::max<std::int64_t>(r->cases - prev, 0));
            prev = r->cases;
        }
    }
    return out;
}

}  // namespace adrb::ingest
