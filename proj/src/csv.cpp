#include "adrbayes/csv.hpp"

#include <charconv>
#include <cmath>
#include <istream>

#include "adrbayes/errors.hpp"

namespace adrb::csv {

std::vector<std::string> split(std::string_view line, char delim) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(ch);
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == delim) {
            out.push_back(std::move(field));
            field.clear();
        } else {
            field.push_back(ch);
        }
    }
    out.push_back(std::move(field));
    return out;
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view s, std::string_view what) {
    if (s == "nan" || s == "NaN" || s == "NA") return std::nan("");
    if (s == "inf") return INFINITY;
    if (s == "-inf") return -INFINITY;
    double v = 0.0;
    const char* first = s.data();
    if (!s.empty() && s.front() == '+') ++first;
    auto res = std::from_chars(first, s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || s.empty())
        throw DataError("cannot parse " + std::string(what) + " from '" + std::string(s) + "'");
    return v;
}

long parse_long(std::string_view s, std::string_view what) {
    long v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || s.empty())
        throw DataError("cannot parse " + std::string(what) + " from '" + std::string(s) + "'");
    return v;
}

bool Reader::next_line(std::string& line) {
    while (std::getline(in_, line)) {
        ++line_no_;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        return true;
    }
    return false;
}

std::vector<std::string> Reader::read_header() {
    std::string line;
    if (!next_line(line)) throw DataError("empty delimited file: missing header");
    auto cols = split(line, delim_);
    n_cols_ = cols.size();
    return cols;
}

void Reader::expect_header(std::initializer_list<std::string_view> columns) {
    const auto cols = read_header();
    bool ok = cols.size() == columns.size();
    std::size_t i = 0;
    for (auto c : columns) {
        if (!ok) break;
        ok = cols[i++] == c;
    }
    if (!ok) {
        std::string want;
        for (auto c : columns) want += (want.empty() ? "" : ",") + std::string(c);
        throw DataError("unexpected header at line " + std::to_string(line_no_) + ", expected '" +
                        want + "'");
    }
}

bool Reader::next(std::vector<std::string>& row) {
    std::string line;
    if (!next_line(line)) return false;
    row = split(line, delim_);
    if (!ragged_ && n_cols_ != 0 && row.size() != n_cols_)
        throw DataError("line " + std::to_string(line_no_) + ": expected " + std::to_string(n_cols_) +
                        " fields, found " + std::to_string(row.size()));
    return true;
}

}  // namespace adrb::csv
