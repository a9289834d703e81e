#pragma once

#include <cstddef>
#include <initializer_list>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

// Minimal delimited-text helpers shared by every file format in the project.
// Lines beginning with '#' are provenance comments and are skipped on read.
namespace adrb::csv {

std::vector<std::string> split(std::string_view line, char delim = ',');

/// Shortest decimal representation that round-trips to the same double.
std::string format_double(double v);

double parse_double(std::string_view s, std::string_view what);
long parse_long(std::string_view s, std::string_view what);

class Reader {
public:
    explicit Reader(std::istream& in, char delim = ',') : in_(in), delim_(delim) {}

    /// Reads the header row and checks it names exactly these columns.
    void expect_header(std::initializer_list<std::string_view> columns);
    std::vector<std::string> read_header();

    /// Next data row; false at end of input. Rows with the wrong field count
    /// throw DataError unless allow_ragged() was set.
    bool next(std::vector<std::string>& row);

    void allow_ragged(bool on) { ragged_ = on; }
    std::size_t line_number() const noexcept { return line_no_; }
    std::size_t columns() const noexcept { return n_cols_; }

private:
    bool next_line(std::string& line);

    std::istream& in_;
    char delim_;
    std::size_t line_no_ = 0;
    std::size_t n_cols_ = 0;
    bool ragged_ = false;
};

}  // namespace adrb::csv
