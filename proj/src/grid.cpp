#include "adrbayes/grid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "adrbayes/errors.hpp"
#include "adrbayes/csv.hpp"

namespace adrb {

LatticeMask LatticeMask::full(int nx, int ny) {
    if (nx < 1 || ny < 1) throw std::invalid_argument("lattice dimensions must be >= 1");
    LatticeMask m;
    m.nx = nx;
    m.ny = ny;
    m.active.assign(static_cast<std::size_t>(nx) * ny, 1);
    return m;
}

std::size_t LatticeMask::count() const {
    return static_cast<std::size_t>(std::count(active.begin(), active.end(), std::uint8_t{1}));
}

namespace {

void check_spacing(const Spacing& s) {
    if (!(s.dx > 0.0) || !(s.dy > 0.0) || !(s.dt > 0.0))
        throw std::invalid_argument("grid spacings dx, dy, dt must be positive");
}

}  // namespace

Grid::Grid(LatticeMask mask, Spacing spacing) : mask_(std::move(mask)), spacing_(spacing) {
    check_spacing(spacing_);
    if (mask_.nx < 1 || mask_.ny < 1)
        throw std::invalid_argument("lattice dimensions must be >= 1");
    if (mask_.active.size() != static_cast<std::size_t>(mask_.nx) * mask_.ny)
        throw std::invalid_argument("mask size does not match lattice dimensions");

    index_.assign(mask_.active.size(), kBoundary);
    for (int iy = 0; iy < mask_.ny; ++iy) {
        for (int ix = 0; ix < mask_.nx; ++ix) {
            if (!mask_.at(ix, iy)) continue;
            index_[static_cast<std::size_t>(iy) * mask_.nx + ix] = static_cast<CellId>(positions_.size());
            positions_.push_back({ix, iy});
        }
    }
    if (positions_.empty()) throw std::invalid_argument("mask has no active cells");

    neighbors_.resize(positions_.size());
    for (std::size_t c = 0; c < positions_.size(); ++c) {
        const auto [ix, iy] = positions_[c];
        auto lookup = [&](int x, int y) { return cell_at(x, y).value_or(kBoundary); };
        neighbors_[c][static_cast<std::size_t>(Direction::Left)] = lookup(ix - 1, iy);
        neighbors_[c][static_cast<std::size_t>(Direction::Right)] = lookup(ix + 1, iy);
        neighbors_[c][static_cast<std::size_t>(Direction::Down)] = lookup(ix, iy + 1);
        neighbors_[c][static_cast<std::size_t>(Direction::Up)] = lookup(ix, iy - 1);
    }
}

Grid Grid::rectangular(int nx, int ny, Spacing spacing) {
    return Grid(LatticeMask::full(nx, ny), spacing);
}

Grid Grid::masked(const LatticeMask& mask, Spacing spacing) {
    if (mask.count() == 0) throw std::invalid_argument("mask has no active cells");
    return Grid(mask, spacing);
}

std::optional<CellId> Grid::cell_at(int ix, int iy) const {
    if (ix < 0 || iy < 0 || ix >= mask_.nx || iy >= mask_.ny) return std::nullopt;
    const CellId c = index_[static_cast<std::size_t>(iy) * mask_.nx + ix];
    if (c == kBoundary) return std::nullopt;
    return c;
}

int Grid::active_neighbor_count(CellId cell) const {
    const auto& nb = neighbors(cell);
    return static_cast<int>(std::count_if(nb.begin(), nb.end(), [](CellId c) { return c != kBoundary; }));
}

bool operator==(const Grid& a, const Grid& b) {
    return a.mask_.nx == b.mask_.nx && a.mask_.ny == b.mask_.ny && a.mask_.active == b.mask_.active &&
           a.spacing_.dx == b.spacing_.dx && a.spacing_.dy == b.spacing_.dy &&
           a.spacing_.dt == b.spacing_.dt && a.positions_ == b.positions_ &&
           a.neighbors_ == b.neighbors_;
}

void CellPopulation::validate(int n_cells) const {
    if (static_cast<int>(count.size()) != n_cells)
        throw std::invalid_argument("population has " + std::to_string(count.size()) +
                                    " cells, grid has " + std::to_string(n_cells));
    for (std::size_t i = 0; i < count.size(); ++i)
        if (!(count[i] > 0.0) || !std::isfinite(count[i]))
            throw std::invalid_argument("population of cell " + std::to_string(i + 1) +
                                        " must be positive");
}

std::vector<double> CellPopulation::log_count() const {
    std::vector<double> out(count.size());
    std::transform(count.begin(), count.end(), out.begin(), [](double c) { return std::log(c); });
    return out;
}

Grid read_grid(std::istream& in) {
    std::string line;
    auto next_content_line = [&]() -> bool {
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty() || line.front() == '#') continue;
            return true;
        }
        return false;
    };
    if (!next_content_line()) throw DataError("grid file: missing header line");
    std::istringstream header(line);
    int nx = 0, ny = 0;
    Spacing sp;
    if (!(header >> nx >> ny >> sp.dx >> sp.dy >> sp.dt))
        throw DataError("grid file: header must be 'nx ny dx dy dt'");
    if (nx < 1 || ny < 1) throw DataError("grid file: non-positive lattice dimension");
    LatticeMask mask;
    mask.nx = nx;
    mask.ny = ny;
    mask.active.assign(static_cast<std::size_t>(nx) * ny, 0);
    for (int iy = 0; iy < ny; ++iy) {
        if (!next_content_line()) throw DataError("grid file: expected " + std::to_string(ny) + " mask rows");
        if (static_cast<int>(line.size()) != nx)
            throw DataError("grid file: mask row " + std::to_string(iy + 1) + " has wrong width");
        for (int ix = 0; ix < nx; ++ix) {
            if (line[static_cast<std::size_t>(ix)] != '0' && line[static_cast<std::size_t>(ix)] != '1')
                throw DataError("grid file: mask characters must be 0 or 1");
            mask.set(ix, iy, line[static_cast<std::size_t>(ix)] == '1');
        }
    }
    try {
        return Grid::masked(mask, sp);
    } catch (const std::invalid_argument& e) {
        throw DataError(std::string("grid file: ") + e.what());
    }
}

Grid read_grid_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open grid file " + path.string());
    return read_grid(in);
}

void write_grid(std::ostream& out, const Grid& grid) {
    out << grid.nx() << ' ' << grid.ny() << ' ' << csv::format_double(grid.dx()) << ' '
        << csv::format_double(grid.dy()) << ' ' << csv::format_double(grid.dt()) << '\n';
    for (int iy = 0; iy < grid.ny(); ++iy) {
        for (int ix = 0; ix < grid.nx(); ++ix) out << (grid.mask().at(ix, iy) ? '1' : '0');
        out << '\n';
    }
}

CellPopulation read_population(std::istream& in, int n_cells) {
    CellPopulation pop;
    pop.count.assign(static_cast<std::size_t>(n_cells), 0.0);
    std::vector<bool> seen(static_cast<std::size_t>(n_cells), false);
    csv::Reader reader(in);
    reader.expect_header({"cell_id", "population"});
    std::vector<std::string> row;
    while (reader.next(row)) {
        const long id = csv::parse_long(row[0], "cell_id");
        if (id < 1 || id > n_cells)
            throw DataError("population file: cell_id " + row[0] + " out of range");
        pop.count[static_cast<std::size_t>(id - 1)] = csv::parse_double(row[1], "population");
        seen[static_cast<std::size_t>(id - 1)] = true;
    }
    for (int c = 0; c < n_cells; ++c)
        if (!seen[static_cast<std::size_t>(c)])
            throw DataError("population file: missing cell " + std::to_string(c + 1));
    return pop;
}

CellPopulation read_population_file(const std::filesystem::path& path, int n_cells) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open population file " + path.string());
    return read_population(in, n_cells);
}

void write_population(std::ostream& out, const CellPopulation& pop) {
    out << "cell_id,population\n";
    for (std::size_t c = 0; c < pop.count.size(); ++c)
        out << (c + 1) << ',' << csv::format_double(pop.count[c]) << '\n';
}

}  // namespace adrb
