#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace adrb {

/// Cell index into the active set, 0-based in memory. Files use 1-based ids.
using CellId = int;
inline constexpr CellId kBoundary = -1;

/// Lattice axes: x grows with the column index (west to east), y grows with
/// the row index (north to south, row 0 is the northern edge). "Down" is +y.
enum class Direction : std::uint8_t { Left = 0, Right = 1, Down = 2, Up = 3 };
inline constexpr std::array<Direction, 4> kDirections{Direction::Left, Direction::Right,
                                                      Direction::Down, Direction::Up};

struct LatticePos {
    int ix = 0;
    int iy = 0;
    friend bool operator==(const LatticePos&, const LatticePos&) = default;
};

struct Spacing {
    double dx = 1.0;
    double dy = 1.0;
    double dt = 1.0;
};

/// Row-major boolean lattice, row 0 first.
struct LatticeMask {
    int nx = 0;
    int ny = 0;
    std::vector<std::uint8_t> active;

    static LatticeMask full(int nx, int ny);
    bool at(int ix, int iy) const { return active[static_cast<std::size_t>(iy) * nx + ix] != 0; }
    void set(int ix, int iy, bool on) { active[static_cast<std::size_t>(iy) * nx + ix] = on ? 1 : 0; }
    std::size_t count() const;
};

/// Active cells of a (possibly irregular) lattice with their neighbor topology.
///
/// Cells are enumerated row-major from the north-west corner over active
/// positions only. A neighbor lookup that leaves the lattice or lands on an
/// inactive position returns kBoundary. Immutable after construction.
class Grid {
public:
    static Grid rectangular(int nx, int ny, Spacing spacing);
    static Grid masked(const LatticeMask& mask, Spacing spacing);

    int nx() const noexcept { return mask_.nx; }
    int ny() const noexcept { return mask_.ny; }
    int size() const noexcept { return static_cast<int>(positions_.size()); }
    double dx() const noexcept { return spacing_.dx; }
    double dy() const noexcept { return spacing_.dy; }
    double dt() const noexcept { return spacing_.dt; }
    const Spacing& spacing() const noexcept { return spacing_; }
    const LatticeMask& mask() const noexcept { return mask_; }

    LatticePos position(CellId cell) const { return positions_.at(static_cast<std::size_t>(cell)); }
    std::optional<CellId> cell_at(int ix, int iy) const;

    CellId neighbor(CellId cell, Direction dir) const {
        return neighbors_[static_cast<std::size_t>(cell)][static_cast<std::size_t>(dir)];
    }
    const std::array<CellId, 4>& neighbors(CellId cell) const {
        return neighbors_[static_cast<std::size_t>(cell)];
    }
    int active_neighbor_count(CellId cell) const;
    /// All four neighbors active.
    bool is_interior(CellId cell) const { return active_neighbor_count(cell) == 4; }

    friend bool operator==(const Grid& a, const Grid& b);

private:
    Grid(LatticeMask mask, Spacing spacing);

    LatticeMask mask_;
    Spacing spacing_;
    std::vector<LatticePos> positions_;
    std::vector<CellId> index_;  // lattice slot -> cell or kBoundary
    std::vector<std::array<CellId, 4>> neighbors_;
};

/// Per-cell population, constant over time.
struct CellPopulation {
    std::vector<double> count;

    void validate(int n_cells) const;
    std::vector<double> log_count() const;
};

// Grid fixture: header line "nx ny dx dy dt", then ny rows of nx '0'/'1' characters.
// Lines starting with '#' are ignored.
Grid read_grid(std::istream& in);
Grid read_grid_file(const std::filesystem::path& path);
void write_grid(std::ostream& out, const Grid& grid);

// Population file: header "cell_id,population", 1-based ids.
CellPopulation read_population(std::istream& in, int n_cells);
CellPopulation read_population_file(const std::filesystem::path& path, int n_cells);
void write_population(std::ostream& out, const CellPopulation& pop);

}  // namespace adrb
