#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "adrbayes/grid.hpp"

namespace adrb {

/// Rates for one explicit time step: per-cell diffusion, scalar growth, per-cell advection.
/// Velocities are in grid units per unit time; positive nu1 moves mass toward +x
/// (right), positive nu2 toward +y (down).
struct Coefficients {
    std::vector<double> delta;
    double zeta = 0.0;
    std::vector<double> nu1;
    std::vector<double> nu2;

    static Coefficients uniform(int n_cells, double delta, double zeta, double nu1, double nu2);
    /// Throws std::invalid_argument on length mismatch, negative or non-finite delta.
    void validate(int n_cells) const;
};

/// Stencil slot order inside a propagator row.
enum class Slot : int { Self = 0, Left = 1, Right = 2, Down = 3, Up = 4 };

/// Five stencil weights of one row; boundary slots are dropped by the caller.
using StencilWeights = std::array<double, 5>;

/// Weights of row `cell` for a given coefficient set. `delta` has one entry per cell.
/// A neighbor offset that falls on an inactive position reads delta at the center cell.
StencilWeights stencil_weights(const Grid& grid, CellId cell, std::span<const double> delta,
                               double zeta, double nu1, double nu2);

/// One-step linear map u(t) = H u(t - dt), stored in compressed sparse rows.
/// Each row holds its entries in slot order (self, left, right, down, up) with
/// inactive neighbors omitted (homogeneous Dirichlet boundary).
class Propagator {
public:
    static Propagator build(const Grid& grid, const Coefficients& coef);

    int size() const noexcept { return static_cast<int>(row_ptr_.size()) - 1; }
    std::size_t nonzeros() const noexcept { return cols_.size(); }

    std::span<const int> row_columns(int row) const {
        return {cols_.data() + row_ptr_[row], cols_.data() + row_ptr_[row + 1]};
    }
    std::span<const double> row_weights(int row) const {
        return {weights_.data() + row_ptr_[row], weights_.data() + row_ptr_[row + 1]};
    }
    /// H(row, col), zero when outside the sparsity pattern.
    double weight(int row, int col) const;
    double row_sum(int row) const;

    std::vector<double> apply(std::span<const double> u_prev) const;
    void apply_into(std::span<const double> u_prev, std::span<double> out) const;

    const Coefficients& coefficients() const noexcept { return coef_; }

    /// Dense row-major copy, for tests and small-grid debugging.
    std::vector<double> to_dense() const;

private:
    std::vector<int> row_ptr_;
    std::vector<int> cols_;
    std::vector<double> weights_;
    Coefficients coef_;
};

/// Debug dump: header "row,col,weight", 1-based indices, CSR order.
void write_triples(std::ostream& out, const Propagator& h);

struct StabilityWarning {
    CellId cell = 0;
    std::string reason;
    double value = 0.0;
};

/// Flags cells whose explicit update loses positivity: the diffusion part of the
/// diagonal exceeds one, or an advection term flips a neighbor weight negative.
/// Advisory only.
std::vector<StabilityWarning> stability_check(const Grid& grid, const Coefficients& coef);

/// Partial derivatives of (H u)(row) with respect to each rate. H is affine in
/// every rate, so these are exact and independent of the rates themselves.
class StencilSensitivity {
public:
    struct DeltaTerm {
        CellId row = 0;
        int n = 0;
        std::array<CellId, 5> cells{};
        std::array<double, 5> coef{};
    };

    explicit StencilSensitivity(const Grid& grid);

    double zeta(std::span<const double> u, CellId row) const { return dt_ * u[row]; }
    /// dt / (2 dx) * (u_left - u_right); off-grid values are zero.
    double nu1(std::span<const double> u, CellId row) const;
    /// dt / (2 dy) * (u_up - u_down).
    double nu2(std::span<const double> u, CellId row) const;

    /// Rows touched by delta(cell) and the coefficients of d(H u)(row)/d delta(cell).
    std::span<const DeltaTerm> delta_terms(CellId cell) const { return delta_terms_[cell]; }
    static double eval(const DeltaTerm& term, std::span<const double> u);

private:
    const Grid* grid_;
    double dt_;
    double ax_;
    double ay_;
    std::vector<std::vector<DeltaTerm>> delta_terms_;
};

}  // namespace adrb
