#include "adrbayes/propagator.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

#include "adrbayes/csv.hpp"

namespace adrb {

Coefficients Coefficients::uniform(int n_cells, double delta, double zeta, double nu1, double nu2) {
    const auto n = static_cast<std::size_t>(n_cells);
    return Coefficients{std::vector<double>(n, delta), zeta, std::vector<double>(n, nu1),
                        std::vector<double>(n, nu2)};
}

void Coefficients::validate(int n_cells) const {
    const auto n = static_cast<std::size_t>(n_cells);
    if (delta.size() != n || nu1.size() != n || nu2.size() != n)
        throw std::invalid_argument("coefficient vectors must have one entry per cell");
    for (double d : delta)
        if (!(d >= 0.0) || !std::isfinite(d))
            throw std::invalid_argument("diffusion rate must be finite and non-negative");
    if (!std::isfinite(zeta)) throw std::invalid_argument("growth rate must be finite");
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(nu1[i]) || !std::isfinite(nu2[i]))
            throw std::invalid_argument("advection velocities must be finite");
}

StencilWeights stencil_weights(const Grid& grid, CellId cell, std::span<const double> delta,
                               double zeta, double nu1, double nu2) {
    const double dt = grid.dt();
    const double dx = grid.dx();
    const double dy = grid.dy();
    const double ax = dt / (4.0 * dx * dx);
    const double ay = dt / (4.0 * dy * dy);

    const double dc = delta[cell];
    auto offset_delta = [&](Direction d) {
        const CellId nb = grid.neighbor(cell, d);
        return nb == kBoundary ? dc : delta[nb];
    };
    const double d_left = offset_delta(Direction::Left);
    const double d_right = offset_delta(Direction::Right);
    const double d_down = offset_delta(Direction::Down);
    const double d_up = offset_delta(Direction::Up);

    StencilWeights w{};
    w[static_cast<int>(Slot::Self)] = 1.0 - 2.0 * dc * (dt / (dx * dx) + dt / (dy * dy)) + zeta * dt;
    w[static_cast<int>(Slot::Left)] = ax * (4.0 * dc - d_right + d_left + 2.0 * nu1 * dx);
    w[static_cast<int>(Slot::Right)] = ax * (4.0 * dc + d_right - d_left - 2.0 * nu1 * dx);
    w[static_cast<int>(Slot::Down)] = ay * (4.0 * dc + d_down - d_up - 2.0 * nu2 * dy);
    w[static_cast<int>(Slot::Up)] = ay * (4.0 * dc - d_down + d_up + 2.0 * nu2 * dy);
    return w;
}

namespace {

constexpr std::array<Direction, 4> kSlotDirections{Direction::Left, Direction::Right, Direction::Down,
                                                   Direction::Up};

}  // namespace

Propagator Propagator::build(const Grid& grid, const Coefficients& coef) {
    const int n = grid.size();
    coef.validate(n);

    Propagator h;
    h.coef_ = coef;
    h.row_ptr_.reserve(static_cast<std::size_t>(n) + 1);
    h.cols_.reserve(static_cast<std::size_t>(n) * 5);
    h.weights_.reserve(static_cast<std::size_t>(n) * 5);
    h.row_ptr_.push_back(0);
    for (CellId s = 0; s < n; ++s) {
        const auto w = stencil_weights(grid, s, coef.delta, coef.zeta, coef.nu1[s], coef.nu2[s]);
        h.cols_.push_back(s);
        h.weights_.push_back(w[0]);
        for (std::size_t k = 0; k < kSlotDirections.size(); ++k) {
            const CellId nb = grid.neighbor(s, kSlotDirections[k]);
            if (nb == kBoundary) continue;
            h.cols_.push_back(nb);
            h.weights_.push_back(w[k + 1]);
        }
        h.row_ptr_.push_back(static_cast<int>(h.cols_.size()));
    }
    return h;
}

double Propagator::weight(int row, int col) const {
    const auto cols = row_columns(row);
    const auto w = row_weights(row);
    for (std::size_t k = 0; k < cols.size(); ++k)
        if (cols[k] == col) return w[k];
    return 0.0;
}

double Propagator::row_sum(int row) const {
    double s = 0.0;
    for (double w : row_weights(row)) s += w;
    return s;
}

void Propagator::apply_into(std::span<const double> u_prev, std::span<double> out) const {
    const int n = size();
    if (static_cast<int>(u_prev.size()) != n || static_cast<int>(out.size()) != n)
        throw std::invalid_argument("state vector length does not match propagator size");
    for (int r = 0; r < n; ++r) {
        double acc = 0.0;
        for (int k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) acc += weights_[k] * u_prev[cols_[k]];
        out[r] = acc;
    }
}

std::vector<double> Propagator::apply(std::span<const double> u_prev) const {
    std::vector<double> out(static_cast<std::size_t>(size()));
    apply_into(u_prev, out);
    return out;
}

std::vector<double> Propagator::to_dense() const {
    const auto n = static_cast<std::size_t>(size());
    std::vector<double> dense(n * n, 0.0);
    for (std::size_t r = 0; r < n; ++r)
        for (int k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
            dense[r * n + static_cast<std::size_t>(cols_[k])] = weights_[k];
    return dense;
}

void write_triples(std::ostream& out, const Propagator& h) {
    out << "row,col,weight\n";
    for (int r = 0; r < h.size(); ++r) {
        const auto cols = h.row_columns(r);
        const auto w = h.row_weights(r);
        for (std::size_t k = 0; k < cols.size(); ++k)
            out << (r + 1) << ',' << (cols[k] + 1) << ',' << csv::format_double(w[k]) << '\n';
    }
}

std::vector<StabilityWarning> stability_check(const Grid& grid, const Coefficients& coef) {
    coef.validate(grid.size());
    std::vector<StabilityWarning> warnings;
    const double dt = grid.dt();
    const double k_diff = dt / (grid.dx() * grid.dx()) + dt / (grid.dy() * grid.dy());
    static constexpr std::array<const char*, 4> kNames{"left", "right", "down", "up"};
    for (CellId s = 0; s < grid.size(); ++s) {
        const double loss = 2.0 * coef.delta[s] * k_diff;
        if (loss > 1.0) warnings.push_back({s, "diffusion term exceeds unit diagonal", loss});
        const auto w = stencil_weights(grid, s, coef.delta, coef.zeta, coef.nu1[s], coef.nu2[s]);
        for (std::size_t k = 0; k < kSlotDirections.size(); ++k) {
            if (grid.neighbor(s, kSlotDirections[k]) == kBoundary) continue;
            if (w[k + 1] < 0.0)
                warnings.push_back({s, std::string("negative ") + kNames[k] + " neighbor weight", w[k + 1]});
        }
    }
    return warnings;
}

StencilSensitivity::StencilSensitivity(const Grid& grid)
    : grid_(&grid),
      dt_(grid.dt()),
      ax_(grid.dt() / (2.0 * grid.dx())),
      ay_(grid.dt() / (2.0 * grid.dy())),
      delta_terms_(static_cast<std::size_t>(grid.size())) {
    // H is affine in delta: d(H u)(r)/d delta_j = ((H(e_j, 0, 0) - I) u)(r).
    const int n = grid.size();
    std::vector<double> unit(static_cast<std::size_t>(n), 0.0);
    for (CellId j = 0; j < n; ++j) {
        unit[j] = 1.0;
        std::vector<CellId> rows{j};
        for (CellId nb : grid.neighbors(j))
            if (nb != kBoundary) rows.push_back(nb);
        for (CellId r : rows) {
            auto w = stencil_weights(grid, r, unit, 0.0, 0.0, 0.0);
            w[0] -= 1.0;
            DeltaTerm term;
            term.row = r;
            term.cells[0] = r;
            term.coef[0] = w[0];
            term.n = 1;
            for (std::size_t k = 0; k < kSlotDirections.size(); ++k) {
                const CellId nb = grid.neighbor(r, kSlotDirections[k]);
                if (nb == kBoundary || w[k + 1] == 0.0) continue;
                term.cells[term.n] = nb;
                term.coef[term.n] = w[k + 1];
                ++term.n;
            }
            delta_terms_[j].push_back(term);
        }
        unit[j] = 0.0;
    }
}

double StencilSensitivity::nu1(std::span<const double> u, CellId row) const {
    const CellId l = grid_->neighbor(row, Direction::Left);
    const CellId r = grid_->neighbor(row, Direction::Right);
    return ax_ * ((l == kBoundary ? 0.0 : u[l]) - (r == kBoundary ? 0.0 : u[r]));
}

double StencilSensitivity::nu2(std::span<const double> u, CellId row) const {
    const CellId up = grid_->neighbor(row, Direction::Up);
    const CellId dn = grid_->neighbor(row, Direction::Down);
    return ay_ * ((up == kBoundary ? 0.0 : u[up]) - (dn == kBoundary ? 0.0 : u[dn]));
}

double StencilSensitivity::eval(const DeltaTerm& term, std::span<const double> u) {
    double acc = 0.0;
    for (int k = 0; k < term.n; ++k) acc += term.coef[k] * u[term.cells[k]];
    return acc;
}

}  // namespace adrb
