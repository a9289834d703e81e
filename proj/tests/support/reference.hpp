#pragma once

// Test-only dense evaluator of the one-step matrix, written straight from the
// stencil definition against lattice coordinates (no use of the library's
// neighbor tables or CSR assembly).

#include <vector>

#include "adrbayes/grid.hpp"

namespace adrb::testing {

/// Row-major S x S matrix. delta, nu1, nu2 hold one value per active cell.
inline std::vector<double> dense_reference(const LatticeMask& mask, const Spacing& h,
                                           const std::vector<double>& delta, double zeta,
                                           const std::vector<double>& nu1,
                                           const std::vector<double>& nu2) {
    std::vector<int> id(static_cast<std::size_t>(mask.nx) * mask.ny, -1);
    int n = 0;
    for (int iy = 0; iy < mask.ny; ++iy)
        for (int ix = 0; ix < mask.nx; ++ix)
            if (mask.at(ix, iy)) id[static_cast<std::size_t>(iy) * mask.nx + ix] = n++;
    auto cell = [&](int ix, int iy) {
        if (ix < 0 || iy < 0 || ix >= mask.nx || iy >= mask.ny) return -1;
        return id[static_cast<std::size_t>(iy) * mask.nx + ix];
    };

    std::vector<double> H(static_cast<std::size_t>(n) * n, 0.0);
    const double ax = h.dt / (4.0 * h.dx * h.dx);
    const double ay = h.dt / (4.0 * h.dy * h.dy);
    for (int iy = 0; iy < mask.ny; ++iy)
        for (int ix = 0; ix < mask.nx; ++ix) {
            const int s = cell(ix, iy);
            if (s < 0) continue;
            const int l = cell(ix - 1, iy), r = cell(ix + 1, iy);
            const int d = cell(ix, iy + 1), u = cell(ix, iy - 1);
            const double dc = delta[s];
            const double dl = l >= 0 ? delta[l] : dc;
            const double dr = r >= 0 ? delta[r] : dc;
            const double dd = d >= 0 ? delta[d] : dc;
            const double du = u >= 0 ? delta[u] : dc;
            auto at = [&](int col) -> double& { return H[static_cast<std::size_t>(s) * n + col]; };
            at(s) = 1.0 - 2.0 * dc * (h.dt / (h.dx * h.dx) + h.dt / (h.dy * h.dy)) + zeta * h.dt;
            if (l >= 0) at(l) = ax * (4.0 * dc - dr + dl + 2.0 * nu1[s] * h.dx);
            if (r >= 0) at(r) = ax * (4.0 * dc + dr - dl - 2.0 * nu1[s] * h.dx);
            if (d >= 0) at(d) = ay * (4.0 * dc + dd - du - 2.0 * nu2[s] * h.dy);
            if (u >= 0) at(u) = ay * (4.0 * dc - dd + du + 2.0 * nu2[s] * h.dy);
        }
    return H;
}

}  // namespace adrb::testing
