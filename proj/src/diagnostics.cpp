#include "adrbayes/diagnostics.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <mutex>
#include <numeric>
#include <stdexcept>

namespace adrb {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::size_t min_length(std::span<const std::span<const double>> chains) {
    std::size_t n = std::numeric_limits<std::size_t>::max();
    for (const auto& c : chains) n = std::min(n, c.size());
    return n;
}

double mean_of(std::span<const double> x) {
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double var_of(std::span<const double> x, double mean) {
    double acc = 0.0;
    for (double v : x) acc += (v - mean) * (v - mean);
    return acc / static_cast<double>(x.size() - 1);
}

// The FFTW planner is not re-entrant.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

// Biased autocovariance (divisor n) for lags 0..n-1, via zero-padded FFT.
std::vector<double> autocovariance(std::span<const double> x) {
    const std::size_t n = x.size();
    std::size_t len = 1;
    while (len < 2 * n) len <<= 1;
    const double mu = mean_of(x);

    std::vector<double> buf(len, 0.0);
    for (std::size_t i = 0; i < n; ++i) buf[i] = x[i] - mu;
    std::vector<std::complex<double>> spec(len / 2 + 1);

    fftw_plan fwd;
    fftw_plan inv;
    {
        std::lock_guard lock(planner_mutex());
        fwd = fftw_plan_dft_r2c_1d(static_cast<int>(len), buf.data(),
                                   reinterpret_cast<fftw_complex*>(spec.data()), FFTW_ESTIMATE);
        inv = fftw_plan_dft_c2r_1d(static_cast<int>(len), reinterpret_cast<fftw_complex*>(spec.data()),
                                   buf.data(), FFTW_ESTIMATE);
    }
    fftw_execute(fwd);
    for (auto& c : spec) c = std::norm(c);
    fftw_execute(inv);
    {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(fwd);
        fftw_destroy_plan(inv);
    }
    std::vector<double> acov(n);
    const double scale = 1.0 / (static_cast<double>(len) * static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) acov[i] = buf[i] * scale;
    return acov;
}

}  // namespace

double rhat(std::span<const std::span<const double>> chains) {
    if (chains.size() < 2) throw std::invalid_argument("rhat needs at least two chains");
    const std::size_t len = min_length(chains);
    if (len < 4) throw std::invalid_argument("rhat needs at least four draws per chain");
    const std::size_t n = len / 2;

    std::vector<double> means;
    std::vector<double> vars;
    for (const auto& c : chains) {
        // Drop the middle draw of odd-length chains so both halves have n draws.
        for (std::size_t start : {std::size_t{0}, len - n}) {
            const auto seg = c.subspan(start, n);
            const double mu = mean_of(seg);
            means.push_back(mu);
            vars.push_back(var_of(seg, mu));
        }
    }
    const double w = mean_of(vars);
    if (!(w > 0.0)) return kNaN;
    const double grand = mean_of(means);
    double b_over_n = 0.0;
    for (double m : means) b_over_n += (m - grand) * (m - grand);
    b_over_n /= static_cast<double>(means.size() - 1);
    return std::sqrt((w + b_over_n) / w);
}

double ess(std::span<const std::span<const double>> chains) {
    if (chains.empty()) throw std::invalid_argument("ess needs at least one chain");
    const std::size_t n = min_length(chains);
    if (n < 4) return kNaN;
    const std::size_t m = chains.size();

    std::vector<std::vector<double>> acov;
    std::vector<double> means;
    for (const auto& c : chains) {
        const auto seg = c.first(n);
        acov.push_back(autocovariance(seg));
        means.push_back(mean_of(seg));
    }
    const double nd = static_cast<double>(n);
    double w = 0.0;
    for (const auto& a : acov) w += a[0] * nd / (nd - 1.0);
    w /= static_cast<double>(m);
    double var_plus = w * (nd - 1.0) / nd;
    if (m > 1) {
        const double grand = mean_of(means);
        double b = 0.0;
        for (double mu : means) b += (mu - grand) * (mu - grand);
        var_plus += b / static_cast<double>(m - 1);
    }
    if (!(var_plus > 0.0)) return kNaN;

    auto rho = [&](std::size_t lag) {
        double mean_acov = 0.0;
        for (const auto& a : acov) mean_acov += a[lag];
        mean_acov /= static_cast<double>(m);
        return 1.0 - (w - mean_acov) / var_plus;
    };

    // Geyer initial positive sequence with monotone pair sums.
    double tau = -1.0;
    double prev_pair = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
        double pair = rho(2 * k) + rho(2 * k + 1);
        if (pair < 0.0) break;
        pair = std::min(pair, prev_pair);
        tau += 2.0 * pair;
        prev_pair = pair;
    }
    const double total = static_cast<double>(m) * nd;
    tau = std::max(tau, 1.0 / std::log10(total));
    return total / tau;
}

double quantile_sorted(std::span<const double> sorted, double p) {
    if (sorted.empty()) return kNaN;
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

Moments moments(std::span<const double> x) {
    Moments mo;
    if (x.empty()) return {kNaN, kNaN};
    mo.mean = mean_of(x);
    mo.sd = x.size() > 1 ? std::sqrt(var_of(x, mo.mean)) : kNaN;
    return mo;
}

double mcse_mean(std::span<const std::span<const double>> chains) {
    std::vector<double> pooled;
    for (const auto& c : chains) pooled.insert(pooled.end(), c.begin(), c.end());
    const double e = ess(chains);
    return moments(pooled).sd / std::sqrt(e);
}

}  // namespace adrb
