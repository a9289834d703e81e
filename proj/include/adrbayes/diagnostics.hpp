#pragma once

#include <span>
#include <vector>

namespace adrb {

/// Split R-hat over >= 2 chains of >= 2 draws (chains of unequal length are
/// truncated to the shortest). Each chain is cut into halves, giving m segments
/// of n draws; W is the mean within-segment variance and B/n the variance of
/// segment means. Returns sqrt((W + B/n) / W), which is >= 1 and equals 1 exactly
/// when all segment means coincide. NaN when W == 0.
/// Throws std::invalid_argument for fewer than two chains.
double rhat(std::span<const std::span<const double>> chains);

/// Effective sample size pooled over chains: autocorrelations combined across
/// chains and truncated with Geyer's initial monotone positive sequence.
/// NaN for constant draws.
double ess(std::span<const std::span<const double>> chains);

/// Sample quantile with linear interpolation between order statistics
/// (h = (n - 1) p, the "type 7" rule). `sorted` must be ascending.
double quantile_sorted(std::span<const double> sorted, double p);

struct Moments {
    double mean = 0.0;
    double sd = 0.0;  // n - 1 denominator
};
Moments moments(std::span<const double> x);

/// Monte-Carlo standard error of the pooled mean, sd / sqrt(ess).
double mcse_mean(std::span<const std::span<const double>> chains);

}  // namespace adrb
