#pragma once

#include <cstdint>
#include <string>
#include <vector>

// Stretched-exponential fits log f(|v|) = log C - r |v|^s on a window of a
// speed histogram. The window defaults to the 95th-to-99.9th percentile band,
// deep enough to escape the thermal bulk but still populated by many samples.

namespace granular::tailfit {

// Accumulated speed histogram. `counts` are weighted totals over all
// snapshots; `block_counts` splits the same totals into consecutive time
// blocks so fits can be bootstrapped against slow fluctuations.
struct SpeedHistogram {
    std::vector<double> edges;
    std::vector<double> counts;
    std::vector<std::vector<double>> block_counts;
    double overflow = 0.0;
    double samples = 0.0;

    std::size_t bins() const { return counts.size(); }
    double width(std::size_t i) const { return edges[i + 1] - edges[i]; }
    double center(std::size_t i) const { return 0.5 * (edges[i] + edges[i + 1]); }

    // log of the three-dimensional velocity density reconstructed from the
    // speed counts (divides out the 4 pi v^2 shell factor)
    double log_density3(std::size_t i) const;

    // speed below which fraction q of the recorded samples lies, by linear
    // interpolation inside bins
    double percentile(double q) const;
};

struct FitOptions {
    double percentile_lo = 95.0;
    double percentile_hi = 99.9;
    double s_min = 0.5;
    double s_max = 2.5;
    double min_bin_count = 5.0;
    int min_bins = 10;
    int bootstrap = 200;
    std::uint64_t seed = 1;
};

struct TailFit {
    double s = 0.0;
    double r = 0.0;
    double log_c = 0.0;
    double s_lo = 0.0, s_hi = 0.0;
    double r_lo = 0.0, r_hi = 0.0;
    double v_lo = 0.0, v_hi = 0.0;
    int bins_used = 0;
    double residual = 0.0;
    bool ok = false;
    std::string message;
};

TailFit fit_tail(const SpeedHistogram &hist, const FitOptions &opts = {});

} // namespace granular::tailfit
