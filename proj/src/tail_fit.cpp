#include "granular/tail_fit.hpp"

#include "granular/errors.hpp"
#include "granular/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace granular::tailfit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct WindowPoint {
    double v;
    double y;
    double w;
};

struct LineFit {
    double intercept = 0.0;
    double slope = 0.0;
    double wssr = kInf;
    bool ok = false;
};

LineFit weighted_line(const std::vector<WindowPoint> &pts, double s) {
    LineFit f;
    double sw = 0.0, sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (const WindowPoint &p : pts) {
        const double x = std::pow(p.v, s);
        sw += p.w;
        sx += p.w * x;
        sy += p.w * p.y;
        sxx += p.w * x * x;
        sxy += p.w * x * p.y;
    }
    const double det = sw * sxx - sx * sx;
    if (det <= 0.0) {
        return f;
    }
    f.slope = (sw * sxy - sx * sy) / det;
    f.intercept = (sy - f.slope * sx) / sw;
    f.wssr = 0.0;
    for (const WindowPoint &p : pts) {
        const double x = std::pow(p.v, s);
        const double e = p.y - (f.intercept + f.slope * x);
        f.wssr += p.w * e * e;
    }
    f.ok = true;
    return f;
}

struct ScanResult {
    double s = 0.0;
    LineFit line;
};

ScanResult scan_s(const std::vector<WindowPoint> &pts, double s_min,
                  double s_max) {
    ScanResult best;
    const double coarse = 0.01;
    const int steps = static_cast<int>(std::round((s_max - s_min) / coarse));
    for (int i = 0; i <= steps; ++i) {
        const double s = s_min + i * coarse;
        const LineFit f = weighted_line(pts, s);
        if (f.ok && f.wssr < best.line.wssr) {
            best.s = s;
            best.line = f;
        }
    }
    if (!best.line.ok) {
        return best;
    }
    double lo = std::max(s_min, best.s - coarse);
    double hi = std::min(s_max, best.s + coarse);
    for (int it = 0; it < 48; ++it) {
        const double m1 = lo + (hi - lo) / 3.0;
        const double m2 = hi - (hi - lo) / 3.0;
        if (weighted_line(pts, m1).wssr <= weighted_line(pts, m2).wssr) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    const double s = 0.5 * (lo + hi);
    const LineFit f = weighted_line(pts, s);
    if (f.ok && f.wssr <= best.line.wssr) {
        best.s = s;
        best.line = f;
    }
    return best;
}

// Collects the fit window of one histogram realization: bins fully inside
// the percentile band with enough counts for a stable log.
std::vector<WindowPoint> window_points(const SpeedHistogram &h,
                                       const std::vector<double> &counts,
                                       double samples, double v_lo,
                                       double v_hi, double min_count) {
    std::vector<WindowPoint> pts;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (h.edges[i] < v_lo || h.edges[i + 1] > v_hi ||
            counts[i] < min_count) {
            continue;
        }
        const double vc = h.center(i);
        const double dens =
            counts[i] / (samples * h.width(i) * 4.0 * std::numbers::pi * vc * vc);
        pts.push_back({vc, std::log(dens), counts[i]});
    }
    return pts;
}

double percentile_of(const std::vector<double> &counts,
                     const std::vector<double> &edges, double total,
                     double q) {
    const double target = total * q / 100.0;
    double cum = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (cum + counts[i] >= target) {
            const double frac =
                counts[i] > 0.0 ? (target - cum) / counts[i] : 0.0;
            return edges[i] + frac * (edges[i + 1] - edges[i]);
        }
        cum += counts[i];
    }
    return edges.back();
}

double quantile(std::vector<double> xs, double q) {
    std::sort(xs.begin(), xs.end());
    const auto idx = static_cast<std::size_t>(
        std::llround(q * (static_cast<double>(xs.size()) - 1.0)));
    return xs[std::min(idx, xs.size() - 1)];
}

} // namespace

double SpeedHistogram::log_density3(std::size_t i) const {
    const double vc = center(i);
    return std::log(counts[i] / (samples * width(i) * 4.0 *
                                 std::numbers::pi * vc * vc));
}

double SpeedHistogram::percentile(double q) const {
    if (!(q > 0.0) || !(q < 100.0)) {
        throw DomainError("percentile must lie in (0, 100)");
    }
    return percentile_of(counts, edges, samples, q);
}

TailFit fit_tail(const SpeedHistogram &hist, const FitOptions &opts) {
    if (hist.bins() == 0 || hist.edges.size() != hist.bins() + 1) {
        throw DomainError("histogram is empty or malformed");
    }
    if (!(opts.percentile_lo > 0.0) ||
        !(opts.percentile_hi > opts.percentile_lo) ||
        !(opts.percentile_hi < 100.0) || !(opts.s_min > 0.0) ||
        !(opts.s_max > opts.s_min)) {
        throw DomainError("tail-fit options out of range");
    }

    TailFit fit;
    fit.v_lo = hist.percentile(opts.percentile_lo);
    fit.v_hi = hist.percentile(opts.percentile_hi);
    const std::vector<WindowPoint> pts =
        window_points(hist, hist.counts, hist.samples, fit.v_lo, fit.v_hi,
                      opts.min_bin_count);
    fit.bins_used = static_cast<int>(pts.size());
    if (fit.bins_used < opts.min_bins) {
        fit.message = "insufficient tail statistics: fewer than the required "
                      "number of populated bins in the fit window";
        return fit;
    }

    const ScanResult best = scan_s(pts, opts.s_min, opts.s_max);
    if (!best.line.ok) {
        fit.message = "degenerate fit window";
        return fit;
    }
    fit.s = best.s;
    fit.r = -best.line.slope;
    fit.log_c = best.line.intercept;
    double sw = 0.0;
    for (const WindowPoint &p : pts) {
        sw += p.w;
    }
    fit.residual = std::sqrt(best.line.wssr / sw);
    if (!(fit.r > 0.0)) {
        fit.message = "no decay across the fit window";
        return fit;
    }
    fit.ok = true;
    fit.s_lo = fit.s_hi = fit.s;
    fit.r_lo = fit.r_hi = fit.r;

    const std::size_t nb = hist.block_counts.size();
    if (opts.bootstrap > 0 && nb >= 4) {
        const double overflow_scale =
            hist.samples > 0.0 ? hist.overflow / hist.samples : 0.0;
        std::vector<double> ss, rs;
        std::vector<double> counts(hist.bins());
        for (int rep = 0; rep < opts.bootstrap; ++rep) {
            const rng::Stream st(opts.seed, rng::Purpose::bootstrap,
                                 static_cast<std::uint64_t>(rep));
            std::fill(counts.begin(), counts.end(), 0.0);
            for (std::size_t b = 0; b < nb; ++b) {
                auto pick = static_cast<std::size_t>(st.uniform(b) * nb);
                pick = std::min(pick, nb - 1);
                for (std::size_t i = 0; i < counts.size(); ++i) {
                    counts[i] += hist.block_counts[pick][i];
                }
            }
            double total = 0.0;
            for (double c : counts) {
                total += c;
            }
            total /= std::max(1.0 - overflow_scale, 0.5);
            const double v_lo =
                percentile_of(counts, hist.edges, total, opts.percentile_lo);
            const double v_hi =
                percentile_of(counts, hist.edges, total, opts.percentile_hi);
            const std::vector<WindowPoint> rpts = window_points(
                hist, counts, total, v_lo, v_hi, opts.min_bin_count);
            if (static_cast<int>(rpts.size()) < opts.min_bins) {
                continue;
            }
            const ScanResult r = scan_s(rpts, opts.s_min, opts.s_max);
            if (r.line.ok && -r.line.slope > 0.0) {
                ss.push_back(r.s);
                rs.push_back(-r.line.slope);
            }
        }
        if (ss.size() >= 20) {
            fit.s_lo = quantile(ss, 0.025);
            fit.s_hi = quantile(ss, 0.975);
            fit.r_lo = quantile(rs, 0.025);
            fit.r_hi = quantile(rs, 0.975);
        }
    }
    return fit;
}

} // namespace granular::tailfit
