#include <doctest.h>

#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include "granular/errors.hpp"
#include "granular/tail_fit.hpp"

using granular::DomainError;
namespace tailfit = granular::tailfit;
using tailfit::FitOptions;
using tailfit::SpeedHistogram;

namespace {

// Histogram of a known 3d velocity density: counts are the exact expected
// bin contents, split into equal (or caller-perturbed) time blocks.
SpeedHistogram make_hist(int bins, double v_max,
                         const std::function<double(double)> &density3,
                         int blocks = 20) {
    SpeedHistogram h;
    h.edges.resize(bins + 1);
    for (int i = 0; i <= bins; ++i) {
        h.edges[i] = v_max * i / bins;
    }
    h.counts.resize(bins);
    const double scale = 1e10;
    for (int i = 0; i < bins; ++i) {
        const double vc = h.center(i);
        h.counts[i] = scale * h.width(i) * 4.0 * std::numbers::pi * vc * vc *
                      density3(vc);
        h.samples += h.counts[i];
    }
    h.block_counts.assign(blocks, std::vector<double>(bins));
    for (int b = 0; b < blocks; ++b) {
        for (int i = 0; i < bins; ++i) {
            h.block_counts[b][i] = h.counts[i] / blocks;
        }
    }
    return h;
}

double maxwell_density3(double v) {
    return std::pow(2.0 * std::numbers::pi, -1.5) * std::exp(-0.5 * v * v);
}

} // namespace

TEST_SUITE("tail_fit") {

TEST_CASE("histogram percentiles follow the chi distribution") {
    const auto h = make_hist(1024, 8.0, maxwell_density3);
    // Median speed of a unit Maxwellian: sqrt of the chi-square(3) median.
    CHECK(h.percentile(50.0) == doctest::Approx(1.5381).epsilon(0.005));
    CHECK(h.percentile(95.0) == doctest::Approx(2.7955).epsilon(0.005));
    CHECK_THROWS_AS(h.percentile(0.0), DomainError);
    CHECK_THROWS_AS(h.percentile(100.0), DomainError);
}

TEST_CASE("fit recovers the Maxwellian order and rate") {
    const auto h = make_hist(1024, 8.0, maxwell_density3);
    const auto fit = tailfit::fit_tail(h);
    REQUIRE(fit.ok);
    CHECK(fit.s == doctest::Approx(2.0).epsilon(0.005));
    CHECK(fit.r == doctest::Approx(0.5).epsilon(0.01));
    CHECK(fit.log_c ==
          doctest::Approx(-1.5 * std::log(2.0 * std::numbers::pi))
              .epsilon(0.02));
    CHECK(fit.bins_used > 100);
    CHECK(fit.v_lo == doctest::Approx(2.7955).epsilon(0.01));
    CHECK(fit.residual < 1e-3);
    // Identical blocks leave the bootstrap nothing to spread over.
    CHECK(fit.s_hi - fit.s_lo < 1e-6);
    CHECK(fit.r_hi - fit.r_lo < 1e-6);
}

TEST_CASE("fit recovers a stretched-exponential tail") {
    const auto h = make_hist(1024, 6.0, [](double v) {
        return std::exp(-2.0 * std::pow(v, 1.5));
    });
    const auto fit = tailfit::fit_tail(h);
    REQUIRE(fit.ok);
    CHECK(fit.s == doctest::Approx(1.5).epsilon(0.01));
    CHECK(fit.r == doctest::Approx(2.0).epsilon(0.02));
}

TEST_CASE("windows without decay are rejected") {
    const auto h = make_hist(1024, 8.0, [](double) { return 1.0; });
    const auto fit = tailfit::fit_tail(h);
    CHECK_FALSE(fit.ok);
    CHECK(fit.message.find("no decay") != std::string::npos);
}

TEST_CASE("coarse histograms report insufficient statistics") {
    const auto h = make_hist(16, 8.0, maxwell_density3);
    const auto fit = tailfit::fit_tail(h);
    CHECK_FALSE(fit.ok);
    CHECK(fit.message.find("insufficient") != std::string::npos);
}

TEST_CASE("bootstrap intervals bracket the point fit") {
    // Blocks at slightly different temperatures mimic slow thermal drift.
    auto h = make_hist(1024, 8.0, maxwell_density3, 20);
    for (int b = 0; b < 20; ++b) {
        const double temp = 1.0 + 0.02 * (b - 9.5) / 9.5;
        for (int i = 0; i < 1024; ++i) {
            const double vc = h.center(static_cast<std::size_t>(i));
            h.block_counts[b][i] =
                (h.samples / 20.0) * h.width(static_cast<std::size_t>(i)) *
                4.0 * std::numbers::pi * vc * vc *
                std::pow(2.0 * std::numbers::pi * temp, -1.5) *
                std::exp(-0.5 * vc * vc / temp);
        }
    }
    // Rebuild the totals from the perturbed blocks.
    std::fill(h.counts.begin(), h.counts.end(), 0.0);
    h.samples = 0.0;
    for (int b = 0; b < 20; ++b) {
        for (int i = 0; i < 1024; ++i) {
            h.counts[i] += h.block_counts[b][i];
            h.samples += h.block_counts[b][i];
        }
    }
    const auto fit = tailfit::fit_tail(h);
    REQUIRE(fit.ok);
    CHECK(fit.s_lo <= fit.s);
    CHECK(fit.s <= fit.s_hi);
    CHECK(fit.r_lo <= fit.r);
    CHECK(fit.r <= fit.r_hi);
    CHECK(fit.s_hi - fit.s_lo > 0.0);
    CHECK(fit.s == doctest::Approx(2.0).epsilon(0.02));
}

TEST_CASE("fit options and histograms are validated") {
    const auto h = make_hist(256, 8.0, maxwell_density3);
    FitOptions bad;
    bad.percentile_lo = 99.0;
    bad.percentile_hi = 95.0;
    CHECK_THROWS_AS(tailfit::fit_tail(h, bad), DomainError);
    bad = FitOptions{};
    bad.s_min = -1.0;
    CHECK_THROWS_AS(tailfit::fit_tail(h, bad), DomainError);
    bad = FitOptions{};
    bad.percentile_hi = 100.0;
    CHECK_THROWS_AS(tailfit::fit_tail(h, bad), DomainError);

    SpeedHistogram empty;
    CHECK_THROWS_AS(tailfit::fit_tail(empty), DomainError);

    SpeedHistogram malformed = h;
    malformed.edges.pop_back();
    CHECK_THROWS_AS(tailfit::fit_tail(malformed), DomainError);
}

} // TEST_SUITE
