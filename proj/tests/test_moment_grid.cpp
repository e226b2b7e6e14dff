#include <doctest.h>

#include <cmath>
#include <limits>

#include "granular/errors.hpp"
#include "granular/moment_grid.hpp"
#include "granular/rng.hpp"

using granular::DomainError;
using granular::InfeasibleError;
using granular::MissingMomentError;
namespace moments = granular::moments;
namespace rng = granular::rng;
using moments::MomentGrid;
using moments::MomentInterval;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Even moments of a Maxwellian at temperature theta (so m_1 = 3 theta):
// m_p = (2 theta)^p Gamma(p + 3/2) / Gamma(3/2), a log-convex sequence.
double maxwell_log_moment(double p, double theta) {
    return p * std::log(2.0 * theta) + std::lgamma(p + 1.5) -
           std::lgamma(1.5);
}

} // namespace

TEST_SUITE("moment_grid") {

TEST_CASE("interval constructors and accessors") {
    const auto e = MomentInterval::exact(2.0);
    CHECK(e.lo() == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(e.hi() == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(e.lo_log == e.hi_log);

    const auto b = MomentInterval::from_bounds(0.0, 3.0);
    CHECK(b.lo() == 0.0);
    CHECK(b.lo_log == -kInf);
    CHECK(b.hi() == doctest::Approx(3.0).epsilon(1e-15));

    const auto u = MomentInterval::unbounded();
    CHECK(u.lo() == 0.0);
    CHECK(u.hi() == kInf);

    CHECK_THROWS_AS(MomentInterval::exact(0.0), DomainError);
    CHECK_THROWS_AS(MomentInterval::exact(-1.0), DomainError);
    CHECK_THROWS_AS(MomentInterval::from_bounds(2.0, 1.0), DomainError);
    CHECK_THROWS_AS(MomentInterval::from_logs(std::nan(""), 0.0),
                    DomainError);
    CHECK_THROWS_AS(MomentInterval::from_logs(1.0, 0.0), InfeasibleError);
}

TEST_CASE("half-integer keys and storage") {
    CHECK(MomentGrid::key(0.0) == 0);
    CHECK(MomentGrid::key(0.5) == 1);
    CHECK(MomentGrid::key(1.5) == 3);
    CHECK(MomentGrid::key(20.0) == 40);
    CHECK_THROWS_AS(MomentGrid::key(0.3), DomainError);
    CHECK_THROWS_AS(MomentGrid::key(-0.5), DomainError);

    MomentGrid grid;
    CHECK_FALSE(grid.has(1.0));
    CHECK_THROWS_AS(grid.at(1.0), MissingMomentError);
    CHECK_THROWS_AS(grid.p_max(), MissingMomentError);

    grid.set(1.0, MomentInterval::exact(3.0));
    grid.set(2.5, MomentInterval::from_bounds(1.0, 4.0));
    CHECK(grid.has(1.0));
    CHECK(grid.at(1.0).hi() == doctest::Approx(3.0));
    CHECK(grid.p_max() == doctest::Approx(2.5));
    CHECK(grid.size() == 2);
    const auto ps = grid.indices();
    REQUIRE(ps.size() == 2);
    CHECK(ps[0] == doctest::Approx(1.0));
    CHECK(ps[1] == doctest::Approx(2.5));
    CHECK_FALSE(grid.one_sided);
}

TEST_CASE("narrowing keeps the tighter endpoint") {
    MomentGrid grid;
    grid.set(1.0, MomentInterval::from_bounds(1.0, 10.0));

    CHECK(grid.narrow_lo(1.0, std::log(2.0)));
    CHECK(grid.at(1.0).lo() == doctest::Approx(2.0));
    CHECK_FALSE(grid.narrow_lo(1.0, std::log(1.5)));
    CHECK(grid.at(1.0).lo() == doctest::Approx(2.0));

    CHECK(grid.narrow_hi(1.0, std::log(5.0)));
    CHECK(grid.at(1.0).hi() == doctest::Approx(5.0));
    CHECK_FALSE(grid.narrow_hi(1.0, std::log(7.0)));

    CHECK_THROWS_AS(grid.narrow_lo(2.0, 0.0), MissingMomentError);
    CHECK_THROWS_AS(grid.narrow_hi(2.0, 0.0), MissingMomentError);

    // A candidate crossing the opposite endpoint by more than rounding
    // slack is a real inconsistency.
    CHECK_THROWS_AS(grid.narrow_lo(1.0, std::log(6.0)), InfeasibleError);

    // Crossings within the slack collapse the interval instead.
    MomentGrid tiny;
    tiny.set(1.0, MomentInterval::from_bounds(1.0, 2.0));
    tiny.narrow_lo(1.0, std::log(2.0) + 1e-10);
    CHECK(tiny.at(1.0).lo_log == doctest::Approx(tiny.at(1.0).hi_log));
}

TEST_CASE("seed grid pins mass, energy, and the half moment") {
    moments::SeedMoments seed;
    seed.m1_lo = 2.0;
    seed.m1_hi = 3.0;
    const auto grid = moments::make_seed_grid(seed);

    CHECK(grid.at(0.0).lo() == doctest::Approx(1.0));
    CHECK(grid.at(0.0).hi() == doctest::Approx(1.0));
    CHECK(grid.at(1.0).lo() == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(grid.at(1.0).hi() == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(grid.at(0.5).hi() ==
          doctest::Approx(std::sqrt(3.0)).epsilon(1e-12));
    CHECK(grid.at(0.5).lo() ==
          doctest::Approx(1e-6 * std::sqrt(2.0)).epsilon(1e-12));

    moments::SeedMoments with_point = seed;
    with_point.p0 = 2.0;
    with_point.p0_value = MomentInterval::exact(12.0);
    const auto grid2 = moments::make_seed_grid(with_point);
    CHECK(grid2.has(2.0));
    CHECK(grid2.at(2.0).lo() == doctest::Approx(12.0));

    moments::SeedMoments bad = seed;
    bad.m1_lo = -1.0;
    CHECK_THROWS_AS(moments::make_seed_grid(bad), DomainError);
    bad = seed;
    bad.m_half_floor_factor = 0.0;
    CHECK_THROWS_AS(moments::make_seed_grid(bad), DomainError);
}

TEST_CASE("closure extrapolates lower bounds past the energy point") {
    MomentGrid grid;
    grid.set(0.0, MomentInterval::exact(1.0));
    grid.set(1.0, MomentInterval::exact(1.0));
    grid.set(2.0, MomentInterval::unbounded());
    moments::jensen_closure(grid);

    // Chord slopes of log m_p are nondecreasing, so m_2 >= m_1^2 / m_0 = 1.
    CHECK(grid.at(2.0).lo() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(grid.at(2.0).hi() == kInf);
}

TEST_CASE("closure interpolates upper bounds between stored points") {
    MomentGrid grid;
    grid.set(0.0, MomentInterval::exact(1.0));
    grid.set(1.0, MomentInterval::unbounded());
    grid.set(2.0, MomentInterval::exact(1.0));
    moments::jensen_closure(grid);

    // Interior points sit under the chord: m_1 <= sqrt(m_0 m_2) = 1.
    CHECK(grid.at(1.0).hi() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("closure rejects a log-concave triple") {
    MomentGrid grid;
    grid.set(0.0, MomentInterval::exact(1.0));
    grid.set(1.0, MomentInterval::exact(2.0));
    grid.set(2.0, MomentInterval::exact(1.0));
    CHECK_THROWS_AS(moments::jensen_closure(grid), InfeasibleError);
}

TEST_CASE("closure leaves a consistent Maxwellian table alone") {
    MomentGrid grid;
    for (int k = 0; k <= 12; ++k) {
        const double p = 0.5 * k;
        const double l = maxwell_log_moment(p, 1.0);
        grid.set(p, MomentInterval::from_logs(l, l));
    }
    const int sweeps = moments::jensen_closure(grid);
    CHECK(sweeps <= 2);
    for (int k = 0; k <= 12; ++k) {
        const double p = 0.5 * k;
        const double l = maxwell_log_moment(p, 1.0);
        CHECK(grid.at(p).lo_log == doctest::Approx(l).epsilon(1e-12));
        CHECK(grid.at(p).hi_log == doctest::Approx(l).epsilon(1e-12));
    }
}

TEST_CASE("closure narrows fuzzed intervals around a log-convex truth") {
    for (int trial = 0; trial < 50; ++trial) {
        const rng::Stream s(21, rng::Purpose::verify,
                            static_cast<std::uint64_t>(trial));
        const double theta = 0.25 + 4.0 * s.uniform(0);

        MomentGrid grid;
        grid.set(0.0, MomentInterval::exact(1.0));
        for (int k = 1; k <= 10; ++k) {
            const double p = 0.5 * k;
            const double l = maxwell_log_moment(p, theta);
            const double down = 0.05 + 1.5 * s.uniform(2 * k);
            const double up = 0.05 + 1.5 * s.uniform(2 * k + 1);
            grid.set(p, MomentInterval::from_logs(l - down, l + up));
        }
        moments::jensen_closure(grid);

        // Narrowing must never expel the exact sequence.
        for (int k = 0; k <= 10; ++k) {
            const double p = 0.5 * k;
            const double l = maxwell_log_moment(p, theta);
            CHECK(grid.at(p).lo_log <= l + 1e-9);
            CHECK(grid.at(p).hi_log >= l - 1e-9);
        }
    }
}

TEST_CASE("closure requires the mass anchor and a positive sweep budget") {
    MomentGrid grid;
    grid.set(1.0, MomentInterval::exact(1.0));
    CHECK_THROWS_AS(moments::jensen_closure(grid), MissingMomentError);
    grid.set(0.0, MomentInterval::exact(1.0));
    CHECK_THROWS_AS(moments::jensen_closure(grid, 0), DomainError);
}

} // TEST_SUITE
