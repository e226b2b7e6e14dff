#include "granular/dsmc.hpp"

#include "granular/errors.hpp"
#include "granular/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <thread>

namespace granular::dsmc {

namespace {

Vec3 unit_vector(double u1, double u2) {
    const double z = 2.0 * u1 - 1.0;
    const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = 2.0 * std::numbers::pi * u2;
    return {rho * std::cos(phi), rho * std::sin(phi), z};
}

// Splits [0, n) into at most `threads` contiguous chunks and runs
// body(begin, end, chunk). Chunk layout depends only on (n, threads), so a
// run is reproducible for a fixed thread count.
template <class Body>
void parallel_for(std::size_t n, int threads, Body &&body) {
    const int t = std::clamp(threads, 1, 64);
    if (t == 1 || n < 4096) {
        body(std::size_t{0}, n, 0);
        return;
    }
    const std::size_t chunk = (n + t - 1) / t;
    std::vector<std::thread> pool;
    pool.reserve(t);
    for (int c = 0; c < t; ++c) {
        const std::size_t b = c * chunk;
        const std::size_t e = std::min(n, b + chunk);
        if (b >= e) {
            break;
        }
        pool.emplace_back([&body, b, e, c] { body(b, e, c); });
    }
    for (auto &th : pool) {
        th.join();
    }
}

int chunk_count(std::size_t n, int threads) {
    const int t = std::clamp(threads, 1, 64);
    if (t == 1 || n < 4096) {
        return 1;
    }
    const std::size_t chunk = (n + t - 1) / t;
    return static_cast<int>((n + chunk - 1) / chunk);
}

// Applies a per-particle velocity map, re-centers the mean, and returns the
// m1 change of map plus re-centering combined.
template <class Map>
double apply_map_and_recenter(ParticleEnsemble &ens, int threads,
                              double *removed_mean, Map &&map) {
    const std::size_t n = ens.v.size();
    struct Acc {
        double before = 0.0;
        double after = 0.0;
        Vec3 sum{};
    };
    std::vector<Acc> acc(chunk_count(n, threads));
    parallel_for(n, threads, [&](std::size_t b, std::size_t e, int c) {
        Acc a;
        for (std::size_t i = b; i < e; ++i) {
            a.before += norm2(ens.v[i]);
            ens.v[i] = map(i, ens.v[i]);
            a.after += norm2(ens.v[i]);
            a.sum += ens.v[i];
        }
        acc[c] = a;
    });
    double before = 0.0, after = 0.0;
    Vec3 mean{};
    for (const Acc &a : acc) {
        before += a.before;
        after += a.after;
        mean += a.sum;
    }
    mean = mean * (1.0 / static_cast<double>(n));
    parallel_for(n, threads, [&](std::size_t b, std::size_t e, int) {
        for (std::size_t i = b; i < e; ++i) {
            ens.v[i] -= mean;
        }
    });
    if (removed_mean != nullptr) {
        *removed_mean = norm(mean);
    }
    return (after - before) / static_cast<double>(n) - norm2(mean);
}

struct BlockAccum {
    std::vector<double> powers;
    std::vector<double> hist;
    double overflow = 0.0;
    double snapshots = 0.0;
    double e_force = 0.0;
    double e_coll = 0.0;
};

double jackknife_se(const std::vector<double> &block_means) {
    const std::size_t b = block_means.size();
    if (b < 2) {
        return 0.0;
    }
    double mean = 0.0;
    for (double x : block_means) {
        mean += x;
    }
    mean /= b;
    double ss = 0.0;
    for (double x : block_means) {
        ss += (x - mean) * (x - mean);
    }
    return std::sqrt(ss / (b * (b - 1.0)));
}

} // namespace

void CollisionTally::operator+=(const CollisionTally &o) {
    candidates += o.candidates;
    accepted += o.accepted;
    overflow += o.overflow;
    sum_candidate_u += o.sum_candidate_u;
    energy_change += o.energy_change;
}

void collide_pair(Vec3 &v, Vec3 &w, const Vec3 &sigma, double beta) {
    const Vec3 u = v - w;
    const Vec3 dv = (0.5 * beta) * (norm(u) * sigma - u);
    v += dv;
    w -= dv;
}

ParticleEnsemble init_ensemble(std::size_t n, double temperature,
                               std::uint64_t seed) {
    if (n < 2) {
        throw DomainError("ensemble needs at least 2 particles");
    }
    if (!(temperature >= 0.0)) {
        throw DomainError("temperature must be nonnegative");
    }
    ParticleEnsemble ens;
    ens.seed = seed;
    ens.v.resize(n);
    const rng::Stream st(seed, rng::Purpose::init, 0);
    const double scale = std::sqrt(temperature);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint64_t c = 4 * static_cast<std::uint64_t>(i);
        const auto [n1, n2] =
            rng::normal_pair(st.uniform_pos(c), st.uniform(c + 1));
        const auto [n3, n4] =
            rng::normal_pair(st.uniform_pos(c + 2), st.uniform(c + 3));
        (void)n4;
        ens.v[i] = {scale * n1, scale * n2, scale * n3};
    }
    recenter(ens);
    return ens;
}

double recenter(ParticleEnsemble &ens) {
    Vec3 mean{};
    for (const Vec3 &v : ens.v) {
        mean += v;
    }
    mean = mean * (1.0 / static_cast<double>(ens.v.size()));
    for (Vec3 &v : ens.v) {
        v -= mean;
    }
    return norm(mean);
}

double max_speed(const ParticleEnsemble &ens) {
    double m2 = 0.0;
    for (const Vec3 &v : ens.v) {
        m2 = std::max(m2, norm2(v));
    }
    return std::sqrt(m2);
}

double mean_square_speed(const ParticleEnsemble &ens) {
    double s = 0.0;
    for (const Vec3 &v : ens.v) {
        s += norm2(v);
    }
    return s / static_cast<double>(ens.v.size());
}

CollisionTally collision_step(ParticleEnsemble &ens,
                              const RestitutionParams &params,
                              double dt, double &u_max, double &carry) {
    if (!(dt > 0.0)) {
        throw DomainError("collision step needs dt > 0");
    }
    if (!(u_max >= 0.0) || !std::isfinite(u_max)) {
        throw DomainError("majorant must be a finite nonnegative speed");
    }
    const std::size_t n = ens.v.size();
    const double beta = params.beta();
    const double weight = ens.weight();
    const rng::Stream st(ens.seed, rng::Purpose::collision, ens.step);
    ++ens.step;

    CollisionTally tally;
    const double expected =
        0.5 * static_cast<double>(n) * dt * u_max + carry;
    const auto n_cand = static_cast<std::uint64_t>(std::floor(expected));
    carry = expected - static_cast<double>(n_cand);

    for (std::uint64_t c = 0; c < n_cand; ++c) {
        const std::uint64_t base = 5 * c;
        auto i = static_cast<std::size_t>(st.uniform(base) * n);
        i = std::min(i, n - 1);
        auto j = static_cast<std::size_t>(st.uniform(base + 1) * (n - 1));
        j = std::min(j, n - 2);
        if (j >= i) {
            ++j;
        }
        const Vec3 u = ens.v[i] - ens.v[j];
        const double speed = norm(u);
        ++tally.candidates;
        tally.sum_candidate_u += speed;
        if (st.uniform(base + 2) * u_max >= speed) {
            continue;
        }
        const Vec3 sigma = unit_vector(st.uniform(base + 3),
                                       st.uniform(base + 4));
        if (speed > u_max) {
            ++tally.overflow;
            u_max = std::max(u_max, 1.5 * speed);
        }
        const double e_before = norm2(ens.v[i]) + norm2(ens.v[j]);
        collide_pair(ens.v[i], ens.v[j], sigma, beta);
        tally.energy_change +=
            weight * (norm2(ens.v[i]) + norm2(ens.v[j]) - e_before);
        ++tally.accepted;
    }
    return tally;
}

double forcing_step(ParticleEnsemble &ens, bounds::ForcingModel model,
                    const bounds::ForcingParams &params, double dt,
                    int threads, double *removed_mean) {
    if (!(dt > 0.0)) {
        throw DomainError("forcing step needs dt > 0");
    }
    params.validate(model);
    const rng::Stream st(ens.seed, rng::Purpose::forcing, ens.step);
    ++ens.step;

    auto normal3 = [&st](std::size_t i) {
        const std::uint64_t c = 4 * static_cast<std::uint64_t>(i);
        const auto [n1, n2] =
            rng::normal_pair(st.uniform_pos(c), st.uniform(c + 1));
        const auto [n3, n4] =
            rng::normal_pair(st.uniform_pos(c + 2), st.uniform(c + 3));
        (void)n4;
        return Vec3{n1, n2, n3};
    };

    switch (model) {
    case bounds::ForcingModel::PureDiffusion: {
        const double kick = std::sqrt(2.0 * params.mu * dt);
        return apply_map_and_recenter(ens, threads, removed_mean,
                                      [&](std::size_t i, Vec3 v) {
                                          return v + kick * normal3(i);
                                      });
    }
    case bounds::ForcingModel::DiffusionFriction: {
        const double decay = std::exp(-params.lambda * dt);
        const double kick = std::sqrt(
            params.mu / params.lambda * -std::expm1(-2.0 * params.lambda * dt));
        return apply_map_and_recenter(ens, threads, removed_mean,
                                      [&](std::size_t i, Vec3 v) {
                                          return decay * v + kick * normal3(i);
                                      });
    }
    case bounds::ForcingModel::NegativeFriction: {
        const double grow = std::exp(params.kappa * dt);
        return apply_map_and_recenter(
            ens, threads, removed_mean,
            [grow](std::size_t, Vec3 v) { return grow * v; });
    }
    case bounds::ForcingModel::ShearFlow: {
        const double shear = params.kappa * dt;
        return apply_map_and_recenter(ens, threads, removed_mean,
                                      [shear](std::size_t, Vec3 v) {
                                          v.y += shear * v.x;
                                          return v;
                                      });
    }
    }
    throw DomainError("unknown forcing model");
}

double p_max_reliable(std::size_t n) {
    return 0.5 * std::log(static_cast<double>(n));
}

std::vector<MomentRow> empirical_moments(const ParticleEnsemble &ens,
                                         const std::vector<double> &p_list) {
    const std::size_t n = ens.v.size();
    const double ceiling = p_max_reliable(n);
    std::vector<MomentRow> rows;
    rows.reserve(p_list.size());
    for (double p : p_list) {
        if (!std::isfinite(p) || p < 0.0) {
            throw DomainError("moment order must be finite and nonnegative");
        }
        double sum = 0.0, sum_sq = 0.0;
        for (const Vec3 &v : ens.v) {
            const double x = std::pow(norm2(v), p);
            sum += x;
            sum_sq += x * x;
        }
        const double mean = sum / n;
        const double var = std::max(0.0, sum_sq / n - mean * mean);
        MomentRow row;
        row.p = p;
        row.value = mean;
        row.std_error = std::sqrt(var / (n - 1.0));
        row.reliable = p <= ceiling &&
                       (mean == 0.0 || row.std_error <= 0.2 * mean);
        rows.push_back(row);
    }
    return rows;
}

SteadyStateReport run_to_steady(ParticleEnsemble &ens,
                                bounds::ForcingModel model,
                                const RestitutionParams &rest,
                                const bounds::ForcingParams &fparams,
                                const RunOptions &opts) {
    fparams.validate(model);
    if (!(opts.dt > 0.0) || !(opts.t_avg > 0.0) || opts.t_burn < 0.0) {
        throw DomainError("run needs dt > 0, t_avg > 0, t_burn >= 0");
    }
    const double fastest = std::max(
        model == bounds::ForcingModel::DiffusionFriction ? fparams.lambda : 0.0,
        model == bounds::ForcingModel::NegativeFriction ||
                model == bounds::ForcingModel::ShearFlow
            ? fparams.kappa
            : 0.0);
    if (opts.dt * fastest > 0.1 + 1e-12) {
        throw DomainError("dt too coarse for the forcing rate: need "
                          "dt * max(lambda, kappa) <= 0.1");
    }
    if (opts.blocks < 4 || opts.sample_every < 1 || opts.bins < 16 ||
        opts.p_max < 1.0) {
        throw DomainError("run options out of range: need blocks >= 4, "
                          "sample_every >= 1, bins >= 16, p_max >= 1");
    }
    const std::size_t n = ens.v.size();
    const double half = 0.5 * opts.dt;

    double u_max = std::max(3.0 * max_speed(ens), 1e-12);
    double carry = 0.0;
    double recenter_max = 0.0;
    double removed = 0.0;

    const auto steps_burn =
        static_cast<std::int64_t>(std::llround(opts.t_burn / opts.dt));
    const auto steps_per_block = std::max<std::int64_t>(
        1, std::llround(opts.t_avg / opts.dt) / opts.blocks);
    if (steps_per_block < opts.sample_every) {
        throw DomainError("t_avg too short: every block must contain at "
                          "least one snapshot");
    }
    const std::int64_t steps_avg = steps_per_block * opts.blocks;
    const double t_block = static_cast<double>(steps_per_block) * opts.dt;

    for (std::int64_t s = 0; s < steps_burn; ++s) {
        if (s % opts.majorant_refresh == 0) {
            u_max = std::max(3.0 * max_speed(ens), 1e-12);
        }
        forcing_step(ens, model, fparams, half, opts.threads, &removed);
        recenter_max = std::max(recenter_max, removed);
        collision_step(ens, rest, opts.dt, u_max, carry);
        forcing_step(ens, model, fparams, half, opts.threads, &removed);
        recenter_max = std::max(recenter_max, removed);
        ens.time += opts.dt;
    }

    const int n_pow = static_cast<int>(std::llround(2.0 * opts.p_max)) + 1;
    const double v_cap = std::max(3.0 * max_speed(ens), 1e-12);
    const double bin_w = v_cap / opts.bins;

    std::vector<BlockAccum> blocks(opts.blocks);
    for (BlockAccum &b : blocks) {
        b.powers.assign(n_pow, 0.0);
        b.hist.assign(opts.bins, 0.0);
    }

    CollisionTally totals;
    for (std::int64_t s = 0; s < steps_avg; ++s) {
        BlockAccum &blk = blocks[std::min<std::int64_t>(
            s / steps_per_block, opts.blocks - 1)];
        if (s % opts.majorant_refresh == 0) {
            u_max = std::max(3.0 * max_speed(ens), 1e-12);
        }
        blk.e_force += forcing_step(ens, model, fparams, half, opts.threads,
                                    &removed);
        recenter_max = std::max(recenter_max, removed);
        const CollisionTally tal =
            collision_step(ens, rest, opts.dt, u_max, carry);
        blk.e_coll += tal.energy_change;
        totals += tal;
        blk.e_force += forcing_step(ens, model, fparams, half, opts.threads,
                                    &removed);
        recenter_max = std::max(recenter_max, removed);
        ens.time += opts.dt;

        if (s % opts.sample_every == 0) {
            blk.snapshots += 1.0;
            for (const Vec3 &v : ens.v) {
                const double q = norm2(v);
                const double sp = std::sqrt(q);
                double pw = 1.0;
                for (int k = 0; k < n_pow; ++k) {
                    blk.powers[k] += pw;
                    pw *= sp;
                }
                const auto bin = static_cast<std::int64_t>(sp / bin_w);
                if (bin < opts.bins) {
                    blk.hist[bin] += 1.0;
                } else {
                    blk.overflow += 1.0;
                }
            }
        }
    }

    SteadyStateReport rep;
    rep.model = bounds::to_string(model);
    rep.e = rest.e;
    rep.mu = fparams.mu;
    rep.lambda = fparams.lambda;
    rep.kappa = fparams.kappa;
    rep.n = n;
    rep.seed = ens.seed;
    rep.dt = opts.dt;
    rep.t_burn = opts.t_burn;
    rep.t_avg = static_cast<double>(steps_avg) * opts.dt;
    rep.threads = opts.threads;
    rep.time_end = ens.time;
    rep.reliability_ceiling = p_max_reliable(n);
    rep.recenter_max = recenter_max;

    double total_snapshots = 0.0;
    for (const BlockAccum &b : blocks) {
        total_snapshots += b.snapshots;
    }
    for (int k = 0; k < n_pow; ++k) {
        double sum = 0.0;
        std::vector<double> block_means;
        block_means.reserve(blocks.size());
        for (const BlockAccum &b : blocks) {
            sum += b.powers[k];
            block_means.push_back(b.powers[k] / (b.snapshots * n));
        }
        MomentRow row;
        row.p = 0.5 * k;
        row.value = sum / (total_snapshots * n);
        row.std_error = jackknife_se(block_means);
        row.reliable = row.p <= rep.reliability_ceiling &&
                       (row.value == 0.0 ||
                        row.std_error <= 0.2 * row.value);
        rep.moments.push_back(row);
    }

    rep.histogram.edges.resize(opts.bins + 1);
    for (int i = 0; i <= opts.bins; ++i) {
        rep.histogram.edges[i] = bin_w * i;
    }
    rep.histogram.counts.assign(opts.bins, 0.0);
    for (const BlockAccum &b : blocks) {
        rep.histogram.block_counts.push_back(b.hist);
        for (int i = 0; i < opts.bins; ++i) {
            rep.histogram.counts[i] += b.hist[i];
        }
        rep.histogram.overflow += b.overflow;
        rep.histogram.samples += b.snapshots * static_cast<double>(n);
    }
    rep.tail = tailfit::fit_tail(rep.histogram, opts.fit);

    {
        moments::MomentGrid grid;
        for (const MomentRow &row : rep.moments) {
            if (row.value > 0.0) {
                grid.set(row.p, moments::MomentInterval::exact(row.value));
            }
        }
        try {
            rep.moment_scan = moments::estimate_tail_order(grid);
        } catch (const DomainError &) {
            rep.moment_scan.reset();
        }
    }

    std::vector<double> resid_rates;
    double e_force_total = 0.0, e_coll_total = 0.0;
    for (const BlockAccum &b : blocks) {
        e_force_total += b.e_force;
        e_coll_total += b.e_coll;
        resid_rates.push_back((b.e_force + b.e_coll) / t_block);
    }
    rep.energy.forcing_power = e_force_total / rep.t_avg;
    rep.energy.collision_power = e_coll_total / rep.t_avg;
    rep.energy.residual = rep.energy.forcing_power +
                          rep.energy.collision_power;
    rep.energy.residual_sigma = jackknife_se(resid_rates);
    rep.energy.balanced =
        std::abs(rep.energy.residual) <= 3.0 * rep.energy.residual_sigma;

    {
        // Drift test on block-mean differences. Forcing noise integrates
        // into a random walk in m1 when dissipation is weak, and a least
        // squares line through such a walk understates its own error badly;
        // differences of a random walk are independent again, a genuine
        // trend survives as their nonzero mean, and for well-mixed blocks
        // the difference variance only overcounts, which is conservative.
        std::vector<double> ys;
        for (const BlockAccum &b : blocks) {
            ys.push_back(b.powers[2] / (b.snapshots * n));
        }
        const std::size_t nb = ys.size();
        double my = 0.0;
        for (double y : ys) {
            my += y;
        }
        my /= static_cast<double>(nb);
        const std::size_t nd = nb - 1;
        double md = 0.0;
        for (std::size_t i = 0; i < nd; ++i) {
            md += ys[i + 1] - ys[i];
        }
        md /= static_cast<double>(nd);
        double sd2 = 0.0;
        for (std::size_t i = 0; i < nd; ++i) {
            const double d = ys[i + 1] - ys[i] - md;
            sd2 += d * d;
        }
        sd2 /= static_cast<double>(nd - 1);
        rep.m1_drift = md * static_cast<double>(nb);
        rep.m1_drift_sigma = std::sqrt(sd2 / static_cast<double>(nd)) *
                             static_cast<double>(nb);
        // Exactly conserving runs leave both the drift and its sigma at
        // rounding scale, where the 3-sigma ratio is noise on noise; drift
        // below the conservation audit budget never raises the alarm.
        const double resolution = 1e-9 * std::abs(my);
        rep.stationary =
            std::abs(rep.m1_drift) <=
            std::max(3.0 * rep.m1_drift_sigma, resolution);
    }

    rep.candidates = totals.candidates;
    rep.collisions = totals.accepted;
    rep.majorant_overflows = totals.overflow;
    rep.acceptance_rate =
        totals.candidates == 0
            ? 0.0
            : static_cast<double>(totals.accepted) / totals.candidates;
    rep.mean_candidate_u =
        totals.candidates == 0 ? 0.0
                               : totals.sum_candidate_u / totals.candidates;
    rep.u_max_final = u_max;
    return rep;
}

void save_ensemble_csv(const ParticleEnsemble &ens, std::ostream &out) {
    char line[128];
    std::snprintf(line, sizeof line, "# n=%zu seed=%llu time=%.17g\n",
                  ens.v.size(),
                  static_cast<unsigned long long>(ens.seed), ens.time);
    out << line << "vx,vy,vz\n";
    for (const Vec3 &v : ens.v) {
        std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g\n", v.x, v.y,
                      v.z);
        out << line;
    }
}

} // namespace granular::dsmc
