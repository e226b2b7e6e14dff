#pragma once

#include "granular/kernel.hpp"
#include "granular/moment_bounds.hpp"
#include "granular/normalized_moments.hpp"
#include "granular/tail_fit.hpp"
#include "granular/vec3.hpp"

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

// Space-homogeneous DSMC for inelastic hard spheres under the four forcing
// models. Collisions are sampled by acceptance-rejection against a relative
// speed majorant; forcing updates are exact per-step maps. All randomness is
// counter-based (see rng.hpp): a run is a pure function of (config, seed).

namespace granular::dsmc {

struct ParticleEnsemble {
    std::vector<Vec3> v;
    std::uint64_t seed = 0;
    std::uint64_t step = 0;
    double time = 0.0;

    std::size_t size() const { return v.size(); }
    double weight() const { return 1.0 / static_cast<double>(v.size()); }
};

struct CollisionEvent {
    std::size_t i = 0, j = 0;
    Vec3 sigma{};
    Vec3 u{};
    bool accepted = false;
};

// v' = v + (beta/2)(|u| sigma - u), w' = w - (beta/2)(|u| sigma - u)
void collide_pair(Vec3 &v, Vec3 &w, const Vec3 &sigma, double beta);

// n >= 2; Maxwellian with per-component variance `temperature`, exactly
// re-centered to zero mean
ParticleEnsemble init_ensemble(std::size_t n, double temperature,
                               std::uint64_t seed);

// subtracts the mean velocity; returns its norm before removal
double recenter(ParticleEnsemble &ens);

double max_speed(const ParticleEnsemble &ens);
double mean_square_speed(const ParticleEnsemble &ens);

struct CollisionTally {
    std::uint64_t candidates = 0;
    std::uint64_t accepted = 0;
    std::uint64_t overflow = 0;
    double sum_candidate_u = 0.0;
    double energy_change = 0.0;

    void operator+=(const CollisionTally &o);
};

// One collision sweep of length dt. `u_max` is the current majorant (raised
// in place when an accepted pair exceeds it) and `carry` holds the fractional
// candidate count left over from previous steps.
CollisionTally collision_step(ParticleEnsemble &ens,
                              const RestitutionParams &params,
                              double dt, double &u_max, double &carry);

// Exact forcing map over dt followed by mean re-centering; returns the change
// in m1 produced by the map and the recentering together. When given,
// `removed_mean` receives the norm of the drift the recentering removed.
double forcing_step(ParticleEnsemble &ens, bounds::ForcingModel model,
                    const bounds::ForcingParams &params, double dt,
                    int threads = 1, double *removed_mean = nullptr);

struct MomentRow {
    double p = 0.0;
    double value = 0.0;
    double std_error = 0.0;
    bool reliable = true;
};

// Default ceiling above which single-snapshot moments are flagged: ln(N)/2.
double p_max_reliable(std::size_t n);

// Weighted power sums over the instantaneous ensemble with jackknife errors.
std::vector<MomentRow> empirical_moments(const ParticleEnsemble &ens,
                                         const std::vector<double> &p_list);

struct RunOptions {
    double dt = 0.01;
    double t_burn = 30.0;
    double t_avg = 30.0;
    double p_max = 10.0;
    int sample_every = 5;
    int blocks = 20;
    int bins = 1024;
    int majorant_refresh = 100;
    int threads = 1;
    tailfit::FitOptions fit;
};

struct EnergyBalance {
    double forcing_power = 0.0;
    double collision_power = 0.0;
    double residual = 0.0;
    double residual_sigma = 0.0;
    bool balanced = false;
};

struct SteadyStateReport {
    std::string model;
    double e = 1.0;
    double mu = 0.0, lambda = 0.0, kappa = 0.0;
    std::size_t n = 0;
    std::uint64_t seed = 0;
    double dt = 0.0, t_burn = 0.0, t_avg = 0.0;
    int threads = 1;
    double time_end = 0.0;

    std::vector<MomentRow> moments;
    tailfit::SpeedHistogram histogram;
    tailfit::TailFit tail;
    std::optional<moments::TailEstimate> moment_scan;

    EnergyBalance energy;
    double m1_drift = 0.0;
    double m1_drift_sigma = 0.0;
    bool stationary = true;

    std::uint64_t candidates = 0;
    std::uint64_t collisions = 0;
    std::uint64_t majorant_overflows = 0;
    double acceptance_rate = 0.0;
    double mean_candidate_u = 0.0;
    double u_max_final = 0.0;
    double recenter_max = 0.0;
    double reliability_ceiling = 0.0;
};

// Burns in for t_burn, then time-averages moments, the speed histogram, and
// the energy ledger over t_avg using Strang interleaving (half forcing,
// collisions, half forcing).
SteadyStateReport run_to_steady(ParticleEnsemble &ens,
                                bounds::ForcingModel model,
                                const RestitutionParams &rest,
                                const bounds::ForcingParams &fparams,
                                const RunOptions &opts);

// CSV snapshot (columns vx,vy,vz) with a comment header carrying N, seed, time
void save_ensemble_csv(const ParticleEnsemble &ens, std::ostream &out);

} // namespace granular::dsmc
