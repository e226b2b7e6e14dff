#pragma once

#include "granular/dsmc.hpp"
#include "granular/moment_bounds.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>

// Flat key = value experiment configuration. Every key is typed, unknown keys
// are rejected with their line number, and per-model defaults fill whatever a
// file does not set.

namespace granular::config {

struct ExperimentConfig {
    bounds::ForcingModel model = bounds::ForcingModel::PureDiffusion;
    double e = 0.8;
    std::uint64_t seed = 1;

    double mu = 1.0;
    double lambda = 1.0;
    double kappa = 0.1;

    std::size_t n = 200000;
    double temperature = 1.0;
    double dt = 0.01;
    double t_burn = 30.0;
    double t_avg = 30.0;
    int sample_every = 5;
    int blocks = 20;
    int bins = 1024;

    double p_max = 10.0;
    double grid_p_max = 8.0;
    double s_min = 0.5;
    double s_max = 2.5;
    double b = 0.9;

    double fit_percentile_lo = 95.0;
    double fit_percentile_hi = 99.9;
    int bootstrap = 200;

    int threads = 1;
    std::string out_dir = "out";

    bounds::ForcingParams forcing() const;
    RestitutionParams restitution() const;
    dsmc::RunOptions run_options() const;
    void validate() const;
};

// Tuned defaults per forcing model (time step, run lengths, rates, fit
// window).
ExperimentConfig default_config(bounds::ForcingModel model);

// Parses key = value lines ('#' comments allowed) on top of the per-model
// defaults; the model key, if present, is applied first.
ExperimentConfig parse_config(std::istream &in);
ExperimentConfig load_config(const std::string &path);

// Canonical serialization (sorted keys, %.17g values); the FNV-1a hash of it
// identifies a run in manifests.
std::string canonical_string(const ExperimentConfig &cfg);
std::uint64_t fnv1a64(const std::string &text);
std::uint64_t config_hash(const ExperimentConfig &cfg);

} // namespace granular::config
