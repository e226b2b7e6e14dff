// Experiment driver for the granular library.
//
// Subcommands: kernel, verify, moments, simulate, analyze, compare. Each
// invocation writes its artifacts plus a manifest.json into one output
// directory, so every table is reproducible from (config, seed) alone.
// Exit codes: 0 success, 1 verification/run failure, 2 usage or config error.

#include "granular/combinatorics.hpp"
#include "granular/config.hpp"
#include "granular/dsmc.hpp"
#include "granular/errors.hpp"
#include "granular/kernel.hpp"
#include "granular/moment_bounds.hpp"
#include "granular/normalized_moments.hpp"
#include "granular/report.hpp"
#include "granular/rng.hpp"
#include "granular/tail_fit.hpp"
#include "granular/vec3.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using granular::ConfigError;
using granular::DomainError;
using granular::RestitutionParams;
using granular::Vec3;
using granular::report::format_double;
using granular::report::ordered_json;
namespace bounds = granular::bounds;
namespace comb = granular::comb;
namespace config = granular::config;
namespace dsmc = granular::dsmc;
namespace kernel = granular::kernel;
namespace moments = granular::moments;
namespace report = granular::report;
namespace rng = granular::rng;
namespace tailfit = granular::tailfit;

struct GlobalArgs {
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::optional<std::string> out;
};

// Flag beats environment beats per-command fallback.
std::string effective_out(const GlobalArgs &g, const std::string &fallback) {
    if (g.out) {
        return *g.out;
    }
    if (const char *env = std::getenv("GRANULAR_OUT"); env && *env) {
        return env;
    }
    return fallback;
}

int effective_threads(const GlobalArgs &g, int fallback) {
    if (g.threads) {
        return *g.threads;
    }
    if (const char *env = std::getenv("GRANULAR_THREADS"); env && *env) {
        const std::string text(env);
        std::size_t pos = 0;
        int value = 0;
        try {
            value = std::stoi(text, &pos);
        } catch (const std::exception &) {
            pos = 0;
        }
        if (pos != text.size() || value < 1) {
            throw ConfigError("GRANULAR_THREADS must be a positive integer, "
                              "got '" +
                              text + "'");
        }
        return value;
    }
    return fallback;
}

std::uint64_t effective_seed(const GlobalArgs &g, std::uint64_t fallback) {
    return g.seed ? *g.seed : fallback;
}

std::string hex64(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(h));
    return buf;
}

void write_json(const std::string &path, const ordered_json &j) {
    report::write_text(path, j.dump(2) + "\n");
}

struct Manifest {
    std::string command;
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
    int threads = 1;
    std::vector<std::string> artifacts;
    std::string status = "ok";
    std::string error;
};

void write_manifest(const std::string &dir, const Manifest &m) {
    ordered_json j{{"version", report::kVersion},
                   {"command", m.command},
                   {"config_hash", hex64(m.config_hash)},
                   {"seed", m.seed},
                   {"threads", m.threads},
                   {"status", m.status},
                   {"artifacts", m.artifacts}};
    if (!m.error.empty()) {
        j["error"] = m.error;
    }
    write_json(dir + "/manifest.json", j);
}

// Runs `body` with the manifest's artifact list; on failure the partial
// artifact list is kept and the manifest records the error.
template <typename Body>
int run_in_dir(const std::string &dir, Manifest man, Body body) {
    std::filesystem::create_directories(dir);
    try {
        const int rc = body(man.artifacts);
        write_manifest(dir, man);
        return rc;
    } catch (const ConfigError &ex) {
        man.status = "failed";
        man.error = ex.what();
        write_manifest(dir, man);
        std::cerr << "error: " << ex.what() << "\n";
        return 2;
    } catch (const DomainError &ex) {
        man.status = "failed";
        man.error = ex.what();
        write_manifest(dir, man);
        std::cerr << "error: " << ex.what() << "\n";
        return 2;
    } catch (const std::exception &ex) {
        man.status = "failed";
        man.error = ex.what();
        write_manifest(dir, man);
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
}

// "lo:step:hi" inclusive, or a single number.
std::vector<double> parse_range(const std::string &spec) {
    std::vector<std::string> parts;
    std::string token;
    std::istringstream in(spec);
    while (std::getline(in, token, ':')) {
        parts.push_back(token);
    }
    auto to_double = [&](const std::string &s) {
        std::size_t pos = 0;
        double v = 0.0;
        try {
            v = std::stod(s, &pos);
        } catch (const std::exception &) {
            pos = 0;
        }
        if (pos != s.size() || s.empty()) {
            throw ConfigError("bad number '" + s + "' in range '" + spec +
                              "'");
        }
        return v;
    };
    if (parts.size() == 1) {
        return {to_double(parts[0])};
    }
    if (parts.size() != 3) {
        throw ConfigError("range must be 'lo:step:hi' or a single number, "
                          "got '" +
                          spec + "'");
    }
    const double lo = to_double(parts[0]);
    const double step = to_double(parts[1]);
    const double hi = to_double(parts[2]);
    if (!(step > 0.0) || hi < lo) {
        throw ConfigError("range '" + spec +
                          "' needs step > 0 and hi >= lo");
    }
    std::vector<double> values;
    for (int i = 0;; ++i) {
        const double x = lo + i * step;
        if (x > hi + 0.5 * step) {
            break;
        }
        values.push_back(std::min(x, hi));
    }
    return values;
}

std::uint64_t hash_params(const std::string &canonical) {
    return config::fnv1a64(canonical);
}

// ---------------------------------------------------------------- kernel --

struct KernelArgs {
    std::vector<double> betas{0.75};
    std::string p_spec = "1:0.5:10";
    double tol = 1e-12;
};

int cmd_kernel(const KernelArgs &args, const std::string &dir,
               std::vector<std::string> &artifacts) {
    const std::vector<double> ps = parse_range(args.p_spec);
    std::vector<report::KernelRow> rows;
    for (double beta : args.betas) {
        RestitutionParams::from_beta(beta).validate();
        for (double p : ps) {
            if (p < 0.0) {
                throw DomainError("kernel orders must be nonnegative");
            }
            const kernel::GammaResult g = kernel::gamma_p(beta, p, args.tol);
            rows.push_back({beta, p, g.value, g.error});
        }
    }
    report::write_text(dir + "/kernel.csv", report::kernel_csv(rows));
    artifacts.push_back("kernel.csv");
    return 0;
}

// ---------------------------------------------------------------- verify --

struct VerifyArgs {
    std::string suite;
    int trials = 1000;
};

Vec3 uniform_box(const rng::Stream &s, std::uint64_t base, double half) {
    return {half * (2.0 * s.uniform(base) - 1.0),
            half * (2.0 * s.uniform(base + 1) - 1.0),
            half * (2.0 * s.uniform(base + 2) - 1.0)};
}

int verify_povzner(std::uint64_t seed, int trials, const std::string &dir,
                   std::vector<std::string> &artifacts) {
    int violations = 0;
    double worst_gain = -1e308;
    double worst_route = 0.0;
    ordered_json failures = ordered_json::array();
    for (int t = 0; t < trials; ++t) {
        const rng::Stream s(seed, rng::Purpose::verify,
                            static_cast<std::uint64_t>(t));
        const Vec3 v = uniform_box(s, 0, 2.0);
        const Vec3 w = uniform_box(s, 3, 2.0);
        const double beta = 0.5 + 0.5 * s.uniform(6);
        const double p = 1.0 + 9.0 * s.uniform(7);

        const double plus = kernel::a_plus_moment(v, w, beta, p);
        const double gamma = kernel::gamma_p(beta, p).value;
        const double cap =
            gamma * std::pow(norm2(v) + norm2(w), p) + 1e-8;
        const double gain_excess = plus - cap;
        worst_gain = std::max(worst_gain, gain_excess);

        double route_err = 0.0;
        if (norm(v - w) > 1e-9) {
            const double omega = kernel::a_plus_via_omega(v, w, beta, p);
            route_err = std::abs(plus - omega) /
                        std::max(std::abs(plus), 1e-300);
            worst_route = std::max(worst_route, route_err);
        }
        if (gain_excess > 0.0 || route_err > 1e-8) {
            ++violations;
            if (failures.size() < 10) {
                failures.push_back(ordered_json{{"trial", t},
                                                {"beta", beta},
                                                {"p", p},
                                                {"gain_excess", gain_excess},
                                                {"route_rel_err", route_err}});
            }
        }
    }
    write_json(dir + "/verify_povzner.json",
               ordered_json{{"suite", "povzner"},
                            {"trials", trials},
                            {"seed", seed},
                            {"violations", violations},
                            {"max_gain_excess", worst_gain},
                            {"max_route_rel_err", worst_route},
                            {"failures", failures}});
    artifacts.push_back("verify_povzner.json");
    return violations == 0 ? 0 : 1;
}

int verify_sandwich(std::uint64_t seed, int trials, const std::string &dir,
                    std::vector<std::string> &artifacts) {
    int violations = 0;
    double worst_order = 0.0;
    double worst_equality = 0.0;
    ordered_json failures = ordered_json::array();
    for (int t = 0; t < trials; ++t) {
        const rng::Stream s(seed, rng::Purpose::verify,
                            static_cast<std::uint64_t>(t));
        const bool odd = s.uniform(0) < 0.25;
        double p;
        if (odd) {
            p = 3.0 + 2.0 * std::floor(12.0 * s.uniform(1)); // 3, 5, ..., 25
        } else {
            p = 1.0 + 24.0 * s.uniform_pos(1);
        }
        const double x = std::exp(std::log(1e-3) + s.uniform(2) *
                                                       std::log(1e6));
        const double y = std::exp(std::log(1e-3) + s.uniform(3) *
                                                       std::log(1e6));
        const comb::SandwichBounds sb = comb::binom_sandwich(p, x, y);
        const double scale = std::max({std::abs(sb.lower),
                                       std::abs(sb.middle),
                                       std::abs(sb.upper), 1e-300});
        const double below = (sb.lower - sb.middle) / scale;
        const double above = (sb.middle - sb.upper) / scale;
        const double order_err = std::max(below, above);
        worst_order = std::max(worst_order, order_err);
        double equality_err = 0.0;
        if (odd) {
            equality_err = std::abs(sb.lower - sb.middle) / scale;
            worst_equality = std::max(worst_equality, equality_err);
        }
        if (order_err > 1e-12 || equality_err > 1e-12) {
            ++violations;
            if (failures.size() < 10) {
                failures.push_back(ordered_json{{"trial", t},
                                                {"p", p},
                                                {"x", x},
                                                {"y", y},
                                                {"order_err", order_err},
                                                {"equality_err",
                                                 equality_err}});
            }
        }
    }
    write_json(dir + "/verify_sandwich.json",
               ordered_json{{"suite", "sandwich"},
                            {"trials", trials},
                            {"seed", seed},
                            {"violations", violations},
                            {"max_order_err", worst_order},
                            {"max_odd_equality_err", worst_equality},
                            {"failures", failures}});
    artifacts.push_back("verify_sandwich.json");
    return violations == 0 ? 0 : 1;
}

int verify_collision(std::uint64_t seed, int trials, const std::string &dir,
                     std::vector<std::string> &artifacts) {
    const double betas[] = {0.55, 0.75, 0.95};
    int violations = 0;
    double worst_margin = -1e308; // positive = outside the interval
    ordered_json failures = ordered_json::array();
    for (int t = 0; t < trials; ++t) {
        const rng::Stream s(seed, rng::Purpose::verify,
                            static_cast<std::uint64_t>(t));
        const std::size_t k =
            2 + static_cast<std::size_t>(5.0 * s.uniform(0));
        std::vector<Vec3> points(k);
        for (std::size_t i = 0; i < k; ++i) {
            const std::uint64_t base = 8 + 4 * i;
            const auto [n0, n1] =
                rng::normal_pair(s.uniform_pos(base), s.uniform(base + 1));
            const auto [n2, n3] =
                rng::normal_pair(s.uniform_pos(base + 2),
                                 s.uniform(base + 3));
            points[i] = {n0, n1, n2};
        }
        points = bounds::normalize_ensemble(points);
        const moments::MomentGrid grid = bounds::ensemble_grid(points, 6.5);
        for (double beta : betas) {
            for (double p = 1.5; p <= 6.0 + 1e-9; p += 0.5) {
                const double q =
                    bounds::collision_moment_ensemble(points, beta, p);
                const bounds::Interval iv =
                    bounds::collision_moment_interval(grid, beta, p);
                const double slack =
                    1e-8 * std::max({std::abs(iv.lo), std::abs(iv.hi), 1.0});
                const double margin =
                    std::max(iv.lo - slack - q, q - iv.hi - slack);
                worst_margin = std::max(worst_margin, margin);
                if (margin > 0.0) {
                    ++violations;
                    if (failures.size() < 10) {
                        failures.push_back(ordered_json{{"trial", t},
                                                        {"k", k},
                                                        {"beta", beta},
                                                        {"p", p},
                                                        {"q", q},
                                                        {"lo", iv.lo},
                                                        {"hi", iv.hi}});
                    }
                }
            }
        }
    }
    write_json(dir + "/verify_collision.json",
               ordered_json{{"suite", "collision"},
                            {"trials", trials},
                            {"seed", seed},
                            {"violations", violations},
                            {"max_outside_margin", worst_margin},
                            {"failures", failures}});
    artifacts.push_back("verify_collision.json");
    return violations == 0 ? 0 : 1;
}

// --------------------------------------------------------------- moments --

struct MomentsArgs {
    std::string model = "diffusion";
    double e = 0.8;
    double m1 = 1.0;
    std::optional<double> m1_lo;
    std::optional<double> m1_hi;
    double p_max = 8.0;
    double mu = 1.0;
    double lambda = 1.0;
    double kappa = 0.1;
    std::optional<double> b;
};

int cmd_moments(const MomentsArgs &args, const std::string &dir,
                std::vector<std::string> &artifacts) {
    const bounds::ForcingModel model =
        bounds::forcing_model_from_string(args.model);
    const RestitutionParams rest{args.e};
    rest.validate();
    const bounds::ForcingParams fp{args.mu, args.lambda, args.kappa};
    fp.validate(model);

    moments::SeedMoments seed;
    seed.m1_lo = args.m1_lo.value_or(args.m1);
    seed.m1_hi = args.m1_hi.value_or(args.m1);
    if (!(seed.m1_lo > 0.0) || !(seed.m1_hi >= seed.m1_lo)) {
        throw DomainError("m1 bounds must satisfy 0 < m1_lo <= m1_hi");
    }

    const moments::MomentGrid grid =
        bounds::propagate(model, fp, rest.beta(), seed, args.p_max);
    const double a = bounds::tail_exponent(model);
    const double b = args.b ? *args.b : (std::abs(a - 1.0) < 1e-9 ? 1.4 : 0.9);
    moments::NormalizedMoments z = moments::normalize(grid, a, b);
    z.growth = moments::geometric_check(
        z, std::max(2.0, 0.5 * std::floor(grid.p_max())));

    const std::string meta = "model=" + bounds::to_string(model) +
                             " e=" + format_double(args.e);
    report::write_text(dir + "/grid.csv", report::grid_csv(grid, meta));
    report::write_text(dir + "/normalized.csv",
                       report::normalized_csv(z, meta));
    artifacts.push_back("grid.csv");
    artifacts.push_back("normalized.csv");

    ordered_json scan;
    try {
        scan = report::to_json(moments::estimate_tail_order(grid));
    } catch (const DomainError &) {
        scan = nullptr; // grid too short for the estimator
    }
    const moments::PropagationConstants pc =
        moments::compute_propagation_constants(rest.beta(), a, b, 0.5,
                                               args.lambda);
    ordered_json constants{{"eps", pc.eps},
                           {"K_eps", pc.K_eps},
                           {"A_ab", pc.A_ab},
                           {"c3", pc.c3},
                           {"C3", pc.C3},
                           {"C4", pc.C4},
                           {"c5", pc.c5},
                           {"C5", pc.C5}};
    constants["p1"] = pc.p1 ? ordered_json(*pc.p1) : ordered_json(nullptr);
    write_json(dir + "/moments_analysis.json",
               ordered_json{{"model", bounds::to_string(model)},
                            {"restitution_e", args.e},
                            {"params",
                             ordered_json{{"mu", args.mu},
                                          {"lambda", args.lambda},
                                          {"kappa", args.kappa}}},
                            {"m1", ordered_json{seed.m1_lo, seed.m1_hi}},
                            {"p_max", args.p_max},
                            {"a", a},
                            {"b", b},
                            {"one_sided", grid.one_sided},
                            {"growth", report::to_json(*z.growth)},
                            {"tail_estimate", scan},
                            {"propagation_constants", constants}});
    artifacts.push_back("moments_analysis.json");
    return 0;
}

// -------------------------------------------------------------- simulate --

int cmd_simulate(const config::ExperimentConfig &cfg, bool save_ensemble,
                 const std::string &dir,
                 std::vector<std::string> &artifacts) {
    dsmc::ParticleEnsemble ens =
        dsmc::init_ensemble(cfg.n, cfg.temperature, cfg.seed);
    dsmc::RunOptions opts = cfg.run_options();
    const dsmc::SteadyStateReport rep = dsmc::run_to_steady(
        ens, cfg.model, cfg.restitution(), cfg.forcing(), opts);

    write_json(dir + "/report.json", report::to_json(rep));
    artifacts.push_back("report.json");
    const std::string meta = "model=" + bounds::to_string(cfg.model) +
                             " e=" + format_double(cfg.e) +
                             " seed=" + std::to_string(cfg.seed);
    report::write_text(dir + "/moments.csv",
                       report::moment_table_csv(rep.moments, meta));
    artifacts.push_back("moments.csv");
    if (save_ensemble) {
        std::ofstream out(dir + "/ensemble.csv", std::ios::binary);
        if (!out) {
            throw ConfigError("cannot write '" + dir + "/ensemble.csv'");
        }
        dsmc::save_ensemble_csv(ens, out);
        artifacts.push_back("ensemble.csv");
    }
    return 0;
}

// --------------------------------------------------------------- analyze --

struct AnalyzeArgs {
    std::string report_path;
    double percentile_lo = 95.0;
    double percentile_hi = 99.9;
    double s_min = 0.5;
    double s_max = 2.5;
    int bootstrap = 200;
};

int cmd_analyze(const AnalyzeArgs &args, std::uint64_t seed,
                const std::string &dir,
                std::vector<std::string> &artifacts) {
    const tailfit::SpeedHistogram hist =
        report::read_report_histogram(args.report_path);
    tailfit::FitOptions fo;
    fo.percentile_lo = args.percentile_lo;
    fo.percentile_hi = args.percentile_hi;
    fo.s_min = args.s_min;
    fo.s_max = args.s_max;
    fo.bootstrap = args.bootstrap;
    fo.seed = seed;
    const tailfit::TailFit fit = tailfit::fit_tail(hist, fo);

    ordered_json scan;
    try {
        const report::ReportSummary sum =
            report::read_report_summary(args.report_path);
        moments::MomentGrid grid;
        for (const auto &[key, value] : sum.values) {
            if (value > 0.0) {
                grid.set(0.5 * key, moments::MomentInterval::exact(value));
            }
        }
        scan = report::to_json(
            moments::estimate_tail_order(grid, args.s_min, args.s_max));
    } catch (const DomainError &) {
        scan = nullptr;
    }

    write_json(dir + "/analysis.json",
               ordered_json{{"fit_options",
                             ordered_json{{"percentile_lo", fo.percentile_lo},
                                          {"percentile_hi", fo.percentile_hi},
                                          {"s_min", fo.s_min},
                                          {"s_max", fo.s_max},
                                          {"bootstrap", fo.bootstrap},
                                          {"seed", fo.seed}}},
                            {"tail_fit", report::to_json(fit)},
                            {"moment_scan", scan}});
    artifacts.push_back("analysis.json");
    return 0;
}

// --------------------------------------------------------------- compare --

int cmd_compare(const std::string &report_path, const std::string &grid_path,
                double p_limit, const std::string &dir,
                std::vector<std::string> &artifacts) {
    const report::ReportSummary sum =
        report::read_report_summary(report_path);
    const report::GridFile grid = report::read_grid_csv(grid_path);
    const report::CompareResult res =
        report::compare_report_to_grid(sum, grid, p_limit);
    write_json(dir + "/compare.json", res.detail);
    artifacts.push_back("compare.json");
    return res.pass ? 0 : 1;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Moment bounds, kernel constants, and DSMC steady states "
                 "of the driven inelastic hard-sphere gas"};
    app.require_subcommand(1);

    GlobalArgs global;
    app.add_option("--seed", global.seed, "Random seed override");
    app.add_option("--threads", global.threads, "Worker thread count")
        ->check(CLI::PositiveNumber);
    app.add_option("--out", global.out, "Output directory");

    KernelArgs kargs;
    CLI::App *kernel_cmd =
        app.add_subcommand("kernel", "Tabulate the angular gain factors");
    kernel_cmd->fallthrough();
    kernel_cmd->add_option("--beta", kargs.betas,
                           "Collision parameter(s) beta = (1+e)/2");
    kernel_cmd->add_option("--p", kargs.p_spec,
                           "Moment orders, 'lo:step:hi' or a single value");
    kernel_cmd->add_option("--tol", kargs.tol, "Quadrature tolerance")
        ->check(CLI::PositiveNumber);

    VerifyArgs vargs;
    CLI::App *verify_cmd = app.add_subcommand(
        "verify", "Run a randomized inequality suite");
    verify_cmd->fallthrough();
    verify_cmd
        ->add_option("suite", vargs.suite,
                     "One of: povzner, sandwich, collision")
        ->required()
        ->check(CLI::IsMember({"povzner", "sandwich", "collision"}));
    verify_cmd->add_option("--trials", vargs.trials, "Number of random trials")
        ->check(CLI::PositiveNumber);

    MomentsArgs margs;
    CLI::App *moments_cmd = app.add_subcommand(
        "moments", "Propagate steady-state moment bounds");
    moments_cmd->fallthrough();
    moments_cmd->add_option(
        "--model", margs.model,
        "diffusion | diffusion_friction | negative_friction | shear");
    moments_cmd->add_option("--e", margs.e, "Restitution coefficient");
    moments_cmd->add_option("--m1", margs.m1, "Second-moment normalization");
    moments_cmd->add_option("--m1-lo", margs.m1_lo,
                            "Lower bound on m1 (overrides --m1)");
    moments_cmd->add_option("--m1-hi", margs.m1_hi,
                            "Upper bound on m1 (overrides --m1)");
    moments_cmd->add_option("--p-max", margs.p_max,
                            "Largest half-integer moment order");
    moments_cmd->add_option("--mu", margs.mu, "Diffusion strength");
    moments_cmd->add_option("--lambda", margs.lambda, "Drag rate");
    moments_cmd->add_option("--kappa", margs.kappa,
                            "Anti-drag rate or shear magnitude");
    moments_cmd->add_option("--b", margs.b,
                            "Normalization offset (default per model)");

    std::string config_path;
    bool save_ensemble = false;
    CLI::App *simulate_cmd =
        app.add_subcommand("simulate", "Run a DSMC steady-state experiment");
    simulate_cmd->fallthrough();
    simulate_cmd->add_option("--config", config_path, "Experiment config file")
        ->required();
    simulate_cmd->add_flag("--save-ensemble", save_ensemble,
                           "Also write the final particle velocities");

    AnalyzeArgs aargs;
    CLI::App *analyze_cmd = app.add_subcommand(
        "analyze", "Re-fit the tail of a stored simulation report");
    analyze_cmd->fallthrough();
    analyze_cmd->add_option("--report", aargs.report_path, "report.json path")
        ->required();
    analyze_cmd->add_option("--percentile-lo", aargs.percentile_lo,
                            "Fit window lower percentile");
    analyze_cmd->add_option("--percentile-hi", aargs.percentile_hi,
                            "Fit window upper percentile");
    analyze_cmd->add_option("--s-min", aargs.s_min, "Smallest tail order");
    analyze_cmd->add_option("--s-max", aargs.s_max, "Largest tail order");
    analyze_cmd->add_option("--bootstrap", aargs.bootstrap,
                            "Bootstrap replicates (0 disables)");

    std::string cmp_report, cmp_grid;
    double cmp_p_limit = 6.0;
    CLI::App *compare_cmd = app.add_subcommand(
        "compare", "Check simulated moments against a propagated grid");
    compare_cmd->fallthrough();
    compare_cmd->add_option("--report", cmp_report, "report.json path")
        ->required();
    compare_cmd->add_option("--grid", cmp_grid, "grid.csv path")->required();
    compare_cmd->add_option("--p-limit", cmp_p_limit,
                            "Largest moment order to check");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (kernel_cmd->parsed()) {
            const std::string dir = effective_out(global, "out");
            Manifest man;
            man.command = "kernel";
            std::string canon = "command=kernel p=" + kargs.p_spec +
                                " tol=" + format_double(kargs.tol);
            for (double beta : kargs.betas) {
                canon += " beta=" + format_double(beta);
            }
            man.config_hash = hash_params(canon);
            man.seed = effective_seed(global, 0);
            man.threads = effective_threads(global, 1);
            return run_in_dir(dir, man, [&](std::vector<std::string> &arts) {
                return cmd_kernel(kargs, dir, arts);
            });
        }
        if (verify_cmd->parsed()) {
            const std::string dir = effective_out(global, "out");
            const std::uint64_t seed = effective_seed(global, 1);
            Manifest man;
            man.command = "verify";
            man.config_hash = hash_params(
                "command=verify suite=" + vargs.suite +
                " trials=" + std::to_string(vargs.trials) +
                " seed=" + std::to_string(seed));
            man.seed = seed;
            man.threads = effective_threads(global, 1);
            return run_in_dir(dir, man, [&](std::vector<std::string> &arts) {
                if (vargs.suite == "povzner") {
                    return verify_povzner(seed, vargs.trials, dir, arts);
                }
                if (vargs.suite == "sandwich") {
                    return verify_sandwich(seed, vargs.trials, dir, arts);
                }
                return verify_collision(seed, vargs.trials, dir, arts);
            });
        }
        if (moments_cmd->parsed()) {
            const std::string dir = effective_out(global, "out");
            Manifest man;
            man.command = "moments";
            man.config_hash = hash_params(
                "command=moments model=" + margs.model +
                " e=" + format_double(margs.e) +
                " m1_lo=" + format_double(margs.m1_lo.value_or(margs.m1)) +
                " m1_hi=" + format_double(margs.m1_hi.value_or(margs.m1)) +
                " p_max=" + format_double(margs.p_max) +
                " mu=" + format_double(margs.mu) +
                " lambda=" + format_double(margs.lambda) +
                " kappa=" + format_double(margs.kappa) +
                " b=" + (margs.b ? format_double(*margs.b) : "default"));
            man.seed = effective_seed(global, 0);
            man.threads = effective_threads(global, 1);
            return run_in_dir(dir, man, [&](std::vector<std::string> &arts) {
                return cmd_moments(margs, dir, arts);
            });
        }
        if (simulate_cmd->parsed()) {
            config::ExperimentConfig cfg = config::load_config(config_path);
            if (global.seed) {
                cfg.seed = *global.seed;
            }
            cfg.threads = effective_threads(global, cfg.threads);
            const std::string dir = effective_out(global, cfg.out_dir);
            cfg.out_dir = dir;
            cfg.validate();
            Manifest man;
            man.command = "simulate";
            man.config_hash = config::config_hash(cfg);
            man.seed = cfg.seed;
            man.threads = cfg.threads;
            return run_in_dir(dir, man, [&](std::vector<std::string> &arts) {
                return cmd_simulate(cfg, save_ensemble, dir, arts);
            });
        }
        if (analyze_cmd->parsed()) {
            const std::string dir = effective_out(global, "out");
            const std::uint64_t seed = effective_seed(global, 1);
            Manifest man;
            man.command = "analyze";
            man.config_hash = hash_params(
                "command=analyze report=" + aargs.report_path +
                " percentile_lo=" + format_double(aargs.percentile_lo) +
                " percentile_hi=" + format_double(aargs.percentile_hi) +
                " s_min=" + format_double(aargs.s_min) +
                " s_max=" + format_double(aargs.s_max) +
                " bootstrap=" + std::to_string(aargs.bootstrap) +
                " seed=" + std::to_string(seed));
            man.seed = seed;
            man.threads = effective_threads(global, 1);
            return run_in_dir(dir, man, [&](std::vector<std::string> &arts) {
                return cmd_analyze(aargs, seed, dir, arts);
            });
        }
        if (compare_cmd->parsed()) {
            const std::string dir = effective_out(global, "out");
            Manifest man;
            man.command = "compare";
            man.config_hash = hash_params(
                "command=compare report=" + cmp_report + " grid=" + cmp_grid +
                " p_limit=" + format_double(cmp_p_limit));
            man.seed = effective_seed(global, 0);
            man.threads = effective_threads(global, 1);
            return run_in_dir(dir, man, [&](std::vector<std::string> &arts) {
                return cmd_compare(cmp_report, cmp_grid, cmp_p_limit, dir,
                                   arts);
            });
        }
    } catch (const ConfigError &ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 2;
    } catch (const DomainError &ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 2;
    } catch (const std::exception &ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
    return 2;
}
