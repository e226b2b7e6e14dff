#include "granular/config.hpp"
#include "granular/errors.hpp"
#include "granular/report.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using namespace granular;

namespace {

config::ExperimentConfig parse(const std::string &text) {
    std::istringstream in(text);
    return config::parse_config(in);
}

std::string temp_file(const char *name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

std::vector<std::string> split_lines(const std::string &text) {
    std::vector<std::string> lines;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        lines.push_back(line);
    }
    return lines;
}

} // namespace

TEST_SUITE("config_report") {

TEST_CASE("per-model defaults cover the four forcing regimes") {
    using bounds::ForcingModel;

    const auto pd = config::default_config(ForcingModel::PureDiffusion);
    CHECK(pd.model == ForcingModel::PureDiffusion);
    CHECK(pd.mu == 1.0);
    CHECK(pd.dt == 0.01);
    CHECK(pd.t_burn == 30.0);
    CHECK(pd.t_avg == 30.0);
    CHECK(pd.b == 0.9);
    CHECK(pd.e == 0.8);
    CHECK(pd.seed == 1);
    CHECK(pd.n == 200000);
    CHECK(pd.temperature == 1.0);
    CHECK(pd.sample_every == 5);
    CHECK(pd.blocks == 20);
    CHECK(pd.bins == 1024);
    CHECK(pd.p_max == 10.0);
    CHECK(pd.grid_p_max == 8.0);
    CHECK(pd.s_min == 0.5);
    CHECK(pd.s_max == 2.5);
    CHECK(pd.fit_percentile_lo == 95.0);
    CHECK(pd.fit_percentile_hi == 99.9);
    CHECK(pd.bootstrap == 200);
    CHECK(pd.threads == 1);
    CHECK(pd.out_dir == "out");

    const auto df = config::default_config(ForcingModel::DiffusionFriction);
    CHECK(df.mu == 1.0);
    CHECK(df.lambda == 1.0);
    CHECK(df.dt == 0.01);
    CHECK(df.t_burn == 30.0);
    CHECK(df.t_avg == 30.0);
    CHECK(df.b == 1.4);

    const auto nf = config::default_config(ForcingModel::NegativeFriction);
    CHECK(nf.kappa == 0.1);
    CHECK(nf.dt == 0.05);
    CHECK(nf.t_burn == 100.0);
    CHECK(nf.t_avg == 100.0);
    CHECK(nf.b == 0.9);

    const auto sh = config::default_config(ForcingModel::ShearFlow);
    CHECK(sh.kappa == 1.0);
    CHECK(sh.dt == 0.02);
    CHECK(sh.t_burn == 40.0);
    CHECK(sh.t_avg == 40.0);

    for (const auto &cfg : {pd, df, nf, sh}) {
        CHECK_NOTHROW(cfg.validate());
    }
}

TEST_CASE("the model key selects defaults before any other override") {
    // dt appears before the model key, yet it must override the
    // negative-friction default, not the diffusion one.
    const auto cfg = parse("dt = 0.2\nmodel = negative_friction\n");
    CHECK(cfg.model == bounds::ForcingModel::NegativeFriction);
    CHECK(cfg.dt == 0.2);
    CHECK(cfg.t_burn == 100.0);
    CHECK(cfg.t_avg == 100.0);
    CHECK(cfg.kappa == 0.1);

    const auto plain = parse("n = 4096\n");
    CHECK(plain.model == bounds::ForcingModel::PureDiffusion);
    CHECK(plain.n == 4096);
    CHECK(plain.dt == 0.01);
}

TEST_CASE("parsing trims whitespace and skips comments and blank lines") {
    const std::string text = "# run settings\n"
                             "\n"
                             "  e   =  0.9  \n"
                             "seed=42\n"
                             "\t out_dir = runs/a \n"
                             "model = shear\n";
    const auto cfg = parse(text);
    CHECK(cfg.model == bounds::ForcingModel::ShearFlow);
    CHECK(cfg.e == 0.9);
    CHECK(cfg.seed == 42);
    CHECK(cfg.out_dir == "runs/a");
    CHECK(cfg.kappa == 1.0);
}

TEST_CASE("malformed input is rejected with its line number") {
    CHECK_THROWS_WITH_AS(parse("e = 0.8\nn = 1000\nfrobnicate = 3\n"),
                         "config line 3: unknown key 'frobnicate'",
                         ConfigError);
    CHECK_THROWS_WITH_AS(parse("dt = fast\n"),
                         "config line 1: invalid number for 'dt': 'fast'",
                         ConfigError);
    CHECK_THROWS_WITH_AS(
        parse("blocks = 7.5\n"),
        "config line 1: invalid integer for 'blocks': '7.5'", ConfigError);
    CHECK_THROWS_WITH_AS(
        parse("seed = -3\n"),
        "config line 1: invalid unsigned integer for 'seed': '-3'",
        ConfigError);
    CHECK_THROWS_WITH_AS(parse("e = 0.8\njust some text\n"),
                         "config line 2: expected key = value", ConfigError);
    CHECK_THROWS_WITH_AS(parse("= 5\n"), "config line 1: empty key",
                         ConfigError);
    CHECK_THROWS_WITH_AS(
        parse("model = ballistic\n"),
        "config line 1: invalid forcing model for 'model': 'ballistic'",
        ConfigError);
    CHECK_THROWS_WITH_AS(
        parse("n = 1\n"),
        "config line 1: invalid particle count for 'n': '1'", ConfigError);
}

TEST_CASE("validation rejects inconsistent run parameters") {
    const auto base = config::default_config(bounds::ForcingModel::PureDiffusion);

    auto mutated = [&base](auto &&change) {
        auto cfg = base;
        change(cfg);
        return cfg;
    };

    CHECK_THROWS_AS(
        mutated([](auto &c) { c.blocks = 2; }).validate(), ConfigError);
    CHECK_THROWS_AS(
        mutated([](auto &c) { c.sample_every = 0; }).validate(), ConfigError);
    CHECK_THROWS_AS(
        mutated([](auto &c) { c.bins = 8; }).validate(), ConfigError);
    CHECK_THROWS_AS(
        mutated([](auto &c) { c.threads = 0; }).validate(), ConfigError);
    CHECK_THROWS_AS(
        mutated([](auto &c) { c.p_max = 0.5; }).validate(), ConfigError);
    CHECK_THROWS_AS(
        mutated([](auto &c) { c.s_min = 0.0; }).validate(), ConfigError);
    CHECK_THROWS_AS(
        mutated([](auto &c) { c.s_max = c.s_min; }).validate(), ConfigError);
    CHECK_THROWS_AS(
        mutated([](auto &c) { c.fit_percentile_lo = 0.0; }).validate(),
        ConfigError);
    CHECK_THROWS_AS(
        mutated([](auto &c) { c.fit_percentile_hi = 100.0; }).validate(),
        ConfigError);
    CHECK_THROWS_AS(
        mutated([](auto &c) { c.fit_percentile_hi = 50.0; }).validate(),
        ConfigError);
    CHECK_THROWS_AS(
        mutated([](auto &c) { c.b = 0.0; }).validate(), ConfigError);
    CHECK_THROWS_AS(
        mutated([](auto &c) { c.temperature = -1.0; }).validate(),
        ConfigError);
    CHECK_THROWS_AS(
        mutated([](auto &c) { c.dt = 0.0; }).validate(), ConfigError);
    CHECK_THROWS_AS(
        mutated([](auto &c) { c.bootstrap = -1; }).validate(), ConfigError);

    // Physics parameters are vetted by their own domain checks.
    CHECK_THROWS_AS(
        mutated([](auto &c) { c.e = 1.2; }).validate(), DomainError);
    CHECK_THROWS_AS(mutated([](auto &c) {
                        c.model = bounds::ForcingModel::DiffusionFriction;
                        c.lambda = 0.0;
                    }).validate(),
                    DomainError);
}

TEST_CASE("run options copy the simulation and fit fields") {
    auto cfg = config::default_config(bounds::ForcingModel::DiffusionFriction);
    cfg.dt = 0.025;
    cfg.t_burn = 3.0;
    cfg.t_avg = 7.0;
    cfg.p_max = 5.5;
    cfg.sample_every = 2;
    cfg.blocks = 8;
    cfg.bins = 256;
    cfg.threads = 3;
    cfg.fit_percentile_lo = 90.0;
    cfg.fit_percentile_hi = 99.0;
    cfg.s_min = 0.7;
    cfg.s_max = 2.1;
    cfg.bootstrap = 64;
    cfg.seed = 99;

    const auto opts = cfg.run_options();
    CHECK(opts.dt == 0.025);
    CHECK(opts.t_burn == 3.0);
    CHECK(opts.t_avg == 7.0);
    CHECK(opts.p_max == 5.5);
    CHECK(opts.sample_every == 2);
    CHECK(opts.blocks == 8);
    CHECK(opts.bins == 256);
    CHECK(opts.threads == 3);
    CHECK(opts.fit.percentile_lo == 90.0);
    CHECK(opts.fit.percentile_hi == 99.0);
    CHECK(opts.fit.s_min == 0.7);
    CHECK(opts.fit.s_max == 2.1);
    CHECK(opts.fit.bootstrap == 64);
    CHECK(opts.fit.seed == 99);

    const auto fp = cfg.forcing();
    CHECK(fp.mu == 1.0);
    CHECK(fp.lambda == 1.0);
    const auto rest = cfg.restitution();
    CHECK(rest.e == 0.8);
}

TEST_CASE("canonical form sorts keys and ignores the output directory") {
    const auto cfg = config::default_config(bounds::ForcingModel::PureDiffusion);
    const std::string canon = config::canonical_string(cfg);
    const auto lines = split_lines(canon);

    const std::vector<std::string> expected_keys = {
        "b",          "bins",
        "blocks",     "bootstrap",
        "dt",         "e",
        "fit_percentile_hi", "fit_percentile_lo",
        "grid_p_max", "kappa",
        "lambda",     "model",
        "mu",         "n",
        "p_max",      "s_max",
        "s_min",      "sample_every",
        "seed",       "t_avg",
        "t_burn",     "temperature",
        "threads"};
    REQUIRE(lines.size() == expected_keys.size());
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto eq = lines[i].find('=');
        REQUIRE(eq != std::string::npos);
        CHECK(lines[i].substr(0, eq) == expected_keys[i]);
    }

    CHECK(canon.find("model=diffusion\n") != std::string::npos);
    CHECK(canon.find("threads=1\n") != std::string::npos);
    CHECK(canon.find("out_dir") == std::string::npos);

    // The output directory is a placement detail, not part of the run
    // identity.
    auto moved = cfg;
    moved.out_dir = "elsewhere";
    CHECK(config::canonical_string(moved) == canon);
    CHECK(config::config_hash(moved) == config::config_hash(cfg));

    auto threaded = cfg;
    threaded.threads = 4;
    CHECK(config::canonical_string(threaded) != canon);
    CHECK(config::config_hash(threaded) != config::config_hash(cfg));

    auto reseeded = cfg;
    reseeded.seed = 2;
    CHECK(config::config_hash(reseeded) != config::config_hash(cfg));
}

TEST_CASE("the run hash matches the reference fnv-1a vectors") {
    CHECK(config::fnv1a64("") == 0xcbf29ce484222325ull);
    CHECK(config::fnv1a64("a") == 0xaf63dc4c8601ec8cull);
    CHECK(config::fnv1a64("foobar") == 0x85944171f73967e8ull);

    const auto cfg = config::default_config(bounds::ForcingModel::ShearFlow);
    CHECK(config::config_hash(cfg) ==
          config::fnv1a64(config::canonical_string(cfg)));
}

TEST_CASE("doubles survive a serialization round trip") {
    CHECK(report::format_double(1.0) == "1");
    CHECK(report::format_double(0.1) == "0.10000000000000001");
    CHECK(report::format_double(0.01) == "0.01");

    const double values[] = {1.0 / 3.0, 6.02214076e23, 1e-300,
                             3.141592653589793, 0.8, 1e6 + 0.5};
    for (double x : values) {
        CHECK(std::stod(report::format_double(x)) == x);
        CHECK(std::stod(report::format_double(-x)) == -x);
    }
    const std::string neg_zero = report::format_double(-0.0);
    CHECK(std::signbit(std::stod(neg_zero)));
}

TEST_CASE("steady-state reports round trip through json") {
    dsmc::SteadyStateReport rep;
    rep.model = "diffusion";
    rep.e = 0.8;
    rep.mu = 1.0;
    rep.n = 1000;
    rep.seed = 7;
    rep.dt = 0.01;
    rep.t_burn = 1.0;
    rep.t_avg = 2.0;
    rep.threads = 1;
    rep.time_end = 3.0;
    rep.moments = {{0.0, 1.0, 0.0, true},
                   {0.5, 1.1, 0.01, true},
                   {1.0, 3.2, 0.02, true}};
    rep.histogram.edges = {0.0, 0.5, 1.0, 1.5};
    rep.histogram.counts = {4.0, 2.0, 1.0};
    rep.histogram.block_counts = {{2.0, 1.0, 0.0}, {2.0, 1.0, 1.0}};
    rep.histogram.overflow = 1.0;
    rep.histogram.samples = 8.0;
    rep.tail.s = 2.0;
    rep.tail.ok = false;
    rep.tail.message = "synthetic fixture";
    moments::TailEstimate est;
    est.s = 1.5;
    est.r_star = 2.0;
    est.conclusive = true;
    est.p_from = 2.0;
    est.p_to = 8.0;
    rep.moment_scan = est;
    rep.energy.forcing_power = 6.0;
    rep.energy.collision_power = -6.0;
    rep.energy.residual = 0.0;
    rep.energy.residual_sigma = 0.1;
    rep.energy.balanced = true;

    const std::string path = temp_file("granular_report_roundtrip.json");
    report::write_text(path, report::to_json(rep).dump(2) + "\n");

    const auto sum = report::read_report_summary(path);
    CHECK(sum.model == "diffusion");
    CHECK(sum.e == 0.8);
    REQUIRE(sum.values.size() == 3);
    CHECK(sum.values.at(0) == 1.0);
    CHECK(sum.values.at(1) == 1.1);
    CHECK(sum.values.at(2) == 3.2);
    CHECK(sum.errors.at(1) == 0.01);
    CHECK(sum.errors.at(2) == 0.02);

    const auto hist = report::read_report_histogram(path);
    CHECK(hist.edges == rep.histogram.edges);
    CHECK(hist.counts == rep.histogram.counts);
    CHECK(hist.block_counts == rep.histogram.block_counts);
    CHECK(hist.overflow == 1.0);
    CHECK(hist.samples == 8.0);

    CHECK_THROWS_AS(report::read_report_summary(
                        temp_file("granular_no_such_report.json")),
                    ConfigError);

    const std::string broken = temp_file("granular_broken_report.json");
    report::write_text(broken, "{ not json\n");
    CHECK_THROWS_AS(report::read_report_summary(broken), ConfigError);

    const std::string partial = temp_file("granular_partial_report.json");
    report::write_text(partial, "{\"model\": \"diffusion\"}\n");
    CHECK_THROWS_AS(report::read_report_summary(partial), ConfigError);
    CHECK_THROWS_AS(report::read_report_histogram(partial), ConfigError);
}

TEST_CASE("grid artifacts round trip through csv") {
    moments::MomentGrid grid;
    grid.set(0.0, moments::MomentInterval::exact(1.0));
    grid.set(0.5, moments::MomentInterval::from_bounds(0.9, 1.15));
    grid.set(1.0, moments::MomentInterval::exact(3.0));
    grid.set(1.5, moments::MomentInterval::from_bounds(3.0, 8.0));

    const std::string csv =
        report::grid_csv(grid, "model=diffusion e=0.8 hash=12ab");
    const auto lines = split_lines(csv);
    REQUIRE(lines.size() == 6);
    CHECK(lines[0] == "# model=diffusion e=0.8 hash=12ab");
    CHECK(lines[1] == "p,m_lo,m_hi");

    const std::string path = temp_file("granular_grid_roundtrip.csv");
    report::write_text(path, csv);
    const auto gf = report::read_grid_csv(path);
    CHECK(gf.model == "diffusion");
    CHECK(gf.e == 0.8);
    REQUIRE(gf.grid.size() == 4);
    for (double p : {0.0, 0.5, 1.0, 1.5}) {
        CHECK(gf.grid.at(p).lo() ==
              doctest::Approx(grid.at(p).lo()).epsilon(1e-12));
        CHECK(gf.grid.at(p).hi() ==
              doctest::Approx(grid.at(p).hi()).epsilon(1e-12));
    }

    CHECK_THROWS_AS(
        report::read_grid_csv(temp_file("granular_no_such_grid.csv")),
        ConfigError);

    const std::string truncated = temp_file("granular_truncated_grid.csv");
    report::write_text(truncated, "p,m_lo,m_hi\n1,2\n");
    CHECK_THROWS_AS(report::read_grid_csv(truncated), ConfigError);

    const std::string garbled = temp_file("granular_garbled_grid.csv");
    report::write_text(garbled, "p,m_lo,m_hi\nx,1,2\n");
    CHECK_THROWS_AS(report::read_grid_csv(garbled), ConfigError);
}

TEST_CASE("comparison verdicts flag moments that escape the grid") {
    report::ReportSummary rep;
    rep.model = "diffusion";
    rep.e = 0.8;
    rep.values[2] = 3.0;  // p = 1
    rep.values[3] = 5.0;  // p = 1.5
    rep.values[4] = 14.0; // p = 2
    rep.errors[2] = 0.1;
    rep.errors[3] = 0.1;
    rep.errors[4] = 0.3;

    report::GridFile gf;
    gf.model = "diffusion";
    gf.e = 0.8;
    gf.grid.set(1.0, moments::MomentInterval::from_bounds(2.9, 3.1));
    gf.grid.set(1.5, moments::MomentInterval::from_bounds(4.0, 6.0));
    gf.grid.set(2.0, moments::MomentInterval::from_bounds(10.0, 20.0));

    const auto all = report::compare_report_to_grid(rep, gf, 6.0);
    CHECK(all.pass);
    CHECK(all.detail.at("checked").get<int>() == 3);
    for (const auto &row : all.detail.at("rows")) {
        CHECK(row.at("inside").get<bool>());
    }

    auto outlier = rep;
    outlier.values[4] = 25.0;
    const auto fail = report::compare_report_to_grid(outlier, gf, 6.0);
    CHECK(!fail.pass);
    for (const auto &row : fail.detail.at("rows")) {
        const bool inside = row.at("inside").get<bool>();
        CHECK(inside == (row.at("p").get<double>() != 2.0));
    }

    // Orders beyond the reliability limit are excluded from the verdict.
    const auto limited = report::compare_report_to_grid(outlier, gf, 1.6);
    CHECK(limited.pass);
    CHECK(limited.detail.at("checked").get<int>() == 2);

    // A hair over the upper endpoint still counts as inside; interval
    // endpoints carry serialization slack.
    auto grazing = rep;
    grazing.values[2] = 3.1 * (1.0 + 5e-10);
    CHECK(report::compare_report_to_grid(grazing, gf, 6.0).pass);

    report::GridFile sparse = gf;
    sparse.grid = moments::MomentGrid();
    sparse.grid.set(1.0, moments::MomentInterval::from_bounds(2.9, 3.1));
    sparse.grid.set(2.0, moments::MomentInterval::from_bounds(10.0, 20.0));
    const auto partial = report::compare_report_to_grid(rep, sparse, 6.0);
    CHECK(partial.detail.at("checked").get<int>() == 2);

    report::GridFile empty;
    empty.model = "diffusion";
    empty.e = 0.8;
    CHECK_THROWS_AS(report::compare_report_to_grid(rep, empty, 6.0),
                    ConfigError);

    auto wrong_model = gf;
    wrong_model.model = "shear";
    CHECK_THROWS_AS(report::compare_report_to_grid(rep, wrong_model, 6.0),
                    ConfigError);

    auto wrong_e = gf;
    wrong_e.e = 0.9;
    CHECK_THROWS_AS(report::compare_report_to_grid(rep, wrong_e, 6.0),
                    ConfigError);

    CHECK_THROWS_AS(report::compare_report_to_grid(rep, gf, 0.4),
                    ConfigError);
}

TEST_CASE("csv tables carry headers and typed rows") {
    const std::string kcsv =
        report::kernel_csv({{0.75, 2.0, 0.5, 1e-15}});
    const auto klines = split_lines(kcsv);
    REQUIRE(klines.size() == 2);
    CHECK(klines[0] == "beta,p,gamma_p,err_estimate");
    CHECK(klines[1] == "0.75,2,0.5," + report::format_double(1e-15));

    const std::vector<dsmc::MomentRow> rows = {{1.0, 3.0, 0.25, true},
                                               {8.0, 120.0, 90.0, false}};
    const std::string mcsv = report::moment_table_csv(rows, "n=1000");
    const auto mlines = split_lines(mcsv);
    REQUIRE(mlines.size() == 4);
    CHECK(mlines[0] == "# n=1000");
    CHECK(mlines[1] == "p,value,std_error,reliable");
    CHECK(mlines[2] == "1,3,0.25,1");
    CHECK(mlines[3] == "8,120,90,0");

    moments::MomentGrid grid;
    grid.set(0.0, moments::MomentInterval::exact(1.0));
    grid.set(0.5, moments::MomentInterval::exact(1.0));
    grid.set(1.0, moments::MomentInterval::exact(1.0));
    grid.set(1.5, moments::MomentInterval::from_bounds(1.0, 2.0));
    grid.set(2.0, moments::MomentInterval::from_bounds(1.0, 4.0));
    const auto nm = moments::normalize(grid, 1.0, 1.0);
    const std::string ncsv = report::normalized_csv(nm, "a=1 b=1");
    const auto nlines = split_lines(ncsv);
    REQUIRE(nlines.size() == 7);
    CHECK(nlines[0] == "# a=1 b=1");
    CHECK(nlines[1] == "p,a,b,z_lo,z_hi");
    // z_0 = m_0 / Gamma(1) = 1 exactly.
    CHECK(nlines[2] == "0,1,1,1,1");
}

} // TEST_SUITE
