#include "granular/report.hpp"

#include "granular/errors.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace granular::report {

namespace {

double csv_number(const std::string &tok, const std::string &path) {
    try {
        return std::stod(tok);
    } catch (const std::exception &) {
        throw ConfigError(path + ": malformed number '" + tok + "'");
    }
}

} // namespace

std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

ordered_json to_json(const tailfit::TailFit &fit) {
    return ordered_json{{"s", fit.s},
                        {"r", fit.r},
                        {"log_c", fit.log_c},
                        {"s_ci", {fit.s_lo, fit.s_hi}},
                        {"r_ci", {fit.r_lo, fit.r_hi}},
                        {"window", {fit.v_lo, fit.v_hi}},
                        {"bins_used", fit.bins_used},
                        {"residual", fit.residual},
                        {"ok", fit.ok},
                        {"message", fit.message}};
}

ordered_json to_json(const moments::TailEstimate &est) {
    return ordered_json{{"s", est.s},
                        {"r_star", est.r_star},
                        {"conclusive", est.conclusive},
                        {"one_sided", est.one_sided},
                        {"residual", est.residual},
                        {"p_from", est.p_from},
                        {"p_to", est.p_to}};
}

ordered_json to_json(const moments::GrowthFit &fit) {
    return ordered_json{{"holds", fit.holds}, {"q", fit.q},
                        {"Q", fit.Q},         {"c", fit.c},
                        {"C", fit.C},         {"drift_lo", fit.drift_lo},
                        {"drift_hi", fit.drift_hi},
                        {"points", fit.points}};
}

ordered_json to_json(const dsmc::SteadyStateReport &rep) {
    ordered_json moments = ordered_json::array();
    for (const dsmc::MomentRow &row : rep.moments) {
        moments.push_back(ordered_json{{"p", row.p},
                                       {"value", row.value},
                                       {"std_error", row.std_error},
                                       {"reliable", row.reliable}});
    }
    ordered_json j{
        {"model", rep.model},
        {"restitution_e", rep.e},
        {"params",
         {{"mu", rep.mu}, {"lambda", rep.lambda}, {"kappa", rep.kappa}}},
        {"run",
         {{"n", rep.n},
          {"seed", rep.seed},
          {"dt", rep.dt},
          {"t_burn", rep.t_burn},
          {"t_avg", rep.t_avg},
          {"threads", rep.threads},
          {"time_end", rep.time_end}}},
        {"moments", std::move(moments)},
        {"histogram",
         {{"edges", rep.histogram.edges},
          {"counts", rep.histogram.counts},
          {"block_counts", rep.histogram.block_counts},
          {"overflow", rep.histogram.overflow},
          {"samples", rep.histogram.samples}}},
        {"tail_fit", to_json(rep.tail)},
        {"moment_scan",
         rep.moment_scan ? to_json(*rep.moment_scan) : ordered_json(nullptr)},
        {"energy_balance",
         {{"forcing_power", rep.energy.forcing_power},
          {"collision_power", rep.energy.collision_power},
          {"residual", rep.energy.residual},
          {"residual_sigma", rep.energy.residual_sigma},
          {"balanced", rep.energy.balanced}}},
        {"stationarity",
         {{"m1_drift", rep.m1_drift},
          {"m1_drift_sigma", rep.m1_drift_sigma},
          {"stationary", rep.stationary}}},
        {"collision_stats",
         {{"candidates", rep.candidates},
          {"collisions", rep.collisions},
          {"majorant_overflows", rep.majorant_overflows},
          {"acceptance_rate", rep.acceptance_rate},
          {"mean_candidate_u", rep.mean_candidate_u},
          {"u_max_final", rep.u_max_final},
          {"recenter_max", rep.recenter_max},
          {"reliability_ceiling", rep.reliability_ceiling}}}};
    return j;
}

std::string grid_csv(const moments::MomentGrid &grid,
                     const std::string &meta) {
    std::ostringstream out;
    if (!meta.empty()) {
        out << "# " << meta << "\n";
    }
    out << "p,m_lo,m_hi\n";
    for (double p : grid.indices()) {
        const moments::MomentInterval &iv = grid.at(p);
        out << format_double(p) << ',' << format_double(iv.lo()) << ','
            << format_double(iv.hi()) << "\n";
    }
    return out.str();
}

std::string normalized_csv(const moments::NormalizedMoments &z,
                           const std::string &meta) {
    std::ostringstream out;
    if (!meta.empty()) {
        out << "# " << meta << "\n";
    }
    out << "p,a,b,z_lo,z_hi\n";
    for (double p : z.indices()) {
        const moments::MomentInterval &iv = z.at(p);
        out << format_double(p) << ',' << format_double(z.a) << ','
            << format_double(z.b) << ',' << format_double(iv.lo()) << ','
            << format_double(iv.hi()) << "\n";
    }
    return out.str();
}

std::string kernel_csv(const std::vector<KernelRow> &rows) {
    std::ostringstream out;
    out << "beta,p,gamma_p,err_estimate\n";
    for (const KernelRow &r : rows) {
        out << format_double(r.beta) << ',' << format_double(r.p) << ','
            << format_double(r.gamma) << ',' << format_double(r.err) << "\n";
    }
    return out.str();
}

std::string moment_table_csv(const std::vector<dsmc::MomentRow> &rows,
                             const std::string &meta) {
    std::ostringstream out;
    if (!meta.empty()) {
        out << "# " << meta << "\n";
    }
    out << "p,value,std_error,reliable\n";
    for (const dsmc::MomentRow &r : rows) {
        out << format_double(r.p) << ',' << format_double(r.value) << ','
            << format_double(r.std_error) << ',' << (r.reliable ? 1 : 0)
            << "\n";
    }
    return out.str();
}

void write_text(const std::string &path, const std::string &text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ConfigError("cannot open '" + path + "' for writing");
    }
    out << text;
    if (!out.flush()) {
        throw ConfigError("write failed for '" + path + "'");
    }
}

ReportSummary read_report_summary(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open report '" + path + "'");
    }
    ordered_json j;
    try {
        in >> j;
    } catch (const std::exception &ex) {
        throw ConfigError("cannot parse report '" + path +
                          "': " + ex.what());
    }
    ReportSummary sum;
    try {
        sum.model = j.at("model").get<std::string>();
        sum.e = j.at("restitution_e").get<double>();
        for (const auto &row : j.at("moments")) {
            const double p = row.at("p").get<double>();
            const int key = moments::MomentGrid::key(p);
            sum.values[key] = row.at("value").get<double>();
            sum.errors[key] = row.at("std_error").get<double>();
        }
    } catch (const std::exception &ex) {
        throw ConfigError("report '" + path +
                          "' is missing fields: " + ex.what());
    }
    return sum;
}

tailfit::SpeedHistogram read_report_histogram(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open report '" + path + "'");
    }
    ordered_json j;
    try {
        in >> j;
    } catch (const std::exception &ex) {
        throw ConfigError("cannot parse report '" + path +
                          "': " + ex.what());
    }
    tailfit::SpeedHistogram hist;
    try {
        const auto &h = j.at("histogram");
        hist.edges = h.at("edges").get<std::vector<double>>();
        hist.counts = h.at("counts").get<std::vector<double>>();
        hist.block_counts =
            h.at("block_counts").get<std::vector<std::vector<double>>>();
        hist.overflow = h.at("overflow").get<double>();
        hist.samples = h.at("samples").get<double>();
    } catch (const std::exception &ex) {
        throw ConfigError("report '" + path +
                          "' has no usable histogram: " + ex.what());
    }
    return hist;
}

GridFile read_grid_csv(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open grid '" + path + "'");
    }
    GridFile gf;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line == "p,m_lo,m_hi") {
            continue;
        }
        if (line[0] == '#') {
            std::istringstream meta(line.substr(1));
            std::string tok;
            while (meta >> tok) {
                const auto eq = tok.find('=');
                if (eq == std::string::npos) {
                    continue;
                }
                const std::string key = tok.substr(0, eq);
                const std::string val = tok.substr(eq + 1);
                if (key == "model") {
                    gf.model = val;
                } else if (key == "e") {
                    gf.e = csv_number(val, path);
                }
            }
            continue;
        }
        std::istringstream row(line);
        std::string pa, lo, hi;
        if (!std::getline(row, pa, ',') || !std::getline(row, lo, ',') ||
            !std::getline(row, hi)) {
            throw ConfigError(path + ": malformed grid row '" + line + "'");
        }
        const double p = csv_number(pa, path);
        const double m_lo = csv_number(lo, path);
        const double m_hi = csv_number(hi, path);
        gf.grid.set(p, moments::MomentInterval::from_bounds(m_lo, m_hi));
    }
    return gf;
}

CompareResult compare_report_to_grid(const ReportSummary &rep,
                                     const GridFile &grid, double p_limit) {
    if (grid.grid.size() == 0) {
        throw ConfigError("grid artifact is empty");
    }
    if (grid.model.empty() || rep.model != grid.model ||
        std::abs(rep.e - grid.e) > 1e-12) {
        throw ConfigError("report and grid reference different (model, e): "
                          "report " +
                          rep.model + "/e=" + format_double(rep.e) +
                          " vs grid " + grid.model +
                          "/e=" + format_double(grid.e));
    }
    CompareResult res;
    ordered_json rows = ordered_json::array();
    int checked = 0;
    bool all_inside = true;
    for (const auto &[key, value] : rep.values) {
        const double p = 0.5 * key;
        if (p > p_limit + 1e-9 || !grid.grid.has(p)) {
            continue;
        }
        const moments::MomentInterval &iv = grid.grid.at(p);
        const double lo = iv.lo() * (1.0 - 1e-9);
        const double hi = iv.hi() * (1.0 + 1e-9);
        const bool inside = value >= lo && value <= hi;
        all_inside = all_inside && inside;
        ++checked;
        rows.push_back(ordered_json{{"p", p},
                                    {"value", value},
                                    {"m_lo", iv.lo()},
                                    {"m_hi", iv.hi()},
                                    {"inside", inside}});
    }
    if (checked == 0) {
        throw ConfigError("report and grid share no moment orders to check");
    }
    res.pass = all_inside;
    res.detail = ordered_json{{"model", rep.model},
                              {"e", rep.e},
                              {"p_limit", p_limit},
                              {"checked", checked},
                              {"pass", res.pass},
                              {"rows", std::move(rows)}};
    return res;
}

} // namespace granular::report
