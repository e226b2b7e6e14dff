#pragma once

#include "granular/dsmc.hpp"
#include "granular/moment_grid.hpp"
#include "granular/normalized_moments.hpp"

#include <json.hpp>

#include <map>
#include <string>
#include <vector>

// Artifact serialization. JSON reports use nlohmann's ordered_json and CSV
// numbers are printed with %.17g, so identical inputs serialize to identical
// bytes.

namespace granular::report {

inline constexpr const char *kVersion = "0.1.0";

using ordered_json = nlohmann::ordered_json;

ordered_json to_json(const tailfit::TailFit &fit);
ordered_json to_json(const moments::TailEstimate &est);
ordered_json to_json(const moments::GrowthFit &fit);
ordered_json to_json(const dsmc::SteadyStateReport &rep);

std::string format_double(double x);

// "p,m_lo,m_hi" rows; `meta` goes into a leading "# key=value ..." comment
std::string grid_csv(const moments::MomentGrid &grid, const std::string &meta);

// "p,a,b,z_lo,z_hi" rows
std::string normalized_csv(const moments::NormalizedMoments &z,
                           const std::string &meta);

// "beta,p,gamma_p,err_estimate" rows
struct KernelRow {
    double beta, p, gamma, err;
};
std::string kernel_csv(const std::vector<KernelRow> &rows);

// "p,value,std_error,reliable" rows
std::string moment_table_csv(const std::vector<dsmc::MomentRow> &rows,
                             const std::string &meta);

void write_text(const std::string &path, const std::string &text);

// Read-back halves used by the compare pipeline.
struct ReportSummary {
    std::string model;
    double e = 0.0;
    std::map<int, double> values;
    std::map<int, double> errors;
};
ReportSummary read_report_summary(const std::string &path);

// Full histogram including per-block counts, for re-analysis with different
// fit options.
tailfit::SpeedHistogram read_report_histogram(const std::string &path);

struct GridFile {
    std::string model;
    double e = 0.0;
    moments::MomentGrid grid;
};
GridFile read_grid_csv(const std::string &path);

// Per-p containment verdicts of empirical moments against a propagated grid.
struct CompareResult {
    bool pass = false;
    ordered_json detail;
};
CompareResult compare_report_to_grid(const ReportSummary &rep,
                                     const GridFile &grid, double p_limit);

} // namespace granular::report
