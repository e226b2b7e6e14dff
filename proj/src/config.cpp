#include "granular/config.hpp"

#include "granular/errors.hpp"
#include "granular/report.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <vector>

namespace granular::config {

namespace {

std::string trim(const std::string &s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return "";
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

struct Entry {
    int line;
    std::string key;
    std::string value;
};

[[noreturn]] void bad_value(const Entry &e, const char *type) {
    std::ostringstream os;
    os << "config line " << e.line << ": invalid " << type << " for '"
       << e.key << "': '" << e.value << "'";
    throw ConfigError(os.str());
}

double as_double(const Entry &e) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(e.value, &pos);
        if (pos != e.value.size()) {
            bad_value(e, "number");
        }
        return x;
    } catch (const ConfigError &) {
        throw;
    } catch (const std::exception &) {
        bad_value(e, "number");
    }
}

long long as_int(const Entry &e) {
    try {
        std::size_t pos = 0;
        const long long x = std::stoll(e.value, &pos);
        if (pos != e.value.size()) {
            bad_value(e, "integer");
        }
        return x;
    } catch (const ConfigError &) {
        throw;
    } catch (const std::exception &) {
        bad_value(e, "integer");
    }
}

std::uint64_t as_u64(const Entry &e) {
    try {
        std::size_t pos = 0;
        const unsigned long long x = std::stoull(e.value, &pos);
        if (pos != e.value.size() || !e.value.empty() && e.value[0] == '-') {
            bad_value(e, "unsigned integer");
        }
        return x;
    } catch (const ConfigError &) {
        throw;
    } catch (const std::exception &) {
        bad_value(e, "unsigned integer");
    }
}

void apply(ExperimentConfig &cfg, const Entry &e) {
    if (e.key == "model") {
        try {
            cfg.model = bounds::forcing_model_from_string(e.value);
        } catch (const DomainError &) {
            bad_value(e, "forcing model");
        }
    } else if (e.key == "e") {
        cfg.e = as_double(e);
    } else if (e.key == "seed") {
        cfg.seed = as_u64(e);
    } else if (e.key == "mu") {
        cfg.mu = as_double(e);
    } else if (e.key == "lambda") {
        cfg.lambda = as_double(e);
    } else if (e.key == "kappa") {
        cfg.kappa = as_double(e);
    } else if (e.key == "n") {
        const long long v = as_int(e);
        if (v < 2) {
            bad_value(e, "particle count");
        }
        cfg.n = static_cast<std::size_t>(v);
    } else if (e.key == "temperature") {
        cfg.temperature = as_double(e);
    } else if (e.key == "dt") {
        cfg.dt = as_double(e);
    } else if (e.key == "t_burn") {
        cfg.t_burn = as_double(e);
    } else if (e.key == "t_avg") {
        cfg.t_avg = as_double(e);
    } else if (e.key == "sample_every") {
        cfg.sample_every = static_cast<int>(as_int(e));
    } else if (e.key == "blocks") {
        cfg.blocks = static_cast<int>(as_int(e));
    } else if (e.key == "bins") {
        cfg.bins = static_cast<int>(as_int(e));
    } else if (e.key == "p_max") {
        cfg.p_max = as_double(e);
    } else if (e.key == "grid_p_max") {
        cfg.grid_p_max = as_double(e);
    } else if (e.key == "s_min") {
        cfg.s_min = as_double(e);
    } else if (e.key == "s_max") {
        cfg.s_max = as_double(e);
    } else if (e.key == "b") {
        cfg.b = as_double(e);
    } else if (e.key == "fit_percentile_lo") {
        cfg.fit_percentile_lo = as_double(e);
    } else if (e.key == "fit_percentile_hi") {
        cfg.fit_percentile_hi = as_double(e);
    } else if (e.key == "bootstrap") {
        cfg.bootstrap = static_cast<int>(as_int(e));
    } else if (e.key == "threads") {
        cfg.threads = static_cast<int>(as_int(e));
    } else if (e.key == "out_dir") {
        cfg.out_dir = e.value;
    } else {
        std::ostringstream os;
        os << "config line " << e.line << ": unknown key '" << e.key << "'";
        throw ConfigError(os.str());
    }
}

} // namespace

bounds::ForcingParams ExperimentConfig::forcing() const {
    return {mu, lambda, kappa};
}

RestitutionParams ExperimentConfig::restitution() const {
    const RestitutionParams r{e};
    r.validate();
    return r;
}

dsmc::RunOptions ExperimentConfig::run_options() const {
    dsmc::RunOptions opts;
    opts.dt = dt;
    opts.t_burn = t_burn;
    opts.t_avg = t_avg;
    opts.p_max = p_max;
    opts.sample_every = sample_every;
    opts.blocks = blocks;
    opts.bins = bins;
    opts.threads = threads;
    opts.fit.percentile_lo = fit_percentile_lo;
    opts.fit.percentile_hi = fit_percentile_hi;
    opts.fit.s_min = s_min;
    opts.fit.s_max = s_max;
    opts.fit.bootstrap = bootstrap;
    opts.fit.seed = seed;
    return opts;
}

void ExperimentConfig::validate() const {
    restitution();
    forcing().validate(model);
    auto fail = [](const std::string &msg) { throw ConfigError(msg); };
    if (n < 2) {
        fail("config: n must be at least 2");
    }
    if (!(temperature >= 0.0)) {
        fail("config: temperature must be nonnegative");
    }
    if (!(dt > 0.0) || !(t_avg > 0.0) || t_burn < 0.0) {
        fail("config: need dt > 0, t_avg > 0, t_burn >= 0");
    }
    if (sample_every < 1 || blocks < 4 || bins < 16) {
        fail("config: need sample_every >= 1, blocks >= 4, bins >= 16");
    }
    if (!(p_max >= 1.0) || !(grid_p_max >= 1.0)) {
        fail("config: moment orders p_max and grid_p_max must be >= 1");
    }
    if (!(s_min > 0.0) || !(s_max > s_min)) {
        fail("config: tail-order scan needs 0 < s_min < s_max");
    }
    if (!(b > 0.0)) {
        fail("config: normalization shift b must be positive");
    }
    if (!(fit_percentile_lo > 0.0) ||
        !(fit_percentile_hi > fit_percentile_lo) ||
        !(fit_percentile_hi < 100.0)) {
        fail("config: fit percentiles must satisfy 0 < lo < hi < 100");
    }
    if (bootstrap < 0 || threads < 1) {
        fail("config: need bootstrap >= 0 and threads >= 1");
    }
}

ExperimentConfig default_config(bounds::ForcingModel model) {
    ExperimentConfig cfg;
    cfg.model = model;
    switch (model) {
    case bounds::ForcingModel::PureDiffusion:
        cfg.mu = 1.0;
        cfg.dt = 0.01;
        cfg.t_burn = 30.0;
        cfg.t_avg = 30.0;
        break;
    case bounds::ForcingModel::DiffusionFriction:
        cfg.mu = 1.0;
        cfg.lambda = 1.0;
        cfg.dt = 0.01;
        cfg.t_burn = 30.0;
        cfg.t_avg = 30.0;
        cfg.b = 1.4;
        break;
    case bounds::ForcingModel::NegativeFriction:
        cfg.kappa = 0.1;
        cfg.dt = 0.05;
        cfg.t_burn = 100.0;
        cfg.t_avg = 100.0;
        break;
    case bounds::ForcingModel::ShearFlow:
        cfg.kappa = 1.0;
        cfg.dt = 0.02;
        cfg.t_burn = 40.0;
        cfg.t_avg = 40.0;
        break;
    }
    return cfg;
}

ExperimentConfig parse_config(std::istream &in) {
    std::vector<Entry> entries;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') {
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            std::ostringstream os;
            os << "config line " << line_no << ": expected key = value";
            throw ConfigError(os.str());
        }
        Entry e;
        e.line = line_no;
        e.key = trim(t.substr(0, eq));
        e.value = trim(t.substr(eq + 1));
        if (e.key.empty()) {
            std::ostringstream os;
            os << "config line " << line_no << ": empty key";
            throw ConfigError(os.str());
        }
        entries.push_back(std::move(e));
    }

    bounds::ForcingModel model = bounds::ForcingModel::PureDiffusion;
    for (const Entry &e : entries) {
        if (e.key == "model") {
            try {
                model = bounds::forcing_model_from_string(e.value);
            } catch (const DomainError &) {
                bad_value(e, "forcing model");
            }
        }
    }
    ExperimentConfig cfg = default_config(model);
    for (const Entry &e : entries) {
        apply(cfg, e);
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config '" + path + "'");
    }
    return parse_config(in);
}

std::string canonical_string(const ExperimentConfig &cfg) {
    std::ostringstream out;
    auto put = [&out](const char *key, const std::string &val) {
        out << key << '=' << val << '\n';
    };
    auto putd = [&](const char *key, double val) {
        put(key, report::format_double(val));
    };
    putd("b", cfg.b);
    put("bins", std::to_string(cfg.bins));
    put("blocks", std::to_string(cfg.blocks));
    put("bootstrap", std::to_string(cfg.bootstrap));
    putd("dt", cfg.dt);
    putd("e", cfg.e);
    putd("fit_percentile_hi", cfg.fit_percentile_hi);
    putd("fit_percentile_lo", cfg.fit_percentile_lo);
    putd("grid_p_max", cfg.grid_p_max);
    putd("kappa", cfg.kappa);
    putd("lambda", cfg.lambda);
    put("model", bounds::to_string(cfg.model));
    putd("mu", cfg.mu);
    put("n", std::to_string(cfg.n));
    putd("p_max", cfg.p_max);
    putd("s_max", cfg.s_max);
    putd("s_min", cfg.s_min);
    put("sample_every", std::to_string(cfg.sample_every));
    put("seed", std::to_string(cfg.seed));
    putd("t_avg", cfg.t_avg);
    putd("t_burn", cfg.t_burn);
    putd("temperature", cfg.temperature);
    put("threads", std::to_string(cfg.threads));
    return out.str();
}

std::uint64_t fnv1a64(const std::string &text) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::uint64_t config_hash(const ExperimentConfig &cfg) {
    return fnv1a64(canonical_string(cfg));
}

} // namespace granular::config
