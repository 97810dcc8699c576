#pragma once

#include <algorithm>
#include <cstdint>
#include <istream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "wrcm/connection.hpp"
#include "wrcm/weights.hpp"

// Run configuration: a flat INI-style file with [model] and [run] sections.
// Unknown keys are rejected so typos cannot silently change an experiment.

namespace wrcm {

class ConfigError : public std::runtime_error {
  public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

enum class EpsMode {
    EdgeCount,      // eps = expected missed edges touching the unit cube
    DegreeFraction, // eps = missed fraction of the expected typical degree
};

struct RunConfig {
    // [model]
    int d = 1;
    double a = 0.0;
    double alpha = 2.0;
    ProfileFamily profile = ProfileFamily::TruncatedPareto;
    WeightFamily family = WeightFamily::PolynomialLeft;
    double p = 1.0;
    double rho = 2.0;
    double b = 0.5;
    double beta = 5.0;
    double w0 = 1.0;

    // [run]
    int k = 0;
    std::vector<double> s_grid;
    std::size_t replications = 1;
    double eps = 1e-3;
    EpsMode eps_mode = EpsMode::EdgeCount;
    std::uint64_t master_seed = 0;
    int threads = 1;
    double eta = -1.0;       // check experiment; <0 means "use recommendation"
    double K = -1.0;         // check experiment
    double w_planted = -1.0; // planted experiment
    int subbox_m = 4;
    bool dump_cloud = false; // write cloud_points.csv (replication 0 per s)
    std::string experiment;  // optional; must match the invoked subcommand

    WeightLaw weight_law() const {
        switch (family) {
            case WeightFamily::PolynomialLeft: return WeightLaw::polynomial_left(p, rho, b, beta);
            case WeightFamily::StretchedExponentialLeft:
                return WeightLaw::stretched_exponential_left(p, rho, b, beta);
            case WeightFamily::PointMass: return WeightLaw::point_mass(w0);
        }
        throw ConfigError("unknown weight family");
    }

    ConnectionSpec connection_spec() const { return ConnectionSpec(a, alpha, profile); }

    void validate() const {
        if (d < 1 || d > 3) throw ConfigError("model.d must be 1, 2 or 3");
        if (!(alpha > 1.0)) throw ConfigError("model.alpha must exceed 1");
        if (!(a >= 0.0)) throw ConfigError("model.a must be >= 0");
        if (family != WeightFamily::PointMass && !(beta > a * alpha))
            throw ConfigError("constraint violated: model.beta must exceed model.a * model.alpha");
        if (k < 0 || k > 20) throw ConfigError("run.k must lie in 0..20");
        if (s_grid.empty()) throw ConfigError("run.s (or run.s_grid) is required");
        for (double s : s_grid)
            if (!(s > 0.5)) throw ConfigError("run intensities must exceed 1/2");
        if (replications < 1) throw ConfigError("run.replications must be >= 1");
        if (!(eps > 0.0)) throw ConfigError("run.eps must be positive");
        if (threads < 1) throw ConfigError("run.threads must be >= 1");
        if (subbox_m < 2) throw ConfigError("run.subbox_m must be >= 2");
        weight_law();      // family-specific invariants
        connection_spec(); // profile invariants incl. normalization
    }

    // Canonical resolved text: every key in fixed order; identical configs
    // hash identically regardless of formatting in the source file.
    std::string canonical_text() const;
    std::uint64_t hash() const {
        std::uint64_t h = 0xcbf29ce484222325ull;
        for (unsigned char c : canonical_text()) {
            h ^= c;
            h *= 0x100000001b3ull;
        }
        return h;
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

inline double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': cannot parse '" + value + "' as a number");
    }
}

inline long long parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': cannot parse '" + value + "' as an integer");
    }
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const unsigned long long v = std::stoull(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': cannot parse '" + value + "' as an unsigned integer");
    }
}

inline std::vector<double> parse_grid(const std::string& key, const std::string& value) {
    std::vector<double> grid;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) grid.push_back(parse_double(key, item));
    }
    if (grid.empty()) throw ConfigError("key '" + key + "': empty grid");
    return grid;
}

} // namespace detail

// Apply one "section.key=value" assignment.
inline void apply_setting(RunConfig& config, const std::string& full_key,
                          const std::string& raw_value) {
    using detail::parse_double;
    using detail::parse_grid;
    using detail::parse_int;
    using detail::parse_u64;
    const std::string value = detail::trim(raw_value);
    if (full_key == "model.d") config.d = static_cast<int>(parse_int(full_key, value));
    else if (full_key == "model.a") config.a = parse_double(full_key, value);
    else if (full_key == "model.alpha") config.alpha = parse_double(full_key, value);
    else if (full_key == "model.profile") {
        if (value == "truncated_pareto") config.profile = ProfileFamily::TruncatedPareto;
        else if (value == "smooth_pareto") config.profile = ProfileFamily::SmoothPareto;
        else throw ConfigError("model.profile: unknown family '" + value + "'");
    } else if (full_key == "model.family") {
        if (value == "polynomial") config.family = WeightFamily::PolynomialLeft;
        else if (value == "stretched_exponential") config.family = WeightFamily::StretchedExponentialLeft;
        else if (value == "point_mass") config.family = WeightFamily::PointMass;
        else throw ConfigError("model.family: unknown family '" + value + "'");
    } else if (full_key == "model.p") config.p = parse_double(full_key, value);
    else if (full_key == "model.rho") config.rho = parse_double(full_key, value);
    else if (full_key == "model.b") config.b = parse_double(full_key, value);
    else if (full_key == "model.beta") config.beta = parse_double(full_key, value);
    else if (full_key == "model.w0") config.w0 = parse_double(full_key, value);
    else if (full_key == "run.k") config.k = static_cast<int>(parse_int(full_key, value));
    else if (full_key == "run.s") config.s_grid = {parse_double(full_key, value)};
    else if (full_key == "run.s_grid") config.s_grid = parse_grid(full_key, value);
    else if (full_key == "run.replications")
        config.replications = static_cast<std::size_t>(parse_int(full_key, value));
    else if (full_key == "run.eps") config.eps = parse_double(full_key, value);
    else if (full_key == "run.eps_mode") {
        if (value == "edge_count") config.eps_mode = EpsMode::EdgeCount;
        else if (value == "degree_fraction") config.eps_mode = EpsMode::DegreeFraction;
        else throw ConfigError("run.eps_mode: expected edge_count or degree_fraction");
    } else if (full_key == "run.master_seed") config.master_seed = parse_u64(full_key, value);
    else if (full_key == "run.threads") config.threads = static_cast<int>(parse_int(full_key, value));
    else if (full_key == "run.eta") config.eta = parse_double(full_key, value);
    else if (full_key == "run.K") config.K = parse_double(full_key, value);
    else if (full_key == "run.w_planted") config.w_planted = parse_double(full_key, value);
    else if (full_key == "run.subbox_m") config.subbox_m = static_cast<int>(parse_int(full_key, value));
    else if (full_key == "run.dump_cloud") config.dump_cloud = parse_int(full_key, value) != 0;
    else if (full_key == "run.experiment") config.experiment = value;
    else throw ConfigError("unknown config key '" + full_key + "'");
}

inline RunConfig parse_config(std::istream& input) {
    RunConfig config;
    std::string line, section;
    std::size_t line_number = 0;
    while (std::getline(input, line)) {
        ++line_number;
        const auto comment = line.find('#');
        if (comment != std::string::npos) line = line.substr(0, comment);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("line " + std::to_string(line_number) + ": malformed section");
            section = detail::trim(line.substr(1, line.size() - 2));
            if (section != "model" && section != "run")
                throw ConfigError("unknown section '" + section + "'");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_number) + ": expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        if (section.empty())
            throw ConfigError("line " + std::to_string(line_number) + ": key outside a section");
        apply_setting(config, section + "." + key, line.substr(eq + 1));
    }
    return config;
}

inline RunConfig parse_config_string(const std::string& text) {
    std::istringstream stream(text);
    return parse_config(stream);
}

// "--set section.key=value" override.
inline void apply_override(RunConfig& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos)
        throw ConfigError("override '" + assignment + "': expected key=value");
    apply_setting(config, detail::trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

inline std::string RunConfig::canonical_text() const {
    std::ostringstream out;
    out.precision(17);
    out << "[model]\n";
    out << "d = " << d << "\n";
    out << "a = " << a << "\n";
    out << "alpha = " << alpha << "\n";
    out << "profile = "
        << (profile == ProfileFamily::TruncatedPareto ? "truncated_pareto" : "smooth_pareto")
        << "\n";
    out << "family = "
        << (family == WeightFamily::PolynomialLeft
                ? "polynomial"
                : family == WeightFamily::StretchedExponentialLeft ? "stretched_exponential"
                                                                   : "point_mass")
        << "\n";
    if (family == WeightFamily::PointMass) {
        out << "w0 = " << w0 << "\n";
    } else {
        out << "p = " << p << "\n";
        out << "rho = " << rho << "\n";
        out << "b = " << b << "\n";
        out << "beta = " << beta << "\n";
    }
    out << "[run]\n";
    out << "k = " << k << "\n";
    out << "s_grid = ";
    for (std::size_t i = 0; i < s_grid.size(); ++i) out << (i ? "," : "") << s_grid[i];
    out << "\n";
    out << "replications = " << replications << "\n";
    out << "eps = " << eps << "\n";
    out << "eps_mode = " << (eps_mode == EpsMode::EdgeCount ? "edge_count" : "degree_fraction")
        << "\n";
    out << "master_seed = " << master_seed << "\n";
    // threads deliberately omitted: the worker-pool size never changes the
    // outputs, so it must not change the config hash either.
    if (eta >= 0.0) out << "eta = " << eta << "\n";
    if (K >= 0.0) out << "K = " << K << "\n";
    if (w_planted >= 0.0) out << "w_planted = " << w_planted << "\n";
    out << "subbox_m = " << subbox_m << "\n";
    if (dump_cloud) out << "dump_cloud = 1\n";
    return out.str();
}

} // namespace wrcm
