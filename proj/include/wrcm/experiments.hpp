#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "wrcm/config.hpp"
#include "wrcm/graph.hpp"
#include "wrcm/sampler.hpp"
#include "wrcm/scaling.hpp"
#include "wrcm/stats.hpp"

// Experiment drivers shared by the CLI and the test suites. Replications are
// dispatched to a worker pool and stored by index, so outputs are identical
// for any pool size; all files carry the resolved config hash and contain no
// wall-clock data (timings go to the manifest only).

namespace wrcm {

template <typename Fn>
void parallel_for_index(std::size_t n, int threads, Fn&& fn) {
    if (n == 0) return;
    const std::size_t workers =
        std::min<std::size_t>(std::max(threads, 1), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

namespace detail {

inline std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

class CsvWriter {
  public:
    CsvWriter(const std::filesystem::path& path, std::uint64_t config_hash,
              const std::string& header) {
        out_.open(path);
        if (!out_) throw std::runtime_error("cannot open output file " + path.string());
        char hash_line[40];
        std::snprintf(hash_line, sizeof(hash_line), "# config=%016llx",
                      static_cast<unsigned long long>(config_hash));
        out_ << hash_line << "\n" << header << "\n";
    }

    void row(const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) out_ << (i ? "," : "") << fields[i];
        out_ << "\n";
    }

  private:
    std::ofstream out_;
};

struct StageTimer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

} // namespace detail

// Resolve the truncation radius for one intensity according to the eps mode.
inline double resolve_truncation_radius(const RunConfig& config, const ConnectionSpec& spec,
                                        const WeightLaw& law, double s, double v_s) {
    if (config.eps_mode == EpsMode::EdgeCount)
        return truncation_radius(spec, law, s, v_s, config.eps, config.d);
    return truncation_radius_fraction(spec, law, s, v_s, config.eps, config.d);
}

inline void write_manifest(const std::filesystem::path& out_dir, const RunConfig& config,
                           const std::string& experiment,
                           const std::vector<std::pair<std::string, double>>& timings) {
    std::ofstream out(out_dir / "manifest.txt");
    char hash_line[40];
    std::snprintf(hash_line, sizeof(hash_line), "%016llx",
                  static_cast<unsigned long long>(config.hash()));
    out << "experiment: " << experiment << "\n";
    out << "config_hash: " << hash_line << "\n";
    out << "tool: wrcm 1.0\n";
    out << "threads: " << config.threads << "\n";
    for (const auto& [stage, seconds] : timings)
        out << "time_" << stage << "_s: " << detail::format_number(seconds) << "\n";
    out << "--- resolved config ---\n" << config.canonical_text();
}

// ---------------------------------------------------------------------------
// solve

struct SolveRow {
    double s = 0.0;
    int k = 0;
    bool ok = false;
    ScalingSolution solution;
    double asymptotic = 0.0; // family-specific predictor (0 when n/a)
    double ratio = 0.0;      // sigma^rho/s or sigma/log(s)^{1+1/rho}
    std::string error;
};

struct SolveResult {
    std::vector<SolveRow> rows;
};

inline SolveResult run_solve(const RunConfig& config,
                             const std::optional<std::filesystem::path>& out_dir = {}) {
    config.validate();
    const WeightLaw law = config.weight_law();
    const MomentCache mc(law, config.a, config.alpha);
    detail::StageTimer timer;

    SolveResult result;
    for (double s : config.s_grid) {
        SolveRow row;
        row.s = s;
        row.k = config.k;
        try {
            row.solution = solve_scg(mc, s, config.k);
            row.ok = true;
            if (law.family == WeightFamily::PolynomialLeft) {
                row.asymptotic = asymptotic_sigma_polynomial(mc, config.k);
                row.ratio = std::pow(row.solution.sigma_s, law.rho) / s;
            } else if (law.family == WeightFamily::StretchedExponentialLeft) {
                row.ratio = row.solution.sigma_s / std::pow(std::log(s), 1.0 + 1.0 / law.rho);
            }
        } catch (const std::exception& e) {
            row.error = e.what();
        }
        result.rows.push_back(row);
    }

    if (out_dir) {
        std::filesystem::create_directories(*out_dir);
        detail::CsvWriter csv(*out_dir / "solve.csv", config.hash(),
                              "s,k,sigma_s,v_s,residual,n_evals,asymptotic,ratio,largest_root_"
                              "certified,ok,error");
        for (const SolveRow& row : result.rows) {
            using detail::format_number;
            csv.row({format_number(row.s), std::to_string(row.k),
                     format_number(row.ok ? row.solution.sigma_s : NAN),
                     format_number(row.ok ? row.solution.v_s : NAN),
                     format_number(row.ok ? row.solution.residual : NAN),
                     std::to_string(row.ok ? row.solution.n_evals : 0),
                     format_number(row.asymptotic), format_number(row.ratio),
                     row.ok && row.solution.largest_root_certified ? "1" : "0",
                     row.ok ? "1" : "0", row.error});
        }
        write_manifest(*out_dir, config, "solve", {{"solve", timer.seconds()}});
    }
    return result;
}

// ---------------------------------------------------------------------------
// simulate

struct ReplicationOutput {
    std::uint64_t n_points = 0;
    std::uint64_t count = 0; // D_{s,k}
    DegreeKProcess process;
};

struct IntensityResult {
    double s = 0.0;
    double sigma_s = 0.0;
    double v_s = 0.0;
    double truncation_radius = 0.0;
    double missed_edge_budget = 0.0;
    std::vector<ReplicationOutput> replications;
    CountSummary count_summary;
    GofReport poisson_report;
    SubboxReport subbox_report;
};

struct SimulateResult {
    std::vector<IntensityResult> intensities;
};

inline IntensityResult simulate_intensity(const RunConfig& config, const WeightLaw& law,
                                          const ConnectionSpec& spec, const MomentCache& mc,
                                          double s) {
    IntensityResult result;
    result.s = s;
    const ScalingSolution sol = solve_scg(mc, s, config.k);
    result.sigma_s = sol.sigma_s;
    result.v_s = sol.v_s;
    result.truncation_radius = resolve_truncation_radius(config, spec, law, s, sol.v_s);
    result.missed_edge_budget =
        s * missed_degree_typical(spec, law, s, sol.v_s, result.truncation_radius, config.d);

    result.replications.resize(config.replications);
    parallel_for_index(config.replications, config.threads, [&](std::size_t rep) {
        const PointCloud cloud = sample_ppp(law, s, config.d, result.truncation_radius,
                                            config.master_seed, rep);
        const DegreeTable table =
            build_degrees(cloud, spec, result.v_s, result.truncation_radius,
                          SeedSpec{config.master_seed, rep, StreamPurpose::Edges},
                          result.missed_edge_budget);
        ReplicationOutput& out = result.replications[rep];
        out.n_points = cloud.size();
        out.process = extract_degree_k(cloud, table, config.k);
        out.count = out.process.count;
    });

    std::vector<std::uint64_t> counts;
    counts.reserve(config.replications);
    std::vector<DegreeKProcess> processes;
    processes.reserve(config.replications);
    for (const ReplicationOutput& rep : result.replications) {
        counts.push_back(rep.count);
        processes.push_back(rep.process);
    }
    result.count_summary = summarize_counts(counts);
    result.poisson_report = poisson_gof(counts, 1.0);
    result.subbox_report = subbox_counts_test(processes, config.subbox_m);
    return result;
}

inline SimulateResult run_simulate(const RunConfig& config,
                                   const std::optional<std::filesystem::path>& out_dir = {}) {
    config.validate();
    const WeightLaw law = config.weight_law();
    const ConnectionSpec spec = config.connection_spec();
    const MomentCache mc(law, config.a, config.alpha);
    detail::StageTimer timer;

    SimulateResult result;
    std::exception_ptr abort_error;
    for (double s : config.s_grid) {
        try {
            result.intensities.push_back(simulate_intensity(config, law, spec, mc, s));
        } catch (const CapacityError&) {
            abort_error = std::current_exception();
            break; // flush partial outputs below, then re-raise
        }
    }

    if (out_dir) {
        std::filesystem::create_directories(*out_dir);
        const std::uint64_t hash = config.hash();
        using detail::format_number;
        {
            detail::CsvWriter csv(*out_dir / "replications.csv", hash, "s,k,rep,n_points,D");
            for (const IntensityResult& ir : result.intensities)
                for (std::size_t rep = 0; rep < ir.replications.size(); ++rep)
                    csv.row({format_number(ir.s), std::to_string(config.k), std::to_string(rep),
                             std::to_string(ir.replications[rep].n_points),
                             std::to_string(ir.replications[rep].count)});
        }
        {
            std::string header = "s,k,rep";
            for (int j = 1; j <= config.d; ++j) header += ",x" + std::to_string(j);
            header += ",weight";
            detail::CsvWriter csv(*out_dir / "degree_points.csv", hash, header);
            for (const IntensityResult& ir : result.intensities)
                for (std::size_t rep = 0; rep < ir.replications.size(); ++rep) {
                    const DegreeKProcess& proc = ir.replications[rep].process;
                    for (std::size_t i = 0; i < proc.locations.size(); ++i) {
                        std::vector<std::string> fields{format_number(ir.s),
                                                        std::to_string(config.k),
                                                        std::to_string(rep)};
                        for (int j = 0; j < config.d; ++j)
                            fields.push_back(format_number(proc.locations[i][j]));
                        fields.push_back(format_number(proc.weights[i]));
                        csv.row(fields);
                    }
                }
        }
        if (config.dump_cloud) {
            std::string header;
            for (int j = 1; j <= config.d; ++j) header += (j > 1 ? ",x" : "x") + std::to_string(j);
            header += ",weight";
            detail::CsvWriter csv(*out_dir / "cloud_points.csv", hash, header);
            for (const IntensityResult& ir : result.intensities) {
                const PointCloud cloud =
                    sample_ppp(law, ir.s, config.d, ir.truncation_radius, config.master_seed, 0);
                for (std::size_t i = 0; i < cloud.size(); ++i) {
                    std::vector<std::string> fields;
                    for (int j = 0; j < config.d; ++j)
                        fields.push_back(format_number(cloud.positions[i][j]));
                    fields.push_back(format_number(cloud.weights[i]));
                    csv.row(fields);
                }
            }
        }
        {
            detail::CsvWriter csv(*out_dir / "reports.csv", hash, "s,k,test,statistic,dof,p_value,notes");
            for (const IntensityResult& ir : result.intensities) {
                csv.row({format_number(ir.s), std::to_string(config.k), "poisson_gof",
                         format_number(ir.poisson_report.statistic),
                         std::to_string(ir.poisson_report.dof),
                         format_number(ir.poisson_report.p_value),
                         "bins " + ir.poisson_report.pooled_bins});
                csv.row({format_number(ir.s), std::to_string(config.k), "subbox_uniformity",
                         format_number(ir.subbox_report.uniformity.statistic),
                         std::to_string(ir.subbox_report.uniformity.dof),
                         format_number(ir.subbox_report.uniformity.p_value),
                         "bins " + ir.subbox_report.uniformity.pooled_bins});
                csv.row({format_number(ir.s), std::to_string(config.k), "subbox_covariance",
                         format_number(ir.subbox_report.covariance.statistic),
                         std::to_string(ir.subbox_report.covariance.dof),
                         format_number(ir.subbox_report.covariance.p_value),
                         ir.subbox_report.covariance.pooled_bins});
            }
        }
        {
            nlohmann::json summary;
            char hash_text[20];
            std::snprintf(hash_text, sizeof(hash_text), "%016llx",
                          static_cast<unsigned long long>(hash));
            summary["config_hash"] = hash_text;
            summary["experiment"] = "simulate";
            summary["k"] = config.k;
            for (const IntensityResult& ir : result.intensities) {
                nlohmann::json cell;
                cell["s"] = ir.s;
                cell["sigma_s"] = ir.sigma_s;
                cell["v_s"] = ir.v_s;
                cell["truncation_radius"] = ir.truncation_radius;
                cell["missed_edge_budget"] = ir.missed_edge_budget;
                cell["replications"] = ir.replications.size();
                cell["mean_D"] = ir.count_summary.mean;
                cell["var_D"] = ir.count_summary.variance;
                cell["dispersion"] = ir.count_summary.dispersion;
                cell["poisson_gof_p"] = ir.poisson_report.p_value;
                cell["subbox_uniformity_p"] = ir.subbox_report.uniformity.p_value;
                cell["subbox_covariance_p"] = ir.subbox_report.covariance.p_value;
                summary["intensities"].push_back(cell);
            }
            std::ofstream out(*out_dir / "summary.json");
            out << summary.dump(2) << "\n";
        }
        write_manifest(*out_dir, config, "simulate", {{"simulate", timer.seconds()}});
    }
    if (abort_error) std::rethrow_exception(abort_error);
    return result;
}

// ---------------------------------------------------------------------------
// fig1: isolated-node weight against intensity

struct Fig1Result {
    std::vector<double> intensities_used;
    std::vector<double> medians;
    std::vector<std::size_t> pooled_counts;
    std::vector<double> dropped; // intensities without any isolated node
    SlopeFit fit;
};

inline Fig1Result run_fig1(const RunConfig& config,
                           const std::optional<std::filesystem::path>& out_dir = {}) {
    config.validate();
    if (config.family != WeightFamily::PolynomialLeft)
        throw ConfigError("fig1 experiment requires the polynomial-left weight family");
    if (config.k != 0)
        throw ConfigError("fig1 experiment studies isolated nodes; set run.k = 0");
    if (config.s_grid.size() < 4 ||
        config.s_grid.back() < 100.0 * config.s_grid.front())
        throw ConfigError("fig1 experiment needs an s-grid spanning at least two decades");

    const WeightLaw law = config.weight_law();
    const ConnectionSpec spec = config.connection_spec();
    const MomentCache mc(law, config.a, config.alpha);
    detail::StageTimer timer;

    Fig1Result result;
    // Scatter cloud taken at the intensity closest to 1e3 (rep 0).
    double scatter_s = config.s_grid.front();
    for (double s : config.s_grid)
        if (std::abs(std::log(s) - std::log(1e3)) < std::abs(std::log(scatter_s) - std::log(1e3)))
            scatter_s = s;
    std::vector<std::array<double, 2>> scatter; // coordinate 0, weight
    std::vector<bool> scatter_isolated;

    for (double s : config.s_grid) {
        const ScalingSolution sol = solve_scg(mc, s, 0);
        const double R = resolve_truncation_radius(config, spec, law, s, sol.v_s);
        std::vector<std::vector<double>> pooled(config.replications);
        std::mutex scatter_mutex;
        parallel_for_index(config.replications, config.threads, [&](std::size_t rep) {
            const PointCloud cloud =
                sample_ppp(law, s, config.d, R, config.master_seed, rep);
            const DegreeTable table =
                build_degrees(cloud, spec, sol.v_s, R,
                              SeedSpec{config.master_seed, rep, StreamPurpose::Edges});
            const DegreeKProcess isolated = extract_degree_k(cloud, table, 0);
            pooled[rep] = isolated.weights;
            if (s == scatter_s && rep == 0) {
                std::lock_guard<std::mutex> lock(scatter_mutex);
                for (std::size_t i = 0; i < cloud.size(); ++i) {
                    scatter.push_back({cloud.positions[i][0], cloud.weights[i]});
                    scatter_isolated.push_back(table.degrees[i] == 0);
                }
            }
        });
        std::vector<double> weights;
        for (const auto& rep_weights : pooled)
            weights.insert(weights.end(), rep_weights.begin(), rep_weights.end());
        if (weights.empty()) {
            result.dropped.push_back(s);
            continue;
        }
        std::sort(weights.begin(), weights.end());
        const std::size_t m = weights.size();
        const double median =
            m % 2 ? weights[m / 2] : 0.5 * (weights[m / 2 - 1] + weights[m / 2]);
        result.intensities_used.push_back(s);
        result.medians.push_back(median);
        result.pooled_counts.push_back(m);
    }

    std::vector<std::pair<double, double>> fit_input;
    for (std::size_t i = 0; i < result.intensities_used.size(); ++i)
        fit_input.emplace_back(result.intensities_used[i], result.medians[i]);
    result.fit = loglog_slope(fit_input);

    if (out_dir) {
        std::filesystem::create_directories(*out_dir);
        const std::uint64_t hash = config.hash();
        using detail::format_number;
        {
            detail::CsvWriter csv(*out_dir / "fig1_slope_points.csv", hash,
                                  "s,median_isolated_weight,pooled_isolated_nodes");
            for (std::size_t i = 0; i < result.intensities_used.size(); ++i)
                csv.row({format_number(result.intensities_used[i]),
                         format_number(result.medians[i]),
                         std::to_string(result.pooled_counts[i])});
        }
        {
            detail::CsvWriter csv(*out_dir / "fig1_scatter.csv", hash,
                                  "coordinate,weight,isolated");
            for (std::size_t i = 0; i < scatter.size(); ++i)
                csv.row({format_number(scatter[i][0]), format_number(scatter[i][1]),
                         scatter_isolated[i] ? "1" : "0"});
        }
        {
            nlohmann::json summary;
            char hash_text[20];
            std::snprintf(hash_text, sizeof(hash_text), "%016llx",
                          static_cast<unsigned long long>(hash));
            summary["config_hash"] = hash_text;
            summary["experiment"] = "fig1";
            summary["slope"] = result.fit.slope;
            summary["intercept"] = result.fit.intercept;
            summary["slope_stderr"] = result.fit.stderr_slope;
            summary["prediction"] = -1.0 / config.rho;
            summary["dropped_intensities"] = result.dropped;
            std::ofstream out(*out_dir / "summary.json");
            out << summary.dump(2) << "\n";
        }
        write_manifest(*out_dir, config, "fig1", {{"fig1", timer.seconds()}});
    }
    return result;
}

// ---------------------------------------------------------------------------
// check: assumptions A.1-A.3

inline AssumptionReport run_check(const RunConfig& config,
                                  const std::optional<std::filesystem::path>& out_dir = {}) {
    config.validate();
    const WeightLaw law = config.weight_law();
    const MomentCache mc(law, config.a, config.alpha);
    const double delta = 0.5 * (config.alpha - 1.0);
    double eta = config.eta, K = config.K;
    if (eta < 0.0 || K < 0.0) {
        const auto rec = recommended_eta_K(law, delta);
        if (eta < 0.0) eta = rec.first;
        if (K < 0.0) K = rec.second;
    }
    detail::StageTimer timer;
    const AssumptionReport report = check_assumptions(mc, config.k, eta, K, config.s_grid);

    if (out_dir) {
        std::filesystem::create_directories(*out_dir);
        using detail::format_number;
        detail::CsvWriter csv(*out_dir / "assumptions.csv", config.hash(),
                              "s,sigma_s,w_s,a1,a2,a3");
        for (const AssumptionRow& row : report.rows)
            csv.row({format_number(row.s), format_number(row.sigma_s), format_number(row.w_s),
                     format_number(row.a1), format_number(row.a2), format_number(row.a3)});
        nlohmann::json summary;
        char hash_text[20];
        std::snprintf(hash_text, sizeof(hash_text), "%016llx",
                      static_cast<unsigned long long>(config.hash()));
        summary["config_hash"] = hash_text;
        summary["experiment"] = "check";
        summary["eta"] = report.eta;
        summary["K"] = report.K;
        summary["delta"] = report.delta;
        summary["recommended_eta"] = report.recommended_eta;
        summary["recommended_K"] = report.recommended_K;
        summary["trend_slopes"] = {report.trend_slope[0], report.trend_slope[1],
                                   report.trend_slope[2]};
        summary["pass_a1"] = report.pass_a1;
        summary["pass_a2"] = report.pass_a2;
        summary["pass_a3"] = report.pass_a3;
        std::ofstream out(*out_dir / "summary.json");
        out << summary.dump(2) << "\n";
        write_manifest(*out_dir, config, "check", {{"check", timer.seconds()}});
    }
    return report;
}

// ---------------------------------------------------------------------------
// planted: Monte-Carlo degree of a pinned-weight point at the origin

inline PlantedResult run_planted(const RunConfig& config,
                                 const std::optional<std::filesystem::path>& out_dir = {}) {
    config.validate();
    if (!(config.w_planted > 0.0))
        throw ConfigError("planted experiment requires run.w_planted > 0");
    const WeightLaw law = config.weight_law();
    const ConnectionSpec spec = config.connection_spec();
    const MomentCache mc(law, config.a, config.alpha);
    const double s = config.s_grid.front();
    const double v_s = solve_scg(mc, s, config.k).v_s;
    detail::StageTimer timer;
    const PlantedResult result = planted_degree_experiment(
        law, spec, s, v_s, config.w_planted, config.replications, config.d, config.master_seed);

    if (out_dir) {
        std::filesystem::create_directories(*out_dir);
        using detail::format_number;
        detail::CsvWriter csv(*out_dir / "planted.csv", config.hash(), "rep,degree,out_degree");
        for (std::size_t rep = 0; rep < result.degrees.size(); ++rep)
            csv.row({std::to_string(rep), std::to_string(result.degrees[rep]),
                     std::to_string(result.out_degrees[rep])});
        const CountSummary deg = summarize_counts(result.degrees);
        const CountSummary out_deg = summarize_counts(result.out_degrees);
        nlohmann::json summary;
        char hash_text[20];
        std::snprintf(hash_text, sizeof(hash_text), "%016llx",
                      static_cast<unsigned long long>(config.hash()));
        summary["config_hash"] = hash_text;
        summary["experiment"] = "planted";
        summary["s"] = s;
        summary["v_s"] = v_s;
        summary["w_planted"] = config.w_planted;
        summary["ball_radius"] = result.ball_radius;
        summary["truncation_correction"] = result.truncation_correction;
        summary["target_mean_degree"] = result.target_mean_degree;
        summary["target_mean_out_degree"] = result.target_mean_out_degree;
        summary["mc_mean_degree"] = deg.mean;
        summary["mc_mean_out_degree"] = out_deg.mean;
        summary["mc_dispersion_degree"] = deg.dispersion;
        std::ofstream out(*out_dir / "summary.json");
        out << summary.dump(2) << "\n";
        write_manifest(*out_dir, config, "planted", {{"planted", timer.seconds()}});
    }
    return result;
}

} // namespace wrcm
