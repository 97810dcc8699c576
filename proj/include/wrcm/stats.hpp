#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "wrcm/graph.hpp"

// Replication-level statistics: Poisson goodness of fit for the degree-k
// counts, sub-box uniformity/independence proxies for the spatial process,
// and the log-log slope regression for the isolated-weight experiment.

namespace wrcm {

inline double chi_square_p_value(double statistic, std::size_t dof) {
    if (dof == 0) return 1.0;
    return boost::math::gamma_q(0.5 * static_cast<double>(dof), 0.5 * statistic);
}

struct CountSummary {
    std::size_t n = 0;
    double mean = 0.0;
    double variance = 0.0;   // unbiased
    double dispersion = 0.0; // variance / mean
    bool dispersion_defined = false;
    double reference_mean = 1.0; // E[D_{s,k}] = 1 under the scaling equation
};

template <typename Counts>
CountSummary summarize_counts(const Counts& counts) {
    CountSummary summary;
    summary.n = std::size(counts);
    if (summary.n < 2) throw std::domain_error("summarize_counts: need >= 2 replications");
    double sum = 0.0;
    for (auto c : counts) sum += static_cast<double>(c);
    summary.mean = sum / static_cast<double>(summary.n);
    double ss = 0.0;
    for (auto c : counts) {
        const double dev = static_cast<double>(c) - summary.mean;
        ss += dev * dev;
    }
    summary.variance = ss / static_cast<double>(summary.n - 1);
    if (summary.mean > 0.0) {
        summary.dispersion = summary.variance / summary.mean;
        summary.dispersion_defined = true;
    }
    return summary;
}

struct GofReport {
    double statistic = 0.0;
    std::size_t dof = 0;
    double p_value = 1.0;
    std::string pooled_bins;
    bool low_power = false; // fewer replications than the recommended minimum
};

// Pearson chi-square of integer counts against Poisson(lambda); consecutive
// bins pooled so every expected count is >= 5, right tail pooled into the
// last bin.
template <typename Counts>
GofReport poisson_gof(const Counts& counts, double lambda) {
    const std::size_t n = std::size(counts);
    if (n < 2) throw std::domain_error("poisson_gof: need >= 2 observations");
    if (!(lambda > 0.0)) throw std::domain_error("poisson_gof: lambda must be positive");
    GofReport report;
    report.low_power = n < 200;

    std::uint64_t max_count = 0;
    for (auto c : counts) max_count = std::max<std::uint64_t>(max_count, c);
    std::vector<double> observed(static_cast<std::size_t>(max_count) + 1, 0.0);
    for (auto c : counts) observed[static_cast<std::size_t>(c)] += 1.0;

    const double total = static_cast<double>(n);
    std::vector<double> expected;
    double cum = 0.0;
    for (std::size_t j = 0; j <= max_count; ++j) {
        // log-space pmf; the direct recurrence underflows for large lambda
        const double jd = static_cast<double>(j);
        const double pmf = std::exp(jd * std::log(lambda) - lambda - std::lgamma(jd + 1.0));
        expected.push_back(total * pmf);
        cum += pmf;
    }
    // Right-tail mass beyond max_count goes into a trailing bin.
    observed.push_back(0.0);
    expected.push_back(total * std::max(0.0, 1.0 - cum));

    // Pool consecutive bins until each reaches expected >= 5.
    std::vector<double> obs_bins, exp_bins;
    std::vector<std::pair<std::size_t, std::size_t>> spans;
    double obs_acc = 0.0, exp_acc = 0.0;
    std::size_t span_start = 0;
    for (std::size_t j = 0; j < expected.size(); ++j) {
        obs_acc += observed[j];
        exp_acc += expected[j];
        if (exp_acc >= 5.0) {
            obs_bins.push_back(obs_acc);
            exp_bins.push_back(exp_acc);
            spans.emplace_back(span_start, j);
            obs_acc = exp_acc = 0.0;
            span_start = j + 1;
        }
    }
    if (exp_acc > 0.0 || obs_acc > 0.0) {
        if (!exp_bins.empty()) {
            obs_bins.back() += obs_acc;
            exp_bins.back() += exp_acc;
            spans.back().second = expected.size() - 1;
        } else {
            obs_bins.push_back(obs_acc);
            exp_bins.push_back(exp_acc);
            spans.emplace_back(span_start, expected.size() - 1);
        }
    }

    for (std::size_t j = 0; j < exp_bins.size(); ++j) {
        const double dev = obs_bins[j] - exp_bins[j];
        report.statistic += dev * dev / exp_bins[j];
    }
    report.dof = exp_bins.size() > 1 ? exp_bins.size() - 1 : 1;
    report.p_value = chi_square_p_value(report.statistic, report.dof);
    for (std::size_t j = 0; j < spans.size(); ++j) {
        if (j) report.pooled_bins += '|';
        report.pooled_bins += std::to_string(spans[j].first);
        if (spans[j].second > spans[j].first)
            report.pooled_bins += '-' + std::to_string(spans[j].second);
        if (j + 1 == spans.size()) report.pooled_bins += '+';
    }
    return report;
}

struct SubboxReport {
    GofReport uniformity; // pooled per-box counts vs Poisson(m^-d)
    GofReport covariance; // sum of pairwise covariance z-scores vs chi-square
    double min_p = 1.0;
};

// Spatial Poissonity proxy: partition [0,1]^d into m^d boxes, test the
// pooled per-(replication, box) counts against Poisson(m^-d), and test the
// pairwise covariances of disjoint box counts against zero.
inline SubboxReport subbox_counts_test(const std::vector<DegreeKProcess>& processes, int m) {
    if (processes.empty()) throw std::domain_error("subbox_counts_test: no replications");
    if (m < 2) throw std::domain_error("subbox_counts_test: need m >= 2");
    const int d = processes.front().d;
    std::size_t n_boxes = 1;
    for (int j = 0; j < d; ++j) n_boxes *= static_cast<std::size_t>(m);

    const std::size_t n_reps = processes.size();
    std::vector<std::vector<double>> box_counts(n_boxes, std::vector<double>(n_reps, 0.0));
    std::vector<std::uint64_t> pooled;
    pooled.reserve(n_reps * n_boxes);
    for (std::size_t r = 0; r < n_reps; ++r) {
        if (processes[r].d != d)
            throw std::invalid_argument("subbox_counts_test: mixed dimensions");
        for (const Position& x : processes[r].locations) {
            std::size_t flat = 0;
            for (int j = 0; j < d; ++j) {
                int c = static_cast<int>(x[j] * m);
                c = std::clamp(c, 0, m - 1);
                flat = flat * static_cast<std::size_t>(m) + static_cast<std::size_t>(c);
            }
            box_counts[flat][r] += 1.0;
        }
    }
    for (std::size_t box = 0; box < n_boxes; ++box)
        for (std::size_t r = 0; r < n_reps; ++r)
            pooled.push_back(static_cast<std::uint64_t>(box_counts[box][r]));

    SubboxReport report;
    report.uniformity = poisson_gof(pooled, 1.0 / static_cast<double>(n_boxes));
    report.uniformity.low_power = n_reps < 500;

    // Pairwise sample covariances; under independence z = cov * sqrt(n-1) /
    // sqrt(var_i var_j) is asymptotically standard normal.
    std::vector<double> means(n_boxes, 0.0), vars(n_boxes, 0.0);
    for (std::size_t box = 0; box < n_boxes; ++box) {
        for (double c : box_counts[box]) means[box] += c;
        means[box] /= static_cast<double>(n_reps);
        for (double c : box_counts[box]) {
            const double dev = c - means[box];
            vars[box] += dev * dev;
        }
        vars[box] /= static_cast<double>(n_reps - 1);
    }
    double stat = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < n_boxes; ++i) {
        for (std::size_t j = i + 1; j < n_boxes; ++j) {
            if (!(vars[i] > 0.0) || !(vars[j] > 0.0)) continue;
            double cov = 0.0;
            for (std::size_t r = 0; r < n_reps; ++r)
                cov += (box_counts[i][r] - means[i]) * (box_counts[j][r] - means[j]);
            cov /= static_cast<double>(n_reps - 1);
            const double z = cov * std::sqrt(static_cast<double>(n_reps - 1)) /
                             std::sqrt(vars[i] * vars[j]);
            stat += z * z;
            ++pairs;
        }
    }
    report.covariance.statistic = stat;
    report.covariance.dof = pairs;
    report.covariance.p_value = chi_square_p_value(stat, pairs);
    report.covariance.pooled_bins = std::to_string(pairs) + " box pairs";
    report.covariance.low_power = n_reps < 500;
    report.min_p = std::min(report.uniformity.p_value, report.covariance.p_value);
    return report;
}

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    double stderr_slope = 0.0;
    std::vector<std::pair<double, double>> points; // (log s, log statistic)
};

// Ordinary least squares of log(statistic) on log(s).
inline SlopeFit loglog_slope(const std::vector<std::pair<double, double>>& pairs) {
    if (pairs.size() < 4) throw std::domain_error("loglog_slope: need >= 4 intensities");
    SlopeFit fit;
    for (const auto& [s, stat] : pairs) {
        if (!(s > 0.0) || !(stat > 0.0))
            throw std::domain_error("loglog_slope: nonpositive input");
        fit.points.emplace_back(std::log(s), std::log(stat));
    }
    const double n = static_cast<double>(fit.points.size());
    double sx = 0, sy = 0;
    for (const auto& [x, y] : fit.points) { sx += x; sy += y; }
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0;
    for (const auto& [x, y] : fit.points) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if (!(sxx > 0.0)) throw std::domain_error("loglog_slope: degenerate abscissae");
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss_res = 0.0;
    for (const auto& [x, y] : fit.points) {
        const double r = y - (fit.intercept + fit.slope * x);
        ss_res += r * r;
    }
    const double dof = n - 2.0;
    fit.stderr_slope = dof > 0.0 ? std::sqrt(ss_res / dof / sxx) : 0.0;
    return fit;
}

} // namespace wrcm
