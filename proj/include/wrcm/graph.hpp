#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "wrcm/connection.hpp"
#include "wrcm/rng.hpp"
#include "wrcm/sampler.hpp"

// Graph building over a point cloud: cell-list enumeration of all pairs
// within the truncation radius, one pair-keyed Bernoulli per candidate edge,
// degree tally only (no adjacency retention). Cell size >= R so a single
// ring of neighbor cells covers every admissible pair exactly once.

namespace wrcm {

struct DegreeTable {
    std::vector<std::uint32_t> degrees;
    std::uint64_t edge_count = 0;
    double truncation_radius = 0.0;
    double eps_budget = 0.0;
};

struct DegreeKProcess {
    int k = 0;
    int d = 1;
    std::vector<Position> locations;
    std::vector<double> weights;
    std::uint64_t count = 0; // D_{s,k}
};

namespace detail {

class CellGrid {
  public:
    CellGrid(const PointCloud& cloud, double min_cell) : d_(cloud.d) {
        const double extent = cloud.window_extent();
        const double max_for_memory =
            std::max(1.0, std::floor(std::pow(static_cast<double>(cloud.size()) + 1.0,
                                              1.0 / cloud.d)));
        n_per_dim_ = static_cast<int>(std::min(
            min_cell > 0.0 ? std::max(1.0, std::floor(extent / min_cell)) : max_for_memory,
            max_for_memory));
        n_per_dim_ = std::max(n_per_dim_, 1);
        cell_size_ = extent / n_per_dim_;
        origin_ = -cloud.pad;
        std::size_t total = 1;
        for (int j = 0; j < d_; ++j) total *= static_cast<std::size_t>(n_per_dim_);
        cells_.resize(total);
        for (std::size_t i = 0; i < cloud.size(); ++i)
            cells_[cell_of(cloud.positions[i])].push_back(i);
    }

    int dims() const { return d_; }
    int per_dim() const { return n_per_dim_; }
    const std::vector<std::size_t>& cell(std::size_t flat) const { return cells_[flat]; }
    std::size_t n_cells() const { return cells_.size(); }

    std::size_t cell_of(const Position& x) const {
        std::size_t flat = 0;
        for (int j = 0; j < d_; ++j) {
            int c = static_cast<int>((x[j] - origin_) / cell_size_);
            c = std::clamp(c, 0, n_per_dim_ - 1);
            flat = flat * static_cast<std::size_t>(n_per_dim_) + static_cast<std::size_t>(c);
        }
        return flat;
    }

    void coords_of(std::size_t flat, int* out) const {
        for (int j = d_ - 1; j >= 0; --j) {
            out[j] = static_cast<int>(flat % static_cast<std::size_t>(n_per_dim_));
            flat /= static_cast<std::size_t>(n_per_dim_);
        }
    }

    bool flat_of(const int* coords, std::size_t& flat) const {
        flat = 0;
        for (int j = 0; j < d_; ++j) {
            if (coords[j] < 0 || coords[j] >= n_per_dim_) return false;
            flat = flat * static_cast<std::size_t>(n_per_dim_) + static_cast<std::size_t>(coords[j]);
        }
        return true;
    }

  private:
    int d_;
    int n_per_dim_ = 1;
    double cell_size_ = 0.0;
    double origin_ = 0.0;
    std::vector<std::vector<std::size_t>> cells_;
};

// Half-space neighbor offsets (first nonzero positive), so each cell pair is
// visited exactly once.
inline std::vector<std::array<int, 3>> half_neighborhood(int d) {
    std::vector<std::array<int, 3>> offsets;
    const int lo = -1, hi = 1;
    std::array<int, 3> off{0, 0, 0};
    auto is_positive_lex = [&](const std::array<int, 3>& o) {
        for (int j = 0; j < d; ++j) {
            if (o[j] > 0) return true;
            if (o[j] < 0) return false;
        }
        return false; // all zero: same cell, handled separately
    };
    if (d == 1) {
        for (off[0] = lo; off[0] <= hi; ++off[0])
            if (is_positive_lex(off)) offsets.push_back(off);
    } else if (d == 2) {
        for (off[0] = lo; off[0] <= hi; ++off[0])
            for (off[1] = lo; off[1] <= hi; ++off[1])
                if (is_positive_lex(off)) offsets.push_back(off);
    } else {
        for (off[0] = lo; off[0] <= hi; ++off[0])
            for (off[1] = lo; off[1] <= hi; ++off[1])
                for (off[2] = lo; off[2] <= hi; ++off[2])
                    if (is_positive_lex(off)) offsets.push_back(off);
    }
    return offsets;
}

} // namespace detail

// Exact Bernoulli edge sampling for every pair within R; pairs beyond R are
// never edges (budget certified by truncation_radius). Hot path: squared
// distance test first, profile evaluated only for admissible pairs.
inline DegreeTable build_degrees(const PointCloud& cloud, const ConnectionSpec& spec,
                                 double v_s, double R, const SeedSpec& edge_seed,
                                 double eps_budget = 0.0) {
    if (!(v_s > 0.0)) throw std::domain_error("build_degrees: v_s must be positive");
    if (R > cloud.pad + 1e-12)
        throw std::invalid_argument(
            "build_degrees: truncation radius exceeds window padding; the missed-edge "
            "budget would be silently violated");

    DegreeTable table;
    table.degrees.assign(cloud.size(), 0);
    table.truncation_radius = R;
    table.eps_budget = eps_budget;

    const PhiloxKey edge_key =
        derive_key(SeedSpec{edge_seed.master_seed, edge_seed.replication_index,
                            StreamPurpose::Edges});
    const double r2_max = R * R;
    const double nu_d = unit_ball_volume(cloud.d);
    const int d = cloud.d;

    auto try_pair = [&](std::size_t i, std::size_t j) {
        const double r2 = squared_distance(cloud.positions[i], cloud.positions[j], d);
        if (r2 > r2_max || r2 == 0.0) return;
        const double dist = std::sqrt(r2);
        const double ball_volume = d == 1 ? nu_d * dist : (d == 2 ? nu_d * r2 : nu_d * r2 * dist);
        const double prob =
            phi(spec, ball_volume / (v_s * kappa(spec, cloud.weights[i], cloud.weights[j])));
        if (pair_uniform(edge_key, cloud.ids[i], cloud.ids[j]) < prob) {
            ++table.degrees[i];
            ++table.degrees[j];
            ++table.edge_count;
        }
    };

    const detail::CellGrid grid(cloud, R);
    const auto offsets = detail::half_neighborhood(d);
    int coords[3], neighbor[3];
    for (std::size_t flat = 0; flat < grid.n_cells(); ++flat) {
        const auto& cell = grid.cell(flat);
        if (cell.empty()) continue;
        for (std::size_t u = 0; u < cell.size(); ++u)
            for (std::size_t v = u + 1; v < cell.size(); ++v) try_pair(cell[u], cell[v]);
        grid.coords_of(flat, coords);
        for (const auto& off : offsets) {
            for (int j = 0; j < d; ++j) neighbor[j] = coords[j] + off[j];
            std::size_t other;
            if (!grid.flat_of(neighbor, other)) continue;
            for (std::size_t i : cell)
                for (std::size_t j : grid.cell(other)) try_pair(i, j);
        }
    }
    return table;
}

// Restriction of the degree table to unit-cube points of degree exactly k.
inline DegreeKProcess extract_degree_k(const PointCloud& cloud, const DegreeTable& table,
                                       int k) {
    if (table.degrees.size() != cloud.size())
        throw std::invalid_argument("extract_degree_k: table does not match cloud");
    DegreeKProcess process;
    process.k = k;
    process.d = cloud.d;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (table.degrees[i] != static_cast<std::uint32_t>(k)) continue;
        bool inside = true;
        for (int j = 0; j < cloud.d; ++j)
            inside = inside && cloud.positions[i][j] >= 0.0 && cloud.positions[i][j] <= 1.0;
        if (!inside) continue;
        process.locations.push_back(cloud.positions[i]);
        process.weights.push_back(cloud.weights[i]);
    }
    process.count = process.locations.size();
    return process;
}

struct PlantedResult {
    std::vector<std::uint32_t> degrees;
    std::vector<std::uint32_t> out_degrees; // neighbors with weight >= planted weight
    double target_mean_degree = 0.0;        // sigma h(w)
    double target_mean_out_degree = 0.0;    // sigma w mu_plus(w)
    double truncation_correction = 0.0;     // certified missed-degree bound
    double ball_radius = 0.0;
};

// Monte-Carlo degree of a point planted at the origin with a pinned weight:
// ambient points sampled in a ball large enough that the certified missed
// mean degree is far below the Monte-Carlo resolution.
inline PlantedResult planted_degree_experiment(const WeightLaw& law, const ConnectionSpec& spec,
                                               double s, double v_s, double w_planted,
                                               std::size_t reps, int d,
                                               std::uint64_t master_seed) {
    if (!(w_planted > 0.0)) throw std::domain_error("planted weight must be positive");
    if (reps < 1) throw std::domain_error("planted experiment needs at least one replication");

    PlantedResult result;
    const double sigma = s * v_s;
    result.target_mean_degree = sigma * h_of_w(law, spec.a, w_planted);
    result.target_mean_out_degree = sigma * w_planted * mu_plus(law, spec.a, w_planted);

    // Truncation bias budget: a tenth of the Monte-Carlo standard error, so
    // the correction is invisible at the experiment's own resolution. Heavy
    // profile tails make much smaller absolute budgets prohibitively wide.
    const double mc_se =
        std::sqrt(std::max(result.target_mean_degree, 0.25) / static_cast<double>(reps));
    const double budget = std::max(1e-5, 0.1 * mc_se);
    result.ball_radius = detail::bisect_truncation_radius(
        [&](double R) { return missed_degree(spec, law, w_planted, s, v_s, R, d); }, budget);
    result.truncation_correction =
        missed_degree(spec, law, w_planted, s, v_s, result.ball_radius, d);

    const double R = result.ball_radius;
    const double nu_d = unit_ball_volume(d);
    const double expected = s * nu_d * std::pow(R, d);
    const Position origin{0.0, 0.0, 0.0};

    result.degrees.reserve(reps);
    result.out_degrees.reserve(reps);
    for (std::size_t rep = 0; rep < reps; ++rep) {
        RandomStream pos_stream(SeedSpec{master_seed, rep, StreamPurpose::Positions});
        RandomStream weight_stream(SeedSpec{master_seed, rep, StreamPurpose::Weights});
        RandomStream edge_stream(SeedSpec{master_seed, rep, StreamPurpose::Edges});
        const std::uint64_t n = sample_poisson(pos_stream, expected);
        std::uint32_t degree = 0, out_degree = 0;
        for (std::uint64_t i = 0; i < n; ++i) {
            // Uniform point in the d-ball of radius R (open at the center so
            // pair_probability never sees a coincident pair).
            const double radius = R * std::pow(pos_stream.next_open_double(), 1.0 / d);
            Position x{0.0, 0.0, 0.0};
            if (d == 1) {
                x[0] = pos_stream.next_double() < 0.5 ? -radius : radius;
            } else if (d == 2) {
                const double theta = 2.0 * M_PI * pos_stream.next_double();
                x[0] = radius * std::cos(theta);
                x[1] = radius * std::sin(theta);
            } else {
                const double cos_t = 2.0 * pos_stream.next_double() - 1.0;
                const double sin_t = std::sqrt(std::max(0.0, 1.0 - cos_t * cos_t));
                const double phi_angle = 2.0 * M_PI * pos_stream.next_double();
                x[0] = radius * sin_t * std::cos(phi_angle);
                x[1] = radius * sin_t * std::sin(phi_angle);
                x[2] = radius * cos_t;
            }
            const double w = quantile(law, weight_stream.next_open_double());
            const double prob = pair_probability(spec, v_s, origin, w_planted, x, w, d);
            if (edge_stream.next_double() < prob) {
                ++degree;
                if (w >= w_planted) ++out_degree;
            }
        }
        result.degrees.push_back(degree);
        result.out_degrees.push_back(out_degree);
    }
    return result;
}

} // namespace wrcm
