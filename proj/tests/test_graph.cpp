#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "wrcm/graph.hpp"
#include "wrcm/stats.hpp"

using namespace wrcm;

namespace {

const WeightLaw kPoly = WeightLaw::polynomial_left(1.0, 2.0, 0.5, 5.0);

// All-pairs reference: no grid, optional truncation, same pair-keyed stream.
DegreeTable brute_force_degrees(const PointCloud& cloud, const ConnectionSpec& spec, double v_s,
                                double R, const SeedSpec& edge_seed) {
    DegreeTable table;
    table.degrees.assign(cloud.size(), 0);
    table.truncation_radius = R;
    const PhiloxKey key = derive_key(
        SeedSpec{edge_seed.master_seed, edge_seed.replication_index, StreamPurpose::Edges});
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        for (std::size_t j = i + 1; j < cloud.size(); ++j) {
            const double r2 = squared_distance(cloud.positions[i], cloud.positions[j], cloud.d);
            if (r2 == 0.0 || r2 > R * R) continue;
            const double p = pair_probability(spec, v_s, cloud.positions[i], cloud.weights[i],
                                              cloud.positions[j], cloud.weights[j], cloud.d);
            if (pair_uniform(key, cloud.ids[i], cloud.ids[j]) < p) {
                ++table.degrees[i];
                ++table.degrees[j];
                ++table.edge_count;
            }
        }
    }
    return table;
}

PointCloud two_point_cloud(double x0, double x1, double w0, double w1, double pad) {
    PointCloud cloud;
    cloud.d = 1;
    cloud.pad = pad;
    cloud.s = 1.0;
    cloud.positions = {Position{x0, 0, 0}, Position{x1, 0, 0}};
    cloud.weights = {w0, w1};
    cloud.ids = {0, 1};
    return cloud;
}

} // namespace

TEST_CASE("two-point clouds: out-of-range and plateau cases") {
    const ConnectionSpec spec(0.0, 2.0, ProfileFamily::TruncatedPareto);
    const SeedSpec seed{3, 0, StreamPurpose::Edges};

    // Distance 0.9 > R = 0.5: never an edge.
    PointCloud far = two_point_cloud(0.0, 0.9, 1.0, 1.0, 0.5);
    DegreeTable table = build_degrees(far, spec, 0.05, 0.5, seed);
    REQUIRE(table.degrees == std::vector<std::uint32_t>{0, 0});
    REQUIRE(table.edge_count == 0);

    // Inside the phi == 1 plateau: edge with probability one.
    // argument = 2 * 0.001 / (0.05 * 1) = 0.04 < plateau edge 0.5.
    PointCloud close = two_point_cloud(0.5, 0.501, 1.0, 1.0, 0.5);
    table = build_degrees(close, spec, 0.05, 0.5, seed);
    REQUIRE(table.degrees == std::vector<std::uint32_t>{1, 1});
    REQUIRE(table.edge_count == 1);

    // R > pad is a configuration error.
    REQUIRE_THROWS_AS(build_degrees(close, spec, 0.05, 0.6, seed), std::invalid_argument);
}

TEST_CASE("cell-list degrees equal the all-pairs reference exactly") {
    const ConnectionSpec spec(0.5, 2.0, ProfileFamily::TruncatedPareto);
    const double s = 200.0, v_s = 0.02, R = 0.12, pad = 0.15;
    std::size_t nonzero_tables = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const PointCloud cloud = sample_ppp(kPoly, s, 1, pad, 1000 + seed, 0);
        const SeedSpec edge_seed{1000 + seed, 0, StreamPurpose::Edges};
        const DegreeTable fast = build_degrees(cloud, spec, v_s, R, edge_seed);
        const DegreeTable slow = brute_force_degrees(cloud, spec, v_s, R, edge_seed);
        REQUIRE(fast.degrees == slow.degrees);
        REQUIRE(fast.edge_count == slow.edge_count);

        // Against the untruncated reference the tables may differ, but only
        // by edges longer than R.
        const DegreeTable full =
            brute_force_degrees(cloud, spec, v_s, cloud.window_extent(), edge_seed);
        REQUIRE(full.edge_count >= fast.edge_count);
        for (std::size_t i = 0; i < cloud.size(); ++i)
            REQUIRE(full.degrees[i] >= fast.degrees[i]);
        if (fast.edge_count > 0) ++nonzero_tables;
    }
    REQUIRE(nonzero_tables > 90); // the comparison is not vacuous
}

TEST_CASE("handshake identity and degree tally across dimensions") {
    const ConnectionSpec spec(1.0, 2.0, ProfileFamily::TruncatedPareto);
    for (int d : {1, 2, 3}) {
        const PointCloud cloud = sample_ppp(kPoly, d == 3 ? 1500.0 : 400.0, d, 0.2, 17, 2);
        const DegreeTable table =
            build_degrees(cloud, spec, 0.05, 0.2, SeedSpec{17, 2, StreamPurpose::Edges});
        const std::uint64_t degree_sum =
            std::accumulate(table.degrees.begin(), table.degrees.end(), std::uint64_t{0});
        REQUIRE(degree_sum == 2 * table.edge_count);
        REQUIRE(table.edge_count > 0);
    }
}

TEST_CASE("degrees are invariant under relabeling of the storage order") {
    const ConnectionSpec spec(0.5, 2.0, ProfileFamily::TruncatedPareto);
    const PointCloud cloud = sample_ppp(kPoly, 300.0, 1, 0.2, 77, 0);
    const SeedSpec edge_seed{77, 0, StreamPurpose::Edges};
    const DegreeTable reference = build_degrees(cloud, spec, 0.03, 0.2, edge_seed);

    PointCloud shuffled = cloud;
    std::vector<std::size_t> perm(cloud.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 gen(42);
    std::shuffle(perm.begin(), perm.end(), gen);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        shuffled.positions[i] = cloud.positions[perm[i]];
        shuffled.weights[i] = cloud.weights[perm[i]];
        shuffled.ids[i] = cloud.ids[perm[i]];
    }
    const DegreeTable shuffled_table = build_degrees(shuffled, spec, 0.03, 0.2, edge_seed);
    REQUIRE(shuffled_table.edge_count == reference.edge_count);
    for (std::size_t i = 0; i < cloud.size(); ++i)
        REQUIRE(shuffled_table.degrees[i] == reference.degrees[perm[i]]);
}

TEST_CASE("empirical edge probability of a pinned pair matches pair_probability") {
    const ConnectionSpec spec(0.5, 2.0, ProfileFamily::TruncatedPareto);
    PointCloud cloud = two_point_cloud(0.40, 0.45, 0.8, 1.7, 0.2);
    const double v_s = 0.05;
    const double p =
        pair_probability(spec, v_s, cloud.positions[0], 0.8, cloud.positions[1], 1.7, 1);
    REQUIRE(p > 0.01);
    REQUIRE(p < 0.99);
    const std::size_t reps = 100000;
    std::size_t edges = 0;
    for (std::size_t rep = 0; rep < reps; ++rep)
        edges += build_degrees(cloud, spec, v_s, 0.2, SeedSpec{900, rep, StreamPurpose::Edges})
                     .edge_count;
    const double freq = static_cast<double>(edges) / reps;
    const double se = std::sqrt(p * (1.0 - p) / reps);
    REQUIRE(std::abs(freq - p) < 3.0 * se);
}

TEST_CASE("degree-k extraction: cube restriction and partition identity") {
    const ConnectionSpec spec(0.5, 2.0, ProfileFamily::TruncatedPareto);
    const PointCloud cloud = sample_ppp(kPoly, 500.0, 1, 0.25, 13, 4);
    const DegreeTable table =
        build_degrees(cloud, spec, 0.02, 0.25, SeedSpec{13, 4, StreamPurpose::Edges});

    std::size_t in_cube = 0;
    for (std::size_t i = 0; i < cloud.size(); ++i)
        if (cloud.positions[i][0] >= 0.0 && cloud.positions[i][0] <= 1.0) ++in_cube;

    std::uint32_t max_degree = 0;
    for (std::uint32_t deg : table.degrees) max_degree = std::max(max_degree, deg);
    std::uint64_t total = 0;
    for (std::uint32_t k = 0; k <= max_degree; ++k) {
        const DegreeKProcess proc = extract_degree_k(cloud, table, static_cast<int>(k));
        REQUIRE(proc.count == proc.locations.size());
        for (const Position& x : proc.locations) {
            REQUIRE(x[0] >= 0.0);
            REQUIRE(x[0] <= 1.0);
        }
        total += proc.count;
    }
    REQUIRE(total == in_cube);

    // Points outside the cube are excluded even at matching degree.
    PointCloud outside = two_point_cloud(1.1, 1.2, 1.0, 1.0, 0.25);
    DegreeTable outside_table;
    outside_table.degrees = {0, 0};
    REQUIRE(extract_degree_k(outside, outside_table, 0).count == 0);

    // Degree mismatch across all points gives the empty process.
    const DegreeKProcess none = extract_degree_k(cloud, table, 10000);
    REQUIRE(none.count == 0);
}

TEST_CASE("planted degree experiment hits the conditional-degree identity") {
    const ConnectionSpec spec(1.0, 2.0, ProfileFamily::TruncatedPareto);
    const double s = 1000.0, v_s = 0.04; // sigma = 40
    const double sigma = s * v_s;
    // Choose w so sigma h(w) = 2; for a = 1, h(w) = w mu_1.
    const double mu1 = moment(kPoly, 1.0);
    const double w = 2.0 / (sigma * mu1);
    const PlantedResult result =
        planted_degree_experiment(kPoly, spec, s, v_s, w, 4000, 1, 2025);
    REQUIRE(result.target_mean_degree == Catch::Approx(2.0).epsilon(1e-12));

    const CountSummary degrees = summarize_counts(result.degrees);
    const double se = std::sqrt(degrees.variance / 4000.0);
    REQUIRE(std::abs(degrees.mean - result.target_mean_degree) < 3.0 * se);

    const CountSummary out_degrees = summarize_counts(result.out_degrees);
    const double out_se = std::sqrt(out_degrees.variance / 4000.0);
    REQUIRE(std::abs(out_degrees.mean - result.target_mean_out_degree) < 3.0 * out_se);

    // Poisson dispersion.
    REQUIRE(std::abs(degrees.dispersion - 1.0) < 3.0 * std::sqrt(2.0 / 3999.0));

    REQUIRE_THROWS_AS(planted_degree_experiment(kPoly, spec, s, v_s, -1.0, 10, 1, 0),
                      std::domain_error);
}
