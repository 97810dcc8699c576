#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "wrcm/connection.hpp"
#include "wrcm/rng.hpp"
#include "wrcm/weights.hpp"

// Marked homogeneous Poisson sampling on the padded window [-pad, 1+pad]^d.
// Positions and weights come from separate purpose-keyed streams of the same
// (master_seed, replication) pair, so clouds are bit-identical across runs
// and thread schedules. Point ids are stable and drive pair-keyed edge
// randomness downstream.

namespace wrcm {

class CapacityError : public std::runtime_error {
  public:
    explicit CapacityError(const std::string& what) : std::runtime_error(what) {}
};

struct PointCloud {
    int d = 1;
    double pad = 0.0;
    double s = 0.0;
    std::uint64_t master_seed = 0;
    std::uint64_t replication_index = 0;
    std::vector<Position> positions;
    std::vector<double> weights;
    std::vector<std::uint64_t> ids;

    std::size_t size() const { return positions.size(); }
    double window_extent() const { return 1.0 + 2.0 * pad; }
    double window_volume() const { return std::pow(window_extent(), d); }
};

inline PointCloud sample_ppp(const WeightLaw& law, double s, int d, double pad,
                             std::uint64_t master_seed, std::uint64_t replication_index,
                             double capacity = 1e8) {
    if (!(s > 0.0)) throw std::domain_error("sample_ppp: intensity must be positive");
    if (!(pad >= 0.0)) throw std::domain_error("sample_ppp: pad must be >= 0");
    if (d < 1 || d > 3) throw std::domain_error("sample_ppp: dimension must be 1, 2 or 3");

    PointCloud cloud;
    cloud.d = d;
    cloud.pad = pad;
    cloud.s = s;
    cloud.master_seed = master_seed;
    cloud.replication_index = replication_index;

    const double expected = s * cloud.window_volume();
    if (expected > capacity)
        throw CapacityError("sample_ppp: expected point count " + std::to_string(expected) +
                            " exceeds capacity cap " + std::to_string(capacity));

    RandomStream position_stream(SeedSpec{master_seed, replication_index, StreamPurpose::Positions});
    RandomStream weight_stream(SeedSpec{master_seed, replication_index, StreamPurpose::Weights});

    const std::uint64_t n = sample_poisson(position_stream, expected);
    const double lo = -pad;
    const double extent = cloud.window_extent();
    cloud.positions.reserve(n);
    cloud.ids.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        Position x{0.0, 0.0, 0.0};
        for (int j = 0; j < d; ++j) x[j] = lo + extent * position_stream.next_double();
        cloud.positions.push_back(x);
        cloud.ids.push_back(i);
    }
    cloud.weights = sample(law, weight_stream, n);
    return cloud;
}

} // namespace wrcm
