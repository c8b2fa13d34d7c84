#pragma once

#include <cstdint>
#include <vector>

#include "vibe/common.hpp"
#include "vibe/sim.hpp"

namespace vibe::behavior {

struct EmptySamples : Error {
    using Error::Error;
};
struct GridMismatch : Error {
    using Error::Error;
};
struct WindowOutOfRange : Error {
    using Error::Error;
};

struct GridAxis {
    double lo = 0.0;
    double hi = 1.0;
    int bins = 1;
    bool operator==(const GridAxis&) const = default;
};

struct DistributionGrid {
    std::vector<GridAxis> axes;
    std::vector<double> probs;  // flat row-major, sums to 1

    std::size_t cells() const {
        std::size_t n = 1;
        for (const auto& a : axes) n *= static_cast<std::size_t>(a.bins);
        return n;
    }
};

// Gaussian-kernel density on the grid via linear binning and separable
// convolution, renormalized to sum 1.  bandwidth entries <= 0 select Scott's
// rule per dimension.  Throws EmptySamples for fewer than 2 samples.
DistributionGrid kde(const std::vector<std::vector<double>>& samples,
                     std::vector<double> bandwidth, const std::vector<GridAxis>& axes);

// Jensen-Shannon divergence in nats; 0 log 0 := 0.  Throws GridMismatch.
double jsd(const DistributionGrid& p, const DistributionGrid& q);

struct EvalConfig {
    int speed_bins = 64;
    double speed_max = 15.0;
    int occupancy_bins = 64;
    int joint_pos_bins = 16;
    int joint_vel_bins = 8;
    double vel_max = 12.0;
    double bandwidth = 0.0;  // 0 = Scott's rule
};

struct BehaviorReport {
    double jsd_speed = 0.0;
    double jsd_occupancy = 0.0;
    double jsd_joint = 0.0;
    double collision_probability = 0.0;
    double exit_failure_probability = 0.0;
    int window_ticks = 0;
    double window_t0 = 0.0;
    int agents = 0;
    int colliding_agents = 0;
    int exit_candidates = 0;
    int exit_failures = 0;
};

struct TraceSample {
    int tick = 0;
    int id = 0;
    ObjectClass cls = ObjectClass::car;
    Vec2 pos;
    Vec2 vel;
    bool controlled = false;
};

// Multi-agent evaluation window: every car is policy-controlled (parameters
// shared via the factory), pedestrians and other road users replay;
// collisions are logged, not terminal; agents leave on arrival.
BehaviorReport evaluate_policy(const sim::PolicyFactory& policies, const sim::SceneLayout& scene,
                               const std::vector<tracker::TrackedTrajectory>& dataset,
                               double window_t0, int window_ticks, const sim::SimConfig& scfg,
                               const EvalConfig& cfg,
                               std::vector<TraceSample>* traces = nullptr);

}  // namespace vibe::behavior
