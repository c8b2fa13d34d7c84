#pragma once

#include <cstdint>
#include <vector>

#include "vibe/common.hpp"
#include "vibe/geometry.hpp"
#include "vibe/scene.hpp"
#include "vibe/tracker.hpp"

namespace vibe::synth {

struct NoPath : Error {
    using Error::Error;
};

struct SynthConfig {
    // roundabout scene
    double radius = 20.0;  // ring centerline radius (m)
    int arms = 4;
    double arm_length = 18.0;
    double road_halfwidth = 4.2;
    // traffic
    int cars = 60;
    int pedestrians = 16;
    double mean_headway = 4.0;  // s between car spawns
    double speed_mean = 7.0;    // m/s
    double speed_std = 0.5;     // per-agent target-speed std
    double ped_speed = 1.3;
    double lateral_noise = 0.15;  // m, mean-reverting lane offset
    // detection rendering
    double dropout = 0.0;
    double position_noise = 0.0;  // m, on the ground plane
    int feature_dim = 128;
    double feature_noise = 0.3;   // intra-identity angular noise (total, not per-dim)
    // synthetic camera
    double cam_distance = 75.0;
    double cam_height = 35.0;
    double cam_focal = 900.0;
    double image_cx = 640.0, image_cy = 360.0;
    double k1 = -0.08, k2 = 0.01;
    double norm_radius = 650.0;
    // temporal splits (fractions of the covered span)
    double train_frac = 0.7, val_frac = 0.15;
    double frame_rate = 15.0;
};

sim::SceneLayout generate_scene(const SynthConfig& cfg);

geometry::Calibration make_camera(const SynthConfig& cfg);

// Polyline path with arc-length lookup; exposed so tests can verify the
// arc-length parameterization of scripted trajectories.
struct Path {
    std::vector<Vec2> points;
    std::vector<double> cum;  // cumulative length per point

    double length() const { return cum.empty() ? 0.0 : cum.back(); }
    Vec2 point_at(double s) const;
    Vec2 tangent_at(double s) const;
};

// Lane path entry arm -> ring (counterclockwise) -> exit arm.
Path expert_path(const SynthConfig& cfg, int entry_id, int exit_id);

struct ExpertContext {
    double spawn_time = 0.0;
    int id = 1;
    const std::vector<tracker::TrackedTrajectory>* pedestrians = nullptr;
    const std::vector<tracker::TrackedTrajectory>* other_cars = nullptr;
};

// Arc-length sampled car trajectory at 15 Hz with a smooth speed profile;
// decelerates for zebras occupied by replayed pedestrians and yields to cars
// ahead.  Deterministic in (cfg, seed).
tracker::TrackedTrajectory scripted_expert(const sim::SceneLayout& scene, int entry_id,
                                           int exit_id, const SynthConfig& cfg, std::uint64_t seed,
                                           const ExpertContext& ctx = {});

std::vector<tracker::Detection> render_detections(
    const std::vector<tracker::TrackedTrajectory>& trajectories,
    const geometry::Calibration& calib, const SynthConfig& cfg, std::uint64_t seed);

struct SplitWindows {
    double train_t0 = 0, train_t1 = 0;
    double val_t0 = 0, val_t1 = 0;
    double test_t0 = 0, test_t1 = 0;
};

struct Dataset {
    sim::SceneLayout scene;
    geometry::Calibration calib;
    std::vector<tracker::TrackedTrajectory> trajectories;  // ground truth, cars + pedestrians
    SplitWindows splits;
};

Dataset generate_dataset(const SynthConfig& cfg, std::uint64_t seed);

// Indices of trajectories fully contained in [t0, t1] (split membership;
// boundary crossers belong to no split).
std::vector<int> trajectories_in_window(const std::vector<tracker::TrackedTrajectory>& trajs,
                                        double t0, double t1);

}  // namespace vibe::synth
