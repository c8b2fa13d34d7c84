#pragma once

#include <map>
#include <optional>
#include <vector>

#include "vibe/common.hpp"
#include "vibe/geometry.hpp"

namespace vibe::tracker {

struct SingularInnovation : Error {
    using Error::Error;
};
struct OutOfOrderFrames : Error {
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Types

struct Detection {
    int frame = 0;
    ObjectClass cls = ObjectClass::car;
    geometry::BBox bbox;
    double confidence = 1.0;
    std::vector<double> feature;  // unit norm
};

struct KalmanState {
    double mean[4] = {0, 0, 0, 0};  // x, y, vx, vy
    double cov[4][4] = {};
};

struct KalmanNoise {
    double q_pos = 0.01;  // per-frame position process noise (m^2)
    double q_vel = 0.3;   // per-frame velocity process noise ((m/s)^2)
    double r_meas = 0.25; // measurement noise (m^2)
};

enum class TrackStatus { tentative, confirmed, dead };

struct TrackSample {
    int frame = 0;
    geometry::BBox bbox;
    Vec2 ground;
    std::vector<double> feature;
};

struct Track {
    int id = 0;
    ObjectClass cls = ObjectClass::car;
    std::vector<TrackSample> detections;
    // positions recorded for every alive frame (updates and gap fills)
    std::vector<std::pair<int, Vec2>> positions;
    KalmanState kalman;
    Vec2 predicted{0, 0};
    int misses = 0;
    int consecutive = 0;  // consecutive IOU associations while tentative
    TrackStatus status = TrackStatus::tentative;
    int last_frame = -1;
};

struct TrajectorySample {
    double t = 0;
    Vec2 pos;
};

struct TrackedTrajectory {
    int id = 0;
    ObjectClass cls = ObjectClass::car;
    std::vector<TrajectorySample> samples;

    double start_time() const { return samples.empty() ? 0.0 : samples.front().t; }
    double end_time() const { return samples.empty() ? 0.0 : samples.back().t; }
};

enum class AssociationMode { full, iou_only };

struct AssociationConfig {
    int init_length = 5;          // consecutive associations to confirm a track
    double gate_radius = 3.0;     // m, around the Kalman prediction
    double appearance_threshold = 0.35;  // cosine distance
    double iou_threshold = 0.2;
    double nn3d_radius = 2.0;     // m
    int max_misses = 12;
    double frame_rate = 15.0;
    int feature_window = 30;
    KalmanNoise noise;
    double p0_pos = 1.0;          // initial covariance diagonal
    double p0_vel = 2.0;
    AssociationMode mode = AssociationMode::full;
    int smooth_window = 5;  // centered output smoothing (1 = off)
    bool post_filter = true;
    double collision_scale = 0.7;  // post-filter footprint scale (tracking noise slack)
    ClassMap<double> speed_cap{{20.0, 20.0, 20.0, 4.0, 10.0}};
    ClassMap<double> footprint_radius{{1.0, 1.8, 1.8, 0.3, 0.5}};
};

// Gated-out cost entries are replaced by this sentinel; any assignment whose
// cost passes kSentinelCut is discarded as unmatched.
inline constexpr double kGateSentinel = 1e6;
inline constexpr double kSentinelCut = 1e5;

// ---------------------------------------------------------------------------
// Pure helpers

double iou(const geometry::BBox& a, const geometry::BBox& b);

KalmanState kalman_init(const Vec2& pos, const Vec2& vel, double p0_pos, double p0_vel);
KalmanState kalman_predict(const KalmanState& s, double dt, const KalmanNoise& noise);
KalmanState kalman_update(const KalmanState& s, const Vec2& z, const KalmanNoise& noise);

// Minimum-cost assignment; returns min(n, m) (row, col) pairs achieving the
// global optimum over injective assignments.
std::vector<std::pair<int, int>> hungarian(const std::vector<std::vector<double>>& cost);

// Min over the track's last `feature_window` stored features of the cosine
// distance to the detection feature.
double appearance_cost(const Track& t, const Detection& d, int feature_window);

struct GroundedDetection {
    Detection det;
    Vec2 ground;
};

struct AssociationResult {
    std::vector<std::pair<int, int>> matches;  // (track index, detection index)
    std::vector<int> unmatched_tracks;
    std::vector<int> unmatched_detections;
};

// Two Hungarian stages (appearance with Kalman/appearance gates, then IOU vs
// the last successful detection gated by appearance), followed by a 3D
// nearest-neighbour pass for the leftovers.
AssociationResult associate_frame(const std::vector<Track>& tracks,
                                  const std::vector<GroundedDetection>& detections,
                                  const AssociationConfig& cfg);

// ---------------------------------------------------------------------------
// Stream tracker

std::vector<TrackedTrajectory> track_stream(const std::vector<Detection>& detections,
                                            const geometry::Calibration& calib,
                                            const AssociationConfig& cfg);

}  // namespace vibe::tracker
