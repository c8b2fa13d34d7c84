#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "vibe/common.hpp"
#include "vibe/scene.hpp"
#include "vibe/tracker.hpp"

namespace vibe::sim {

struct ActionOutOfRange : Error {
    using Error::Error;
};
struct NoSuchAgentAtTime : Error {
    using Error::Error;
};

inline constexpr int kLidarChannels = 5;

struct SimConfig {
    int lidar_beams = 64;
    double max_range = 30.0;   // m
    double max_step = 2.0;     // m per tick
    double goal_radius = 2.0;  // m
    double frame_rate = 15.0;  // Hz
    ClassMap<double> footprint{{1.0, 1.8, 1.8, 0.3, 0.5}};
    double dt() const { return 1.0 / frame_rate; }
};

struct AgentState {
    int id = 0;
    ObjectClass cls = ObjectClass::car;
    Vec2 position;
    Vec2 velocity;
    double heading = 0.0;  // rad, normalized to (-pi, pi]
    Vec2 goal;
    int target_exit = 0;
    bool alive = true;
};

// Pseudo-LiDAR + scalar state.  The lidar block is beams x channels,
// row-major per beam: [static distance, zebra distance, agent distance,
// agent range rate, agent class code].
struct Observation {
    int beams = 0;
    std::vector<double> lidar;  // beams * kLidarChannels
    double heading_sin = 0.0;
    double heading_cos = 1.0;
    double distance_to_goal = 0.0;
    std::vector<double> exit_onehot;

    double lidar_at(int beam, int channel) const {
        return lidar[beam * kLidarChannels + channel];
    }
};

struct Action {
    Vec2 displacement;  // m per tick
};

enum class TerminalReason { none, collision, goal_reached, horizon };
enum class CollisionKind { none, agent_collision, static_collision };

struct Episode {
    double start_time = 0.0;
    int traj_index = -1;  // controlled agent: index into the replay dataset
    int horizon = 1;
    TerminalReason reason = TerminalReason::none;
};

struct PolicyDecision {
    Action action;
    double logp = 0.0;
};
using PolicyFn = std::function<PolicyDecision(const Observation&)>;
// Per-agent policy instances sharing parameters (factory keyed by agent id).
using PolicyFactory = std::function<PolicyFn(int agent_id)>;

struct TransitionStep {
    Observation obs;
    Action action;
    double logp = 0.0;
    double reward = 0.0;  // placeholder until relabeled
    bool terminal = false;
    bool truncated = false;
};

struct Rollout {
    std::vector<TransitionStep> steps;
    std::optional<Observation> final_obs;  // bootstrap state when truncated
    TerminalReason reason = TerminalReason::none;
    std::vector<int> collision_ticks;  // evaluation mode logs instead of terminating
    Vec2 final_position;
};

// ---------------------------------------------------------------------------
// Pure operations

std::vector<double> lidar_scan(const AgentState& agent, const SceneLayout& scene,
                               const std::vector<AgentState>& others, const SimConfig& cfg);

AgentState step(const AgentState& state, const Action& action, const SimConfig& cfg);

CollisionKind detect_collision(const AgentState& agent, const std::vector<AgentState>& others,
                               const SceneLayout& scene, const SimConfig& cfg);

double normalize_angle(double a);

// ---------------------------------------------------------------------------
// Replay of tracked trajectories on the global tick grid

class ReplayWorld {
public:
    ReplayWorld(const std::vector<tracker::TrackedTrajectory>& dataset, double frame_rate);

    int tick_of(double t) const { return static_cast<int>(std::lround(t * frame_rate_)); }
    double time_of(int tick) const { return tick / frame_rate_; }

    std::size_t size() const { return dataset_->size(); }
    const tracker::TrackedTrajectory& trajectory(int traj) const { return (*dataset_)[traj]; }
    int first_tick(int traj) const { return first_tick_[traj]; }
    int last_tick(int traj) const {
        return first_tick_[traj] + static_cast<int>((*dataset_)[traj].samples.size()) - 1;
    }
    bool active(int traj, int tick) const {
        return tick >= first_tick(traj) && tick <= last_tick(traj);
    }

    // Replayed state with finite-difference velocity and motion heading.
    AgentState state(int traj, int tick) const;

    std::vector<AgentState> states_at(int tick, int exclude_traj = -1) const;

private:
    const std::vector<tracker::TrackedTrajectory>* dataset_;
    double frame_rate_;
    std::vector<int> first_tick_;
};

// ---------------------------------------------------------------------------
// Episode simulator: one controlled agent, everything else replayed

class Simulator {
public:
    Simulator(SceneLayout scene, std::vector<tracker::TrackedTrajectory> dataset, SimConfig cfg);

    const SceneLayout& scene() const { return scene_; }
    const SimConfig& config() const { return cfg_; }
    const ReplayWorld& replay() const { return replay_; }
    int exit_count() const { return static_cast<int>(scene_.exits.size()); }
    int nearest_exit(const Vec2& p) const;

    // Clone the controlled agent from its recorded state at time t; all other
    // road users replay from t.  Throws NoSuchAgentAtTime.
    Episode init_episode(int traj_index, double t, int horizon);

    const AgentState& agent() const { return agent_; }
    int tick() const { return tick_; }
    Observation observe() const;

    // Applies the action (clamped to max_step), advances replay by one tick.
    CollisionKind advance(const Action& action);
    bool goal_reached() const;

    Rollout rollout(const PolicyFn& policy, Episode& episode, bool training_mode,
                    int eval_window_ticks = 0);

private:
    SceneLayout scene_;
    std::vector<tracker::TrackedTrajectory> dataset_;
    SimConfig cfg_;
    ReplayWorld replay_;
    AgentState agent_;
    int controlled_traj_ = -1;
    int tick_ = 0;
};

Observation make_observation(const AgentState& agent, const SceneLayout& scene,
                             const std::vector<AgentState>& others, const SimConfig& cfg,
                             int exit_count);

}  // namespace vibe::sim
