#include "vibe/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace vibe::sim {

double normalize_angle(double a) {
    const double two_pi = 2.0 * std::numbers::pi;
    a = std::fmod(a, two_pi);
    if (a <= -std::numbers::pi) a += two_pi;
    if (a > std::numbers::pi) a -= two_pi;
    return a;
}

namespace {

// Distance along the ray (origin o, unit direction d) to segment [a, b];
// +inf when the ray misses.
double ray_segment(const Vec2& o, const Vec2& d, const Vec2& a, const Vec2& b) {
    const Vec2 e = b - a;
    const double denom = d.cross(e);
    if (std::abs(denom) < 1e-14) return std::numeric_limits<double>::infinity();
    const Vec2 ao = a - o;
    const double t = ao.cross(e) / denom;
    const double s = ao.cross(d) / denom;
    if (t >= 0.0 && s >= 0.0 && s <= 1.0) return t;
    return std::numeric_limits<double>::infinity();
}

// Distance along the ray to a disc of radius r centered at c.
double ray_disc(const Vec2& o, const Vec2& d, const Vec2& c, double r) {
    const Vec2 oc = o - c;
    const double b = d.dot(oc);
    const double q = oc.squared_norm() - r * r;
    if (q <= 0.0) return 0.0;  // origin inside the footprint
    const double disc = b * b - q;
    if (disc < 0.0) return std::numeric_limits<double>::infinity();
    const double t = -b - std::sqrt(disc);
    return t >= 0.0 ? t : std::numeric_limits<double>::infinity();
}

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
    const Vec2 e = b - a;
    const double len2 = e.squared_norm();
    if (len2 < 1e-18) return distance(p, a);
    const double t = std::clamp((p - a).dot(e) / len2, 0.0, 1.0);
    return distance(p, a + e * t);
}

template <typename Fn>
void for_each_segment(const SceneElement& el, const Fn& fn) {
    const std::size_t n = el.points.size();
    for (std::size_t i = 0; i + 1 < n; ++i) fn(el.points[i], el.points[i + 1]);
    if (el.closed() && n > 2) fn(el.points[n - 1], el.points[0]);
}

}  // namespace

std::vector<double> lidar_scan(const AgentState& agent, const SceneLayout& scene,
                               const std::vector<AgentState>& others, const SimConfig& cfg) {
    const int beams = cfg.lidar_beams;
    std::vector<double> out(static_cast<std::size_t>(beams) * kLidarChannels, 0.0);
    const double twopi = 2.0 * std::numbers::pi;

    for (int k = 0; k < beams; ++k) {
        const double ang = agent.heading + twopi * k / beams;
        const Vec2 dir{std::cos(ang), std::sin(ang)};

        double static_d = cfg.max_range;
        double zebra_d = cfg.max_range;
        for (const auto& el : scene.elements) {
            if (el.tag == ElementTag::pavement) continue;
            double* slot = (el.tag == ElementTag::zebra) ? &zebra_d : &static_d;
            for_each_segment(el, [&](const Vec2& a, const Vec2& b) {
                const double t = ray_segment(agent.position, dir, a, b);
                if (t < *slot) *slot = t;
            });
        }

        double agent_d = cfg.max_range;
        double range_rate = 0.0;
        double class_code = 0.0;
        for (const auto& o : others) {
            if (!o.alive || o.id == agent.id) continue;
            const double t = ray_disc(agent.position, dir, o.position, cfg.footprint[o.cls]);
            if (t < agent_d) {
                agent_d = t;
                range_rate = (o.velocity - agent.velocity).dot(dir);
                class_code = (static_cast<int>(o.cls) + 1) / static_cast<double>(kNumClasses);
            }
        }

        double* row = &out[static_cast<std::size_t>(k) * kLidarChannels];
        row[0] = std::min(static_d, cfg.max_range);
        row[1] = std::min(zebra_d, cfg.max_range);
        row[2] = std::min(agent_d, cfg.max_range);
        row[3] = range_rate;
        row[4] = class_code;
    }
    return out;
}

AgentState step(const AgentState& state, const Action& action, const SimConfig& cfg) {
    const double mag = action.displacement.norm();
    if (mag > cfg.max_step * (1.0 + 1e-12)) {
        throw ActionOutOfRange("displacement " + std::to_string(mag) + " exceeds max_step " +
                               std::to_string(cfg.max_step));
    }
    AgentState next = state;
    next.position += action.displacement;
    next.velocity = action.displacement / cfg.dt();
    if (mag > 1e-4) {
        next.heading = normalize_angle(std::atan2(action.displacement.y, action.displacement.x));
    }
    return next;
}

CollisionKind detect_collision(const AgentState& agent, const std::vector<AgentState>& others,
                               const SceneLayout& scene, const SimConfig& cfg) {
    const double r = cfg.footprint[agent.cls];
    for (const auto& o : others) {
        if (!o.alive || o.id == agent.id) continue;
        if (distance(agent.position, o.position) < r + cfg.footprint[o.cls]) {
            return CollisionKind::agent_collision;
        }
    }
    for (const auto& el : scene.elements) {
        if (el.tag != ElementTag::wall) continue;
        bool hit = false;
        for_each_segment(el, [&](const Vec2& a, const Vec2& b) {
            if (!hit && point_segment_distance(agent.position, a, b) < r) hit = true;
        });
        if (hit) return CollisionKind::static_collision;
    }
    return CollisionKind::none;
}

Observation make_observation(const AgentState& agent, const SceneLayout& scene,
                             const std::vector<AgentState>& others, const SimConfig& cfg,
                             int exit_count) {
    Observation obs;
    obs.beams = cfg.lidar_beams;
    obs.lidar = lidar_scan(agent, scene, others, cfg);
    obs.heading_sin = std::sin(agent.heading);
    obs.heading_cos = std::cos(agent.heading);
    obs.distance_to_goal = distance(agent.position, agent.goal);
    obs.exit_onehot.assign(std::max(1, exit_count), 0.0);
    if (agent.target_exit >= 0 && agent.target_exit < exit_count) {
        obs.exit_onehot[agent.target_exit] = 1.0;
    }
    return obs;
}

// ---------------------------------------------------------------------------
// ReplayWorld

ReplayWorld::ReplayWorld(const std::vector<tracker::TrackedTrajectory>& dataset,
                         double frame_rate)
    : dataset_(&dataset), frame_rate_(frame_rate) {
    first_tick_.reserve(dataset.size());
    for (const auto& t : dataset) first_tick_.push_back(tick_of(t.start_time()));
}

AgentState ReplayWorld::state(int traj, int tick) const {
    const auto& t = (*dataset_)[traj];
    const int k = tick - first_tick_[traj];
    const int n = static_cast<int>(t.samples.size());
    AgentState s;
    s.id = t.id;
    s.cls = t.cls;
    s.position = t.samples[k].pos;
    if (n >= 2) {
        const double dt = 1.0 / frame_rate_;
        // forward difference; backward at the final sample
        const int a = (k + 1 < n) ? k : k - 1;
        const Vec2 diff = t.samples[a + 1].pos - t.samples[a].pos;
        s.velocity = diff / dt;
        if (diff.norm() > 1e-6) {
            s.heading = normalize_angle(std::atan2(diff.y, diff.x));
        }
    }
    s.goal = t.samples.back().pos;
    return s;
}

std::vector<AgentState> ReplayWorld::states_at(int tick, int exclude_traj) const {
    std::vector<AgentState> out;
    for (int i = 0; i < static_cast<int>(dataset_->size()); ++i) {
        if (i == exclude_traj || !active(i, tick)) continue;
        out.push_back(state(i, tick));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Simulator

Simulator::Simulator(SceneLayout scene, std::vector<tracker::TrackedTrajectory> dataset,
                     SimConfig cfg)
    : scene_(std::move(scene)),
      dataset_(std::move(dataset)),
      cfg_(cfg),
      replay_(dataset_, cfg.frame_rate) {}

int Simulator::nearest_exit(const Vec2& p) const {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < scene_.exits.size(); ++i) {
        const double d = distance(scene_.exits[i].point, p);
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(i);
        }
    }
    return best;
}

Episode Simulator::init_episode(int traj_index, double t, int horizon) {
    if (traj_index < 0 || traj_index >= static_cast<int>(dataset_.size())) {
        throw NoSuchAgentAtTime("trajectory index out of range");
    }
    const int tick = replay_.tick_of(t);
    if (!replay_.active(traj_index, tick) || tick >= replay_.last_tick(traj_index)) {
        throw NoSuchAgentAtTime("agent " + std::to_string(dataset_[traj_index].id) +
                                " has no data (or no successor sample) at t=" + std::to_string(t));
    }
    agent_ = replay_.state(traj_index, tick);
    agent_.goal = dataset_[traj_index].samples.back().pos;
    agent_.target_exit = nearest_exit(agent_.goal);
    agent_.alive = true;
    controlled_traj_ = traj_index;
    tick_ = tick;

    Episode ep;
    ep.start_time = replay_.time_of(tick);
    ep.traj_index = traj_index;
    ep.horizon = horizon;
    ep.reason = TerminalReason::none;
    return ep;
}

Observation Simulator::observe() const {
    return make_observation(agent_, scene_, replay_.states_at(tick_, controlled_traj_), cfg_,
                            exit_count());
}

CollisionKind Simulator::advance(const Action& action) {
    Action clamped = action;
    const double mag = clamped.displacement.norm();
    if (mag > cfg_.max_step) {
        clamped.displacement = clamped.displacement * (cfg_.max_step / mag);
    }
    agent_ = step(agent_, clamped, cfg_);
    tick_ += 1;
    return detect_collision(agent_, replay_.states_at(tick_, controlled_traj_), scene_, cfg_);
}

bool Simulator::goal_reached() const {
    return distance(agent_.position, agent_.goal) < cfg_.goal_radius;
}

Rollout Simulator::rollout(const PolicyFn& policy, Episode& episode, bool training_mode,
                           int eval_window_ticks) {
    Rollout out;
    const int limit = training_mode ? episode.horizon : eval_window_ticks;
    episode.reason = TerminalReason::none;

    for (int k = 0; k < limit; ++k) {
        TransitionStep steprec;
        steprec.obs = observe();
        const PolicyDecision dec = policy(steprec.obs);
        steprec.action = dec.action;
        steprec.logp = dec.logp;

        const CollisionKind col = advance(dec.action);
        if (col != CollisionKind::none) {
            if (training_mode) {
                steprec.terminal = true;
                episode.reason = TerminalReason::collision;
            } else {
                out.collision_ticks.push_back(tick_);
            }
        }
        if (!steprec.terminal && goal_reached()) {
            steprec.terminal = true;
            episode.reason = TerminalReason::goal_reached;
        }
        if (!steprec.terminal && k == limit - 1) {
            steprec.truncated = true;
            episode.reason = TerminalReason::horizon;
        }
        const bool done = steprec.terminal;
        const bool truncated = steprec.truncated;
        out.steps.push_back(std::move(steprec));
        if (done) break;
        if (truncated) {
            out.final_obs = observe();
            break;
        }
    }
    out.reason = episode.reason;
    out.final_position = agent_.position;
    return out;
}

}  // namespace vibe::sim
