#include "vibe/behavior_metrics.hpp"

#include <algorithm>
#include <cmath>

namespace vibe::behavior {

namespace {

double sample_std(const std::vector<std::vector<double>>& samples, std::size_t dim) {
    double mean = 0.0;
    for (const auto& s : samples) mean += s[dim];
    mean /= static_cast<double>(samples.size());
    double var = 0.0;
    for (const auto& s : samples) var += (s[dim] - mean) * (s[dim] - mean);
    var /= static_cast<double>(samples.size());
    return std::sqrt(var);
}

}  // namespace

DistributionGrid kde(const std::vector<std::vector<double>>& samples,
                     std::vector<double> bandwidth, const std::vector<GridAxis>& axes) {
    if (samples.size() < 2) throw EmptySamples("kde needs at least 2 samples");
    const std::size_t d = axes.size();
    for (const auto& s : samples) {
        if (s.size() != d) throw GridMismatch("sample dimension does not match the grid");
    }
    bandwidth.resize(d, 0.0);

    DistributionGrid grid;
    grid.axes = axes;
    grid.probs.assign(grid.cells(), 0.0);

    std::vector<double> delta(d);
    std::vector<std::size_t> stride(d, 1);
    for (std::size_t i = 0; i < d; ++i) {
        if (axes[i].bins < 1 || axes[i].hi <= axes[i].lo) throw GridMismatch("bad grid axis");
        delta[i] = (axes[i].hi - axes[i].lo) / axes[i].bins;
    }
    for (std::size_t i = d - 1; i > 0; --i) stride[i - 1] = stride[i] * axes[i].bins;

    // Scott's rule per dimension where not supplied
    const double n_factor = std::pow(static_cast<double>(samples.size()),
                                     -1.0 / (static_cast<double>(d) + 4.0));
    for (std::size_t i = 0; i < d; ++i) {
        if (bandwidth[i] <= 0.0) {
            const double sigma = sample_std(samples, i);
            bandwidth[i] = sigma > 1e-12 ? sigma * n_factor : delta[i];
        }
    }

    // linear binning: each sample spreads over 2^d neighbouring cells
    std::vector<int> base(d);
    std::vector<double> frac(d);
    for (const auto& s : samples) {
        for (std::size_t i = 0; i < d; ++i) {
            const double u =
                std::clamp((s[i] - axes[i].lo) / delta[i] - 0.5, 0.0,
                           static_cast<double>(axes[i].bins - 1));
            base[i] = std::min(static_cast<int>(u), axes[i].bins - 1);
            frac[i] = u - base[i];
            if (base[i] == axes[i].bins - 1) frac[i] = 0.0;
        }
        const std::size_t corners = std::size_t{1} << d;
        for (std::size_t mask = 0; mask < corners; ++mask) {
            double wgt = 1.0;
            std::size_t idx = 0;
            for (std::size_t i = 0; i < d; ++i) {
                const bool hi = mask & (std::size_t{1} << i);
                wgt *= hi ? frac[i] : 1.0 - frac[i];
                idx += stride[i] * static_cast<std::size_t>(base[i] + (hi ? 1 : 0));
            }
            if (wgt > 0.0) grid.probs[idx] += wgt;
        }
    }

    // separable Gaussian convolution along each axis
    std::vector<double> tmp(grid.probs.size());
    for (std::size_t i = 0; i < d; ++i) {
        const double h_cells = bandwidth[i] / delta[i];
        const int radius = std::min(axes[i].bins - 1,
                                    std::max(1, static_cast<int>(std::ceil(4.0 * h_cells))));
        std::vector<double> kernel(2 * radius + 1);
        double ksum = 0.0;
        for (int k = -radius; k <= radius; ++k) {
            kernel[k + radius] = std::exp(-0.5 * (k / h_cells) * (k / h_cells));
            ksum += kernel[k + radius];
        }
        for (auto& v : kernel) v /= ksum;

        std::fill(tmp.begin(), tmp.end(), 0.0);
        const std::size_t bins = static_cast<std::size_t>(axes[i].bins);
        const std::size_t st = stride[i];
        const std::size_t total = grid.probs.size();
        for (std::size_t idx = 0; idx < total; ++idx) {
            const double v = grid.probs[idx];
            if (v == 0.0) continue;
            const std::size_t pos_i = (idx / st) % bins;
            for (int k = -radius; k <= radius; ++k) {
                const long long q = static_cast<long long>(pos_i) + k;
                if (q < 0 || q >= static_cast<long long>(bins)) continue;
                tmp[idx + (q - static_cast<long long>(pos_i)) * static_cast<long long>(st)] +=
                    v * kernel[k + radius];
            }
        }
        grid.probs.swap(tmp);
    }

    double total = 0.0;
    for (double v : grid.probs) total += v;
    if (total <= 0.0) throw EmptySamples("kde produced an empty density");
    for (auto& v : grid.probs) v /= total;
    return grid;
}

double jsd(const DistributionGrid& p, const DistributionGrid& q) {
    if (p.axes != q.axes || p.probs.size() != q.probs.size()) {
        throw GridMismatch("jsd requires identical grids");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < p.probs.size(); ++i) {
        const double pi = p.probs[i], qi = q.probs[i];
        const double m = 0.5 * (pi + qi);
        if (pi > 0.0) acc += 0.5 * pi * std::log(pi / m);
        if (qi > 0.0) acc += 0.5 * qi * std::log(qi / m);
    }
    return std::max(0.0, acc);
}

// ---------------------------------------------------------------------------
// Policy evaluation window

namespace {

struct Controlled {
    int traj = -1;
    int spawn_tick = 0;
    int end_tick = 0;  // replay end (exclusive control end)
    sim::AgentState state;
    sim::PolicyFn policy;
    bool active = false;
    bool spawned = false;
    bool collided = false;
    bool arrived = false;
};

}  // namespace

BehaviorReport evaluate_policy(const sim::PolicyFactory& policies, const sim::SceneLayout& scene,
                               const std::vector<tracker::TrackedTrajectory>& dataset,
                               double window_t0, int window_ticks, const sim::SimConfig& scfg,
                               const EvalConfig& cfg, std::vector<TraceSample>* traces) {
    const sim::ReplayWorld world(dataset, scfg.frame_rate);
    const int t0 = world.tick_of(window_t0);
    const int t1 = t0 + window_ticks;

    int data_lo = std::numeric_limits<int>::max(), data_hi = std::numeric_limits<int>::min();
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        data_lo = std::min(data_lo, world.first_tick(static_cast<int>(i)));
        data_hi = std::max(data_hi, world.last_tick(static_cast<int>(i)));
    }
    if (dataset.empty() || window_ticks < 1 || t1 <= data_lo || t0 >= data_hi) {
        throw WindowOutOfRange("evaluation window [" + std::to_string(window_t0) + ", +" +
                               std::to_string(window_ticks) + " ticks] has no data");
    }

    const int exit_count = static_cast<int>(scene.exits.size());
    auto nearest_exit = [&](const Vec2& p) {
        int best = 0;
        double bd = std::numeric_limits<double>::infinity();
        for (int e = 0; e < exit_count; ++e) {
            const double dd = distance(scene.exits[e].point, p);
            if (dd < bd) {
                bd = dd;
                best = e;
            }
        }
        return best;
    };

    // cars overlapping the window are controlled; everything else replays
    std::vector<Controlled> cars;
    std::vector<char> is_controlled(dataset.size(), 0);
    for (int i = 0; i < static_cast<int>(dataset.size()); ++i) {
        if (dataset[i].cls != ObjectClass::car) continue;
        const int lo = std::max(world.first_tick(i), t0);
        const int hi = std::min(world.last_tick(i), t1);
        if (hi - lo < 2) continue;
        Controlled c;
        c.traj = i;
        c.spawn_tick = lo;
        c.end_tick = hi;
        c.policy = policies(dataset[i].id);
        cars.push_back(std::move(c));
        is_controlled[i] = 1;
    }

    BehaviorReport rep;
    rep.window_ticks = window_ticks;
    rep.window_t0 = window_t0;
    rep.agents = static_cast<int>(cars.size());

    std::vector<std::vector<double>> sim_speed, sim_occ, sim_joint;
    std::vector<std::vector<double>> gt_speed, gt_occ, gt_joint;

    // ground-truth samples over the same spans
    for (const auto& c : cars) {
        for (int tick = c.spawn_tick; tick <= c.end_tick; ++tick) {
            const auto st = world.state(c.traj, tick);
            gt_speed.push_back({st.velocity.norm()});
            gt_occ.push_back({st.position.x, st.position.y});
            gt_joint.push_back({st.position.x, st.position.y, st.velocity.x, st.velocity.y});
        }
    }

    for (int tick = t0; tick < t1; ++tick) {
        // spawn
        for (auto& c : cars) {
            if (!c.spawned && tick >= c.spawn_tick) {
                c.state = world.state(c.traj, c.spawn_tick);
                c.state.goal = dataset[c.traj].samples.back().pos;
                c.state.target_exit = nearest_exit(c.state.goal);
                c.active = true;
                c.spawned = true;
            }
        }

        // replayed agents at this tick (everything not controlled)
        std::vector<sim::AgentState> replayed;
        for (int i = 0; i < static_cast<int>(dataset.size()); ++i) {
            if (is_controlled[i] || !world.active(i, tick)) continue;
            replayed.push_back(world.state(i, tick));
        }

        // observations from a simultaneous snapshot
        std::vector<sim::Action> actions(cars.size());
        for (std::size_t a = 0; a < cars.size(); ++a) {
            if (!cars[a].active) continue;
            std::vector<sim::AgentState> others = replayed;
            for (std::size_t b = 0; b < cars.size(); ++b) {
                if (b != a && cars[b].active) others.push_back(cars[b].state);
            }
            const auto obs = sim::make_observation(cars[a].state, scene, others, scfg, exit_count);
            sim::Action act = cars[a].policy(obs).action;
            const double mag = act.displacement.norm();
            if (mag > scfg.max_step) act.displacement = act.displacement * (scfg.max_step / mag);
            actions[a] = act;
        }

        // apply all actions, then resolve collisions and departures
        for (std::size_t a = 0; a < cars.size(); ++a) {
            if (!cars[a].active) continue;
            cars[a].state = sim::step(cars[a].state, actions[a], scfg);
        }
        std::vector<sim::AgentState> replayed_next;
        for (int i = 0; i < static_cast<int>(dataset.size()); ++i) {
            if (is_controlled[i] || !world.active(i, tick + 1)) continue;
            replayed_next.push_back(world.state(i, tick + 1));
        }
        for (std::size_t a = 0; a < cars.size(); ++a) {
            if (!cars[a].active) continue;
            std::vector<sim::AgentState> others = replayed_next;
            for (std::size_t b = 0; b < cars.size(); ++b) {
                if (b != a && cars[b].active) others.push_back(cars[b].state);
            }
            if (sim::detect_collision(cars[a].state, others, scene, scfg) !=
                sim::CollisionKind::none) {
                cars[a].collided = true;
            }
        }
        for (auto& c : cars) {
            if (!c.active) continue;
            // record a sample for the state after this tick's motion
            sim_speed.push_back({c.state.velocity.norm()});
            sim_occ.push_back({c.state.position.x, c.state.position.y});
            sim_joint.push_back(
                {c.state.position.x, c.state.position.y, c.state.velocity.x, c.state.velocity.y});
            if (traces) {
                traces->push_back({tick + 1, dataset[c.traj].id, ObjectClass::car,
                                   c.state.position, c.state.velocity, true});
            }
            if (distance(c.state.position, c.state.goal) < scfg.goal_radius) {
                c.arrived = true;
                c.active = false;  // reached its exit, leaves the scene
            } else if (tick + 1 >= c.end_tick) {
                c.active = false;  // control span over
            }
        }
        if (traces) {
            for (const auto& r : replayed_next) {
                traces->push_back({tick + 1, r.id, r.cls, r.position, r.velocity, false});
            }
        }
    }

    for (const auto& c : cars) {
        if (!c.spawned) continue;
        if (c.collided) rep.colliding_agents += 1;
        // exit assessment only for agents whose recorded end falls in-window
        if (world.last_tick(c.traj) <= t1) {
            rep.exit_candidates += 1;
            const bool ok =
                c.arrived || distance(c.state.position,
                                      scene.exits[c.state.target_exit].point) < scfg.goal_radius;
            if (!ok) rep.exit_failures += 1;
        }
    }
    rep.collision_probability =
        rep.agents > 0 ? static_cast<double>(rep.colliding_agents) / rep.agents : 0.0;
    rep.exit_failure_probability =
        rep.exit_candidates > 0 ? static_cast<double>(rep.exit_failures) / rep.exit_candidates
                                : 0.0;

    if (sim_speed.size() >= 2 && gt_speed.size() >= 2) {
        Vec2 lo, hi;
        scene.bounds(lo, hi, 2.0);
        const std::vector<GridAxis> speed_axes{{0.0, cfg.speed_max, cfg.speed_bins}};
        const std::vector<GridAxis> occ_axes{{lo.x, hi.x, cfg.occupancy_bins},
                                             {lo.y, hi.y, cfg.occupancy_bins}};
        const std::vector<GridAxis> joint_axes{{lo.x, hi.x, cfg.joint_pos_bins},
                                               {lo.y, hi.y, cfg.joint_pos_bins},
                                               {-cfg.vel_max, cfg.vel_max, cfg.joint_vel_bins},
                                               {-cfg.vel_max, cfg.vel_max, cfg.joint_vel_bins}};
        const std::vector<double> bw{cfg.bandwidth};
        rep.jsd_speed = jsd(kde(sim_speed, {cfg.bandwidth}, speed_axes),
                            kde(gt_speed, {cfg.bandwidth}, speed_axes));
        rep.jsd_occupancy = jsd(kde(sim_occ, {cfg.bandwidth, cfg.bandwidth}, occ_axes),
                                kde(gt_occ, {cfg.bandwidth, cfg.bandwidth}, occ_axes));
        rep.jsd_joint = jsd(
            kde(sim_joint, {cfg.bandwidth, cfg.bandwidth, cfg.bandwidth, cfg.bandwidth},
                joint_axes),
            kde(gt_joint, {cfg.bandwidth, cfg.bandwidth, cfg.bandwidth, cfg.bandwidth},
                joint_axes));
    } else {
        rep.jsd_speed = rep.jsd_occupancy = rep.jsd_joint = std::log(2.0);
    }
    return rep;
}

}  // namespace vibe::behavior
