#include "vibe/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace vibe::synth {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Vec2 unit(double angle) { return {std::cos(angle), std::sin(angle)}; }

double arm_angle(const SynthConfig& cfg, int arm) { return kTwoPi * arm / cfg.arms; }

// perpendicular (left of u)
Vec2 perp(const Vec2& u) { return {-u.y, u.x}; }

}  // namespace

sim::SceneLayout generate_scene(const SynthConfig& cfg) {
    if (cfg.arms < 2) throw Error("roundabout needs at least 2 arms");
    sim::SceneLayout scene;
    const double w = cfg.road_halfwidth;
    const double r_in = cfg.radius - w;
    const double r_out = cfg.radius + w;
    const double arm_end = r_out + cfg.arm_length;
    const double lane = 0.5 * w;

    // central island
    sim::SceneElement island;
    island.tag = sim::ElementTag::wall;
    for (int k = 0; k < 48; ++k) island.points.push_back(unit(kTwoPi * k / 48) * r_in);
    island.points.push_back(island.points.front());
    scene.elements.push_back(std::move(island));

    const double delta = std::asin(w / r_out);  // half-opening of an arm mouth
    for (int a = 0; a < cfg.arms; ++a) {
        const double phi = arm_angle(cfg, a);
        const Vec2 u = unit(phi);
        const Vec2 n = perp(u);
        const double r_j = std::sqrt(r_out * r_out - w * w);

        // arm side walls, interrupted at the zebra so pedestrians can cross;
        // the road edge line continues across the dropped kerb (visible to
        // lidar, not an obstacle)
        const double zc = r_out + 6.0;
        for (double side : {+1.0, -1.0}) {
            for (auto [s0, s1] : {std::pair{r_j, zc - 2.0}, std::pair{zc + 2.0, arm_end}}) {
                sim::SceneElement wall;
                wall.tag = sim::ElementTag::wall;
                wall.points.push_back(u * s0 + n * (side * w));
                wall.points.push_back(u * s1 + n * (side * w));
                scene.elements.push_back(std::move(wall));
            }
            sim::SceneElement edge;
            edge.tag = sim::ElementTag::road_edge;
            edge.points.push_back(u * (zc - 2.0) + n * (side * w));
            edge.points.push_back(u * (zc + 2.0) + n * (side * w));
            scene.elements.push_back(std::move(edge));
        }

        // outer ring arc between this arm and the next
        const double a0 = phi + delta;
        const double a1 = arm_angle(cfg, a + 1) - delta;
        sim::SceneElement arc;
        arc.tag = sim::ElementTag::wall;
        const int steps = std::max(2, static_cast<int>((a1 - a0) / 0.07));
        for (int k = 0; k <= steps; ++k) {
            arc.points.push_back(unit(a0 + (a1 - a0) * k / steps) * r_out);
        }
        scene.elements.push_back(std::move(arc));

        // zebra across the arm
        const double half_depth = 1.25;
        sim::SceneElement zebra;
        zebra.tag = sim::ElementTag::zebra;
        zebra.points = {u * (zc - half_depth) + n * w, u * (zc + half_depth) + n * w,
                        u * (zc + half_depth) - n * w, u * (zc - half_depth) - n * w};
        scene.elements.push_back(std::move(zebra));

        // per-lane exit / entry markers at the arm end
        scene.exits.push_back({a, u * arm_end - n * lane, phi});
        scene.entries.push_back({a, u * arm_end + n * lane});
    }
    return scene;
}

geometry::Calibration make_camera(const SynthConfig& cfg) {
    // pinhole at (0, -cam_distance, cam_height) looking at the origin,
    // rows: x right / y down / z forward
    const double cx = 0.0, cy = -cfg.cam_distance, cz = cfg.cam_height;
    double fwd[3] = {-cx, -cy, -cz};
    double nrm = std::sqrt(fwd[0] * fwd[0] + fwd[1] * fwd[1] + fwd[2] * fwd[2]);
    for (double& v : fwd) v /= nrm;
    double right[3] = {fwd[1], -fwd[0], 0.0};
    nrm = std::sqrt(right[0] * right[0] + right[1] * right[1]);
    for (double& v : right) v /= nrm;
    const double down[3] = {fwd[1] * right[2] - fwd[2] * right[1],
                            fwd[2] * right[0] - fwd[0] * right[2],
                            fwd[0] * right[1] - fwd[1] * right[0]};

    // ground -> image: K [r1 r2 t], t = -R c
    const double r[3][3] = {{right[0], right[1], right[2]},
                            {down[0], down[1], down[2]},
                            {fwd[0], fwd[1], fwd[2]}};
    double t[3];
    for (int i = 0; i < 3; ++i) t[i] = -(r[i][0] * cx + r[i][1] * cy + r[i][2] * cz);
    const double k[3][3] = {{cfg.cam_focal, 0, cfg.image_cx},
                            {0, cfg.cam_focal, cfg.image_cy},
                            {0, 0, 1}};
    double g2i[3][3];
    for (int i = 0; i < 3; ++i) {
        g2i[i][0] = k[i][0] * r[0][0] + k[i][1] * r[1][0] + k[i][2] * r[2][0];
        g2i[i][1] = k[i][0] * r[0][1] + k[i][1] * r[1][1] + k[i][2] * r[2][1];
        g2i[i][2] = k[i][0] * t[0] + k[i][1] * t[1] + k[i][2] * t[2];
    }

    geometry::Calibration calib;
    calib.homography = geometry::Homography::from_matrix(g2i).inverse();
    calib.distortion = {{cfg.image_cx, cfg.image_cy}, cfg.k1, cfg.k2, cfg.norm_radius};
    calib.camera_ground_foot = {cx, cy};
    calib.camera_height = cz;
    calib.class_heights[ObjectClass::car] = 0.4;
    calib.class_heights[ObjectClass::bus] = 0.6;
    calib.class_heights[ObjectClass::truck] = 0.6;
    calib.class_heights[ObjectClass::pedestrian] = 0.1;
    calib.class_heights[ObjectClass::bicycle] = 0.2;
    return calib;
}

// ---------------------------------------------------------------------------
// Paths

Vec2 Path::point_at(double s) const {
    if (points.empty()) return {};
    if (s <= 0.0) return points.front();
    if (s >= cum.back()) return points.back();
    const auto it = std::upper_bound(cum.begin(), cum.end(), s);
    const std::size_t i = static_cast<std::size_t>(it - cum.begin());
    const double seg = cum[i] - cum[i - 1];
    const double f = seg > 0 ? (s - cum[i - 1]) / seg : 0.0;
    return points[i - 1] + (points[i] - points[i - 1]) * f;
}

Vec2 Path::tangent_at(double s) const {
    if (points.size() < 2) return {1, 0};
    std::size_t i = 1;
    if (s > 0.0) {
        const auto it = std::upper_bound(cum.begin(), cum.end(), std::min(s, cum.back() - 1e-9));
        i = std::max<std::size_t>(1, static_cast<std::size_t>(it - cum.begin()));
    }
    const Vec2 d = points[i] - points[i - 1];
    const double n = d.norm();
    return n > 0 ? d / n : Vec2{1, 0};
}

namespace {

void append_point(Path& p, const Vec2& q) {
    if (!p.points.empty() && distance(p.points.back(), q) < 1e-12) return;
    if (p.points.empty()) {
        p.points.push_back(q);
        p.cum.push_back(0.0);
    } else {
        p.cum.push_back(p.cum.back() + distance(p.points.back(), q));
        p.points.push_back(q);
    }
}

}  // namespace

namespace {

// Resample to uniform spacing and smooth positions so lane junctions become
// car-like fillets instead of polyline kinks.
std::vector<Vec2> smooth_polyline(const std::vector<Vec2>& pts, double spacing, double span) {
    Path raw;
    for (const auto& q : pts) append_point(raw, q);
    std::vector<Vec2> dense;
    for (double s = 0.0; s < raw.length(); s += spacing) dense.push_back(raw.point_at(s));
    dense.push_back(raw.points.back());
    const int half = std::max(1, static_cast<int>(span / (2.0 * spacing)));
    std::vector<Vec2> out;
    const int n = static_cast<int>(dense.size());
    for (int k = 0; k < n; ++k) {
        const int w = std::min({half, k, n - 1 - k});
        Vec2 acc{0, 0};
        for (int j = k - w; j <= k + w; ++j) acc += dense[j];
        out.push_back(acc / static_cast<double>(2 * w + 1));
    }
    return out;
}

}  // namespace

Path expert_path(const SynthConfig& cfg, int entry_id, int exit_id) {
    if (entry_id == exit_id) throw NoPath("entry and exit arms must differ");
    if (entry_id < 0 || entry_id >= cfg.arms || exit_id < 0 || exit_id >= cfg.arms) {
        throw NoPath("arm id out of range");
    }
    const double w = cfg.road_halfwidth;
    const double lane = 0.5 * w;
    const double arm_end = cfg.radius + w + cfg.arm_length;
    const double ring_r = cfg.radius;

    const double phi_in = arm_angle(cfg, entry_id);
    const double phi_out = arm_angle(cfg, exit_id);
    const Vec2 u_in = unit(phi_in), n_in = perp(u_in);
    const Vec2 u_out = unit(phi_out), n_out = perp(u_out);

    const double merge_off = std::asin(lane / ring_r);
    const double th_in = phi_in + merge_off;
    double th_out = phi_out - merge_off;
    while (th_out <= th_in + 0.05) th_out += kTwoPi;

    const double mouth = cfg.radius + w + 3.0;  // protected straight past the ring mouth
    std::vector<Vec2> raw;
    raw.push_back(u_in * arm_end + n_in * lane);  // entry lane start
    raw.push_back(u_in * mouth + n_in * lane);    // cross the mouth on the lane line
    raw.push_back(unit(th_in) * ring_r);          // merge onto the ring
    const int steps = std::max(2, static_cast<int>((th_out - th_in) / 0.035));
    for (int k = 1; k <= steps; ++k) {
        raw.push_back(unit(th_in + (th_out - th_in) * k / steps) * ring_r);
    }
    raw.push_back(u_out * mouth - n_out * lane);
    raw.push_back(u_out * arm_end - n_out * lane);  // exit lane end

    Path p;
    for (const auto& q : smooth_polyline(raw, 0.25, 10.0)) append_point(p, q);
    return p;
}

// ---------------------------------------------------------------------------
// Scripted experts

namespace {

struct ZebraRect {
    Vec2 center;
    Vec2 u;  // along the arm; n across
    Vec2 n;
    double half_depth = 0;
    double half_width = 0;

    bool contains(const Vec2& p, double margin) const {
        const Vec2 d = p - center;
        return std::abs(d.dot(u)) <= half_depth + margin &&
               std::abs(d.dot(n)) <= half_width + margin;
    }
};

std::vector<ZebraRect> zebra_rects(const sim::SceneLayout& scene) {
    std::vector<ZebraRect> out;
    for (const auto& el : scene.elements) {
        if (el.tag != sim::ElementTag::zebra || el.points.size() < 4) continue;
        ZebraRect z;
        for (const auto& q : el.points) z.center += q;
        z.center = z.center / static_cast<double>(el.points.size());
        const double nc = z.center.norm();
        z.u = nc > 1e-9 ? z.center / nc : Vec2{1, 0};
        z.n = perp(z.u);
        for (const auto& q : el.points) {
            const Vec2 d = q - z.center;
            z.half_depth = std::max(z.half_depth, std::abs(d.dot(z.u)));
            z.half_width = std::max(z.half_width, std::abs(d.dot(z.n)));
        }
        out.push_back(z);
    }
    return out;
}

// position of a replayed trajectory at a global time, if active
bool replay_position(const tracker::TrackedTrajectory& t, double time, double frame_rate,
                     Vec2* out) {
    const int k = static_cast<int>(std::lround((time - t.start_time()) * frame_rate));
    if (k < 0 || k >= static_cast<int>(t.samples.size())) return false;
    *out = t.samples[k].pos;
    return true;
}

}  // namespace

tracker::TrackedTrajectory scripted_expert(const sim::SceneLayout& scene, int entry_id,
                                           int exit_id, const SynthConfig& cfg, std::uint64_t seed,
                                           const ExpertContext& ctx) {
    const Path path = expert_path(cfg, entry_id, exit_id);
    Rng rng(seed);

    const double dt = 1.0 / cfg.frame_rate;
    const double v_target =
        std::clamp(rng.normal(cfg.speed_mean, cfg.speed_std), 0.5, cfg.speed_mean * 1.8);

    // curvature-limited speed profile with a backward braking pass, so cars
    // slow into the merge and exit turns like real drivers
    const double grid = 0.25;
    const int cells = static_cast<int>(path.length() / grid) + 2;
    std::vector<double> v_prof(cells, v_target);
    {
        const double a_lat = 3.0;
        for (int i = 0; i < cells; ++i) {
            const double s0 = i * grid;
            const Vec2 t0 = path.tangent_at(std::max(0.0, s0 - 0.75));
            const Vec2 t1 = path.tangent_at(std::min(path.length(), s0 + 0.75));
            const double dang = std::abs(std::atan2(t0.cross(t1), t0.dot(t1)));
            const double kappa = dang / 1.5;
            if (kappa > 1e-4) {
                v_prof[i] = std::min(v_prof[i], std::max(2.0, std::sqrt(a_lat / kappa)));
            }
        }
        for (int i = cells - 2; i >= 0; --i) {
            v_prof[i] = std::min(v_prof[i], std::sqrt(v_prof[i + 1] * v_prof[i + 1] +
                                                      2.0 * 4.0 * grid));
        }
    }
    auto profile_speed = [&](double s0) {
        const int i = std::clamp(static_cast<int>(s0 / grid), 0, cells - 1);
        return v_prof[i];
    };

    // where the path crosses each zebra
    struct Crossing {
        double s_enter;
        const ZebraRect* zebra;
    };
    const auto zebras = zebra_rects(scene);
    std::vector<Crossing> crossings;
    {
        bool inside = false;
        for (double s = 0.0; s <= path.length(); s += 0.25) {
            const Vec2 q = path.point_at(s);
            const ZebraRect* hit = nullptr;
            for (const auto& z : zebras) {
                if (z.contains(q, 0.0)) {
                    hit = &z;
                    break;
                }
            }
            if (hit && !inside) crossings.push_back({s, hit});
            inside = hit != nullptr;
        }
    }

    auto zebra_occupied_soon = [&](const ZebraRect& z, double time) {
        if (!ctx.pedestrians) return false;
        for (double ahead = 0.0; ahead <= 2.0; ahead += 0.5) {
            for (const auto& ped : *ctx.pedestrians) {
                Vec2 p;
                if (replay_position(ped, time + ahead, cfg.frame_rate, &p) && z.contains(p, 0.4)) {
                    return true;
                }
            }
        }
        return false;
    };

    const double a_acc = 2.5, a_dec = 4.0;
    tracker::TrackedTrajectory traj;
    traj.id = ctx.id;
    traj.cls = ObjectClass::car;

    double s = 0.0, v = v_target, lateral = 0.0;
    for (int k = 0; k < 100000; ++k) {
        const double t_now = ctx.spawn_time + k * dt;
        const Vec2 base = path.point_at(s);
        const Vec2 tang = path.tangent_at(s);
        traj.samples.push_back({t_now, base + perp(tang) * lateral});
        if (s >= path.length()) break;

        double v_des = std::min(v_target, profile_speed(s));
        // brake toward a stop line 1.2 m before an occupied zebra; once at the
        // polygon edge the car is committed and clears it at speed
        for (const auto& c : crossings) {
            const bool committed = s >= c.s_enter - 0.2 && v >= 3.0;
            if (s >= c.s_enter || committed) continue;
            if (zebra_occupied_soon(*c.zebra, t_now)) {
                const double gap = (c.s_enter - 1.2) - s;
                v_des = gap <= 0.3
                            ? 0.0
                            : std::min(v_des, std::sqrt(2.0 * a_dec * (gap - 0.3)));
            }
        }
        // yield to earlier cars: follow the one ahead and brake for predicted
        // conflicts (their future replay positions are known exactly)
        if (ctx.other_cars) {
            for (const auto& other : *ctx.other_cars) {
                Vec2 p;
                if (replay_position(other, t_now, cfg.frame_rate, &p)) {
                    const Vec2 rel = p - (base + perp(tang) * lateral);
                    const double ahead = rel.dot(tang);
                    const double dist = rel.norm();
                    if (ahead > 0.5 && dist < 15.0 && ahead / std::max(dist, 1e-9) > 0.5) {
                        v_des = std::min(v_des, std::max(0.0, (dist - 6.0) / 1.0));
                    }
                }
                for (double tau = 0.2; tau <= 1.6; tau += 0.2) {
                    Vec2 fut;
                    if (!replay_position(other, t_now + tau, cfg.frame_rate, &fut)) continue;
                    const Vec2 mine = path.point_at(std::min(path.length(), s + v * tau));
                    if (distance(fut, mine) < 3.2) {
                        v_des = std::min(v_des,
                                         v_target * std::clamp((tau - 0.3) / 1.2, 0.0, 1.0));
                        break;
                    }
                }
            }
        }

        const double dv = std::clamp(v_des - v, -a_dec * dt, a_acc * dt);
        v = std::max(0.0, v + dv);
        s += v * dt;
        if (cfg.lateral_noise > 0.0) {
            lateral = 0.88 * lateral + cfg.lateral_noise * 0.4 * rng.normal();
            lateral = std::clamp(lateral, -0.3, 0.3);
        }
        if (s >= path.length()) s = path.length();
    }
    return traj;
}

// ---------------------------------------------------------------------------
// Detection rendering

std::vector<tracker::Detection> render_detections(
    const std::vector<tracker::TrackedTrajectory>& trajectories,
    const geometry::Calibration& calib, const SynthConfig& cfg, std::uint64_t seed) {
    // apparent image scale (px per ground meter) from the local jacobian
    auto px_per_meter = [&](const Vec2& g, ObjectClass cls) {
        const Vec2 a = geometry::ground_to_image(g, cls, calib);
        const Vec2 b = geometry::ground_to_image(g + Vec2{0.1, 0.0}, cls, calib);
        return distance(a, b) / 0.1;
    };
    static const ClassMap<double> width_m{{4.2, 9.0, 7.5, 0.6, 1.8}};
    static const ClassMap<double> height_m{{1.6, 3.2, 3.2, 1.7, 1.6}};

    const Rng base(seed);
    std::vector<tracker::Detection> out;
    for (const auto& traj : trajectories) {
        Rng id_rng = base.fork(static_cast<std::uint64_t>(traj.id) * 977 + 13);
        std::vector<double> mean(cfg.feature_dim);
        double nrm = 0.0;
        for (auto& v : mean) {
            v = id_rng.normal();
            nrm += v * v;
        }
        nrm = std::sqrt(std::max(nrm, 1e-12));
        for (auto& v : mean) v /= nrm;

        for (std::size_t k = 0; k < traj.samples.size(); ++k) {
            Rng srng = id_rng.fork(k + 1);
            if (srng.uniform01() < cfg.dropout) continue;
            const auto& sample = traj.samples[k];
            Vec2 g = sample.pos;
            if (cfg.position_noise > 0.0) {
                g += Vec2{srng.normal(0, cfg.position_noise), srng.normal(0, cfg.position_noise)};
            }
            tracker::Detection d;
            d.frame = static_cast<int>(std::lround(sample.t * cfg.frame_rate));
            d.cls = traj.cls;
            Vec2 px;
            try {
                px = geometry::ground_to_image(g, traj.cls, calib);
            } catch (const geometry::BehindPlane&) {
                continue;
            }
            const double scale = px_per_meter(g, traj.cls);
            const double bw = width_m[traj.cls] * scale;
            const double bh = height_m[traj.cls] * scale;
            d.bbox = {px.x - 0.5 * bw, px.y - bh, px.x + 0.5 * bw, px.y};
            d.confidence = 0.8 + 0.2 * srng.uniform01();
            d.feature.resize(cfg.feature_dim);
            // feature_noise is the total angular scale, split across dims
            const double sigma = cfg.feature_noise / std::sqrt(static_cast<double>(cfg.feature_dim));
            double fn = 0.0;
            for (int i = 0; i < cfg.feature_dim; ++i) {
                d.feature[i] = mean[i] + sigma * srng.normal();
                fn += d.feature[i] * d.feature[i];
            }
            fn = std::sqrt(std::max(fn, 1e-12));
            for (auto& v : d.feature) v /= fn;
            out.push_back(std::move(d));
        }
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const tracker::Detection& a, const tracker::Detection& b) {
                         return a.frame < b.frame;
                     });
    return out;
}

// ---------------------------------------------------------------------------
// Dataset generation

Dataset generate_dataset(const SynthConfig& cfg, std::uint64_t seed) {
    Dataset ds;
    ds.scene = generate_scene(cfg);
    ds.calib = make_camera(cfg);

    Rng rng(seed);
    const auto zebras = zebra_rects(ds.scene);
    const double dt = 1.0 / cfg.frame_rate;

    // car spawn schedule first, so the covered span is known
    std::vector<double> spawn(cfg.cars);
    std::vector<int> entry_of(cfg.cars), exit_of(cfg.cars);
    std::vector<double> last_entry_spawn(cfg.arms, -1e9);
    double t_cursor = 1.0;
    for (int i = 0; i < cfg.cars; ++i) {
        t_cursor += rng.exponential(cfg.mean_headway);
        const int entry = static_cast<int>(rng.uniform_int(cfg.arms));
        int exit = static_cast<int>(rng.uniform_int(cfg.arms - 1));
        if (exit >= entry) ++exit;
        double t = std::max(t_cursor, last_entry_spawn[entry] + 2.5);
        t = std::round(t / dt) * dt;  // tick aligned
        last_entry_spawn[entry] = t;
        spawn[i] = t;
        entry_of[i] = entry;
        exit_of[i] = exit;
    }
    const double span = (cfg.cars > 0 ? spawn.back() : 10.0) + 40.0;

    int next_id = 1;
    std::vector<tracker::TrackedTrajectory> peds;
    for (int i = 0; i < cfg.pedestrians && !zebras.empty(); ++i) {
        const auto& z = zebras[rng.uniform_int(zebras.size())];
        const double side = rng.uniform01() < 0.5 ? 1.0 : -1.0;
        const double slot = rng.uniform(-0.7, 0.7) * z.half_depth;  // walking line
        const double reach = z.half_width + 1.5;
        const Vec2 from = z.center + z.u * slot + z.n * (side * reach);
        const Vec2 to = z.center + z.u * slot - z.n * (side * reach);
        const double speed = std::clamp(cfg.ped_speed * (1.0 + 0.15 * rng.normal()), 0.5, 2.5);
        double t0 = rng.uniform(1.0, std::max(2.0, span * 0.95));
        t0 = std::round(t0 / dt) * dt;
        tracker::TrackedTrajectory ped;
        ped.id = next_id++;
        ped.cls = ObjectClass::pedestrian;
        const double total = distance(from, to);
        const int nsteps = static_cast<int>(std::ceil(total / (speed * dt)));
        // delay the spawn until the walking line is clear of earlier pedestrians
        for (int attempt = 0; attempt < 40; ++attempt) {
            bool clear = true;
            for (int k = 0; k <= nsteps && clear; ++k) {
                const double s = std::min(total, k * speed * dt);
                const Vec2 p = from + (to - from) * (s / total);
                for (const auto& other : peds) {
                    Vec2 q;
                    if (replay_position(other, t0 + k * dt, cfg.frame_rate, &q) &&
                        distance(p, q) < 0.9) {
                        clear = false;
                        break;
                    }
                }
            }
            if (clear) break;
            t0 += 2.0;
        }
        for (int k = 0; k <= nsteps; ++k) {
            const double s = std::min(total, k * speed * dt);
            ped.samples.push_back({t0 + k * dt, from + (to - from) * (s / total)});
        }
        peds.push_back(std::move(ped));
    }

    std::vector<std::uint64_t> car_seed(cfg.cars);
    std::vector<int> car_id(cfg.cars);
    for (int i = 0; i < cfg.cars; ++i) {
        car_seed[i] = rng.next_u64();
        car_id[i] = next_id++;
    }

    // Generate cars in spawn order, each yielding to earlier traffic. The
    // local rules cannot see later cars, so repair residual conflicts by
    // delaying the later car of any colliding pair and regenerating.
    std::vector<tracker::TrackedTrajectory> cars;
    for (int round = 0; round < 300; ++round) {
        cars.clear();
        for (int i = 0; i < cfg.cars; ++i) {
            ExpertContext ctx;
            ctx.spawn_time = spawn[i];
            ctx.id = car_id[i];
            ctx.pedestrians = &peds;
            ctx.other_cars = &cars;
            cars.push_back(scripted_expert(ds.scene, entry_of[i], exit_of[i], cfg, car_seed[i],
                                           ctx));
        }
        int worst = -1;
        for (int i = 0; i < cfg.cars && worst < 0; ++i) {
            for (int j = 0; j < cfg.cars && worst < 0; ++j) {
                if (i == j) continue;
                for (const auto& s : cars[i].samples) {
                    Vec2 q;
                    if (replay_position(cars[j], s.t, cfg.frame_rate, &q) &&
                        distance(s.pos, q) < 3.0) {
                        worst = spawn[i] > spawn[j] ? i : j;
                        break;
                    }
                }
            }
            if (worst < 0) {
                for (const auto& ped : peds) {
                    for (const auto& s : cars[i].samples) {
                        Vec2 q;
                        if (replay_position(ped, s.t, cfg.frame_rate, &q) &&
                            distance(s.pos, q) < 1.8) {
                            worst = i;
                            break;
                        }
                    }
                    if (worst >= 0) break;
                }
            }
        }
        if (worst < 0) break;
        spawn[worst] = std::round((spawn[worst] + 1.5) / dt) * dt;
    }

    ds.trajectories.reserve(peds.size() + cars.size());
    for (auto& p : peds) ds.trajectories.push_back(std::move(p));
    for (auto& c : cars) ds.trajectories.push_back(std::move(c));
    std::stable_sort(ds.trajectories.begin(), ds.trajectories.end(),
                     [](const auto& a, const auto& b) { return a.start_time() < b.start_time(); });

    double t_end = 0.0;
    for (const auto& t : ds.trajectories) t_end = std::max(t_end, t.end_time());
    ds.splits.train_t0 = 0.0;
    ds.splits.train_t1 = cfg.train_frac * t_end;
    ds.splits.val_t0 = ds.splits.train_t1;
    ds.splits.val_t1 = (cfg.train_frac + cfg.val_frac) * t_end;
    ds.splits.test_t0 = ds.splits.val_t1;
    ds.splits.test_t1 = t_end + 1.0;
    return ds;
}

std::vector<int> trajectories_in_window(const std::vector<tracker::TrackedTrajectory>& trajs,
                                        double t0, double t1) {
    std::vector<int> out;
    for (std::size_t i = 0; i < trajs.size(); ++i) {
        if (trajs[i].start_time() >= t0 && trajs[i].end_time() <= t1) {
            out.push_back(static_cast<int>(i));
        }
    }
    return out;
}

}  // namespace vibe::synth
