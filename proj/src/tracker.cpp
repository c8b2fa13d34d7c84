#include "vibe/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace vibe::tracker {

double iou(const geometry::BBox& a, const geometry::BBox& b) {
    const double ix = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
    const double iy = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
    if (ix <= 0.0 || iy <= 0.0) return 0.0;
    const double inter = ix * iy;
    const double uni = a.width() * a.height() + b.width() * b.height() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

// ---------------------------------------------------------------------------
// Kalman filter, constant-velocity model in the ground plane

KalmanState kalman_init(const Vec2& pos, const Vec2& vel, double p0_pos, double p0_vel) {
    KalmanState s;
    s.mean[0] = pos.x;
    s.mean[1] = pos.y;
    s.mean[2] = vel.x;
    s.mean[3] = vel.y;
    s.cov[0][0] = s.cov[1][1] = p0_pos;
    s.cov[2][2] = s.cov[3][3] = p0_vel;
    return s;
}

namespace {

void symmetrize(KalmanState& s) {
    for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j) {
            const double v = 0.5 * (s.cov[i][j] + s.cov[j][i]);
            s.cov[i][j] = s.cov[j][i] = v;
        }
}

}  // namespace

KalmanState kalman_predict(const KalmanState& s, double dt, const KalmanNoise& noise) {
    KalmanState out;
    out.mean[0] = s.mean[0] + dt * s.mean[2];
    out.mean[1] = s.mean[1] + dt * s.mean[3];
    out.mean[2] = s.mean[2];
    out.mean[3] = s.mean[3];

    // P' = F P F^T + Q with F = [I, dt*I; 0, I]
    double fp[4][4];
    for (int j = 0; j < 4; ++j) {
        fp[0][j] = s.cov[0][j] + dt * s.cov[2][j];
        fp[1][j] = s.cov[1][j] + dt * s.cov[3][j];
        fp[2][j] = s.cov[2][j];
        fp[3][j] = s.cov[3][j];
    }
    for (int i = 0; i < 4; ++i) {
        out.cov[i][0] = fp[i][0] + dt * fp[i][2];
        out.cov[i][1] = fp[i][1] + dt * fp[i][3];
        out.cov[i][2] = fp[i][2];
        out.cov[i][3] = fp[i][3];
    }
    out.cov[0][0] += noise.q_pos;
    out.cov[1][1] += noise.q_pos;
    out.cov[2][2] += noise.q_vel;
    out.cov[3][3] += noise.q_vel;
    symmetrize(out);
    return out;
}

KalmanState kalman_update(const KalmanState& s, const Vec2& z, const KalmanNoise& noise) {
    // Innovation covariance S = H P H^T + R with H = [I2 0]
    const double s00 = s.cov[0][0] + noise.r_meas;
    const double s01 = s.cov[0][1];
    const double s11 = s.cov[1][1] + noise.r_meas;
    const double det = s00 * s11 - s01 * s01;
    if (!(det > 1e-300) || !std::isfinite(det)) {
        throw SingularInnovation("innovation covariance is not invertible");
    }
    const double i00 = s11 / det, i01 = -s01 / det, i11 = s00 / det;

    // Gain K = P H^T S^-1 (4x2)
    double k[4][2];
    for (int i = 0; i < 4; ++i) {
        k[i][0] = s.cov[i][0] * i00 + s.cov[i][1] * i01;
        k[i][1] = s.cov[i][0] * i01 + s.cov[i][1] * i11;
    }

    const double inn_x = z.x - s.mean[0];
    const double inn_y = z.y - s.mean[1];
    KalmanState out;
    for (int i = 0; i < 4; ++i) out.mean[i] = s.mean[i] + k[i][0] * inn_x + k[i][1] * inn_y;

    // Joseph form: P = (I-KH) P (I-KH)^T + K R K^T
    double ikh[4][4] = {};
    for (int i = 0; i < 4; ++i) ikh[i][i] = 1.0;
    for (int i = 0; i < 4; ++i) {
        ikh[i][0] -= k[i][0];
        ikh[i][1] -= k[i][1];
    }
    double tmp[4][4];
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            double acc = 0.0;
            for (int l = 0; l < 4; ++l) acc += ikh[i][l] * s.cov[l][j];
            tmp[i][j] = acc;
        }
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            double acc = 0.0;
            for (int l = 0; l < 4; ++l) acc += tmp[i][l] * ikh[j][l];
            out.cov[i][j] = acc + noise.r_meas * (k[i][0] * k[j][0] + k[i][1] * k[j][1]);
        }
    symmetrize(out);
    return out;
}

// ---------------------------------------------------------------------------
// Hungarian algorithm (potentials / shortest augmenting path)

namespace {

std::vector<std::pair<int, int>> hungarian_rows_le_cols(const std::vector<std::vector<double>>& a,
                                                        int n, int m) {
    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
    std::vector<int> p(m + 1, 0), way(m + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(m + 1, kInf);
        std::vector<char> used(m + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            int j1 = -1;
            double delta = kInf;
            for (int j = 1; j <= m; ++j) {
                if (used[j]) continue;
                const double cur = a[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<std::pair<int, int>> result;
    result.reserve(n);
    for (int j = 1; j <= m; ++j) {
        if (p[j] != 0) result.emplace_back(p[j] - 1, j - 1);
    }
    std::sort(result.begin(), result.end());
    return result;
}

}  // namespace

std::vector<std::pair<int, int>> hungarian(const std::vector<std::vector<double>>& cost) {
    const int n = static_cast<int>(cost.size());
    if (n == 0) return {};
    const int m = static_cast<int>(cost[0].size());
    if (m == 0) return {};
    if (n <= m) return hungarian_rows_le_cols(cost, n, m);
    std::vector<std::vector<double>> t(m, std::vector<double>(n));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) t[j][i] = cost[i][j];
    auto flipped = hungarian_rows_le_cols(t, m, n);
    for (auto& pr : flipped) std::swap(pr.first, pr.second);
    std::sort(flipped.begin(), flipped.end());
    return flipped;
}

// ---------------------------------------------------------------------------
// Association

double appearance_cost(const Track& t, const Detection& d, int feature_window) {
    const int n = static_cast<int>(t.detections.size());
    const int first = std::max(0, n - feature_window);
    double best = 2.0;
    for (int i = first; i < n; ++i) {
        const auto& f = t.detections[i].feature;
        if (f.size() != d.feature.size() || f.empty()) continue;
        double dot = 0.0;
        for (std::size_t k = 0; k < f.size(); ++k) dot += f[k] * d.feature[k];
        best = std::min(best, 1.0 - dot);
    }
    return best;
}

namespace {

std::vector<std::pair<int, int>> gated_hungarian(const std::vector<std::vector<double>>& cost) {
    std::vector<std::pair<int, int>> kept;
    for (const auto& [r, c] : hungarian(cost)) {
        if (cost[r][c] < kSentinelCut) kept.emplace_back(r, c);
    }
    return kept;
}

}  // namespace

AssociationResult associate_frame(const std::vector<Track>& tracks,
                                  const std::vector<GroundedDetection>& detections,
                                  const AssociationConfig& cfg) {
    AssociationResult res;
    std::vector<int> track_left(tracks.size());
    std::vector<int> det_left(detections.size());
    for (std::size_t i = 0; i < tracks.size(); ++i) track_left[i] = static_cast<int>(i);
    for (std::size_t j = 0; j < detections.size(); ++j) det_left[j] = static_cast<int>(j);

    auto run_stage = [&](const std::vector<std::vector<double>>& cost) {
        std::vector<char> track_used(track_left.size(), 0), det_used(det_left.size(), 0);
        for (const auto& [r, c] : gated_hungarian(cost)) {
            res.matches.emplace_back(track_left[r], det_left[c]);
            track_used[r] = 1;
            det_used[c] = 1;
        }
        std::vector<int> tl, dl;
        for (std::size_t i = 0; i < track_left.size(); ++i)
            if (!track_used[i]) tl.push_back(track_left[i]);
        for (std::size_t j = 0; j < det_left.size(); ++j)
            if (!det_used[j]) dl.push_back(det_left[j]);
        track_left = std::move(tl);
        det_left = std::move(dl);
    };

    const bool iou_only = cfg.mode == AssociationMode::iou_only;

    // Stage 1: appearance cost gated by the Kalman radius and the appearance
    // threshold (skipped by the IOU-only baseline).
    if (!iou_only && !track_left.empty() && !det_left.empty()) {
        std::vector<std::vector<double>> cost(track_left.size(),
                                              std::vector<double>(det_left.size(), kGateSentinel));
        for (std::size_t r = 0; r < track_left.size(); ++r) {
            const Track& t = tracks[track_left[r]];
            const Vec2 pred{t.kalman.mean[0], t.kalman.mean[1]};
            for (std::size_t c = 0; c < det_left.size(); ++c) {
                const auto& gd = detections[det_left[c]];
                if (distance(gd.ground, pred) > cfg.gate_radius) continue;
                const double ac = appearance_cost(t, gd.det, cfg.feature_window);
                if (ac > cfg.appearance_threshold) continue;
                cost[r][c] = ac;
            }
        }
        run_stage(cost);
    }

    // Stage 2: IOU against the last successful detection, gated by the
    // appearance threshold (the baseline's only stage, then ungated by
    // appearance).
    if (!track_left.empty() && !det_left.empty()) {
        std::vector<std::vector<double>> cost(track_left.size(),
                                              std::vector<double>(det_left.size(), kGateSentinel));
        for (std::size_t r = 0; r < track_left.size(); ++r) {
            const Track& t = tracks[track_left[r]];
            if (t.detections.empty()) continue;
            const auto& last_bbox = t.detections.back().bbox;
            for (std::size_t c = 0; c < det_left.size(); ++c) {
                const auto& gd = detections[det_left[c]];
                const double overlap = iou(last_bbox, gd.det.bbox);
                if (overlap < cfg.iou_threshold) continue;
                if (!iou_only &&
                    appearance_cost(t, gd.det, cfg.feature_window) > cfg.appearance_threshold)
                    continue;
                cost[r][c] = 1.0 - overlap;
            }
        }
        run_stage(cost);
    }

    // Stage 3: nearest neighbour in 3D within nn3d_radius, greedy by distance.
    if (!iou_only) {
        while (!track_left.empty() && !det_left.empty()) {
            double best = cfg.nn3d_radius;
            int best_r = -1, best_c = -1;
            for (std::size_t r = 0; r < track_left.size(); ++r) {
                const Track& t = tracks[track_left[r]];
                const Vec2 pred{t.kalman.mean[0], t.kalman.mean[1]};
                for (std::size_t c = 0; c < det_left.size(); ++c) {
                    const double d = distance(detections[det_left[c]].ground, pred);
                    if (d <= best) {
                        best = d;
                        best_r = static_cast<int>(r);
                        best_c = static_cast<int>(c);
                    }
                }
            }
            if (best_r < 0) break;
            res.matches.emplace_back(track_left[best_r], det_left[best_c]);
            track_left.erase(track_left.begin() + best_r);
            det_left.erase(det_left.begin() + best_c);
        }
    }

    res.unmatched_tracks = std::move(track_left);
    res.unmatched_detections = std::move(det_left);
    std::sort(res.matches.begin(), res.matches.end());
    return res;
}

// ---------------------------------------------------------------------------
// Stream tracker

namespace {

struct StreamTrack : Track {
    bool ever_confirmed = false;
    int last_hit_frame = -1;
};

void append_hit(StreamTrack& t, int frame, const GroundedDetection& gd, const Vec2& recorded,
                int feature_window) {
    t.detections.push_back({frame, gd.det.bbox, gd.ground, gd.det.feature});
    // only the last feature_window samples feed association costs
    const std::size_t cap = static_cast<std::size_t>(std::max(1, feature_window));
    if (t.detections.size() > cap) t.detections.erase(t.detections.begin());
    t.positions.emplace_back(frame, recorded);
    t.last_frame = frame;
    t.last_hit_frame = frame;
    t.misses = 0;
}

std::vector<TrackedTrajectory> finalize(std::vector<StreamTrack>& tracks,
                                        const AssociationConfig& cfg) {
    std::vector<TrackedTrajectory> out;
    const double dt = 1.0 / cfg.frame_rate;
    // slower classes tolerate (and need) longer smoothing spans
    static const ClassMap<int> window_scale{{1, 1, 1, 3, 2}};
    for (auto& t : tracks) {
        if (!t.ever_confirmed) continue;
        const int half = std::max(0, cfg.smooth_window * window_scale[t.cls] / 2);
        TrackedTrajectory traj;
        traj.id = t.id;
        traj.cls = t.cls;
        std::vector<Vec2> raw;
        for (const auto& [frame, pos] : t.positions) {
            if (frame > t.last_hit_frame) break;  // drop trailing gap fills
            raw.push_back(pos);
        }
        const int n = static_cast<int>(raw.size());
        const int first = t.positions.empty() ? 0 : t.positions.front().first;
        for (int k = 0; k < n; ++k) {
            // centered smoothing, truncated at the track ends
            const int lo = std::max(0, k - half);
            const int hi = std::min(n - 1, k + half);
            Vec2 acc{0, 0};
            for (int j = lo; j <= hi; ++j) acc += raw[j];
            traj.samples.push_back({(first + k) * dt, acc / static_cast<double>(hi - lo + 1)});
        }
        if (traj.samples.size() >= 2) out.push_back(std::move(traj));
    }

    if (!cfg.post_filter) return out;

    // Speed cap.
    std::vector<char> drop(out.size(), 0);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double cap = cfg.speed_cap[out[i].cls];
        for (std::size_t k = 1; k < out[i].samples.size(); ++k) {
            const double v = distance(out[i].samples[k].pos, out[i].samples[k - 1].pos) *
                             cfg.frame_rate;
            if (v > cap) {
                drop[i] = 1;
                break;
            }
        }
    }
    // Mutual overlap flagged as collision.
    for (std::size_t i = 0; i < out.size(); ++i) {
        for (std::size_t j = i + 1; j < out.size(); ++j) {
            const double rr = cfg.collision_scale *
                              (cfg.footprint_radius[out[i].cls] + cfg.footprint_radius[out[j].cls]);
            const int f0 = static_cast<int>(std::lround(
                std::max(out[i].start_time(), out[j].start_time()) * cfg.frame_rate));
            const int f1 = static_cast<int>(std::lround(
                std::min(out[i].end_time(), out[j].end_time()) * cfg.frame_rate));
            const int bi = static_cast<int>(std::lround(out[i].start_time() * cfg.frame_rate));
            const int bj = static_cast<int>(std::lround(out[j].start_time() * cfg.frame_rate));
            for (int f = f0; f <= f1; ++f) {
                const auto& pi = out[i].samples[f - bi].pos;
                const auto& pj = out[j].samples[f - bj].pos;
                if (distance(pi, pj) < rr) {
                    const std::size_t ni = out[i].samples.size(), nj = out[j].samples.size();
                    if (ni * 10 < nj * 7) {
                        drop[i] = 1;
                    } else if (nj * 10 < ni * 7) {
                        drop[j] = 1;
                    } else {
                        drop[i] = drop[j] = 1;
                    }
                    break;
                }
            }
        }
    }
    std::vector<TrackedTrajectory> kept;
    for (std::size_t i = 0; i < out.size(); ++i)
        if (!drop[i]) kept.push_back(std::move(out[i]));
    return kept;
}

}  // namespace

std::vector<TrackedTrajectory> track_stream(const std::vector<Detection>& detections,
                                            const geometry::Calibration& calib,
                                            const AssociationConfig& cfg) {
    std::vector<StreamTrack> tracks;
    if (detections.empty()) return {};

    for (std::size_t i = 1; i < detections.size(); ++i) {
        if (detections[i].frame < detections[i - 1].frame) {
            throw OutOfOrderFrames("detection stream frame " +
                                   std::to_string(detections[i].frame) + " after frame " +
                                   std::to_string(detections[i - 1].frame));
        }
    }

    const double dt = 1.0 / cfg.frame_rate;
    int next_id = 1;
    std::size_t cursor = 0;
    const int first_frame = detections.front().frame;
    const int last_frame = detections.back().frame;

    for (int frame = first_frame; frame <= last_frame; ++frame) {
        std::vector<GroundedDetection> gdets;
        while (cursor < detections.size() && detections[cursor].frame == frame) {
            const auto& d = detections[cursor++];
            try {
                gdets.push_back({d, geometry::image_to_ground(d.bbox, d.cls, calib)});
            } catch (const geometry::BehindPlane&) {
                // unusable detection past the horizon
            }
        }

        // Predict confirmed tracks.
        std::vector<int> confirmed;
        for (std::size_t i = 0; i < tracks.size(); ++i) {
            auto& t = tracks[i];
            if (t.status != TrackStatus::confirmed) continue;
            t.kalman = kalman_predict(t.kalman, dt, cfg.noise);
            confirmed.push_back(static_cast<int>(i));
        }

        // Associate confirmed tracks in two gated stages plus 3D NN.
        std::vector<char> det_used(gdets.size(), 0);
        if (!confirmed.empty() && !gdets.empty()) {
            std::vector<Track> view;
            view.reserve(confirmed.size());
            for (int i : confirmed) view.push_back(tracks[i]);
            const AssociationResult res = associate_frame(view, gdets, cfg);
            for (const auto& [tv, dv] : res.matches) {
                auto& t = tracks[confirmed[tv]];
                t.kalman = kalman_update(t.kalman, gdets[dv].ground, cfg.noise);
                append_hit(t, frame, gdets[dv], {t.kalman.mean[0], t.kalman.mean[1]}, cfg.feature_window);
                det_used[dv] = 1;
            }
        }
        for (int i : confirmed) {
            auto& t = tracks[i];
            if (t.last_frame == frame) continue;
            t.misses += 1;
            t.positions.emplace_back(frame, Vec2{t.kalman.mean[0], t.kalman.mean[1]});
            t.last_frame = frame;
            if (t.misses >= cfg.max_misses) t.status = TrackStatus::dead;
        }

        // Tentative tracks associate by plain IOU against their last bbox.
        std::vector<int> tentative;
        for (std::size_t i = 0; i < tracks.size(); ++i)
            if (tracks[i].status == TrackStatus::tentative) tentative.push_back(static_cast<int>(i));
        std::vector<int> free_dets;
        for (std::size_t j = 0; j < gdets.size(); ++j)
            if (!det_used[j]) free_dets.push_back(static_cast<int>(j));

        std::vector<char> tent_matched(tentative.size(), 0);
        if (!tentative.empty() && !free_dets.empty()) {
            std::vector<std::vector<double>> cost(tentative.size(),
                                                  std::vector<double>(free_dets.size(),
                                                                      kGateSentinel));
            for (std::size_t r = 0; r < tentative.size(); ++r) {
                const auto& last_bbox = tracks[tentative[r]].detections.back().bbox;
                for (std::size_t c = 0; c < free_dets.size(); ++c) {
                    const auto& bbox = gdets[free_dets[c]].det.bbox;
                    const double overlap = iou(last_bbox, bbox);
                    if (overlap >= cfg.iou_threshold) {
                        cost[r][c] = 1.0 - overlap;
                        continue;
                    }
                    // small noisy boxes can jitter apart between frames; accept
                    // near misses by center distance, scaled by box size
                    const double diag = 0.5 * (std::hypot(last_bbox.width(), last_bbox.height()) +
                                               std::hypot(bbox.width(), bbox.height()));
                    const double cd = distance(last_bbox.bottom_center(), bbox.bottom_center());
                    if (cd <= 1.5 * diag) cost[r][c] = 1.0 + cd / (1.5 * diag);
                }
            }
            for (const auto& [r, c] : hungarian(cost)) {
                if (cost[r][c] >= kSentinelCut) continue;
                auto& t = tracks[tentative[r]];
                append_hit(t, frame, gdets[free_dets[c]], gdets[free_dets[c]].ground, cfg.feature_window);
                t.consecutive += 1;
                det_used[free_dets[c]] = 1;
                tent_matched[r] = 1;
                if (t.consecutive >= cfg.init_length) {
                    // promote: more than init_length consecutive detections seen
                    const auto& ps = t.positions;
                    const Vec2 p0 = ps.front().second;
                    const Vec2 p1 = ps.back().second;
                    const double span = (ps.back().first - ps.front().first) * dt;
                    const Vec2 vel = span > 0 ? (p1 - p0) / span : Vec2{0, 0};
                    t.kalman = kalman_init(p1, vel, cfg.p0_pos, cfg.p0_vel);
                    t.status = TrackStatus::confirmed;
                    t.ever_confirmed = true;
                }
            }
        }
        // A tentative track that misses a frame loses its consecutive chain.
        for (std::size_t r = 0; r < tentative.size(); ++r) {
            if (!tent_matched[r] && tracks[tentative[r]].status == TrackStatus::tentative)
                tracks[tentative[r]].status = TrackStatus::dead;
        }

        // Remaining detections start new tentative tracks.
        for (std::size_t j = 0; j < gdets.size(); ++j) {
            if (det_used[j]) continue;
            StreamTrack t;
            t.id = next_id++;
            t.cls = gdets[j].det.cls;
            t.status = TrackStatus::tentative;
            append_hit(t, frame, gdets[j], gdets[j].ground, cfg.feature_window);
            tracks.push_back(std::move(t));
        }
    }

    return finalize(tracks, cfg);
}

}  // namespace vibe::tracker
