#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>

#include <cmath>
#include <limits>

#include "vibe/tracker.hpp"

using namespace vibe;
using namespace vibe::tracker;

namespace {

// Brute-force minimum-cost injective assignment (oracle).
double brute_force_cost(const std::vector<std::vector<double>>& cost) {
    const int n = static_cast<int>(cost.size());
    const int m = static_cast<int>(cost[0].size());
    if (n > m) {
        std::vector<std::vector<double>> t(m, std::vector<double>(n));
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j) t[j][i] = cost[i][j];
        return brute_force_cost(t);
    }
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> cols(m);
    for (int j = 0; j < m; ++j) cols[j] = j;
    // DFS over injections of rows into columns
    std::vector<char> used(m, 0);
    std::function<void(int, double)> rec = [&](int row, double acc) {
        if (row == n) {
            best = std::min(best, acc);
            return;
        }
        for (int j = 0; j < m; ++j) {
            if (used[j]) continue;
            used[j] = 1;
            rec(row + 1, acc + cost[row][j]);
            used[j] = 0;
        }
    };
    rec(0, 0.0);
    return best;
}

double assignment_cost(const std::vector<std::vector<double>>& cost,
                       const std::vector<std::pair<int, int>>& asg) {
    double total = 0.0;
    for (const auto& [r, c] : asg) total += cost[r][c];
    return total;
}

// Plain-array matrix helpers for the independent Kalman recursion oracle.
using Mat4 = std::array<std::array<double, 4>, 4>;

Mat4 matmul(const Mat4& a, const Mat4& b) {
    Mat4 out{};
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            double acc = 0;
            for (int k = 0; k < 4; ++k) acc += a[i][k] * b[k][j];
            out[i][j] = acc;
        }
    return out;
}

Mat4 transpose(const Mat4& a) {
    Mat4 out{};
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) out[i][j] = a[j][i];
    return out;
}

struct OracleKf {
    std::array<double, 4> x{};
    Mat4 p{};

    void predict(double dt, double q_pos, double q_vel) {
        Mat4 f{};
        for (int i = 0; i < 4; ++i) f[i][i] = 1.0;
        f[0][2] = dt;
        f[1][3] = dt;
        std::array<double, 4> nx{};
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) nx[i] += f[i][j] * x[j];
        x = nx;
        p = matmul(matmul(f, p), transpose(f));
        p[0][0] += q_pos;
        p[1][1] += q_pos;
        p[2][2] += q_vel;
        p[3][3] += q_vel;
    }

    void update(double zx, double zy, double r) {
        const double s00 = p[0][0] + r, s01 = p[0][1], s11 = p[1][1] + r;
        const double det = s00 * s11 - s01 * s01;
        const double i00 = s11 / det, i01 = -s01 / det, i11 = s00 / det;
        double k[4][2];
        for (int i = 0; i < 4; ++i) {
            k[i][0] = p[i][0] * i00 + p[i][1] * i01;
            k[i][1] = p[i][0] * i01 + p[i][1] * i11;
        }
        const double ix = zx - x[0], iy = zy - x[1];
        for (int i = 0; i < 4; ++i) x[i] += k[i][0] * ix + k[i][1] * iy;
        Mat4 ikh{};
        for (int i = 0; i < 4; ++i) ikh[i][i] = 1.0;
        for (int i = 0; i < 4; ++i) {
            ikh[i][0] -= k[i][0];
            ikh[i][1] -= k[i][1];
        }
        Mat4 joseph = matmul(matmul(ikh, p), transpose(ikh));
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j)
                joseph[i][j] += r * (k[i][0] * k[j][0] + k[i][1] * k[j][1]);
        p = joseph;
    }
};

std::vector<double> unit_feature(int dim, int axis) {
    std::vector<double> f(dim, 0.0);
    f[axis % dim] = 1.0;
    return f;
}

Track make_track(Vec2 pred_pos, const std::vector<std::vector<double>>& features,
                 geometry::BBox last_bbox) {
    Track t;
    t.kalman.mean[0] = pred_pos.x;
    t.kalman.mean[1] = pred_pos.y;
    int frame = 0;
    for (const auto& f : features) t.detections.push_back({frame++, last_bbox, pred_pos, f});
    return t;
}

}  // namespace

TEST_CASE("iou basics") {
    const geometry::BBox a{0, 0, 1, 1};
    CHECK(iou(a, a) == doctest::Approx(1.0));
    CHECK(iou(a, {5, 5, 6, 6}) == 0.0);
    CHECK(iou(a, {0.5, 0, 1.5, 1}) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("kalman_predict: stationary and linear motion") {
    KalmanNoise noise;
    KalmanState s = kalman_init({3, 4}, {0, 0}, 1.0, 1.0);
    const KalmanState p = kalman_predict(s, 1.0 / 15.0, noise);
    CHECK(p.mean[0] == doctest::Approx(3.0));
    CHECK(p.mean[1] == doctest::Approx(4.0));

    KalmanState s2 = kalman_init({0, 0}, {1, 2}, 1.0, 1.0);
    const KalmanState p2 = kalman_predict(s2, 1.0, noise);
    CHECK(p2.mean[0] == doctest::Approx(1.0));
    CHECK(p2.mean[1] == doctest::Approx(2.0));
    CHECK(p2.mean[2] == doctest::Approx(1.0));
    CHECK(p2.mean[3] == doctest::Approx(2.0));
}

TEST_CASE("kalman matches an independent matrix recursion over 10 cycles") {
    KalmanNoise noise{0.01, 0.1, 0.25};
    KalmanState s = kalman_init({1, -2}, {0.5, 0.1}, 1.0, 2.0);
    OracleKf oracle;
    oracle.x = {1, -2, 0.5, 0.1};
    oracle.p[0][0] = oracle.p[1][1] = 1.0;
    oracle.p[2][2] = oracle.p[3][3] = 2.0;

    Rng rng(11);
    for (int k = 0; k < 10; ++k) {
        s = kalman_predict(s, 1.0 / 15.0, noise);
        oracle.predict(1.0 / 15.0, noise.q_pos, noise.q_vel);
        const Vec2 z{rng.uniform(-5, 5), rng.uniform(-5, 5)};
        s = kalman_update(s, z, noise);
        oracle.update(z.x, z.y, noise.r_meas);
        for (int i = 0; i < 4; ++i) {
            CHECK(std::abs(s.mean[i] - oracle.x[i]) < 1e-10);
            for (int j = 0; j < 4; ++j) CHECK(std::abs(s.cov[i][j] - oracle.p[i][j]) < 1e-10);
        }
    }
}

TEST_CASE("kalman_update: zero innovation keeps the position") {
    KalmanNoise noise;
    KalmanState s = kalman_init({2, 3}, {1, 1}, 1.0, 1.0);
    const KalmanState u = kalman_update(s, {2, 3}, noise);
    CHECK(u.mean[0] == doctest::Approx(2.0));
    CHECK(u.mean[1] == doctest::Approx(3.0));
    double prior_trace = 0, post_trace = 0;
    for (int i = 0; i < 4; ++i) {
        prior_trace += s.cov[i][i];
        post_trace += u.cov[i][i];
    }
    CHECK(post_trace <= prior_trace + 1e-12);
}

TEST_CASE("kalman_update: uninformative measurement keeps the prior") {
    KalmanNoise noise{0.01, 0.1, 1e12};
    KalmanState s = kalman_init({2, 3}, {1, -1}, 1.0, 1.0);
    const KalmanState u = kalman_update(s, {100, -50}, noise);
    for (int i = 0; i < 4; ++i) CHECK(std::abs(u.mean[i] - s.mean[i]) < 1e-6);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) CHECK(std::abs(u.cov[i][j] - s.cov[i][j]) < 1e-6);
}

TEST_CASE("kalman: noiseless constant-velocity target velocity recovery") {
    KalmanNoise noise{0.01, 0.5, 1e-4};
    const Vec2 vel{3.0, -1.5};
    KalmanState s = kalman_init({0, 0}, {0, 0}, 1.0, 4.0);
    const double dt = 1.0 / 15.0;
    for (int k = 1; k <= 30; ++k) {
        s = kalman_predict(s, dt, noise);
        s = kalman_update(s, {vel.x * k * dt, vel.y * k * dt}, noise);
    }
    CHECK(std::abs(s.mean[2] - vel.x) < 1e-3);
    CHECK(std::abs(s.mean[3] - vel.y) < 1e-3);
}

TEST_CASE("kalman covariance stays symmetric PSD over 1000 random cycles") {
    KalmanNoise noise{0.01, 0.1, 0.25};
    Rng rng(99);
    KalmanState s = kalman_init({0, 0}, {1, 1}, 1.0, 2.0);
    for (int k = 0; k < 1000; ++k) {
        s = kalman_predict(s, 1.0 / 15.0, noise);
        if (rng.uniform01() < 0.7) {
            s = kalman_update(s, {rng.uniform(-20, 20), rng.uniform(-20, 20)}, noise);
        }
        Eigen::Matrix4d p;
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) {
                p(i, j) = s.cov[i][j];
                CHECK(std::abs(s.cov[i][j] - s.cov[j][i]) < 1e-9);
            }
        const Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(p);
        CHECK(es.eigenvalues().minCoeff() >= -1e-9);
    }
}

TEST_CASE("hungarian: dominant diagonal") {
    const std::vector<std::vector<double>> cost = {
        {1, 100, 100}, {100, 2, 100}, {100, 100, 3}};
    const auto asg = hungarian(cost);
    REQUIRE(asg.size() == 3);
    for (const auto& [r, c] : asg) CHECK(r == c);
}

TEST_CASE("hungarian: matches brute force on 50 random 7x7 matrices") {
    Rng rng(42);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::vector<double>> cost(7, std::vector<double>(7));
        for (auto& row : cost)
            for (auto& v : row) v = rng.uniform(-10, 10);
        const auto asg = hungarian(cost);
        REQUIRE(asg.size() == 7);
        CHECK(assignment_cost(cost, asg) == doctest::Approx(brute_force_cost(cost)).epsilon(1e-12));
    }
}

TEST_CASE("hungarian: rectangular 2x4 matches injection oracle") {
    Rng rng(43);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<std::vector<double>> cost(2, std::vector<double>(4));
        for (auto& row : cost)
            for (auto& v : row) v = rng.uniform(0, 10);
        const auto asg = hungarian(cost);
        REQUIRE(asg.size() == 2);
        CHECK(assignment_cost(cost, asg) == doctest::Approx(brute_force_cost(cost)).epsilon(1e-12));
    }
}

TEST_CASE("hungarian: random shapes up to 7 match brute force, injective") {
    Rng rng(44);
    for (int trial = 0; trial < 60; ++trial) {
        const int n = 1 + static_cast<int>(rng.uniform_int(7));
        const int m = 1 + static_cast<int>(rng.uniform_int(7));
        std::vector<std::vector<double>> cost(n, std::vector<double>(m));
        for (auto& row : cost)
            for (auto& v : row) v = rng.uniform(-5, 5);
        const auto asg = hungarian(cost);
        REQUIRE(static_cast<int>(asg.size()) == std::min(n, m));
        std::vector<char> rows(n, 0), cols(m, 0);
        for (const auto& [r, c] : asg) {
            CHECK(!rows[r]);
            CHECK(!cols[c]);
            rows[r] = cols[c] = 1;
        }
        CHECK(assignment_cost(cost, asg) == doctest::Approx(brute_force_cost(cost)).epsilon(1e-12));
    }
}

TEST_CASE("appearance_cost: basics and min-over-history") {
    const int dim = 8;
    Detection d;
    d.feature = unit_feature(dim, 0);

    Track same = make_track({0, 0}, {unit_feature(dim, 0)}, {0, 0, 1, 1});
    CHECK(appearance_cost(same, d, 30) == doctest::Approx(0.0));

    Track ortho = make_track({0, 0}, {unit_feature(dim, 1)}, {0, 0, 1, 1});
    CHECK(appearance_cost(ortho, d, 30) == doctest::Approx(1.0));

    // history {f, g} with the detection closer to g: min picks g
    std::vector<double> g(dim, 0.0);
    g[0] = std::sqrt(0.5);
    g[1] = std::sqrt(0.5);
    Track hist = make_track({0, 0}, {unit_feature(dim, 1), g}, {0, 0, 1, 1});
    CHECK(appearance_cost(hist, d, 30) == doctest::Approx(1.0 - std::sqrt(0.5)));
}

TEST_CASE("associate_frame: unambiguous pair matches in stage 1") {
    AssociationConfig cfg;
    const int dim = 8;
    std::vector<Track> tracks = {make_track({0, 0}, {unit_feature(dim, 0)}, {10, 10, 20, 20})};
    std::vector<GroundedDetection> dets(1);
    dets[0].det.bbox = {11, 11, 21, 21};
    dets[0].det.feature = unit_feature(dim, 0);
    dets[0].ground = {0.5, 0.5};
    const auto res = associate_frame(tracks, dets, cfg);
    REQUIRE(res.matches.size() == 1);
    CHECK(res.matches[0] == std::pair<int, int>{0, 0});
    CHECK(res.unmatched_tracks.empty());
    CHECK(res.unmatched_detections.empty());
}

TEST_CASE("associate_frame: out-of-gate, disjoint detection stays unmatched") {
    AssociationConfig cfg;
    const int dim = 8;
    std::vector<Track> tracks = {make_track({0, 0}, {unit_feature(dim, 0)}, {10, 10, 20, 20})};
    std::vector<GroundedDetection> dets(1);
    dets[0].det.bbox = {100, 100, 120, 120};  // IOU 0 with the track's last bbox
    dets[0].det.feature = unit_feature(dim, 1);
    dets[0].ground = {50, 50};  // far outside gate_radius
    const auto res = associate_frame(tracks, dets, cfg);
    CHECK(res.matches.empty());
    CHECK(res.unmatched_tracks == std::vector<int>{0});
    CHECK(res.unmatched_detections == std::vector<int>{0});
}

TEST_CASE("associate_frame: stage-1 gate failure recovered by stage-2 IOU") {
    AssociationConfig cfg;
    cfg.gate_radius = 1.0;
    const int dim = 8;
    std::vector<Track> tracks = {make_track({0, 0}, {unit_feature(dim, 0)}, {10, 10, 20, 20})};
    std::vector<GroundedDetection> dets(1);
    // Kalman gate fails (ground far from prediction) but IOU 0.8 > threshold
    // and the appearance gate passes in stage 2.
    dets[0].det.bbox = {10, 11.0526316, 20, 21.0526316};
    dets[0].det.feature = unit_feature(dim, 0);
    dets[0].ground = {5.0, 5.0};
    REQUIRE(iou(tracks[0].detections.back().bbox, dets[0].det.bbox) > 0.79);
    const auto res = associate_frame(tracks, dets, cfg);
    REQUIRE(res.matches.size() == 1);
    CHECK(res.matches[0] == std::pair<int, int>{0, 0});
}

TEST_CASE("associate_frame: appearance and IOU fail, 3D NN recovers") {
    AssociationConfig cfg;
    cfg.nn3d_radius = 2.0;
    const int dim = 8;
    std::vector<Track> tracks = {make_track({0, 0}, {unit_feature(dim, 0)}, {10, 10, 20, 20})};
    std::vector<GroundedDetection> dets(1);
    dets[0].det.bbox = {200, 200, 210, 210};     // IOU 0
    dets[0].det.feature = unit_feature(dim, 1);  // appearance gate fails
    dets[0].ground = {1.0, 0.5};                 // inside nn3d radius
    const auto res = associate_frame(tracks, dets, cfg);
    REQUIRE(res.matches.size() == 1);
}

TEST_CASE("associate_frame: never assigns a detection or track twice") {
    Rng rng(7);
    AssociationConfig cfg;
    const int dim = 8;
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<Track> tracks;
        const int nt = 1 + static_cast<int>(rng.uniform_int(6));
        const int nd = 1 + static_cast<int>(rng.uniform_int(6));
        for (int i = 0; i < nt; ++i) {
            const Vec2 p{rng.uniform(-10, 10), rng.uniform(-10, 10)};
            const double bx = rng.uniform(0, 100), by = rng.uniform(0, 100);
            tracks.push_back(make_track(p, {unit_feature(dim, (int)rng.uniform_int(dim))},
                                        {bx, by, bx + 20, by + 20}));
        }
        std::vector<GroundedDetection> dets(nd);
        for (int j = 0; j < nd; ++j) {
            const double bx = rng.uniform(0, 100), by = rng.uniform(0, 100);
            dets[j].det.bbox = {bx, by, bx + 20, by + 20};
            dets[j].det.feature = unit_feature(dim, (int)rng.uniform_int(dim));
            dets[j].ground = {rng.uniform(-10, 10), rng.uniform(-10, 10)};
        }
        const auto res = associate_frame(tracks, dets, cfg);
        std::vector<char> tu(nt, 0), du(nd, 0);
        for (const auto& [t, d] : res.matches) {
            CHECK(!tu[t]);
            CHECK(!du[d]);
            tu[t] = du[d] = 1;
        }
        CHECK(res.matches.size() + res.unmatched_tracks.size() == static_cast<std::size_t>(nt));
        CHECK(res.matches.size() + res.unmatched_detections.size() == static_cast<std::size_t>(nd));
    }
}

namespace {

// Straight-line object with an identity-mapped ground plane.
std::vector<Detection> straight_line_detections(int frames, Vec2 start, Vec2 step, int feature_axis,
                                                int skip_after = -1, int skip_count = 0) {
    std::vector<Detection> dets;
    for (int f = 0; f < frames; ++f) {
        if (skip_after >= 0 && f >= skip_after && f < skip_after + skip_count) continue;
        Detection d;
        d.frame = f;
        d.cls = ObjectClass::car;
        const Vec2 p = start + step * static_cast<double>(f);
        d.bbox = {p.x - 2, p.y - 3, p.x + 2, p.y};
        d.confidence = 0.9;
        d.feature = unit_feature(16, feature_axis);
        dets.push_back(d);
    }
    return dets;
}

geometry::Calibration identity_calibration() {
    geometry::Calibration calib;
    calib.camera_height = 0.0;  // disables the class-height shift
    return calib;
}

}  // namespace

TEST_CASE("track_stream: four consecutive detections yield no trajectory") {
    auto dets = straight_line_detections(4, {0, 0}, {0.2, 0}, 0);
    AssociationConfig cfg;
    const auto trajs = track_stream(dets, identity_calibration(), cfg);
    CHECK(trajs.empty());
}

TEST_CASE("track_stream: two clean objects produce two full trajectories") {
    auto a = straight_line_detections(60, {0, 0}, {0.3, 0}, 0);
    auto b = straight_line_detections(60, {0, 50}, {0.3, 0}, 1);
    std::vector<Detection> dets;
    for (int f = 0; f < 60; ++f) {
        dets.push_back(a[f]);
        dets.push_back(b[f]);
    }
    AssociationConfig cfg;
    const auto trajs = track_stream(dets, identity_calibration(), cfg);
    REQUIRE(trajs.size() == 2);
    for (const auto& t : trajs) {
        CHECK(t.samples.size() == 60);
        for (std::size_t k = 1; k < t.samples.size(); ++k) {
            CHECK(t.samples[k].t - t.samples[k - 1].t ==
                  doctest::Approx(1.0 / cfg.frame_rate).epsilon(1e-12));
        }
    }
}

TEST_CASE("track_stream: survives a dropout gap via Kalman gating") {
    auto dets = straight_line_detections(60, {0, 0}, {0.3, 0}, 0, 30, 2);
    AssociationConfig cfg;
    const auto trajs = track_stream(dets, identity_calibration(), cfg);
    REQUIRE(trajs.size() == 1);
    // gap must be filled: one sample per frame from first to last
    CHECK(trajs[0].samples.size() == 60);
}

TEST_CASE("track_stream: out-of-order frames raise") {
    auto dets = straight_line_detections(10, {0, 0}, {0.3, 0}, 0);
    std::swap(dets[3], dets[7]);
    AssociationConfig cfg;
    CHECK_THROWS_AS(track_stream(dets, identity_calibration(), cfg), OutOfOrderFrames);
}

TEST_CASE("track_stream: speed-cap post filter removes teleporting tracks") {
    // 10 m per frame at 15 Hz = 150 m/s, far above the car cap
    auto dets = straight_line_detections(30, {0, 0}, {10.0, 0}, 0);
    AssociationConfig cfg;
    cfg.gate_radius = 1e6;  // let association follow the jumps
    cfg.nn3d_radius = 1e6;
    const auto trajs = track_stream(dets, identity_calibration(), cfg);
    CHECK(trajs.empty());
}
