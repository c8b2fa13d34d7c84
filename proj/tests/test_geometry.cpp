#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "vibe/geometry.hpp"

using namespace vibe;
using namespace vibe::geometry;

namespace {

// Plain pinhole camera used as an independent forward-render oracle.
struct Pinhole {
    double cam[3];  // position
    double rot[3][3];  // world -> camera rows (right, down, forward)
    double fx, fy, cx, cy;

    static Pinhole looking_at_origin(double px, double py, double pz, double f, double cx,
                                     double cy) {
        Pinhole p{};
        p.cam[0] = px;
        p.cam[1] = py;
        p.cam[2] = pz;
        p.fx = f;
        p.fy = f;
        p.cx = cx;
        p.cy = cy;
        double fwd[3] = {-px, -py, -pz};
        double n = std::sqrt(fwd[0] * fwd[0] + fwd[1] * fwd[1] + fwd[2] * fwd[2]);
        for (double& v : fwd) v /= n;
        // right = fwd x up, down = fwd x right
        double right[3] = {fwd[1], -fwd[0], 0.0};
        n = std::sqrt(right[0] * right[0] + right[1] * right[1]);
        for (double& v : right) v /= n;
        double down[3] = {fwd[1] * right[2] - fwd[2] * right[1],
                          fwd[2] * right[0] - fwd[0] * right[2],
                          fwd[0] * right[1] - fwd[1] * right[0]};
        for (int c = 0; c < 3; ++c) {
            p.rot[0][c] = right[c];
            p.rot[1][c] = down[c];
            p.rot[2][c] = fwd[c];
        }
        return p;
    }

    Vec2 project(double wx, double wy, double wz) const {
        const double d[3] = {wx - cam[0], wy - cam[1], wz - cam[2]};
        double c[3];
        for (int r = 0; r < 3; ++r)
            c[r] = rot[r][0] * d[0] + rot[r][1] * d[1] + rot[r][2] * d[2];
        return {fx * c[0] / c[2] + cx, fy * c[1] / c[2] + cy};
    }
};

Vec2 apply_known(const double h[3][3], const Vec2& p) {
    const double w = h[2][0] * p.x + h[2][1] * p.y + h[2][2];
    return {(h[0][0] * p.x + h[0][1] * p.y + h[0][2]) / w,
            (h[1][0] * p.x + h[1][1] * p.y + h[1][2]) / w};
}

}  // namespace

TEST_CASE("estimate_homography: unit square identity") {
    std::vector<Correspondence> c = {
        {{0, 0}, {0, 0}}, {{1, 0}, {1, 0}}, {{1, 1}, {1, 1}}, {{0, 1}, {0, 1}}};
    const auto est = estimate_homography(c);
    for (int r = 0; r < 3; ++r)
        for (int k = 0; k < 3; ++k)
            CHECK(est.homography.m[r][k] == doctest::Approx(r == k ? 1.0 : 0.0).epsilon(1e-9));
    CHECK(est.forward_rms < 1e-12);
}

TEST_CASE("estimate_homography: recovers a known matrix from 8 points") {
    const double known[3][3] = {{2, 0, 1}, {0, 2, -1}, {0, 0, 1}};
    std::vector<Correspondence> c;
    const double xs[8] = {0, 3, 7, 1, 9, 4, 6, 2};
    const double ys[8] = {0, 5, 2, 8, 9, 1, 7, 4};
    for (int i = 0; i < 8; ++i) {
        const Vec2 img{xs[i], ys[i]};
        c.push_back({img, apply_known(known, img)});
    }
    const auto est = estimate_homography(c);
    for (int r = 0; r < 3; ++r)
        for (int k = 0; k < 3; ++k)
            CHECK(std::abs(est.homography.m[r][k] - known[r][k]) < 1e-9);
}

TEST_CASE("estimate_homography: collinear points are degenerate") {
    std::vector<Correspondence> c = {
        {{0, 0}, {0, 0}}, {{1, 1}, {2, 1}}, {{2, 2}, {4, 2}}, {{3, 3}, {6, 3}}};
    CHECK_THROWS_AS(estimate_homography(c), DegenerateConfiguration);
}

TEST_CASE("estimate_homography: too few points") {
    std::vector<Correspondence> c = {{{0, 0}, {0, 0}}, {{1, 0}, {1, 0}}, {{1, 1}, {1, 1}}};
    CHECK_THROWS_AS(estimate_homography(c), TooFewPoints);
}

TEST_CASE("estimate_homography: exact on 100 random invertible homographies") {
    Rng rng(7);
    int tested = 0;
    while (tested < 100) {
        double h[3][3];
        h[0][0] = rng.uniform(0.5, 2.0);
        h[0][1] = rng.uniform(-0.5, 0.5);
        h[0][2] = rng.uniform(-20, 20);
        h[1][0] = rng.uniform(-0.5, 0.5);
        h[1][1] = rng.uniform(0.5, 2.0);
        h[1][2] = rng.uniform(-20, 20);
        h[2][0] = rng.uniform(-1e-3, 1e-3);
        h[2][1] = rng.uniform(-1e-3, 1e-3);
        h[2][2] = 1.0;
        const double det = h[0][0] * (h[1][1] - h[1][2] * h[2][1]) -
                           h[0][1] * (h[1][0] - h[1][2] * h[2][0]) +
                           h[0][2] * (h[1][0] * h[2][1] - h[1][1] * h[2][0]);
        if (std::abs(det) < 0.1) continue;
        std::vector<Correspondence> c;
        for (int i = 0; i < 8; ++i) {
            const Vec2 img{rng.uniform(0, 100), rng.uniform(0, 100)};
            c.push_back({img, apply_known(h, img)});
        }
        HomographyEstimate est;
        try {
            est = estimate_homography(c);
        } catch (const DegenerateConfiguration&) {
            continue;  // unlucky near-collinear draw
        }
        for (int r = 0; r < 3; ++r)
            for (int k = 0; k < 3; ++k) CHECK(std::abs(est.homography.m[r][k] - h[r][k]) < 1e-9);
        CHECK(est.homography.m[2][2] == 1.0);
        ++tested;
    }
}

TEST_CASE("undistort_point: zero distortion and center fixed point") {
    DistortionModel d{{320, 240}, 0.0, 0.0, 300.0};
    CHECK(distance(undistort_point({10, 400}, d), {10, 400}) < 1e-12);
    d.k1 = -0.2;
    d.k2 = 0.05;
    CHECK(distance(undistort_point(d.center, d), d.center) < 1e-12);
}

TEST_CASE("undistort_point: forward-model roundtrip on a 10x10 grid") {
    DistortionModel d{{640, 360}, -0.1, 0.0, 600.0};
    for (int i = 0; i < 10; ++i) {
        for (int j = 0; j < 10; ++j) {
            const Vec2 p{i * 120.0 + 50.0, j * 65.0 + 30.0};
            const Vec2 distorted = distort_point(p, d);
            const Vec2 back = undistort_point(distorted, d);
            CHECK(distance(back, p) < 1e-6);
        }
    }
}

TEST_CASE("image_to_ground: identity calibration maps bottom-center through") {
    Calibration calib;
    calib.camera_height = 10.0;
    const BBox box{5, 10, 15, 20};
    const Vec2 g = image_to_ground(box, ObjectClass::car, calib);
    CHECK(g.x == doctest::Approx(10.0));
    CHECK(g.y == doctest::Approx(20.0));
}

TEST_CASE("image_to_ground: collinearity is preserved") {
    double raw[3][3] = {{1.3, 0.2, 4.0}, {-0.1, 0.9, -2.0}, {2e-4, -1e-4, 1.0}};
    Calibration calib;
    calib.homography = Homography::from_matrix(raw);
    calib.camera_height = 12.0;
    std::vector<Vec2> ground;
    for (double t : {0.0, 0.4, 1.0}) {
        const Vec2 bc{100.0 + 300.0 * t, 200.0 + 150.0 * t};
        const BBox box{bc.x - 10, bc.y - 20, bc.x + 10, bc.y};
        ground.push_back(image_to_ground(box, ObjectClass::car, calib));
    }
    const Vec2 ab = ground[1] - ground[0];
    const Vec2 ac = ground[2] - ground[0];
    CHECK(std::abs(ab.cross(ac)) < 1e-9 * ab.norm() * ac.norm());
}

TEST_CASE("image_to_ground: pinhole forward render inverts within 5 cm") {
    // steep enough that the horizon is off-image (calibration convention)
    const auto cam = Pinhole::looking_at_origin(0.0, -25.0, 18.0, 900.0, 640.0, 360.0);
    DistortionModel dist{{640, 360}, -0.08, 0.01, 650.0};

    // Calibrate from exact projected landmarks, as the pipeline would.
    std::vector<Correspondence> landmarks;
    for (double gx : {-20.0, -8.0, 6.0, 18.0}) {
        for (double gy : {-15.0, -2.0, 11.0, 20.0}) {
            const Vec2 px = distort_point(cam.project(gx, gy, 0.0), dist);
            landmarks.push_back({undistort_point(px, dist), {gx, gy}});
        }
    }
    Calibration calib;
    calib.homography = estimate_homography(landmarks).homography;
    calib.distortion = dist;
    calib.camera_ground_foot = {0.0, -25.0};
    calib.camera_height = 18.0;
    calib.class_heights[ObjectClass::car] = 0.45;
    calib.class_heights[ObjectClass::pedestrian] = 0.1;

    Rng rng(123);
    double max_err = 0.0;
    for (int i = 0; i < 50; ++i) {
        const ObjectClass cls = (i % 3 == 0) ? ObjectClass::pedestrian : ObjectClass::car;
        const Vec2 g{rng.uniform(-20, 20), rng.uniform(-15, 20)};
        const double h = calib.class_heights[cls];
        Vec2 px = distort_point(cam.project(g.x, g.y, h), dist);
        // quarter-pixel quantization, as a detector would introduce
        px = {std::round(px.x * 4.0) / 4.0, std::round(px.y * 4.0) / 4.0};
        const BBox box{px.x - 25, px.y - 40, px.x + 25, px.y};
        const Vec2 back = image_to_ground(box, cls, calib);
        max_err = std::max(max_err, distance(back, g));
    }
    CHECK(max_err < 0.05);
}

TEST_CASE("ground_to_image is the inverse of point_to_ground") {
    double raw[3][3] = {{0.02, 0.003, -12.0}, {-0.001, 0.05, -30.0}, {1e-5, 2e-4, 1.0}};
    Calibration calib;
    calib.homography = Homography::from_matrix(raw);
    calib.distortion = {{640, 360}, -0.05, 0.002, 650.0};
    calib.camera_ground_foot = {2.0, -38.0};
    calib.camera_height = 14.0;
    calib.class_heights[ObjectClass::bus] = 0.8;
    Rng rng(5);
    for (int i = 0; i < 40; ++i) {
        const Vec2 img{rng.uniform(200, 1000), rng.uniform(500, 700)};
        const Vec2 g = point_to_ground(img, ObjectClass::bus, calib);
        const Vec2 back = ground_to_image(g, ObjectClass::bus, calib);
        CHECK(distance(back, img) < 1e-6);
    }
}

TEST_CASE("behind-plane points raise") {
    double raw[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, -0.1, 1}};
    const Homography h = Homography::from_matrix(raw);
    CHECK_THROWS_AS(h.apply({0.0, 20.0}), BehindPlane);
}

TEST_CASE("calibration file roundtrip") {
    double raw[3][3] = {{0.02, 0.003, -12.0}, {-0.001, 0.05, -30.0}, {1e-5, 2e-4, 1.0}};
    Calibration calib;
    calib.homography = Homography::from_matrix(raw);
    calib.distortion = {{640, 360}, -0.05, 0.002, 650.0};
    calib.camera_ground_foot = {2.0, -38.0};
    calib.camera_height = 14.0;
    calib.class_heights[ObjectClass::car] = 0.45;
    calib.class_heights[ObjectClass::bus] = 0.8;

    const auto path = std::filesystem::temp_directory_path() / "vibe_test_calib.txt";
    save_calibration(calib, path.string());
    const Calibration loaded = load_calibration(path.string());
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            CHECK(loaded.homography.m[r][c] == doctest::Approx(calib.homography.m[r][c]));
    CHECK(loaded.distortion.k1 == calib.distortion.k1);
    CHECK(loaded.camera_height == calib.camera_height);
    CHECK(loaded.class_heights[ObjectClass::bus] == 0.8);
    std::filesystem::remove(path);
}
