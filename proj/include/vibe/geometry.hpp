#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "vibe/common.hpp"

namespace vibe::geometry {

struct TooFewPoints : Error {
    using Error::Error;
};
struct DegenerateConfiguration : Error {
    using Error::Error;
};
struct NonConvergent : Error {
    using Error::Error;
};
struct BehindPlane : Error {
    using Error::Error;
};

// 3x3 projective map, normalized so m[2][2] == 1.
struct Homography {
    double m[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};

    static Homography identity() { return Homography{}; }

    // Throws DegenerateConfiguration if the matrix cannot be normalized or is
    // singular (|det| <= 1e-12 after normalization).
    static Homography from_matrix(const double raw[3][3]);

    // Projective application; throws BehindPlane when the homogeneous
    // w-coordinate is <= 0.
    Vec2 apply(const Vec2& p) const;

    Homography inverse() const;
    double determinant() const;
};

// Radial lens model: p_distorted = c + (p - c) * (1 + k1 r^2 + k2 r^4),
// r = |p - c| / normalization_radius.
struct DistortionModel {
    Vec2 center;
    double k1 = 0.0;
    double k2 = 0.0;
    double normalization_radius = 1.0;
};

struct Calibration {
    Homography homography;  // undistorted image (px) -> ground plane (m)
    DistortionModel distortion;
    ClassMap<double> class_heights;  // reference-point height above ground (m)
    Vec2 camera_ground_foot;         // camera footprint on the ground (m)
    double camera_height = 10.0;     // camera height above ground (m)
};

struct Correspondence {
    Vec2 image;   // px
    Vec2 ground;  // m
};

struct HomographyEstimate {
    Homography homography;
    double forward_rms = 0.0;  // RMS residual of image->ground mapping (m)
};

// Normalized DLT (Hartley conditioning).  Requires >= 4 correspondences;
// throws TooFewPoints / DegenerateConfiguration.
HomographyEstimate estimate_homography(const std::vector<Correspondence>& correspondences);

Vec2 distort_point(const Vec2& undistorted, const DistortionModel& d);

// Inverse of distort_point via fixed-point iteration to 1e-8 px; throws
// NonConvergent after 100 steps.
Vec2 undistort_point(const Vec2& distorted, const DistortionModel& d);

struct BBox {
    double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
    Vec2 bottom_center() const { return {0.5 * (x1 + x2), y2}; }
    double width() const { return x2 - x1; }
    double height() const { return y2 - y1; }
};

// Bottom-center of the box, undistorted, mapped through the homography, then
// shifted toward the camera ground foot by class_height * distance /
// camera_height.  Throws BehindPlane past the horizon.
Vec2 image_to_ground(const BBox& box, ObjectClass cls, const Calibration& calib);
Vec2 point_to_ground(const Vec2& image_point, ObjectClass cls, const Calibration& calib);

// Exact inverse of point_to_ground: ground position -> distorted image point
// of the class reference point.  Used to synthesize detections.
Vec2 ground_to_image(const Vec2& ground, ObjectClass cls, const Calibration& calib);

// Calibration file I/O (sections [homography], [distortion], [camera],
// [class_heights]).
Calibration load_calibration(const std::string& path);
void save_calibration(const Calibration& calib, const std::string& path);

std::vector<Correspondence> load_landmarks(const std::string& path);

}  // namespace vibe::geometry
