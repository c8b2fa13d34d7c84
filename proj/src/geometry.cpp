#include "vibe/geometry.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace vibe::geometry {

namespace {

Eigen::Matrix3d to_eigen(const Homography& h) {
    Eigen::Matrix3d m;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) m(r, c) = h.m[r][c];
    return m;
}

Homography from_eigen(const Eigen::Matrix3d& m) {
    double raw[3][3];
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) raw[r][c] = m(r, c);
    return Homography::from_matrix(raw);
}

// Similarity transform moving the centroid to the origin and scaling the mean
// distance to sqrt(2).
Eigen::Matrix3d conditioning_transform(const std::vector<Vec2>& pts) {
    Vec2 centroid{0, 0};
    for (const auto& p : pts) centroid += p;
    centroid = centroid / static_cast<double>(pts.size());
    double mean_dist = 0.0;
    for (const auto& p : pts) mean_dist += distance(p, centroid);
    mean_dist /= static_cast<double>(pts.size());
    const double scale = mean_dist > 1e-14 ? std::sqrt(2.0) / mean_dist : 1.0;
    Eigen::Matrix3d t = Eigen::Matrix3d::Identity();
    t(0, 0) = scale;
    t(1, 1) = scale;
    t(0, 2) = -scale * centroid.x;
    t(1, 2) = -scale * centroid.y;
    return t;
}

}  // namespace

Homography Homography::from_matrix(const double raw[3][3]) {
    const double w = raw[2][2];
    if (std::abs(w) < 1e-14) {
        throw DegenerateConfiguration("homography cannot be normalized: m[2][2] ~ 0");
    }
    Homography h;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) h.m[r][c] = raw[r][c] / w;
    h.m[2][2] = 1.0;
    if (std::abs(h.determinant()) <= 1e-12) {
        throw DegenerateConfiguration("homography is singular after normalization");
    }
    return h;
}

double Homography::determinant() const {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
           m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

Vec2 Homography::apply(const Vec2& p) const {
    const double X = m[0][0] * p.x + m[0][1] * p.y + m[0][2];
    const double Y = m[1][0] * p.x + m[1][1] * p.y + m[1][2];
    const double W = m[2][0] * p.x + m[2][1] * p.y + m[2][2];
    if (W <= 0.0) {
        throw BehindPlane("point maps past the horizon (w <= 0)");
    }
    return {X / W, Y / W};
}

Homography Homography::inverse() const {
    const Eigen::Matrix3d inv = to_eigen(*this).inverse();
    return from_eigen(inv);
}

HomographyEstimate estimate_homography(const std::vector<Correspondence>& correspondences) {
    const std::size_t n = correspondences.size();
    if (n < 4) {
        throw TooFewPoints("homography estimation needs >= 4 correspondences, got " +
                           std::to_string(n));
    }

    std::vector<Vec2> img(n), gnd(n);
    for (std::size_t i = 0; i < n; ++i) {
        img[i] = correspondences[i].image;
        gnd[i] = correspondences[i].ground;
    }
    const Eigen::Matrix3d t_img = conditioning_transform(img);
    const Eigen::Matrix3d t_gnd = conditioning_transform(gnd);

    Eigen::MatrixXd a(2 * n, 9);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = t_img(0, 0) * img[i].x + t_img(0, 2);
        const double y = t_img(1, 1) * img[i].y + t_img(1, 2);
        const double u = t_gnd(0, 0) * gnd[i].x + t_gnd(0, 2);
        const double v = t_gnd(1, 1) * gnd[i].y + t_gnd(1, 2);
        a.row(2 * i) << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
        a.row(2 * i + 1) << x, y, 1, 0, 0, 0, -u * x, -u * y, -u;
    }

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
    const auto& sigma = svd.singularValues();
    // A proper solution has a one-dimensional nullspace; a second vanishing
    // singular value means the configuration is rank deficient.
    const double tol = 1e-9 * std::max(1.0, sigma(0));
    if (sigma(7) <= tol) {
        throw DegenerateConfiguration("DLT system is rank deficient (collinear or repeated points)");
    }

    const Eigen::VectorXd h = svd.matrixV().col(8);
    Eigen::Matrix3d hn;
    hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
    const Eigen::Matrix3d denorm = t_gnd.inverse() * hn * t_img;

    HomographyEstimate est;
    est.homography = from_eigen(denorm);
    double sq = 0.0;
    for (const auto& c : correspondences) {
        const Vec2 mapped = est.homography.apply(c.image);
        sq += (mapped - c.ground).squared_norm();
    }
    est.forward_rms = std::sqrt(sq / static_cast<double>(n));
    return est;
}

Vec2 distort_point(const Vec2& undistorted, const DistortionModel& d) {
    const Vec2 delta = undistorted - d.center;
    const double r = delta.norm() / d.normalization_radius;
    const double r2 = r * r;
    const double factor = 1.0 + d.k1 * r2 + d.k2 * r2 * r2;
    return d.center + delta * factor;
}

Vec2 undistort_point(const Vec2& distorted, const DistortionModel& d) {
    if (d.k1 == 0.0 && d.k2 == 0.0) return distorted;
    const Vec2 delta_d = distorted - d.center;
    Vec2 p = distorted;
    for (int iter = 0; iter < 100; ++iter) {
        const double r = (p - d.center).norm() / d.normalization_radius;
        const double r2 = r * r;
        const double factor = 1.0 + d.k1 * r2 + d.k2 * r2 * r2;
        if (std::abs(factor) < 1e-9) {
            throw NonConvergent("distortion factor collapsed to zero");
        }
        const Vec2 next = d.center + delta_d / factor;
        const double move = distance(next, p);
        p = next;
        if (move < 1e-8) return p;
    }
    throw NonConvergent("undistort_point did not converge in 100 iterations");
}

Vec2 point_to_ground(const Vec2& image_point, ObjectClass cls, const Calibration& calib) {
    const Vec2 undist = undistort_point(image_point, calib.distortion);
    const Vec2 g = calib.homography.apply(undist);
    const double h = calib.class_heights[cls];
    if (h <= 0.0 || calib.camera_height <= 0.0) return g;
    // A point at height h above ground position p projects onto the ground
    // plane at g = p + (h / (H - h)) (p - foot); inverting gives exactly
    // p = g - (h / H) (g - foot).
    const double ratio = h / calib.camera_height;
    return g - (g - calib.camera_ground_foot) * ratio;
}

Vec2 image_to_ground(const BBox& box, ObjectClass cls, const Calibration& calib) {
    return point_to_ground(box.bottom_center(), cls, calib);
}

Vec2 ground_to_image(const Vec2& ground, ObjectClass cls, const Calibration& calib) {
    const double h = calib.class_heights[cls];
    Vec2 g = ground;
    if (h > 0.0 && calib.camera_height > 0.0) {
        const double ratio = h / calib.camera_height;
        if (ratio >= 1.0) {
            throw BehindPlane("class height exceeds camera height");
        }
        g = (ground - calib.camera_ground_foot * ratio) / (1.0 - ratio);
    }
    const Vec2 undist = calib.homography.inverse().apply(g);
    return distort_point(undist, calib.distortion);
}

// ---------------------------------------------------------------------------
// Calibration file I/O

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

Calibration load_calibration(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open calibration file: " + path);

    Calibration calib;
    bool have_homography = false;
    std::string section;
    std::string line;
    std::vector<double> hvals;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        if (line.front() == '[' && line.back() == ']') {
            section = line.substr(1, line.size() - 2);
            continue;
        }
        if (section == "homography") {
            std::istringstream ss(line);
            double v;
            while (ss >> v) hvals.push_back(v);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw Error("malformed calibration line: " + line);
        const std::string key = trim(line.substr(0, eq));
        std::istringstream val(trim(line.substr(eq + 1)));
        if (section == "distortion") {
            if (key == "center") val >> calib.distortion.center.x >> calib.distortion.center.y;
            else if (key == "k1") val >> calib.distortion.k1;
            else if (key == "k2") val >> calib.distortion.k2;
            else if (key == "normalization_radius") val >> calib.distortion.normalization_radius;
            else throw Error("unknown distortion key: " + key);
        } else if (section == "camera") {
            if (key == "ground_foot") val >> calib.camera_ground_foot.x >> calib.camera_ground_foot.y;
            else if (key == "height") val >> calib.camera_height;
            else throw Error("unknown camera key: " + key);
        } else if (section == "class_heights") {
            double h;
            val >> h;
            calib.class_heights[object_class_from_string(key)] = h;
        } else {
            throw Error("unknown calibration section: " + section);
        }
        if (!val) throw Error("malformed calibration value for key: " + key);
    }
    if (hvals.size() != 9) {
        throw Error("calibration [homography] section must contain 9 numbers, got " +
                    std::to_string(hvals.size()));
    }
    double raw[3][3];
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) raw[r][c] = hvals[3 * r + c];
    calib.homography = Homography::from_matrix(raw);
    have_homography = true;
    (void)have_homography;
    if (calib.distortion.normalization_radius <= 0.0) {
        throw Error("distortion normalization_radius must be > 0");
    }
    for (int c = 0; c < kNumClasses; ++c) {
        if (calib.class_heights.values[c] < 0.0) {
            throw Error("class heights must be >= 0");
        }
    }
    return calib;
}

void save_calibration(const Calibration& calib, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write calibration file: " + path);
    char buf[256];
    out << "[homography]\n";
    for (int r = 0; r < 3; ++r) {
        std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g\n", calib.homography.m[r][0],
                      calib.homography.m[r][1], calib.homography.m[r][2]);
        out << buf;
    }
    out << "[distortion]\n";
    std::snprintf(buf, sizeof(buf), "center = %.17g %.17g\n", calib.distortion.center.x,
                  calib.distortion.center.y);
    out << buf;
    std::snprintf(buf, sizeof(buf), "k1 = %.17g\nk2 = %.17g\nnormalization_radius = %.17g\n",
                  calib.distortion.k1, calib.distortion.k2, calib.distortion.normalization_radius);
    out << buf;
    out << "[camera]\n";
    std::snprintf(buf, sizeof(buf), "ground_foot = %.17g %.17g\nheight = %.17g\n",
                  calib.camera_ground_foot.x, calib.camera_ground_foot.y, calib.camera_height);
    out << buf;
    out << "[class_heights]\n";
    for (int c = 0; c < kNumClasses; ++c) {
        std::snprintf(buf, sizeof(buf), "%s = %.17g\n", to_string(static_cast<ObjectClass>(c)),
                      calib.class_heights.values[c]);
        out << buf;
    }
}

std::vector<Correspondence> load_landmarks(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open landmark file: " + path);
    std::vector<Correspondence> out;
    std::string line;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        Correspondence c;
        if (!(ss >> c.image.x >> c.image.y >> c.ground.x >> c.ground.y)) {
            throw Error("malformed landmark line: " + line);
        }
        out.push_back(c);
    }
    return out;
}

}  // namespace vibe::geometry
