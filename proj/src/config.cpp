#include "vibe/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace vibe::cli {

const std::vector<ConfigEntry>& RunConfig::schema() {
    static const std::vector<ConfigEntry> entries = {
        {"tracker.init_length", ValueType::integer, "5", "consecutive IOU associations to confirm a track"},
        {"tracker.gate_radius", ValueType::real, "3.0", "Kalman gate radius for appearance association (m)"},
        {"tracker.appearance_threshold", ValueType::real, "0.35", "cosine-distance gate"},
        {"tracker.iou_threshold", ValueType::real, "0.2", "minimum IOU for image-space association"},
        {"tracker.nn3d_radius", ValueType::real, "2.0", "3D nearest-neighbour association radius (m)"},
        {"tracker.max_misses", ValueType::integer, "12", "consecutive misses before a track dies"},
        {"tracker.frame_rate", ValueType::real, "15", "detection frame rate (Hz)"},
        {"tracker.feature_window", ValueType::integer, "30", "appearance features kept per track"},
        {"tracker.q_pos", ValueType::real, "0.01", "per-frame position process noise (m^2)"},
        {"tracker.q_vel", ValueType::real, "0.3", "per-frame velocity process noise ((m/s)^2)"},
        {"tracker.r_meas", ValueType::real, "0.25", "measurement noise (m^2)"},
        {"tracker.p0_pos", ValueType::real, "1.0", "initial position covariance"},
        {"tracker.p0_vel", ValueType::real, "2.0", "initial velocity covariance"},
        {"tracker.speed_cap.car", ValueType::real, "20", "speed post-filter cap (m/s)"},
        {"tracker.speed_cap.bus", ValueType::real, "20", "speed post-filter cap (m/s)"},
        {"tracker.speed_cap.truck", ValueType::real, "20", "speed post-filter cap (m/s)"},
        {"tracker.speed_cap.pedestrian", ValueType::real, "4", "speed post-filter cap (m/s)"},
        {"tracker.speed_cap.bicycle", ValueType::real, "10", "speed post-filter cap (m/s)"},
        {"tracker.smooth_window", ValueType::integer, "5", "centered output smoothing window (1 = off)"},
        {"tracker.collision_filter", ValueType::boolean, "true", "drop mutually overlapping trajectories"},
        {"tracker.collision_scale", ValueType::real, "0.7", "footprint scale for the overlap post-filter"},
        {"tracker.association", ValueType::text, "full", "association mode: full | iou"},
        {"metrics.match_radius", ValueType::real, "1.0", "truth/computed match radius (m)"},
        {"sim.max_range", ValueType::real, "30", "lidar range (m)"},
        {"sim.max_step", ValueType::real, "2.0", "displacement cap per tick (m)"},
        {"sim.goal_radius", ValueType::real, "2.0", "goal arrival radius (m)"},
        {"sim.frame_rate", ValueType::real, "15", "simulation tick rate (Hz)"},
        {"sim.footprint.car", ValueType::real, "1.0", "collision disc radius (m)"},
        {"sim.footprint.bus", ValueType::real, "1.8", "collision disc radius (m)"},
        {"sim.footprint.truck", ValueType::real, "1.8", "collision disc radius (m)"},
        {"sim.footprint.pedestrian", ValueType::real, "0.3", "collision disc radius (m)"},
        {"sim.footprint.bicycle", ValueType::real, "0.5", "collision disc radius (m)"},
        {"net.dense", ValueType::text, "128,64", "dense stack widths"},
        {"net.log_std_init", ValueType::real, "-0.5", "initial policy log standard deviation"},
        {"ppo.clip", ValueType::real, "0.2", "PPO clipping epsilon"},
        {"ppo.gamma", ValueType::real, "0.99", "discount"},
        {"ppo.lambda", ValueType::real, "0.95", "GAE lambda (1 recovers n-step returns)"},
        {"ppo.epochs_per_batch", ValueType::integer, "6", "optimization passes per batch"},
        {"ppo.minibatch", ValueType::integer, "256", "minibatch size M"},
        {"ppo.entropy", ValueType::real, "0.0001", "entropy bonus weight"},
        {"ppo.interactions", ValueType::integer, "1024", "environment interactions per epoch"},
        {"ppo.lr_policy", ValueType::real, "0.001", "policy Adam learning rate"},
        {"ppo.lr_critic", ValueType::real, "0.001", "critic Adam learning rate"},
        {"ppo.grad_clip", ValueType::real, "10", "global gradient-norm clip"},
        {"gail.d_min", ValueType::real, "1e-06", "discriminator output floor before the log"},
        {"gail.lr_disc", ValueType::real, "0.003", "discriminator Adam learning rate"},
        {"gail.disc_steps", ValueType::integer, "1", "discriminator steps per epoch"},
        {"gail.disc_acc_target", ValueType::real, "0.85", "skip further discriminator steps above this accuracy"},
        {"horizon.start", ValueType::integer, "1", "initial horizon"},
        {"horizon.increment", ValueType::integer, "1", "horizon increment"},
        {"horizon.epochs_per_increment", ValueType::integer, "100", "epochs between increments"},
        {"horizon.cap", ValueType::integer, "0", "horizon cap (0 = none)"},
        {"train.algo", ValueType::text, "horizon-gail", "pipeline training algorithm: bc | gail | horizon-gail"},
        {"train.epochs", ValueType::integer, "500", "training epochs"},
        {"train.workers", ValueType::integer, "2", "gradient-accumulation workers"},
        {"train.val_interval", ValueType::integer, "1", "epochs between validation runs (0 = never)"},
        {"train.val_ticks", ValueType::integer, "1000", "validation window length (ticks)"},
        {"train.stride", ValueType::text, "algorithm", "episode starts: algorithm (0, h, 2h, ...) | random"},
        {"train.max_episode_ticks", ValueType::integer, "400", "episode cap for vanilla GAIL"},
        {"bc.epochs", ValueType::integer, "150", "behavioural cloning epochs"},
        {"bc.lr", ValueType::real, "0.001", "behavioural cloning learning rate"},
        {"bc.batch", ValueType::integer, "256", "behavioural cloning batch size"},
        {"synth.radius", ValueType::real, "20", "roundabout ring radius (m)"},
        {"synth.arms", ValueType::integer, "4", "approach arms"},
        {"synth.arm_length", ValueType::real, "18", "arm length beyond the ring (m)"},
        {"synth.road_halfwidth", ValueType::real, "4.2", "road half width (m)"},
        {"synth.cars", ValueType::integer, "60", "scripted car count"},
        {"synth.pedestrians", ValueType::integer, "16", "scripted pedestrian count"},
        {"synth.mean_headway", ValueType::real, "4.0", "mean seconds between car spawns"},
        {"synth.speed_mean", ValueType::real, "7.0", "car target speed mean (m/s)"},
        {"synth.speed_std", ValueType::real, "0.5", "car target speed std (m/s)"},
        {"synth.ped_speed", ValueType::real, "1.3", "pedestrian speed (m/s)"},
        {"synth.lateral_noise", ValueType::real, "0.15", "lane-keeping noise (m, mean-reverting)"},
        {"synth.dropout", ValueType::real, "0.0", "detection dropout probability"},
        {"synth.position_noise", ValueType::real, "0.0", "detection position noise (m)"},
        {"synth.feature_dim", ValueType::integer, "128", "appearance feature dimension"},
        {"synth.feature_noise", ValueType::real, "0.3", "intra-identity feature noise"},
        {"synth.cam_distance", ValueType::real, "75", "camera distance from the center (m)"},
        {"synth.cam_height", ValueType::real, "35", "camera height (m)"},
        {"synth.cam_focal", ValueType::real, "900", "focal length (px)"},
        {"synth.image_cx", ValueType::real, "640", "principal point x (px)"},
        {"synth.image_cy", ValueType::real, "360", "principal point y (px)"},
        {"synth.k1", ValueType::real, "-0.08", "radial distortion k1"},
        {"synth.k2", ValueType::real, "0.01", "radial distortion k2"},
        {"synth.norm_radius", ValueType::real, "650", "distortion normalization radius (px)"},
        {"synth.train_frac", ValueType::real, "0.7", "train split fraction"},
        {"synth.val_frac", ValueType::real, "0.15", "validation split fraction"},
        {"calib.center_x", ValueType::real, "640", "distortion center x (px)"},
        {"calib.center_y", ValueType::real, "360", "distortion center y (px)"},
        {"calib.k1", ValueType::real, "0", "radial distortion k1"},
        {"calib.k2", ValueType::real, "0", "radial distortion k2"},
        {"calib.norm_radius", ValueType::real, "600", "distortion normalization radius (px)"},
        {"calib.foot_x", ValueType::real, "0", "camera ground-foot x (m)"},
        {"calib.foot_y", ValueType::real, "0", "camera ground-foot y (m)"},
        {"calib.height", ValueType::real, "10", "camera height above ground (m)"},
        {"calib.height.car", ValueType::real, "0.4", "reference-point height (m)"},
        {"calib.height.bus", ValueType::real, "0.6", "reference-point height (m)"},
        {"calib.height.truck", ValueType::real, "0.6", "reference-point height (m)"},
        {"calib.height.pedestrian", ValueType::real, "0.1", "reference-point height (m)"},
        {"calib.height.bicycle", ValueType::real, "0.2", "reference-point height (m)"},
        {"eval.windows", ValueType::integer, "4", "evaluation windows"},
        {"eval.ticks", ValueType::integer, "4000", "ticks per evaluation window"},
        {"eval.stochastic", ValueType::boolean, "false", "sample the policy during evaluation (mean actions otherwise)"},
        {"eval.speed_bins", ValueType::integer, "64", "speed grid bins"},
        {"eval.speed_max", ValueType::real, "15", "speed grid upper bound (m/s)"},
        {"eval.occupancy_bins", ValueType::integer, "64", "occupancy grid bins per axis"},
        {"eval.joint_pos_bins", ValueType::integer, "16", "joint grid position bins"},
        {"eval.joint_vel_bins", ValueType::integer, "8", "joint grid velocity bins"},
        {"eval.vel_max", ValueType::real, "12", "joint grid velocity bound (m/s)"},
        {"eval.bandwidth", ValueType::real, "0", "KDE bandwidth (0 = Scott's rule)"},
    };
    return entries;
}

RunConfig::RunConfig() {
    for (const auto& e : schema()) values_[e.key] = e.default_value;
}

const ConfigEntry& RunConfig::entry(const std::string& key) const {
    for (const auto& e : schema()) {
        if (key == e.key) return e;
    }
    throw UnknownKey("unknown config key: " + key);
}

void RunConfig::validate(const ConfigEntry& e, const std::string& value) const {
    std::istringstream ss(value);
    bool ok = false;
    switch (e.type) {
        case ValueType::real: {
            double v;
            ok = static_cast<bool>(ss >> v) && ss.eof();
            break;
        }
        case ValueType::integer: {
            long v;
            ok = static_cast<bool>(ss >> v) && ss.eof();
            break;
        }
        case ValueType::boolean:
            ok = value == "true" || value == "false" || value == "0" || value == "1";
            break;
        case ValueType::text:
            ok = true;
            break;
    }
    if (!ok) {
        throw TypeMismatch("config key " + std::string(e.key) + " expects a " +
                           (e.type == ValueType::real
                                ? "real"
                                : e.type == ValueType::integer ? "integer" : "boolean") +
                           " value, got '" + value + "'");
    }
}

void RunConfig::set(const std::string& key, const std::string& value) {
    const ConfigEntry& e = entry(key);
    validate(e, value);
    values_[key] = value;
    explicit_[key] = true;
}

void RunConfig::apply_override(const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
        throw TypeMismatch("override must look like key=value, got '" + kv + "'");
    }
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t");
        const auto e = s.find_last_not_of(" \t");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
}

void RunConfig::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config file: " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto nonspace = line.find_first_not_of(" \t\r\n");
        if (nonspace == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw Error(path + ":" + std::to_string(lineno) + ": expected key = value");
        }
        apply_override(line);
    }
}

void RunConfig::check_required(const std::vector<std::string>& keys) const {
    for (const auto& key : keys) {
        entry(key);  // also validates the name
        const auto it = explicit_.find(key);
        if (it == explicit_.end() || !it->second) {
            throw MissingRequired("config key " + key + " must be provided");
        }
    }
}

double RunConfig::real(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw UnknownKey("unknown config key: " + key);
    return std::stod(it->second);
}

long RunConfig::integer(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw UnknownKey("unknown config key: " + key);
    return std::stol(it->second);
}

bool RunConfig::boolean(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw UnknownKey("unknown config key: " + key);
    return it->second == "true" || it->second == "1";
}

const std::string& RunConfig::text(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw UnknownKey("unknown config key: " + key);
    return it->second;
}

std::string RunConfig::help_text() {
    std::string out = "configuration keys (key = default):\n";
    for (const auto& e : schema()) {
        out += "  ";
        out += e.key;
        out += " = ";
        out += e.default_value;
        out += "\n      ";
        out += e.help;
        out += "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// typed views

tracker::AssociationConfig RunConfig::tracker_config() const {
    tracker::AssociationConfig c;
    c.init_length = static_cast<int>(integer("tracker.init_length"));
    c.gate_radius = real("tracker.gate_radius");
    c.appearance_threshold = real("tracker.appearance_threshold");
    c.iou_threshold = real("tracker.iou_threshold");
    c.nn3d_radius = real("tracker.nn3d_radius");
    c.max_misses = static_cast<int>(integer("tracker.max_misses"));
    c.frame_rate = real("tracker.frame_rate");
    c.feature_window = static_cast<int>(integer("tracker.feature_window"));
    c.noise.q_pos = real("tracker.q_pos");
    c.noise.q_vel = real("tracker.q_vel");
    c.noise.r_meas = real("tracker.r_meas");
    c.p0_pos = real("tracker.p0_pos");
    c.p0_vel = real("tracker.p0_vel");
    c.mode = text("tracker.association") == "iou" ? tracker::AssociationMode::iou_only
                                                  : tracker::AssociationMode::full;
    c.smooth_window = static_cast<int>(integer("tracker.smooth_window"));
    c.collision_scale = real("tracker.collision_scale");
    c.post_filter = boolean("tracker.collision_filter");
    c.speed_cap[ObjectClass::car] = real("tracker.speed_cap.car");
    c.speed_cap[ObjectClass::bus] = real("tracker.speed_cap.bus");
    c.speed_cap[ObjectClass::truck] = real("tracker.speed_cap.truck");
    c.speed_cap[ObjectClass::pedestrian] = real("tracker.speed_cap.pedestrian");
    c.speed_cap[ObjectClass::bicycle] = real("tracker.speed_cap.bicycle");
    c.footprint_radius[ObjectClass::car] = real("sim.footprint.car");
    c.footprint_radius[ObjectClass::bus] = real("sim.footprint.bus");
    c.footprint_radius[ObjectClass::truck] = real("sim.footprint.truck");
    c.footprint_radius[ObjectClass::pedestrian] = real("sim.footprint.pedestrian");
    c.footprint_radius[ObjectClass::bicycle] = real("sim.footprint.bicycle");
    return c;
}

sim::SimConfig RunConfig::sim_config() const {
    sim::SimConfig c;
    c.max_range = real("sim.max_range");
    c.max_step = real("sim.max_step");
    c.goal_radius = real("sim.goal_radius");
    c.frame_rate = real("sim.frame_rate");
    c.footprint[ObjectClass::car] = real("sim.footprint.car");
    c.footprint[ObjectClass::bus] = real("sim.footprint.bus");
    c.footprint[ObjectClass::truck] = real("sim.footprint.truck");
    c.footprint[ObjectClass::pedestrian] = real("sim.footprint.pedestrian");
    c.footprint[ObjectClass::bicycle] = real("sim.footprint.bicycle");
    return c;
}

synth::SynthConfig RunConfig::synth_config() const {
    synth::SynthConfig c;
    c.radius = real("synth.radius");
    c.arms = static_cast<int>(integer("synth.arms"));
    c.arm_length = real("synth.arm_length");
    c.road_halfwidth = real("synth.road_halfwidth");
    c.cars = static_cast<int>(integer("synth.cars"));
    c.pedestrians = static_cast<int>(integer("synth.pedestrians"));
    c.mean_headway = real("synth.mean_headway");
    c.speed_mean = real("synth.speed_mean");
    c.speed_std = real("synth.speed_std");
    c.ped_speed = real("synth.ped_speed");
    c.lateral_noise = real("synth.lateral_noise");
    c.dropout = real("synth.dropout");
    c.position_noise = real("synth.position_noise");
    c.feature_dim = static_cast<int>(integer("synth.feature_dim"));
    c.feature_noise = real("synth.feature_noise");
    c.cam_distance = real("synth.cam_distance");
    c.cam_height = real("synth.cam_height");
    c.cam_focal = real("synth.cam_focal");
    c.image_cx = real("synth.image_cx");
    c.image_cy = real("synth.image_cy");
    c.k1 = real("synth.k1");
    c.k2 = real("synth.k2");
    c.norm_radius = real("synth.norm_radius");
    c.train_frac = real("synth.train_frac");
    c.val_frac = real("synth.val_frac");
    c.frame_rate = real("sim.frame_rate");
    return c;
}

std::vector<int> RunConfig::dense_layers() const {
    std::vector<int> widths;
    std::istringstream ss(text("net.dense"));
    std::string part;
    while (std::getline(ss, part, ',')) {
        if (!part.empty()) widths.push_back(std::stoi(part));
    }
    return widths;
}

imitation::TrainConfig RunConfig::train_config() const {
    imitation::TrainConfig c;
    c.ppo.clip = real("ppo.clip");
    c.ppo.gamma = real("ppo.gamma");
    c.ppo.lambda = real("ppo.lambda");
    c.ppo.epochs_per_batch = static_cast<int>(integer("ppo.epochs_per_batch"));
    c.ppo.minibatch = static_cast<int>(integer("ppo.minibatch"));
    c.ppo.entropy_bonus = real("ppo.entropy");
    c.ppo.interactions = static_cast<int>(integer("ppo.interactions"));
    c.ppo.lr_policy = real("ppo.lr_policy");
    c.ppo.lr_critic = real("ppo.lr_critic");
    c.ppo.grad_clip = real("ppo.grad_clip");
    c.ppo.workers = static_cast<int>(integer("train.workers"));
    c.d_min = real("gail.d_min");
    c.lr_disc = real("gail.lr_disc");
    c.disc_steps = static_cast<int>(integer("gail.disc_steps"));
    c.disc_acc_target = real("gail.disc_acc_target");
    c.epochs = static_cast<int>(integer("train.epochs"));
    c.val_interval = static_cast<int>(integer("train.val_interval"));
    c.val_ticks = static_cast<int>(integer("train.val_ticks"));
    c.stride_random = text("train.stride") == "random";
    c.max_episode_ticks = static_cast<int>(integer("train.max_episode_ticks"));
    c.log_std_init = real("net.log_std_init");
    c.dense_layers = dense_layers();
    c.eval = eval_config();
    return c;
}

imitation::BcConfig RunConfig::bc_config() const {
    imitation::BcConfig c;
    c.epochs = static_cast<int>(integer("bc.epochs"));
    c.lr = real("bc.lr");
    c.batch = static_cast<int>(integer("bc.batch"));
    c.workers = static_cast<int>(integer("train.workers"));
    c.log_std_init = real("net.log_std_init");
    return c;
}

imitation::HorizonSchedule RunConfig::horizon_schedule() const {
    imitation::HorizonSchedule s;
    s.start = static_cast<int>(integer("horizon.start"));
    s.increment = static_cast<int>(integer("horizon.increment"));
    s.epochs_per_increment = static_cast<int>(integer("horizon.epochs_per_increment"));
    s.cap = static_cast<int>(integer("horizon.cap"));
    return s;
}

behavior::EvalConfig RunConfig::eval_config() const {
    behavior::EvalConfig c;
    c.speed_bins = static_cast<int>(integer("eval.speed_bins"));
    c.speed_max = real("eval.speed_max");
    c.occupancy_bins = static_cast<int>(integer("eval.occupancy_bins"));
    c.joint_pos_bins = static_cast<int>(integer("eval.joint_pos_bins"));
    c.joint_vel_bins = static_cast<int>(integer("eval.joint_vel_bins"));
    c.vel_max = real("eval.vel_max");
    c.bandwidth = real("eval.bandwidth");
    return c;
}

geometry::Calibration RunConfig::calibration_defaults() const {
    geometry::Calibration c;
    c.distortion.center = {real("calib.center_x"), real("calib.center_y")};
    c.distortion.k1 = real("calib.k1");
    c.distortion.k2 = real("calib.k2");
    c.distortion.normalization_radius = real("calib.norm_radius");
    c.camera_ground_foot = {real("calib.foot_x"), real("calib.foot_y")};
    c.camera_height = real("calib.height");
    c.class_heights[ObjectClass::car] = real("calib.height.car");
    c.class_heights[ObjectClass::bus] = real("calib.height.bus");
    c.class_heights[ObjectClass::truck] = real("calib.height.truck");
    c.class_heights[ObjectClass::pedestrian] = real("calib.height.pedestrian");
    c.class_heights[ObjectClass::bicycle] = real("calib.height.bicycle");
    return c;
}

imitation::FeatureScale RunConfig::feature_scale() const {
    imitation::FeatureScale fs;
    fs.lidar_range = real("sim.max_range");
    // encode typical displacements near unit variance so the action carries
    // weight against the lidar block in policy and discriminator inputs
    fs.action_scale = 0.5 * real("sim.max_step");
    fs.dist_scale = 50.0;
    return fs;
}

}  // namespace vibe::cli
