#include "vibe/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "vibe/behavior_metrics.hpp"
#include "vibe/geometry.hpp"
#include "vibe/io.hpp"
#include "vibe/mot_metrics.hpp"
#include "vibe/scene.hpp"
#include "vibe/sim.hpp"
#include "vibe/synth.hpp"
#include "vibe/tinynet.hpp"
#include "vibe/tracker.hpp"

namespace vibe::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonArgs {
    std::string config_file;
    std::vector<std::string> overrides;
    std::uint64_t seed = 0;
    bool seed_given = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_file, "configuration file (key = value lines)");
    cmd->add_option("--set", args.overrides, "override a config key, e.g. --set ppo.clip=0.1");
    cmd->add_option("--seed", args.seed, "random seed (falls back to VIBE_SEED)")
        ->each([&args](const std::string&) { args.seed_given = true; });
}

RunConfig make_config(const CommonArgs& args) {
    RunConfig cfg;
    if (!args.config_file.empty()) cfg.load_file(args.config_file);
    for (const auto& kv : args.overrides) cfg.apply_override(kv);
    return cfg;
}

std::uint64_t resolve_seed(const CommonArgs& args) {
    if (args.seed_given) return args.seed;
    if (const char* env = std::getenv("VIBE_SEED")) {
        return static_cast<std::uint64_t>(std::strtoull(env, nullptr, 10));
    }
    return 0;
}

io::Manifest start_manifest(const std::string& command, const RunConfig& cfg,
                            std::uint64_t seed) {
    io::Manifest m;
    m.command = command;
    m.config = cfg.resolved();
    m.seed = seed;
    return m;
}

void hash_input(io::Manifest& m, const std::string& path) {
    if (!path.empty()) m.input_hashes[path] = io::sha256_file(path);
}

void require_file(const std::string& stage, const std::string& path) {
    if (!fs::exists(path)) throw StageFailure(stage, "missing input file: " + path);
}

json report_to_json(const behavior::BehaviorReport& r) {
    json j;
    j["jsd_speed"] = r.jsd_speed;
    j["jsd_occupancy"] = r.jsd_occupancy;
    j["jsd_joint"] = r.jsd_joint;
    j["collision_probability"] = r.collision_probability;
    j["exit_failure_probability"] = r.exit_failure_probability;
    j["window_t0"] = r.window_t0;
    j["window_ticks"] = r.window_ticks;
    j["agents"] = r.agents;
    j["colliding_agents"] = r.colliding_agents;
    j["exit_candidates"] = r.exit_candidates;
    j["exit_failures"] = r.exit_failures;
    return j;
}

json epoch_to_json(const imitation::EpochLog& log) {
    json j;
    j["epoch"] = log.epoch;
    j["horizon"] = log.horizon;
    j["interactions"] = log.interactions;
    j["disc_loss"] = log.disc_loss;
    j["disc_accuracy"] = log.disc_accuracy;
    j["policy_loss"] = log.policy_loss;
    j["value_loss"] = log.value_loss;
    j["entropy"] = log.entropy;
    j["mean_reward"] = log.mean_reward;
    j["mean_agent_d"] = log.mean_agent_d;
    j["mean_expert_d"] = log.mean_expert_d;
    j["probe_action_mse"] = log.probe_action_mse;
    j["val_jsd_joint"] = log.val_jsd_joint;
    j["val_jsd_speed"] = log.val_jsd_speed;
    j["val_jsd_occupancy"] = log.val_jsd_occupancy;
    j["val_collision"] = log.val_collision;
    j["val_exit_failure"] = log.val_exit_failure;
    j["is_best"] = log.is_best;
    return j;
}

// ---------------------------------------------------------------------------
// subcommand bodies (shared between direct CLI use and the pipeline driver)

void do_calibrate(const RunConfig& cfg, std::uint64_t seed, const std::string& landmarks_path,
                  const std::string& out_path) {
    const auto landmarks = geometry::load_landmarks(landmarks_path);
    const auto est = geometry::estimate_homography(landmarks);
    geometry::Calibration calib = cfg.calibration_defaults();
    calib.homography = est.homography;
    geometry::save_calibration(calib, out_path);
    std::cout << "calibrated from " << landmarks.size() << " landmarks, forward RMS "
              << est.forward_rms << " m\n";
    io::Manifest m = start_manifest("calibrate", cfg, seed);
    hash_input(m, landmarks_path);
    m.outputs.push_back(fs::path(out_path).filename().string());
    io::write_manifest(m, out_path + ".manifest.json");
}

void do_track(const RunConfig& cfg, std::uint64_t seed, const std::string& detections_path,
              const std::string& calib_path, const std::string& out_path) {
    const auto detections = io::load_detections_jsonl(detections_path);
    const auto calib = geometry::load_calibration(calib_path);
    const auto trajectories = tracker::track_stream(detections, calib, cfg.tracker_config());
    io::save_trajectories_jsonl(trajectories, out_path);
    std::cout << "tracked " << trajectories.size() << " trajectories from "
              << detections.size() << " detections\n";
    io::Manifest m = start_manifest("track", cfg, seed);
    hash_input(m, detections_path);
    hash_input(m, calib_path);
    m.outputs.push_back(fs::path(out_path).filename().string());
    io::write_manifest(m, out_path + ".manifest.json");
}

std::string do_mot_eval(const RunConfig& cfg, const std::string& truth_path,
                        const std::string& computed_path, double radius) {
    const auto truth = io::load_trajectories_jsonl(truth_path);
    const auto computed = io::load_trajectories_jsonl(computed_path);
    const auto report =
        motmetrics::id_metrics(truth, computed, radius, cfg.real("tracker.frame_rate"));
    return motmetrics::format_report(report);
}

void do_synth(const RunConfig& cfg, std::uint64_t seed, const std::string& out_dir,
              const std::string& config_file) {
    fs::create_directories(out_dir);
    const auto synth_cfg = cfg.synth_config();
    const auto ds = synth::generate_dataset(synth_cfg, seed);
    const auto dets = synth::render_detections(ds.trajectories, ds.calib, synth_cfg, seed + 1);

    sim::save_scene(ds.scene, out_dir + "/scene.txt");
    geometry::save_calibration(ds.calib, out_dir + "/calib.txt");
    io::save_trajectories_jsonl(ds.trajectories, out_dir + "/trajectories.jsonl");
    io::save_detections_jsonl(dets, out_dir + "/detections.jsonl");
    io::save_splits(ds.splits, out_dir + "/splits.json");
    std::cout << "synth: " << ds.trajectories.size() << " trajectories, " << dets.size()
              << " detections -> " << out_dir << "\n";

    io::Manifest m = start_manifest("synth", cfg, seed);
    hash_input(m, config_file);
    m.outputs = {"scene.txt", "calib.txt", "trajectories.jsonl", "detections.jsonl",
                 "splits.json"};
    io::write_manifest(m, out_dir + "/manifest.json");
}

void do_train(const RunConfig& cfg, std::uint64_t seed, const std::string& algo,
              const std::string& demos_dir, const std::string& scene_path,
              const std::string& out_dir, const std::string& config_file) {
    const std::string traj_path = demos_dir + "/trajectories.jsonl";
    const std::string splits_path = demos_dir + "/splits.json";
    require_file("train", traj_path);
    require_file("train", splits_path);
    require_file("train", scene_path);

    const auto scene = sim::load_scene(scene_path);
    const auto dataset = io::load_trajectories_jsonl(traj_path);
    const auto splits = io::load_splits(splits_path);
    const auto scfg = cfg.sim_config();
    const auto fscale = cfg.feature_scale();
    const auto demos = imitation::build_demonstrations(scene, dataset, splits, scfg, fscale);

    fs::create_directories(out_dir);
    std::ofstream log_out(out_dir + "/train_log.jsonl");
    if (!log_out) throw Error("cannot write training log in " + out_dir);

    std::vector<std::string> outputs = {"train_log.jsonl"};
    if (algo == "bc") {
        tinynet::NetworkSpec spec;
        spec.scalar_inputs = demos.scalar_inputs;
        spec.dense_layers = cfg.dense_layers();
        spec.head = tinynet::Head::gaussian_policy;
        const auto result = imitation::bc_train(demos, spec, cfg.bc_config(), seed);
        for (std::size_t e = 0; e < result.val_history.size(); ++e) {
            json j;
            j["epoch"] = static_cast<int>(e);
            j["val_nll"] = result.val_history[e];
            log_out << j.dump() << "\n";
        }
        tinynet::CheckpointMeta meta{0, 0, seed};
        tinynet::save_checkpoint_file(out_dir + "/policy_best.ckpt", result.policy.spec,
                                      result.policy.params, meta);
        outputs.push_back("policy_best.ckpt");
        std::cout << "bc: best validation NLL " << result.best_val_nll << "\n";
    } else {
        const bool horizon = algo == "horizon-gail";
        auto train_cfg = cfg.train_config();
        const auto schedule = cfg.horizon_schedule();
        auto on_epoch = [&log_out](const imitation::EpochLog& log) {
            log_out << epoch_to_json(log).dump() << "\n";
            log_out.flush();
        };
        const auto result =
            horizon ? imitation::train_horizon_gail(demos, scene, dataset, splits, scfg, fscale,
                                                    schedule, train_cfg, seed, on_epoch)
                    : imitation::train_gail(demos, scene, dataset, splits, scfg, fscale,
                                            train_cfg, seed, on_epoch);
        const auto h_final = static_cast<std::uint32_t>(
            horizon ? schedule.horizon(train_cfg.epochs - 1) : 0);
        const auto best_epoch =
            static_cast<std::uint32_t>(result.best_epoch < 0 ? train_cfg.epochs - 1
                                                             : result.best_epoch);
        tinynet::save_checkpoint_file(out_dir + "/policy_best.ckpt", result.best_policy.spec,
                                      result.best_policy.params,
                                      {best_epoch,
                                       static_cast<std::uint32_t>(
                                           horizon ? schedule.horizon(best_epoch) : 0),
                                       seed});
        tinynet::save_checkpoint_file(out_dir + "/policy_final.ckpt", result.final_policy.spec,
                                      result.final_policy.params,
                                      {static_cast<std::uint32_t>(train_cfg.epochs - 1), h_final,
                                       seed});
        tinynet::save_checkpoint_file(out_dir + "/critic.ckpt", result.critic_spec,
                                      result.critic_params,
                                      {static_cast<std::uint32_t>(train_cfg.epochs - 1), h_final,
                                       seed});
        tinynet::save_checkpoint_file(out_dir + "/disc.ckpt", result.disc_spec,
                                      result.disc_params,
                                      {static_cast<std::uint32_t>(train_cfg.epochs - 1), h_final,
                                       seed});
        outputs.insert(outputs.end(),
                       {"policy_best.ckpt", "policy_final.ckpt", "critic.ckpt", "disc.ckpt"});
        std::cout << algo << ": best validation joint JSD " << result.best_val_jsd
                  << " at epoch " << result.best_epoch << "\n";
    }
    log_out.close();

    io::Manifest m = start_manifest("train", cfg, seed);
    m.config["train.algo"] = algo;
    hash_input(m, traj_path);
    hash_input(m, splits_path);
    hash_input(m, scene_path);
    hash_input(m, config_file);
    m.outputs = outputs;
    io::write_manifest(m, out_dir + "/manifest.json");
}

void do_evaluate(const RunConfig& cfg, std::uint64_t seed, const std::string& checkpoint_path,
                 const std::string& scene_path, const std::string& traj_path,
                 const std::string& splits_path, int windows, int ticks,
                 const std::string& out_path, const std::string& traces_dir,
                 const std::string& config_file) {
    const auto ckpt = tinynet::load_checkpoint_file(checkpoint_path);
    const auto scene = sim::load_scene(scene_path);
    const auto dataset = io::load_trajectories_jsonl(traj_path);
    const auto scfg = cfg.sim_config();
    const auto fscale = cfg.feature_scale();
    const imitation::GaussianPolicy policy{ckpt.spec, ckpt.params};

    double t0 = std::numeric_limits<double>::infinity();
    for (const auto& t : dataset) t0 = std::min(t0, t.start_time());
    if (!splits_path.empty()) {
        t0 = io::load_splits(splits_path).test_t0;
    }

    const auto factory = imitation::make_policy_factory(policy, fscale, seed,
                                                        cfg.boolean("eval.stochastic"));
    json windows_json = json::array();
    behavior::BehaviorReport mean;
    int done = 0;
    for (int w = 0; w < windows; ++w) {
        const double wt0 = t0 + w * ticks / scfg.frame_rate;
        std::vector<behavior::TraceSample> traces;
        behavior::BehaviorReport rep;
        try {
            rep = behavior::evaluate_policy(factory, scene, dataset, wt0, ticks, scfg,
                                            cfg.eval_config(),
                                            traces_dir.empty() ? nullptr : &traces);
        } catch (const behavior::WindowOutOfRange&) {
            break;  // ran out of data; report the windows that fit
        }
        windows_json.push_back(report_to_json(rep));
        mean.jsd_speed += rep.jsd_speed;
        mean.jsd_occupancy += rep.jsd_occupancy;
        mean.jsd_joint += rep.jsd_joint;
        mean.collision_probability += rep.collision_probability;
        mean.exit_failure_probability += rep.exit_failure_probability;
        ++done;
        if (!traces_dir.empty()) {
            fs::create_directories(traces_dir);
            std::ofstream tout(traces_dir + "/window_" + std::to_string(w) + ".jsonl");
            for (const auto& s : traces) {
                json j;
                j["tick"] = s.tick;
                j["id"] = s.id;
                j["class"] = to_string(s.cls);
                j["x"] = s.pos.x;
                j["y"] = s.pos.y;
                j["vx"] = s.vel.x;
                j["vy"] = s.vel.y;
                j["controlled"] = s.controlled;
                tout << j.dump() << "\n";
            }
        }
    }
    if (done == 0) throw behavior::WindowOutOfRange("no evaluation window fits the data");
    json out;
    out["windows"] = windows_json;
    out["mean"] = {{"jsd_speed", mean.jsd_speed / done},
                   {"jsd_occupancy", mean.jsd_occupancy / done},
                   {"jsd_joint", mean.jsd_joint / done},
                   {"collision_probability", mean.collision_probability / done},
                   {"exit_failure_probability", mean.exit_failure_probability / done}};
    std::ofstream rout(out_path);
    if (!rout) throw Error("cannot write report: " + out_path);
    rout << out.dump(2) << "\n";
    std::cout << "evaluate: " << done << " windows, mean joint JSD "
              << mean.jsd_joint / done << "\n";

    io::Manifest m = start_manifest("evaluate", cfg, seed);
    hash_input(m, checkpoint_path);
    hash_input(m, scene_path);
    hash_input(m, traj_path);
    hash_input(m, splits_path);
    hash_input(m, config_file);
    m.outputs.push_back(fs::path(out_path).filename().string());
    io::write_manifest(m, out_path + ".manifest.json");
}

void do_replay(const RunConfig& cfg, std::uint64_t seed, const std::string& scene_path,
               const std::string& traj_path, double from_t, int ticks,
               const std::string& out_path) {
    (void)scene_path;  // loaded for validation; replay itself only needs trajectories
    if (!scene_path.empty()) sim::load_scene(scene_path);
    const auto dataset = io::load_trajectories_jsonl(traj_path);
    const auto scfg = cfg.sim_config();
    const sim::ReplayWorld world(dataset, scfg.frame_rate);
    std::ofstream out(out_path);
    if (!out) throw Error("cannot write state dump: " + out_path);
    const int t0 = world.tick_of(from_t);
    for (int k = 0; k < ticks; ++k) {
        json j;
        j["t"] = world.time_of(t0 + k);
        json agents = json::array();
        for (const auto& a : world.states_at(t0 + k)) {
            agents.push_back({{"id", a.id},
                              {"class", to_string(a.cls)},
                              {"x", a.position.x},
                              {"y", a.position.y},
                              {"vx", a.velocity.x},
                              {"vy", a.velocity.y},
                              {"heading", a.heading}});
        }
        j["agents"] = std::move(agents);
        out << j.dump() << "\n";
    }
    io::Manifest m = start_manifest("replay", cfg, seed);
    hash_input(m, scene_path);
    hash_input(m, traj_path);
    m.outputs.push_back(fs::path(out_path).filename().string());
    io::write_manifest(m, out_path + ".manifest.json");
}

void do_pipeline(const RunConfig& cfg, std::uint64_t seed, std::vector<std::string> stages,
                 const std::string& out_dir, const std::string& config_file) {
    const std::vector<std::string> order = {"synth", "track", "mot-eval", "train", "evaluate"};
    for (const auto& s : stages) {
        if (std::find(order.begin(), order.end(), s) == order.end()) {
            throw StageFailure(s, "unknown stage");
        }
    }
    fs::create_directories(out_dir);
    const std::string synth_dir = out_dir + "/synth";
    const std::string track_dir = out_dir + "/track";

    auto requested = [&stages](const std::string& s) {
        return std::find(stages.begin(), stages.end(), s) != stages.end();
    };

    for (const auto& stage : order) {
        if (!requested(stage)) continue;
        try {
            if (stage == "synth") {
                do_synth(cfg, seed, synth_dir, config_file);
            } else if (stage == "track") {
                require_file(stage, synth_dir + "/detections.jsonl");
                require_file(stage, synth_dir + "/calib.txt");
                fs::create_directories(track_dir);
                do_track(cfg, seed, synth_dir + "/detections.jsonl", synth_dir + "/calib.txt",
                         track_dir + "/trajectories.jsonl");
            } else if (stage == "mot-eval") {
                require_file(stage, synth_dir + "/trajectories.jsonl");
                require_file(stage, track_dir + "/trajectories.jsonl");
                const std::string report =
                    do_mot_eval(cfg, synth_dir + "/trajectories.jsonl",
                                track_dir + "/trajectories.jsonl",
                                cfg.real("metrics.match_radius"));
                std::cout << report;
                fs::create_directories(out_dir + "/mot-eval");
                std::ofstream rep(out_dir + "/mot-eval/report.txt");
                rep << report;
                io::Manifest m = start_manifest("mot-eval", cfg, seed);
                hash_input(m, synth_dir + "/trajectories.jsonl");
                hash_input(m, track_dir + "/trajectories.jsonl");
                m.outputs.push_back("report.txt");
                io::write_manifest(m, out_dir + "/mot-eval/manifest.json");
            } else if (stage == "train") {
                // imitate tracked trajectories; splits and scene come from synth
                require_file(stage, track_dir + "/trajectories.jsonl");
                require_file(stage, synth_dir + "/splits.json");
                fs::create_directories(out_dir + "/train");
                fs::copy_file(synth_dir + "/splits.json", track_dir + "/splits.json",
                              fs::copy_options::overwrite_existing);
                do_train(cfg, seed, cfg.text("train.algo"), track_dir,
                         synth_dir + "/scene.txt", out_dir + "/train", config_file);
            } else if (stage == "evaluate") {
                require_file(stage, out_dir + "/train/policy_best.ckpt");
                fs::create_directories(out_dir + "/evaluate");
                do_evaluate(cfg, seed, out_dir + "/train/policy_best.ckpt",
                            synth_dir + "/scene.txt", track_dir + "/trajectories.jsonl",
                            synth_dir + "/splits.json",
                            static_cast<int>(cfg.integer("eval.windows")),
                            static_cast<int>(cfg.integer("eval.ticks")),
                            out_dir + "/evaluate/report.json", "", config_file);
            }
        } catch (const StageFailure&) {
            throw;
        } catch (const std::exception& e) {
            throw StageFailure(stage, e.what());
        }
    }
}

struct AppState {
    CommonArgs calibrate, track, moteval, synth, train, evaluate, replay, pipeline;
    std::string calibrate_landmarks, calibrate_out;
    std::string track_detections, track_calib, track_out;
    std::string moteval_truth, moteval_computed;
    double moteval_radius = -1.0;
    std::string synth_out_dir;
    std::string train_algo = "horizon-gail", train_demos, train_scene, train_out;
    std::string eval_checkpoint, eval_scene, eval_traj, eval_splits, eval_out, eval_traces;
    int eval_windows = -1, eval_ticks = -1;
    std::string replay_scene, replay_traj, replay_out;
    double replay_from = 0.0;
    int replay_ticks = 100;
    std::string netinfo_path;
    std::vector<std::string> pipeline_stages;
    std::string pipeline_out;
};

std::unique_ptr<CLI::App> build_app(AppState& st) {
    auto app = std::make_unique<CLI::App>(
        "vibe: trajectory extraction, traffic replay simulation and imitation learning");
    app->require_subcommand(0, 1);
    app->footer(RunConfig::help_text());

    auto* cal = app->add_subcommand("calibrate", "estimate the ground-plane homography");
    cal->add_option("--landmarks", st.calibrate_landmarks,
                    "landmark file: image_x image_y ground_x ground_y per line")
        ->required();
    cal->add_option("--out", st.calibrate_out, "calibration file to write")->required();
    add_common(cal, st.calibrate);

    auto* trk = app->add_subcommand("track", "track detections into 3D trajectories");
    trk->add_option("--detections", st.track_detections, "detection JSON-lines")->required();
    trk->add_option("--calib", st.track_calib, "calibration file")->required();
    trk->add_option("--out", st.track_out, "trajectory JSON-lines to write")->required();
    add_common(trk, st.track);

    auto* mot = app->add_subcommand("mot-eval", "identity metrics against ground truth");
    mot->add_option("--truth", st.moteval_truth, "ground-truth trajectories")->required();
    mot->add_option("--computed", st.moteval_computed, "tracker output")->required();
    mot->add_option("--radius", st.moteval_radius, "match radius (m)");
    add_common(mot, st.moteval);

    auto* syn = app->add_subcommand("synth", "generate a synthetic scene and dataset");
    syn->add_option("--out-dir", st.synth_out_dir, "output directory")->required();
    add_common(syn, st.synth);

    auto* tr = app->add_subcommand("train", "learn a policy from demonstrations");
    tr->add_option("--algo", st.train_algo, "bc | gail | horizon-gail")
        ->check(CLI::IsMember({"bc", "gail", "horizon-gail"}));
    tr->add_option("--demos", st.train_demos,
                   "directory with trajectories.jsonl and splits.json")
        ->required();
    tr->add_option("--scene", st.train_scene, "scene file")->required();
    tr->add_option("--out", st.train_out, "checkpoint directory")->required();
    add_common(tr, st.train);

    auto* ev = app->add_subcommand("evaluate", "behaviour metrics over evaluation windows");
    ev->add_option("--checkpoint", st.eval_checkpoint, "policy checkpoint")->required();
    ev->add_option("--scene", st.eval_scene, "scene file")->required();
    ev->add_option("--trajectories", st.eval_traj, "replay trajectories")->required();
    ev->add_option("--splits", st.eval_splits, "splits.json (windows start at the test split)");
    ev->add_option("--windows", st.eval_windows, "number of windows");
    ev->add_option("--ticks", st.eval_ticks, "ticks per window");
    ev->add_option("--out", st.eval_out, "report JSON to write")->required();
    ev->add_option("--dump-traces", st.eval_traces, "directory for per-tick position dumps");
    add_common(ev, st.evaluate);

    auto* rp = app->add_subcommand("replay", "dump replayed agent states per tick");
    rp->add_option("--scene", st.replay_scene, "scene file");
    rp->add_option("--trajectories", st.replay_traj, "trajectories to replay")->required();
    rp->add_option("--from", st.replay_from, "start time (s)");
    rp->add_option("--ticks", st.replay_ticks, "number of ticks");
    rp->add_option("--out", st.replay_out, "state dump JSON-lines")->required();
    add_common(rp, st.replay);

    auto* ni = app->add_subcommand("net-info", "print checkpoint spec and metadata");
    ni->add_option("checkpoint", st.netinfo_path, "checkpoint file")->required();

    auto* pl = app->add_subcommand("pipeline", "run stages in dependency order");
    pl->add_option("--stages", st.pipeline_stages,
                   "subset of synth,track,mot-eval,train,evaluate")
        ->required()
        ->delimiter(',');
    pl->add_option("--out-dir", st.pipeline_out, "pipeline output directory")->required();
    add_common(pl, st.pipeline);

    return app;
}

}  // namespace

std::string cli_help_text() {
    AppState st;
    const auto app = build_app(st);
    return app->help();
}

int run_cli(const std::vector<std::string>& args) {
    AppState st;
    auto app = build_app(st);
    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app->parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app->exit(e);
    }

    try {
        if (app->got_subcommand("calibrate")) {
            do_calibrate(make_config(st.calibrate), resolve_seed(st.calibrate),
                         st.calibrate_landmarks, st.calibrate_out);
        } else if (app->got_subcommand("track")) {
            do_track(make_config(st.track), resolve_seed(st.track), st.track_detections,
                     st.track_calib, st.track_out);
        } else if (app->got_subcommand("mot-eval")) {
            const RunConfig cfg = make_config(st.moteval);
            const double radius =
                st.moteval_radius > 0 ? st.moteval_radius : cfg.real("metrics.match_radius");
            std::cout << do_mot_eval(cfg, st.moteval_truth, st.moteval_computed, radius);
        } else if (app->got_subcommand("synth")) {
            do_synth(make_config(st.synth), resolve_seed(st.synth), st.synth_out_dir,
                     st.synth.config_file);
        } else if (app->got_subcommand("train")) {
            do_train(make_config(st.train), resolve_seed(st.train), st.train_algo,
                     st.train_demos, st.train_scene, st.train_out, st.train.config_file);
        } else if (app->got_subcommand("evaluate")) {
            const RunConfig cfg = make_config(st.evaluate);
            const int windows = st.eval_windows > 0
                                    ? st.eval_windows
                                    : static_cast<int>(cfg.integer("eval.windows"));
            const int ticks = st.eval_ticks > 0 ? st.eval_ticks
                                                : static_cast<int>(cfg.integer("eval.ticks"));
            do_evaluate(cfg, resolve_seed(st.evaluate), st.eval_checkpoint, st.eval_scene,
                        st.eval_traj, st.eval_splits, windows, ticks, st.eval_out,
                        st.eval_traces, st.evaluate.config_file);
        } else if (app->got_subcommand("replay")) {
            do_replay(make_config(st.replay), resolve_seed(st.replay), st.replay_scene,
                      st.replay_traj, st.replay_from, st.replay_ticks, st.replay_out);
        } else if (app->got_subcommand("net-info")) {
            std::cout << tinynet::describe(tinynet::load_checkpoint_file(st.netinfo_path));
        } else if (app->got_subcommand("pipeline")) {
            do_pipeline(make_config(st.pipeline), resolve_seed(st.pipeline),
                        st.pipeline_stages, st.pipeline_out, st.pipeline.config_file);
        } else {
            std::cout << app->help();
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace vibe::cli
