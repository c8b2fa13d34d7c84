#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "vibe/behavior_metrics.hpp"
#include "vibe/sim.hpp"
#include "vibe/synth.hpp"
#include "vibe/tinynet.hpp"

namespace vibe::imitation {

struct EmptyDataset : Error {
    using Error::Error;
};
struct NonFiniteLoss : Error {
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Observation/action encoding shared by policy, critic and discriminator

struct FeatureScale {
    double lidar_range = 30.0;  // sim.max_range
    double rate_scale = 20.0;   // m/s
    double dist_scale = 50.0;   // m
    double action_scale = 2.0;  // sim.max_step
};

std::vector<double> obs_to_input(const sim::Observation& obs, const FeatureScale& fs);
void append_action(std::vector<double>& input, const sim::Action& action, const FeatureScale& fs);

// ---------------------------------------------------------------------------
// Gaussian policy on top of the network kernel.  The head parameterizes the
// displacement in the agent frame (observations are egocentric, so the local
// action distribution is far smoother than the global one); samples are
// rotated into world coordinates by the heading scalars, which by the
// obs_to_input convention sit directly after the lidar block.  The rotation
// is measure preserving, so log densities carry over unchanged.

// ego -> world rotation taken from an encoded observation
Vec2 heading_of(const tinynet::NetworkSpec& spec, std::span<const double> input);
Vec2 rotate_to_world(const Vec2& ego, const Vec2& heading);
Vec2 rotate_to_ego(const Vec2& world, const Vec2& heading);

struct GaussianPolicy {
    tinynet::NetworkSpec spec;
    std::vector<double> params;

    // mean action (m, world frame); forward pass only
    Vec2 mean_action(std::span<const double> input, const FeatureScale& fs) const;
    // sampled world-frame action with its log density
    sim::PolicyDecision sample(std::span<const double> input, const FeatureScale& fs,
                               Rng& rng) const;
    double log_prob(std::span<const double> input, const sim::Action& action,
                    const FeatureScale& fs) const;
};

// Per-agent policy closures sharing parameters; agent streams are seeded by
// (seed, agent_id) so evaluation is deterministic and order independent.
sim::PolicyFactory make_policy_factory(const GaussianPolicy& policy, const FeatureScale& fs,
                                       std::uint64_t seed, bool stochastic);

// ---------------------------------------------------------------------------
// Demonstrations

struct DemoStep {
    std::vector<double> obs_input;  // encoded policy input
    Vec2 action;                    // raw displacement (m)
};

struct DemoTrajectory {
    int traj_index = -1;  // into the replay dataset
    int id = 0;
    double start_time = 0.0;
    std::vector<DemoStep> steps;  // step k: observation at sample k, action k -> k+1
};

struct DemonstrationSet {
    std::vector<DemoTrajectory> train, val, test;
    int scalar_inputs = 0;  // encoded scalars (heading, goal, one-hot, gated one-hot)
};

// Replays car trajectories through the simulator's observation generator and
// differences positions into displacement actions; pairs violating max_step
// are filtered out.
DemonstrationSet build_demonstrations(const sim::SceneLayout& scene,
                                      const std::vector<tracker::TrackedTrajectory>& dataset,
                                      const synth::SplitWindows& splits,
                                      const sim::SimConfig& scfg, const FeatureScale& fs);

// ---------------------------------------------------------------------------
// Behavioural cloning

struct BcConfig {
    int epochs = 150;
    double lr = 1e-3;
    int batch = 256;
    int workers = 2;
    double log_std_init = -0.5;
};

struct BcResult {
    GaussianPolicy policy;  // best-validation parameters
    double best_val_nll = 0.0;
    double epoch0_val_nll = 0.0;
    std::vector<double> val_history;
};

BcResult bc_train(const DemonstrationSet& demos, tinynet::NetworkSpec spec, const BcConfig& cfg,
                  std::uint64_t seed);

// ---------------------------------------------------------------------------
// GAIL pieces

// One ascent step on E_agent[log D] + E_expert[log(1 - D)]; D is the
// probability the pair came from the learned policy.
struct DiscStats {
    double loss = 0.0;      // cross-entropy being descended
    double accuracy = 0.0;  // D > 0.5 on agent, D < 0.5 on expert
    double mean_agent_d = 0.0;
    double mean_expert_d = 0.0;
};

DiscStats discriminator_step(const tinynet::NetworkSpec& spec, std::vector<double>& params,
                             tinynet::AdamState& opt,
                             const std::vector<std::vector<double>>& agent_inputs,
                             const std::vector<std::vector<double>>& expert_inputs, double lr,
                             int workers);

double discriminator_output(const tinynet::NetworkSpec& spec, std::span<const double> params,
                            std::span<const double> input);

// R(s, a) = -log(max(D(s, a), d_min))
double gail_reward(const tinynet::NetworkSpec& spec, std::span<const double> params,
                   std::span<const double> input, double d_min);

// Truncated GAE(lambda): bootstrap with the critic value at a truncated end,
// zero at a terminal one.  values has one entry per step.
struct AdvStep {
    double advantage = 0.0;
    double target = 0.0;
};
std::vector<AdvStep> compute_advantages(const std::vector<double>& rewards,
                                        const std::vector<double>& values, bool terminal,
                                        double bootstrap_value, double gamma, double lambda);

// ---------------------------------------------------------------------------
// PPO

struct PpoConfig {
    double clip = 0.2;
    double gamma = 0.99;
    double lambda = 0.95;
    int epochs_per_batch = 4;
    int minibatch = 256;
    double entropy_bonus = 1e-3;
    int interactions = 1024;
    double lr_policy = 3e-4;
    double lr_critic = 1e-3;
    double grad_clip = 10.0;
    int workers = 2;
};

struct PpoSample {
    std::vector<double> obs_input;
    Vec2 action_scaled;  // action / action_scale
    double logp_old = 0.0;
    double advantage = 0.0;
    double value_target = 0.0;
};

struct PpoStats {
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double clip_fraction = 0.0;
};

PpoStats ppo_update(GaussianPolicy& policy, tinynet::AdamState& policy_opt,
                    const tinynet::NetworkSpec& critic_spec, std::vector<double>& critic_params,
                    tinynet::AdamState& critic_opt, std::vector<PpoSample> batch,
                    const PpoConfig& cfg, Rng& rng);

// ---------------------------------------------------------------------------
// Training drivers

struct HorizonSchedule {
    int start = 1;
    int increment = 1;
    int epochs_per_increment = 100;
    int cap = 0;  // 0 = no cap

    int horizon(int epoch) const {
        int h = start + increment * (epoch / std::max(1, epochs_per_increment));
        if (cap > 0) h = std::min(h, cap);
        return h;
    }
};

struct TrainConfig {
    PpoConfig ppo;
    double d_min = 1e-6;
    double lr_disc = 1e-4;
    int disc_steps = 1;
    double disc_acc_target = 1.0;  // skip further disc steps above this accuracy
    int epochs = 500;
    int val_interval = 1;   // epochs between validation evaluations
    int val_ticks = 1000;
    bool stride_random = false;  // uniform-random episode starts instead of 0, h, 2h...
    int max_episode_ticks = 400;  // vanilla-GAIL episode cap
    double log_std_init = -0.5;
    bool stochastic_validation = false;  // mean-policy validation by default
    bool lr_decay = true;  // linear policy/critic lr decay to 20% across training
    std::vector<int> dense_layers{128, 64};
    behavior::EvalConfig eval;
};

struct EpochLog {
    int epoch = 0;
    int horizon = 0;
    int interactions = 0;
    double disc_loss = 0.0;
    double disc_accuracy = 0.0;
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double mean_reward = 0.0;
    double mean_agent_d = 0.0;   // discriminator output on agent pairs
    double mean_expert_d = 0.0;  // discriminator output on expert pairs
    double probe_action_mse = 0.0;  // mean policy-vs-expert action error (m^2)
    double val_jsd_joint = -1.0;  // -1 when validation did not run this epoch
    double val_jsd_speed = -1.0;
    double val_jsd_occupancy = -1.0;
    double val_collision = -1.0;
    double val_exit_failure = -1.0;
    bool is_best = false;
};

struct TrainResult {
    GaussianPolicy best_policy;
    GaussianPolicy final_policy;
    tinynet::NetworkSpec critic_spec, disc_spec;
    std::vector<double> critic_params, disc_params;
    std::vector<EpochLog> log;
    double best_val_jsd = 0.0;
    int best_epoch = -1;
};

// Horizon-curriculum GAIL; vanilla GAIL is the same loop with episodes
// starting at trajectory entries and an uncapped horizon.
TrainResult train_horizon_gail(const DemonstrationSet& demos, const sim::SceneLayout& scene,
                               const std::vector<tracker::TrackedTrajectory>& dataset,
                               const synth::SplitWindows& splits, const sim::SimConfig& scfg,
                               const FeatureScale& fs, const HorizonSchedule& schedule,
                               const TrainConfig& cfg, std::uint64_t seed,
                               const std::function<void(const EpochLog&)>& on_epoch = {});

TrainResult train_gail(const DemonstrationSet& demos, const sim::SceneLayout& scene,
                       const std::vector<tracker::TrackedTrajectory>& dataset,
                       const synth::SplitWindows& splits, const sim::SimConfig& scfg,
                       const FeatureScale& fs, const TrainConfig& cfg, std::uint64_t seed,
                       const std::function<void(const EpochLog&)>& on_epoch = {});

}  // namespace vibe::imitation
