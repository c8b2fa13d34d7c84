#include "vibe/imitation.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>

namespace vibe::imitation {

namespace {

constexpr double kHalfLog2Pi = 0.9189385332046727;  // 0.5 ln(2 pi)

double clamp_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw NonFiniteLoss(std::string("non-finite ") + what);
    return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// Encoding

std::vector<double> obs_to_input(const sim::Observation& obs, const FeatureScale& fs) {
    std::vector<double> in;
    in.reserve(obs.lidar.size() + 3 + obs.exit_onehot.size());
    for (int b = 0; b < obs.beams; ++b) {
        const double* row = &obs.lidar[static_cast<std::size_t>(b) * sim::kLidarChannels];
        in.push_back(row[0] / fs.lidar_range);
        in.push_back(row[1] / fs.lidar_range);
        in.push_back(row[2] / fs.lidar_range);
        in.push_back(row[3] / fs.rate_scale);
        in.push_back(row[4]);
    }
    in.push_back(obs.heading_sin);
    in.push_back(obs.heading_cos);
    in.push_back(obs.distance_to_goal / fs.dist_scale);
    // the exit choice and goal progress drive route decisions; amplified so
    // they are not drowned by the 320-dim lidar block, and gated by goal
    // proximity so "my exit is coming up" is directly visible
    const double reach = 0.3 * fs.dist_scale;
    const double proximity = reach / (reach + std::max(0.0, obs.distance_to_goal));
    for (double v : obs.exit_onehot) in.push_back(2.0 * v);
    for (double v : obs.exit_onehot) in.push_back(2.0 * v * proximity);
    return in;
}

void append_action(std::vector<double>& input, const sim::Action& action,
                   const FeatureScale& fs) {
    input.push_back(action.displacement.x / fs.action_scale);
    input.push_back(action.displacement.y / fs.action_scale);
}

// ---------------------------------------------------------------------------
// Gaussian policy

Vec2 heading_of(const tinynet::NetworkSpec& spec, std::span<const double> input) {
    if (spec.scalar_inputs < 2) return {0.0, 1.0};  // identity rotation
    const std::size_t base =
        static_cast<std::size_t>(spec.lidar_beams) * spec.lidar_channels;
    const double s = input[base], c = input[base + 1];
    const double n = std::hypot(s, c);
    if (n < 1e-9) return {0.0, 1.0};
    return {s / n, c / n};
}

Vec2 rotate_to_world(const Vec2& ego, const Vec2& heading) {
    const double s = heading.x, c = heading.y;
    return {c * ego.x - s * ego.y, s * ego.x + c * ego.y};
}

Vec2 rotate_to_ego(const Vec2& world, const Vec2& heading) {
    const double s = heading.x, c = heading.y;
    return {c * world.x + s * world.y, -s * world.x + c * world.y};
}

Vec2 GaussianPolicy::mean_action(std::span<const double> input, const FeatureScale& fs) const {
    const auto out = tinynet::forward(spec, params, input);
    return rotate_to_world({out[0] * fs.action_scale, out[1] * fs.action_scale},
                           heading_of(spec, input));
}

sim::PolicyDecision GaussianPolicy::sample(std::span<const double> input, const FeatureScale& fs,
                                           Rng& rng) const {
    const auto out = tinynet::forward(spec, params, input);
    const double sx = std::exp(out[2]), sy = std::exp(out[3]);
    const double zx = rng.normal(), zy = rng.normal();
    const Vec2 ego{(out[0] + sx * zx) * fs.action_scale, (out[1] + sy * zy) * fs.action_scale};
    sim::PolicyDecision dec;
    dec.action.displacement = rotate_to_world(ego, heading_of(spec, input));
    dec.logp = -0.5 * (zx * zx + zy * zy) - out[2] - out[3] - 2.0 * kHalfLog2Pi;
    return dec;
}

double GaussianPolicy::log_prob(std::span<const double> input, const sim::Action& action,
                                const FeatureScale& fs) const {
    const auto out = tinynet::forward(spec, params, input);
    const Vec2 ego = rotate_to_ego(action.displacement, heading_of(spec, input));
    const double zx = (ego.x / fs.action_scale - out[0]) / std::exp(out[2]);
    const double zy = (ego.y / fs.action_scale - out[1]) / std::exp(out[3]);
    return -0.5 * (zx * zx + zy * zy) - out[2] - out[3] - 2.0 * kHalfLog2Pi;
}

sim::PolicyFactory make_policy_factory(const GaussianPolicy& policy, const FeatureScale& fs,
                                       std::uint64_t seed, bool stochastic) {
    return [policy, fs, seed, stochastic](int agent_id) -> sim::PolicyFn {
        auto rng = std::make_shared<Rng>(seed ^ (0x720b1a5d5cd4fe11ULL *
                                                 static_cast<std::uint64_t>(agent_id + 7)));
        return [policy, fs, rng, stochastic](const sim::Observation& obs) {
            const auto input = obs_to_input(obs, fs);
            if (stochastic) return policy.sample(input, fs, *rng);
            sim::PolicyDecision dec;
            dec.action.displacement = policy.mean_action(input, fs);
            return dec;
        };
    };
}

// ---------------------------------------------------------------------------
// Demonstrations

DemonstrationSet build_demonstrations(const sim::SceneLayout& scene,
                                      const std::vector<tracker::TrackedTrajectory>& dataset,
                                      const synth::SplitWindows& splits,
                                      const sim::SimConfig& scfg, const FeatureScale& fs) {
    DemonstrationSet out;
    const sim::ReplayWorld world(dataset, scfg.frame_rate);
    const int exit_count = static_cast<int>(scene.exits.size());
    out.scalar_inputs = 3 + 2 * std::max(1, exit_count);

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

    for (int i = 0; i < static_cast<int>(dataset.size()); ++i) {
        const auto& traj = dataset[i];
        if (traj.cls != ObjectClass::car || traj.samples.size() < 2) continue;
        std::vector<DemoTrajectory>* bucket = nullptr;
        if (traj.start_time() >= splits.train_t0 && traj.end_time() <= splits.train_t1) {
            bucket = &out.train;
        } else if (traj.start_time() >= splits.val_t0 && traj.end_time() <= splits.val_t1) {
            bucket = &out.val;
        } else if (traj.start_time() >= splits.test_t0 && traj.end_time() <= splits.test_t1) {
            bucket = &out.test;
        } else {
            continue;  // split-boundary crossers belong to no split
        }

        DemoTrajectory demo;
        demo.traj_index = i;
        demo.id = traj.id;
        demo.start_time = traj.start_time();
        const int first = world.first_tick(i);
        for (std::size_t k = 0; k + 1 < traj.samples.size(); ++k) {
            const Vec2 action = traj.samples[k + 1].pos - traj.samples[k].pos;
            if (action.norm() > scfg.max_step) continue;  // filtered upstream
            sim::AgentState st = world.state(i, first + static_cast<int>(k));
            st.goal = traj.samples.back().pos;
            st.target_exit = nearest_exit(st.goal);
            const auto others = world.states_at(first + static_cast<int>(k), i);
            const auto obs = sim::make_observation(st, scene, others, scfg, exit_count);
            demo.steps.push_back({obs_to_input(obs, fs), action});
        }
        if (!demo.steps.empty()) bucket->push_back(std::move(demo));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Behavioural cloning

namespace {

double mean_nll(const GaussianPolicy& policy, const std::vector<const DemoStep*>& steps,
                const FeatureScale& fs) {
    if (steps.empty()) return 0.0;
    double acc = 0.0;
    for (const auto* s : steps) acc += -policy.log_prob(s->obs_input, {s->action}, fs);
    return acc / static_cast<double>(steps.size());
}

std::vector<const DemoStep*> flatten(const std::vector<DemoTrajectory>& trajs) {
    std::vector<const DemoStep*> out;
    for (const auto& t : trajs)
        for (const auto& s : t.steps) out.push_back(&s);
    return out;
}

void clamp_log_std(const tinynet::NetworkSpec& spec, std::vector<double>& params) {
    if (spec.head != tinynet::Head::gaussian_policy) return;
    const std::size_t n = params.size();
    params[n - 2] = std::clamp(params[n - 2], -4.0, 1.5);
    params[n - 1] = std::clamp(params[n - 1], -4.0, 1.5);
}

void clip_gradient(std::vector<double>& grad, double max_norm) {
    double norm2 = 0.0;
    for (double g : grad) norm2 += g * g;
    const double norm = std::sqrt(norm2);
    if (norm > max_norm && norm > 0.0) {
        const double f = max_norm / norm;
        for (auto& g : grad) g *= f;
    }
}

}  // namespace

BcResult bc_train(const DemonstrationSet& demos, tinynet::NetworkSpec spec, const BcConfig& cfg,
                  std::uint64_t seed) {
    const auto train = flatten(demos.train);
    const auto val = flatten(demos.val);
    if (train.empty()) throw EmptyDataset("behavioural cloning needs a non-empty train split");

    Rng rng(seed);
    spec.head = tinynet::Head::gaussian_policy;
    GaussianPolicy policy{spec, tinynet::init_params(spec, rng, cfg.log_std_init)};
    FeatureScale fs;  // scaling already applied in demo inputs; action_scale matters
    tinynet::AdamState opt(policy.params.size());
    const tinynet::AdamHyper hyper{cfg.lr, 0.9, 0.999, 1e-8};

    BcResult result;
    result.policy = policy;
    result.epoch0_val_nll = mean_nll(policy, val.empty() ? train : val, fs);
    result.best_val_nll = result.epoch0_val_nll;
    result.val_history.push_back(result.epoch0_val_nll);

    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    const int workers = std::max(1, cfg.workers);
    std::vector<std::vector<double>> wgrad(workers);
    std::vector<double> grad(policy.params.size());

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[rng.uniform_int(i)]);
        }
        for (std::size_t lo = 0; lo < order.size(); lo += cfg.batch) {
            const std::size_t hi = std::min(order.size(), lo + cfg.batch);
            const double inv = 1.0 / static_cast<double>(hi - lo);
            std::fill(grad.begin(), grad.end(), 0.0);
            parallel_chunks(
                hi - lo, workers,
                [&](int w, std::size_t a, std::size_t b) {
                    wgrad[w].assign(policy.params.size(), 0.0);
                    tinynet::ForwardCache cache;
                    for (std::size_t k = a; k < b; ++k) {
                        const DemoStep& s = *train[order[lo + k]];
                        const auto out =
                            tinynet::forward(policy.spec, policy.params, s.obs_input, &cache);
                        const Vec2 ego =
                            rotate_to_ego(s.action, heading_of(policy.spec, s.obs_input));
                        const double ax = ego.x / fs.action_scale;
                        const double ay = ego.y / fs.action_scale;
                        const double sx = std::exp(out[2]), sy = std::exp(out[3]);
                        const double zx = (ax - out[0]) / sx, zy = (ay - out[1]) / sy;
                        // d nll / d [mu, log_std]
                        const double og[4] = {-zx / sx * inv, -zy / sy * inv,
                                              (1.0 - zx * zx) * inv, (1.0 - zy * zy) * inv};
                        tinynet::backward(policy.spec, policy.params, cache, og, wgrad[w]);
                    }
                },
                [&](int w) {
                    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += wgrad[w][i];
                });
            clip_gradient(grad, 10.0);
            tinynet::adam_step(policy.params, grad, opt, hyper);
            clamp_log_std(policy.spec, policy.params);
        }
        const double val_nll = mean_nll(policy, val.empty() ? train : val, fs);
        clamp_finite(val_nll, "validation loss");
        result.val_history.push_back(val_nll);
        if (val_nll < result.best_val_nll) {
            result.best_val_nll = val_nll;
            result.policy = policy;
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Discriminator

double discriminator_output(const tinynet::NetworkSpec& spec, std::span<const double> params,
                            std::span<const double> input) {
    const double logit = tinynet::forward(spec, params, input)[0];
    return 1.0 / (1.0 + std::exp(-logit));
}

double gail_reward(const tinynet::NetworkSpec& spec, std::span<const double> params,
                   std::span<const double> input, double d_min) {
    return -std::log(std::max(discriminator_output(spec, params, input), d_min));
}

DiscStats discriminator_step(const tinynet::NetworkSpec& spec, std::vector<double>& params,
                             tinynet::AdamState& opt,
                             const std::vector<std::vector<double>>& agent_inputs,
                             const std::vector<std::vector<double>>& expert_inputs, double lr,
                             int workers) {
    DiscStats stats;
    const std::size_t na = agent_inputs.size(), ne = expert_inputs.size();
    if (na == 0 || ne == 0) return stats;

    const std::size_t total = na + ne;
    std::vector<double> grad(params.size(), 0.0);
    std::vector<std::vector<double>> wgrad(std::max(1, workers));
    std::vector<double> wloss(std::max(1, workers), 0.0);
    std::vector<double> wacc(std::max(1, workers), 0.0);
    std::vector<double> wda(std::max(1, workers), 0.0), wde(std::max(1, workers), 0.0);

    parallel_chunks(
        total, std::max(1, workers),
        [&](int w, std::size_t a, std::size_t b) {
            wgrad[w].assign(params.size(), 0.0);
            tinynet::ForwardCache cache;
            for (std::size_t k = a; k < b; ++k) {
                const bool is_agent = k < na;
                const auto& input = is_agent ? agent_inputs[k] : expert_inputs[k - na];
                const double logit = tinynet::forward(spec, params, input, &cache)[0];
                const double d = 1.0 / (1.0 + std::exp(-logit));
                // ascend E_agent[log D] + E_expert[log(1 - D)]
                double og;
                if (is_agent) {
                    wloss[w] += -std::log(std::max(d, 1e-12)) / static_cast<double>(na);
                    og = -(1.0 - d) / static_cast<double>(na);
                    wacc[w] += d > 0.5 ? 1.0 : 0.0;
                    wda[w] += d;
                } else {
                    wloss[w] += -std::log(std::max(1.0 - d, 1e-12)) / static_cast<double>(ne);
                    og = d / static_cast<double>(ne);
                    wacc[w] += d < 0.5 ? 1.0 : 0.0;
                    wde[w] += d;
                }
                const double ogv[1] = {og};
                tinynet::backward(spec, params, cache, ogv, wgrad[w]);
            }
        },
        [&](int w) {
            for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += wgrad[w][i];
            stats.loss += wloss[w];
            stats.accuracy += wacc[w];
            stats.mean_agent_d += wda[w];
            stats.mean_expert_d += wde[w];
        });

    clamp_finite(stats.loss, "discriminator loss");
    clip_gradient(grad, 10.0);
    tinynet::adam_step(params, grad, opt, {lr, 0.9, 0.999, 1e-8});
    stats.accuracy /= static_cast<double>(total);
    stats.mean_agent_d /= static_cast<double>(na);
    stats.mean_expert_d /= static_cast<double>(ne);
    return stats;
}

// ---------------------------------------------------------------------------
// Advantages

std::vector<AdvStep> compute_advantages(const std::vector<double>& rewards,
                                        const std::vector<double>& values, bool terminal,
                                        double bootstrap_value, double gamma, double lambda) {
    const std::size_t n = rewards.size();
    std::vector<AdvStep> out(n);
    double next_adv = 0.0;
    double next_value = terminal ? 0.0 : bootstrap_value;
    for (std::size_t i = n; i > 0; --i) {
        const std::size_t t = i - 1;
        const double delta = rewards[t] + gamma * next_value - values[t];
        next_adv = delta + gamma * lambda * next_adv;
        out[t].advantage = next_adv;
        out[t].target = next_adv + values[t];
        next_value = values[t];
    }
    return out;
}

// ---------------------------------------------------------------------------
// PPO

PpoStats ppo_update(GaussianPolicy& policy, tinynet::AdamState& policy_opt,
                    const tinynet::NetworkSpec& critic_spec, std::vector<double>& critic_params,
                    tinynet::AdamState& critic_opt, std::vector<PpoSample> batch,
                    const PpoConfig& cfg, Rng& rng) {
    PpoStats stats;
    if (batch.empty()) return stats;

    // normalize advantages over the batch
    double mean = 0.0;
    for (const auto& s : batch) mean += s.advantage;
    mean /= static_cast<double>(batch.size());
    double var = 0.0;
    for (const auto& s : batch) var += (s.advantage - mean) * (s.advantage - mean);
    const double std_dev = std::max(std::sqrt(var / static_cast<double>(batch.size())), 1e-8);
    for (auto& s : batch) s.advantage = (s.advantage - mean) / std_dev;

    const int workers = std::max(1, cfg.workers);
    std::vector<std::size_t> order(batch.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    std::vector<double> pgrad(policy.params.size());
    std::vector<double> cgrad(critic_params.size());
    std::vector<std::vector<double>> wp(workers), wc(workers);
    std::vector<double> wploss(workers), wvloss(workers), went(workers), wclip(workers);

    const tinynet::AdamHyper phyper{cfg.lr_policy, 0.9, 0.999, 1e-8};
    const tinynet::AdamHyper chyper{cfg.lr_critic, 0.9, 0.999, 1e-8};

    long minibatches = 0;
    for (int pass = 0; pass < cfg.epochs_per_batch; ++pass) {
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[rng.uniform_int(i)]);
        }
        for (std::size_t lo = 0; lo < order.size(); lo += cfg.minibatch) {
            const std::size_t hi = std::min(order.size(), lo + cfg.minibatch);
            const double inv = 1.0 / static_cast<double>(hi - lo);
            std::fill(pgrad.begin(), pgrad.end(), 0.0);
            std::fill(cgrad.begin(), cgrad.end(), 0.0);
            double ploss = 0.0, vloss = 0.0, entropy = 0.0, clipped = 0.0;
            parallel_chunks(
                hi - lo, workers,
                [&](int w, std::size_t a, std::size_t b) {
                    wp[w].assign(policy.params.size(), 0.0);
                    wc[w].assign(critic_params.size(), 0.0);
                    wploss[w] = wvloss[w] = went[w] = wclip[w] = 0.0;
                    tinynet::ForwardCache cache;
                    for (std::size_t k = a; k < b; ++k) {
                        const PpoSample& s = batch[order[lo + k]];
                        // policy
                        const auto out =
                            tinynet::forward(policy.spec, policy.params, s.obs_input, &cache);
                        const double sx = std::exp(out[2]), sy = std::exp(out[3]);
                        const double zx = (s.action_scaled.x - out[0]) / sx;
                        const double zy = (s.action_scaled.y - out[1]) / sy;
                        const double logp = -0.5 * (zx * zx + zy * zy) - out[2] - out[3] -
                                            2.0 * kHalfLog2Pi;
                        const double ratio = std::exp(logp - s.logp_old);
                        const double adv = s.advantage;
                        const bool clip_active = (adv >= 0.0 && ratio > 1.0 + cfg.clip) ||
                                                 (adv < 0.0 && ratio < 1.0 - cfg.clip);
                        const double surr =
                            std::min(ratio * adv, std::clamp(ratio, 1.0 - cfg.clip,
                                                             1.0 + cfg.clip) * adv);
                        wploss[w] += -surr;
                        went[w] += out[2] + out[3] + 2.0 * (0.5 + kHalfLog2Pi);
                        wclip[w] += clip_active ? 1.0 : 0.0;
                        // d(-surr)/d logp = -adv * ratio when unclipped
                        const double dlogp = clip_active ? 0.0 : -adv * ratio;
                        double og[4] = {0, 0, 0, 0};
                        og[0] = dlogp * (zx / sx) * inv;
                        og[1] = dlogp * (zy / sy) * inv;
                        og[2] = (dlogp * (zx * zx - 1.0) - cfg.entropy_bonus) * inv;
                        og[3] = (dlogp * (zy * zy - 1.0) - cfg.entropy_bonus) * inv;
                        tinynet::backward(policy.spec, policy.params, cache, og, wp[w]);
                        // critic
                        const auto v =
                            tinynet::forward(critic_spec, critic_params, s.obs_input, &cache);
                        const double err = v[0] - s.value_target;
                        wvloss[w] += err * err;
                        const double cg[1] = {2.0 * err * inv};
                        tinynet::backward(critic_spec, critic_params, cache, cg, wc[w]);
                    }
                },
                [&](int w) {
                    for (std::size_t i = 0; i < pgrad.size(); ++i) pgrad[i] += wp[w][i];
                    for (std::size_t i = 0; i < cgrad.size(); ++i) cgrad[i] += wc[w][i];
                    ploss += wploss[w];
                    vloss += wvloss[w];
                    entropy += went[w];
                    clipped += wclip[w];
                });
            if (!std::isfinite(ploss) || !std::isfinite(vloss)) {
                throw NonFiniteLoss("ppo_update: non-finite loss in minibatch " +
                                    std::to_string(minibatches));
            }
            clip_gradient(pgrad, cfg.grad_clip);
            clip_gradient(cgrad, cfg.grad_clip);
            tinynet::adam_step(policy.params, pgrad, policy_opt, phyper);
            clamp_log_std(policy.spec, policy.params);
            tinynet::adam_step(critic_params, cgrad, critic_opt, chyper);
            stats.policy_loss += ploss * inv;
            stats.value_loss += vloss * inv;
            stats.entropy += entropy * inv;
            stats.clip_fraction += clipped * inv;
            ++minibatches;
        }
    }
    if (minibatches > 0) {
        stats.policy_loss /= static_cast<double>(minibatches);
        stats.value_loss /= static_cast<double>(minibatches);
        stats.entropy /= static_cast<double>(minibatches);
        stats.clip_fraction /= static_cast<double>(minibatches);
    }
    return stats;
}

// ---------------------------------------------------------------------------
// Training drivers

namespace {

struct CollectedStep {
    std::vector<double> obs_input;
    Vec2 action_scaled;
    double logp = 0.0;
    double reward = 0.0;
};

struct CollectedRollout {
    std::vector<CollectedStep> steps;
    bool terminal = false;
    std::vector<double> bootstrap_input;  // encoded final observation if truncated
};

TrainResult train_core(const DemonstrationSet& demos, const sim::SceneLayout& scene,
                       const std::vector<tracker::TrackedTrajectory>& dataset,
                       const synth::SplitWindows& splits, const sim::SimConfig& scfg,
                       const FeatureScale& fs, const HorizonSchedule& schedule,
                       const TrainConfig& cfg, bool vanilla, std::uint64_t seed,
                       const std::function<void(const EpochLog&)>& on_epoch) {
    if (demos.train.empty()) throw EmptyDataset("training needs a non-empty train split");

    Rng rng(seed);
    tinynet::NetworkSpec pspec;
    pspec.scalar_inputs = demos.scalar_inputs;
    pspec.dense_layers = cfg.dense_layers;
    pspec.head = tinynet::Head::gaussian_policy;
    tinynet::NetworkSpec cspec = pspec;
    cspec.head = tinynet::Head::scalar;
    tinynet::NetworkSpec dspec = cspec;
    dspec.scalar_inputs += 2;  // observation (+) action

    TrainResult result;
    result.critic_spec = cspec;
    result.disc_spec = dspec;

    GaussianPolicy policy{pspec, tinynet::init_params(pspec, rng, cfg.log_std_init)};
    result.critic_params = tinynet::init_params(cspec, rng);
    result.disc_params = tinynet::init_params(dspec, rng);
    tinynet::AdamState popt(policy.params.size());
    tinynet::AdamState copt(result.critic_params.size());
    tinynet::AdamState dopt(result.disc_params.size());

    sim::Simulator simulator(scene, dataset, scfg);
    const double dt = scfg.dt();

    result.best_val_jsd = std::numeric_limits<double>::infinity();

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const int h = vanilla ? cfg.max_episode_ticks : schedule.horizon(epoch);
        PpoConfig ppo_cfg = cfg.ppo;
        if (cfg.lr_decay && cfg.epochs > 1) {
            const double f = std::max(0.2, 1.0 - 0.8 * epoch / (cfg.epochs - 1.0));
            ppo_cfg.lr_policy *= f;
            ppo_cfg.lr_critic *= f;
        }

        // -- collect rollouts until the interaction budget is filled
        std::vector<CollectedRollout> rollouts;
        std::vector<const DemoTrajectory*> sampled_experts;
        int interactions = 0;
        while (interactions < cfg.ppo.interactions) {
            const DemoTrajectory& demo = demos.train[rng.uniform_int(demos.train.size())];
            sampled_experts.push_back(&demo);
            const int len = static_cast<int>(demo.steps.size());  // expert steps available

            std::vector<int> starts;
            if (vanilla) {
                starts.push_back(0);
            } else if (cfg.stride_random) {
                const int n_segments = std::max(1, (len + h - 1) / h);
                for (int s = 0; s < n_segments; ++s) {
                    starts.push_back(static_cast<int>(rng.uniform_int(std::max(1, len - 1))));
                }
            } else {
                for (int t = 0; t <= std::max(0, len - h); t += h) {
                    starts.push_back(t);
                    if (t == 0 && len - h <= 0) break;
                }
            }

            for (int t : starts) {
                if (interactions >= cfg.ppo.interactions) break;
                const int horizon = std::min(h, std::max(1, len - t));
                sim::Episode ep;
                try {
                    ep = simulator.init_episode(demo.traj_index, demo.start_time + t * dt,
                                                horizon);
                } catch (const sim::NoSuchAgentAtTime&) {
                    continue;
                }
                sim::PolicyFn act = [&](const sim::Observation& obs) {
                    return policy.sample(obs_to_input(obs, fs), fs, rng);
                };
                const sim::Rollout ro = simulator.rollout(act, ep, true);
                CollectedRollout collected;
                collected.terminal = !ro.steps.empty() && ro.steps.back().terminal;
                for (const auto& step : ro.steps) {
                    CollectedStep cs;
                    cs.obs_input = obs_to_input(step.obs, fs);
                    const Vec2 ego = rotate_to_ego(step.action.displacement,
                                                   heading_of(pspec, cs.obs_input));
                    cs.action_scaled = {ego.x / fs.action_scale, ego.y / fs.action_scale};
                    cs.logp = step.logp;
                    collected.steps.push_back(std::move(cs));
                }
                if (ro.final_obs) collected.bootstrap_input = obs_to_input(*ro.final_obs, fs);
                interactions += static_cast<int>(collected.steps.size());
                if (!collected.steps.empty()) rollouts.push_back(std::move(collected));
            }
        }

        // -- discriminator update on M agent and M expert pairs
        std::vector<const CollectedStep*> agent_pool;
        for (const auto& ro : rollouts)
            for (const auto& s : ro.steps) agent_pool.push_back(&s);
        std::vector<const DemoStep*> expert_pool;
        for (const auto* demo : sampled_experts)
            for (const auto& s : demo->steps) expert_pool.push_back(&s);

        DiscStats dstats;
        const int m = cfg.ppo.minibatch;
        for (int ds = 0; ds < cfg.disc_steps; ++ds) {
            if (ds > 0 && dstats.accuracy >= cfg.disc_acc_target) break;
            std::vector<std::vector<double>> agent_in, expert_in;
            agent_in.reserve(m);
            expert_in.reserve(m);
            for (int k = 0; k < m; ++k) {
                const CollectedStep& s = *agent_pool[rng.uniform_int(agent_pool.size())];
                auto in = s.obs_input;
                in.push_back(s.action_scaled.x);
                in.push_back(s.action_scaled.y);
                agent_in.push_back(std::move(in));
            }
            for (int k = 0; k < m; ++k) {
                const DemoStep& s = *expert_pool[rng.uniform_int(expert_pool.size())];
                auto in = s.obs_input;
                const Vec2 ego = rotate_to_ego(s.action, heading_of(pspec, s.obs_input));
                append_action(in, {ego}, fs);
                expert_in.push_back(std::move(in));
            }
            dstats = discriminator_step(dspec, result.disc_params, dopt, agent_in, expert_in,
                                        cfg.lr_disc, cfg.ppo.workers);
        }

        // -- relabel rewards with the updated discriminator, then advantages
        double reward_sum = 0.0;
        std::vector<PpoSample> batch;
        batch.reserve(static_cast<std::size_t>(interactions));
        for (auto& ro : rollouts) {
            std::vector<double> rewards(ro.steps.size()), values(ro.steps.size());
            for (std::size_t k = 0; k < ro.steps.size(); ++k) {
                auto in = ro.steps[k].obs_input;
                in.push_back(ro.steps[k].action_scaled.x);
                in.push_back(ro.steps[k].action_scaled.y);
                rewards[k] = gail_reward(dspec, result.disc_params, in, cfg.d_min);
                reward_sum += rewards[k];
                values[k] =
                    tinynet::forward(cspec, result.critic_params, ro.steps[k].obs_input)[0];
            }
            double bootstrap = 0.0;
            if (!ro.terminal && !ro.bootstrap_input.empty()) {
                bootstrap =
                    tinynet::forward(cspec, result.critic_params, ro.bootstrap_input)[0];
            }
            const auto adv = compute_advantages(rewards, values, ro.terminal, bootstrap,
                                                cfg.ppo.gamma, cfg.ppo.lambda);
            for (std::size_t k = 0; k < ro.steps.size(); ++k) {
                PpoSample s;
                s.obs_input = std::move(ro.steps[k].obs_input);
                s.action_scaled = ro.steps[k].action_scaled;
                s.logp_old = ro.steps[k].logp;
                s.advantage = adv[k].advantage;
                s.value_target = adv[k].target;
                batch.push_back(std::move(s));
            }
        }

        PpoStats pstats;
        try {
            pstats = ppo_update(policy, popt, cspec, result.critic_params, copt,
                                std::move(batch), ppo_cfg, rng);
        } catch (const NonFiniteLoss& e) {
            throw NonFiniteLoss("epoch " + std::to_string(epoch) + ": " + e.what());
        }

        EpochLog log;
        log.epoch = epoch;
        log.horizon = h;
        log.interactions = interactions;
        log.disc_loss = dstats.loss;
        log.disc_accuracy = dstats.accuracy;
        log.policy_loss = pstats.policy_loss;
        log.value_loss = pstats.value_loss;
        log.entropy = pstats.entropy;
        log.mean_reward = interactions > 0 ? reward_sum / interactions : 0.0;
        log.mean_agent_d = dstats.mean_agent_d;
        log.mean_expert_d = dstats.mean_expert_d;
        {  // cheap probe: policy mean vs expert action on sampled train steps
            double mse = 0.0;
            const int probes = 256;
            for (int k = 0; k < probes; ++k) {
                const DemoStep& s2 = *expert_pool[rng.uniform_int(expert_pool.size())];
                const Vec2 mean = policy.mean_action(s2.obs_input, fs);
                mse += (mean - s2.action).squared_norm();
            }
            log.probe_action_mse = mse / (2.0 * probes);
        }

        // -- validation for model selection
        const bool validate =
            cfg.val_interval > 0 && (epoch % cfg.val_interval == 0 || epoch == cfg.epochs - 1);
        if (validate) {
            try {
                const int ticks = std::max(
                    16, std::min(cfg.val_ticks,
                                 static_cast<int>((splits.val_t1 - splits.val_t0) *
                                                  scfg.frame_rate) - 2));
                const auto rep = behavior::evaluate_policy(
                    make_policy_factory(policy, fs, seed ^ 0xabcdef1234567ULL,
                                        cfg.stochastic_validation),
                    scene, dataset, splits.val_t0, ticks, scfg, cfg.eval);
                log.val_jsd_joint = rep.jsd_joint;
                log.val_jsd_speed = rep.jsd_speed;
                log.val_jsd_occupancy = rep.jsd_occupancy;
                log.val_collision = rep.collision_probability;
                log.val_exit_failure = rep.exit_failure_probability;
                if (rep.jsd_joint < result.best_val_jsd) {
                    result.best_val_jsd = rep.jsd_joint;
                    result.best_epoch = epoch;
                    result.best_policy = policy;
                    log.is_best = true;
                }
            } catch (const behavior::WindowOutOfRange&) {
                // no validation data; model selection falls back to the final policy
            }
        }
        result.log.push_back(log);
        if (on_epoch) on_epoch(log);
    }

    result.final_policy = policy;
    if (result.best_epoch < 0) {
        result.best_policy = policy;
        result.best_val_jsd = std::numeric_limits<double>::quiet_NaN();
    }
    return result;
}

}  // namespace

TrainResult train_horizon_gail(const DemonstrationSet& demos, const sim::SceneLayout& scene,
                               const std::vector<tracker::TrackedTrajectory>& dataset,
                               const synth::SplitWindows& splits, const sim::SimConfig& scfg,
                               const FeatureScale& fs, const HorizonSchedule& schedule,
                               const TrainConfig& cfg, std::uint64_t seed,
                               const std::function<void(const EpochLog&)>& on_epoch) {
    return train_core(demos, scene, dataset, splits, scfg, fs, schedule, cfg, false, seed,
                      on_epoch);
}

TrainResult train_gail(const DemonstrationSet& demos, const sim::SceneLayout& scene,
                       const std::vector<tracker::TrackedTrajectory>& dataset,
                       const synth::SplitWindows& splits, const sim::SimConfig& scfg,
                       const FeatureScale& fs, const TrainConfig& cfg, std::uint64_t seed,
                       const std::function<void(const EpochLog&)>& on_epoch) {
    return train_core(demos, scene, dataset, splits, scfg, fs, {}, cfg, true, seed, on_epoch);
}

}  // namespace vibe::imitation
