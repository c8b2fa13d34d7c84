#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vibe/common.hpp"

namespace vibe::tinynet {

struct ShapeMismatch : Error {
    using Error::Error;
};
struct BadMagic : Error {
    using Error::Error;
};
struct VersionMismatch : Error {
    using Error::Error;
};
struct TruncatedFile : Error {
    using Error::Error;
};

enum class Head : std::uint32_t { scalar = 0, gaussian_policy = 1 };

// Lidar block -> shared per-beam channel-mixing layers -> flatten -> scalars
// appended -> dense stack -> head.  tanh activations; the head is linear.
// A gaussian head outputs [mean_x, mean_y, log_std_x, log_std_y], where the
// log-stds are state-independent learnable parameters.
struct NetworkSpec {
    int lidar_beams = 64;
    int lidar_channels = 5;
    std::vector<int> mix_layers{15, 3};
    int scalar_inputs = 0;
    std::vector<int> dense_layers{128, 64};
    Head head = Head::scalar;

    int input_dim() const { return lidar_beams * lidar_channels + scalar_inputs; }
    int mix_out_width() const { return mix_layers.empty() ? lidar_channels : mix_layers.back(); }
    int trunk_dim() const { return lidar_beams * mix_out_width() + scalar_inputs; }
    int head_out() const { return head == Head::gaussian_policy ? 2 : 1; }
    int output_dim() const { return head == Head::gaussian_policy ? 4 : 1; }

    bool operator==(const NetworkSpec&) const = default;
};

std::size_t param_count(const NetworkSpec& spec);

struct ForwardCache {
    std::vector<double> input;
    std::vector<std::vector<double>> mix_act;    // per mix layer, beams x width
    std::vector<double> trunk;                   // dense-stack input
    std::vector<std::vector<double>> dense_act;  // per dense layer
    std::vector<double> output;
};

// Input layout: beam-major lidar block (beam 0 channels, beam 1 channels, ...)
// followed by the scalar inputs.  Throws ShapeMismatch on wrong sizes.
std::vector<double> forward(const NetworkSpec& spec, std::span<const double> params,
                            std::span<const double> input, ForwardCache* cache = nullptr);

// Exact reverse-mode gradient; accumulates += into param_grad.
void backward(const NetworkSpec& spec, std::span<const double> params, const ForwardCache& cache,
              std::span<const double> output_grad, std::span<double> param_grad);

// Uniform +-sqrt(6 / (fan_in + fan_out)) weights, zero biases.
std::vector<double> init_params(const NetworkSpec& spec, Rng& rng, double log_std_init = -0.5);

struct AdamState {
    std::vector<double> m, v;
    long t = 0;

    explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

struct AdamHyper {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

void adam_step(std::span<double> params, std::span<const double> grad, AdamState& state,
               const AdamHyper& hyper);

// ---------------------------------------------------------------------------
// Checkpoints: versioned little-endian binary, bit-exact round trip.

struct CheckpointMeta {
    std::uint32_t epoch = 0;
    std::uint32_t horizon = 0;
    std::uint64_t seed = 0;
};

struct Checkpoint {
    NetworkSpec spec;
    std::vector<double> params;
    CheckpointMeta meta;
};

std::vector<std::uint8_t> save_checkpoint(const NetworkSpec& spec, std::span<const double> params,
                                          const CheckpointMeta& meta);
Checkpoint load_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint_file(const std::string& path, const NetworkSpec& spec,
                          std::span<const double> params, const CheckpointMeta& meta);
Checkpoint load_checkpoint_file(const std::string& path);

std::string describe(const Checkpoint& ckpt);

}  // namespace vibe::tinynet
