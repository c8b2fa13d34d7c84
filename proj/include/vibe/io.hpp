#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "vibe/synth.hpp"
#include "vibe/tracker.hpp"

namespace vibe::io {

// JSON-lines detection stream: one object per line with
// {frame, class, bbox:[x1,y1,x2,y2], confidence, feature:[...]}
std::vector<tracker::Detection> load_detections_jsonl(const std::string& path);
void save_detections_jsonl(const std::vector<tracker::Detection>& dets, const std::string& path);

// JSON-lines trajectories: {id, class, samples:[{t,x,y},...]}
std::vector<tracker::TrackedTrajectory> load_trajectories_jsonl(const std::string& path);
void save_trajectories_jsonl(const std::vector<tracker::TrackedTrajectory>& trajs,
                             const std::string& path);

synth::SplitWindows load_splits(const std::string& path);
void save_splits(const synth::SplitWindows& splits, const std::string& path);

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_file(const std::string& path);

// Reproducibility manifest: command, fully-resolved config, input hashes,
// output names, seed, version.  Deterministic bytes for identical runs.
struct Manifest {
    std::string command;
    std::map<std::string, std::string> config;
    std::map<std::string, std::string> input_hashes;  // path -> sha256
    std::vector<std::string> outputs;
    std::uint64_t seed = 0;
};

void write_manifest(const Manifest& manifest, const std::string& path);

}  // namespace vibe::io
