#pragma once

#include <map>
#include <string>
#include <vector>

#include "vibe/behavior_metrics.hpp"
#include "vibe/imitation.hpp"
#include "vibe/sim.hpp"
#include "vibe/synth.hpp"
#include "vibe/tracker.hpp"

namespace vibe::cli {

struct UnknownKey : Error {
    using Error::Error;
};
struct TypeMismatch : Error {
    using Error::Error;
};
struct MissingRequired : Error {
    using Error::Error;
};
struct StageFailure : Error {
    StageFailure(const std::string& stage, const std::string& cause)
        : Error("stage '" + stage + "' failed: " + cause), stage_name(stage) {}
    std::string stage_name;
};

enum class ValueType { real, integer, boolean, text };

struct ConfigEntry {
    const char* key;
    ValueType type;
    const char* default_value;
    const char* help;
};

// Flat dotted-key configuration with a fixed schema: defaults <- file <- CLI
// overrides, unknown keys rejected, values type checked.
class RunConfig {
public:
    static const std::vector<ConfigEntry>& schema();
    static std::string help_text();  // every key and default

    RunConfig();  // all defaults

    // `key = value` lines, '#' comments
    void load_file(const std::string& path);
    void set(const std::string& key, const std::string& value);
    void apply_override(const std::string& key_equals_value);  // "a.b=v"

    // keys that must have been explicitly provided (no default applies)
    void check_required(const std::vector<std::string>& keys) const;

    double real(const std::string& key) const;
    long integer(const std::string& key) const;
    bool boolean(const std::string& key) const;
    const std::string& text(const std::string& key) const;

    const std::map<std::string, std::string>& resolved() const { return values_; }

    // typed views
    tracker::AssociationConfig tracker_config() const;
    sim::SimConfig sim_config() const;
    synth::SynthConfig synth_config() const;
    imitation::TrainConfig train_config() const;
    imitation::BcConfig bc_config() const;
    imitation::HorizonSchedule horizon_schedule() const;
    behavior::EvalConfig eval_config() const;
    geometry::Calibration calibration_defaults() const;  // from calib.* keys
    imitation::FeatureScale feature_scale() const;
    std::vector<int> dense_layers() const;

private:
    const ConfigEntry& entry(const std::string& key) const;
    void validate(const ConfigEntry& e, const std::string& value) const;

    std::map<std::string, std::string> values_;
    std::map<std::string, bool> explicit_;
};

}  // namespace vibe::cli

namespace vibe::cli {

// CLI entry point (also used by tests to run subcommands in-process).
int run_cli(const std::vector<std::string>& args);

// Full help text (usage + every config key and default); golden-tested.
std::string cli_help_text();

}  // namespace vibe::cli
