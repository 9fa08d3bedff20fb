#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "crowding/analysis.hpp"
#include "crowding/nn/train.hpp"
#include "crowding/sweep.hpp"

namespace crowding::cli {

/// Everything a run depends on. Defaults are the desk-scale setup: a 64x64
/// canvas with the full-size geometry scaled by 64/224.
struct ExperimentConfig {
    Canvas canvas{64, 64};
    ColorScheme colors{};
    std::string font_path;  ///< empty selects the builtin face

    bool acuity_train = false;
    bool acuity_test = false;
    int acuity_steps = 20;
    double acuity_min = 0.2;

    std::string background_source = "synthetic";  ///< "synthetic" or "dirs"
    std::string background_dir_a;
    std::string background_dir_b;
    int background_count = 16;  ///< per background class
    bool background_flip = false;
    bool synthetic_fallback = true;
    int letter_jitter = 3;  ///< max absolute brightness offset of oversampled letter copies

    GridConfig grid = desk_grid();
    nn::TrainConfig train = desk_train();
    nn::SimpleNetPlan net{};
    float negative_slope = 0.01f;

    std::uint64_t seed = 1;
    unsigned workers = 1;
    std::string out = "runs";

    bool analysis_fits = true;
    int radial_distance = 0;  ///< 0 picks the smallest distance in the records

    static GridConfig desk_grid();
    /// Library training defaults with a smaller step and batch; 0.01 diverges when
    /// training SimpleNet from scratch on the desk data.
    static nn::TrainConfig desk_train();

    AcuityProfile acuity_profile() const { return AcuityProfile::make(acuity_steps, acuity_min); }
    SceneSettings scene() const;
    /// Throws ConfigError on any out-of-domain value, including stimuli that
    /// cannot be placed on the canvas.
    void validate() const;
};

/// Applies one `key = value` setting. Throws ConfigError for unknown keys or
/// unparsable values.
void apply_setting(ExperimentConfig& config, std::string_view key, std::string_view value);
/// Parses "key=value" as given to --set.
void apply_override(ExperimentConfig& config, std::string_view assignment);

/// Line format: `key = value`, `#` starts a comment, blank lines ignored.
/// Unset keys keep their defaults; repeated keys are an error.
ExperimentConfig parse_config(std::istream& in, const std::string& source = "config");
ExperimentConfig load_config(const std::filesystem::path& path);

/// Every key in a fixed order; parsing the dump yields an equal config.
std::string dump_config(const ExperimentConfig& config);
std::vector<std::string> config_keys();

/// Training data: 8 letter classes (every unflanked polarity and size,
/// oversampled with seeded brightness jitter to match the background count)
/// plus the two background classes.
nn::Dataset build_training_set(const ExperimentConfig& config, std::vector<std::string>* notes = nullptr);

struct RunManifest {
    std::string run_id;
    std::string command;
    std::uint64_t seed = 0;
    std::string config;  ///< dump_config snapshot
    std::map<std::string, std::string> inputs;
    std::map<std::string, std::string> artifacts;
    std::map<std::string, bool> stages;
    std::map<std::string, double> metrics;
    std::vector<std::string> notes;
    std::string started;
    std::string finished;
};

void write_manifest(const RunManifest& manifest, const std::filesystem::path& path);
RunManifest read_manifest(const std::filesystem::path& path);

/// "r" followed by the CRC32 of the config dump (minus workers and out), the
/// command and any input digests, in hex.
std::string make_run_id(const ExperimentConfig& config, std::string_view command,
                        const std::vector<std::string>& input_digests = {});
/// CRC32 of a file's bytes in hex. Throws DataError if unreadable.
std::string file_digest(const std::filesystem::path& path);

struct CommandResult {
    std::string run_id;
    std::filesystem::path run_dir;
    RunManifest manifest;
};

/// Log sink for progress lines; null discards them.
using Logger = std::ostream*;

CommandResult cmd_stimuli(const ExperimentConfig& config, int sample_count, Logger log = nullptr);
CommandResult cmd_train(const ExperimentConfig& config, Logger log = nullptr);
CommandResult cmd_sweep(const ExperimentConfig& config, const std::filesystem::path& checkpoint, Logger log = nullptr);
CommandResult cmd_analyze(const ExperimentConfig& config, const std::vector<std::filesystem::path>& records,
                          Logger log = nullptr);

const std::vector<std::string>& reproduce_profiles();
/// Applies a named profile on top of `base`. Throws ConfigError listing the
/// valid names for an unknown profile.
ExperimentConfig profile_config(const ExperimentConfig& base, std::string_view profile);
CommandResult cmd_reproduce(const ExperimentConfig& config, std::string_view profile, Logger log = nullptr);

/// Exit status for an exception escaping a command: 2 configuration,
/// 3 data, 4 numeric divergence, 1 anything else.
int exit_code_for(const std::exception& e);

}  // namespace crowding::cli
