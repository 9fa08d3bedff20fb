#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "crowding/error.hpp"
#include "crowding/foveation.hpp"
#include "crowding/letters.hpp"
#include "crowding/nn/network.hpp"
#include "crowding/stimulus.hpp"

namespace crowding {

struct PolarityPair {
    Polarity target = Polarity::White;
    Polarity flanker = Polarity::White;

    friend bool operator==(const PolarityPair&, const PolarityPair&) = default;
};

struct GridConfig {
    FlankMode mode = FlankMode::Pair;
    Side side = Side::Left;
    int eccentricity_px = 56;
    std::vector<int> distances{25, 27, 29, 31, 33, 35, 37, 39, 41, 43, 45};
    int angle_step = 18;
    std::vector<int> sizes{20, 26};
    std::vector<PolarityPair> polarities{{Polarity::White, Polarity::White},
                                         {Polarity::White, Polarity::Black},
                                         {Polarity::Black, Polarity::White},
                                         {Polarity::Black, Polarity::Black}};
    std::vector<Letter> targets{kTargetLetters.begin(), kTargetLetters.end()};
    std::vector<Letter> flankers{kAllLetters.begin(), kAllLetters.end()};
    bool acuity = false;
    bool flip_background = false;
    bool include_unflanked = true;

    /// Pair mode covers half a turn (the partner flanker supplies the rest),
    /// single mode a full turn.
    std::vector<int> angles() const;
    std::size_t flanked_count() const;
    /// Throws ConfigError on empty factor lists or an angle step that does not
    /// divide the covered range.
    void validate() const;
};

/// Cartesian product in the nesting order target, flanker, polarity pair,
/// size, distance, angle; then one unflanked spec per target, polarity and
/// size when include_unflanked is set.
std::vector<StimulusSpec> build_grid(const GridConfig& config);

struct TrialRecord {
    std::string run_id;
    std::string model_id;
    StimulusSpec spec;
    int predicted = 0;
    bool correct = false;
    std::array<float, kNumClasses> probabilities{};

    friend bool operator==(const TrialRecord&, const TrialRecord&) = default;
};

struct SweepSettings {
    SceneSettings scene;
    AcuityProfile profile = AcuityProfile::make();
    std::string run_id;
    std::string model_id;
};

/// Raised when a worker fails. `completed` counts the records at the front of
/// the grid that finished before the failure; `partial` holds them.
class SweepError : public DataError {
public:
    SweepError(const std::string& what, std::size_t completed, std::vector<TrialRecord> partial)
        : DataError(what), completed(completed), partial(std::move(partial)) {}
    std::size_t completed;
    std::vector<TrialRecord> partial;
};

/// Called from worker threads with the number of finished specs.
using SweepProgress = std::function<void(std::size_t done, std::size_t total)>;

/// Renders, optionally foveates and classifies every spec. The network is
/// shared read-only. Output order equals grid order for any worker count.
std::vector<TrialRecord> run_sweep(const nn::Network& network, const std::vector<StimulusSpec>& grid,
                                   const SweepSettings& settings, unsigned workers = 1,
                                   const SweepProgress& progress = {});

/// Record for one classified stimulus.
TrialRecord make_record(const StimulusSpec& spec, std::span<const float> probabilities, const std::string& run_id,
                        const std::string& model_id);

/// Column header of the record file, comma-separated.
const std::string& record_header();

void write_records(const std::vector<TrialRecord>& records, const std::filesystem::path& path);
void write_records(const std::vector<TrialRecord>& records, std::ostream& out);
/// Throws FormatError on header mismatch or a malformed row (with its line number).
std::vector<TrialRecord> read_records(const std::filesystem::path& path);
std::vector<TrialRecord> read_records(std::istream& in, const std::string& source = "records");

}  // namespace crowding
