#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "crowding/sweep.hpp"

namespace crowding {

/// Which flanker letters a flanked aggregate keeps. Unflanked trials are never
/// filtered.
enum class FlankerVariant : std::uint8_t { All, ExcludeSH, OnlySH };

std::string_view variant_name(FlankerVariant v);
/// True when a flanked record passes the variant filter.
bool variant_keeps(FlankerVariant v, const TrialRecord& r);

struct Tally {
    std::size_t correct = 0;
    std::size_t total = 0;

    void add(bool ok) {
        correct += ok ? 1 : 0;
        ++total;
    }
    /// correct / total; callers make sure total > 0.
    double rate() const { return static_cast<double>(correct) / static_cast<double>(total); }

    friend bool operator==(const Tally&, const Tally&) = default;
};

struct SpacingPoint {
    int distance = 0;
    Tally tally;
    double accuracy() const { return tally.rate(); }
};

struct SpacingCurve {
    FlankerVariant variant = FlankerVariant::All;
    std::vector<SpacingPoint> points;  ///< ascending distance
    Tally unflanked;
    double unflanked_accuracy() const { return unflanked.rate(); }
};

/// Mean correctness per flanker distance plus the unflanked reference.
/// Throws DataError when there are no flanked or no unflanked trials, or when
/// a distance in `expected_distances` has no trials.
SpacingCurve accuracy_by_spacing(std::span<const TrialRecord> records, FlankerVariant variant = FlankerVariant::All,
                                 std::span<const int> expected_distances = {});

struct ConditionCell {
    Polarity target = Polarity::White;
    Polarity flanker = Polarity::White;
    int size_pt = 0;
    Tally tally;
};

/// Accuracy per target polarity x flanker polarity x size over flanked trials.
/// Cells without trials are absent.
struct ConditionTable {
    bool exclude_sh = false;
    std::vector<ConditionCell> cells;  ///< ordered by target, flanker polarity (white first), then size
    const ConditionCell* find(Polarity target, Polarity flanker, int size_pt) const;
};

/// Throws DataError if no flanked trial survives the filter.
ConditionTable condition_table(std::span<const TrialRecord> records, bool exclude_sh);

/// Accuracy per (angle, distance) cell over flanked trials, collapsed over
/// size and polarity. A pair-mode trial at angle a counts in both a and a+180.
struct PolarMap {
    FlankerVariant variant = FlankerVariant::All;
    std::vector<int> angles;     ///< ascending, in [0, 360)
    std::vector<int> distances;  ///< ascending
    std::vector<Tally> cells;    ///< angle-major

    const Tally& at(std::size_t angle_index, std::size_t distance_index) const {
        return cells[angle_index * distances.size() + distance_index];
    }
};

/// Throws DataError if the variant filter leaves no flanked trials.
PolarMap polar_map(std::span<const TrialRecord> records, FlankerVariant variant);

enum class BoumaStatus : std::uint8_t { Extrapolated, AlreadyUncrowded, NonConverging };

std::string_view bouma_status_name(BoumaStatus s);

struct BoumaEstimate {
    BoumaStatus status = BoumaStatus::Extrapolated;
    double spacing_px = 0.0;  ///< +inf when non-converging
    double slope = 0.0;
    double intercept = 0.0;
};

/// Fits an ordinary least-squares line to the curve and solves for the
/// distance at which it reaches the unflanked accuracy. Throws DataError with
/// fewer than two distinct distances.
BoumaEstimate bouma_extrapolate(const SpacingCurve& curve);

/// Half the eccentricity; throws ConfigError for eccentricity <= 0.
double bouma_theoretical(double eccentricity_px);

struct AsymmetryEstimate {
    Tally first;
    Tally second;
    double difference = 0.0;  ///< second rate minus first rate
    double ci_low = 0.0;      ///< normal-approximation 95% interval of the difference
    double ci_high = 0.0;
};

struct RadialTangential {
    int size_pt = 0;
    AsymmetryEstimate estimate;  ///< first = radial {0, 180}, second = tangential {90, 270}
};

/// Per size, radial versus tangential accuracy at one distance. Throws
/// DataError if any of the four angle buckets is empty for a size.
std::vector<RadialTangential> radial_tangential(std::span<const TrialRecord> records, int distance = 25);

/// Inner (towards the image centre) versus outer flanker over single-mode
/// trials on the horizontal meridian, collapsed over distances.
/// first = inner, second = outer. Throws DataError on an empty bucket.
AsymmetryEstimate in_out_asymmetry(std::span<const TrialRecord> records);

/// Upper (flanker above the target) versus lower visual field, excluding the
/// horizontal axis. first = upper, second = lower. Throws DataError when no
/// off-axis trials exist.
AsymmetryEstimate hemifield_split(std::span<const TrialRecord> records);

struct FlankerConfusion {
    std::size_t errors = 0;
    std::size_t flanker_reports = 0;
    double flanker_rate = 0.0;     ///< P(predicted = flanker | error)
    double other_rate = 0.0;       ///< mean per-letter rate over letters that are neither target nor flanker
    double excess_pp = 0.0;        ///< (flanker_rate - other_rate) in percentage points
};

/// Over error trials with a flanker different from the target. Background
/// predictions stay in the denominator but are no letter. Throws DataError
/// when there are no such error trials.
FlankerConfusion flanker_confusion(std::span<const TrialRecord> records);

struct PsychometricFit {
    double mu = 0.0;
    double sigma = 0.0;
    double floor = 0.0;    ///< gamma
    double ceiling = 0.0;  ///< lambda
    double residual = 0.0; ///< sum of squared residuals
    bool floor_fixed = false;
    int iterations = 0;

    double operator()(double distance) const;
};

/// Value of gamma + (lambda - gamma) * Phi((d - mu) / sigma).
double psychometric(double distance, double mu, double sigma, double floor, double ceiling);

inline constexpr double kChanceLevel = 0.125;

/// Box-constrained Levenberg-Marquardt least squares from a grid of starting
/// points. Throws DataError for too few points or constant data, and when no
/// start converges.
PsychometricFit fit_psychometric(std::span<const double> distances, std::span<const double> accuracies,
                                 bool fix_floor_to_chance);
PsychometricFit fit_psychometric(const SpacingCurve& curve, bool fix_floor_to_chance);

/// Spearman rank correlation with average ranks for ties. Throws DataError
/// for fewer than two points, and returns 0 when either side is constant.
double spearman_correlation(std::span<const double> x, std::span<const double> y);

struct ReportOptions {
    double eccentricity_px = 56.0;
    std::optional<int> radial_distance;  ///< smallest distance in the data when unset
    bool fits = true;
};

/// Everything the report renders. Components that the record set cannot
/// support (for example in-out asymmetry on pair-mode data) are left empty
/// and the reason is kept in `notes`.
struct CrowdingReport {
    std::string run_id;
    SpacingCurve curve;
    std::optional<SpacingCurve> curve_exclude_sh;
    ConditionTable conditions;
    std::optional<ConditionTable> conditions_exclude_sh;
    PolarMap polar_all;
    std::optional<PolarMap> polar_exclude_sh;
    std::optional<PolarMap> polar_only_sh;
    std::vector<RadialTangential> radial_tangential;
    std::optional<AsymmetryEstimate> in_out;
    std::optional<AsymmetryEstimate> hemifield;
    std::optional<FlankerConfusion> confusion;
    BoumaEstimate bouma;
    double bouma_theoretical_px = 0.0;
    std::optional<PsychometricFit> fit_free;
    std::optional<PsychometricFit> fit_chance_floor;
    std::vector<std::string> notes;
};

CrowdingReport build_report(std::span<const TrialRecord> records, const ReportOptions& options = {});

/// Colour for an accuracy in [0, 1] on the shared heat-map scale, "#rrggbb".
std::string accuracy_color(double accuracy);

/// Writes SVG figures and CSV tables into `out_dir` (created if missing).
/// Returns the written file paths in a fixed order.
std::vector<std::filesystem::path> render_report(const CrowdingReport& report, const std::filesystem::path& out_dir);

}  // namespace crowding
