#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <tuple>

#include "crowding/analysis.hpp"

namespace crowding {

namespace {

bool is_sh(Letter l) { return l == Letter::S || l == Letter::H; }

bool flanked(const TrialRecord& r) { return r.spec.mode != FlankMode::Unflanked && r.spec.flanker.has_value(); }

// Angles a trial occupies: pair-mode trials stand for both flanker positions.
std::vector<int> occupied_angles(const TrialRecord& r) {
    const int a = normalize_angle(r.spec.angle_deg);
    if (r.spec.mode == FlankMode::Pair) return {a, normalize_angle(a + 180)};
    return {a};
}

AsymmetryEstimate compare(const Tally& first, const Tally& second) {
    AsymmetryEstimate e{first, second, 0.0, 0.0, 0.0};
    const double p1 = first.rate(), p2 = second.rate();
    e.difference = p2 - p1;
    const double se = std::sqrt(p1 * (1 - p1) / static_cast<double>(first.total) +
                                p2 * (1 - p2) / static_cast<double>(second.total));
    e.ci_low = e.difference - 1.959963984540054 * se;
    e.ci_high = e.difference + 1.959963984540054 * se;
    return e;
}

}  // namespace

std::string_view variant_name(FlankerVariant v) {
    switch (v) {
        case FlankerVariant::All: return "all";
        case FlankerVariant::ExcludeSH: return "exclude-SH";
        case FlankerVariant::OnlySH: return "only-SH";
    }
    return "?";
}

bool variant_keeps(FlankerVariant v, const TrialRecord& r) {
    if (!flanked(r)) return false;
    switch (v) {
        case FlankerVariant::All: return true;
        case FlankerVariant::ExcludeSH: return !is_sh(*r.spec.flanker);
        case FlankerVariant::OnlySH: return is_sh(*r.spec.flanker);
    }
    return false;
}

SpacingCurve accuracy_by_spacing(std::span<const TrialRecord> records, FlankerVariant variant,
                                 std::span<const int> expected_distances) {
    SpacingCurve curve;
    curve.variant = variant;
    std::map<int, Tally> by_distance;
    for (const TrialRecord& r : records) {
        if (r.spec.mode == FlankMode::Unflanked)
            curve.unflanked.add(r.correct);
        else if (variant_keeps(variant, r))
            by_distance[r.spec.spacing_px].add(r.correct);
    }
    if (by_distance.empty()) throw DataError("no flanked trials for the " + std::string(variant_name(variant)) + " curve");
    if (curve.unflanked.total == 0) throw DataError("no unflanked trials to serve as the reference");
    for (int d : expected_distances)
        if (!by_distance.count(d)) throw DataError("no trials at flanker distance " + std::to_string(d) + " px");
    for (const auto& [d, t] : by_distance) curve.points.push_back({d, t});
    return curve;
}

const ConditionCell* ConditionTable::find(Polarity target, Polarity flanker, int size_pt) const {
    for (const auto& c : cells)
        if (c.target == target && c.flanker == flanker && c.size_pt == size_pt) return &c;
    return nullptr;
}

ConditionTable condition_table(std::span<const TrialRecord> records, bool exclude_sh) {
    const FlankerVariant v = exclude_sh ? FlankerVariant::ExcludeSH : FlankerVariant::All;
    std::map<std::tuple<int, int, int>, Tally> cells;
    for (const TrialRecord& r : records) {
        if (!variant_keeps(v, r)) continue;
        cells[{static_cast<int>(r.spec.target_polarity), static_cast<int>(r.spec.flanker_polarity), r.spec.size_pt}].add(
            r.correct);
    }
    if (cells.empty()) throw DataError("no flanked trials for the condition table");
    ConditionTable table;
    table.exclude_sh = exclude_sh;
    for (const auto& [key, t] : cells)
        table.cells.push_back({static_cast<Polarity>(std::get<0>(key)), static_cast<Polarity>(std::get<1>(key)),
                               std::get<2>(key), t});
    return table;
}

PolarMap polar_map(std::span<const TrialRecord> records, FlankerVariant variant) {
    std::map<std::pair<int, int>, Tally> cells;
    std::set<int> angles, distances;
    for (const TrialRecord& r : records) {
        if (!variant_keeps(variant, r)) continue;
        distances.insert(r.spec.spacing_px);
        for (int a : occupied_angles(r)) {
            angles.insert(a);
            cells[{a, r.spec.spacing_px}].add(r.correct);
        }
    }
    if (cells.empty()) throw DataError("no flanked trials for the " + std::string(variant_name(variant)) + " polar map");
    PolarMap map;
    map.variant = variant;
    map.angles.assign(angles.begin(), angles.end());
    map.distances.assign(distances.begin(), distances.end());
    for (int a : map.angles)
        for (int d : map.distances) {
            const auto it = cells.find({a, d});
            map.cells.push_back(it == cells.end() ? Tally{} : it->second);
        }
    return map;
}

std::string_view bouma_status_name(BoumaStatus s) {
    switch (s) {
        case BoumaStatus::Extrapolated: return "extrapolated";
        case BoumaStatus::AlreadyUncrowded: return "already-uncrowded";
        case BoumaStatus::NonConverging: return "non-converging";
    }
    return "?";
}

BoumaEstimate bouma_extrapolate(const SpacingCurve& curve) {
    if (curve.points.size() < 2) throw DataError("Bouma extrapolation needs at least two distances");
    if (curve.unflanked.total == 0) throw DataError("Bouma extrapolation needs an unflanked reference");
    const double n = static_cast<double>(curve.points.size());
    double mx = 0.0, my = 0.0;
    for (const auto& p : curve.points) {
        mx += p.distance;
        my += p.accuracy();
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (const auto& p : curve.points) {
        sxy += (p.distance - mx) * (p.accuracy() - my);
        sxx += (p.distance - mx) * (p.distance - mx);
    }
    BoumaEstimate e;
    e.slope = sxy / sxx;
    e.intercept = my - e.slope * mx;
    const double target = curve.unflanked_accuracy();

    double best = -1.0;
    for (const auto& p : curve.points) best = std::max(best, p.accuracy());
    if (target <= best) {
        e.status = BoumaStatus::AlreadyUncrowded;
        for (const auto& p : curve.points)
            if (p.accuracy() >= target) {
                e.spacing_px = p.distance;
                break;
            }
        return e;
    }
    if (e.slope <= 0.0) {
        e.status = BoumaStatus::NonConverging;
        e.spacing_px = std::numeric_limits<double>::infinity();
        return e;
    }
    e.status = BoumaStatus::Extrapolated;
    e.spacing_px = (target - e.intercept) / e.slope;
    return e;
}

double bouma_theoretical(double eccentricity_px) {
    if (!(eccentricity_px > 0.0)) throw ConfigError("eccentricity must be positive");
    return eccentricity_px / 2.0;
}

std::vector<RadialTangential> radial_tangential(std::span<const TrialRecord> records, int distance) {
    std::map<int, std::map<int, Tally>> by_size;  // size -> angle -> tally
    for (const TrialRecord& r : records) {
        if (!flanked(r) || r.spec.spacing_px != distance) continue;
        for (int a : occupied_angles(r))
            if (a % 90 == 0) by_size[r.spec.size_pt][a].add(r.correct);
    }
    if (by_size.empty()) throw DataError("no trials at distance " + std::to_string(distance) + " px on the cardinal axes");
    std::vector<RadialTangential> out;
    for (const auto& [size, angles] : by_size) {
        for (int a : {0, 90, 180, 270})
            if (!angles.count(a))
                throw DataError("no trials at angle " + std::to_string(a) + " for size " + std::to_string(size));
        Tally radial, tangential;
        for (int a : {0, 180}) {
            radial.correct += angles.at(a).correct;
            radial.total += angles.at(a).total;
        }
        for (int a : {90, 270}) {
            tangential.correct += angles.at(a).correct;
            tangential.total += angles.at(a).total;
        }
        out.push_back({size, compare(radial, tangential)});
    }
    return out;
}

AsymmetryEstimate in_out_asymmetry(std::span<const TrialRecord> records) {
    Tally inner, outer;
    for (const TrialRecord& r : records) {
        if (!flanked(r) || r.spec.mode != FlankMode::Single) continue;
        const int a = normalize_angle(r.spec.angle_deg);
        if (a != 0 && a != 180) continue;
        const int inner_angle = r.spec.side == Side::Left ? 0 : 180;
        (a == inner_angle ? inner : outer).add(r.correct);
    }
    if (inner.total == 0 || outer.total == 0)
        throw DataError("in-out asymmetry needs single-flanker trials at both 0 and 180 degrees");
    return compare(inner, outer);
}

AsymmetryEstimate hemifield_split(std::span<const TrialRecord> records) {
    Tally upper, lower;
    for (const TrialRecord& r : records) {
        if (!flanked(r)) continue;
        for (int a : occupied_angles(r)) {
            if (a > 0 && a < 180)
                upper.add(r.correct);
            else if (a > 180)
                lower.add(r.correct);
        }
    }
    if (upper.total == 0 || lower.total == 0) throw DataError("hemifield split needs trials above and below the target");
    return compare(upper, lower);
}

FlankerConfusion flanker_confusion(std::span<const TrialRecord> records) {
    FlankerConfusion c;
    // Trials by size of the "other letter" set: 6 when the flanker is itself
    // a target letter, 7 when it is S or H. Summing counts per set size keeps
    // the arithmetic exact and order-independent.
    std::size_t other_hits[8] = {};
    for (const TrialRecord& r : records) {
        if (!flanked(r) || r.correct) continue;
        const Letter flanker = *r.spec.flanker;
        if (flanker == r.spec.target) continue;
        ++c.errors;
        const auto flanker_class = class_index(flanker);
        if (flanker_class && r.predicted == *flanker_class) {
            ++c.flanker_reports;
            continue;
        }
        if (r.predicted >= kNumLetterClasses) continue;  // background response
        const std::size_t others = flanker_class ? kNumLetterClasses - 2 : kNumLetterClasses - 1;
        ++other_hits[others];
    }
    if (c.errors == 0) throw DataError("no error trials with a flanker different from the target");
    const double errors = static_cast<double>(c.errors);
    c.flanker_rate = static_cast<double>(c.flanker_reports) / errors;
    c.other_rate = (static_cast<double>(other_hits[6]) / 6.0 + static_cast<double>(other_hits[7]) / 7.0) / errors;
    c.excess_pp = 100.0 * (c.flanker_rate - c.other_rate);
    return c;
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
    std::vector<std::size_t> order(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

double spearman_correlation(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw DataError("correlation inputs differ in length");
    if (x.size() < 2) throw DataError("correlation needs at least two points");
    const auto rx = average_ranks(x), ry = average_ranks(y);
    const double n = static_cast<double>(x.size());
    const double mean = (n + 1.0) / 2.0;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mean) * (ry[i] - mean);
        sxx += (rx[i] - mean) * (rx[i] - mean);
        syy += (ry[i] - mean) * (ry[i] - mean);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace crowding
