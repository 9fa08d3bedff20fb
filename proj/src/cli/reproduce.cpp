#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "crowding/cli.hpp"

namespace crowding::cli {

namespace {

std::string pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * v);
    return buf;
}

std::string num(double v, int digits = 2) {
    if (std::isinf(v)) return "infinite";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

const char* verdict(bool agrees) { return agrees ? "same direction" : "differs"; }

std::string comparison_note(const std::string& profile, const ExperimentConfig& config, const CrowdingReport& rep) {
    std::ostringstream o;
    o << "# Comparison: " << profile << "\n\n";
    o << "Desk-scale run (" << config.canvas.width << "x" << config.canvas.height << " canvas, eccentricity "
      << config.grid.eccentricity_px << " px, " << mode_name(config.grid.mode) << " flankers, " << side_name(config.grid.side)
      << " side";
    if (config.acuity_train || config.acuity_test)
        o << ", acuity loss in " << (config.acuity_train ? "training" : "") << (config.acuity_train && config.acuity_test ? " and " : "")
          << (config.acuity_test ? "testing" : "");
    if (config.background_flip) o << ", flipped backgrounds";
    o << ").\n\n";
    o << "Absolute accuracies are not expected to match the reference study, which trained far longer on natural "
         "scene backgrounds at 224x224. The comparison is about direction.\n\n";
    o << "| Measure | This run | Reference finding | Direction |\n|---|---|---|---|\n";

    double ok = 0, n = 0;
    for (const auto& p : rep.curve.points) {
        ok += static_cast<double>(p.tally.correct);
        n += static_cast<double>(p.tally.total);
    }
    const double flanked = ok / n, unflanked = rep.curve.unflanked_accuracy();
    o << "| Flanked vs unflanked accuracy | " << pct(flanked) << " vs " << pct(unflanked)
      << " | flankers lower accuracy | " << verdict(flanked < unflanked) << " |\n";

    if (rep.curve_exclude_sh && rep.curve_exclude_sh->points.size() >= 2) {
        std::vector<double> d, a;
        for (const auto& p : rep.curve_exclude_sh->points) {
            d.push_back(p.distance);
            a.push_back(p.accuracy());
        }
        const double rho = spearman_correlation(d, a);
        o << "| Spacing vs accuracy, S/H excluded (Spearman) | " << num(rho, 3)
          << " | accuracy recovers as spacing grows | " << verdict(rho >= 0) << " |\n";
    }

    const double scale = config.canvas.width / 224.0;
    o << "| Extrapolated crowding-free spacing | " << num(rep.bouma.spacing_px, 1) << " px ("
      << bouma_status_name(rep.bouma.status) << ") | about 218 px at 224x224, i.e. " << num(218 * scale, 1)
      << " px at this scale | - |\n";
    o << "| Half-eccentricity spacing | " << num(rep.bouma_theoretical_px, 1)
      << " px | reported as about 29 px at 56 px eccentricity; half of 56 is 28 | - |\n";

    for (const auto& rt : rep.radial_tangential)
        o << "| Tangential minus radial accuracy, size " << rt.size_pt << " | " << num(rt.estimate.difference, 4) << " ["
          << num(rt.estimate.ci_low, 4) << ", " << num(rt.estimate.ci_high, 4)
          << "] | radial flankers crowd more (positive) | " << verdict(rt.estimate.difference >= 0) << " |\n";
    if (rep.in_out)
        o << "| Outer minus inner accuracy | " << num(rep.in_out->difference, 4) << " [" << num(rep.in_out->ci_low, 4)
          << ", " << num(rep.in_out->ci_high, 4) << "] | the inner flanker disrupts more (positive) | "
          << verdict(rep.in_out->difference >= 0) << " |\n";
    if (rep.hemifield) {
        o << "| Upper vs lower field accuracy | " << pct(rep.hemifield->first.rate()) << " vs "
          << pct(rep.hemifield->second.rate()) << " | ";
        if (config.background_flip)
            o << "with flipped backgrounds the halves were nearly equal (59.66% upper, 59.42% lower) | - |\n";
        else
            o << "lower half worse (95.31% upper, 89.47% lower) | "
              << verdict(rep.hemifield->second.rate() <= rep.hemifield->first.rate()) << " |\n";
    }
    if (rep.confusion)
        o << "| Flanker-report excess over other letters | " << num(rep.confusion->excess_pp, 4)
          << " pp | flanker reported only marginally more often (about 0.0125 pp) | - |\n";

    if (profile == "right-single")
        o << "\nTargets sit right of centre, so the inner flanker is the one at 180 degrees.\n";
    if (profile == "acuity-train-full-test")
        o << "\nTrained with acuity loss and tested at full acuity.\n";
    if (profile == "full-acuity-train-test")
        o << "\nAcuity loss applied both in training and in testing.\n";
    if (profile == "left-pair")
        o << "\nPair trials stand for both diametric flanker positions; polar maps mirror them.\n";
    if (!rep.notes.empty()) {
        o << "\nNotes:\n";
        for (const auto& n : rep.notes) o << "- " << n << "\n";
    }
    return o.str();
}

}  // namespace

const std::vector<std::string>& reproduce_profiles() {
    static const std::vector<std::string> names{"left-single",    "left-pair",
                                                "right-single",   "flipped-single",
                                                "full-acuity-train-test", "acuity-train-full-test"};
    return names;
}

ExperimentConfig profile_config(const ExperimentConfig& base, std::string_view profile) {
    ExperimentConfig c = base;
    c.grid.mode = FlankMode::Single;
    c.grid.side = Side::Left;
    c.background_flip = false;
    c.acuity_train = false;
    c.acuity_test = false;
    if (profile == "left-single") {
    } else if (profile == "left-pair") {
        c.grid.mode = FlankMode::Pair;
    } else if (profile == "right-single") {
        c.grid.side = Side::Right;
    } else if (profile == "flipped-single") {
        c.background_flip = true;
    } else if (profile == "full-acuity-train-test") {
        c.acuity_train = true;
        c.acuity_test = true;
    } else if (profile == "acuity-train-full-test") {
        c.acuity_train = true;
    } else {
        std::string names;
        for (const auto& n : reproduce_profiles()) names += (names.empty() ? "" : ", ") + n;
        throw ConfigError("unknown profile '" + std::string(profile) + "'; valid profiles: " + names);
    }
    return c;
}

CommandResult cmd_reproduce(const ExperimentConfig& config, std::string_view profile, Logger log) {
    const ExperimentConfig c = profile_config(config, profile);
    c.validate();
    const std::string command = "reproduce " + std::string(profile);
    const std::string id = make_run_id(c, command);
    const auto run_dir = std::filesystem::path(c.out) / id;
    if (std::filesystem::exists(run_dir))
        throw DataError("run directory " + run_dir.string() + " already exists; runs are never overwritten");
    std::filesystem::create_directories(run_dir);

    ExperimentConfig sub = c;
    sub.out = run_dir.string();
    if (log) *log << "[" << profile << "] train" << std::endl;
    const auto trained = cmd_train(sub, log);
    if (log) *log << "[" << profile << "] sweep" << std::endl;
    const auto swept = cmd_sweep(sub, trained.run_dir / "checkpoint.crwd", log);
    if (log) *log << "[" << profile << "] analyze" << std::endl;
    const auto records_path = swept.run_dir / "records.csv";
    const auto analyzed = cmd_analyze(sub, {records_path}, log);

    ReportOptions opt;
    opt.eccentricity_px = c.grid.eccentricity_px;
    if (c.radial_distance > 0) opt.radial_distance = c.radial_distance;
    opt.fits = c.analysis_fits;
    const CrowdingReport report = build_report(read_records(records_path), opt);
    const auto note = run_dir / "comparison.md";
    {
        std::ofstream out(note);
        if (!out) throw DataError("cannot write " + note.string());
        out << comparison_note(std::string(profile), c, report);
    }

    CommandResult r;
    r.run_id = id;
    r.run_dir = run_dir;
    r.manifest.run_id = id;
    r.manifest.command = command;
    r.manifest.seed = c.seed;
    r.manifest.config = dump_config(c);
    r.manifest.started = trained.manifest.started;
    r.manifest.artifacts["train_run"] = trained.run_id;
    r.manifest.artifacts["sweep_run"] = swept.run_id;
    r.manifest.artifacts["analyze_run"] = analyzed.run_id;
    r.manifest.artifacts["comparison"] = "comparison.md";
    r.manifest.stages = {{"train", true}, {"sweep", true}, {"analyze", true}};
    r.manifest.metrics = analyzed.manifest.metrics;
    for (const auto& [k, v] : trained.manifest.metrics) r.manifest.metrics["train_" + k] = v;
    r.manifest.finished = analyzed.manifest.finished;
    write_manifest(r.manifest, run_dir / "manifest.json");
    if (log) *log << "comparison: " << note.string() << std::endl;
    return r;
}

}  // namespace crowding::cli
