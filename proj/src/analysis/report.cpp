#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "crowding/analysis.hpp"

namespace crowding {

namespace {

std::string fmt(double v) {
    if (std::isnan(v)) return "NA";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    // Avoid "-0.0000" so equal reports print equal bytes.
    if (std::string_view(buf) == "-0.0000") return "0.0000";
    return buf;
}

std::string polarity_letter(Polarity p) { return p == Polarity::White ? "W" : "B"; }

template <typename F>
void try_component(std::vector<std::string>& notes, const std::string& what, F&& f) {
    try {
        f();
    } catch (const DataError& e) {
        notes.push_back(what + " not computed: " + e.what());
    }
}

}  // namespace

CrowdingReport build_report(std::span<const TrialRecord> records, const ReportOptions& options) {
    if (records.empty()) throw DataError("no trial records to analyse");
    CrowdingReport rep;
    std::set<std::string> ids;
    for (const auto& r : records) ids.insert(r.run_id);
    for (const auto& id : ids) rep.run_id += (rep.run_id.empty() ? "" : "+") + id;

    rep.curve = accuracy_by_spacing(records, FlankerVariant::All);
    rep.conditions = condition_table(records, false);
    rep.polar_all = polar_map(records, FlankerVariant::All);
    try_component(rep.notes, "exclude-SH spacing curve",
                  [&] { rep.curve_exclude_sh = accuracy_by_spacing(records, FlankerVariant::ExcludeSH); });
    try_component(rep.notes, "exclude-SH condition table", [&] { rep.conditions_exclude_sh = condition_table(records, true); });
    try_component(rep.notes, "exclude-SH polar map",
                  [&] { rep.polar_exclude_sh = polar_map(records, FlankerVariant::ExcludeSH); });
    try_component(rep.notes, "only-SH polar map", [&] { rep.polar_only_sh = polar_map(records, FlankerVariant::OnlySH); });

    const int radial_distance = options.radial_distance.value_or(rep.curve.points.front().distance);
    try_component(rep.notes, "radial-tangential asymmetry",
                  [&] { rep.radial_tangential = radial_tangential(records, radial_distance); });
    const bool any_single = std::any_of(records.begin(), records.end(),
                                        [](const TrialRecord& r) { return r.spec.mode == FlankMode::Single; });
    if (any_single)
        try_component(rep.notes, "in-out asymmetry", [&] { rep.in_out = in_out_asymmetry(records); });
    else
        rep.notes.push_back("in-out asymmetry not computed: no single-flanker trials");
    try_component(rep.notes, "hemifield split", [&] { rep.hemifield = hemifield_split(records); });
    try_component(rep.notes, "flanker confusion", [&] { rep.confusion = flanker_confusion(records); });

    try_component(rep.notes, "Bouma extrapolation", [&] { rep.bouma = bouma_extrapolate(rep.curve); });
    rep.bouma_theoretical_px = bouma_theoretical(options.eccentricity_px);
    if (options.fits) {
        try_component(rep.notes, "free-floor psychometric fit", [&] { rep.fit_free = fit_psychometric(rep.curve, false); });
        try_component(rep.notes, "chance-floor psychometric fit",
                      [&] { rep.fit_chance_floor = fit_psychometric(rep.curve, true); });
    }
    return rep;
}

std::string accuracy_color(double accuracy) {
    // Viridis sampled at nine evenly spaced stops.
    static constexpr std::array<std::array<int, 3>, 9> stops{{{0x44, 0x01, 0x54},
                                                              {0x47, 0x2d, 0x7b},
                                                              {0x3b, 0x52, 0x8b},
                                                              {0x2c, 0x72, 0x8e},
                                                              {0x21, 0x91, 0x8c},
                                                              {0x28, 0xae, 0x80},
                                                              {0x5e, 0xc9, 0x62},
                                                              {0xad, 0xdc, 0x30},
                                                              {0xfd, 0xe7, 0x25}}};
    const double a = std::isfinite(accuracy) ? std::clamp(accuracy, 0.0, 1.0) : 0.0;
    const double pos = a * (stops.size() - 1);
    const auto i = std::min<std::size_t>(static_cast<std::size_t>(pos), stops.size() - 2);
    const double t = pos - static_cast<double>(i);
    char buf[8];
    int rgb[3];
    for (int c = 0; c < 3; ++c)
        rgb[c] = static_cast<int>(std::lround(stops[i][static_cast<std::size_t>(c)] * (1.0 - t) +
                                              stops[i + 1][static_cast<std::size_t>(c)] * t));
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", rgb[0], rgb[1], rgb[2]);
    return buf;
}

namespace {

class Svg {
public:
    Svg(int w, int h) {
        out_ << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
             << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << w << "\" height=\"" << h
             << "\" viewBox=\"0 0 " << w << ' ' << h << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
             << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"#ffffff\"/>\n";
    }
    Svg& raw(const std::string& s) {
        out_ << s << '\n';
        return *this;
    }
    void line(double x1, double y1, double x2, double y2, const std::string& style) {
        out_ << "<line x1=\"" << fmt(x1) << "\" y1=\"" << fmt(y1) << "\" x2=\"" << fmt(x2) << "\" y2=\"" << fmt(y2) << "\" "
             << style << "/>\n";
    }
    void text(double x, double y, const std::string& s, const std::string& anchor = "middle") {
        out_ << "<text x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" text-anchor=\"" << anchor << "\">" << s << "</text>\n";
    }
    void rect(double x, double y, double w, double h, const std::string& fill) {
        out_ << "<rect x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" width=\"" << fmt(w) << "\" height=\"" << fmt(h)
             << "\" fill=\"" << fill << "\"/>\n";
    }
    std::string finish() {
        out_ << "</svg>\n";
        return out_.str();
    }

private:
    std::ostringstream out_;
};

void write_file(const std::filesystem::path& path, const std::string& content, std::vector<std::filesystem::path>& written) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out << content;
    if (!out) throw DataError("failed writing " + path.string());
    written.push_back(path);
}

std::string spacing_csv(const CrowdingReport& rep) {
    std::ostringstream o;
    o << "variant,distance_px,correct,total,accuracy\n";
    auto emit = [&](const SpacingCurve& c) {
        for (const auto& p : c.points)
            o << variant_name(c.variant) << ',' << p.distance << ',' << p.tally.correct << ',' << p.tally.total << ','
              << fmt(p.accuracy()) << '\n';
        o << variant_name(c.variant) << ",unflanked," << c.unflanked.correct << ',' << c.unflanked.total << ','
          << fmt(c.unflanked_accuracy()) << '\n';
    };
    emit(rep.curve);
    if (rep.curve_exclude_sh) emit(*rep.curve_exclude_sh);
    return o.str();
}

std::string spacing_svg(const CrowdingReport& rep) {
    const double W = 560, H = 380, left = 60, right = 20, top = 40, bottom = 50;
    const double pw = W - left - right, ph = H - top - bottom;
    const double d0 = rep.curve.points.front().distance, d1 = rep.curve.points.back().distance;
    const double pad = std::max(1.0, 0.05 * (d1 - d0));
    const double xlo = d0 - pad, xhi = d1 + pad;
    auto X = [&](double d) { return left + (d - xlo) / (xhi - xlo) * pw; };
    auto Y = [&](double a) { return top + (1.0 - a) * ph; };

    Svg s(static_cast<int>(W), static_cast<int>(H));
    s.text(W / 2, 22, "Accuracy by target-flanker spacing (" + rep.run_id + ")");
    s.line(left, top + ph, left + pw, top + ph, "stroke=\"#000000\"");
    s.line(left, top, left, top + ph, "stroke=\"#000000\"");
    for (int k = 0; k <= 4; ++k) {
        const double a = k / 4.0;
        s.line(left - 4, Y(a), left, Y(a), "stroke=\"#000000\"");
        s.text(left - 8, Y(a) + 4, fmt(a), "end");
    }
    for (const auto& p : rep.curve.points) s.text(X(p.distance), top + ph + 16, std::to_string(p.distance));
    s.text(left + pw / 2, H - 12, "spacing (px)");

    auto polyline = [&](const SpacingCurve& c, const std::string& colour) {
        std::string pts;
        for (const auto& p : c.points) pts += fmt(X(p.distance)) + "," + fmt(Y(p.accuracy())) + " ";
        if (!pts.empty()) pts.pop_back();
        s.raw("<polyline fill=\"none\" stroke=\"" + colour + "\" stroke-width=\"2\" points=\"" + pts + "\"/>");
        for (const auto& p : c.points)
            s.raw("<circle cx=\"" + fmt(X(p.distance)) + "\" cy=\"" + fmt(Y(p.accuracy())) + "\" r=\"3\" fill=\"" + colour +
                  "\"/>");
    };
    s.line(left, Y(rep.curve.unflanked_accuracy()), left + pw, Y(rep.curve.unflanked_accuracy()),
           "stroke=\"#555555\" stroke-dasharray=\"6,4\"");
    s.text(left + pw - 4, Y(rep.curve.unflanked_accuracy()) - 6, "unflanked", "end");
    polyline(rep.curve, "#1f4e9c");
    if (rep.curve_exclude_sh) polyline(*rep.curve_exclude_sh, "#d35400");

    auto fit_curve = [&](const PsychometricFit& f, const std::string& dash) {
        std::string pts;
        for (int k = 0; k <= 100; ++k) {
            const double d = xlo + (xhi - xlo) * k / 100.0;
            pts += fmt(X(d)) + "," + fmt(Y(std::clamp(f(d), 0.0, 1.0))) + " ";
        }
        pts.pop_back();
        s.raw("<polyline fill=\"none\" stroke=\"#1f4e9c\" stroke-width=\"1\" stroke-dasharray=\"" + dash + "\" points=\"" +
              pts + "\"/>");
    };
    if (rep.fit_free) fit_curve(*rep.fit_free, "2,2");
    if (rep.fit_chance_floor) fit_curve(*rep.fit_chance_floor, "8,3");

    double ly = top + 8;
    auto legend = [&](const std::string& colour, const std::string& label) {
        s.rect(left + 10, ly - 8, 12, 3, colour);
        s.text(left + 28, ly - 4, label, "start");
        ly += 14;
    };
    legend("#1f4e9c", "all flankers");
    if (rep.curve_exclude_sh) legend("#d35400", "excluding S/H");
    return s.finish();
}

std::string conditions_csv(const CrowdingReport& rep) {
    std::ostringstream o;
    o << "variant,target_polarity,flanker_polarity,size_pt,correct,total,accuracy\n";
    auto emit = [&](const ConditionTable& t) {
        for (const auto& c : t.cells)
            o << (t.exclude_sh ? "exclude-SH" : "all") << ',' << polarity_name(c.target) << ','
              << polarity_name(c.flanker) << ',' << c.size_pt << ',' << c.tally.correct << ',' << c.tally.total << ','
              << fmt(c.tally.rate()) << '\n';
    };
    emit(rep.conditions);
    if (rep.conditions_exclude_sh) emit(*rep.conditions_exclude_sh);
    return o.str();
}

std::string conditions_svg(const CrowdingReport& rep) {
    const auto& cells = rep.conditions.cells;
    const double bar = 28, gap = 10, left = 60, top = 40, ph = 260;
    const double W = left + 20 + static_cast<double>(cells.size()) * (2 * bar + gap), H = top + ph + 60;
    Svg s(static_cast<int>(W), static_cast<int>(H));
    s.text(W / 2, 22, "Accuracy by target/flanker polarity and size");
    s.line(left, top + ph, W - 20, top + ph, "stroke=\"#000000\"");
    s.line(left, top, left, top + ph, "stroke=\"#000000\"");
    for (int k = 0; k <= 4; ++k) {
        const double a = k / 4.0;
        s.text(left - 8, top + (1 - a) * ph + 4, fmt(a), "end");
    }
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const double x = left + gap / 2 + static_cast<double>(i) * (2 * bar + gap);
        const double a = cells[i].tally.rate();
        s.rect(x, top + (1 - a) * ph, bar, a * ph, "#1f4e9c");
        if (rep.conditions_exclude_sh) {
            if (const auto* e = rep.conditions_exclude_sh->find(cells[i].target, cells[i].flanker, cells[i].size_pt)) {
                const double b = e->tally.rate();
                s.rect(x + bar, top + (1 - b) * ph, bar, b * ph, "#d35400");
            }
        }
        s.text(x + bar, top + ph + 16,
               polarity_letter(cells[i].target) + "/" + polarity_letter(cells[i].flanker) + " " +
                   std::to_string(cells[i].size_pt));
    }
    s.rect(left + 10, H - 22, 12, 8, "#1f4e9c");
    s.text(left + 26, H - 14, "all flankers", "start");
    s.rect(left + 120, H - 22, 12, 8, "#d35400");
    s.text(left + 136, H - 14, "excluding S/H", "start");
    return s.finish();
}

std::string polar_csv(const PolarMap& m) {
    std::ostringstream o;
    o << "angle_deg,distance_px,correct,total,accuracy\n";
    for (std::size_t a = 0; a < m.angles.size(); ++a)
        for (std::size_t d = 0; d < m.distances.size(); ++d) {
            const Tally& t = m.at(a, d);
            o << m.angles[a] << ',' << m.distances[d] << ',' << t.correct << ',' << t.total << ','
              << (t.total ? fmt(t.rate()) : "NA") << '\n';
        }
    return o.str();
}

std::string polar_svg(const PolarMap& m, const std::string& title) {
    const double W = 460, H = 470, cx = 210, cy = 240, r0 = 24, r_max = 180;
    const double ring = (r_max - r0) / static_cast<double>(m.distances.size());
    double step = 360.0;
    for (std::size_t i = 0; i + 1 < m.angles.size(); ++i) step = std::min(step, double(m.angles[i + 1] - m.angles[i]));
    if (m.angles.size() > 1) step = std::min(step, double(m.angles.front() + 360 - m.angles.back()));
    const double pi = 3.14159265358979323846;
    auto pt = [&](double r, double deg) {
        const double t = deg * pi / 180.0;
        return fmt(cx + r * std::cos(t)) + " " + fmt(cy - r * std::sin(t));
    };

    Svg s(static_cast<int>(W), static_cast<int>(H));
    s.text(W / 2, 22, title);
    s.raw("<g stroke=\"#ffffff\" stroke-width=\"0.5\">");
    for (std::size_t a = 0; a < m.angles.size(); ++a) {
        const double lo = m.angles[a] - step / 2, hi = m.angles[a] + step / 2;
        const int large = hi - lo > 180 ? 1 : 0;
        for (std::size_t d = 0; d < m.distances.size(); ++d) {
            const Tally& t = m.at(a, d);
            const double ri = r0 + ring * static_cast<double>(d), ro = ri + ring;
            const std::string fill = t.total ? accuracy_color(t.rate()) : "#cccccc";
            // Outer arc runs counter-clockwise on screen (sweep 0), inner arc back.
            s.raw("<path fill=\"" + fill + "\" d=\"M " + pt(ro, lo) + " A " + fmt(ro) + " " + fmt(ro) + " 0 " +
                  std::to_string(large) + " 0 " + pt(ro, hi) + " L " + pt(ri, hi) + " A " + fmt(ri) + " " + fmt(ri) +
                  " 0 " + std::to_string(large) + " 1 " + pt(ri, lo) + " Z\"/>");
        }
    }
    s.raw("</g>");
    s.raw("<circle cx=\"" + fmt(cx) + "\" cy=\"" + fmt(cy) + "\" r=\"4\" fill=\"#000000\"/>");
    s.text(cx, cy + r_max + 18, "rings: " + std::to_string(m.distances.front()) + " to " +
                                    std::to_string(m.distances.back()) + " px");

    // Shared 0-1 colour bar.
    const double bx = W - 40, by = 60, bh = 300;
    s.raw("<defs><linearGradient id=\"scale\" x1=\"0\" y1=\"1\" x2=\"0\" y2=\"0\">");
    for (int k = 0; k <= 8; ++k)
        s.raw("<stop offset=\"" + fmt(k / 8.0) + "\" stop-color=\"" + accuracy_color(k / 8.0) + "\"/>");
    s.raw("</linearGradient></defs>");
    s.raw("<rect x=\"" + fmt(bx) + "\" y=\"" + fmt(by) + "\" width=\"14\" height=\"" + fmt(bh) +
          "\" fill=\"url(#scale)\"/>");
    for (int k = 0; k <= 4; ++k) s.text(bx - 4, by + bh - k / 4.0 * bh + 4, fmt(k / 4.0), "end");
    return s.finish();
}

std::string summary_csv(const CrowdingReport& rep) {
    std::ostringstream o;
    o << "metric,group,value,correct,total,ci_low,ci_high\n";
    auto row = [&](const std::string& metric, const std::string& group, double value, const std::string& correct = "",
                   const std::string& total = "", const std::string& lo = "", const std::string& hi = "") {
        o << metric << ',' << group << ',' << fmt(value) << ',' << correct << ',' << total << ',' << lo << ',' << hi << '\n';
    };
    auto tally_row = [&](const std::string& metric, const std::string& group, const Tally& t) {
        row(metric, group, t.rate(), std::to_string(t.correct), std::to_string(t.total));
    };
    auto asym = [&](const std::string& metric, const std::string& first, const std::string& second,
                    const AsymmetryEstimate& e, const std::string& group_suffix = "") {
        tally_row(metric, first + group_suffix, e.first);
        tally_row(metric, second + group_suffix, e.second);
        row(metric, second + "-minus-" + first + group_suffix, e.difference, "", "", fmt(e.ci_low), fmt(e.ci_high));
    };

    tally_row("unflanked_accuracy", "all", rep.curve.unflanked);
    row("bouma_extrapolated_px", std::string(bouma_status_name(rep.bouma.status)), rep.bouma.spacing_px);
    row("bouma_fit_slope", "ols", rep.bouma.slope);
    row("bouma_fit_intercept", "ols", rep.bouma.intercept);
    row("bouma_theoretical_px", "half-eccentricity", rep.bouma_theoretical_px);
    for (const auto& rt : rep.radial_tangential)
        asym("radial_tangential", "radial", "tangential", rt.estimate, "@" + std::to_string(rt.size_pt));
    if (rep.in_out) asym("in_out", "inner", "outer", *rep.in_out);
    if (rep.hemifield) asym("hemifield", "upper", "lower", *rep.hemifield);
    if (rep.confusion) {
        const auto& c = *rep.confusion;
        row("confusion_flanker_rate", "errors", c.flanker_rate, std::to_string(c.flanker_reports), std::to_string(c.errors));
        row("confusion_other_rate", "errors", c.other_rate, "", std::to_string(c.errors));
        row("confusion_excess_pp", "errors", c.excess_pp);
    }
    return o.str();
}

std::string fits_csv(const CrowdingReport& rep) {
    std::ostringstream o;
    o << "floor_mode,mu_px,sigma_px,floor,ceiling,residual\n";
    auto emit = [&](const char* mode, const PsychometricFit& f) {
        o << mode << ',' << fmt(f.mu) << ',' << fmt(f.sigma) << ',' << fmt(f.floor) << ',' << fmt(f.ceiling) << ','
          << fmt(f.residual) << '\n';
    };
    if (rep.fit_free) emit("free", *rep.fit_free);
    if (rep.fit_chance_floor) emit("chance", *rep.fit_chance_floor);
    return o.str();
}

}  // namespace

std::vector<std::filesystem::path> render_report(const CrowdingReport& report, const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec || !std::filesystem::is_directory(out_dir)) throw DataError("cannot create report directory " + out_dir.string());

    std::vector<std::filesystem::path> written;
    write_file(out_dir / "spacing_curve.csv", spacing_csv(report), written);
    write_file(out_dir / "spacing_curve.svg", spacing_svg(report), written);
    write_file(out_dir / "conditions.csv", conditions_csv(report), written);
    write_file(out_dir / "conditions.svg", conditions_svg(report), written);
    auto polar = [&](const PolarMap& m, const std::string& stem, const std::string& title) {
        write_file(out_dir / (stem + ".csv"), polar_csv(m), written);
        write_file(out_dir / (stem + ".svg"), polar_svg(m, title), written);
    };
    polar(report.polar_all, "polar_all", "Accuracy by flanker position: all flankers");
    if (report.polar_exclude_sh) polar(*report.polar_exclude_sh, "polar_exclude_sh", "Accuracy by flanker position: excluding S/H");
    if (report.polar_only_sh) polar(*report.polar_only_sh, "polar_only_sh", "Accuracy by flanker position: S/H only");
    write_file(out_dir / "summary.csv", summary_csv(report), written);
    write_file(out_dir / "fits.csv", fits_csv(report), written);
    std::string notes;
    for (const auto& n : report.notes) notes += n + "\n";
    write_file(out_dir / "notes.txt", notes, written);
    return written;
}

}  // namespace crowding
