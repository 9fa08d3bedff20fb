#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "crowding/sweep.hpp"

namespace crowding {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, sep)) out.push_back(field);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

[[noreturn]] void bad_row(const std::string& source, std::size_t line, const std::string& what) {
    throw FormatError(source + ":" + std::to_string(line) + ": " + what);
}

int parse_int(const std::string& s, const std::string& source, std::size_t line, const char* column) {
    char* end = nullptr;
    const long v = std::strtol(s.c_str(), &end, 10);
    if (s.empty() || *end != '\0') bad_row(source, line, std::string("bad integer in column ") + column + ": '" + s + "'");
    return static_cast<int>(v);
}

}  // namespace

const std::string& record_header() {
    static const std::string header = [] {
        std::string h =
            "run_id,model_id,mode,side,acuity,target,target_polarity,flanker,flanker_polarity,size_pt,spacing_px,"
            "angle_deg,predicted,correct";
        for (int k = 0; k < kNumClasses; ++k) h += ",p" + std::to_string(k);
        return h;
    }();
    return header;
}

void write_records(const std::vector<TrialRecord>& records, std::ostream& out) {
    out << record_header() << '\n';
    char prob[32];
    for (const TrialRecord& r : records) {
        const StimulusSpec& s = r.spec;
        const bool flanked = s.mode != FlankMode::Unflanked;
        out << r.run_id << ',' << r.model_id << ',' << mode_name(s.mode) << ',' << side_name(s.side) << ','
            << (s.acuity ? 1 : 0) << ',' << symbol(s.target) << ',' << polarity_name(s.target_polarity) << ','
            << (flanked && s.flanker ? std::string(1, symbol(*s.flanker)) : std::string("none")) << ','
            << (flanked ? polarity_name(s.flanker_polarity) : std::string_view("none")) << ',' << s.size_pt << ','
            << (flanked ? s.spacing_px : 0) << ',' << (flanked ? s.angle_deg : 0) << ',' << class_name(r.predicted)
            << ',' << (r.correct ? 1 : 0);
        for (float p : r.probabilities) {
            std::snprintf(prob, sizeof prob, "%.6f", static_cast<double>(p));
            out << ',' << prob;
        }
        out << '\n';
    }
}

void write_records(const std::vector<TrialRecord>& records, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write records to " + path.string());
    write_records(records, out);
    if (!out) throw DataError("failed writing records to " + path.string());
}

std::vector<TrialRecord> read_records(std::istream& in, const std::string& source) {
    std::string line;
    if (!std::getline(in, line)) throw FormatError(source + ": missing header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != record_header()) throw FormatError(source + ":1: header does not match the record format");

    std::vector<TrialRecord> records;
    const std::size_t columns = 14 + kNumClasses;
    for (std::size_t lineno = 2; std::getline(in, line); ++lineno) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != columns)
            bad_row(source, lineno, "expected " + std::to_string(columns) + " fields, got " + std::to_string(f.size()));
        TrialRecord r;
        r.run_id = f[0];
        r.model_id = f[1];
        StimulusSpec& s = r.spec;
        const auto mode = mode_from_name(f[2]);
        if (!mode) bad_row(source, lineno, "unknown mode '" + f[2] + "'");
        s.mode = *mode;
        const auto side = side_from_name(f[3]);
        if (!side) bad_row(source, lineno, "unknown side '" + f[3] + "'");
        s.side = *side;
        if (f[4] != "0" && f[4] != "1") bad_row(source, lineno, "acuity must be 0 or 1");
        s.acuity = f[4] == "1";
        const auto target = f[5].size() == 1 ? letter_from_char(f[5][0]) : std::nullopt;
        if (!target || !is_target_letter(*target)) bad_row(source, lineno, "bad target '" + f[5] + "'");
        s.target = *target;
        const auto tpol = polarity_from_name(f[6]);
        if (!tpol) bad_row(source, lineno, "bad target polarity '" + f[6] + "'");
        s.target_polarity = *tpol;
        if (s.mode == FlankMode::Unflanked) {
            if (f[7] != "none" || f[8] != "none") bad_row(source, lineno, "unflanked row names a flanker");
        } else {
            const auto flanker = f[7].size() == 1 ? letter_from_char(f[7][0]) : std::nullopt;
            if (!flanker) bad_row(source, lineno, "bad flanker '" + f[7] + "'");
            s.flanker = *flanker;
            const auto fpol = polarity_from_name(f[8]);
            if (!fpol) bad_row(source, lineno, "bad flanker polarity '" + f[8] + "'");
            s.flanker_polarity = *fpol;
        }
        s.size_pt = parse_int(f[9], source, lineno, "size_pt");
        s.spacing_px = parse_int(f[10], source, lineno, "spacing_px");
        s.angle_deg = parse_int(f[11], source, lineno, "angle_deg");
        const auto predicted = class_from_name(f[12]);
        if (!predicted) bad_row(source, lineno, "bad predicted class '" + f[12] + "'");
        r.predicted = *predicted;
        if (f[13] != "0" && f[13] != "1") bad_row(source, lineno, "correct must be 0 or 1");
        r.correct = f[13] == "1";
        if (r.correct != (r.predicted == static_cast<int>(s.target)))
            bad_row(source, lineno, "correct flag disagrees with the predicted class");
        for (int k = 0; k < kNumClasses; ++k) {
            const std::string& v = f[14 + static_cast<std::size_t>(k)];
            char* end = nullptr;
            const float p = std::strtof(v.c_str(), &end);
            if (v.empty() || *end != '\0') bad_row(source, lineno, "bad probability '" + v + "'");
            r.probabilities[static_cast<std::size_t>(k)] = p;
        }
        records.push_back(std::move(r));
    }
    return records;
}

std::vector<TrialRecord> read_records(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open records " + path.string());
    return read_records(in, path.string());
}

}  // namespace crowding
