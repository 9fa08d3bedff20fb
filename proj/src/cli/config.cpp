#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "crowding/cli.hpp"

namespace crowding::cli {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in{std::string(s)};
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
    throw ConfigError("invalid value '" + std::string(value) + "' for " + std::string(key) + " (expected " +
                      std::string(expected) + ")");
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
    T out{};
    const auto* end = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc{} || ptr != end) bad_value(key, value, "a number");
    return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    bad_value(key, v, "true or false");
}

template <typename T>
std::vector<T> parse_number_list(std::string_view key, std::string_view value) {
    std::vector<T> out;
    for (const auto& item : split_list(value)) out.push_back(parse_number<T>(key, item));
    if (out.empty()) bad_value(key, value, "a non-empty comma-separated list");
    return out;
}

// Shortest text that parses back to the same value.
template <typename T>
std::string fmt_double(T v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

template <typename T>
std::string join(const std::vector<T>& v) {
    std::string out;
    for (const auto& x : v) {
        if (!out.empty()) out += ",";
        if constexpr (std::is_floating_point_v<T>)
            out += fmt_double(x);
        else
            out += std::to_string(x);
    }
    return out;
}

std::string letters_string(const std::vector<Letter>& letters) {
    std::string s;
    for (Letter l : letters) s += symbol(l);
    return s;
}

std::vector<Letter> parse_letters(std::string_view key, std::string_view value) {
    std::vector<Letter> out;
    for (char c : value) {
        if (c == ',' || c == ' ') continue;
        const auto l = letter_from_char(c);
        if (!l) bad_value(key, value, "letters from ABCEGMYQSH");
        if (std::find(out.begin(), out.end(), *l) != out.end()) bad_value(key, value, "distinct letters");
        out.push_back(*l);
    }
    if (out.empty()) bad_value(key, value, "at least one letter");
    return out;
}

std::string polarities_string(const std::vector<PolarityPair>& pairs) {
    std::string s;
    for (const auto& p : pairs) {
        if (!s.empty()) s += ",";
        s += p.target == Polarity::White ? 'W' : 'B';
        s += p.flanker == Polarity::White ? 'W' : 'B';
    }
    return s;
}

std::vector<PolarityPair> parse_polarities(std::string_view key, std::string_view value) {
    std::vector<PolarityPair> out;
    auto pol = [&](char c) {
        if (c == 'W' || c == 'w') return Polarity::White;
        if (c == 'B' || c == 'b') return Polarity::Black;
        bad_value(key, value, "pairs such as WW,WB,BW,BB");
    };
    for (const auto& item : split_list(value)) {
        if (item.size() != 2) bad_value(key, value, "pairs such as WW,WB,BW,BB");
        out.push_back({pol(item[0]), pol(item[1])});
    }
    if (out.empty()) bad_value(key, value, "at least one polarity pair");
    return out;
}

std::uint8_t parse_level(std::string_view key, std::string_view value) {
    const int v = parse_number<int>(key, value);
    if (v < 0 || v > 255) bad_value(key, value, "an integer in [0, 255]");
    return static_cast<std::uint8_t>(v);
}

struct Key {
    const char* name;
    std::function<std::string(const ExperimentConfig&)> get;
    std::function<void(ExperimentConfig&, std::string_view)> set;
};

const std::vector<Key>& keys() {
    static const std::vector<Key> table = [] {
        std::vector<Key> k;
        auto add = [&](const char* name, auto get, auto set) { k.push_back({name, get, set}); };
        add("seed", [](const auto& c) { return std::to_string(c.seed); },
            [](auto& c, auto v) { c.seed = parse_number<std::uint64_t>("seed", v); });
        add("workers", [](const auto& c) { return std::to_string(c.workers); },
            [](auto& c, auto v) { c.workers = parse_number<unsigned>("workers", v); });
        add("out", [](const auto& c) { return c.out; }, [](auto& c, auto v) { c.out = std::string(v); });

        add("canvas.width", [](const auto& c) { return std::to_string(c.canvas.width); },
            [](auto& c, auto v) { c.canvas.width = parse_number<int>("canvas.width", v); });
        add("canvas.height", [](const auto& c) { return std::to_string(c.canvas.height); },
            [](auto& c, auto v) { c.canvas.height = parse_number<int>("canvas.height", v); });
        add("stimulus.eccentricity", [](const auto& c) { return std::to_string(c.grid.eccentricity_px); },
            [](auto& c, auto v) { c.grid.eccentricity_px = parse_number<int>("stimulus.eccentricity", v); });
        add("stimulus.side", [](const auto& c) { return std::string(side_name(c.grid.side)); },
            [](auto& c, auto v) {
                const auto s = side_from_name(v);
                if (!s) bad_value("stimulus.side", v, "left or right");
                c.grid.side = *s;
            });
        add("colors.background", [](const auto& c) { return std::to_string(c.colors.background_grey); },
            [](auto& c, auto v) { c.colors.background_grey = parse_level("colors.background", v); });
        add("colors.white", [](const auto& c) { return std::to_string(c.colors.near_white); },
            [](auto& c, auto v) { c.colors.near_white = parse_level("colors.white", v); });
        add("colors.black", [](const auto& c) { return std::to_string(c.colors.near_black); },
            [](auto& c, auto v) { c.colors.near_black = parse_level("colors.black", v); });
        add("font.path", [](const auto& c) { return c.font_path; },
            [](auto& c, auto v) { c.font_path = std::string(v); });

        add("acuity.train", [](const auto& c) { return std::string(c.acuity_train ? "true" : "false"); },
            [](auto& c, auto v) { c.acuity_train = parse_bool("acuity.train", v); });
        add("acuity.test", [](const auto& c) { return std::string(c.acuity_test ? "true" : "false"); },
            [](auto& c, auto v) { c.acuity_test = parse_bool("acuity.test", v); });
        add("acuity.steps", [](const auto& c) { return std::to_string(c.acuity_steps); },
            [](auto& c, auto v) { c.acuity_steps = parse_number<int>("acuity.steps", v); });
        add("acuity.min", [](const auto& c) { return fmt_double(c.acuity_min); },
            [](auto& c, auto v) { c.acuity_min = parse_number<double>("acuity.min", v); });

        add("backgrounds.source", [](const auto& c) { return c.background_source; },
            [](auto& c, auto v) {
                if (v != "synthetic" && v != "dirs") bad_value("backgrounds.source", v, "synthetic or dirs");
                c.background_source = std::string(v);
            });
        add("backgrounds.dir_a", [](const auto& c) { return c.background_dir_a; },
            [](auto& c, auto v) { c.background_dir_a = std::string(v); });
        add("backgrounds.dir_b", [](const auto& c) { return c.background_dir_b; },
            [](auto& c, auto v) { c.background_dir_b = std::string(v); });
        add("backgrounds.count", [](const auto& c) { return std::to_string(c.background_count); },
            [](auto& c, auto v) { c.background_count = parse_number<int>("backgrounds.count", v); });
        add("backgrounds.flip", [](const auto& c) { return std::string(c.background_flip ? "true" : "false"); },
            [](auto& c, auto v) { c.background_flip = parse_bool("backgrounds.flip", v); });
        add("backgrounds.synthetic_fallback",
            [](const auto& c) { return std::string(c.synthetic_fallback ? "true" : "false"); },
            [](auto& c, auto v) { c.synthetic_fallback = parse_bool("backgrounds.synthetic_fallback", v); });
        add("letters.jitter", [](const auto& c) { return std::to_string(c.letter_jitter); },
            [](auto& c, auto v) { c.letter_jitter = parse_number<int>("letters.jitter", v); });

        add("grid.mode", [](const auto& c) { return std::string(mode_name(c.grid.mode)); },
            [](auto& c, auto v) {
                const auto m = mode_from_name(v);
                if (!m || *m == FlankMode::Unflanked) bad_value("grid.mode", v, "single or pair");
                c.grid.mode = *m;
            });
        add("grid.distances", [](const auto& c) { return join(c.grid.distances); },
            [](auto& c, auto v) { c.grid.distances = parse_number_list<int>("grid.distances", v); });
        add("grid.angle_step", [](const auto& c) { return std::to_string(c.grid.angle_step); },
            [](auto& c, auto v) { c.grid.angle_step = parse_number<int>("grid.angle_step", v); });
        add("grid.sizes", [](const auto& c) { return join(c.grid.sizes); },
            [](auto& c, auto v) { c.grid.sizes = parse_number_list<int>("grid.sizes", v); });
        add("grid.targets", [](const auto& c) { return letters_string(c.grid.targets); },
            [](auto& c, auto v) { c.grid.targets = parse_letters("grid.targets", v); });
        add("grid.flankers", [](const auto& c) { return letters_string(c.grid.flankers); },
            [](auto& c, auto v) { c.grid.flankers = parse_letters("grid.flankers", v); });
        add("grid.polarities", [](const auto& c) { return polarities_string(c.grid.polarities); },
            [](auto& c, auto v) { c.grid.polarities = parse_polarities("grid.polarities", v); });
        add("grid.unflanked", [](const auto& c) { return std::string(c.grid.include_unflanked ? "true" : "false"); },
            [](auto& c, auto v) { c.grid.include_unflanked = parse_bool("grid.unflanked", v); });

        add("train.epochs", [](const auto& c) { return std::to_string(c.train.epochs); },
            [](auto& c, auto v) { c.train.epochs = parse_number<int>("train.epochs", v); });
        add("train.batch", [](const auto& c) { return std::to_string(c.train.batch_size); },
            [](auto& c, auto v) { c.train.batch_size = parse_number<std::size_t>("train.batch", v); });
        add("train.lr", [](const auto& c) { return fmt_double(c.train.learning_rate); },
            [](auto& c, auto v) { c.train.learning_rate = parse_number<double>("train.lr", v); });
        add("train.schedule", [](const auto& c) { return std::string(nn::schedule_name(c.train.schedule)); },
            [](auto& c, auto v) {
                const auto s = nn::schedule_from_name(v);
                if (!s) bad_value("train.schedule", v, "plain or staged-unfreeze");
                c.train.schedule = *s;
            });
        add("train.patience", [](const auto& c) { return std::to_string(c.train.patience); },
            [](auto& c, auto v) { c.train.patience = parse_number<int>("train.patience", v); });
        add("train.decay", [](const auto& c) { return fmt_double(c.train.decay); },
            [](auto& c, auto v) { c.train.decay = parse_number<double>("train.decay", v); });
        add("train.validation", [](const auto& c) { return fmt_double(c.train.validation_fraction); },
            [](auto& c, auto v) { c.train.validation_fraction = parse_number<double>("train.validation", v); });
        add("train.beta1", [](const auto& c) { return fmt_double(c.train.beta1); },
            [](auto& c, auto v) { c.train.beta1 = parse_number<double>("train.beta1", v); });
        add("train.beta2", [](const auto& c) { return fmt_double(c.train.beta2); },
            [](auto& c, auto v) { c.train.beta2 = parse_number<double>("train.beta2", v); });
        add("train.epsilon", [](const auto& c) { return fmt_double(c.train.epsilon); },
            [](auto& c, auto v) { c.train.epsilon = parse_number<double>("train.epsilon", v); });

        add("net.channels", [](const auto& c) { return join(c.net.conv_channels); },
            [](auto& c, auto v) { c.net.conv_channels = parse_number_list<std::size_t>("net.channels", v); });
        add("net.dense", [](const auto& c) { return join(c.net.dense_units); },
            [](auto& c, auto v) { c.net.dense_units = parse_number_list<std::size_t>("net.dense", v); });
        add("net.slope", [](const auto& c) { return fmt_double(c.negative_slope); },
            [](auto& c, auto v) { c.negative_slope = parse_number<float>("net.slope", v); });

        add("analysis.fits", [](const auto& c) { return std::string(c.analysis_fits ? "true" : "false"); },
            [](auto& c, auto v) { c.analysis_fits = parse_bool("analysis.fits", v); });
        add("analysis.radial_distance", [](const auto& c) { return std::to_string(c.radial_distance); },
            [](auto& c, auto v) { c.radial_distance = parse_number<int>("analysis.radial_distance", v); });
        return k;
    }();
    return table;
}

}  // namespace

GridConfig ExperimentConfig::desk_grid() {
    GridConfig g;
    g.mode = FlankMode::Single;
    g.eccentricity_px = 16;
    g.distances = {7, 9, 11, 13};
    g.sizes = {6, 8};
    return g;
}

nn::TrainConfig ExperimentConfig::desk_train() {
    nn::TrainConfig t;
    t.learning_rate = 1e-3;
    t.batch_size = 8;
    return t;
}

SceneSettings ExperimentConfig::scene() const {
    SceneSettings s;
    s.canvas = canvas;
    s.scheme = colors;
    if (!font_path.empty()) s.font = std::make_shared<StrokeFont>(StrokeFont::load(font_path));
    return s;
}

void ExperimentConfig::validate() const {
    if (canvas.width < 32 || canvas.height < 32) throw ConfigError("canvas must be at least 32x32");
    colors.validate();
    if (acuity_steps < 2) throw ConfigError("acuity.steps must be at least 2");
    if (!(acuity_min > 0.0 && acuity_min <= 1.0)) throw ConfigError("acuity.min must lie in (0, 1]");
    if (background_count < 1) throw ConfigError("backgrounds.count must be positive");
    if (letter_jitter < 0 || letter_jitter > 64) throw ConfigError("letters.jitter must lie in [0, 64]");
    if (background_source == "dirs" && (background_dir_a.empty() || background_dir_b.empty()) && !synthetic_fallback)
        throw ConfigError("backgrounds.source = dirs needs backgrounds.dir_a and backgrounds.dir_b");
    if (workers < 1) throw ConfigError("workers must be at least 1");
    if (out.empty()) throw ConfigError("out must name a directory");
    if (radial_distance < 0) throw ConfigError("analysis.radial_distance must be non-negative");
    if (!(negative_slope >= 0.0f && negative_slope < 1.0f)) throw ConfigError("net.slope must lie in [0, 1)");
    if (net.dense_units.empty() || net.conv_channels.empty()) throw ConfigError("network plan must not be empty");
    for (auto c : net.conv_channels)
        if (c == 0) throw ConfigError("net.channels entries must be positive");
    for (auto d : net.dense_units)
        if (d == 0) throw ConfigError("net.dense entries must be positive");
    train.validate();
    grid.validate();

    // Every flanker position of the grid has to land on the canvas.
    const Point target = target_center(canvas, grid.side, grid.eccentricity_px);
    for (int d : grid.distances)
        for (int a : grid.angles()) {
            flanker_position(target, d, a, canvas);
            if (grid.mode == FlankMode::Pair) flanker_position(target, d, a + 180, canvas);
        }
    if (!font_path.empty() && !std::filesystem::exists(font_path))
        throw ConfigError("font file " + font_path + " does not exist");
}

void apply_setting(ExperimentConfig& config, std::string_view key, std::string_view value) {
    for (const auto& k : keys())
        if (key == k.name) {
            k.set(config, value);
            return;
        }
    throw ConfigError("unknown configuration key '" + std::string(key) + "'");
}

void apply_override(ExperimentConfig& config, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos) throw ConfigError("--set expects key=value, got '" + std::string(assignment) + "'");
    apply_setting(config, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

ExperimentConfig parse_config(std::istream& in, const std::string& source) {
    ExperimentConfig config;
    std::set<std::string> seen;
    std::string line;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        const std::string text = trim(line);
        if (text.empty()) continue;
        const auto eq = text.find('=');
        if (eq == std::string::npos)
            throw ConfigError(source + ":" + std::to_string(n) + ": expected 'key = value'");
        const std::string key = trim(std::string_view(text).substr(0, eq));
        if (!seen.insert(key).second) throw ConfigError(source + ":" + std::to_string(n) + ": duplicate key '" + key + "'");
        try {
            apply_setting(config, key, trim(std::string_view(text).substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError(source + ":" + std::to_string(n) + ": " + e.what());
        }
    }
    return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    return parse_config(in, path.string());
}

std::string dump_config(const ExperimentConfig& config) {
    std::string out;
    for (const auto& k : keys()) out += std::string(k.name) + " = " + k.get(config) + "\n";
    return out;
}

std::vector<std::string> config_keys() {
    std::vector<std::string> out;
    for (const auto& k : keys()) out.emplace_back(k.name);
    return out;
}

}  // namespace crowding::cli
