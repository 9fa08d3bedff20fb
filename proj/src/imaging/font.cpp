#include "crowding/font.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "crowding/error.hpp"

namespace crowding {

void ColorScheme::validate() const {
    if (!(near_black < background_grey && background_grey < near_white))
        throw ConfigError("colour scheme must satisfy near_black < background_grey < near_white");
}

std::size_t GlyphBitmap::opaque_count() const {
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

namespace {

constexpr double kPi = 3.14159265358979323846;

// Elliptical arc in y-down em coordinates; t measured so that 90 degrees is
// straight down.
std::vector<StrokePoint> arc(double cx, double cy, double rx, double ry, double t0_deg, double t1_deg,
                             int segments = 32) {
    std::vector<StrokePoint> pts;
    pts.reserve(static_cast<std::size_t>(segments) + 1);
    for (int i = 0; i <= segments; ++i) {
        const double t = (t0_deg + (t1_deg - t0_deg) * i / segments) * kPi / 180.0;
        pts.push_back({cx + rx * std::cos(t), cy + ry * std::sin(t)});
    }
    return pts;
}

std::vector<StrokePoint> concat(std::vector<StrokePoint> a, const std::vector<StrokePoint>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

StrokeFont make_builtin() {
    StrokeFont f;
    f.set_glyph(Letter::A, {0.8, {{{0, 1}, {0.4, 0}, {0.8, 1}}, {{0.16, 0.62}, {0.64, 0.62}}}});
    f.set_glyph(Letter::B, {0.68,
                            {concat(concat({{0, 1}, {0, 0}, {0.42, 0}}, arc(0.42, 0.24, 0.22, 0.24, -90, 90)),
                                    {{0, 0.48}}),
                             concat(concat({{0, 0.48}, {0.44, 0.48}}, arc(0.44, 0.74, 0.24, 0.26, -90, 90)),
                                    {{0, 1}})}});
    f.set_glyph(Letter::C, {0.8, {arc(0.42, 0.5, 0.42, 0.5, 40, 320)}});
    f.set_glyph(Letter::E, {0.62, {{{0.62, 0}, {0, 0}, {0, 1}, {0.62, 1}}, {{0, 0.5}, {0.5, 0.5}}}});
    f.set_glyph(Letter::G, {0.84, {arc(0.42, 0.5, 0.42, 0.5, 0, 320), {{0.46, 0.5}, {0.84, 0.5}}}});
    f.set_glyph(Letter::M, {0.9, {{{0, 1}, {0, 0}, {0.45, 0.62}, {0.9, 0}, {0.9, 1}}}});
    f.set_glyph(Letter::Y, {0.8, {{{0, 0}, {0.4, 0.5}, {0.8, 0}}, {{0.4, 0.5}, {0.4, 1}}}});
    f.set_glyph(Letter::Q, {0.84, {arc(0.42, 0.5, 0.42, 0.5, 0, 360, 48), {{0.52, 0.7}, {0.84, 1}}}});
    f.set_glyph(Letter::S, {0.7,
                            {concat(arc(0.35, 0.25, 0.35, 0.25, 330, 90), arc(0.35, 0.75, 0.35, 0.25, 270, 510))}});
    f.set_glyph(Letter::H, {0.7, {{{0, 0}, {0, 1}}, {{0.7, 0}, {0.7, 1}}, {{0, 0.5}, {0.7, 0.5}}}});
    return f;
}

double segment_distance(double px, double py, StrokePoint a, StrokePoint b) {
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    double t = len2 > 0.0 ? ((px - a.x) * dx + (py - a.y) * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double ex = a.x + t * dx - px;
    const double ey = a.y + t * dy - py;
    return std::sqrt(ex * ex + ey * ey);
}

StrokePoint parse_point(const std::string& tok, const std::filesystem::path& path) {
    const auto comma = tok.find(',');
    if (comma == std::string::npos) throw DataError("font " + path.string() + ": bad point '" + tok + "'");
    try {
        return {std::stod(tok.substr(0, comma)), std::stod(tok.substr(comma + 1))};
    } catch (const std::exception&) {
        throw DataError("font " + path.string() + ": bad point '" + tok + "'");
    }
}

}  // namespace

const StrokeFont& StrokeFont::builtin() {
    static const StrokeFont font = make_builtin();
    return font;
}

StrokeFont StrokeFont::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("font resource missing: " + path.string());
    StrokeFont font;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream head(line.substr(0, line.find('|')));
        std::string key;
        head >> key;
        if (key == "stroke_ratio") {
            head >> font.stroke_ratio;
            continue;
        }
        if (key.size() != 1 || !letter_from_char(key[0]))
            throw DataError("font " + path.string() + ": unknown symbol '" + key + "'");
        StrokeGlyph glyph;
        if (!(head >> glyph.advance)) throw DataError("font " + path.string() + ": missing advance for " + key);
        std::size_t pos = line.find('|');
        while (pos != std::string::npos) {
            const std::size_t next = line.find('|', pos + 1);
            std::istringstream body(line.substr(pos + 1, next == std::string::npos ? std::string::npos : next - pos - 1));
            std::vector<StrokePoint> stroke;
            std::string tok;
            while (body >> tok) stroke.push_back(parse_point(tok, path));
            if (!stroke.empty()) glyph.strokes.push_back(std::move(stroke));
            pos = next;
        }
        font.set_glyph(*letter_from_char(key[0]), std::move(glyph));
    }
    return font;
}

const StrokeGlyph& StrokeFont::glyph(Letter l) const {
    const auto it = glyphs_.find(l);
    if (it == glyphs_.end()) throw DataError(std::string("font has no glyph for '") + symbol(l) + "'");
    return it->second;
}

GlyphBitmap rasterize_glyph(Letter symbol, int size_pt, Polarity polarity, const ColorScheme& scheme,
                            const StrokeFont& font) {
    if (size_pt <= 0) throw ConfigError("glyph size must be positive");
    const StrokeGlyph& g = font.glyph(symbol);

    const double half_width = std::max(0.75, 0.5 * font.stroke_ratio * size_pt);
    const double scale = size_pt - 2.0 * half_width;

    GlyphBitmap out;
    out.height = size_pt;
    out.width = std::max(1, static_cast<int>(std::ceil(g.advance * scale + 2.0 * half_width)));
    out.mask.assign(static_cast<std::size_t>(out.width) * out.height, 0);
    out.fill = scheme.fill(polarity);

    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
            // Pixel centre back in em units.
            const double ex = (x + 0.5 - half_width) / scale;
            const double ey = (y + 0.5 - half_width) / scale;
            const double limit = half_width / scale;
            bool hit = false;
            for (const auto& stroke : g.strokes) {
                if (stroke.size() == 1) {
                    hit = segment_distance(ex, ey, stroke[0], stroke[0]) <= limit;
                } else {
                    for (std::size_t i = 0; i + 1 < stroke.size() && !hit; ++i)
                        hit = segment_distance(ex, ey, stroke[i], stroke[i + 1]) <= limit;
                }
                if (hit) break;
            }
            if (hit) out.mask[static_cast<std::size_t>(y) * out.width + x] = 1;
        }
    }
    return out;
}

}  // namespace crowding
