#include "crowding/stimulus.hpp"

#include <cmath>
#include <string>

#include "crowding/error.hpp"

namespace crowding {

std::string_view mode_name(FlankMode m) {
    switch (m) {
        case FlankMode::Unflanked: return "unflanked";
        case FlankMode::Single: return "single";
        case FlankMode::Pair: return "pair";
    }
    return "?";
}

std::optional<FlankMode> mode_from_name(std::string_view s) {
    if (s == "unflanked") return FlankMode::Unflanked;
    if (s == "single") return FlankMode::Single;
    if (s == "pair") return FlankMode::Pair;
    return std::nullopt;
}

std::string_view side_name(Side s) { return s == Side::Left ? "left" : "right"; }

std::optional<Side> side_from_name(std::string_view s) {
    if (s == "left") return Side::Left;
    if (s == "right") return Side::Right;
    return std::nullopt;
}

int normalize_angle(int angle_deg) {
    const int a = angle_deg % 360;
    return a < 0 ? a + 360 : a;
}

Point target_center(Canvas canvas, Side side, int eccentricity_px) {
    const int cx = canvas.width / 2;
    const int cy = canvas.height / 2;
    if (eccentricity_px < 0 || eccentricity_px >= cx)
        throw PlacementError("eccentricity " + std::to_string(eccentricity_px) + " px does not fit a canvas of width " +
                             std::to_string(canvas.width));
    return {side == Side::Left ? cx - eccentricity_px : cx + eccentricity_px, cy};
}

Point flanker_position(Point target, int spacing_px, int angle_deg, Canvas canvas) {
    if (spacing_px <= 0) throw PlacementError("flanker spacing must be positive");
    // Degrees are reduced exactly before the trig call so that theta and
    // theta + 360 give identical offsets.
    const double theta = normalize_angle(angle_deg) * (3.14159265358979323846 / 180.0);
    const long dx = std::lround(spacing_px * std::cos(theta));
    const long dy = std::lround(-spacing_px * std::sin(theta));
    const Point p{target.x + static_cast<int>(dx), target.y + static_cast<int>(dy)};
    if (p.x < 0 || p.y < 0 || p.x >= canvas.width || p.y >= canvas.height)
        throw PlacementError("flanker centre (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                             ") lies outside the canvas");
    return p;
}

void draw_glyph(ImageBuffer& image, const GlyphBitmap& glyph, Point center) {
    const int x0 = center.x - glyph.width / 2;
    const int y0 = center.y - glyph.height / 2;
    for (int gy = 0; gy < glyph.height; ++gy) {
        const int y = y0 + gy;
        if (y < 0 || y >= image.height()) continue;
        for (int gx = 0; gx < glyph.width; ++gx) {
            const int x = x0 + gx;
            if (x < 0 || x >= image.width() || !glyph.opaque(gx, gy)) continue;
            image.set_grey(x, y, glyph.fill);
        }
    }
}

ImageBuffer compose_scene(const StimulusSpec& spec, const SceneSettings& settings) {
    const StrokeFont& font = settings.face();
    if (!is_target_letter(spec.target))
        throw ConfigError(std::string("'") + symbol(spec.target) + "' is not a target letter");
    if (spec.mode != FlankMode::Unflanked && !spec.flanker)
        throw ConfigError("flanked spec without a flanker letter");

    ImageBuffer image(settings.canvas, settings.scheme.background_grey);
    const Point tc = target_center(settings.canvas, spec.side, spec.eccentricity_px);
    draw_glyph(image, rasterize_glyph(spec.target, spec.size_pt, spec.target_polarity, settings.scheme, font), tc);

    if (spec.mode == FlankMode::Unflanked) return image;

    const GlyphBitmap flanker = rasterize_glyph(*spec.flanker, spec.size_pt, spec.flanker_polarity, settings.scheme, font);
    draw_glyph(image, flanker, flanker_position(tc, spec.spacing_px, spec.angle_deg, settings.canvas));
    if (spec.mode == FlankMode::Pair)
        draw_glyph(image, flanker, flanker_position(tc, spec.spacing_px, spec.angle_deg + 180, settings.canvas));
    return image;
}

}  // namespace crowding
