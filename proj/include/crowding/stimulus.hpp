#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string_view>

#include "crowding/font.hpp"
#include "crowding/image.hpp"
#include "crowding/letters.hpp"

namespace crowding {

enum class FlankMode : std::uint8_t { Unflanked, Single, Pair };
enum class Side : std::uint8_t { Left, Right };

std::string_view mode_name(FlankMode m);
std::optional<FlankMode> mode_from_name(std::string_view s);
std::string_view side_name(Side s);
std::optional<Side> side_from_name(std::string_view s);

/// One experimental condition. Angles are in degrees, 0 pointing along +x
/// (towards the image centre for a left-side target), counter-clockwise in
/// display terms.
struct StimulusSpec {
    Letter target = Letter::A;
    Polarity target_polarity = Polarity::White;
    std::optional<Letter> flanker;
    Polarity flanker_polarity = Polarity::White;
    int size_pt = 20;
    int spacing_px = 0;
    int angle_deg = 0;
    FlankMode mode = FlankMode::Unflanked;
    Side side = Side::Left;
    int eccentricity_px = 56;
    bool acuity = false;

    friend bool operator==(const StimulusSpec&, const StimulusSpec&) = default;
};

/// Everything besides the spec that determines the rendered scene.
struct SceneSettings {
    Canvas canvas{};
    ColorScheme scheme{};
    std::shared_ptr<const StrokeFont> font;  ///< null selects the builtin face

    const StrokeFont& face() const { return font ? *font : StrokeFont::builtin(); }
};

/// Target location on the horizontal meridian.
Point target_center(Canvas canvas, Side side, int eccentricity_px);

/// Flanker centre at `spacing_px` from the target along `angle_deg`; each axis
/// offset is rounded half away from zero.
Point flanker_position(Point target_center, int spacing_px, int angle_deg, Canvas canvas);

/// Normalizes integer degrees into [0, 360).
int normalize_angle(int angle_deg);

/// Draws `glyph` centred at `center`, clipping at the canvas border.
void draw_glyph(ImageBuffer& image, const GlyphBitmap& glyph, Point center);

/// Renders the scene for one spec: grey canvas, target, then flankers, which
/// overwrite the target where they overlap.
ImageBuffer compose_scene(const StimulusSpec& spec, const SceneSettings& settings);

}  // namespace crowding
