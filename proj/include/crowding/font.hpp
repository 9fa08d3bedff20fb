#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <vector>

#include "crowding/letters.hpp"

namespace crowding {

struct ColorScheme {
    std::uint8_t background_grey = 128;
    std::uint8_t near_white = 230;
    std::uint8_t near_black = 25;

    std::uint8_t fill(Polarity p) const { return p == Polarity::White ? near_white : near_black; }
    /// Throws ConfigError unless near_black < background_grey < near_white.
    void validate() const;

    friend bool operator==(const ColorScheme&, const ColorScheme&) = default;
};

struct StrokePoint {
    double x = 0.0;
    double y = 0.0;
};

/// Skeleton of one letter in em units: y runs 0 (cap line) to 1 (baseline),
/// x runs 0 to `advance`.
struct StrokeGlyph {
    double advance = 0.7;
    std::vector<std::vector<StrokePoint>> strokes;
};

/// A monoline stroke font. Glyphs are rendered by thickening the skeleton,
/// which keeps rasterization exact and dependency-free.
class StrokeFont {
public:
    /// The embedded sans-serif face covering the ten-letter alphabet.
    static const StrokeFont& builtin();

    /// Text format, one glyph per line:
    ///   <letter> <advance> | x,y x,y ... | x,y ...
    /// Blank lines and lines starting with '#' are ignored.
    static StrokeFont load(const std::filesystem::path& path);

    void set_glyph(Letter l, StrokeGlyph g) { glyphs_[l] = std::move(g); }
    const StrokeGlyph& glyph(Letter l) const;
    bool has(Letter l) const { return glyphs_.count(l) != 0; }

    /// Stroke width relative to the em height.
    double stroke_ratio = 0.14;

private:
    std::map<Letter, StrokeGlyph> glyphs_;
};

/// Binary coverage mask of a rendered letter plus the value it is drawn with.
struct GlyphBitmap {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> mask;  ///< 1 = opaque
    std::uint8_t fill = 0;

    bool opaque(int x, int y) const { return mask[static_cast<std::size_t>(y) * width + x] != 0; }
    std::size_t opaque_count() const;

    friend bool operator==(const GlyphBitmap&, const GlyphBitmap&) = default;
};

/// Renders `symbol` with an em height of `size_pt` pixels (1 pt = 1 px).
GlyphBitmap rasterize_glyph(Letter symbol, int size_pt, Polarity polarity, const ColorScheme& scheme,
                            const StrokeFont& font = StrokeFont::builtin());

}  // namespace crowding
