#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "crowding/background.hpp"
#include "crowding/error.hpp"
#include "crowding/image_io.hpp"
#include "crowding/rng.hpp"
#include "crowding/stimulus.hpp"
#include "test_support.hpp"

using namespace crowding;

namespace {

struct Box {
    int x0 = 1 << 30, y0 = 1 << 30, x1 = -1, y1 = -1;
    int height() const { return y1 - y0 + 1; }
};

Box bbox(const GlyphBitmap& g) {
    Box b;
    for (int y = 0; y < g.height; ++y)
        for (int x = 0; x < g.width; ++x)
            if (g.opaque(x, y)) {
                b.x0 = std::min(b.x0, x);
                b.x1 = std::max(b.x1, x);
                b.y0 = std::min(b.y0, y);
                b.y1 = std::max(b.y1, y);
            }
    return b;
}

std::size_t count_not(const ImageBuffer& img, std::uint8_t grey) {
    std::size_t n = 0;
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            if (img.at(x, y, 0) != grey) ++n;
    return n;
}

// Canvas-space opaque mask of a glyph placed at `center`, computed from the
// bitmap independently of draw_glyph.
std::set<std::pair<int, int>> placed(const GlyphBitmap& g, Point center, Canvas canvas) {
    std::set<std::pair<int, int>> s;
    for (int y = 0; y < g.height; ++y)
        for (int x = 0; x < g.width; ++x) {
            const int cx = center.x - g.width / 2 + x, cy = center.y - g.height / 2 + y;
            if (g.opaque(x, y) && cx >= 0 && cy >= 0 && cx < canvas.width && cy < canvas.height) s.insert({cx, cy});
        }
    return s;
}

StimulusSpec flanked(FlankMode mode, int spacing, int angle, int size = 20) {
    StimulusSpec s;
    s.target = Letter::A;
    s.flanker = Letter::B;
    s.target_polarity = Polarity::White;
    s.flanker_polarity = Polarity::Black;
    s.size_pt = size;
    s.spacing_px = spacing;
    s.angle_deg = angle;
    s.mode = mode;
    return s;
}

}  // namespace

TEST_SUITE("imaging") {
    TEST_CASE("glyph fill follows polarity and rendering is deterministic") {
        const ColorScheme scheme;
        const auto a = rasterize_glyph(Letter::A, 20, Polarity::Black, scheme);
        CHECK(a.fill == scheme.near_black);
        CHECK(rasterize_glyph(Letter::A, 20, Polarity::White, scheme).fill == scheme.near_white);
        CHECK(a == rasterize_glyph(Letter::A, 20, Polarity::Black, scheme));
        CHECK(a.opaque_count() > 0);
    }

    TEST_CASE("em height maps one point to one pixel") {
        const ColorScheme scheme;
        for (Letter l : kAllLetters) {
            CAPTURE(symbol(l));
            const auto g20 = rasterize_glyph(l, 20, Polarity::White, scheme);
            const auto g26 = rasterize_glyph(l, 26, Polarity::White, scheme);
            CHECK(g20.height == 20);
            CHECK(g26.height == 26);
            const double ratio_target = bbox(g20).height() * 26.0 / 20.0;
            CHECK(std::abs(bbox(g26).height() - ratio_target) <= 1.0);
        }
    }

    TEST_CASE("all ten letters render distinct masks") {
        std::set<std::vector<std::uint8_t>> masks;
        for (Letter l : kAllLetters) masks.insert(rasterize_glyph(l, 20, Polarity::White, {}).mask);
        CHECK(masks.size() == 10);
    }

    TEST_CASE("glyph errors") {
        CHECK_THROWS_AS(rasterize_glyph(Letter::A, 0, Polarity::White, {}), ConfigError);
        CHECK_THROWS_AS(StrokeFont::load("/nonexistent/font.txt"), DataError);
        StrokeFont partial;
        partial.set_glyph(Letter::A, StrokeFont::builtin().glyph(Letter::A));
        CHECK_THROWS_AS(rasterize_glyph(Letter::B, 20, Polarity::White, {}, partial), DataError);
    }

    TEST_CASE("font files override the builtin face") {
        const auto dir = test_support::scratch_dir("font");
        {
            std::ofstream f(dir / "bars.font");
            f << "# two strokes\nstroke_ratio 0.2\nA 0.5 | 0,0 0,1 | 0.5,0 0.5,1\n";
        }
        const StrokeFont font = StrokeFont::load(dir / "bars.font");
        CHECK(font.has(Letter::A));
        CHECK_FALSE(font.has(Letter::B));
        CHECK(font.glyph(Letter::A).strokes.size() == 2);
        const auto g = rasterize_glyph(Letter::A, 20, Polarity::White, {}, font);
        CHECK(g.opaque_count() > 0);
        CHECK(g != rasterize_glyph(Letter::A, 20, Polarity::White, {}));
    }

    TEST_CASE("colour scheme ordering is validated") {
        CHECK_NOTHROW(ColorScheme{}.validate());
        CHECK_THROWS_AS((ColorScheme{128, 100, 25}.validate()), ConfigError);
    }

    TEST_CASE("target centre on the horizontal meridian") {
        CHECK(target_center({224, 224}, Side::Left, 56) == Point{56, 112});
        CHECK(target_center({224, 224}, Side::Right, 56) == Point{168, 112});
        CHECK(target_center({112, 112}, Side::Left, 28) == Point{28, 56});
        CHECK_THROWS_AS(target_center({224, 224}, Side::Left, 112), PlacementError);
    }

    TEST_CASE("flanker placement") {
        const Canvas c{224, 224};
        CHECK(flanker_position({56, 112}, 25, 0, c) == Point{81, 112});
        CHECK(flanker_position({56, 112}, 25, 90, c) == Point{56, 87});
        // 56 + 45 cos 18 = 98.80, 112 - 45 sin 18 = 98.09
        CHECK(flanker_position({56, 112}, 45, 18, c) == Point{99, 98});
        CHECK(flanker_position({56, 112}, 25, 360 + 18, c) == flanker_position({56, 112}, 25, 18, c));
        CHECK_THROWS_AS(flanker_position({5, 112}, 25, 180, c), PlacementError);
        CHECK_THROWS_AS(flanker_position({56, 112}, 0, 0, c), PlacementError);
    }

    TEST_CASE("property: flanker distance stays within rounding bound") {
        Rng rng(11);
        for (int trial = 0; trial < 2000; ++trial) {
            const int spacing = 1 + static_cast<int>(rng.below(60));
            const int angle = static_cast<int>(rng.below(720)) - 360;
            const Point t{100, 100};
            const Point f = flanker_position(t, spacing, angle, {224, 224});
            const double d = std::hypot(f.x - t.x, f.y - t.y);
            CAPTURE(spacing);
            CAPTURE(angle);
            CHECK(d >= spacing - 0.71);
            CHECK(d <= spacing + 0.71);
        }
    }

    TEST_CASE("unflanked scene holds exactly the target glyph on grey") {
        SceneSettings settings;
        StimulusSpec spec;
        spec.target = Letter::G;
        spec.target_polarity = Polarity::Black;
        const ImageBuffer img = compose_scene(spec, settings);
        const auto glyph = rasterize_glyph(Letter::G, 20, Polarity::Black, settings.scheme);
        const auto mask = placed(glyph, {56, 112}, settings.canvas);
        CHECK(count_not(img, settings.scheme.background_grey) == glyph.opaque_count());
        for (int y = 0; y < img.height(); ++y)
            for (int x = 0; x < img.width(); ++x) {
                const std::uint8_t expect = mask.count({x, y}) ? settings.scheme.near_black : settings.scheme.background_grey;
                for (int c = 0; c < 3; ++c) REQUIRE(img.at(x, y, c) == expect);
            }
    }

    TEST_CASE("pair scenes are symmetric under a half turn") {
        SceneSettings settings;
        for (int angle = 0; angle < 180; angle += 18)
            for (int spacing : {25, 33, 45}) {
                CAPTURE(angle);
                CHECK(compose_scene(flanked(FlankMode::Pair, spacing, angle, 26), settings) ==
                      compose_scene(flanked(FlankMode::Pair, spacing, angle + 180, 26), settings));
            }
    }

    TEST_CASE("separated single flanker: disjoint masks and additive pixel count") {
        SceneSettings settings;
        const auto spec = flanked(FlankMode::Single, 45, 0, 20);
        const ImageBuffer img = compose_scene(spec, settings);
        const auto target = rasterize_glyph(Letter::A, 20, Polarity::White, settings.scheme);
        const auto flank = rasterize_glyph(Letter::B, 20, Polarity::Black, settings.scheme);
        const auto tm = placed(target, {56, 112}, settings.canvas);
        const auto fm = placed(flank, {101, 112}, settings.canvas);
        for (const auto& p : tm) CHECK(fm.count(p) == 0);
        CHECK(count_not(img, settings.scheme.background_grey) == target.opaque_count() + flank.opaque_count());
    }

    TEST_CASE("overlapping flankers overwrite the target") {
        SceneSettings settings;
        auto spec = flanked(FlankMode::Single, 3, 0, 26);
        const ImageBuffer img = compose_scene(spec, settings);
        const auto flank = rasterize_glyph(Letter::B, 26, Polarity::Black, settings.scheme);
        for (const auto& [x, y] : placed(flank, flanker_position({56, 112}, 3, 0, settings.canvas), settings.canvas))
            CHECK(img.at(x, y, 0) == settings.scheme.near_black);
    }

    TEST_CASE("property: pixels outside every glyph stay background grey") {
        SceneSettings settings;
        settings.canvas = {64, 64};
        Rng rng(5);
        for (int trial = 0; trial < 60; ++trial) {
            StimulusSpec s;
            s.target = kTargetLetters[rng.below(8)];
            s.flanker = kAllLetters[rng.below(10)];
            s.target_polarity = rng.below(2) ? Polarity::White : Polarity::Black;
            s.flanker_polarity = rng.below(2) ? Polarity::White : Polarity::Black;
            s.size_pt = rng.below(2) ? 6 : 8;
            s.spacing_px = 7 + 2 * static_cast<int>(rng.below(4));
            s.angle_deg = 18 * static_cast<int>(rng.below(20));
            s.mode = rng.below(2) ? FlankMode::Single : FlankMode::Pair;
            s.eccentricity_px = 16;
            const ImageBuffer img = compose_scene(s, settings);
            const Point tc = target_center(settings.canvas, s.side, 16);
            auto mask = placed(rasterize_glyph(s.target, s.size_pt, s.target_polarity, settings.scheme), tc, settings.canvas);
            const auto fg = rasterize_glyph(*s.flanker, s.size_pt, s.flanker_polarity, settings.scheme);
            for (int a : {s.angle_deg, s.angle_deg + 180}) {
                if (a != s.angle_deg && s.mode == FlankMode::Single) continue;
                const auto fm = placed(fg, flanker_position(tc, s.spacing_px, a, settings.canvas), settings.canvas);
                mask.insert(fm.begin(), fm.end());
            }
            for (int y = 0; y < 64; ++y)
                for (int x = 0; x < 64; ++x)
                    if (!mask.count({x, y})) REQUIRE(img.at(x, y, 1) == settings.scheme.background_grey);
        }
    }

    TEST_CASE("synthetic backgrounds are seeded") {
        const Canvas c{224, 224};
        CHECK(synth_background(0, 42, c) == synth_background(0, 42, c));
        CHECK(synth_background(0, 42, c) != synth_background(0, 43, c));
        CHECK(synth_background(1, 42, c) != synth_background(0, 42, c));
        CHECK(synth_background(1, 7, c).canvas() == c);
        CHECK_THROWS_AS(synth_background(2, 1, c), ConfigError);
    }

    TEST_CASE("synthetic background classes are linearly separable on pooled features") {
        const Canvas c{64, 64};
        std::vector<std::vector<double>> features;
        std::vector<int> labels;
        for (int cls = 0; cls < 2; ++cls)
            for (int i = 0; i < 100; ++i) {
                features.push_back(test_support::mean_pool(synth_background(cls, 1000 + i, c), 8));
                labels.push_back(cls);
            }
        CHECK(test_support::logistic_probe_accuracy(features, labels) >= 0.90);
    }

    TEST_CASE("vertical flip") {
        ImageBuffer img(5, 4, 128);
        img.set_grey(3, 1, 7);
        const ImageBuffer f = flip_vertical(img);
        CHECK(f.at(3, 4 - 1 - 1, 0) == 7);
        CHECK(flip_vertical(f) == img);

        ImageBuffer checker(6, 5);
        std::vector<int> row_sums;
        for (int y = 0; y < 5; ++y) {
            int sum = 0;
            for (int x = 0; x < 6; ++x) {
                const auto v = static_cast<std::uint8_t>(((x + y) % 2) * (10 + y * 20 + x));
                checker.set_grey(x, y, v);
                sum += v;
            }
            row_sums.push_back(sum);
        }
        const ImageBuffer fc = flip_vertical(checker);
        for (int y = 0; y < 5; ++y) {
            int sum = 0;
            for (int x = 0; x < 6; ++x) sum += fc.at(x, y, 0);
            CHECK(sum == row_sums[4 - y]);
        }
        const ImageBuffer bg = synth_background(1, 3, {32, 32});
        CHECK(flip_vertical(flip_vertical(bg)) == bg);
    }

    TEST_CASE("background directories") {
        const auto root = test_support::scratch_dir("backgrounds");
        std::filesystem::create_directories(root / "ruins");
        std::filesystem::create_directories(root / "neighbourhoods");
        for (int i = 0; i < 10; ++i) {
            write_png(synth_background(0, i, {40, 30}), root / "ruins" / ("img" + std::to_string(i) + ".png"));
            write_png(synth_background(1, i, {30, 50}), root / "neighbourhoods" / ("img" + std::to_string(i) + ".png"));
        }
        std::filesystem::copy_file(test_support::data_dir() / "nonsquare.jpg", root / "ruins" / "photo.jpg");
        std::ofstream(root / "ruins" / "broken.png") << "not an image";

        const Canvas canvas{64, 64};
        const auto a = load_backgrounds(root / "ruins", root / "neighbourhoods", canvas);
        REQUIRE(a.size() == 21);
        CHECK(std::count_if(a.begin(), a.end(), [](const LabeledImage& l) { return l.class_id == 0; }) == 11);
        for (const auto& l : a) CHECK(l.image.canvas() == canvas);
        CHECK(a.front().source == "img0.png");

        const auto b = load_backgrounds(root / "ruins", root / "neighbourhoods", canvas);
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].source == b[i].source);
            CHECK(a[i].image == b[i].image);
        }

        std::filesystem::create_directories(root / "empty");
        CHECK_THROWS_AS(load_backgrounds(root / "empty", root / "ruins", canvas), DataError);
        std::filesystem::create_directories(root / "junk");
        std::ofstream(root / "junk" / "x.png") << "junk";
        CHECK_THROWS_AS(load_backgrounds(root / "junk", root / "ruins", canvas), DataError);
    }

    TEST_CASE("PNG round trip and JPEG decode") {
        const auto dir = test_support::scratch_dir("png");
        const ImageBuffer img = synth_background(0, 9, {33, 21});
        write_png(img, dir / "a.png");
        CHECK(read_image(dir / "a.png") == img);
        const ImageBuffer jpg = read_image(test_support::data_dir() / "nonsquare.jpg");
        CHECK(jpg.width() == 48);
        CHECK(jpg.height() == 30);
        CHECK_THROWS_AS(read_image(dir / "missing.png"), DataError);
    }
}
