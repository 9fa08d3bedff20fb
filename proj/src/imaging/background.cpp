#include "crowding/background.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "crowding/error.hpp"
#include "crowding/image_io.hpp"
#include "crowding/rng.hpp"

namespace crowding {

namespace fs = std::filesystem;

ImageBuffer fit_to_canvas(const ImageBuffer& source, Canvas canvas) {
    if (source.empty()) throw DataError("cannot resize an empty image");
    // Largest centred window with the canvas aspect ratio.
    double crop_w = source.width();
    double crop_h = source.height();
    const double target_aspect = static_cast<double>(canvas.width) / canvas.height;
    if (crop_w / crop_h > target_aspect)
        crop_w = crop_h * target_aspect;
    else
        crop_h = crop_w / target_aspect;
    const double x0 = (source.width() - crop_w) / 2.0;
    const double y0 = (source.height() - crop_h) / 2.0;

    ImageBuffer out(canvas);
    for (int y = 0; y < canvas.height; ++y) {
        const double sy = std::clamp(y0 + (y + 0.5) * crop_h / canvas.height - 0.5, 0.0, source.height() - 1.0);
        const int iy = static_cast<int>(sy);
        const int iy1 = std::min(iy + 1, source.height() - 1);
        const double fy = sy - iy;
        for (int x = 0; x < canvas.width; ++x) {
            const double sx = std::clamp(x0 + (x + 0.5) * crop_w / canvas.width - 0.5, 0.0, source.width() - 1.0);
            const int ix = static_cast<int>(sx);
            const int ix1 = std::min(ix + 1, source.width() - 1);
            const double fx = sx - ix;
            for (int c = 0; c < 3; ++c) {
                const double top = source.at(ix, iy, c) * (1 - fx) + source.at(ix1, iy, c) * fx;
                const double bottom = source.at(ix, iy1, c) * (1 - fx) + source.at(ix1, iy1, c) * fx;
                out.at(x, y, c) = static_cast<std::uint8_t>(std::lround(top * (1 - fy) + bottom * fy));
            }
        }
    }
    return out;
}

namespace {

std::vector<LabeledImage> load_directory(const fs::path& dir, int class_id, Canvas canvas) {
    if (!fs::is_directory(dir)) throw DataError("background directory not found: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file()) files.push_back(entry.path());
    if (files.empty()) throw DataError("background directory is empty: " + dir.string());
    std::sort(files.begin(), files.end(), [](const fs::path& a, const fs::path& b) {
        return a.filename().string() < b.filename().string();
    });

    std::vector<LabeledImage> out;
    for (const auto& f : files) {
        try {
            out.push_back({fit_to_canvas(read_image(f), canvas), class_id, f.filename().string()});
        } catch (const DataError& e) {
            std::cerr << "warning: skipping " << f.string() << ": " << e.what() << '\n';
        }
    }
    if (out.empty()) throw DataError("no decodable images in " + dir.string());
    return out;
}

std::uint8_t clamp_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

// Rubble is kept darker overall than facades so that even coarse brightness
// statistics tell the two classes apart.
ImageBuffer blocky(Rng& rng, Canvas canvas) {
    const double base = rng.uniform(50, 100);
    double tint[3];
    for (double& t : tint) t = rng.uniform(-20, 20);
    std::vector<double> field(static_cast<std::size_t>(canvas.width) * canvas.height * 3);
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < canvas.width * canvas.height; ++i) field[static_cast<std::size_t>(i) * 3 + c] = base + tint[c];

    const int blocks = 18 + static_cast<int>(rng.below(16));
    for (int b = 0; b < blocks; ++b) {
        const int w = 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(canvas.width / 3)));
        const int h = 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(canvas.height / 3)));
        const int x0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(canvas.width)));
        const int y0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(canvas.height)));
        const double level = rng.uniform(20, 130);
        for (int y = y0; y < std::min(canvas.height, y0 + h); ++y)
            for (int x = x0; x < std::min(canvas.width, x0 + w); ++x)
                for (int c = 0; c < 3; ++c)
                    field[(static_cast<std::size_t>(y) * canvas.width + x) * 3 + c] = level + tint[c];
    }

    ImageBuffer out(canvas);
    std::size_t i = 0;
    for (auto& v : out.data()) v = clamp_byte(field[i++] + rng.uniform(-12, 12));
    return out;
}

ImageBuffer striated(Rng& rng, Canvas canvas) {
    constexpr double kTwoPi = 6.283185307179586;
    struct Grating {
        double kx, ky, phase, amplitude;
    };
    const double base = rng.uniform(140, 190);
    double tint[3];
    for (double& t : tint) t = rng.uniform(-20, 20);
    Grating gratings[3];
    const double main_orientation = rng.uniform(0, kTwoPi / 2);
    for (int g = 0; g < 3; ++g) {
        const double orientation = main_orientation + rng.uniform(-0.3, 0.3);
        const double period = rng.uniform(3.0, 9.0) * canvas.width / 64.0;
        gratings[g] = {std::cos(orientation) * kTwoPi / period, std::sin(orientation) * kTwoPi / period,
                       rng.uniform(0, kTwoPi), rng.uniform(10, 25)};
    }
    ImageBuffer out(canvas);
    for (int y = 0; y < canvas.height; ++y) {
        for (int x = 0; x < canvas.width; ++x) {
            double v = base;
            for (const auto& g : gratings) v += g.amplitude * std::sin(g.kx * x + g.ky * y + g.phase);
            for (int c = 0; c < 3; ++c) out.at(x, y, c) = clamp_byte(v + tint[c] + rng.uniform(-12, 12));
        }
    }
    return out;
}

}  // namespace

std::vector<LabeledImage> load_backgrounds(const fs::path& dir_a, const fs::path& dir_b, Canvas canvas) {
    auto out = load_directory(dir_a, 0, canvas);
    auto b = load_directory(dir_b, 1, canvas);
    out.insert(out.end(), std::make_move_iterator(b.begin()), std::make_move_iterator(b.end()));
    return out;
}

ImageBuffer synth_background(int class_id, std::uint64_t seed, Canvas canvas) {
    if (class_id != 0 && class_id != 1) throw ConfigError("background class must be 0 or 1");
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(class_id)));
    return class_id == 0 ? blocky(rng, canvas) : striated(rng, canvas);
}

ImageBuffer flip_vertical(const ImageBuffer& image) {
    ImageBuffer out(image.canvas());
    const std::size_t stride = static_cast<std::size_t>(image.width()) * ImageBuffer::kChannels;
    for (int y = 0; y < image.height(); ++y) {
        const auto src = image.data().subspan(static_cast<std::size_t>(y) * stride, stride);
        std::copy(src.begin(), src.end(), out.data().begin() + static_cast<std::ptrdiff_t>((image.height() - 1 - y) * stride));
    }
    return out;
}

}  // namespace crowding
