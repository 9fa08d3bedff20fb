#include "crowding/foveation.hpp"

#include <algorithm>
#include <cmath>

#include "crowding/error.hpp"

namespace crowding {

std::vector<double> acuity_scales(int n_steps, double min_acuity) {
    if (n_steps < 2) throw ConfigError("acuity profile needs at least 2 steps");
    if (!(min_acuity > 0.0 && min_acuity <= 1.0)) throw ConfigError("minimum acuity must lie in (0, 1]");
    std::vector<double> scales(static_cast<std::size_t>(n_steps));
    const double log_range = std::log(1.0 / min_acuity);
    for (int i = 0; i < n_steps; ++i)
        scales[static_cast<std::size_t>(i)] = std::exp(-(static_cast<double>(i) / (n_steps - 1)) * log_range);
    scales.front() = 1.0;
    scales.back() = min_acuity;
    return scales;
}

AcuityProfile AcuityProfile::make(int n_steps, double min_acuity, double d_max) {
    AcuityProfile p;
    p.n_steps = n_steps;
    p.min_acuity = min_acuity;
    p.d_max = d_max;
    p.scales = acuity_scales(n_steps, min_acuity);
    return p;
}

int reduced_size(int dim, double scale) {
    return std::max(1, static_cast<int>(std::lround(dim * scale)));
}

int nearest_source(int i, int dim, int reduced) {
    // Centre-aligned nearest neighbour in exact integer arithmetic:
    // output i -> reduced j = floor((i + 1/2) * reduced / dim)
    //          -> source    = floor((j + 1/2) * dim / reduced).
    const long long j = std::min<long long>(reduced - 1, (2LL * i + 1) * reduced / (2LL * dim));
    return static_cast<int>(std::min<long long>(dim - 1, (2 * j + 1) * dim / (2LL * reduced)));
}

namespace {

std::vector<int> source_map(int dim, double scale) {
    const int reduced = reduced_size(dim, scale);
    std::vector<int> map(static_cast<std::size_t>(dim));
    for (int i = 0; i < dim; ++i) map[static_cast<std::size_t>(i)] = nearest_source(i, dim, reduced);
    return map;
}

}  // namespace

ImageBuffer resample_layer(const ImageBuffer& image, double scale) {
    if (!(scale > 0.0 && scale <= 1.0)) throw ConfigError("resample scale must lie in (0, 1]");
    const auto xs = source_map(image.width(), scale);
    const auto ys = source_map(image.height(), scale);
    ImageBuffer out(image.canvas());
    for (int y = 0; y < image.height(); ++y)
        for (int x = 0; x < image.width(); ++x)
            for (int c = 0; c < 3; ++c)
                out.at(x, y, c) = image.at(xs[static_cast<std::size_t>(x)], ys[static_cast<std::size_t>(y)], c);
    return out;
}

int band_index(Point pixel, Point center, const AcuityProfile& profile, double d_max) {
    const double dx = pixel.x - center.x;
    const double dy = pixel.y - center.y;
    const double d = std::sqrt(dx * dx + dy * dy);
    const double band = std::floor(profile.n_steps * d / d_max);
    return band >= profile.n_steps - 1 ? profile.n_steps - 1 : static_cast<int>(band);
}

int band_index(Point pixel, Point center, const AcuityProfile& profile) {
    if (!(profile.d_max > 0.0)) throw ConfigError("acuity profile has no explicit radius");
    return band_index(pixel, center, profile, profile.d_max);
}

ImageBuffer apply_acuity(const ImageBuffer& image, const AcuityProfile& profile) {
    if (static_cast<int>(profile.scales.size()) != profile.n_steps)
        throw ConfigError("acuity profile scale list does not match its step count");
    const double d_max = profile.radius_for(image);
    const Point center{image.width() / 2, image.height() / 2};

    std::vector<std::vector<int>> xs, ys;
    for (double s : profile.scales) {
        xs.push_back(source_map(image.width(), s));
        ys.push_back(source_map(image.height(), s));
    }

    ImageBuffer out(image.canvas());
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            const auto b = static_cast<std::size_t>(band_index({x, y}, center, profile, d_max));
            const int sx = xs[b][static_cast<std::size_t>(x)];
            const int sy = ys[b][static_cast<std::size_t>(y)];
            for (int c = 0; c < 3; ++c) out.at(x, y, c) = image.at(sx, sy, c);
        }
    }
    return out;
}

}  // namespace crowding
