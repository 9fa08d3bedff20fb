#pragma once

#include <vector>

#include "crowding/image.hpp"

namespace crowding {

/// Log-scaled acuity schedule. Band i covers distances
/// [i, i+1) * d_max / n_steps from the image centre; beyond d_max every pixel
/// falls in the outermost band.
struct AcuityProfile {
    int n_steps = 20;
    double min_acuity = 0.2;
    double d_max = 0.0;  ///< pixels; <= 0 means half the canvas width
    std::vector<double> scales;

    /// Builds a validated profile with its scale list filled in.
    static AcuityProfile make(int n_steps = 20, double min_acuity = 0.2, double d_max = 0.0);

    double radius_for(const ImageBuffer& image) const { return d_max > 0.0 ? d_max : image.width() / 2.0; }
};

/// scales[i] = min_acuity^(i / (n_steps - 1)); first is exactly 1, last exactly min_acuity.
std::vector<double> acuity_scales(int n_steps, double min_acuity);

/// Size of the intermediate image when a dimension is reduced by `scale`:
/// round half away from zero, at least 1.
int reduced_size(int dim, double scale);

/// Source index in the full-size image feeding output index `i` after a
/// nearest-neighbour down-sample to `reduced` samples and up-sample back.
int nearest_source(int i, int dim, int reduced);

/// Down-samples by `scale` and up-samples back, both nearest-neighbour.
ImageBuffer resample_layer(const ImageBuffer& image, double scale);

int band_index(Point pixel, Point center, const AcuityProfile& profile, double d_max);
/// Uses the profile's own d_max, which must be positive.
int band_index(Point pixel, Point center, const AcuityProfile& profile);

/// Per-pixel composite: each pixel is taken from the resampled copy of its band.
ImageBuffer apply_acuity(const ImageBuffer& image, const AcuityProfile& profile);

}  // namespace crowding
