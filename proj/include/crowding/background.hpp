#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "crowding/image.hpp"

namespace crowding {

struct LabeledImage {
    ImageBuffer image;
    int class_id = 0;  ///< 0 or 1, the background class within the pair
    std::string source;
};

/// Centre-crops to the canvas aspect ratio and resamples bilinearly.
ImageBuffer fit_to_canvas(const ImageBuffer& source, Canvas canvas);

/// Loads every decodable PNG/JPEG in the two directories (sorted by filename),
/// labelling dir_a as class 0 and dir_b as class 1. Undecodable files are
/// skipped with a warning on stderr; a directory with nothing usable throws.
std::vector<LabeledImage> load_backgrounds(const std::filesystem::path& dir_a, const std::filesystem::path& dir_b,
                                           Canvas canvas);

/// Seeded procedural texture. Class 0 is built from overlapping rectangles
/// (blocky rubble), class 1 from oriented gratings (striated facades).
ImageBuffer synth_background(int class_id, std::uint64_t seed, Canvas canvas);

ImageBuffer flip_vertical(const ImageBuffer& image);

}  // namespace crowding
