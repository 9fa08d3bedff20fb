#pragma once

#include <filesystem>

#include "crowding/image.hpp"

namespace crowding {

/// Decodes PNG or JPEG (chosen by file signature) into RGB. Throws DataError.
ImageBuffer read_image(const std::filesystem::path& path);

/// Writes an 8-bit RGB PNG. Output bytes depend only on the pixels.
void write_png(const ImageBuffer& image, const std::filesystem::path& path);

}  // namespace crowding
