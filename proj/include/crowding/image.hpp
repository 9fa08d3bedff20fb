#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace crowding {

struct Canvas {
    int width = 224;
    int height = 224;

    friend bool operator==(const Canvas&, const Canvas&) = default;
};

struct Point {
    int x = 0;
    int y = 0;

    friend bool operator==(const Point&, const Point&) = default;
};

/// Row-major interleaved 8-bit RGB image.
class ImageBuffer {
public:
    static constexpr int kChannels = 3;

    ImageBuffer() = default;
    ImageBuffer(int width, int height, std::uint8_t fill = 0)
        : width_(width), height_(height),
          data_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * kChannels, fill) {}
    ImageBuffer(Canvas canvas, std::uint8_t fill = 0) : ImageBuffer(canvas.width, canvas.height, fill) {}

    int width() const { return width_; }
    int height() const { return height_; }
    int channels() const { return kChannels; }
    Canvas canvas() const { return {width_, height_}; }
    bool empty() const { return data_.empty(); }

    std::uint8_t& at(int x, int y, int c) { return data_[index(x, y, c)]; }
    std::uint8_t at(int x, int y, int c) const { return data_[index(x, y, c)]; }

    /// Writes the same value to all channels.
    void set_grey(int x, int y, std::uint8_t v) {
        const std::size_t i = index(x, y, 0);
        data_[i] = data_[i + 1] = data_[i + 2] = v;
    }

    std::span<std::uint8_t> data() { return data_; }
    std::span<const std::uint8_t> data() const { return data_; }
    std::span<const std::uint8_t> pixel(int x, int y) const { return {data_.data() + index(x, y, 0), 3}; }

    friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;

private:
    std::size_t index(int x, int y, int c) const {
        return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)) *
                   kChannels +
               static_cast<std::size_t>(c);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> data_;
};

}  // namespace crowding
