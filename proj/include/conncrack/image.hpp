#pragma once

#include "conncrack/error.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace conncrack {

/// 8-bit image, channels interleaved row-major (1 = gray, 3 = RGB).
struct Image {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t channels = 0;
    std::vector<std::uint8_t> pixels;

    Image() = default;
    Image(std::size_t w, std::size_t h, std::size_t c, std::uint8_t fill = 0)
        : width(w), height(h), channels(c), pixels(w * h * c, fill) {}

    std::uint8_t& at(std::size_t y, std::size_t x, std::size_t ch = 0) {
        return pixels[(y * width + x) * channels + ch];
    }
    std::uint8_t at(std::size_t y, std::size_t x, std::size_t ch = 0) const {
        return pixels[(y * width + x) * channels + ch];
    }

    bool operator==(const Image&) const = default;
};

/// H x W crack mask with entries in {0, 1}.
class BinaryMask {
public:
    BinaryMask() = default;
    BinaryMask(std::size_t height, std::size_t width) : h_(height), w_(width), v_(height * width, 0) {}
    /// Throws DimensionError on a length mismatch and ConfigError if an entry
    /// is neither 0 nor 1.
    BinaryMask(std::size_t height, std::size_t width, std::vector<std::uint8_t> values);

    std::size_t height() const noexcept { return h_; }
    std::size_t width() const noexcept { return w_; }
    std::size_t size() const noexcept { return v_.size(); }

    std::uint8_t operator()(std::size_t y, std::size_t x) const noexcept { return v_[y * w_ + x]; }
    void set(std::size_t y, std::size_t x, bool on) noexcept { v_[y * w_ + x] = on ? 1 : 0; }
    /// Out-of-bounds reads as 0.
    std::uint8_t get(long y, long x) const noexcept {
        if (y < 0 || x < 0 || y >= static_cast<long>(h_) || x >= static_cast<long>(w_)) return 0;
        return v_[static_cast<std::size_t>(y) * w_ + static_cast<std::size_t>(x)];
    }

    const std::vector<std::uint8_t>& values() const noexcept { return v_; }
    std::size_t count() const noexcept;

    BinaryMask crop(std::size_t y0, std::size_t x0, std::size_t h, std::size_t w) const;

    bool operator==(const BinaryMask&) const = default;

private:
    std::size_t h_ = 0, w_ = 0;
    std::vector<std::uint8_t> v_;
};

/// A pixel with any nonzero channel counts as crack.
BinaryMask mask_from_image(const Image& img);
/// 0 -> 0, 1 -> 255, single channel.
Image mask_to_image(const BinaryMask& mask);

/// Luminance 0.299 R + 0.587 G + 0.114 B (gray images pass through), in [0, 255].
std::vector<float> to_luminance(const Image& img);

} // namespace conncrack
