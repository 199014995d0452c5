#include "conncrack/image.hpp"

#include <numeric>

namespace conncrack {

BinaryMask::BinaryMask(std::size_t height, std::size_t width, std::vector<std::uint8_t> values)
    : h_(height), w_(width), v_(std::move(values)) {
    if (v_.size() != h_ * w_)
        throw DimensionError("mask data length " + std::to_string(v_.size()) + " does not match " +
                             std::to_string(h_) + "x" + std::to_string(w_));
    for (auto v : v_)
        if (v > 1) throw ConfigError("mask entries must be 0 or 1");
}

std::size_t BinaryMask::count() const noexcept {
    return static_cast<std::size_t>(std::accumulate(v_.begin(), v_.end(), std::size_t{0}));
}

BinaryMask BinaryMask::crop(std::size_t y0, std::size_t x0, std::size_t h, std::size_t w) const {
    if (y0 + h > h_ || x0 + w > w_) throw DimensionError("mask crop out of bounds");
    BinaryMask out(h, w);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) out.v_[y * w + x] = v_[(y0 + y) * w_ + x0 + x];
    return out;
}

BinaryMask mask_from_image(const Image& img) {
    BinaryMask m(img.height, img.width);
    for (std::size_t y = 0; y < img.height; ++y)
        for (std::size_t x = 0; x < img.width; ++x) {
            bool on = false;
            for (std::size_t c = 0; c < img.channels; ++c) on = on || img.at(y, x, c) != 0;
            m.set(y, x, on);
        }
    return m;
}

Image mask_to_image(const BinaryMask& mask) {
    Image img(mask.width(), mask.height(), 1);
    for (std::size_t i = 0; i < mask.size(); ++i) img.pixels[i] = mask.values()[i] ? 255 : 0;
    return img;
}

std::vector<float> to_luminance(const Image& img) {
    std::vector<float> lum(img.width * img.height);
    for (std::size_t i = 0; i < lum.size(); ++i) {
        const std::uint8_t* p = img.pixels.data() + i * img.channels;
        lum[i] = img.channels >= 3 ? 0.299f * p[0] + 0.587f * p[1] + 0.114f * p[2]
                                   : static_cast<float>(p[0]);
    }
    return lum;
}

} // namespace conncrack
