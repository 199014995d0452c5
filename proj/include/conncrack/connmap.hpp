#pragma once

#include "conncrack/image.hpp"
#include "conncrack/nn/tensor.hpp"

#include <array>
#include <filesystem>
#include <string>

namespace conncrack::connmap {

inline constexpr std::size_t kDirections = 8;

/// Direction k (0-based) as a (row, col) offset. Order: NW, W, SW, N, S,
/// NE, E, SE, so the second map pairs each pixel with its left neighbour.
struct Offset {
    int dy;
    int dx;
};
inline constexpr std::array<Offset, kDirections> kOffsets{{
    {-1, -1}, {0, -1}, {1, -1}, {-1, 0}, {1, 0}, {-1, 1}, {0, 1}, {1, 1},
}};
inline constexpr std::array<const char*, kDirections> kDirectionNames{
    "NW", "W", "SW", "N", "S", "NE", "E", "SE"};

/// Index of the direction pointing the other way.
constexpr std::size_t opposite(std::size_t k) { return kDirections - 1 - k; }

/// 8 x H x W stack of values in [0, 1].
class ConnectivityMaps {
public:
    ConnectivityMaps() = default;
    ConnectivityMaps(std::size_t height, std::size_t width)
        : h_(height), w_(width), v_(kDirections * height * width, 0.0f) {}
    /// Accepts 8 x H x W or 1 x 8 x H x W; values are clamped-checked.
    explicit ConnectivityMaps(const nn::Tensor<float>& t);

    std::size_t height() const noexcept { return h_; }
    std::size_t width() const noexcept { return w_; }

    float operator()(std::size_t k, std::size_t y, std::size_t x) const noexcept {
        return v_[(k * h_ + y) * w_ + x];
    }
    float& operator()(std::size_t k, std::size_t y, std::size_t x) noexcept {
        return v_[(k * h_ + y) * w_ + x];
    }
    /// Out-of-bounds reads as 0.
    float get(std::size_t k, long y, long x) const noexcept {
        if (y < 0 || x < 0 || y >= static_cast<long>(h_) || x >= static_cast<long>(w_)) return 0.0f;
        return v_[(k * h_ + static_cast<std::size_t>(y)) * w_ + static_cast<std::size_t>(x)];
    }

    const std::vector<float>& values() const noexcept { return v_; }
    std::vector<float>& values() noexcept { return v_; }

    /// 1 x 8 x H x W tensor.
    nn::Tensor<float> to_tensor() const;

    bool operator==(const ConnectivityMaps&) const = default;

private:
    std::size_t h_ = 0, w_ = 0;
    std::vector<float> v_;
};

/// A_k(p) = 1 iff mask(p) = 1 and mask(p + offset_k) = 1 (outside = 0).
ConnectivityMaps encode(const BinaryMask& mask);

struct DecodeOptions {
    float tau = 0.5f;
    /// Require both directions of a link: min(A_k(p), A_opp(k)(p + offset_k)).
    bool reciprocal = false;
};

/// mask(p) = 1 iff max_k A_k(p) >= tau.
BinaryMask decode(const ConnectivityMaps& maps, const DecodeOptions& opt = {});

/// Crack pixels with no crack 8-neighbour; they have no representation in
/// the maps.
BinaryMask remove_isolated(const BinaryMask& mask);

enum class Reduction { Mean, Sum };

template <typename T>
struct LossValue {
    double value = 0.0;
    nn::Tensor<T> gradient;
};

/// Binary cross-entropy between sigmoid(logits) and the target maps,
/// evaluated in the overflow-free logits form. Mean divides value and
/// gradient by the element count. Shapes must match.
template <typename T>
LossValue<T> content_loss(const nn::Tensor<T>& logits, const nn::Tensor<T>& target,
                          Reduction reduction = Reduction::Mean);

/// Same loss over probabilities, clamped to [1e-7, 1 - 1e-7]; gradient is
/// with respect to the probabilities.
template <typename T>
LossValue<T> content_loss_probs(const nn::Tensor<T>& probs, const nn::Tensor<T>& target,
                                Reduction reduction = Reduction::Mean);

/// "CMAP1" | u32 8 | u32 H | u32 W | f32 payload (little-endian).
std::string encode_cmap(const ConnectivityMaps& maps);
ConnectivityMaps decode_cmap(const std::string& bytes);
void save_cmap(const ConnectivityMaps& maps, const std::filesystem::path& path);
ConnectivityMaps load_cmap(const std::filesystem::path& path);

/// Map k scaled to 0..255 as a gray image.
Image map_to_image(const ConnectivityMaps& maps, std::size_t k);

} // namespace conncrack::connmap
