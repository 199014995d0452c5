#include "conncrack/connmap.hpp"

#include "conncrack/io_util.hpp"

#include <algorithm>
#include <cmath>

namespace conncrack::connmap {

ConnectivityMaps::ConnectivityMaps(const nn::Tensor<float>& t) {
    const auto& s = t.shape();
    const bool ok3 = s.size() == 3 && s[0] == kDirections;
    const bool ok4 = s.size() == 4 && s[0] == 1 && s[1] == kDirections;
    if (!ok3 && !ok4)
        throw DimensionError("connectivity maps need an 8 x H x W tensor, got " + nn::shape_string(s));
    h_ = s[s.size() - 2];
    w_ = s[s.size() - 1];
    v_ = t.storage();
    for (float v : v_)
        if (!(v >= 0.0f && v <= 1.0f)) throw ConfigError("connectivity map values must lie in [0, 1]");
}

nn::Tensor<float> ConnectivityMaps::to_tensor() const {
    return nn::Tensor<float>({1, kDirections, h_, w_}, v_);
}

ConnectivityMaps encode(const BinaryMask& mask) {
    ConnectivityMaps maps(mask.height(), mask.width());
    for (std::size_t y = 0; y < mask.height(); ++y)
        for (std::size_t x = 0; x < mask.width(); ++x) {
            if (!mask(y, x)) continue;
            for (std::size_t k = 0; k < kDirections; ++k)
                if (mask.get(static_cast<long>(y) + kOffsets[k].dy, static_cast<long>(x) + kOffsets[k].dx))
                    maps(k, y, x) = 1.0f;
        }
    return maps;
}

BinaryMask decode(const ConnectivityMaps& maps, const DecodeOptions& opt) {
    if (!(opt.tau > 0.0f && opt.tau < 1.0f)) throw ConfigError("decode threshold must lie in (0, 1)");
    BinaryMask mask(maps.height(), maps.width());
    for (std::size_t y = 0; y < maps.height(); ++y)
        for (std::size_t x = 0; x < maps.width(); ++x) {
            float best = 0.0f;
            for (std::size_t k = 0; k < kDirections; ++k) {
                float v = maps(k, y, x);
                if (opt.reciprocal)
                    v = std::min(v, maps.get(opposite(k), static_cast<long>(y) + kOffsets[k].dy,
                                             static_cast<long>(x) + kOffsets[k].dx));
                best = std::max(best, v);
            }
            mask.set(y, x, best >= opt.tau);
        }
    return mask;
}

BinaryMask remove_isolated(const BinaryMask& mask) {
    BinaryMask out = mask;
    for (std::size_t y = 0; y < mask.height(); ++y)
        for (std::size_t x = 0; x < mask.width(); ++x) {
            if (!mask(y, x)) continue;
            bool linked = false;
            for (const auto& o : kOffsets)
                linked = linked || mask.get(static_cast<long>(y) + o.dy, static_cast<long>(x) + o.dx);
            if (!linked) out.set(y, x, false);
        }
    return out;
}

template <typename T>
LossValue<T> content_loss(const nn::Tensor<T>& logits, const nn::Tensor<T>& target,
                          Reduction reduction) {
    logits.require_same_shape(target, "content loss");
    LossValue<T> out{0.0, nn::Tensor<T>(logits.shape())};
    if (logits.empty()) return out;
    const double scale = reduction == Reduction::Mean ? 1.0 / static_cast<double>(logits.size()) : 1.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const double z = static_cast<double>(logits[i]);
        const double y = static_cast<double>(target[i]);
        // -y log s(z) - (1-y) log(1 - s(z)) = max(z,0) - z y + log(1 + e^-|z|)
        sum += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
        const double s = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
        out.gradient[i] = static_cast<T>((s - y) * scale);
    }
    out.value = sum * scale;
    return out;
}

template <typename T>
LossValue<T> content_loss_probs(const nn::Tensor<T>& probs, const nn::Tensor<T>& target,
                                Reduction reduction) {
    probs.require_same_shape(target, "content loss");
    LossValue<T> out{0.0, nn::Tensor<T>(probs.shape())};
    if (probs.empty()) return out;
    constexpr double lo = 1e-7, hi = 1.0 - 1e-7;
    const double scale = reduction == Reduction::Mean ? 1.0 / static_cast<double>(probs.size()) : 1.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const double raw = static_cast<double>(probs[i]);
        const double p = std::clamp(raw, lo, hi);
        const double y = static_cast<double>(target[i]);
        sum += -y * std::log(p) - (1.0 - y) * std::log(1.0 - p);
        const bool clamped = raw < lo || raw > hi;
        out.gradient[i] = clamped ? T{0} : static_cast<T>((-y / p + (1.0 - y) / (1.0 - p)) * scale);
    }
    out.value = sum * scale;
    return out;
}

template LossValue<float> content_loss(const nn::Tensor<float>&, const nn::Tensor<float>&, Reduction);
template LossValue<double> content_loss(const nn::Tensor<double>&, const nn::Tensor<double>&, Reduction);
template LossValue<float> content_loss_probs(const nn::Tensor<float>&, const nn::Tensor<float>&, Reduction);
template LossValue<double> content_loss_probs(const nn::Tensor<double>&, const nn::Tensor<double>&, Reduction);

namespace {
constexpr char kCmapMagic[] = "CMAP1";
}

std::string encode_cmap(const ConnectivityMaps& maps) {
    io::ByteWriter w;
    w.bytes(kCmapMagic, 5);
    w.u32(kDirections);
    w.u32(static_cast<std::uint32_t>(maps.height()));
    w.u32(static_cast<std::uint32_t>(maps.width()));
    for (float v : maps.values()) w.f32(v);
    return std::move(w).take();
}

ConnectivityMaps decode_cmap(const std::string& bytes) {
    io::ByteReader r(bytes);
    if (r.bytes(5) != std::string(kCmapMagic, 5)) throw FormatError("not a CMAP1 file", 0);
    const std::uint32_t k = r.u32();
    if (k != kDirections) throw FormatError("CMAP1 expects 8 maps, found " + std::to_string(k), 5);
    const std::size_t h = r.u32(), w = r.u32();
    if (h * w > r.remaining() / 4 / kDirections || h * w * kDirections * 4 != r.remaining())
        throw FormatError("CMAP1 payload length does not match dimensions",
                          static_cast<long long>(r.offset()));
    ConnectivityMaps maps(h, w);
    for (auto& v : maps.values()) {
        v = r.f32();
        if (!(v >= 0.0f && v <= 1.0f))
            throw FormatError("CMAP1 value outside [0, 1]", static_cast<long long>(r.offset()) - 4);
    }
    return maps;
}

void save_cmap(const ConnectivityMaps& maps, const std::filesystem::path& path) {
    io::write_file_atomic(path, encode_cmap(maps));
}

ConnectivityMaps load_cmap(const std::filesystem::path& path) {
    return decode_cmap(io::read_file(path));
}

Image map_to_image(const ConnectivityMaps& maps, std::size_t k) {
    if (k >= kDirections) throw ConfigError("map index out of range");
    Image img(maps.width(), maps.height(), 1);
    for (std::size_t y = 0; y < maps.height(); ++y)
        for (std::size_t x = 0; x < maps.width(); ++x)
            img.at(y, x) = static_cast<std::uint8_t>(std::lround(std::clamp(maps(k, y, x), 0.0f, 1.0f) * 255.0f));
    return img;
}

} // namespace conncrack::connmap
