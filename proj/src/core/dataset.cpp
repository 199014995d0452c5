#include "conncrack/dataset.hpp"

#include "conncrack/image_io.hpp"
#include "conncrack/io_util.hpp"
#include "conncrack/rng.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace conncrack::dataset {

const char* to_string(Split s) {
    switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
    }
    return "train";
}

Split parse_split(const std::string& s) {
    if (s == "train") return Split::Train;
    if (s == "val") return Split::Val;
    if (s == "test") return Split::Test;
    throw FormatError("unknown split tag '" + s + "'");
}

std::vector<ManifestEntry> DatasetManifest::select(Split s) const {
    std::vector<ManifestEntry> out;
    for (const auto& e : entries)
        if (e.split == s) out.push_back(e);
    return out;
}

DatasetManifest split_manifest(const std::vector<std::pair<std::string, std::string>>& items,
                               std::array<double, 3> ratios, std::uint64_t seed) {
    if (items.empty()) throw ConfigError("cannot split an empty item list");
    for (double r : ratios)
        if (!(r >= 0.0)) throw ConfigError("split ratios must be non-negative");
    if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9)
        throw ConfigError("split ratios must sum to 1");

    const std::size_t n = items.size();
    const auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratios[1]));
    const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratios[2]));
    if (n_val + n_test > n) throw ConfigError("split ratios leave no room for the training set");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(order);

    DatasetManifest m;
    m.seed = seed;
    m.entries.resize(n);
    for (std::size_t rank = 0; rank < n; ++rank) {
        const std::size_t i = order[rank];
        const Split s = rank < n_val ? Split::Val : rank < n_val + n_test ? Split::Test : Split::Train;
        m.entries[i] = {items[i].first, items[i].second, s};
    }
    return m;
}

std::string encode_manifest(const DatasetManifest& m) {
    std::string out;
    for (const auto& e : m.entries) {
        nlohmann::json j{{"image", e.image}, {"mask", e.mask}, {"split", to_string(e.split)}};
        out += j.dump() + "\n";
    }
    return out;
}

DatasetManifest decode_manifest(const std::string& text) {
    DatasetManifest m;
    std::istringstream in(text);
    std::string line;
    std::size_t offset = 0;
    while (std::getline(in, line)) {
        const std::size_t line_start = offset;
        offset += line.size() + 1;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            m.entries.push_back({j.at("image").get<std::string>(), j.at("mask").get<std::string>(),
                                 parse_split(j.at("split").get<std::string>())});
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(std::string("bad manifest line: ") + e.what(), static_cast<long long>(line_start));
        } catch (const FormatError& e) {
            throw FormatError(std::string("bad manifest line: ") + e.what(), static_cast<long long>(line_start));
        }
    }
    return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
    DatasetManifest m;
    try {
        m = decode_manifest(io::read_file(path));
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    const auto base = path.parent_path();
    for (auto& e : m.entries) {
        if (std::filesystem::path(e.image).is_relative()) e.image = (base / e.image).string();
        if (std::filesystem::path(e.mask).is_relative()) e.mask = (base / e.mask).string();
        if (!std::filesystem::exists(e.image)) throw IoError("manifest image not found: " + e.image);
        if (!std::filesystem::exists(e.mask)) throw IoError("manifest mask not found: " + e.mask);
    }
    return m;
}

void save_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
    io::write_file_atomic(path, encode_manifest(m));
}

// ---------------------------------------------------------------------------

void SynthSpec::validate() const {
    if (width < 8 || height < 8) throw ConfigError("synth: image must be at least 8 x 8");
    if (crack_count_min > crack_count_max) throw ConfigError("synth: empty crack count range");
    if (length_min < 2 || length_min > length_max)
        throw ConfigError("synth: crack length range must be non-empty with minimum >= 2");
    if (length_min > std::min(width, height))
        throw ConfigError("synth: minimum crack length exceeds the image");
    if (thickness_min < 1 || thickness_min > thickness_max)
        throw ConfigError("synth: thickness range must be non-empty with minimum >= 1");
    if (thickness_max > std::min(width, height)) throw ConfigError("synth: cracks thicker than the image");
    if (!(contrast_min >= 0.0 && contrast_min <= contrast_max && contrast_max <= 1.0))
        throw ConfigError("synth: contrast range must lie in [0, 1]");
    if (!(turn_probability >= 0.0 && turn_probability <= 1.0) ||
        !(blotch_probability >= 0.0 && blotch_probability <= 1.0))
        throw ConfigError("synth: probabilities must lie in [0, 1]");
    if (!(texture_amplitude >= 0.0) || !(grain_sigma >= 0.0))
        throw ConfigError("synth: texture amplitude and grain must be non-negative");
    if (!(aggregate_density >= 0.0 && aggregate_density <= 1.0) || !(aggregate_contrast >= 0.0 && aggregate_contrast <= 1.0))
        throw ConfigError("synth: aggregate density and contrast must lie in [0, 1]");
}

std::size_t SynthSpec::min_mask_pixels() const {
    return crack_count_min == 0 ? 0 : length_min * thickness_min;
}

std::size_t SynthSpec::max_mask_pixels() const {
    return crack_count_max * std::min(length_max, std::max(width, height)) * thickness_max;
}

namespace {

// Smooth value noise on a `cell`-pixel lattice, values in [-1, 1].
std::vector<double> value_noise(std::size_t w, std::size_t h, double cell, Rng& rng) {
    const std::size_t gw = static_cast<std::size_t>(std::ceil(static_cast<double>(w) / cell)) + 2;
    const std::size_t gh = static_cast<std::size_t>(std::ceil(static_cast<double>(h) / cell)) + 2;
    std::vector<double> grid(gw * gh);
    for (auto& g : grid) g = rng.uniform(-1.0, 1.0);
    auto smooth = [](double t) { return t * t * (3.0 - 2.0 * t); };
    std::vector<double> out(w * h);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            const double fx = static_cast<double>(x) / cell, fy = static_cast<double>(y) / cell;
            const auto ix = static_cast<std::size_t>(fx), iy = static_cast<std::size_t>(fy);
            const double tx = smooth(fx - static_cast<double>(ix)), ty = smooth(fy - static_cast<double>(iy));
            const double a = grid[iy * gw + ix], b = grid[iy * gw + ix + 1];
            const double c = grid[(iy + 1) * gw + ix], d = grid[(iy + 1) * gw + ix + 1];
            out[y * w + x] = (a * (1 - tx) + b * tx) * (1 - ty) + (c * (1 - tx) + d * tx) * ty;
        }
    return out;
}

} // namespace

SynthSample synth_sample(const SynthSpec& spec, std::uint64_t index) {
    spec.validate();
    Rng rng(Rng::mix(spec.seed, index));
    const std::size_t W = spec.width, H = spec.height;

    // Background: base level, two octaves of texture, grain.
    std::vector<double> lum(W * H, rng.uniform(0.45, 0.7));
    const auto coarse = value_noise(W, H, 16.0, rng);
    const auto fine = value_noise(W, H, 5.0, rng);
    for (std::size_t i = 0; i < lum.size(); ++i)
        lum[i] += spec.texture_amplitude * (coarse[i] + 0.5 * fine[i]);

    // Aggregate: small round stones, mostly darker than the binder.
    const auto n_stones = static_cast<std::size_t>(std::llround(spec.aggregate_density * static_cast<double>(W * H)));
    for (std::size_t i = 0; i < n_stones; ++i) {
        const double cx = rng.uniform(0.0, static_cast<double>(W)), cy = rng.uniform(0.0, static_cast<double>(H));
        const double r = rng.uniform(0.6, 1.8);
        const double sign = rng.bernoulli(0.6) ? -1.0 : 1.0;
        const double factor = 1.0 + sign * spec.aggregate_contrast * rng.uniform(0.5, 1.0);
        const long x0 = static_cast<long>(std::floor(cx - r)), x1 = static_cast<long>(std::ceil(cx + r));
        const long y0 = static_cast<long>(std::floor(cy - r)), y1 = static_cast<long>(std::ceil(cy + r));
        for (long y = std::max(0L, y0); y <= std::min(static_cast<long>(H) - 1, y1); ++y)
            for (long x = std::max(0L, x0); x <= std::min(static_cast<long>(W) - 1, x1); ++x) {
                const double dx = static_cast<double>(x) + 0.5 - cx, dy = static_cast<double>(y) + 0.5 - cy;
                if (dx * dx + dy * dy <= r * r) lum[static_cast<std::size_t>(y) * W + static_cast<std::size_t>(x)] *= factor;
            }
    }

    // Shadows (soft half-planes) and stains (soft ellipses).
    for (int b = 0; b < 3; ++b) {
        if (!rng.bernoulli(spec.blotch_probability)) continue;
        if (rng.bernoulli(0.5)) {
            const double angle = rng.uniform(0.0, 6.283185307179586);
            const double nx = std::cos(angle), ny = std::sin(angle);
            const double cx = rng.uniform(0.0, static_cast<double>(W)), cy = rng.uniform(0.0, static_cast<double>(H));
            const double factor = rng.uniform(0.55, 0.8), soft = rng.uniform(0.5, 2.5);
            for (std::size_t y = 0; y < H; ++y)
                for (std::size_t x = 0; x < W; ++x) {
                    const double s = (static_cast<double>(x) - cx) * nx + (static_cast<double>(y) - cy) * ny;
                    const double t = 1.0 / (1.0 + std::exp(-s / soft));
                    lum[y * W + x] *= 1.0 - (1.0 - factor) * t;
                }
        } else {
            const double cx = rng.uniform(0.0, static_cast<double>(W)), cy = rng.uniform(0.0, static_cast<double>(H));
            const double rx = rng.uniform(3.0, 12.0), ry = rng.uniform(3.0, 12.0);
            const double factor = rng.bernoulli(0.7) ? rng.uniform(0.6, 0.85) : rng.uniform(1.1, 1.3);
            for (std::size_t y = 0; y < H; ++y)
                for (std::size_t x = 0; x < W; ++x) {
                    const double dx = (static_cast<double>(x) - cx) / rx, dy = (static_cast<double>(y) - cy) / ry;
                    const double r = std::sqrt(dx * dx + dy * dy);
                    const double t = 1.0 / (1.0 + std::exp((r - 1.0) * 6.0));
                    lum[y * W + x] *= 1.0 + (factor - 1.0) * t;
                }
        }
    }

    // Cracks: walks that advance one pixel per step along a main axis and
    // drift sideways by -1/0/+1, painted `thickness` pixels wide across it.
    // Every step owns a distinct main-axis coordinate, so a crack covers
    // exactly length * thickness pixels.
    SynthSample out;
    out.mask = BinaryMask(H, W);
    const auto n_cracks = static_cast<std::size_t>(
        rng.uniform_int(static_cast<std::int64_t>(spec.crack_count_min), static_cast<std::int64_t>(spec.crack_count_max)));
    std::vector<double> darken(W * H, 0.0);
    for (std::size_t c = 0; c < n_cracks; ++c) {
        const bool horizontal = rng.bernoulli(0.5);
        const std::size_t main_extent = horizontal ? W : H;
        const std::size_t side_extent = horizontal ? H : W;
        const std::size_t len = static_cast<std::size_t>(rng.uniform_int(
            static_cast<std::int64_t>(spec.length_min),
            static_cast<std::int64_t>(std::min(spec.length_max, main_extent))));
        const std::size_t thick = static_cast<std::size_t>(rng.uniform_int(
            static_cast<std::int64_t>(spec.thickness_min), static_cast<std::int64_t>(spec.thickness_max)));
        const double contrast = rng.uniform(spec.contrast_min, spec.contrast_max);
        const auto start = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(main_extent - len)));
        const long side_max = static_cast<long>(side_extent - thick);
        long side = static_cast<long>(rng.uniform_int(0, side_max));
        long drift = static_cast<long>(rng.uniform_int(-1, 1));

        std::size_t painted = 0;
        for (std::size_t step = 0; step < len; ++step) {
            if (step > 0) {
                if (rng.bernoulli(spec.turn_probability)) drift = static_cast<long>(rng.uniform_int(-1, 1));
                side += drift;
                if (side < 0 || side > side_max) {
                    drift = -drift;
                    side = std::clamp(side + 2 * drift, 0L, side_max);
                }
            }
            for (std::size_t t = 0; t < thick; ++t) {
                const std::size_t m = start + step, s = static_cast<std::size_t>(side) + t;
                const std::size_t y = horizontal ? s : m, x = horizontal ? m : s;
                if (!out.mask(y, x)) out.mask.set(y, x, true);
                // Edges of thick cracks are a little lighter than the core.
                const double edge = (thick > 2 && (t == 0 || t + 1 == thick)) ? 0.75 : 1.0;
                darken[y * W + x] = std::max(darken[y * W + x], contrast * edge * rng.uniform(0.85, 1.0));
                ++painted;
            }
        }
        out.crack_pixels.push_back(painted);
    }
    for (std::size_t i = 0; i < lum.size(); ++i) lum[i] *= 1.0 - darken[i];

    std::array<double, 3> tint{rng.uniform(0.95, 1.05), rng.uniform(0.95, 1.05), rng.uniform(0.95, 1.05)};
    out.image = Image(W, H, 3);
    for (std::size_t i = 0; i < lum.size(); ++i) {
        const double grain = spec.grain_sigma * rng.normal();
        for (std::size_t ch = 0; ch < 3; ++ch) {
            const double v = std::clamp((lum[i] + grain) * tint[ch], 0.0, 1.0);
            out.image.pixels[i * 3 + ch] = static_cast<std::uint8_t>(std::lround(v * 255.0));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

PatchIterator::PatchIterator(std::size_t count, Loader loader, std::size_t patch_size,
                             std::size_t stride, KeepRule keep)
    : count_(count), loader_(std::move(loader)), patch_(patch_size), stride_(stride), keep_(keep) {
    if (patch_size == 0 || stride == 0) throw ConfigError("patch size and stride must be positive");
}

bool PatchIterator::load_next_source() {
    while (source_ < count_) {
        current_ = loader_(source_);
        if (current_.image.height != current_.mask.height() || current_.image.width != current_.mask.width())
            throw DimensionError("image and mask sizes differ for '" + current_.name + "'");
        if (current_.image.height >= patch_ && current_.image.width >= patch_) {
            loaded_ = true;
            y_ = x_ = 0;
            return true;
        }
        ++source_;
    }
    return false;
}

std::optional<PatchSample> PatchIterator::next() {
    for (;;) {
        if (!loaded_ && !load_next_source()) return std::nullopt;
        const Image& img = current_.image;
        if (y_ + patch_ > img.height) {
            loaded_ = false;
            ++source_;
            continue;
        }
        const std::size_t y = y_, x = x_;
        x_ += stride_;
        if (x_ + patch_ > img.width) {
            x_ = 0;
            y_ += stride_;
        }
        PatchSample s;
        s.source = source_;
        s.y = y;
        s.x = x;
        s.mask = current_.mask.crop(y, x, patch_, patch_);
        if (keep_ == KeepRule::CracksOnly && s.mask.count() == 0) continue;
        s.image = Image(patch_, patch_, img.channels);
        for (std::size_t r = 0; r < patch_; ++r)
            std::copy_n(img.pixels.data() + ((y + r) * img.width + x) * img.channels, patch_ * img.channels,
                        s.image.pixels.data() + r * patch_ * img.channels);
        s.maps = connmap::encode(s.mask);
        return s;
    }
}

PatchIterator patch_dataset(const DatasetManifest& manifest, Split split, std::size_t patch_size,
                            std::size_t stride, KeepRule keep) {
    auto entries = manifest.select(split);
    const std::size_t n = entries.size();
    return PatchIterator(
        n,
        [entries = std::move(entries)](std::size_t i) {
            return LabeledImage{entries[i].image, image_io::load_image(entries[i].image),
                                image_io::load_mask(entries[i].mask)};
        },
        patch_size, stride, keep);
}

PatchIterator patch_dataset(std::vector<LabeledImage> images, std::size_t patch_size,
                            std::size_t stride, KeepRule keep) {
    const std::size_t n = images.size();
    return PatchIterator(
        n, [images = std::move(images)](std::size_t i) { return images[i]; }, patch_size, stride, keep);
}

nn::Tensor<float> image_to_tensor(const Image& img) {
    nn::Tensor<float> t({img.channels, img.height, img.width});
    for (std::size_t y = 0; y < img.height; ++y)
        for (std::size_t x = 0; x < img.width; ++x)
            for (std::size_t c = 0; c < img.channels; ++c)
                t[(c * img.height + y) * img.width + x] = static_cast<float>(img.at(y, x, c)) / 127.5f - 1.0f;
    return t;
}

} // namespace conncrack::dataset
