#include "conncrack/inference.hpp"

#include "conncrack/nn/checkpoint.hpp"

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

namespace conncrack::inference {

namespace {

std::size_t padded_extent(std::size_t n, std::size_t patch, std::size_t stride) {
    if (n <= patch) return patch;
    return (n - patch + stride - 1) / stride * stride + patch;
}

} // namespace

TilePlan plan_tiles(std::size_t height, std::size_t width, std::size_t patch_size, std::size_t overlap) {
    if (patch_size < 8) throw ConfigError("patch size must be at least 8, got " + std::to_string(patch_size));
    if (overlap >= patch_size)
        throw ConfigError("overlap " + std::to_string(overlap) + " must be smaller than the patch size");
    if (height == 0 || width == 0) throw DimensionError("cannot tile an empty image");
    TilePlan p;
    p.height = height;
    p.width = width;
    p.patch_size = patch_size;
    p.overlap = overlap;
    p.stride = patch_size - overlap;
    p.padded_height = padded_extent(height, patch_size, p.stride);
    p.padded_width = padded_extent(width, patch_size, p.stride);
    p.rows = (p.padded_height - patch_size) / p.stride + 1;
    p.cols = (p.padded_width - patch_size) / p.stride + 1;
    for (std::size_t r = 0; r < p.rows; ++r)
        for (std::size_t c = 0; c < p.cols; ++c) p.origins.emplace_back(r * p.stride, c * p.stride);
    return p;
}

std::size_t reflect_index(std::size_t i, std::size_t n) {
    if (n == 1) return 0;
    const std::size_t period = 2 * (n - 1);
    const std::size_t m = i % period;
    return m < n ? m : period - m;
}

std::vector<Image> split_image(const Image& image, const TilePlan& plan) {
    if (image.height != plan.height || image.width != plan.width)
        throw DimensionError("image does not match the tile plan");
    const std::size_t p = plan.patch_size, C = image.channels;
    std::vector<Image> tiles;
    tiles.reserve(plan.tile_count());
    for (const auto& [oy, ox] : plan.origins) {
        Image t(p, p, C);
        for (std::size_t y = 0; y < p; ++y) {
            const std::size_t sy = reflect_index(oy + y, image.height);
            for (std::size_t x = 0; x < p; ++x) {
                const std::size_t sx = reflect_index(ox + x, image.width);
                for (std::size_t c = 0; c < C; ++c) t.at(y, x, c) = image.at(sy, sx, c);
            }
        }
        tiles.push_back(std::move(t));
    }
    return tiles;
}

std::vector<connmap::ConnectivityMaps> split_maps(const connmap::ConnectivityMaps& maps, const TilePlan& plan) {
    if (maps.height() != plan.height || maps.width() != plan.width)
        throw DimensionError("maps do not match the tile plan");
    const std::size_t p = plan.patch_size;
    std::vector<connmap::ConnectivityMaps> tiles;
    tiles.reserve(plan.tile_count());
    for (const auto& [oy, ox] : plan.origins) {
        connmap::ConnectivityMaps t(p, p);
        for (std::size_t k = 0; k < connmap::kDirections; ++k)
            for (std::size_t y = 0; y < p; ++y)
                for (std::size_t x = 0; x < p; ++x)
                    t(k, y, x) = maps(k, reflect_index(oy + y, plan.height), reflect_index(ox + x, plan.width));
        tiles.push_back(std::move(t));
    }
    return tiles;
}

connmap::ConnectivityMaps stitch(const std::vector<connmap::ConnectivityMaps>& tiles, const TilePlan& plan) {
    if (tiles.size() != plan.tile_count())
        throw DimensionError("stitch: expected " + std::to_string(plan.tile_count()) + " tiles, got " +
                             std::to_string(tiles.size()));
    const std::size_t p = plan.patch_size, H = plan.height, W = plan.width;
    std::vector<double> sum(connmap::kDirections * H * W, 0.0);
    std::vector<std::uint32_t> count(H * W, 0);
    for (std::size_t t = 0; t < tiles.size(); ++t) {
        const auto& tile = tiles[t];
        if (tile.height() != p || tile.width() != p)
            throw DimensionError("stitch: tile " + std::to_string(t) + " is not " + std::to_string(p) + "x" +
                                 std::to_string(p));
        const auto [oy, ox] = plan.origins[t];
        // Only the part inside the original image contributes.
        const std::size_t hy = oy < H ? std::min(p, H - oy) : 0, wx = ox < W ? std::min(p, W - ox) : 0;
        for (std::size_t y = 0; y < hy; ++y)
            for (std::size_t x = 0; x < wx; ++x) {
                ++count[(oy + y) * W + ox + x];
                for (std::size_t k = 0; k < connmap::kDirections; ++k)
                    sum[(k * H + oy + y) * W + ox + x] += static_cast<double>(tile(k, y, x));
            }
    }
    connmap::ConnectivityMaps out(H, W);
    for (std::size_t k = 0; k < connmap::kDirections; ++k)
        for (std::size_t i = 0; i < H * W; ++i)
            out.values()[k * H * W + i] = static_cast<float>(sum[k * H * W + i] / static_cast<double>(count[i]));
    return out;
}

// ---------------------------------------------------------------------------

std::vector<std::size_t> ComponentSet::labels() const {
    std::vector<std::size_t> out(height * width, 0);
    for (std::size_t c = 0; c < components.size(); ++c)
        for (auto i : components[c]) out[i] = c + 1;
    return out;
}

ComponentSet dfs_components(const BinaryMask& mask) {
    ComponentSet set;
    set.height = mask.height();
    set.width = mask.width();
    const std::size_t H = mask.height(), W = mask.width();
    std::vector<std::uint8_t> seen(H * W, 0);
    std::vector<std::size_t> stack;
    for (std::size_t start = 0; start < H * W; ++start) {
        if (!mask.values()[start] || seen[start]) continue;
        std::vector<std::size_t> comp;
        seen[start] = 1;
        stack.push_back(start);
        while (!stack.empty()) {
            const std::size_t i = stack.back();
            stack.pop_back();
            comp.push_back(i);
            const long y = static_cast<long>(i / W), x = static_cast<long>(i % W);
            for (long dy = -1; dy <= 1; ++dy)
                for (long dx = -1; dx <= 1; ++dx) {
                    if (!mask.get(y + dy, x + dx)) continue;
                    const std::size_t j = static_cast<std::size_t>(y + dy) * W + static_cast<std::size_t>(x + dx);
                    if (seen[j]) continue;
                    seen[j] = 1;
                    stack.push_back(j);
                }
        }
        set.components.push_back(std::move(comp));
    }
    return set;
}

BinaryMask area_filter(const ComponentSet& components, std::size_t min_area) {
    BinaryMask out(components.height, components.width);
    for (const auto& comp : components.components)
        if (comp.size() >= min_area)
            for (auto i : comp) out.set(i / components.width, i % components.width, true);
    return out;
}

// ---------------------------------------------------------------------------

std::size_t thread_cap() {
    const char* env = std::getenv("CONNCRACK_THREADS");
    if (!env || !*env) return 1;
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*end != '\0' || v < 1) return 1;
    return static_cast<std::size_t>(std::min(v, 256L));
}

namespace {

nn::Tensor<float> tile_input(const Image& tile, std::size_t channels) {
    if (tile.channels != 1 && tile.channels != 3) throw DimensionError("images must have 1 or 3 channels");
    if (channels != 1 && channels != 3) throw ConfigError("generator must take 1 or 3 input channels");
    const std::size_t H = tile.height, W = tile.width;
    nn::Tensor<float> t({1, channels, H, W});
    for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t y = 0; y < H; ++y)
            for (std::size_t x = 0; x < W; ++x) {
                float v;
                if (tile.channels == channels) {
                    v = tile.at(y, x, c);
                } else if (tile.channels == 1) {
                    v = tile.at(y, x, 0);
                } else {
                    v = 0.299f * tile.at(y, x, 0) + 0.587f * tile.at(y, x, 1) + 0.114f * tile.at(y, x, 2);
                }
                t.at(0, c, y, x) = v / 127.5f - 1.0f;
            }
    return t;
}

} // namespace

DetectResult detect(const Image& image, models::Generator<float>& generator, const DetectParams& params) {
    if (params.patch_size % 32 != 0)
        throw ConfigError("detection patch size must be a multiple of 32, got " + std::to_string(params.patch_size));
    if (!(params.tau > 0.0f && params.tau < 1.0f)) throw ConfigError("tau must lie in (0, 1)");

    DetectResult res;
    res.plan = plan_tiles(image.height, image.width, params.patch_size, params.overlap);
    const auto tiles = split_image(image, res.plan);
    const std::size_t n = tiles.size();
    const std::size_t in_channels = generator.config().in_channels;
    std::vector<connmap::ConnectivityMaps> outputs(n);

    auto run = [&](models::Generator<float>& g, std::size_t i) {
        outputs[i] = connmap::ConnectivityMaps(g.forward(tile_input(tiles[i], in_channels)));
    };

    const std::size_t threads = std::min(params.threads ? params.threads : thread_cap(), n);
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) run(generator, i);
    } else {
        // Forward passes cache activations, so every worker gets its own copy.
        const nn::Checkpoint weights = nn::snapshot(generator.parameters());
        std::vector<std::thread> pool;
        std::exception_ptr failure;
        std::mutex failure_lock;
        for (std::size_t w = 0; w < threads; ++w)
            pool.emplace_back([&, w] {
                try {
                    models::Generator<float> g(generator.config(), 0);
                    nn::restore(weights, g.parameters());
                    for (std::size_t i = w; i < n; i += threads) run(g, i);
                } catch (...) {
                    std::lock_guard lock(failure_lock);
                    if (!failure) failure = std::current_exception();
                }
            });
        for (auto& t : pool) t.join();
        if (failure) std::rethrow_exception(failure);
    }

    res.maps = stitch(outputs, res.plan);
    const BinaryMask raw = connmap::decode(res.maps, {params.tau, params.reciprocal});
    const ComponentSet comps = dfs_components(raw);
    res.components_before = comps.size();
    res.mask = area_filter(comps, params.min_area);
    for (std::size_t c = 0; c < comps.size(); ++c)
        if (comps.area(c) >= params.min_area) res.kept_areas.push_back(comps.area(c));
    res.components_kept = res.kept_areas.size();
    return res;
}

DetectResult detect(const Image& image, const nn::Checkpoint& generator_checkpoint, const DetectParams& params) {
    auto g = models::load_generator(generator_checkpoint);
    return detect(image, *g, params);
}

} // namespace conncrack::inference
