#pragma once

#include "conncrack/connmap.hpp"
#include "conncrack/image.hpp"
#include "conncrack/models.hpp"

#include <string>
#include <utility>
#include <vector>

namespace conncrack::inference {

struct TilePlan {
    std::size_t height = 0, width = 0;          // original image
    std::size_t patch_size = 0;
    std::size_t overlap = 0;
    std::size_t stride = 0;                     // patch_size - overlap
    std::size_t padded_height = 0, padded_width = 0;
    std::size_t rows = 0, cols = 0;
    std::vector<std::pair<std::size_t, std::size_t>> origins;  // (row, col), row-major

    std::size_t tile_count() const { return origins.size(); }
};

/// Padded extent per axis: patch when the image fits, otherwise
/// ceil((extent - patch) / stride) * stride + patch. Bottom and right
/// margins are filled by reflection.
TilePlan plan_tiles(std::size_t height, std::size_t width, std::size_t patch_size, std::size_t overlap = 0);

/// Source index for padded coordinate `i` on an axis of length `n`
/// (mirror without repeating the edge, applied as often as needed).
std::size_t reflect_index(std::size_t i, std::size_t n);

std::vector<Image> split_image(const Image& image, const TilePlan& plan);
std::vector<connmap::ConnectivityMaps> split_maps(const connmap::ConnectivityMaps& maps, const TilePlan& plan);

/// Average overlapping tiles in plan order and crop to the original extent.
connmap::ConnectivityMaps stitch(const std::vector<connmap::ConnectivityMaps>& tiles, const TilePlan& plan);

/// 8-connected components of a mask.
struct ComponentSet {
    std::size_t height = 0, width = 0;
    /// Linear pixel indices per component, in discovery order. Components
    /// are labelled in row-major order of their first pixel.
    std::vector<std::vector<std::size_t>> components;

    std::size_t size() const { return components.size(); }
    std::size_t area(std::size_t i) const { return components[i].size(); }
    /// Per-pixel label: 0 for background, component index + 1 otherwise.
    std::vector<std::size_t> labels() const;
};

/// Depth-first search with an explicit stack.
ComponentSet dfs_components(const BinaryMask& mask);

/// Keep components with area >= min_area.
BinaryMask area_filter(const ComponentSet& components, std::size_t min_area);

struct DetectParams {
    std::size_t patch_size = 256;
    std::size_t overlap = 0;
    float tau = 0.5f;
    std::size_t min_area = 200;
    bool reciprocal = false;
    /// Worker threads for tile forwards; 0 reads CONNCRACK_THREADS (default 1).
    std::size_t threads = 0;
};

struct DetectResult {
    BinaryMask mask;
    connmap::ConnectivityMaps maps;     // stitched generator output
    TilePlan plan;
    std::size_t components_before = 0;
    std::size_t components_kept = 0;
    std::vector<std::size_t> kept_areas;
};

/// plan_tiles -> generator forward per tile -> stitch -> decode(tau) ->
/// dfs_components -> area_filter. The result does not depend on the
/// thread count.
DetectResult detect(const Image& image, models::Generator<float>& generator, const DetectParams& params);
DetectResult detect(const Image& image, const nn::Checkpoint& generator_checkpoint, const DetectParams& params);

/// Thread cap from CONNCRACK_THREADS (>= 1; unset or invalid gives 1).
std::size_t thread_cap();

} // namespace conncrack::inference
