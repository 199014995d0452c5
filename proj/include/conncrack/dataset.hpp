#pragma once

#include "conncrack/connmap.hpp"
#include "conncrack/image.hpp"
#include "conncrack/nn/tensor.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace conncrack::dataset {

enum class Split { Train, Val, Test };

const char* to_string(Split s);
Split parse_split(const std::string& s);

struct ManifestEntry {
    std::string image;
    std::string mask;
    Split split = Split::Train;

    bool operator==(const ManifestEntry&) const = default;
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;
    std::uint64_t seed = 0;

    std::vector<ManifestEntry> select(Split s) const;
};

/// Shuffle `items` (image, mask) with `seed` and cut it into train/val/test.
/// Val and test counts are round(n * ratio); train takes the remainder.
DatasetManifest split_manifest(const std::vector<std::pair<std::string, std::string>>& items,
                               std::array<double, 3> ratios = {0.70, 0.10, 0.20},
                               std::uint64_t seed = 0);

/// JSON lines, one {"image", "mask", "split"} object per line.
std::string encode_manifest(const DatasetManifest& m);
DatasetManifest decode_manifest(const std::string& text);
/// Relative paths in the file are resolved against its directory.
DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& m, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Synthetic cracked-pavement images

struct SynthSpec {
    std::size_t width = 64;
    std::size_t height = 64;
    std::size_t crack_count_min = 1;
    std::size_t crack_count_max = 2;
    /// Crack length in pixels along its main axis.
    std::size_t length_min = 24;
    std::size_t length_max = 64;
    /// Probability per step of re-drawing the sideways drift (-1, 0, +1).
    double turn_probability = 0.3;
    std::size_t thickness_min = 1;
    std::size_t thickness_max = 3;
    /// Darkening of crack pixels as a fraction of the local intensity.
    double contrast_min = 0.35;
    double contrast_max = 0.6;
    /// Amplitude of the smooth background texture (fraction of full scale).
    double texture_amplitude = 0.12;
    /// Per-pixel grain standard deviation (fraction of full scale).
    double grain_sigma = 0.05;
    /// Aggregate stones: expected stones per pixel and their relative
    /// brightness change (darker or lighter).
    double aggregate_density = 0.06;
    double aggregate_contrast = 0.4;
    /// Chance of each of up to three shadows / stains per image.
    double blotch_probability = 0.5;
    std::uint64_t seed = 0;

    void validate() const;
    /// Mask pixel bounds implied by the length and thickness ranges for an
    /// image that has cracks.
    std::size_t min_mask_pixels() const;
    std::size_t max_mask_pixels() const;
};

struct SynthSample {
    Image image;   // RGB
    BinaryMask mask;
    /// Pixels painted per crack (each is length x thickness).
    std::vector<std::size_t> crack_pixels;
};

/// Fully determined by (spec.seed, index).
SynthSample synth_sample(const SynthSpec& spec, std::uint64_t index);

// ---------------------------------------------------------------------------
// Patch enumeration

struct LabeledImage {
    std::string name;
    Image image;
    BinaryMask mask;
};

enum class KeepRule { All, CracksOnly };

struct PatchSample {
    std::size_t source = 0;   // index of the source image
    std::size_t y = 0, x = 0; // patch origin
    Image image;
    BinaryMask mask;
    connmap::ConnectivityMaps maps;  // encode(mask) of the cropped mask
};

/// Single-pass iterator over fixed-size patches of a list of images, in
/// source order and row-major origin order within each source. Only whole
/// patches are produced.
class PatchIterator {
public:
    using Loader = std::function<LabeledImage(std::size_t)>;

    PatchIterator(std::size_t count, Loader loader, std::size_t patch_size, std::size_t stride,
                  KeepRule keep = KeepRule::All);

    std::optional<PatchSample> next();

private:
    bool load_next_source();

    std::size_t count_;
    Loader loader_;
    std::size_t patch_, stride_;
    KeepRule keep_;
    std::size_t source_ = 0;
    bool loaded_ = false;
    LabeledImage current_;
    std::size_t y_ = 0, x_ = 0;
};

/// Patches from manifest entries of one split (images loaded lazily).
PatchIterator patch_dataset(const DatasetManifest& manifest, Split split, std::size_t patch_size,
                            std::size_t stride, KeepRule keep = KeepRule::All);
/// Patches from images already in memory.
PatchIterator patch_dataset(std::vector<LabeledImage> images, std::size_t patch_size,
                            std::size_t stride, KeepRule keep = KeepRule::All);

/// C x H x W tensor with samples mapped from [0, 255] to [-1, 1].
nn::Tensor<float> image_to_tensor(const Image& img);

} // namespace conncrack::dataset
