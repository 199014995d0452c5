#pragma once

#include "conncrack/dataset.hpp"
#include "conncrack/geometry.hpp"
#include "conncrack/inference.hpp"
#include "conncrack/models.hpp"
#include "conncrack/trainer.hpp"

#include "json.hpp"

#include <filesystem>
#include <functional>

namespace conncrack::config {

using json = nlohmann::json;

// Each reader starts from `base`, overrides the keys present in `j`, and
// throws ConfigError for unknown keys or mistyped values. Writers emit every
// field so the output is a complete, re-readable configuration.

models::GeneratorConfig generator_from_json(const json& j, models::GeneratorConfig base = models::GeneratorConfig::desk());
json to_json(const models::GeneratorConfig& c);

models::CriticConfig critic_from_json(const json& j, models::CriticConfig base = models::CriticConfig::desk());
json to_json(const models::CriticConfig& c);

trainer::TrainConfig train_from_json(const json& j, trainer::TrainConfig base = {});
json to_json(const trainer::TrainConfig& c);

dataset::SynthSpec synth_from_json(const json& j, dataset::SynthSpec base = {});
json to_json(const dataset::SynthSpec& s);

geometry::MountConfig mount_from_json(const json& j, geometry::MountConfig base = {});
json to_json(const geometry::MountConfig& m);

inference::DetectParams detect_from_json(const json& j, inference::DetectParams base = {});
json to_json(const inference::DetectParams& p);

/// Everything a training run needs. JSON layout:
///   {"generator": {...}, "critic": {...}, "train": {...},
///    "data": {"manifest": path, "stride": px, "keep": "all" | "cracks"}}
struct TrainJob {
    models::GeneratorConfig generator = models::GeneratorConfig::desk();
    models::CriticConfig critic = models::CriticConfig::desk();
    trainer::TrainConfig train;
    std::string manifest;
    /// Patch stride over training images; 0 means the patch size.
    std::size_t stride = 0;
    dataset::KeepRule keep = dataset::KeepRule::All;

    void validate() const;
};

TrainJob train_job_from_json(const json& j, TrainJob base = {});
json to_json(const TrainJob& job);

/// Parse a JSON document, reporting the byte offset of syntax errors.
json parse(const std::string& text);
json load(const std::filesystem::path& path);

struct TrainJobResult {
    trainer::TrainLog log;
    std::vector<std::filesystem::path> generator_checkpoints;
    std::vector<std::filesystem::path> critic_checkpoints;
    std::size_t sample_count = 0;
};

/// Train on the manifest's train split and write train_log.csv,
/// train_timing.csv, gen_<iter>.ckpt and crit_<iter>.ckpt into `out_dir`.
/// Model weights are seeded from train.seed. `prepare` runs once before the
/// first iteration (hooks for invariant checks go here).
TrainJobResult run_train_job(const TrainJob& job, const std::filesystem::path& out_dir,
                             const std::function<void(trainer::AdversarialTrainer&)>& prepare = {});

/// Training samples from patches of the given images (crop-then-encode).
std::vector<trainer::TrainSample> make_train_samples(dataset::PatchIterator patches);

/// Checkpoint file name for an iteration, e.g. gen_000200.ckpt.
std::string checkpoint_name(const std::string& prefix, std::size_t iteration);

} // namespace conncrack::config
