#include "conncrack/config.hpp"

#include "conncrack/io_util.hpp"
#include "conncrack/nn/checkpoint.hpp"

#include <cstdio>
#include <set>

namespace conncrack::config {

namespace {

// Reads known keys from a JSON object and rejects the rest.
class ObjectReader {
public:
    ObjectReader(const json& j, std::string context) : j_(j), ctx_(std::move(context)) {
        if (!j_.is_object()) throw ConfigError(ctx_ + ": expected a JSON object");
    }

    template <typename T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        const auto it = j_.find(key);
        if (it == j_.end()) return;
        try {
            read(*it, out);
        } catch (const ConfigError& e) {
            throw ConfigError(ctx_ + "." + key + ": " + e.what());
        }
    }

    const json* child(const char* key) {
        seen_.insert(key);
        const auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    void finish() const {
        for (const auto& [k, v] : j_.items())
            if (!seen_.count(k)) throw ConfigError(ctx_ + ": unknown key '" + k + "'");
    }

private:
    static void read(const json& v, double& out) {
        if (!v.is_number()) throw ConfigError("expected a number");
        out = v.get<double>();
    }
    static void read(const json& v, float& out) {
        double d;
        read(v, d);
        out = static_cast<float>(d);
    }
    static void read(const json& v, std::uint64_t& out) {
        if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0))
            throw ConfigError("expected a non-negative integer");
        out = v.get<std::uint64_t>();
    }
    static void read(const json& v, std::uint32_t& out) {
        std::uint64_t u;
        read(v, u);
        if (u > 0xffffffffu) throw ConfigError("value too large");
        out = static_cast<std::uint32_t>(u);
    }
    static void read(const json& v, bool& out) {
        if (!v.is_boolean()) throw ConfigError("expected true or false");
        out = v.get<bool>();
    }
    static void read(const json& v, std::string& out) {
        if (!v.is_string()) throw ConfigError("expected a string");
        out = v.get<std::string>();
    }
    static void read(const json& v, std::vector<std::size_t>& out) {
        if (!v.is_array()) throw ConfigError("expected an array");
        out.clear();
        for (const auto& e : v) {
            std::uint64_t u;
            read(e, u);
            out.push_back(static_cast<std::size_t>(u));
        }
    }
    static void read(const json& v, std::array<std::size_t, 4>& out) {
        std::vector<std::size_t> tmp;
        read(v, tmp);
        if (tmp.size() != 4) throw ConfigError("expected 4 entries");
        std::copy(tmp.begin(), tmp.end(), out.begin());
    }
    static void read(const json& v, connmap::Reduction& out) {
        std::string s;
        read(v, s);
        if (s == "mean") out = connmap::Reduction::Mean;
        else if (s == "sum") out = connmap::Reduction::Sum;
        else throw ConfigError("expected \"mean\" or \"sum\"");
    }
    static void read(const json& v, dataset::KeepRule& out) {
        std::string s;
        read(v, s);
        if (s == "all") out = dataset::KeepRule::All;
        else if (s == "cracks") out = dataset::KeepRule::CracksOnly;
        else throw ConfigError("expected \"all\" or \"cracks\"");
    }

    const json& j_;
    std::string ctx_;
    std::set<std::string> seen_;
};

} // namespace

models::GeneratorConfig generator_from_json(const json& j, models::GeneratorConfig c) {
    ObjectReader r(j, "generator");
    r.get("in_channels", c.in_channels);
    r.get("stem_channels", c.stem_channels);
    r.get("stem_kernel", c.stem_kernel);
    r.get("block_components", c.block_components);
    r.get("growth_rate", c.growth_rate);
    r.get("bottleneck_factor", c.bottleneck_factor);
    r.get("compression", c.compression);
    r.get("head_channels", c.head_channels);
    r.get("fusion_taps", c.fusion_taps);
    r.get("slope", c.slope);
    r.finish();
    c.validate();
    return c;
}

json to_json(const models::GeneratorConfig& c) {
    return {{"in_channels", c.in_channels},   {"stem_channels", c.stem_channels},
            {"stem_kernel", c.stem_kernel},   {"block_components", c.block_components},
            {"growth_rate", c.growth_rate},   {"bottleneck_factor", c.bottleneck_factor},
            {"compression", c.compression},   {"head_channels", c.head_channels},
            {"fusion_taps", c.fusion_taps},   {"slope", c.slope}};
}

models::CriticConfig critic_from_json(const json& j, models::CriticConfig c) {
    ObjectReader r(j, "critic");
    r.get("in_channels", c.in_channels);
    r.get("widths", c.widths);
    r.get("kernel", c.kernel);
    r.get("strides", c.strides);
    r.get("padding", c.padding);
    r.get("slope", c.slope);
    r.finish();
    c.validate();
    return c;
}

json to_json(const models::CriticConfig& c) {
    return {{"in_channels", c.in_channels}, {"widths", c.widths},   {"kernel", c.kernel},
            {"strides", c.strides},         {"padding", c.padding}, {"slope", c.slope}};
}

trainer::TrainConfig train_from_json(const json& j, trainer::TrainConfig c) {
    ObjectReader r(j, "train");
    r.get("lr_generator", c.lr_generator);
    r.get("lr_critic", c.lr_critic);
    r.get("lambda", c.lambda);
    r.get("reduction", c.reduction);
    r.get("clip_c", c.clip_c);
    r.get("n_critic", c.n_critic);
    r.get("iterations", c.iterations);
    r.get("seed", c.seed);
    r.get("patch_size", c.patch_size);
    r.get("batch_size", c.batch_size);
    r.get("checkpoint_every", c.checkpoint_every);
    r.get("rms_decay", c.rms_decay);
    r.get("rms_eps", c.rms_eps);
    r.finish();
    c.validate();
    return c;
}

json to_json(const trainer::TrainConfig& c) {
    return {{"lr_generator", c.lr_generator},
            {"lr_critic", c.lr_critic},
            {"lambda", c.lambda},
            {"reduction", c.reduction == connmap::Reduction::Mean ? "mean" : "sum"},
            {"clip_c", c.clip_c},
            {"n_critic", c.n_critic},
            {"iterations", c.iterations},
            {"seed", c.seed},
            {"patch_size", c.patch_size},
            {"batch_size", c.batch_size},
            {"checkpoint_every", c.checkpoint_every},
            {"rms_decay", c.rms_decay},
            {"rms_eps", c.rms_eps}};
}

dataset::SynthSpec synth_from_json(const json& j, dataset::SynthSpec s) {
    ObjectReader r(j, "synth");
    r.get("width", s.width);
    r.get("height", s.height);
    r.get("crack_count_min", s.crack_count_min);
    r.get("crack_count_max", s.crack_count_max);
    r.get("length_min", s.length_min);
    r.get("length_max", s.length_max);
    r.get("turn_probability", s.turn_probability);
    r.get("thickness_min", s.thickness_min);
    r.get("thickness_max", s.thickness_max);
    r.get("contrast_min", s.contrast_min);
    r.get("contrast_max", s.contrast_max);
    r.get("texture_amplitude", s.texture_amplitude);
    r.get("grain_sigma", s.grain_sigma);
    r.get("aggregate_density", s.aggregate_density);
    r.get("aggregate_contrast", s.aggregate_contrast);
    r.get("blotch_probability", s.blotch_probability);
    r.get("seed", s.seed);
    r.finish();
    s.validate();
    return s;
}

json to_json(const dataset::SynthSpec& s) {
    return {{"width", s.width},
            {"height", s.height},
            {"crack_count_min", s.crack_count_min},
            {"crack_count_max", s.crack_count_max},
            {"length_min", s.length_min},
            {"length_max", s.length_max},
            {"turn_probability", s.turn_probability},
            {"thickness_min", s.thickness_min},
            {"thickness_max", s.thickness_max},
            {"contrast_min", s.contrast_min},
            {"contrast_max", s.contrast_max},
            {"texture_amplitude", s.texture_amplitude},
            {"grain_sigma", s.grain_sigma},
            {"aggregate_density", s.aggregate_density},
            {"aggregate_contrast", s.aggregate_contrast},
            {"blotch_probability", s.blotch_probability},
            {"seed", s.seed}};
}

geometry::MountConfig mount_from_json(const json& j, geometry::MountConfig m) {
    ObjectReader r(j, "mount");
    r.get("camera_height_m", m.camera_height_m);
    r.get("tilt_alpha_deg", m.tilt_alpha_deg);
    r.get("fov_theta_deg", m.fov_theta_deg);
    r.get("vertical_pixels", m.vertical_pixels);
    r.finish();
    m.validate();
    return m;
}

json to_json(const geometry::MountConfig& m) {
    return {{"camera_height_m", m.camera_height_m},
            {"tilt_alpha_deg", m.tilt_alpha_deg},
            {"fov_theta_deg", m.fov_theta_deg},
            {"vertical_pixels", m.vertical_pixels}};
}

inference::DetectParams detect_from_json(const json& j, inference::DetectParams p) {
    ObjectReader r(j, "detect");
    r.get("patch_size", p.patch_size);
    r.get("overlap", p.overlap);
    r.get("tau", p.tau);
    r.get("min_area", p.min_area);
    r.get("reciprocal", p.reciprocal);
    r.get("threads", p.threads);
    r.finish();
    return p;
}

json to_json(const inference::DetectParams& p) {
    return {{"patch_size", p.patch_size}, {"overlap", p.overlap},       {"tau", p.tau},
            {"min_area", p.min_area},     {"reciprocal", p.reciprocal}, {"threads", p.threads}};
}

void TrainJob::validate() const {
    generator.validate();
    critic.validate();
    train.validate();
    if (critic.in_channels != generator.in_channels + connmap::kDirections)
        throw ConfigError("critic in_channels must equal generator in_channels + 8");
    if (manifest.empty()) throw ConfigError("train job needs a data manifest");
}

TrainJob train_job_from_json(const json& j, TrainJob job) {
    ObjectReader r(j, "config");
    if (const json* g = r.child("generator")) job.generator = generator_from_json(*g, job.generator);
    if (const json* c = r.child("critic")) job.critic = critic_from_json(*c, job.critic);
    if (const json* t = r.child("train")) job.train = train_from_json(*t, job.train);
    if (const json* d = r.child("data")) {
        ObjectReader dr(*d, "data");
        dr.get("manifest", job.manifest);
        dr.get("stride", job.stride);
        dr.get("keep", job.keep);
        dr.finish();
    }
    r.finish();
    return job;
}

json to_json(const TrainJob& job) {
    return {{"generator", to_json(job.generator)},
            {"critic", to_json(job.critic)},
            {"train", to_json(job.train)},
            {"data",
             {{"manifest", job.manifest},
              {"stride", job.stride},
              {"keep", job.keep == dataset::KeepRule::All ? "all" : "cracks"}}}};
}

json parse(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("invalid JSON: ") + e.what(), static_cast<long long>(e.byte));
    }
}

json load(const std::filesystem::path& path) {
    try {
        return parse(io::read_file(path));
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

std::vector<trainer::TrainSample> make_train_samples(dataset::PatchIterator patches) {
    std::vector<trainer::TrainSample> out;
    while (auto p = patches.next()) {
        trainer::TrainSample s;
        s.image = dataset::image_to_tensor(p->image);
        s.maps = nn::Tensor<float>({connmap::kDirections, p->maps.height(), p->maps.width()}, p->maps.values());
        out.push_back(std::move(s));
    }
    return out;
}

std::string checkpoint_name(const std::string& prefix, std::size_t iteration) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "_%06zu.ckpt", iteration);
    return prefix + buf;
}

TrainJobResult run_train_job(const TrainJob& job, const std::filesystem::path& out_dir,
                             const std::function<void(trainer::AdversarialTrainer&)>& prepare) {
    job.validate();
    const auto manifest = dataset::load_manifest(job.manifest);
    const std::size_t patch = job.train.patch_size;
    auto samples = make_train_samples(dataset::patch_dataset(manifest, dataset::Split::Train, patch,
                                                             job.stride ? job.stride : patch, job.keep));
    if (samples.empty()) throw ConfigError("the train split yields no " + std::to_string(patch) + "px patches");
    for (const auto& s : samples)
        if (s.image.dim(0) != job.generator.in_channels)
            throw DimensionError("training images have " + std::to_string(s.image.dim(0)) +
                                 " channels but the generator expects " + std::to_string(job.generator.in_channels));

    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

    models::Generator<float> g(job.generator, Rng::mix(job.train.seed, 1));
    models::Critic<float> d(job.critic, Rng::mix(job.train.seed, 2));
    trainer::AdversarialTrainer tr(g, d, job.train);
    if (prepare) prepare(tr);

    TrainJobResult res;
    res.sample_count = samples.size();
    auto sink = [&](std::size_t it, models::Generator<float>& gg, models::Critic<float>& dd) {
        const auto gp = out_dir / checkpoint_name("gen", it);
        const auto cp = out_dir / checkpoint_name("crit", it);
        nn::save_checkpoint(nn::snapshot(gg.parameters()), gp);
        nn::save_checkpoint(nn::snapshot(dd.parameters()), cp);
        res.generator_checkpoints.push_back(gp);
        res.critic_checkpoints.push_back(cp);
    };
    res.log = tr.train(samples, sink);
    io::write_file_atomic(out_dir / "train_log.csv", res.log.to_csv());
    io::write_file_atomic(out_dir / "train_timing.csv", res.log.timing_csv());
    return res;
}

} // namespace conncrack::config
