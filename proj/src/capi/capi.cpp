#include "conncrack/conncrack.h"

#include "conncrack/config.hpp"
#include "conncrack/connmap.hpp"
#include "conncrack/dataset.hpp"
#include "conncrack/evaluation.hpp"
#include "conncrack/geometry.hpp"
#include "conncrack/image_io.hpp"
#include "conncrack/inference.hpp"
#include "conncrack/io_util.hpp"
#include "conncrack/nn/checkpoint.hpp"
#include "conncrack/nn/gradcheck.hpp"
#include "conncrack/trainer.hpp"

#include <cstdlib>
#include <cstring>
#include <new>
#include <sstream>

using namespace conncrack;

struct cc_image {
    Image img;
};
struct cc_mask {
    BinaryMask mask;
};
struct cc_maps {
    connmap::ConnectivityMaps maps;
};
struct cc_detector {
    std::unique_ptr<models::Generator<float>> generator;
    std::string source;
};

namespace {

thread_local std::string g_last_error;

cc_status status_for(ErrorKind k) {
    switch (k) {
    case ErrorKind::Configuration: return CC_ERR_CONFIG;
    case ErrorKind::Dimension: return CC_ERR_DIMENSION;
    case ErrorKind::Format: return CC_ERR_FORMAT;
    case ErrorKind::Io: return CC_ERR_IO;
    case ErrorKind::Divergence: return CC_ERR_DIVERGENCE;
    }
    return CC_ERR_INTERNAL;
}

struct InvalidArgument {
    std::string message;
};

void require(bool ok, const char* what) {
    if (!ok) throw InvalidArgument{what};
}

template <typename F>
cc_status guarded(F&& f) {
    g_last_error.clear();
    try {
        f();
        return CC_OK;
    } catch (const InvalidArgument& e) {
        g_last_error = e.message;
        return CC_ERR_INVALID_ARGUMENT;
    } catch (const Error& e) {
        g_last_error = std::string(to_string(e.kind())) + ": " + e.what();
        return status_for(e.kind());
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return CC_ERR_INTERNAL;
    } catch (const std::exception& e) {
        g_last_error = std::string("internal error: ") + e.what();
        return CC_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "internal error";
        return CC_ERR_INTERNAL;
    }
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.data(), s.size() + 1);
    return out;
}

config::json parse_optional(const char* text) {
    if (!text || !*text) return config::json::object();
    return config::parse(text);
}

geometry::MountConfig mount(double h, double alpha, double theta, uint32_t m) {
    geometry::MountConfig c;
    c.camera_height_m = h;
    c.tilt_alpha_deg = alpha;
    c.fov_theta_deg = theta;
    c.vertical_pixels = m;
    c.validate();
    return c;
}

cc_metrics to_c(const eval::MetricsReport& r) {
    return {r.tp, r.fp, r.fn, r.precision, r.recall, r.f1, r.tolerance_px};
}

eval::MetricsReport from_c(const cc_metrics& m) {
    eval::MetricsReport r;
    r.tp = m.tp;
    r.fp = m.fp;
    r.fn = m.fn;
    r.precision = m.precision;
    r.recall = m.recall;
    r.f1 = m.f1;
    r.tolerance_px = m.tolerance_px;
    return r;
}

} // namespace

extern "C" {

const char* cc_last_error(void) { return g_last_error.c_str(); }

const char* cc_status_name(cc_status status) {
    switch (status) {
    case CC_OK: return "ok";
    case CC_ERR_CONFIG: return "configuration error";
    case CC_ERR_DIMENSION: return "dimension error";
    case CC_ERR_FORMAT: return "format error";
    case CC_ERR_IO: return "io error";
    case CC_ERR_DIVERGENCE: return "training divergence";
    case CC_ERR_INVALID_ARGUMENT: return "invalid argument";
    case CC_ERR_INTERNAL: return "internal error";
    }
    return "unknown status";
}

const char* cc_version(void) { return "1.0.0"; }

void cc_string_free(char* s) { std::free(s); }

// ---- images and masks -------------------------------------------------------

cc_status cc_image_load(const char* path, cc_image** out) {
    return guarded([&] {
        require(path && out, "cc_image_load: NULL argument");
        *out = new cc_image{image_io::load_image(path)};
    });
}

cc_status cc_image_save(const cc_image* image, const char* path) {
    return guarded([&] {
        require(image && path, "cc_image_save: NULL argument");
        image_io::save_image(image->img, path);
    });
}

cc_status cc_image_create(uint32_t width, uint32_t height, uint32_t channels, const uint8_t* pixels, cc_image** out) {
    return guarded([&] {
        require(out != nullptr, "cc_image_create: NULL output");
        require(width > 0 && height > 0, "cc_image_create: zero extent");
        require(channels == 1 || channels == 3, "cc_image_create: channels must be 1 or 3");
        Image img(width, height, channels);
        if (pixels) std::memcpy(img.pixels.data(), pixels, img.pixels.size());
        *out = new cc_image{std::move(img)};
    });
}

cc_status cc_image_info(const cc_image* image, uint32_t* width, uint32_t* height, uint32_t* channels) {
    return guarded([&] {
        require(image != nullptr, "cc_image_info: NULL image");
        if (width) *width = static_cast<uint32_t>(image->img.width);
        if (height) *height = static_cast<uint32_t>(image->img.height);
        if (channels) *channels = static_cast<uint32_t>(image->img.channels);
    });
}

const uint8_t* cc_image_pixels(const cc_image* image) { return image ? image->img.pixels.data() : nullptr; }

void cc_image_free(cc_image* image) { delete image; }

cc_status cc_mask_load(const char* path, cc_mask** out) {
    return guarded([&] {
        require(path && out, "cc_mask_load: NULL argument");
        *out = new cc_mask{image_io::load_mask(path)};
    });
}

cc_status cc_mask_save(const cc_mask* mask, const char* path) {
    return guarded([&] {
        require(mask && path, "cc_mask_save: NULL argument");
        image_io::save_image(mask_to_image(mask->mask), path);
    });
}

cc_status cc_mask_create(uint32_t height, uint32_t width, const uint8_t* values, cc_mask** out) {
    return guarded([&] {
        require(out != nullptr, "cc_mask_create: NULL output");
        if (values) {
            std::vector<uint8_t> v(values, values + static_cast<std::size_t>(height) * width);
            *out = new cc_mask{BinaryMask(height, width, std::move(v))};
        } else {
            *out = new cc_mask{BinaryMask(height, width)};
        }
    });
}

cc_status cc_mask_info(const cc_mask* mask, uint32_t* height, uint32_t* width, uint64_t* crack_pixels) {
    return guarded([&] {
        require(mask != nullptr, "cc_mask_info: NULL mask");
        if (height) *height = static_cast<uint32_t>(mask->mask.height());
        if (width) *width = static_cast<uint32_t>(mask->mask.width());
        if (crack_pixels) *crack_pixels = mask->mask.count();
    });
}

const uint8_t* cc_mask_values(const cc_mask* mask) { return mask ? mask->mask.values().data() : nullptr; }

void cc_mask_free(cc_mask* mask) { delete mask; }

// ---- geometry -----------------------------------------------------------------

cc_status cc_geometry_resolution(double camera_height_m, double tilt_alpha_deg, double fov_theta_deg,
                                 uint32_t vertical_pixels, double fov_fraction, double* px_per_cm, int* reachable) {
    return guarded([&] {
        require(px_per_cm != nullptr, "cc_geometry_resolution: NULL output");
        const auto m = mount(camera_height_m, tilt_alpha_deg, fov_theta_deg, vertical_pixels);
        *px_per_cm = geometry::spatial_resolution(m, fov_fraction);
        if (reachable) *reachable = geometry::is_reachable(m, fov_fraction) ? 1 : 0;
    });
}

cc_status cc_geometry_profile_csv(double camera_height_m, double tilt_alpha_deg, double fov_theta_deg,
                                  uint32_t vertical_pixels, const double* fractions, size_t count, char** csv) {
    return guarded([&] {
        require(csv != nullptr && (fractions || count == 0), "cc_geometry_profile_csv: NULL argument");
        const auto m = mount(camera_height_m, tilt_alpha_deg, fov_theta_deg, vertical_pixels);
        const auto rows = geometry::resolution_profile(m, std::span<const double>(fractions, count));
        std::ostringstream os;
        os << "fraction,resolution_px_per_cm,reachable\n";
        char buf[96];
        for (const auto& r : rows) {
            std::snprintf(buf, sizeof buf, "%.4g,%.4f,%d\n", r.fov_fraction, r.resolution_px_per_cm,
                          r.reachable ? 1 : 0);
            os << buf;
        }
        *csv = dup_string(os.str());
    });
}

// ---- connectivity maps ----------------------------------------------------------

cc_status cc_maps_encode(const cc_mask* mask, cc_maps** out) {
    return guarded([&] {
        require(mask && out, "cc_maps_encode: NULL argument");
        *out = new cc_maps{connmap::encode(mask->mask)};
    });
}

cc_status cc_maps_decode(const cc_maps* maps, float tau, int reciprocal, cc_mask** out) {
    return guarded([&] {
        require(maps && out, "cc_maps_decode: NULL argument");
        require(tau > 0.0f && tau < 1.0f, "cc_maps_decode: tau must lie in (0, 1)");
        *out = new cc_mask{connmap::decode(maps->maps, {tau, reciprocal != 0})};
    });
}

cc_status cc_maps_info(const cc_maps* maps, uint32_t* height, uint32_t* width) {
    return guarded([&] {
        require(maps != nullptr, "cc_maps_info: NULL maps");
        if (height) *height = static_cast<uint32_t>(maps->maps.height());
        if (width) *width = static_cast<uint32_t>(maps->maps.width());
    });
}

const float* cc_maps_values(const cc_maps* maps) { return maps ? maps->maps.values().data() : nullptr; }

cc_status cc_maps_save(const cc_maps* maps, const char* path) {
    return guarded([&] {
        require(maps && path, "cc_maps_save: NULL argument");
        connmap::save_cmap(maps->maps, path);
    });
}

cc_status cc_maps_load(const char* path, cc_maps** out) {
    return guarded([&] {
        require(path && out, "cc_maps_load: NULL argument");
        *out = new cc_maps{connmap::load_cmap(path)};
    });
}

cc_status cc_maps_channel_image(const cc_maps* maps, uint32_t k, cc_image** out) {
    return guarded([&] {
        require(maps && out, "cc_maps_channel_image: NULL argument");
        require(k < connmap::kDirections, "cc_maps_channel_image: direction must be 0..7");
        *out = new cc_image{connmap::map_to_image(maps->maps, k)};
    });
}

void cc_maps_free(cc_maps* maps) { delete maps; }

// ---- synthetic data ---------------------------------------------------------------

cc_status cc_synth_sample(const char* spec_json, uint64_t index, cc_image** image, cc_mask** mask) {
    return guarded([&] {
        require(image && mask, "cc_synth_sample: NULL output");
        const auto spec = config::synth_from_json(parse_optional(spec_json));
        auto s = dataset::synth_sample(spec, index);
        auto* img = new cc_image{std::move(s.image)};
        try {
            *mask = new cc_mask{std::move(s.mask)};
        } catch (...) {
            delete img;
            throw;
        }
        *image = img;
    });
}

cc_status cc_synth_resolve(const char* spec_json, char** resolved_json) {
    return guarded([&] {
        require(resolved_json != nullptr, "cc_synth_resolve: NULL output");
        *resolved_json = dup_string(config::to_json(config::synth_from_json(parse_optional(spec_json))).dump(2));
    });
}

cc_status cc_manifest_write(const char* const* images, const char* const* masks, size_t count, uint64_t seed,
                            const char* path) {
    return guarded([&] {
        require(path && (count == 0 || (images && masks)), "cc_manifest_write: NULL argument");
        std::vector<std::pair<std::string, std::string>> items;
        for (size_t i = 0; i < count; ++i) {
            require(images[i] && masks[i], "cc_manifest_write: NULL path");
            items.emplace_back(images[i], masks[i]);
        }
        dataset::save_manifest(dataset::split_manifest(items, {0.70, 0.10, 0.20}, seed), path);
    });
}

// ---- training ------------------------------------------------------------------------

cc_status cc_train_resolve(const char* config_json, char** resolved_json) {
    return guarded([&] {
        require(resolved_json != nullptr, "cc_train_resolve: NULL output");
        *resolved_json = dup_string(config::to_json(config::train_job_from_json(parse_optional(config_json))).dump(2));
    });
}

cc_status cc_train(const char* config_json, const char* out_dir, char** summary_json) {
    return guarded([&] {
        require(out_dir != nullptr, "cc_train: NULL output directory");
        const auto job = config::train_job_from_json(parse_optional(config_json));
        const auto res = config::run_train_job(job, out_dir);
        if (summary_json) {
            config::json s;
            s["config"] = config::to_json(job);
            s["samples"] = res.sample_count;
            s["iterations"] = res.log.rows.size();
            auto names = [](const std::vector<std::filesystem::path>& ps) {
                std::vector<std::string> out;
                for (const auto& p : ps) out.push_back(p.filename().string());
                return out;
            };
            s["generator_checkpoints"] = names(res.generator_checkpoints);
            s["critic_checkpoints"] = names(res.critic_checkpoints);
            if (!res.log.rows.empty()) {
                const auto& last = res.log.rows.back();
                s["final"] = {{"content_loss", last.content_loss},
                              {"g_wgan_loss", last.g_wgan_loss},
                              {"d_wgan_loss", last.d_wgan_loss}};
            }
            *summary_json = dup_string(s.dump(2));
        }
    });
}

// ---- detection --------------------------------------------------------------------------

cc_status cc_detector_load(const char* checkpoint_path, cc_detector** out) {
    return guarded([&] {
        require(checkpoint_path && out, "cc_detector_load: NULL argument");
        const auto ckpt = nn::load_checkpoint(checkpoint_path);
        std::unique_ptr<models::Generator<float>> g;
        try {
            g = models::load_generator(ckpt);
        } catch (const Error& e) {
            throw FormatError(std::string(checkpoint_path) + ": " + e.what());
        }
        *out = new cc_detector{std::move(g), checkpoint_path};
    });
}

cc_status cc_detect_resolve(const char* params_json, char** resolved_json) {
    return guarded([&] {
        require(resolved_json != nullptr, "cc_detect_resolve: NULL output");
        *resolved_json = dup_string(config::to_json(config::detect_from_json(parse_optional(params_json))).dump(2));
    });
}

cc_status cc_detect(cc_detector* detector, const cc_image* image, const char* params_json, cc_mask** mask,
                    char** stats_json) {
    return guarded([&] {
        require(detector && image && mask, "cc_detect: NULL argument");
        const auto params = config::detect_from_json(parse_optional(params_json));
        auto res = inference::detect(image->img, *detector->generator, params);
        if (stats_json) {
            config::json s;
            s["params"] = config::to_json(params);
            s["checkpoint"] = detector->source;
            s["generator"] = config::to_json(detector->generator->config());
            s["image"] = {{"height", image->img.height}, {"width", image->img.width}};
            s["tiles"] = {{"count", res.plan.tile_count()},
                          {"rows", res.plan.rows},
                          {"cols", res.plan.cols},
                          {"padded_height", res.plan.padded_height},
                          {"padded_width", res.plan.padded_width}};
            s["components"] = {{"before_filter", res.components_before},
                               {"kept", res.components_kept},
                               {"kept_areas", res.kept_areas}};
            s["crack_pixels"] = res.mask.count();
            *stats_json = dup_string(s.dump(2));
        }
        *mask = new cc_mask{std::move(res.mask)};
    });
}

void cc_detector_free(cc_detector* detector) { delete detector; }

cc_status cc_filter_components(const cc_mask* mask, uint64_t min_area, cc_mask** out, uint64_t* components_before,
                               uint64_t* components_kept) {
    return guarded([&] {
        require(mask && out, "cc_filter_components: NULL argument");
        const auto comps = inference::dfs_components(mask->mask);
        auto filtered = inference::area_filter(comps, min_area);
        if (components_before) *components_before = comps.size();
        if (components_kept) {
            uint64_t kept = 0;
            for (std::size_t i = 0; i < comps.size(); ++i) kept += comps.area(i) >= min_area ? 1 : 0;
            *components_kept = kept;
        }
        *out = new cc_mask{std::move(filtered)};
    });
}

// ---- evaluation ----------------------------------------------------------------------------

cc_status cc_evaluate(const cc_mask* pred, const cc_mask* truth, double tolerance_px, cc_metrics* out) {
    return guarded([&] {
        require(pred && truth && out, "cc_evaluate: NULL argument");
        *out = to_c(eval::tolerance_metrics(pred->mask, truth->mask, tolerance_px));
    });
}

cc_status cc_metrics_accumulate(const cc_metrics* reports, size_t count, cc_metrics* out) {
    return guarded([&] {
        require(out && (reports || count == 0), "cc_metrics_accumulate: NULL argument");
        std::vector<eval::MetricsReport> rs;
        for (size_t i = 0; i < count; ++i) rs.push_back(from_c(reports[i]));
        *out = to_c(eval::accumulate(rs));
    });
}

cc_status cc_region_grid_csv(const cc_mask* pred, const cc_mask* truth, uint32_t rows, uint32_t cols,
                             double tolerance_px, char** csv) {
    return guarded([&] {
        require(pred && truth && csv, "cc_region_grid_csv: NULL argument");
        *csv = dup_string(eval::region_grid(pred->mask, truth->mask, rows, cols, tolerance_px).to_csv());
    });
}

cc_status cc_report_table(const char* const* names, const cc_metrics* metrics, const double* sec_per_image,
                          size_t count, char** csv) {
    return guarded([&] {
        require(csv && (count == 0 || (names && metrics && sec_per_image)), "cc_report_table: NULL argument");
        std::vector<eval::ReportRow> rows;
        for (size_t i = 0; i < count; ++i) {
            require(names[i] != nullptr, "cc_report_table: NULL name");
            rows.push_back({names[i], from_c(metrics[i]), sec_per_image[i]});
        }
        *csv = dup_string(eval::report_table(rows));
    });
}

cc_status cc_baseline_sobel(const cc_image* image, double threshold, cc_mask** out) {
    return guarded([&] {
        require(image && out, "cc_baseline_sobel: NULL argument");
        *out = new cc_mask{eval::sobel_baseline(image->img, threshold)};
    });
}

cc_status cc_baseline_canny(const cc_image* image, double low, double high, double sigma, cc_mask** out) {
    return guarded([&] {
        require(image && out, "cc_baseline_canny: NULL argument");
        *out = new cc_mask{eval::canny_baseline(image->img, low, high, sigma)};
    });
}

// ---- diagnostics ------------------------------------------------------------------------------

cc_status cc_gradcheck(uint64_t seed, char** report_csv, double* worst_rel_error) {
    return guarded([&] {
        auto rows = nn::gradcheck_layer_suite(seed);
        for (auto& r : trainer::gradcheck_objectives(seed)) rows.push_back(r);
        std::ostringstream os;
        os << "layer,kind,max_rel_error,probes,skipped\n";
        double worst = 0.0;
        char buf[64];
        for (const auto& r : rows) {
            std::snprintf(buf, sizeof buf, "%.3e", r.max_rel_error);
            os << r.name << ',' << r.kind << ',' << buf << ',' << r.probes << ',' << r.skipped << '\n';
            worst = std::max(worst, r.max_rel_error);
        }
        if (report_csv) *report_csv = dup_string(os.str());
        if (worst_rel_error) *worst_rel_error = worst;
    });
}

} // extern "C"
