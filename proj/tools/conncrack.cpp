// Command-line front end. Talks to the library only through conncrack.h.
//
// Every subcommand first resolves its flags into a JSON options object,
// runs from that object alone, and records it in run_meta.json so that
// `conncrack replay --meta run_meta.json` repeats the run.

#include "conncrack/conncrack.h"

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// Thrown for failed library calls and other runtime failures (exit 1).
struct RuntimeFailure {
    std::string message;
};

void check(cc_status s, const char* context) {
    if (s != CC_OK) throw RuntimeFailure{std::string(context) + ": " + cc_last_error()};
}

template <typename T, void (*Free)(T*)>
struct Handle {
    T* p = nullptr;
    Handle() = default;
    Handle(const Handle&) = delete;
    Handle& operator=(const Handle&) = delete;
    ~Handle() { Free(p); }
    T** out() { return &p; }
    T* get() const { return p; }
};

using ImageH = Handle<cc_image, cc_image_free>;
using MaskH = Handle<cc_mask, cc_mask_free>;
using MapsH = Handle<cc_maps, cc_maps_free>;
using DetectorH = Handle<cc_detector, cc_detector_free>;

struct OwnedString {
    char* p = nullptr;
    OwnedString() = default;
    OwnedString(const OwnedString&) = delete;
    OwnedString& operator=(const OwnedString&) = delete;
    ~OwnedString() { cc_string_free(p); }
    char** out() { return &p; }
    std::string str() const { return p ? std::string(p) : std::string(); }
};

std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw RuntimeFailure{"cannot open " + p.string()};
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_text_atomic(const fs::path& p, const std::string& text) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    const fs::path tmp = p.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw RuntimeFailure{"cannot write " + tmp.string()};
        out << text;
        if (!out.flush()) throw RuntimeFailure{"write failed for " + tmp.string()};
    }
    std::error_code ec;
    fs::rename(tmp, p, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw RuntimeFailure{"cannot rename into " + p.string()};
    }
}

json parse_json_text(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw RuntimeFailure{what + ": invalid JSON: " + e.what()};
    }
}

std::vector<double> parse_fractions(const std::string& list) {
    std::vector<double> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw CLI::ValidationError("--fractions", "not a number: '" + item + "'");
        }
    }
    return out;
}

bool is_image_file(const fs::path& p) {
    std::string e = p.extension().string();
    std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return e == ".png" || e == ".pgm" || e == ".ppm" || e == ".pnm";
}

// Image files of a directory keyed by file stem, sorted.
std::map<std::string, fs::path> images_by_stem(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw RuntimeFailure{"not a directory: " + dir.string()};
    std::map<std::string, fs::path> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && is_image_file(e.path())) out[e.path().stem().string()] = e.path();
    return out;
}

void write_meta(const fs::path& meta_path, const std::string& command, const json& options, const json& outputs) {
    json meta;
    meta["command"] = command;
    meta["version"] = cc_version();
    meta["options"] = options;
    meta["outputs"] = outputs;
    write_text_atomic(meta_path, meta.dump(2) + "\n");
}

fs::path default_meta(const std::string& anchor_dir) {
    return fs::path(anchor_dir.empty() ? "." : anchor_dir) / "run_meta.json";
}

// ---------------------------------------------------------------------------
// Subcommands. Each takes the resolved options.

int run_geometry(const json& o) {
    const auto fractions = o.at("fractions").get<std::vector<double>>();
    OwnedString csv;
    check(cc_geometry_profile_csv(o.at("height_m"), o.at("alpha_deg"), o.at("fov_deg"), o.at("vpix"),
                                  fractions.data(), fractions.size(), csv.out()),
          "geometry");
    const std::string out = o.at("out");
    if (out.empty()) {
        std::cout << csv.str();
    } else {
        write_text_atomic(out, csv.str());
    }
    write_meta(o.at("meta").get<std::string>(), "geometry", o, {{"csv", out.empty() ? "stdout" : out}});
    return 0;
}

int run_encode_maps(const json& o) {
    const fs::path dir = o.at("out_dir").get<std::string>();
    MaskH mask;
    check(cc_mask_load(o.at("mask").get<std::string>().c_str(), mask.out()), "encode-maps");
    MapsH maps;
    check(cc_maps_encode(mask.get(), maps.out()), "encode-maps");
    fs::create_directories(dir);
    static const char* names[8] = {"NW", "W", "SW", "N", "S", "NE", "E", "SE"};
    json outputs = json::array();
    for (uint32_t k = 0; k < 8; ++k) {
        ImageH img;
        check(cc_maps_channel_image(maps.get(), k, img.out()), "encode-maps");
        const fs::path p = dir / ("map_" + std::to_string(k + 1) + "_" + names[k] + ".png");
        check(cc_image_save(img.get(), p.string().c_str()), "encode-maps");
        outputs.push_back(p.filename().string());
    }
    const fs::path stack = dir / "maps.cmap";
    check(cc_maps_save(maps.get(), stack.string().c_str()), "encode-maps");
    outputs.push_back(stack.filename().string());
    write_meta(o.at("meta").get<std::string>(), "encode-maps", o, outputs);
    return 0;
}

int run_synth(const json& o) {
    const fs::path dir = o.at("out_dir").get<std::string>();
    const std::string spec = o.at("spec").dump();
    const auto count = o.at("count").get<std::uint64_t>();
    fs::create_directories(dir / "images");
    fs::create_directories(dir / "masks");
    std::vector<std::string> images, masks;
    char name[32];
    for (std::uint64_t i = 0; i < count; ++i) {
        ImageH img;
        MaskH mask;
        check(cc_synth_sample(spec.c_str(), i, img.out(), mask.out()), "synth");
        std::snprintf(name, sizeof name, "%06llu.png", static_cast<unsigned long long>(i));
        images.push_back((fs::path("images") / name).string());
        masks.push_back((fs::path("masks") / name).string());
        check(cc_image_save(img.get(), (dir / images.back()).string().c_str()), "synth");
        check(cc_mask_save(mask.get(), (dir / masks.back()).string().c_str()), "synth");
    }
    json outputs{{"images", count}};
    if (count > 0) {
        std::vector<const char*> ip, mp;
        for (std::size_t i = 0; i < images.size(); ++i) {
            ip.push_back(images[i].c_str());
            mp.push_back(masks[i].c_str());
        }
        const fs::path manifest = dir / "manifest.jsonl";
        check(cc_manifest_write(ip.data(), mp.data(), ip.size(), o.at("split_seed"), manifest.string().c_str()),
              "synth");
        outputs["manifest"] = manifest.filename().string();
    }
    write_meta(o.at("meta").get<std::string>(), "synth", o, outputs);
    return 0;
}

int run_train(const json& o) {
    const std::string cfg = o.at("config").dump();
    OwnedString summary;
    check(cc_train(cfg.c_str(), o.at("out_dir").get<std::string>().c_str(), summary.out()), "train");
    const json s = parse_json_text(summary.str(), "train summary");
    write_meta(o.at("meta").get<std::string>(), "train", o,
               {{"train_log", "train_log.csv"},
                {"train_timing", "train_timing.csv"},
                {"generator_checkpoints", s.at("generator_checkpoints")},
                {"critic_checkpoints", s.at("critic_checkpoints")},
                {"samples", s.at("samples")}});
    if (s.contains("final")) std::cout << "final losses: " << s.at("final").dump() << "\n";
    return 0;
}

int run_detect(const json& o) {
    DetectorH det;
    check(cc_detector_load(o.at("ckpt").get<std::string>().c_str(), det.out()), "detect");
    ImageH img;
    check(cc_image_load(o.at("image").get<std::string>().c_str(), img.out()), "detect");
    const std::string params = o.at("params").dump();
    MaskH mask;
    OwnedString stats;
    check(cc_detect(det.get(), img.get(), params.c_str(), mask.out(), stats.out()), "detect");
    const std::string out = o.at("out");
    if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
    check(cc_mask_save(mask.get(), out.c_str()), "detect");
    json sidecar = parse_json_text(stats.str(), "detect stats");
    sidecar["image_path"] = o.at("image");
    const std::string sidecar_path = o.at("sidecar");
    write_text_atomic(sidecar_path, sidecar.dump(2) + "\n");
    write_meta(o.at("meta").get<std::string>(), "detect", o, {{"mask", out}, {"sidecar", sidecar_path}});
    return 0;
}

cc_metrics evaluate_pair(const fs::path& pred, const fs::path& gt, double tol) {
    MaskH p, g;
    check(cc_mask_load(pred.string().c_str(), p.out()), "eval");
    check(cc_mask_load(gt.string().c_str(), g.out()), "eval");
    cc_metrics m{};
    check(cc_evaluate(p.get(), g.get(), tol, &m), ("eval " + pred.filename().string()).c_str());
    return m;
}

std::string report_csv(const std::vector<std::string>& names, const std::vector<cc_metrics>& metrics,
                       const std::vector<double>& secs) {
    std::vector<const char*> np;
    for (const auto& n : names) np.push_back(n.c_str());
    OwnedString csv;
    check(cc_report_table(np.data(), metrics.data(), secs.data(), names.size(), csv.out()), "report");
    return csv.str();
}

int run_eval(const json& o) {
    const double tol = o.at("tol");
    const auto preds = images_by_stem(o.at("pred_dir").get<std::string>());
    const auto gts = images_by_stem(o.at("gt_dir").get<std::string>());
    std::vector<std::string> names;
    std::vector<cc_metrics> metrics;
    std::string grid;
    for (const auto& [stem, gt_path] : gts) {
        const auto it = preds.find(stem);
        if (it == preds.end()) throw RuntimeFailure{"eval: no prediction for ground truth '" + stem + "'"};
        names.push_back(stem);
        metrics.push_back(evaluate_pair(it->second, gt_path, tol));
        if (!o.at("grid").get<std::string>().empty()) {
            MaskH p, g;
            check(cc_mask_load(it->second.string().c_str(), p.out()), "eval");
            check(cc_mask_load(gt_path.string().c_str(), g.out()), "eval");
            OwnedString cells;
            check(cc_region_grid_csv(p.get(), g.get(), o.at("grid_rows"), o.at("grid_cols"), tol, cells.out()),
                  "eval grid");
            std::istringstream in(cells.str());
            std::string line;
            bool header = true;
            while (std::getline(in, line)) {
                if (header) {
                    if (grid.empty()) grid = "image," + line + "\n";
                    header = false;
                    continue;
                }
                grid += stem + "," + line + "\n";
            }
        }
    }
    if (names.empty()) throw RuntimeFailure{"eval: no ground-truth images in " + o.at("gt_dir").get<std::string>()};
    cc_metrics total{};
    check(cc_metrics_accumulate(metrics.data(), metrics.size(), &total), "eval");
    names.push_back("overall");
    metrics.push_back(total);
    const std::vector<double> secs(names.size(), o.at("sec_per_image").get<double>());
    const std::string out = o.at("out");
    write_text_atomic(out, report_csv(names, metrics, secs));
    json outputs{{"report", out}};
    if (!o.at("grid").get<std::string>().empty()) {
        write_text_atomic(o.at("grid").get<std::string>(), grid);
        outputs["grid"] = o.at("grid");
    }
    std::printf("precision %.4f recall %.4f f1 %.4f (tp %llu fp %llu fn %llu)\n", total.precision, total.recall,
                total.f1, static_cast<unsigned long long>(total.tp), static_cast<unsigned long long>(total.fp),
                static_cast<unsigned long long>(total.fn));
    write_meta(o.at("meta").get<std::string>(), "eval", o, outputs);
    return 0;
}

int run_baseline(const json& o) {
    const double tol = o.at("tol");
    const std::string method = o.at("method");
    const auto images = images_by_stem(o.at("image_dir").get<std::string>());
    const auto gts = images_by_stem(o.at("gt_dir").get<std::string>());
    const std::string pred_dir = o.at("pred_dir");
    std::vector<cc_metrics> metrics;
    double seconds = 0.0;
    for (const auto& [stem, gt_path] : gts) {
        const auto it = images.find(stem);
        if (it == images.end()) throw RuntimeFailure{"baseline: no image for ground truth '" + stem + "'"};
        ImageH img;
        check(cc_image_load(it->second.string().c_str(), img.out()), "baseline");
        MaskH pred, gt;
        const auto t0 = std::chrono::steady_clock::now();
        if (method == "sobel") {
            check(cc_baseline_sobel(img.get(), o.at("threshold"), pred.out()), "baseline");
        } else {
            check(cc_baseline_canny(img.get(), o.at("low"), o.at("high"), o.at("sigma"), pred.out()), "baseline");
        }
        seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        check(cc_mask_load(gt_path.string().c_str(), gt.out()), "baseline");
        cc_metrics m{};
        check(cc_evaluate(pred.get(), gt.get(), tol, &m), "baseline");
        metrics.push_back(m);
        if (!pred_dir.empty()) {
            fs::create_directories(pred_dir);
            check(cc_mask_save(pred.get(), (fs::path(pred_dir) / (stem + ".png")).string().c_str()), "baseline");
        }
    }
    if (metrics.empty()) throw RuntimeFailure{"baseline: no ground-truth images"};
    cc_metrics total{};
    check(cc_metrics_accumulate(metrics.data(), metrics.size(), &total), "baseline");
    const std::string name = method == "sobel" ? "Sobel" : "Canny";
    const std::string out = o.at("out");
    // Timing varies run to run; it is the only non-reproducible field.
    write_text_atomic(out, report_csv({name}, {total}, {seconds / static_cast<double>(metrics.size())}));
    std::printf("%s: precision %.4f recall %.4f f1 %.4f\n", name.c_str(), total.precision, total.recall, total.f1);
    write_meta(o.at("meta").get<std::string>(), "baseline", o, {{"report", out}});
    return 0;
}

int run_gradcheck(const json& o) {
    OwnedString csv;
    double worst = 0.0;
    check(cc_gradcheck(o.at("seed"), csv.out(), &worst), "gradcheck");
    const std::string out = o.at("out");
    if (out.empty()) {
        std::cout << csv.str();
    } else {
        write_text_atomic(out, csv.str());
    }
    const double tol = o.at("tolerance");
    std::printf("worst relative error %.3e (tolerance %.1e)\n", worst, tol);
    write_meta(o.at("meta").get<std::string>(), "gradcheck", o,
               {{"report", out.empty() ? "stdout" : out}, {"worst_rel_error", worst}});
    return worst < tol ? 0 : 1;
}

int dispatch(const std::string& command, const json& options) {
    if (command == "geometry") return run_geometry(options);
    if (command == "encode-maps") return run_encode_maps(options);
    if (command == "synth") return run_synth(options);
    if (command == "train") return run_train(options);
    if (command == "detect") return run_detect(options);
    if (command == "eval") return run_eval(options);
    if (command == "baseline") return run_baseline(options);
    if (command == "gradcheck") return run_gradcheck(options);
    throw RuntimeFailure{"unknown command '" + command + "'"};
}

std::string resolve_with(cc_status (*fn)(const char*, char**), const std::string& input, const char* what) {
    OwnedString out;
    check(fn(input.c_str(), out.out()), what);
    return out.str();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"conncrack: pavement crack detection with connectivity maps and a conditional WGAN"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(cc_version()));

    // geometry
    auto* geo = app.add_subcommand("geometry", "Spatial resolution of a camera mount (px/cm per FOV fraction)");
    std::string preset;
    double height_m = 1.0, alpha_deg = 10.25, fov_deg = 69.5;
    std::uint32_t vpix = 1080;
    std::string fractions = "0,0.25,0.5,0.75,1";
    std::string geo_out, geo_meta;
    geo->add_option("--preset", preset, "rear (1 m, 10.25 deg) or front (1.5 m, 55.25 deg); flags override")
        ->check(CLI::IsMember({"rear", "front"}));
    auto* o_h = geo->add_option("--height-m", height_m, "Camera height above the road in metres");
    auto* o_a = geo->add_option("--alpha-deg", alpha_deg, "Angle between the bottom FOV ray and the vertical");
    geo->add_option("--fov-deg", fov_deg, "Vertical field of view in degrees");
    geo->add_option("--vpix", vpix, "Vertical pixel count");
    geo->add_option("--fractions", fractions, "Comma-separated FOV fractions, strictly increasing in [0, 1]");
    geo->add_option("--out", geo_out, "CSV output file (default: stdout)");
    geo->add_option("--meta", geo_meta, "run_meta.json path (default: next to --out, or ./run_meta.json)");

    // encode-maps
    auto* enc = app.add_subcommand("encode-maps", "Encode a crack mask as 8 connectivity maps");
    std::string enc_mask, enc_out, enc_meta;
    enc->add_option("--mask", enc_mask, "Mask image (PNG/PGM; any nonzero pixel is crack)")->required();
    enc->add_option("--out-dir", enc_out, "Output directory for map_<k>_<dir>.png and maps.cmap")->required();
    enc->add_option("--meta", enc_meta, "run_meta.json path (default: <out-dir>/run_meta.json)");

    // synth
    auto* syn = app.add_subcommand("synth", "Generate synthetic cracked-pavement images with masks and a manifest");
    std::string syn_spec, syn_out, syn_meta;
    std::uint64_t syn_count = 0, syn_split_seed = 0;
    std::uint64_t syn_seed = 0;
    syn->add_option("--spec", syn_spec, "Synthesis spec JSON file (missing keys take defaults)");
    syn->add_option("--count", syn_count, "Number of images")->required();
    syn->add_option("--out-dir", syn_out, "Output directory")->required();
    auto* o_sseed = syn->add_option("--seed", syn_seed, "Overrides the seed in the --spec file");
    syn->add_option("--split-seed", syn_split_seed, "Seed of the 70/10/20 train/val/test shuffle");
    syn->add_option("--meta", syn_meta, "run_meta.json path (default: <out-dir>/run_meta.json)");

    // train
    auto* trn = app.add_subcommand("train", "Adversarial training of generator and critic");
    std::string trn_config, trn_manifest, trn_out, trn_meta;
    std::uint64_t trn_iters = 0, trn_seed = 0;
    trn->add_option("--config", trn_config, "Training configuration JSON file");
    trn->add_option("--data-manifest", trn_manifest, "Dataset manifest (JSON lines); overrides data.manifest");
    auto* o_iters = trn->add_option("--iters", trn_iters, "Iterations; overrides train.iterations");
    auto* o_tseed = trn->add_option("--seed", trn_seed, "Seed; overrides train.seed");
    trn->add_option("--out-dir", trn_out, "Output directory for logs and checkpoints")->required();
    trn->add_option("--meta", trn_meta, "run_meta.json path (default: <out-dir>/run_meta.json)");

    // detect
    auto* det = app.add_subcommand("detect", "Detect cracks in an image with a trained generator");
    std::string det_image, det_ckpt, det_out, det_sidecar, det_meta;
    std::size_t det_patch = 256, det_overlap = 0, det_min_area = 200;
    float det_tau = 0.5f;
    bool det_reciprocal = false;
    det->add_option("--image", det_image, "Input image (PNG/PGM/PPM)")->required();
    det->add_option("--ckpt", det_ckpt, "Generator checkpoint (gen_*.ckpt)")->required();
    det->add_option("--patch", det_patch, "Tile size (multiple of 32)");
    det->add_option("--overlap", det_overlap, "Tile overlap in pixels");
    det->add_option("--tau", det_tau, "Decode threshold on the connectivity maps");
    det->add_option("--min-area", det_min_area, "Smallest connected component kept, in pixels");
    det->add_flag("--reciprocal", det_reciprocal, "Require both directions of a link to reach tau");
    det->add_option("--out", det_out, "Output mask (PNG/PGM)")->required();
    det->add_option("--sidecar", det_sidecar, "Parameter and component statistics JSON (default: <out>.json)");
    det->add_option("--meta", det_meta, "run_meta.json path (default: next to --out)");

    // eval
    auto* evl = app.add_subcommand("eval", "Tolerance precision/recall/F1 of predicted masks");
    std::string evl_pred, evl_gt, evl_grid, evl_out, evl_meta;
    double evl_tol = 5.0, evl_sec = 0.0;
    std::uint32_t grid_rows = 9, grid_cols = 16;
    evl->add_option("--pred-dir", evl_pred, "Predicted masks, matched to ground truth by file stem")->required();
    evl->add_option("--gt-dir", evl_gt, "Ground-truth masks")->required();
    evl->add_option("--tol", evl_tol, "Matching distance in pixels (Euclidean)");
    evl->add_option("--grid", evl_grid, "Write a per-region CSV heat-grid to this file");
    evl->add_option("--grid-rows", grid_rows, "Region grid rows");
    evl->add_option("--grid-cols", grid_cols, "Region grid columns");
    evl->add_option("--sec-per-image", evl_sec, "Value for the efficiency column");
    evl->add_option("--out", evl_out, "Report CSV (name,precision,recall,f1,efficiency)")->required();
    evl->add_option("--meta", evl_meta, "run_meta.json path (default: next to --out)");

    // baseline
    auto* bsl = app.add_subcommand("baseline", "Sobel or Canny edge baseline scored against ground truth");
    std::string bsl_images, bsl_gt, bsl_method = "sobel", bsl_out, bsl_pred, bsl_meta;
    double bsl_threshold = 200.0, bsl_low = 50.0, bsl_high = 150.0, bsl_sigma = 1.4, bsl_tol = 5.0;
    bsl->add_option("--image-dir", bsl_images, "Input images, matched to ground truth by file stem")->required();
    bsl->add_option("--gt-dir", bsl_gt, "Ground-truth masks")->required();
    bsl->add_option("--method", bsl_method, "sobel or canny")->check(CLI::IsMember({"sobel", "canny"}));
    bsl->add_option("--threshold", bsl_threshold, "Sobel magnitude threshold (luminance units)");
    bsl->add_option("--low", bsl_low, "Canny hysteresis low threshold");
    bsl->add_option("--high", bsl_high, "Canny hysteresis high threshold");
    bsl->add_option("--sigma", bsl_sigma, "Canny Gaussian sigma");
    bsl->add_option("--tol", bsl_tol, "Matching distance in pixels");
    bsl->add_option("--pred-dir", bsl_pred, "Also write the baseline masks here");
    bsl->add_option("--out", bsl_out, "Report CSV")->required();
    bsl->add_option("--meta", bsl_meta, "run_meta.json path (default: next to --out)");

    // gradcheck
    auto* gck = app.add_subcommand("gradcheck", "Finite-difference check of every layer kind and the losses");
    std::uint64_t gck_seed = 1;
    double gck_tol = 1e-3;
    std::string gck_out, gck_meta;
    gck->add_option("--seed", gck_seed, "Seed for inputs, weights and probe selection");
    gck->add_option("--tolerance", gck_tol, "Exit 1 when any relative error reaches this");
    gck->add_option("--out", gck_out, "CSV output file (default: stdout)");
    gck->add_option("--meta", gck_meta, "run_meta.json path (default: next to --out, or ./run_meta.json)");

    // replay
    auto* rpl = app.add_subcommand("replay", "Re-run a command from its run_meta.json");
    std::string rpl_meta;
    rpl->add_option("--meta", rpl_meta, "run_meta.json written by an earlier run")->required();

    if (argc <= 1) {
        std::cerr << app.help();
        return 2;
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        std::string command;
        json o;
        auto parent = [](const std::string& path) {
            const fs::path p(path);
            return p.has_parent_path() ? p.parent_path().string() : std::string(".");
        };
        if (*geo) {
            command = "geometry";
            if (preset == "front") {
                if (!*o_h) height_m = 1.5;
                if (!*o_a) alpha_deg = 55.25;
            }
            o = {{"height_m", height_m}, {"alpha_deg", alpha_deg}, {"fov_deg", fov_deg}, {"vpix", vpix},
                 {"fractions", parse_fractions(fractions)}, {"out", geo_out},
                 {"meta", geo_meta.empty() ? default_meta(geo_out.empty() ? "" : parent(geo_out)).string() : geo_meta}};
        } else if (*enc) {
            command = "encode-maps";
            o = {{"mask", enc_mask}, {"out_dir", enc_out},
                 {"meta", enc_meta.empty() ? default_meta(enc_out).string() : enc_meta}};
        } else if (*syn) {
            command = "synth";
            json spec = syn_spec.empty() ? json::object() : parse_json_text(read_text(syn_spec), syn_spec);
            if (*o_sseed && spec.is_object()) spec["seed"] = syn_seed;
            o = {{"spec", parse_json_text(resolve_with(cc_synth_resolve, spec.dump(), "synth"), "spec")},
                 {"count", syn_count}, {"split_seed", syn_split_seed}, {"out_dir", syn_out},
                 {"meta", syn_meta.empty() ? default_meta(syn_out).string() : syn_meta}};
        } else if (*trn) {
            command = "train";
            json cfg = trn_config.empty() ? json::object() : parse_json_text(read_text(trn_config), trn_config);
            if (!cfg.is_object()) throw RuntimeFailure{"train: configuration must be a JSON object"};
            if (!trn_manifest.empty()) cfg["data"]["manifest"] = fs::absolute(trn_manifest).string();
            else if (cfg.contains("data") && cfg["data"].contains("manifest") && !trn_config.empty()) {
                // Relative manifest paths in a config file are relative to that file.
                const fs::path m = cfg["data"]["manifest"].get<std::string>();
                if (m.is_relative()) cfg["data"]["manifest"] = fs::absolute(fs::path(trn_config).parent_path() / m).string();
            }
            if (*o_iters) cfg["train"]["iterations"] = trn_iters;
            if (*o_tseed) cfg["train"]["seed"] = trn_seed;
            o = {{"config", parse_json_text(resolve_with(cc_train_resolve, cfg.dump(), "train"), "config")},
                 {"out_dir", trn_out}, {"meta", trn_meta.empty() ? default_meta(trn_out).string() : trn_meta}};
        } else if (*det) {
            command = "detect";
            const json params{{"patch_size", det_patch}, {"overlap", det_overlap}, {"tau", det_tau},
                              {"min_area", det_min_area}, {"reciprocal", det_reciprocal}};
            o = {{"image", det_image}, {"ckpt", det_ckpt},
                 {"params", parse_json_text(resolve_with(cc_detect_resolve, params.dump(), "detect"), "params")},
                 {"out", det_out}, {"sidecar", det_sidecar.empty() ? det_out + ".json" : det_sidecar},
                 {"meta", det_meta.empty() ? default_meta(parent(det_out)).string() : det_meta}};
        } else if (*evl) {
            command = "eval";
            o = {{"pred_dir", evl_pred}, {"gt_dir", evl_gt}, {"tol", evl_tol}, {"grid", evl_grid},
                 {"grid_rows", grid_rows}, {"grid_cols", grid_cols}, {"sec_per_image", evl_sec},
                 {"out", evl_out}, {"meta", evl_meta.empty() ? default_meta(parent(evl_out)).string() : evl_meta}};
        } else if (*bsl) {
            command = "baseline";
            o = {{"image_dir", bsl_images}, {"gt_dir", bsl_gt}, {"method", bsl_method},
                 {"threshold", bsl_threshold}, {"low", bsl_low}, {"high", bsl_high}, {"sigma", bsl_sigma},
                 {"tol", bsl_tol}, {"pred_dir", bsl_pred}, {"out", bsl_out},
                 {"meta", bsl_meta.empty() ? default_meta(parent(bsl_out)).string() : bsl_meta}};
        } else if (*gck) {
            command = "gradcheck";
            o = {{"seed", gck_seed}, {"tolerance", gck_tol}, {"out", gck_out},
                 {"meta", gck_meta.empty() ? default_meta(gck_out.empty() ? "" : parent(gck_out)).string() : gck_meta}};
        } else if (*rpl) {
            const json meta = parse_json_text(read_text(rpl_meta), rpl_meta);
            if (!meta.contains("command") || !meta.contains("options"))
                throw RuntimeFailure{rpl_meta + ": not a run_meta.json (missing command or options)"};
            command = meta.at("command").get<std::string>();
            o = meta.at("options");
        }
        return dispatch(command, o);
    } catch (const RuntimeFailure& e) {
        std::cerr << "error: " << e.message << "\n";
        return 1;
    } catch (const CLI::ValidationError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const json::exception& e) {
        std::cerr << "error: malformed options: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
