#include "doctest.h"

#include "conncrack/conncrack.h"
#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("conncrack_capi_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string take(char* s) {
    std::string out = s ? s : "";
    cc_string_free(s);
    return out;
}

cc_mask* make_mask(uint32_t h, uint32_t w, const std::vector<uint8_t>& v) {
    cc_mask* m = nullptr;
    REQUIRE(cc_mask_create(h, w, v.data(), &m) == CC_OK);
    return m;
}

} // namespace

TEST_CASE("status names and version") {
    CHECK(std::string(cc_status_name(CC_OK)) == "ok");
    CHECK(std::string(cc_status_name(CC_ERR_FORMAT)) != "ok");
    CHECK(std::string(cc_version()).size() > 0);
    cc_string_free(nullptr);
    cc_image_free(nullptr);
    cc_mask_free(nullptr);
    cc_maps_free(nullptr);
    cc_detector_free(nullptr);
}

TEST_CASE("null arguments are rejected with a message") {
    CHECK(cc_image_load(nullptr, nullptr) == CC_ERR_INVALID_ARGUMENT);
    CHECK(std::string(cc_last_error()).size() > 0);
    cc_mask* m = nullptr;
    CHECK(cc_mask_create(2, 2, nullptr, nullptr) == CC_ERR_INVALID_ARGUMENT);
    CHECK(cc_maps_encode(nullptr, nullptr) == CC_ERR_INVALID_ARGUMENT);
    CHECK(cc_evaluate(nullptr, nullptr, 5.0, nullptr) == CC_ERR_INVALID_ARGUMENT);
    CHECK(cc_detect(nullptr, nullptr, nullptr, &m, nullptr) == CC_ERR_INVALID_ARGUMENT);
    CHECK(m == nullptr);
    CHECK(cc_image_pixels(nullptr) == nullptr);
    CHECK(cc_mask_values(nullptr) == nullptr);
}

TEST_CASE("errors map to status codes") {
    cc_image* img = nullptr;
    CHECK(cc_image_load("/nonexistent/conncrack.png", &img) == CC_ERR_IO);
    CHECK(img == nullptr);
    CHECK(cc_image_create(4, 4, 2, nullptr, &img) == CC_ERR_INVALID_ARGUMENT);
    const auto dir = scratch("errors");
    {
        std::ofstream(dir / "bad.pgm") << "P5\n4 4\n255\nxx";
    }
    CHECK(cc_image_load((dir / "bad.pgm").c_str(), &img) == CC_ERR_FORMAT);
    CHECK(std::string(cc_last_error()).find("format") != std::string::npos);

    const uint8_t v[] = {1, 0, 0, 1};
    cc_mask* a = make_mask(2, 2, {1, 0, 0, 1});
    cc_mask* b = make_mask(1, 4, {1, 0, 0, 1});
    cc_metrics m{};
    CHECK(cc_evaluate(a, b, 5.0, &m) == CC_ERR_DIMENSION);
    CHECK(cc_mask_create(2, 2, v, nullptr) == CC_ERR_INVALID_ARGUMENT);
    char* out = nullptr;
    CHECK(cc_train("{\"train\": {\"iteratons\": 1}}", dir.c_str(), &out) == CC_ERR_CONFIG);
    CHECK(cc_train("{", dir.c_str(), &out) == CC_ERR_FORMAT);
    CHECK(out == nullptr);
    cc_mask_free(a);
    cc_mask_free(b);
}

TEST_CASE("last error is per thread") {
    CHECK(cc_image_load("/nonexistent/a.png", nullptr) == CC_ERR_INVALID_ARGUMENT);
    const std::string here = cc_last_error();
    std::string there;
    std::thread t([&] {
        cc_image* img = nullptr;
        cc_image_load("/nonexistent/b.png", &img);
        there = cc_last_error();
    });
    t.join();
    CHECK(std::string(cc_last_error()) == here);
    CHECK(there.find("b.png") != std::string::npos);
}

TEST_CASE("image and mask handles") {
    const auto dir = scratch("handles");
    std::vector<uint8_t> px(5 * 3 * 3);
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<uint8_t>(i * 7);
    cc_image* img = nullptr;
    REQUIRE(cc_image_create(5, 3, 3, px.data(), &img) == CC_OK);
    uint32_t w = 0, h = 0, c = 0;
    CHECK(cc_image_info(img, &w, &h, &c) == CC_OK);
    CHECK((w == 5 && h == 3 && c == 3));
    for (const char* name : {"a.ppm", "a.png"}) {
        const auto path = (dir / name).string();
        REQUIRE(cc_image_save(img, path.c_str()) == CC_OK);
        cc_image* back = nullptr;
        REQUIRE(cc_image_load(path.c_str(), &back) == CC_OK);
        CHECK(std::vector<uint8_t>(cc_image_pixels(back), cc_image_pixels(back) + px.size()) == px);
        cc_image_free(back);
    }
    cc_image_free(img);

    cc_mask* m = make_mask(2, 3, {0, 1, 1, 0, 0, 1});
    uint64_t n = 0;
    CHECK(cc_mask_info(m, &h, &w, &n) == CC_OK);
    CHECK((h == 2 && w == 3 && n == 3));
    REQUIRE(cc_mask_save(m, (dir / "m.png").c_str()) == CC_OK);
    cc_mask* back = nullptr;
    REQUIRE(cc_mask_load((dir / "m.png").c_str(), &back) == CC_OK);
    CHECK(std::vector<uint8_t>(cc_mask_values(back), cc_mask_values(back) + 6) ==
          std::vector<uint8_t>{0, 1, 1, 0, 0, 1});
    cc_mask_free(back);
    cc_mask_free(m);
}

TEST_CASE("geometry through the C interface") {
    double r = 0;
    int reach = 0;
    REQUIRE(cc_geometry_resolution(1.0, 10.25, 69.5, 1080, 0.0, &r, &reach) == CC_OK);
    CHECK(r == doctest::Approx(8.62).epsilon(0.002));
    CHECK(reach == 1);
    const double fr[] = {0.0, 0.5, 1.0};
    char* csv = nullptr;
    REQUIRE(cc_geometry_profile_csv(1.5, 55.25, 69.5, 1080, fr, 3, &csv) == CC_OK);
    const std::string text = take(csv);
    CHECK(text.rfind("fraction,resolution_px_per_cm,reachable\n", 0) == 0);
    CHECK(text.find("\n1,0.0000,0") != std::string::npos);
    const double bad[] = {0.5, 0.2};
    CHECK(cc_geometry_profile_csv(1.0, 10.25, 69.5, 1080, bad, 2, &csv) == CC_ERR_CONFIG);
    CHECK(cc_geometry_resolution(-1.0, 10.25, 69.5, 1080, 0.0, &r, nullptr) == CC_ERR_CONFIG);
}

TEST_CASE("maps encode, decode and persist") {
    const auto dir = scratch("maps");
    cc_mask* m = make_mask(3, 4, {1, 1, 0, 0, 0, 1, 0, 0, 0, 0, 0, 1});
    cc_maps* maps = nullptr;
    REQUIRE(cc_maps_encode(m, &maps) == CC_OK);
    uint32_t h = 0, w = 0;
    CHECK(cc_maps_info(maps, &h, &w) == CC_OK);
    CHECK((h == 3 && w == 4));
    // E link at (0,0) is index 6.
    CHECK(cc_maps_values(maps)[(6 * 3 + 0) * 4 + 0] == 1.0f);
    cc_mask* dec = nullptr;
    REQUIRE(cc_maps_decode(maps, 0.5f, 0, &dec) == CC_OK);
    // The isolated pixel at (2,3) disappears.
    CHECK(std::vector<uint8_t>(cc_mask_values(dec), cc_mask_values(dec) + 12) ==
          std::vector<uint8_t>{1, 1, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0});
    CHECK(cc_maps_decode(maps, 1.0f, 0, &dec) == CC_ERR_INVALID_ARGUMENT);
    REQUIRE(cc_maps_save(maps, (dir / "a.cmap").c_str()) == CC_OK);
    cc_maps* back = nullptr;
    REQUIRE(cc_maps_load((dir / "a.cmap").c_str(), &back) == CC_OK);
    CHECK(std::vector<float>(cc_maps_values(back), cc_maps_values(back) + 96) ==
          std::vector<float>(cc_maps_values(maps), cc_maps_values(maps) + 96));
    cc_image* ch = nullptr;
    REQUIRE(cc_maps_channel_image(maps, 6, &ch) == CC_OK);
    CHECK(cc_image_pixels(ch)[0] == 255);
    CHECK(cc_maps_channel_image(maps, 8, &ch) == CC_ERR_INVALID_ARGUMENT);
    cc_image_free(ch);
    cc_maps_free(back);
    cc_mask_free(dec);
    cc_maps_free(maps);
    cc_mask_free(m);
}

TEST_CASE("evaluation, grids, tables and baselines") {
    cc_mask* a = make_mask(2, 2, {1, 0, 0, 1});
    cc_mask* b = make_mask(2, 2, {1, 0, 0, 0});
    cc_metrics m{};
    REQUIRE(cc_evaluate(a, b, 0.0, &m) == CC_OK);
    CHECK((m.tp == 1 && m.fp == 1 && m.fn == 0));
    CHECK(m.precision == doctest::Approx(0.5));
    cc_metrics sum{};
    const cc_metrics both[] = {m, m};
    REQUIRE(cc_metrics_accumulate(both, 2, &sum) == CC_OK);
    CHECK(sum.tp == 2);
    char* csv = nullptr;
    REQUIRE(cc_region_grid_csv(a, b, 1, 2, 0.0, &csv) == CC_OK);
    CHECK(take(csv).rfind("row,col,", 0) == 0);
    const char* names[] = {"x"};
    const double secs[] = {0.5};
    REQUIRE(cc_report_table(names, &m, secs, 1, &csv) == CC_OK);
    CHECK(take(csv) == "name,precision,recall,f1,efficiency\nx,0.5,1,0.6666666666666666,0.5\n");

    cc_image* flat = nullptr;
    REQUIRE(cc_image_create(6, 6, 1, nullptr, &flat) == CC_OK);
    cc_mask* edges = nullptr;
    REQUIRE(cc_baseline_sobel(flat, 1.0, &edges) == CC_OK);
    uint64_t n = 1;
    cc_mask_info(edges, nullptr, nullptr, &n);
    CHECK(n == 0);
    cc_mask_free(edges);
    REQUIRE(cc_baseline_canny(flat, 1.0, 2.0, 1.0, &edges) == CC_OK);
    cc_mask_free(edges);
    CHECK(cc_baseline_canny(flat, 3.0, 2.0, 1.0, &edges) == CC_ERR_CONFIG);
    cc_image_free(flat);

    cc_mask* comp = make_mask(1, 5, {1, 1, 0, 1, 0});
    cc_mask* kept = nullptr;
    uint64_t before = 0, after = 0;
    REQUIRE(cc_filter_components(comp, 2, &kept, &before, &after) == CC_OK);
    CHECK((before == 2 && after == 1));
    cc_mask_free(kept);
    cc_mask_free(comp);
    cc_mask_free(a);
    cc_mask_free(b);
}

TEST_CASE("synthesis, training and detection end to end") {
    const auto dir = scratch("e2e");
    const std::string spec = R"({"width": 64, "height": 64, "length_min": 8, "length_max": 40, "seed": 3})";
    char* resolved = nullptr;
    REQUIRE(cc_synth_resolve(spec.c_str(), &resolved) == CC_OK);
    CHECK(json::parse(take(resolved)).at("seed") == 3);
    CHECK(cc_synth_resolve("{\"widht\": 3}", &resolved) == CC_ERR_CONFIG);

    std::vector<std::string> imgs, masks;
    for (uint64_t i = 0; i < 5; ++i) {
        cc_image* img = nullptr;
        cc_mask* mask = nullptr;
        REQUIRE(cc_synth_sample(spec.c_str(), i, &img, &mask) == CC_OK);
        imgs.push_back("i" + std::to_string(i) + ".png");
        masks.push_back("m" + std::to_string(i) + ".png");
        REQUIRE(cc_image_save(img, (dir / imgs.back()).c_str()) == CC_OK);
        REQUIRE(cc_mask_save(mask, (dir / masks.back()).c_str()) == CC_OK);
        cc_image_free(img);
        cc_mask_free(mask);
    }
    std::vector<const char*> ip, mp;
    for (std::size_t i = 0; i < imgs.size(); ++i) {
        ip.push_back(imgs[i].c_str());
        mp.push_back(masks[i].c_str());
    }
    REQUIRE(cc_manifest_write(ip.data(), mp.data(), ip.size(), 1, (dir / "m.jsonl").c_str()) == CC_OK);

    const json cfg = {
        {"generator", {{"stem_channels", 4}, {"block_components", {1, 1, 1, 1}}, {"growth_rate", 2},
                       {"bottleneck_factor", 2}, {"head_channels", 4}}},
        {"critic", {{"widths", {4, 4, 4, 4, 1}}}},
        {"train", {{"patch_size", 32}, {"iterations", 2}, {"checkpoint_every", 2}}},
        {"data", {{"manifest", (dir / "m.jsonl").string()}}}};
    char* summary = nullptr;
    REQUIRE(cc_train(cfg.dump().c_str(), (dir / "run").c_str(), &summary) == CC_OK);
    const auto s = json::parse(take(summary));
    CHECK(s.at("generator_checkpoints").size() == 1);
    CHECK(std::isfinite(s.at("final").at("content_loss").get<double>()));

    cc_detector* det = nullptr;
    REQUIRE(cc_detector_load((dir / "run" / "gen_000002.ckpt").c_str(), &det) == CC_OK);
    cc_image* img = nullptr;
    REQUIRE(cc_image_load((dir / imgs[0]).c_str(), &img) == CC_OK);
    cc_mask* out = nullptr;
    char* stats = nullptr;
    REQUIRE(cc_detect(det, img, R"({"patch_size": 32, "min_area": 0})", &out, &stats) == CC_OK);
    const auto st = json::parse(take(stats));
    CHECK(st.at("tiles").at("count") == 4);
    uint32_t h = 0, w = 0;
    cc_mask_info(out, &h, &w, nullptr);
    CHECK((h == 64 && w == 64));
    cc_mask_free(out);
    out = nullptr;
    CHECK(cc_detect(det, img, R"({"tau": 0})", &out, nullptr) == CC_ERR_CONFIG);
    CHECK(cc_detect(det, img, R"({"patch": 32})", &out, nullptr) == CC_ERR_CONFIG);
    CHECK(out == nullptr);
    cc_image_free(img);
    cc_detector_free(det);
    CHECK(cc_detector_load((dir / "m.jsonl").c_str(), &det) == CC_ERR_FORMAT);
}

TEST_CASE("gradient check through the C interface") {
    char* csv = nullptr;
    double worst = 1.0;
    REQUIRE(cc_gradcheck(1, &csv, &worst) == CC_OK);
    CHECK(take(csv).rfind("layer,kind,max_rel_error,probes,skipped\n", 0) == 0);
    CHECK(worst < 1e-3);
}
