#include "doctest.h"

#include "support.hpp"

#include "conncrack/config.hpp"
#include "conncrack/image_io.hpp"
#include "conncrack/io_util.hpp"

using namespace conncrack;
using namespace conncrack::config;
namespace fs = std::filesystem;

TEST_CASE("writers emit complete, re-readable objects") {
    auto g = models::GeneratorConfig::desk();
    g.growth_rate = 6;
    g.fusion_taps = {4, 8};
    CHECK(to_json(generator_from_json(to_json(g))) == to_json(g));
    CHECK(to_json(generator_from_json(to_json(models::GeneratorConfig::paper()))) ==
          to_json(models::GeneratorConfig::paper()));

    auto c = models::CriticConfig::paper();
    CHECK(to_json(critic_from_json(to_json(c))) == to_json(c));

    trainer::TrainConfig t;
    t.reduction = connmap::Reduction::Sum;
    t.lambda = 5e-6;
    t.iterations = 77;
    const auto tj = to_json(t);
    CHECK(tj.at("reduction") == "sum");
    CHECK(to_json(train_from_json(tj)) == tj);

    dataset::SynthSpec s;
    s.seed = 99;
    CHECK(to_json(synth_from_json(to_json(s))) == to_json(s));

    geometry::MountConfig m;
    m.tilt_alpha_deg = 55.25;
    CHECK(to_json(mount_from_json(to_json(m))) == to_json(m));

    inference::DetectParams p;
    p.tau = 0.25f;
    CHECK(to_json(detect_from_json(to_json(p))) == to_json(p));
}

TEST_CASE("readers override only the keys present") {
    const auto t = train_from_json(json{{"iterations", 12}, {"seed", 4}});
    CHECK(t.iterations == 12);
    CHECK(t.seed == 4);
    CHECK(t.clip_c == trainer::TrainConfig{}.clip_c);
    const auto g = generator_from_json(json::object(), models::GeneratorConfig::paper());
    CHECK(to_json(g) == to_json(models::GeneratorConfig::paper()));
}

TEST_CASE("unknown keys and mistyped values are configuration errors") {
    CHECK_THROWS_AS(train_from_json(json{{"iteratons", 3}}), ConfigError);
    CHECK_THROWS_AS(train_from_json(json{{"iterations", "3"}}), ConfigError);
    CHECK_THROWS_AS(train_from_json(json{{"iterations", -3}}), ConfigError);
    CHECK_THROWS_AS(train_from_json(json{{"reduction", "median"}}), ConfigError);
    CHECK_THROWS_AS(train_from_json(json::array()), ConfigError);
    CHECK_THROWS_AS(generator_from_json(json{{"patch_size", 64}}), ConfigError);
    CHECK_THROWS_AS(critic_from_json(json{{"widths", {1, 2}}}), ConfigError);
    CHECK_THROWS_AS(synth_from_json(json{{"width", 2}}), ConfigError);
    CHECK_THROWS_AS(mount_from_json(json{{"fov_theta_deg", 0.0}}), ConfigError);
    CHECK_THROWS_AS(detect_from_json(json{{"tau", true}}), ConfigError);
    CHECK_THROWS_AS(train_job_from_json(json{{"model", json::object()}}), ConfigError);
    CHECK_THROWS_AS(train_job_from_json(json{{"data", {{"keep", "some"}}}}), ConfigError);
}

TEST_CASE("syntax errors report a byte offset") {
    try {
        parse("{\"a\": 1,, }");
        FAIL("expected a format error");
    } catch (const FormatError& e) {
        CHECK(e.offset() == 9);
    }
    const auto dir = testsupport::scratch_dir("cfg");
    io::write_file_atomic(dir / "bad.json", "[1, 2");
    CHECK_THROWS_AS(load(dir / "bad.json"), FormatError);
    CHECK_THROWS_AS(load(dir / "missing.json"), IoError);
}

TEST_CASE("train job layout and validation") {
    const json j = {{"generator", {{"growth_rate", 4}}},
                    {"train", {{"patch_size", 32}, {"iterations", 3}}},
                    {"data", {{"manifest", "m.jsonl"}, {"stride", 16}, {"keep", "cracks"}}}};
    const auto job = train_job_from_json(j);
    CHECK(job.generator.growth_rate == 4);
    CHECK(job.train.patch_size == 32);
    CHECK(job.manifest == "m.jsonl");
    CHECK(job.stride == 16);
    CHECK(job.keep == dataset::KeepRule::CracksOnly);
    CHECK_NOTHROW(job.validate());
    CHECK(to_json(train_job_from_json(to_json(job))) == to_json(job));

    auto no_manifest = job;
    no_manifest.manifest.clear();
    CHECK_THROWS_AS(no_manifest.validate(), ConfigError);
    auto gray = job;
    gray.generator.in_channels = 1;
    CHECK_THROWS_AS(gray.validate(), ConfigError);
    gray.critic.in_channels = 9;
    CHECK_NOTHROW(gray.validate());
}

TEST_CASE("checkpoint names are zero padded") {
    CHECK(checkpoint_name("gen", 200) == "gen_000200.ckpt");
    CHECK(checkpoint_name("crit", 1234567) == "crit_1234567.ckpt");
}

TEST_CASE("a train job writes its log and checkpoints") {
    const auto dir = testsupport::scratch_dir("job");
    dataset::SynthSpec spec;
    spec.width = spec.height = 64;
    spec.length_min = 8;
    spec.length_max = 40;
    std::vector<std::pair<std::string, std::string>> pairs;
    for (std::uint64_t i = 0; i < 6; ++i) {
        const auto s = dataset::synth_sample(spec, i);
        const std::string a = "i" + std::to_string(i) + ".png", b = "m" + std::to_string(i) + ".png";
        image_io::save_image(s.image, dir / a);
        image_io::save_image(mask_to_image(s.mask), dir / b);
        pairs.emplace_back(a, b);
    }
    dataset::save_manifest(dataset::split_manifest(pairs, {0.7, 0.1, 0.2}, 2), dir / "m.jsonl");

    TrainJob job;
    job.generator.stem_channels = 4;
    job.generator.block_components = {1, 1, 1, 1};
    job.generator.growth_rate = 2;
    job.generator.bottleneck_factor = 2;
    job.generator.head_channels = 4;
    job.critic.widths = {4, 4, 4, 4, 1};
    job.train.patch_size = 32;
    job.train.iterations = 4;
    job.train.checkpoint_every = 2;
    job.manifest = (dir / "m.jsonl").string();

    std::size_t prepared = 0;
    const auto res = run_train_job(job, dir / "out", [&](trainer::AdversarialTrainer&) { ++prepared; });
    CHECK(prepared == 1);
    CHECK(res.sample_count == 4 * 4);
    CHECK(res.log.rows.size() == 4);
    CHECK(res.generator_checkpoints == std::vector<fs::path>{dir / "out" / "gen_000002.ckpt", dir / "out" / "gen_000004.ckpt"});
    CHECK(res.critic_checkpoints.size() == 2);
    for (const auto& p : res.generator_checkpoints) CHECK(fs::exists(p));
    CHECK(io::read_file(dir / "out" / "train_log.csv") == res.log.to_csv());
    CHECK(fs::exists(dir / "out" / "train_timing.csv"));

    const auto again = run_train_job(job, dir / "again");
    CHECK(io::read_file(dir / "again" / "gen_000004.ckpt") == io::read_file(dir / "out" / "gen_000004.ckpt"));

    job.train.patch_size = 128;
    CHECK_THROWS_AS(run_train_job(job, dir / "none"), ConfigError);
}
