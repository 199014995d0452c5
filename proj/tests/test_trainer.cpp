#include "doctest.h"

#include "support.hpp"

#include "conncrack/dataset.hpp"
#include "conncrack/trainer.hpp"

#include <cmath>
#include <limits>

using namespace conncrack;
using namespace conncrack::trainer;

namespace {

models::GeneratorConfig micro_generator() {
    models::GeneratorConfig c;
    c.stem_channels = 4;
    c.block_components = {1, 1, 1, 1};
    c.growth_rate = 2;
    c.bottleneck_factor = 2;
    c.head_channels = 4;
    return c;
}

models::CriticConfig micro_critic() {
    models::CriticConfig c;
    c.widths = {4, 4, 4, 4, 1};
    return c;
}

std::vector<TrainSample> synthetic_samples(std::size_t n, std::size_t p = 32) {
    dataset::SynthSpec spec;
    spec.width = spec.height = p;
    spec.length_min = 8;
    spec.length_max = p;
    spec.seed = 3;
    std::vector<TrainSample> out;
    for (std::size_t i = 0; i < n; ++i) {
        const auto s = dataset::synth_sample(spec, i);
        auto maps = connmap::encode(s.mask).to_tensor();
        out.push_back({dataset::image_to_tensor(s.image),
                       Tensor<float>({8, p, p}, std::move(maps.storage()))});
    }
    return out;
}

TrainConfig quick_config(std::size_t iterations) {
    TrainConfig c;
    c.iterations = iterations;
    c.patch_size = 32;
    c.lr_generator = 1e-3;
    c.lr_critic = 1e-3;
    c.seed = 17;
    return c;
}

struct Run {
    std::string log;
    std::vector<nn::Checkpoint> gens, crits;
    std::vector<std::size_t> sink_iters;
};

Run train_once(const TrainConfig& cfg, const std::vector<TrainSample>& data) {
    models::Generator<float> g(micro_generator(), 1);
    models::Critic<float> d(micro_critic(), 2);
    AdversarialTrainer t(g, d, cfg);
    Run r;
    const auto log = t.train(data, [&](std::size_t it, models::Generator<float>& gg, models::Critic<float>& dd) {
        r.sink_iters.push_back(it);
        r.gens.push_back(nn::snapshot(gg.parameters()));
        r.crits.push_back(nn::snapshot(dd.parameters()));
    });
    r.log = log.to_csv();
    return r;
}

} // namespace

TEST_CASE("training configuration checks") {
    auto bad = [](auto mutate) {
        TrainConfig c;
        mutate(c);
        CHECK_THROWS_AS(c.validate(), ConfigError);
    };
    bad([](TrainConfig& c) { c.lr_generator = 0.0; });
    bad([](TrainConfig& c) { c.lr_critic = -1.0; });
    bad([](TrainConfig& c) { c.lambda = -1.0; });
    bad([](TrainConfig& c) { c.clip_c = 0.0; });
    bad([](TrainConfig& c) { c.n_critic = 0; });
    bad([](TrainConfig& c) { c.batch_size = 0; });
    bad([](TrainConfig& c) { c.patch_size = 48; });
    TrainConfig ok;
    CHECK_NOTHROW(ok.validate());
    CHECK(ok.clip_c == 0.01);
    CHECK(ok.n_critic == 1);
    CHECK(ok.lambda == 1.0);
    CHECK(ok.reduction == connmap::Reduction::Mean);
}

TEST_CASE("zero iterations leave the parameters alone and log nothing") {
    const auto data = synthetic_samples(2);
    models::Generator<float> g(micro_generator(), 1);
    models::Critic<float> d(micro_critic(), 2);
    const auto hg = nn::param_checksum(g.parameters());
    const auto hd = nn::param_checksum(d.parameters());
    AdversarialTrainer t(g, d, quick_config(0));
    const auto log = t.train(data);
    CHECK(log.rows.empty());
    CHECK(log.to_csv() == "iter,content_loss,g_wgan_loss,d_wgan_loss\n");
    CHECK(nn::param_checksum(g.parameters()) == hg);
    CHECK(nn::param_checksum(d.parameters()) == hd);
}

TEST_CASE("log rows, checkpoint cadence and csv layout") {
    auto cfg = quick_config(7);
    cfg.checkpoint_every = 3;
    const auto run = train_once(cfg, synthetic_samples(3));
    CHECK(run.sink_iters == std::vector<std::size_t>{3, 6, 7});
    std::size_t lines = 0;
    for (char c : run.log) lines += c == '\n';
    CHECK(lines == 8);
    CHECK(run.log.rfind("iter,content_loss,g_wgan_loss,d_wgan_loss\n1,", 0) == 0);
}

TEST_CASE("each step only moves its own network") {
    const auto data = synthetic_samples(2);
    models::Generator<float> g(micro_generator(), 1);
    models::Critic<float> d(micro_critic(), 2);
    AdversarialTrainer t(g, d, quick_config(1));
    const TrainSample* picked[] = {&data[0], &data[1]};
    const auto batch = make_batch(picked);
    for (int round = 0; round < 3; ++round) {
        const auto hg = nn::param_checksum(g.parameters());
        const auto hd = nn::param_checksum(d.parameters());
        t.critic_step(batch);
        CHECK(nn::param_checksum(g.parameters()) == hg);
        CHECK(nn::param_checksum(d.parameters()) != hd);
        const auto hd2 = nn::param_checksum(d.parameters());
        t.generator_step(batch);
        CHECK(nn::param_checksum(d.parameters()) == hd2);
        CHECK(nn::param_checksum(g.parameters()) != hg);
    }
}

TEST_CASE("critic parameters stay inside the clip bound after every update") {
    auto cfg = quick_config(12);
    cfg.lr_critic = 0.05;  // large steps so clipping has work to do
    models::Generator<float> g(micro_generator(), 1);
    models::Critic<float> d(micro_critic(), 2);
    AdversarialTrainer t(g, d, cfg);
    std::size_t calls = 0;
    double worst = 0.0;
    t.after_critic_step = [&](const models::Critic<float>& critic) {
        ++calls;
        auto& mutable_critic = const_cast<models::Critic<float>&>(critic);
        worst = std::max(worst, nn::max_abs_param(mutable_critic.parameters()));
    };
    t.train(synthetic_samples(3));
    CHECK(calls == 12);
    CHECK(worst <= cfg.clip_c);
    CHECK(worst == doctest::Approx(cfg.clip_c));
}

TEST_CASE("reported losses match an independent recomputation") {
    const auto data = synthetic_samples(2);
    models::Generator<float> g(micro_generator(), 1);
    models::Critic<float> d(micro_critic(), 2);
    auto cfg = quick_config(1);
    cfg.lambda = 0.3;
    AdversarialTrainer t(g, d, cfg);
    const TrainSample* picked[] = {&data[0], &data[1]};
    const auto batch = make_batch(picked);

    const auto fake = g.forward(batch.images);
    const double expected_g = -mean_score(d, batch.images, fake);
    const double expected_d = mean_score(d, batch.images, fake) - mean_score(d, batch.images, batch.maps);
    const double real_before = mean_score(d, batch.images, batch.maps);
    const auto logits = g.forward_logits(batch.images);
    const double expected_content = connmap::content_loss(logits, batch.maps).value;

    CHECK(t.critic_step(batch) == doctest::Approx(expected_d).epsilon(1e-6));
    const double g_expected_after_critic = -mean_score(d, batch.images, g.forward(batch.images));
    const double real_mid = mean_score(d, batch.images, batch.maps);
    const auto losses = t.generator_step(batch);
    CHECK(losses.g_wgan == doctest::Approx(g_expected_after_critic).epsilon(1e-6));
    CHECK(losses.content == doctest::Approx(expected_content).epsilon(1e-6));
    CHECK(losses.total == doctest::Approx(cfg.lambda * losses.g_wgan + losses.content).epsilon(1e-12));
    // The generator step does not touch the real-pair term.
    CHECK(mean_score(d, batch.images, batch.maps) == real_mid);
    CHECK(real_before != real_mid);
    CHECK(std::isfinite(expected_g));
}

TEST_CASE("training is deterministic") {
    auto cfg = quick_config(6);
    cfg.batch_size = 2;
    cfg.checkpoint_every = 2;
    const auto data = synthetic_samples(5);
    const auto a = train_once(cfg, data);
    const auto b = train_once(cfg, data);
    CHECK(a.log == b.log);
    REQUIRE(a.gens.size() == b.gens.size());
    for (std::size_t i = 0; i < a.gens.size(); ++i) {
        CHECK(nn::encode_checkpoint(a.gens[i]) == nn::encode_checkpoint(b.gens[i]));
        CHECK(nn::encode_checkpoint(a.crits[i]) == nn::encode_checkpoint(b.crits[i]));
    }
    cfg.seed = 18;
    CHECK(train_once(cfg, data).log != a.log);
}

TEST_CASE("training input errors") {
    models::Generator<float> g(micro_generator(), 1);
    models::Critic<float> d(micro_critic(), 2);
    AdversarialTrainer t(g, d, quick_config(2));
    CHECK_THROWS_AS(t.train({}), ConfigError);
    CHECK_THROWS_AS(t.train(synthetic_samples(1, 64)), DimensionError);

    auto poisoned = synthetic_samples(1);
    poisoned[0].image[5] = std::numeric_limits<float>::quiet_NaN();
    try {
        t.train(poisoned);
        FAIL("expected divergence");
    } catch (const DivergenceError& e) {
        CHECK(e.iteration() == 1);
    }

    const auto a = synthetic_samples(1, 32), b = synthetic_samples(1, 64);
    const TrainSample* mixed[] = {&a[0], &b[0]};
    CHECK_THROWS_AS(make_batch(mixed), DimensionError);
    CHECK_THROWS_AS(make_batch({}), ConfigError);
}

TEST_CASE("objective gradients match central differences") {
    const auto report = gradcheck_objectives(5);
    std::set<std::string> kinds;
    for (const auto& r : report) {
        CAPTURE(r.name);
        kinds.insert(r.kind);
        CHECK(r.probes > 0);
        CHECK(r.max_rel_error < 1e-3);
    }
    CHECK(kinds.count("content_loss") == 1);
    CHECK(kinds.count("generator_objective") == 1);
    CHECK(kinds.count("critic_objective") == 1);
}
