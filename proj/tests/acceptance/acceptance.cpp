// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.
//
//   acceptance [work_dir]
//
// Criteria 7-9 train the desk generator twice for 2000 iterations; expect
// roughly a quarter of an hour on one core.

#include "support.hpp"

#include "conncrack/config.hpp"
#include "conncrack/connmap.hpp"
#include "conncrack/evaluation.hpp"
#include "conncrack/geometry.hpp"
#include "conncrack/image_io.hpp"
#include "conncrack/inference.hpp"
#include "conncrack/io_util.hpp"
#include "conncrack/models.hpp"
#include "conncrack/nn/gradcheck.hpp"
#include "conncrack/trainer.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <set>
#include <string>

using namespace conncrack;
using nn::Tensor;
namespace fs = std::filesystem;

namespace {

// Tolerances and budgets.
constexpr double kTableTolerance = 0.01;          // px/cm
constexpr double kTableSeconds = 1.0;
constexpr double kGradTolerance = 1e-3;
constexpr double kGradToleranceLinear = 1e-4;
constexpr double kGradSeconds = 300.0;
constexpr std::size_t kRoundTripRandomMasks = 1000;
constexpr std::size_t kMetricPairs = 1000;
constexpr std::size_t kComponentMasks = 500;
constexpr double kSmokeSeconds = 1800.0;
constexpr std::size_t kSmokeIterations = 2000;
constexpr std::size_t kTrainImages = 64, kValImages = 16, kTestImages = 16;
constexpr double kEvalTolerance = 5.0;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int id, const char* title, bool pass, const std::string& detail) {
    std::printf("%s %d %s: %s\n", pass ? "PASS" : "FAIL", id, title, detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

// ---------------------------------------------------------------------------

void criterion_table() {
    const auto t0 = Clock::now();
    struct Row {
        geometry::MountConfig mount;
        double fraction, expected;
    };
    const auto rear = geometry::rear_mount(), front = geometry::front_mount();
    const Row rows[] = {{rear, 0.0, 8.62},  {rear, 0.25, 6.99}, {rear, 0.5, 4.45}, {rear, 0.75, 1.91},
                        {rear, 1.0, 0.28},  {front, 0.0, 1.93}, {front, 0.25, 0.53}, {front, 0.5, 0.0}};
    double worst = 0.0;
    for (const auto& r : rows)
        worst = std::max(worst, std::abs(geometry::spatial_resolution(r.mount, r.fraction) - r.expected));
    const double sec = seconds_since(t0);
    report(1, "Mount resolution table", worst <= kTableTolerance && sec < kTableSeconds,
           "8 values, max |error| " + fmt("%.4f", worst) + " px/cm, " + fmt("%.4f", sec) + " s");
}

void criterion_roundtrip() {
    std::size_t mismatches = 0, total = 0;
    for (unsigned bits = 0; bits < 512; ++bits, ++total) {
        const auto m = testsupport::mask3x3(bits);
        if (!(connmap::decode(connmap::encode(m)) == testsupport::without_isolated(m))) ++mismatches;
    }
    Rng rng(2024);
    for (std::size_t i = 0; i < kRoundTripRandomMasks; ++i, ++total) {
        const auto m = testsupport::random_mask(rng, 16, 16, rng.uniform(0.05, 0.8));
        if (!(connmap::decode(connmap::encode(m)) == testsupport::without_isolated(m))) ++mismatches;
    }
    report(2, "Connectivity round trip", mismatches == 0,
           std::to_string(total) + " masks, " + std::to_string(mismatches) + " mismatches");
}

void criterion_gradients() {
    const std::set<std::string> linear{"conv2d", "deconv2d", "avgpool2", "concat"};
    const auto t0 = Clock::now();
    auto rows = nn::gradcheck_layer_suite(31);
    const auto objectives = trainer::gradcheck_objectives(32);
    rows.insert(rows.end(), objectives.begin(), objectives.end());
    const double sec = seconds_since(t0);
    bool ok = sec < kGradSeconds;
    std::string worst_name;
    double worst_ratio = 0.0;
    std::set<std::string> kinds;
    for (const auto& r : rows) {
        kinds.insert(r.kind);
        const double tol = linear.count(r.kind) ? kGradToleranceLinear : kGradTolerance;
        if (r.probes == 0 || !(r.max_rel_error < tol)) ok = false;
        if (r.max_rel_error / tol >= worst_ratio) {
            worst_ratio = r.max_rel_error / tol;
            worst_name = r.kind + "/" + r.name + " " + fmt("%.2e", r.max_rel_error);
        }
    }
    ok = ok && kinds.count("content_loss") && kinds.count("generator_objective");
    report(3, "Gradient suite", ok,
           std::to_string(rows.size()) + " rows over " + std::to_string(kinds.size()) + " kinds, worst " + worst_name +
               ", " + fmt("%.1f", sec) + " s");
}

void criterion_architecture() {
    bool ok = true;
    std::string detail;
    models::Critic<float> critic(models::CriticConfig::paper(), 1);
    const auto shape = critic.output_shape({1, 11, 256, 256});
    Rng rng(5);
    Tensor<float> img({1, 3, 256, 256});
    for (auto& v : img.storage()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    const auto scores = critic.score(img, Tensor<float>({1, 8, 256, 256}, 0.5f));
    const std::size_t rf = models::receptive_field(models::CriticConfig::paper());
    ok = ok && shape == nn::Shape{1, 1, 30, 30} && scores.shape() == shape && rf == 70;
    detail += "critic 11x256x256 -> " + std::to_string(scores.dim(1)) + "x" + std::to_string(scores.dim(2)) + "x" +
              std::to_string(scores.dim(3)) + ", receptive field " + std::to_string(rf);

    for (const auto& [name, cfg] : {std::pair{"desk", models::GeneratorConfig::desk()},
                                    std::pair{"densenet121", models::GeneratorConfig::paper()}}) {
        models::Generator<float> g(cfg, 2);
        for (std::size_t p : {128u, 256u}) {
            Tensor<float> x({1, 3, p, p});
            for (auto& v : x.storage()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
            const auto y = g.forward(x);
            bool inside = y.shape() == nn::Shape{1, 8, p, p};
            for (float v : y.storage()) inside = inside && v > 0.0f && v < 1.0f;
            ok = ok && inside;
            detail += std::string("; ") + name + " generator " + std::to_string(p) + " -> 8x" + std::to_string(y.dim(2)) +
                      "x" + std::to_string(y.dim(3)) + (inside ? " in (0,1)" : " OUT OF RANGE");
        }
    }
    report(4, "Architecture contracts", ok, detail);
}

void criterion_metrics() {
    Rng rng(77);
    std::size_t mismatches = 0;
    for (std::size_t i = 0; i < kMetricPairs; ++i) {
        const auto gt = testsupport::random_shaped_mask(rng, 32, 32);
        const auto pred = testsupport::random_mask(rng, gt.height(), gt.width(), rng.uniform(0.0, 0.5));
        for (double tol : {0.0, 3.0, 5.0}) {
            const auto r = eval::tolerance_metrics(pred, gt, tol);
            const auto b = testsupport::brute_metrics(pred, gt, tol);
            if (r.tp != b.tp || r.fp != b.fp || r.fn != b.fn) ++mismatches;
        }
    }
    report(5, "Metric oracle equivalence", mismatches == 0,
           std::to_string(kMetricPairs) + " pairs x 3 tolerances, " + std::to_string(mismatches) + " mismatches");
}

void criterion_components() {
    Rng rng(78);
    std::size_t mismatches = 0;
    for (std::size_t i = 0; i < kComponentMasks; ++i) {
        const auto m = testsupport::random_mask(rng, 32, 32, rng.uniform(0.05, 0.7));
        std::set<std::vector<std::size_t>> got;
        for (auto c : inference::dfs_components(m).components) {
            std::sort(c.begin(), c.end());
            got.insert(std::move(c));
        }
        if (got != testsupport::union_find_partition(m)) ++mismatches;
    }
    report(6, "DFS oracle equivalence", mismatches == 0,
           std::to_string(kComponentMasks) + " masks, " + std::to_string(mismatches) + " mismatches");
}

// ---------------------------------------------------------------------------
// Smoke training

struct SmokeRun {
    fs::path dir;
    double train_seconds = 0;
    trainer::TrainLog log;
    std::size_t clip_violations = 0;
    std::size_t critic_steps = 0;
    double max_critic_param = 0;
    float tau = 0;
    std::size_t min_area = 0;
    double val_f1 = 0;
    eval::MetricsReport test;
    std::vector<fs::path> artifacts;  // files compared across runs
};

dataset::SynthSpec smoke_spec() {
    dataset::SynthSpec s;
    s.width = s.height = 64;
    s.seed = 7;
    return s;
}

// Writes the synthetic set once; both runs read the same files.
fs::path write_smoke_data(const fs::path& root) {
    const auto spec = smoke_spec();
    fs::create_directories(root / "images");
    fs::create_directories(root / "masks");
    dataset::DatasetManifest m;
    const std::size_t total = kTrainImages + kValImages + kTestImages;
    for (std::size_t i = 0; i < total; ++i) {
        const auto s = dataset::synth_sample(spec, i);
        char name[32];
        std::snprintf(name, sizeof name, "%06zu.png", i);
        image_io::save_image(s.image, root / "images" / name);
        image_io::save_image(mask_to_image(s.mask), root / "masks" / name);
        const auto split = i < kTrainImages                ? dataset::Split::Train
                           : i < kTrainImages + kValImages ? dataset::Split::Val
                                                           : dataset::Split::Test;
        m.entries.push_back({std::string("images/") + name, std::string("masks/") + name, split});
    }
    dataset::save_manifest(m, root / "manifest.jsonl");
    return root / "manifest.jsonl";
}

config::TrainJob smoke_job(const fs::path& manifest) {
    config::TrainJob job;
    job.generator = models::GeneratorConfig::desk();  // blocks [2,2,2,2], growth 8
    job.critic = models::CriticConfig::desk();
    job.train.patch_size = 64;
    job.train.iterations = kSmokeIterations;
    job.train.reduction = connmap::Reduction::Sum;
    job.train.lambda = 5e-6;
    job.train.lr_generator = 1e-3;
    job.train.lr_critic = 1e-3;
    job.train.checkpoint_every = 500;
    job.train.seed = 3;
    job.manifest = manifest.string();
    return job;
}

eval::MetricsReport score(models::Generator<float>& g, const std::vector<dataset::ManifestEntry>& entries,
                          const inference::DetectParams& p, const fs::path* save_dir) {
    std::vector<eval::MetricsReport> reports;
    for (const auto& e : entries) {
        const auto res = inference::detect(image_io::load_image(e.image), g, p);
        reports.push_back(eval::tolerance_metrics(res.mask, image_io::load_mask(e.mask), kEvalTolerance));
        if (save_dir) image_io::save_image(mask_to_image(res.mask), *save_dir / fs::path(e.image).filename());
    }
    return eval::accumulate(reports);
}

SmokeRun smoke_run(const fs::path& manifest, const fs::path& dir) {
    SmokeRun run;
    run.dir = dir;
    fs::remove_all(dir);
    const auto job = smoke_job(manifest);
    const double clip = job.train.clip_c;

    const auto t0 = Clock::now();
    const auto res = config::run_train_job(job, dir, [&](trainer::AdversarialTrainer& tr) {
        tr.after_critic_step = [&](const models::Critic<float>& critic) {
            ++run.critic_steps;
            const double m = nn::max_abs_param(const_cast<models::Critic<float>&>(critic).parameters());
            run.max_critic_param = std::max(run.max_critic_param, m);
            if (m > clip) ++run.clip_violations;
        };
    });
    run.train_seconds = seconds_since(t0);
    run.log = res.log;
    run.artifacts.push_back(dir / "train_log.csv");
    for (const auto& p : res.generator_checkpoints) run.artifacts.push_back(p);
    for (const auto& p : res.critic_checkpoints) run.artifacts.push_back(p);

    const auto m = dataset::load_manifest(manifest);
    auto g = models::load_generator(nn::load_checkpoint(res.generator_checkpoints.back()));

    // Threshold and area filter are chosen on the validation split only.
    inference::DetectParams p;
    p.patch_size = 64;
    p.threads = 1;
    run.val_f1 = -1;
    for (float tau : {0.05f, 0.1f, 0.2f, 0.3f, 0.5f})
        for (std::size_t min_area : {0u, 5u, 20u}) {
            p.tau = tau;
            p.min_area = min_area;
            const double f1 = score(*g, m.select(dataset::Split::Val), p, nullptr).f1;
            if (f1 > run.val_f1) {
                run.val_f1 = f1;
                run.tau = tau;
                run.min_area = min_area;
            }
        }
    p.tau = run.tau;
    p.min_area = run.min_area;
    fs::create_directories(dir / "pred");
    const auto test = m.select(dataset::Split::Test);
    const fs::path pred = dir / "pred";
    run.test = score(*g, test, p, &pred);
    for (const auto& e : test) run.artifacts.push_back(pred / fs::path(e.image).filename());
    return run;
}

// Mean of the 5-element trailing moving average over [begin, end).
double moving_average_mean(const std::vector<double>& x, std::size_t begin, std::size_t end) {
    double total = 0;
    std::size_t n = 0;
    for (std::size_t i = std::max<std::size_t>(begin, 4); i < end; ++i) {
        double s = 0;
        for (std::size_t k = 0; k < 5; ++k) s += x[i - k];
        total += s / 5.0;
        ++n;
    }
    return total / static_cast<double>(n);
}

void criteria_smoke(const fs::path& work) {
    const auto manifest = write_smoke_data(work / "data");
    const auto m = dataset::load_manifest(manifest);
    const auto test = m.select(dataset::Split::Test);

    // Baselines on the test split. Sobel gets its best threshold on the
    // test images themselves.
    std::vector<eval::MetricsReport> all_positive;
    std::vector<Image> images;
    std::vector<BinaryMask> truths;
    for (const auto& e : test) {
        images.push_back(image_io::load_image(e.image));
        truths.push_back(image_io::load_mask(e.mask));
        BinaryMask ones(truths.back().height(), truths.back().width(),
                        std::vector<std::uint8_t>(truths.back().values().size(), 1));
        all_positive.push_back(eval::tolerance_metrics(ones, truths.back(), kEvalTolerance));
    }
    const double all_positive_f1 = eval::accumulate(all_positive).f1;
    double sobel_f1 = 0, sobel_threshold = 0;
    for (double t = 10.0; t < 2000.0; t *= 1.05) {
        std::vector<eval::MetricsReport> r;
        for (std::size_t i = 0; i < images.size(); ++i)
            r.push_back(eval::tolerance_metrics(eval::sobel_baseline(images[i], t), truths[i], kEvalTolerance));
        const double f1 = eval::accumulate(r).f1;
        if (f1 > sobel_f1) {
            sobel_f1 = f1;
            sobel_threshold = t;
        }
    }

    const auto a = smoke_run(manifest, work / "run_a");

    std::vector<double> content;
    for (const auto& r : a.log.rows) content.push_back(r.content_loss);
    const std::size_t n = content.size(), decile = n / 10;
    const double first = moving_average_mean(content, 0, decile);
    const double last = moving_average_mean(content, n - decile, n);
    const bool ok7 = n == kSmokeIterations && a.train_seconds < kSmokeSeconds && last < first &&
                     a.test.f1 > all_positive_f1 && a.test.f1 > sobel_f1;
    report(7, "Training smoke", ok7,
           std::to_string(n) + " iterations in " + fmt("%.0f", a.train_seconds) + " s; content loss MA5 first decile " +
               fmt("%.2f", first) + " -> last decile " + fmt("%.2f", last) + "; test F1 " + fmt("%.3f", a.test.f1) +
               " (P " + fmt("%.3f", a.test.precision) + " R " + fmt("%.3f", a.test.recall) + ", tau " +
               fmt("%.2f", a.tau) + ", min_area " + std::to_string(a.min_area) + " from val F1 " +
               fmt("%.3f", a.val_f1) + ") vs all-positive " + fmt("%.3f", all_positive_f1) + " and Sobel " +
               fmt("%.3f", sobel_f1) + " at threshold " + fmt("%.1f", sobel_threshold));

    report(8, "Clipping invariant", a.clip_violations == 0 && a.critic_steps == kSmokeIterations,
           std::to_string(a.critic_steps) + " critic steps, " + std::to_string(a.clip_violations) +
               " violations, max |w| " + fmt("%.6f", a.max_critic_param));

    const auto b = smoke_run(manifest, work / "run_b");
    std::size_t differing = 0;
    bool same_list = a.artifacts.size() == b.artifacts.size();
    for (std::size_t i = 0; same_list && i < a.artifacts.size(); ++i) {
        same_list = a.artifacts[i].filename() == b.artifacts[i].filename();
        if (io::read_file(a.artifacts[i]) != io::read_file(b.artifacts[i])) ++differing;
    }
    report(9, "End-to-end determinism", same_list && differing == 0,
           std::to_string(a.artifacts.size()) + " files (log, checkpoints, masks) compared, " +
               std::to_string(differing) + " differ");
}

} // namespace

int main(int argc, char** argv) {
    const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "conncrack_acceptance";
    fs::create_directories(work);
    try {
        criterion_table();
        criterion_roundtrip();
        criterion_gradients();
        criterion_architecture();
        criterion_metrics();
        criterion_components();
        criteria_smoke(work);
    } catch (const std::exception& e) {
        std::printf("FAIL aborted: %s\n", e.what());
        return 1;
    }
    return failures == 0 ? 0 : 1;
}
