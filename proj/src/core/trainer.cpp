#include "conncrack/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace conncrack::trainer {

void TrainConfig::validate() const {
    if (!(lr_generator > 0.0) || !(lr_critic > 0.0)) throw ConfigError("learning rates must be positive");
    if (!(lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
    if (!(clip_c > 0.0)) throw ConfigError("clip bound must be positive");
    if (n_critic < 1) throw ConfigError("n_critic must be at least 1");
    if (batch_size < 1) throw ConfigError("batch size must be at least 1");
    if (patch_size < 32 || patch_size % 32 != 0)
        throw ConfigError("patch size must be a positive multiple of 32");
}

namespace {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

} // namespace

std::string TrainLog::to_csv() const {
    std::ostringstream os;
    os << "iter,content_loss,g_wgan_loss,d_wgan_loss\n";
    for (const auto& r : rows)
        os << r.iter << ',' << format_double(r.content_loss) << ',' << format_double(r.g_wgan_loss)
           << ',' << format_double(r.d_wgan_loss) << '\n';
    return os.str();
}

std::string TrainLog::timing_csv() const {
    std::ostringstream os;
    os << "iter,wall_ms\n";
    for (const auto& r : rows) os << r.iter << ',' << format_double(r.wall_ms) << '\n';
    return os.str();
}

Batch<float> make_batch(std::span<const TrainSample* const> samples) {
    if (samples.empty()) throw ConfigError("empty batch");
    const auto& is = samples.front()->image.shape();
    const auto& ms = samples.front()->maps.shape();
    Batch<float> b{Tensor<float>({samples.size(), is[0], is[1], is[2]}),
                   Tensor<float>({samples.size(), ms[0], ms[1], ms[2]})};
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i]->image.shape() != is || samples[i]->maps.shape() != ms)
            throw DimensionError("batch samples differ in shape");
        std::copy(samples[i]->image.storage().begin(), samples[i]->image.storage().end(),
                  b.images.raw() + i * samples[i]->image.size());
        std::copy(samples[i]->maps.storage().begin(), samples[i]->maps.storage().end(),
                  b.maps.raw() + i * samples[i]->maps.size());
    }
    return b;
}

template <typename T>
double mean_score(Critic<T>& d, const Tensor<T>& images, const Tensor<T>& maps) {
    const Tensor<T> s = d.score(images, maps);
    double sum = 0.0;
    for (auto v : s.storage()) sum += static_cast<double>(v);
    return sum / static_cast<double>(s.size());
}

template <typename T>
GeneratorLosses generator_objective(Generator<T>& g, Critic<T>& d, const Batch<T>& batch,
                                    double lambda, connmap::Reduction reduction, bool backprop) {
    const Tensor<T> logits = g.forward_logits(batch.images);
    const Tensor<T> probs = g.last_probs();
    auto content = connmap::content_loss(logits, batch.maps, reduction);

    const Tensor<T> scores = d.score(batch.images, probs);
    double sum = 0.0;
    for (auto v : scores.storage()) sum += static_cast<double>(v);
    GeneratorLosses out;
    out.g_wgan = -sum / static_cast<double>(scores.size());
    out.content = content.value;
    out.total = lambda * out.g_wgan + out.content;

    if (backprop) {
        Tensor<T> grad_logits = std::move(content.gradient);
        if (lambda != 0.0) {
            Tensor<T> grad_scores(scores.shape(), static_cast<T>(-lambda / static_cast<double>(scores.size())));
            const Tensor<T> grad_probs = d.backward_to_maps(grad_scores);
            d.zero_grad();
            for (std::size_t i = 0; i < grad_logits.size(); ++i)
                grad_logits[i] += grad_probs[i] * probs[i] * (T{1} - probs[i]);
        }
        g.backward_logits(grad_logits);
    }
    return out;
}

template <typename T>
double critic_objective(Generator<T>& g, Critic<T>& d, const Batch<T>& batch, bool backprop) {
    const Tensor<T> fake = g.forward(batch.images);

    const Tensor<T> real_scores = d.score(batch.images, batch.maps);
    double real = 0.0;
    for (auto v : real_scores.storage()) real += static_cast<double>(v);
    real /= static_cast<double>(real_scores.size());
    if (backprop)
        d.backward(Tensor<T>(real_scores.shape(), static_cast<T>(-1.0 / static_cast<double>(real_scores.size()))));

    const Tensor<T> fake_scores = d.score(batch.images, fake);
    double fake_mean = 0.0;
    for (auto v : fake_scores.storage()) fake_mean += static_cast<double>(v);
    fake_mean /= static_cast<double>(fake_scores.size());
    if (backprop)
        d.backward(Tensor<T>(fake_scores.shape(), static_cast<T>(1.0 / static_cast<double>(fake_scores.size()))));

    return fake_mean - real;
}

template double mean_score(Critic<float>&, const Tensor<float>&, const Tensor<float>&);
template double mean_score(Critic<double>&, const Tensor<double>&, const Tensor<double>&);
template GeneratorLosses generator_objective(Generator<float>&, Critic<float>&, const Batch<float>&, double, connmap::Reduction, bool);
template GeneratorLosses generator_objective(Generator<double>&, Critic<double>&, const Batch<double>&, double, connmap::Reduction, bool);
template double critic_objective(Generator<float>&, Critic<float>&, const Batch<float>&, bool);
template double critic_objective(Generator<double>&, Critic<double>&, const Batch<double>&, bool);

// ---------------------------------------------------------------------------

AdversarialTrainer::AdversarialTrainer(Generator<float>& g, Critic<float>& d, TrainConfig cfg)
    : g_(g), d_(d), cfg_(cfg), g_params_(g.parameters()), d_params_(d.parameters()) {
    cfg_.validate();
}

double AdversarialTrainer::critic_step(const Batch<float>& batch, std::size_t iteration) {
    nn::zero_grads(d_params_);
    const double loss = critic_objective(g_, d_, batch, true);
    if (!std::isfinite(loss)) throw DivergenceError("critic loss is not finite", static_cast<long long>(iteration));
    nn::rmsprop_step(d_params_, {cfg_.lr_critic, cfg_.rms_decay, cfg_.rms_eps});
    nn::clip_params(d_params_, cfg_.clip_c);
    if (after_critic_step) after_critic_step(d_);
    return loss;
}

GeneratorLosses AdversarialTrainer::generator_step(const Batch<float>& batch, std::size_t iteration) {
    nn::zero_grads(g_params_);
    const auto losses = generator_objective(g_, d_, batch, cfg_.lambda, cfg_.reduction, true);
    if (!std::isfinite(losses.total))
        throw DivergenceError("generator loss is not finite", static_cast<long long>(iteration));
    nn::zero_grads(d_params_);
    nn::rmsprop_step(g_params_, {cfg_.lr_generator, cfg_.rms_decay, cfg_.rms_eps});
    return losses;
}

TrainLog AdversarialTrainer::train(std::span<const TrainSample> data, const CheckpointSink& sink) {
    if (data.empty()) throw ConfigError("training dataset is empty");
    for (const auto& s : data)
        if (s.image.rank() != 3 || s.image.dim(1) != cfg_.patch_size || s.image.dim(2) != cfg_.patch_size)
            throw DimensionError("training sample does not match patch size " + std::to_string(cfg_.patch_size));

    Rng order_rng(Rng::mix(cfg_.seed, 0x5eed));
    std::vector<std::size_t> order(data.size());
    std::size_t cursor = order.size();
    auto next_batch = [&] {
        std::vector<const TrainSample*> picked;
        while (picked.size() < cfg_.batch_size) {
            if (cursor == order.size()) {
                std::iota(order.begin(), order.end(), std::size_t{0});
                order_rng.shuffle(order);
                cursor = 0;
            }
            picked.push_back(&data[order[cursor++]]);
        }
        return make_batch(picked);
    };

    TrainLog log;
    log.rows.reserve(cfg_.iterations);
    for (std::size_t it = 1; it <= cfg_.iterations; ++it) {
        const auto start = std::chrono::steady_clock::now();
        Batch<float> batch;
        double d_loss = 0.0;
        for (std::size_t c = 0; c < cfg_.n_critic; ++c) {
            batch = next_batch();
            d_loss = critic_step(batch, it);
        }
        const auto g_losses = generator_step(batch, it);
        const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        log.rows.push_back({it, g_losses.content, g_losses.g_wgan, d_loss, ms});
        if (sink && cfg_.checkpoint_every > 0 && it % cfg_.checkpoint_every == 0 && it != cfg_.iterations)
            sink(it, g_, d_);
    }
    if (sink) sink(cfg_.iterations, g_, d_);
    return log;
}

} // namespace conncrack::trainer
