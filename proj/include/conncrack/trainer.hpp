#pragma once

#include "conncrack/connmap.hpp"
#include "conncrack/models.hpp"
#include "conncrack/nn/gradcheck.hpp"
#include "conncrack/nn/optim.hpp"

#include <functional>
#include <string>
#include <vector>

namespace conncrack::trainer {

using models::Critic;
using models::Generator;
using nn::Tensor;

struct TrainConfig {
    double lr_generator = 1e-5;
    double lr_critic = 1e-5;
    /// Weight of the adversarial term. 1.0 pairs with mean reduction; the
    /// published 5e-6 / 1e-6 values assume a summed content loss.
    double lambda = 1.0;
    connmap::Reduction reduction = connmap::Reduction::Mean;
    double clip_c = 0.01;
    std::size_t n_critic = 1;
    std::size_t iterations = 0;
    std::uint64_t seed = 0;
    std::size_t patch_size = 256;
    std::size_t batch_size = 1;
    /// Emit checkpoints every this many iterations (0: only at the end).
    std::size_t checkpoint_every = 0;
    double rms_decay = 0.9;
    double rms_eps = 1e-8;

    void validate() const;
};

struct TrainRow {
    std::size_t iter = 0;
    double content_loss = 0.0;
    double g_wgan_loss = 0.0;
    double d_wgan_loss = 0.0;
    double wall_ms = 0.0;
};

struct TrainLog {
    std::vector<TrainRow> rows;

    /// iter,content_loss,g_wgan_loss,d_wgan_loss. Wall time is kept out so
    /// the file is reproducible bit for bit.
    std::string to_csv() const;
    /// iter,wall_ms
    std::string timing_csv() const;
};

/// One (image, ground-truth maps) training pair: 3 x p x p and 8 x p x p.
struct TrainSample {
    Tensor<float> image;
    Tensor<float> maps;
};

template <typename T>
struct Batch {
    Tensor<T> images;  // N x C x p x p
    Tensor<T> maps;    // N x 8 x p x p
};

Batch<float> make_batch(std::span<const TrainSample* const> samples);

struct GeneratorLosses {
    double total = 0.0;    // lambda * g_wgan + content
    double g_wgan = 0.0;   // -E[D(x, G(x))]
    double content = 0.0;
};

/// Evaluates lambda * (-E[D(x, G(x))]) + L_content(G(x), y). With
/// `backprop`, accumulates the gradient into G's parameters only (the
/// critic's accumulators are cleared afterwards).
template <typename T>
GeneratorLosses generator_objective(Generator<T>& g, Critic<T>& d, const Batch<T>& batch,
                                    double lambda, connmap::Reduction reduction, bool backprop);

/// Evaluates E[D(x, G(x))] - E[D(x, y)], the negated Wasserstein estimate
/// the critic descends. With `backprop`, accumulates into D's parameters.
template <typename T>
double critic_objective(Generator<T>& g, Critic<T>& d, const Batch<T>& batch, bool backprop);

/// Mean critic score over a batch of (image, maps) pairs.
template <typename T>
double mean_score(Critic<T>& d, const Tensor<T>& images, const Tensor<T>& maps);

/// Finite-difference checks of the training objectives on a micro
/// generator/critic pair in double precision: the content loss (mean and
/// sum) with respect to logits, the full generator forward, the generator
/// objective with respect to G's parameters and the critic objective with
/// respect to D's parameters.
nn::GradcheckReport gradcheck_objectives(std::uint64_t seed, const nn::GradcheckOptions& opt = {});

class AdversarialTrainer {
public:
    using CheckpointSink = std::function<void(std::size_t iteration, Generator<float>&, Critic<float>&)>;

    AdversarialTrainer(Generator<float>& g, Critic<float>& d, TrainConfig cfg);

    /// One critic update followed by weight clipping. Returns d_loss.
    double critic_step(const Batch<float>& batch, std::size_t iteration = 0);
    /// One generator update.
    GeneratorLosses generator_step(const Batch<float>& batch, std::size_t iteration = 0);

    /// Alternating optimisation over `data` in a seeded order. The sink
    /// fires every `checkpoint_every` iterations and once at the end.
    /// Throws ConfigError for an empty dataset and DivergenceError on a
    /// non-finite loss.
    TrainLog train(std::span<const TrainSample> data, const CheckpointSink& sink = {});

    /// Optional hook run after every critic update (for invariant checks).
    std::function<void(const Critic<float>&)> after_critic_step;

    const TrainConfig& config() const { return cfg_; }

private:
    Generator<float>& g_;
    Critic<float>& d_;
    TrainConfig cfg_;
    nn::ParamList<float> g_params_;
    nn::ParamList<float> d_params_;
};

} // namespace conncrack::trainer
