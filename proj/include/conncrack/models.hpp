#pragma once

#include "conncrack/nn/checkpoint.hpp"
#include "conncrack/nn/layers.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace conncrack::models {

using nn::Shape;
using nn::Tensor;

/// DenseNet-style encoder with a transposed-convolution fusion head.
struct GeneratorConfig {
    std::size_t in_channels = 3;
    std::size_t stem_channels = 16;
    std::size_t stem_kernel = 7;
    std::array<std::size_t, 4> block_components{2, 2, 2, 2};
    std::size_t growth_rate = 8;
    std::size_t bottleneck_factor = 4;
    /// Transition width = max(1, floor(channels * compression)).
    double compression = 0.5;
    std::size_t head_channels = 16;
    /// Encoder scales (input extent / feature extent) whose block outputs are
    /// projected and added into the head. Allowed: 4, 8, 16.
    std::vector<std::size_t> fusion_taps{8, 16};
    double slope = 0.2;

    /// DenseNet121 widths: stem 64, blocks [6, 12, 24, 16], growth 32.
    static GeneratorConfig paper();
    /// Small variant for CPU training.
    static GeneratorConfig desk();

    void validate() const;
    /// Channel count of the block output at each scale 4, 8, 16, 32.
    std::array<std::size_t, 4> block_output_channels() const;
};

/// Five-layer fully convolutional critic scoring (image, maps) pairs on a
/// grid of overlapping windows.
struct CriticConfig {
    std::size_t in_channels = 3 + 8;
    std::vector<std::size_t> widths{64, 128, 256, 512, 1};
    std::size_t kernel = 4;
    std::vector<std::size_t> strides{2, 2, 2, 1, 1};
    std::size_t padding = 1;
    double slope = 0.2;

    static CriticConfig paper();
    /// Half-width variant for CPU training.
    static CriticConfig desk();

    void validate() const;
};

/// Receptive field of a conv stack given (kernel, stride) per layer:
/// r <- r + (k - 1) * j, j <- j * s.
std::size_t receptive_field(std::span<const std::pair<std::size_t, std::size_t>> layers);
std::size_t receptive_field(const CriticConfig& cfg);

/// Forward returns sigmoid probabilities; the pre-sigmoid logits are also
/// reachable so the content loss can be taken in the stable logits form.
template <typename T>
class Generator final : public nn::Module<T> {
public:
    Generator(const GeneratorConfig& cfg, std::uint64_t seed);

    std::string_view kind() const override { return "generator"; }
    Tensor<T> forward(const Tensor<T>& x) override;
    Tensor<T> backward(const Tensor<T>& grad_probs) override;
    Shape output_shape(const Shape& input) const override;
    void collect_parameters(nn::ParamList<T>& out) override;
    std::uint64_t branch_hash() const override;

    /// Runs the network and returns logits (probabilities are cached).
    Tensor<T> forward_logits(const Tensor<T>& x);
    /// Backpropagates a gradient taken with respect to the logits.
    Tensor<T> backward_logits(const Tensor<T>& grad_logits);
    const Tensor<T>& last_probs() const { return probs_; }

    const GeneratorConfig& config() const { return cfg_; }

private:
    bool has_tap(std::size_t scale) const;

    GeneratorConfig cfg_;
    nn::Conv2d<T> stem_;
    nn::LeakyRelu<T> stem_act_;
    nn::MaxPool2<T> pool_;
    std::vector<nn::DenseBlock<T>> blocks_;
    std::vector<nn::TransitionBlock<T>> transitions_;
    std::vector<nn::Deconv2d<T>> ups_;
    std::vector<nn::LeakyRelu<T>> up_acts_;
    std::vector<std::pair<std::size_t, nn::Conv2d<T>>> projections_;  // (scale, conv)
    nn::Conv2d<T> out_conv_;
    nn::Sigmoid<T> sigmoid_;
    Tensor<T> probs_;
};

template <typename T>
class Critic final : public nn::Module<T> {
public:
    Critic(const CriticConfig& cfg, std::uint64_t seed);

    std::string_view kind() const override { return "critic"; }
    Tensor<T> forward(const Tensor<T>& x) override { return net_.forward(x); }
    Tensor<T> backward(const Tensor<T>& g) override { return net_.backward(g); }
    Shape output_shape(const Shape& input) const override { return net_.output_shape(input); }
    void collect_parameters(nn::ParamList<T>& out) override { net_.collect_parameters(out); }
    std::uint64_t branch_hash() const override { return net_.branch_hash(); }

    /// Scores the channel concatenation of `image` and `maps`.
    Tensor<T> score(const Tensor<T>& image, const Tensor<T>& maps);
    /// After score(): backpropagate and return the gradient for the maps part.
    Tensor<T> backward_to_maps(const Tensor<T>& grad_scores);

    const CriticConfig& config() const { return cfg_; }
    nn::Sequential<T>& graph() { return net_; }

private:
    CriticConfig cfg_;
    nn::Sequential<T> net_;
    std::size_t image_channels_ = 0;
};

template <typename T>
std::unique_ptr<Generator<T>> build_generator(const GeneratorConfig& cfg, std::uint64_t seed) {
    return std::make_unique<Generator<T>>(cfg, seed);
}

template <typename T>
std::unique_ptr<Critic<T>> build_critic(const CriticConfig& cfg, std::uint64_t seed) {
    return std::make_unique<Critic<T>>(cfg, seed);
}

/// Recover the generator architecture from parameter names and shapes.
/// The leaky slope is not stored and takes its default.
GeneratorConfig infer_generator_config(const nn::Checkpoint& ckpt);

/// Build a float generator from a checkpoint.
std::unique_ptr<Generator<float>> load_generator(const nn::Checkpoint& ckpt);

} // namespace conncrack::models
