#pragma once

#include "conncrack/nn/tensor.hpp"
#include "conncrack/rng.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace conncrack::nn {

/// A trainable tensor with its gradient accumulator and RMSProp state.
template <typename T>
struct Parameter {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;
    Tensor<T> mean_square;

    Parameter() = default;
    Parameter(std::string n, Shape shape)
        : name(std::move(n)), value(shape), grad(shape), mean_square(shape) {}
};

template <typename T>
using ParamList = std::vector<Parameter<T>*>;

/// Base class of every layer. A module caches whatever its backward pass
/// needs during forward, so one instance serves one forward/backward pair
/// at a time. Parameter gradients accumulate until zeroed.
template <typename T>
class Module {
public:
    virtual ~Module() = default;

    virtual std::string_view kind() const = 0;
    virtual Tensor<T> forward(const Tensor<T>& x) = 0;
    virtual Tensor<T> backward(const Tensor<T>& grad_out) = 0;
    virtual Shape output_shape(const Shape& input) const = 0;
    virtual void collect_parameters(ParamList<T>& out) { (void)out; }

    /// Hash of the piecewise-linear branch taken during the last forward
    /// (leaky ReLU signs, max-pool winners). Finite-difference probes whose
    /// perturbations change it straddle a kink.
    virtual std::uint64_t branch_hash() const { return 0; }

    ParamList<T> parameters() {
        ParamList<T> out;
        collect_parameters(out);
        return out;
    }

    void zero_grad() {
        for (auto* p : parameters()) p->grad.zero();
    }
};

template <typename T>
using ModulePtr = std::unique_ptr<Module<T>>;

// ---------------------------------------------------------------------------
// Stateless operators. Weight layouts follow the usual conventions:
// conv (C_out, C_in, k, k), transposed conv (C_in, C_out, k, k).

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                               std::size_t padding);
std::size_t deconv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                                 std::size_t padding);

template <typename T>
struct ConvGradients {
    Tensor<T> input;
    Tensor<T> weight;
    Tensor<T> bias;
};

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                         std::size_t stride, std::size_t padding);
template <typename T>
ConvGradients<T> conv2d_backward(const Tensor<T>& grad_out, const Tensor<T>& input,
                                 const Tensor<T>& weight, std::size_t stride, std::size_t padding);

template <typename T>
Tensor<T> deconv2d_forward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                           std::size_t stride, std::size_t padding);
template <typename T>
ConvGradients<T> deconv2d_backward(const Tensor<T>& grad_out, const Tensor<T>& input,
                                   const Tensor<T>& weight, std::size_t stride,
                                   std::size_t padding);

// 2x2 stride-2 pooling. Odd extents are replicate-padded on the right and
// bottom, so the output is ceil(H/2) x ceil(W/2).
template <typename T>
Tensor<T> maxpool2_forward(const Tensor<T>& input, std::vector<std::uint32_t>* argmax);
template <typename T>
Tensor<T> maxpool2_backward(const Tensor<T>& grad_out, const Shape& input_shape,
                            const std::vector<std::uint32_t>& argmax);
template <typename T>
Tensor<T> avgpool2_forward(const Tensor<T>& input);
template <typename T>
Tensor<T> avgpool2_backward(const Tensor<T>& grad_out, const Shape& input_shape);

// ---------------------------------------------------------------------------
// Layers

struct ConvOptions {
    std::size_t in_channels = 1;
    std::size_t out_channels = 1;
    std::size_t kernel = 1;
    std::size_t stride = 1;
    std::size_t padding = 0;
};

template <typename T>
class Conv2d final : public Module<T> {
public:
    /// He-uniform weights from `rng`, zero bias. A null rng leaves zeros.
    Conv2d(const std::string& name, ConvOptions opt, Rng* rng);

    std::string_view kind() const override { return "conv2d"; }
    Tensor<T> forward(const Tensor<T>& x) override;
    Tensor<T> backward(const Tensor<T>& grad_out) override;
    Shape output_shape(const Shape& input) const override;
    void collect_parameters(ParamList<T>& out) override;

    const ConvOptions& options() const { return opt_; }
    Parameter<T>& weight() { return weight_; }
    Parameter<T>& bias() { return bias_; }

private:
    ConvOptions opt_;
    Parameter<T> weight_;
    Parameter<T> bias_;
    Tensor<T> input_;
};

template <typename T>
class Deconv2d final : public Module<T> {
public:
    Deconv2d(const std::string& name, ConvOptions opt, Rng* rng);

    std::string_view kind() const override { return "deconv2d"; }
    Tensor<T> forward(const Tensor<T>& x) override;
    Tensor<T> backward(const Tensor<T>& grad_out) override;
    Shape output_shape(const Shape& input) const override;
    void collect_parameters(ParamList<T>& out) override;

    const ConvOptions& options() const { return opt_; }
    Parameter<T>& weight() { return weight_; }
    Parameter<T>& bias() { return bias_; }

private:
    ConvOptions opt_;
    Parameter<T> weight_;
    Parameter<T> bias_;
    Tensor<T> input_;
};

template <typename T>
class MaxPool2 final : public Module<T> {
public:
    std::string_view kind() const override { return "maxpool2"; }
    Tensor<T> forward(const Tensor<T>& x) override;
    Tensor<T> backward(const Tensor<T>& grad_out) override;
    Shape output_shape(const Shape& input) const override;
    std::uint64_t branch_hash() const override;

private:
    Shape input_shape_;
    std::vector<std::uint32_t> argmax_;
};

template <typename T>
class AvgPool2 final : public Module<T> {
public:
    std::string_view kind() const override { return "avgpool2"; }
    Tensor<T> forward(const Tensor<T>& x) override;
    Tensor<T> backward(const Tensor<T>& grad_out) override;
    Shape output_shape(const Shape& input) const override;

private:
    Shape input_shape_;
};

template <typename T>
class LeakyRelu final : public Module<T> {
public:
    explicit LeakyRelu(T slope = T(0.2)) : slope_(slope) {}

    std::string_view kind() const override { return "leaky_relu"; }
    Tensor<T> forward(const Tensor<T>& x) override;
    Tensor<T> backward(const Tensor<T>& grad_out) override;
    Shape output_shape(const Shape& input) const override { return input; }
    std::uint64_t branch_hash() const override;

private:
    T slope_;
    std::vector<std::uint8_t> positive_;
};

/// Outputs are clamped into the open interval (0, 1) of representable values.
template <typename T>
class Sigmoid final : public Module<T> {
public:
    std::string_view kind() const override { return "sigmoid"; }
    Tensor<T> forward(const Tensor<T>& x) override;
    Tensor<T> backward(const Tensor<T>& grad_out) override;
    Shape output_shape(const Shape& input) const override { return input; }

private:
    Tensor<T> output_;
};

/// Runs children in order.
template <typename T>
class Sequential final : public Module<T> {
public:
    Sequential() = default;

    Sequential& add(ModulePtr<T> m) {
        layers_.push_back(std::move(m));
        return *this;
    }

    std::string_view kind() const override { return "sequential"; }
    Tensor<T> forward(const Tensor<T>& x) override;
    Tensor<T> backward(const Tensor<T>& grad_out) override;
    Shape output_shape(const Shape& input) const override;
    void collect_parameters(ParamList<T>& out) override;
    std::uint64_t branch_hash() const override;

    std::size_t size() const { return layers_.size(); }
    Module<T>& layer(std::size_t i) { return *layers_.at(i); }
    const Module<T>& layer(std::size_t i) const { return *layers_.at(i); }

private:
    std::vector<ModulePtr<T>> layers_;
};

/// Feeds the same input to every branch and concatenates the results along
/// channels.
template <typename T>
class Concat final : public Module<T> {
public:
    Concat& add(ModulePtr<T> m) {
        branches_.push_back(std::move(m));
        return *this;
    }

    std::string_view kind() const override { return "concat"; }
    Tensor<T> forward(const Tensor<T>& x) override;
    Tensor<T> backward(const Tensor<T>& grad_out) override;
    Shape output_shape(const Shape& input) const override;
    void collect_parameters(ParamList<T>& out) override;
    std::uint64_t branch_hash() const override;

private:
    std::vector<ModulePtr<T>> branches_;
    std::vector<std::size_t> widths_;
};

/// Pass-through; useful as a Concat branch.
template <typename T>
class Identity final : public Module<T> {
public:
    std::string_view kind() const override { return "identity"; }
    Tensor<T> forward(const Tensor<T>& x) override { return x; }
    Tensor<T> backward(const Tensor<T>& g) override { return g; }
    Shape output_shape(const Shape& input) const override { return input; }
};

struct DenseBlockOptions {
    std::size_t in_channels = 1;
    std::size_t growth_rate = 8;
    std::size_t components = 1;
    /// Width of each component's 1x1 bottleneck, as a multiple of growth.
    std::size_t bottleneck_factor = 4;
    double slope = 0.2;
};

/// Densely connected stack of (1x1 conv, leaky, 3x3 conv, leaky) components.
/// Component i sees the block input concatenated with every earlier
/// component output; the block returns that full concatenation, i.e.
/// in_channels + components * growth_rate channels at unchanged extents.
template <typename T>
class DenseBlock final : public Module<T> {
public:
    DenseBlock(const std::string& name, DenseBlockOptions opt, Rng* rng);

    std::string_view kind() const override { return "dense_block"; }
    Tensor<T> forward(const Tensor<T>& x) override;
    Tensor<T> backward(const Tensor<T>& grad_out) override;
    Shape output_shape(const Shape& input) const override;
    void collect_parameters(ParamList<T>& out) override;
    std::uint64_t branch_hash() const override;

    std::size_t out_channels() const {
        return opt_.in_channels + opt_.components * opt_.growth_rate;
    }

private:
    DenseBlockOptions opt_;
    std::vector<Sequential<T>> components_;
    std::vector<std::size_t> widths_;  // channel count entering each component
};

/// 1x1 convolution followed by 2x2 stride-2 average pooling.
template <typename T>
class TransitionBlock final : public Module<T> {
public:
    TransitionBlock(const std::string& name, std::size_t in_channels, std::size_t out_channels,
                    Rng* rng);

    std::string_view kind() const override { return "transition_block"; }
    Tensor<T> forward(const Tensor<T>& x) override;
    Tensor<T> backward(const Tensor<T>& grad_out) override;
    Shape output_shape(const Shape& input) const override;
    void collect_parameters(ParamList<T>& out) override;

    Conv2d<T>& conv() { return conv_; }

private:
    Conv2d<T> conv_;
    AvgPool2<T> pool_;
};

std::uint64_t hash_bytes(const void* data, std::size_t len, std::uint64_t seed = 0xcbf29ce484222325ULL);
inline std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
    return a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
}

} // namespace conncrack::nn
