#include "conncrack/nn/layers.hpp"

#include "kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace conncrack::nn {

using kernels::ConvGeometry;

std::uint64_t hash_bytes(const void* data, std::size_t len, std::uint64_t seed) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                               std::size_t padding) {
    if (stride == 0) throw ConfigError("convolution stride must be positive");
    const long padded = static_cast<long>(in + 2 * padding) - static_cast<long>(kernel);
    if (padded < 0)
        throw DimensionError("convolution input extent " + std::to_string(in) +
                             " too small for kernel " + std::to_string(kernel));
    return static_cast<std::size_t>(padded) / stride + 1;
}

std::size_t deconv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                                 std::size_t padding) {
    if (stride == 0) throw ConfigError("deconvolution stride must be positive");
    const long out = static_cast<long>((in - 1) * stride + kernel) - 2 * static_cast<long>(padding);
    if (in == 0 || out <= 0)
        throw DimensionError("deconvolution output extent is not positive for input " +
                             std::to_string(in));
    return static_cast<std::size_t>(out);
}

namespace {

template <typename T>
void check_conv_weight(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                       std::size_t in_axis, const char* what) {
    input.require_rank4(what);
    if (weight.rank() != 4 || weight.dim(2) != weight.dim(3))
        throw DimensionError(std::string(what) + ": weight must be rank 4 with a square kernel");
    if (weight.dim(in_axis) != input.c())
        throw DimensionError(std::string(what) + ": weight expects " +
                             std::to_string(weight.dim(in_axis)) + " input channels, got " +
                             std::to_string(input.c()));
    const std::size_t out_c = weight.dim(1 - in_axis);
    if (bias.size() != out_c)
        throw DimensionError(std::string(what) + ": bias length does not match output channels");
}

// Conv geometry seen from the "image" side for a conv whose image is
// (c, h, w) and column side is (oh, ow).
ConvGeometry geometry(std::size_t c, std::size_t h, std::size_t w, std::size_t k, std::size_t s,
                      std::size_t p, std::size_t oh, std::size_t ow) {
    return {c, h, w, k, s, p, oh, ow};
}

} // namespace

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                         std::size_t stride, std::size_t padding) {
    check_conv_weight(input, weight, bias, 1, "conv2d");
    const std::size_t cout = weight.dim(0), cin = weight.dim(1), k = weight.dim(2);
    const std::size_t oh = conv_output_extent(input.h(), k, stride, padding);
    const std::size_t ow = conv_output_extent(input.w(), k, stride, padding);
    const auto g = geometry(cin, input.h(), input.w(), k, stride, padding, oh, ow);
    const std::size_t rows = cin * k * k, cols = oh * ow;
    const bool pointwise = k == 1 && stride == 1 && padding == 0;

    Tensor<T> out({input.n(), cout, oh, ow});
    std::vector<T> col(pointwise ? 0 : rows * cols);
    for (std::size_t n = 0; n < input.n(); ++n) {
        T* dst = out.raw() + n * cout * cols;
        for (std::size_t o = 0; o < cout; ++o) std::fill_n(dst + o * cols, cols, bias[o]);
        const T* src = input.raw() + n * cin * input.h() * input.w();
        if (!pointwise) {
            kernels::im2col(src, g, col.data());
            src = col.data();
        }
        kernels::gemm_nn(cout, cols, rows, weight.raw(), src, dst);
    }
    return out;
}

template <typename T>
ConvGradients<T> conv2d_backward(const Tensor<T>& grad_out, const Tensor<T>& input,
                                 const Tensor<T>& weight, std::size_t stride,
                                 std::size_t padding) {
    const std::size_t cout = weight.dim(0), cin = weight.dim(1), k = weight.dim(2);
    const std::size_t oh = conv_output_extent(input.h(), k, stride, padding);
    const std::size_t ow = conv_output_extent(input.w(), k, stride, padding);
    if (grad_out.shape() != Shape{input.n(), cout, oh, ow})
        throw DimensionError("conv2d backward: gradient shape " + shape_string(grad_out.shape()) +
                             " does not match forward output");
    const auto g = geometry(cin, input.h(), input.w(), k, stride, padding, oh, ow);
    const std::size_t rows = cin * k * k, cols = oh * ow;
    const std::size_t in_plane = cin * input.h() * input.w();
    const bool pointwise = k == 1 && stride == 1 && padding == 0;

    ConvGradients<T> grads{Tensor<T>(input.shape()), Tensor<T>(weight.shape()),
                           Tensor<T>({cout})};
    std::vector<T> col(pointwise ? 0 : rows * cols);
    std::vector<T> gcol(pointwise ? 0 : rows * cols);
    for (std::size_t n = 0; n < input.n(); ++n) {
        const T* go = grad_out.raw() + n * cout * cols;
        for (std::size_t o = 0; o < cout; ++o)
            for (std::size_t j = 0; j < cols; ++j) grads.bias[o] += go[o * cols + j];

        const T* src = input.raw() + n * in_plane;
        T* gin = grads.input.raw() + n * in_plane;
        if (pointwise) {
            kernels::gemm_nt(cout, rows, cols, go, src, grads.weight.raw());
            kernels::gemm_tn(rows, cols, cout, weight.raw(), go, gin);
        } else {
            kernels::im2col(src, g, col.data());
            kernels::gemm_nt(cout, rows, cols, go, col.data(), grads.weight.raw());
            std::fill(gcol.begin(), gcol.end(), T{0});
            kernels::gemm_tn(rows, cols, cout, weight.raw(), go, gcol.data());
            kernels::col2im(gcol.data(), g, gin);
        }
    }
    return grads;
}

template <typename T>
Tensor<T> deconv2d_forward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                           std::size_t stride, std::size_t padding) {
    check_conv_weight(input, weight, bias, 0, "deconv2d");
    const std::size_t cin = weight.dim(0), cout = weight.dim(1), k = weight.dim(2);
    const std::size_t oh = deconv_output_extent(input.h(), k, stride, padding);
    const std::size_t ow = deconv_output_extent(input.w(), k, stride, padding);
    // The output plays the role of a convolution's input.
    const auto g = geometry(cout, oh, ow, k, stride, padding, input.h(), input.w());
    const std::size_t rows = cout * k * k, cols = input.h() * input.w();

    Tensor<T> out({input.n(), cout, oh, ow});
    std::vector<T> col(rows * cols);
    for (std::size_t n = 0; n < input.n(); ++n) {
        std::fill(col.begin(), col.end(), T{0});
        kernels::gemm_tn(rows, cols, cin, weight.raw(), input.raw() + n * cin * cols, col.data());
        T* dst = out.raw() + n * cout * oh * ow;
        kernels::col2im(col.data(), g, dst);
        for (std::size_t o = 0; o < cout; ++o)
            for (std::size_t j = 0; j < oh * ow; ++j) dst[o * oh * ow + j] += bias[o];
    }
    return out;
}

template <typename T>
ConvGradients<T> deconv2d_backward(const Tensor<T>& grad_out, const Tensor<T>& input,
                                   const Tensor<T>& weight, std::size_t stride,
                                   std::size_t padding) {
    const std::size_t cin = weight.dim(0), cout = weight.dim(1), k = weight.dim(2);
    const std::size_t oh = deconv_output_extent(input.h(), k, stride, padding);
    const std::size_t ow = deconv_output_extent(input.w(), k, stride, padding);
    if (grad_out.shape() != Shape{input.n(), cout, oh, ow})
        throw DimensionError("deconv2d backward: gradient shape " +
                             shape_string(grad_out.shape()) + " does not match forward output");
    const auto g = geometry(cout, oh, ow, k, stride, padding, input.h(), input.w());
    const std::size_t rows = cout * k * k, cols = input.h() * input.w();

    ConvGradients<T> grads{Tensor<T>(input.shape()), Tensor<T>(weight.shape()),
                           Tensor<T>({cout})};
    std::vector<T> col(rows * cols);
    for (std::size_t n = 0; n < input.n(); ++n) {
        const T* go = grad_out.raw() + n * cout * oh * ow;
        for (std::size_t o = 0; o < cout; ++o)
            for (std::size_t j = 0; j < oh * ow; ++j) grads.bias[o] += go[o * oh * ow + j];
        kernels::im2col(go, g, col.data());
        kernels::gemm_nn(cin, cols, rows, weight.raw(), col.data(),
                         grads.input.raw() + n * cin * cols);
        kernels::gemm_nt(cin, rows, cols, input.raw() + n * cin * cols, col.data(),
                         grads.weight.raw());
    }
    return grads;
}

namespace {

Shape pooled_shape(const Shape& in) {
    if (in.size() != 4) throw DimensionError("pooling expects an N x C x H x W tensor");
    if (in[2] == 0 || in[3] == 0) throw DimensionError("pooling input has zero extent");
    return {in[0], in[1], (in[2] + 1) / 2, (in[3] + 1) / 2};
}

} // namespace

template <typename T>
Tensor<T> maxpool2_forward(const Tensor<T>& input, std::vector<std::uint32_t>* argmax) {
    const Shape os = pooled_shape(input.shape());
    Tensor<T> out(os);
    const std::size_t H = input.h(), W = input.w();
    if (argmax) argmax->assign(out.size(), 0);
    std::size_t o = 0;
    for (std::size_t nc = 0; nc < input.n() * input.c(); ++nc) {
        const T* plane = input.raw() + nc * H * W;
        for (std::size_t y = 0; y < os[2]; ++y)
            for (std::size_t x = 0; x < os[3]; ++x, ++o) {
                std::uint32_t best = 0;
                T best_v{};
                for (std::size_t dy = 0; dy < 2; ++dy)
                    for (std::size_t dx = 0; dx < 2; ++dx) {
                        const std::size_t sy = std::min(2 * y + dy, H - 1);
                        const std::size_t sx = std::min(2 * x + dx, W - 1);
                        const auto idx = static_cast<std::uint32_t>(sy * W + sx);
                        if ((dy == 0 && dx == 0) || plane[idx] > best_v) {
                            best = idx;
                            best_v = plane[idx];
                        }
                    }
                out[o] = best_v;
                if (argmax) (*argmax)[o] = best;
            }
    }
    return out;
}

template <typename T>
Tensor<T> maxpool2_backward(const Tensor<T>& grad_out, const Shape& input_shape,
                            const std::vector<std::uint32_t>& argmax) {
    const Shape os = pooled_shape(input_shape);
    if (grad_out.shape() != os || argmax.size() != grad_out.size())
        throw DimensionError("maxpool2 backward: gradient shape mismatch");
    Tensor<T> gin(input_shape);
    const std::size_t in_plane = input_shape[2] * input_shape[3];
    const std::size_t out_plane = os[2] * os[3];
    for (std::size_t o = 0; o < grad_out.size(); ++o)
        gin[(o / out_plane) * in_plane + argmax[o]] += grad_out[o];
    return gin;
}

template <typename T>
Tensor<T> avgpool2_forward(const Tensor<T>& input) {
    const Shape os = pooled_shape(input.shape());
    Tensor<T> out(os);
    const std::size_t H = input.h(), W = input.w();
    std::size_t o = 0;
    for (std::size_t nc = 0; nc < input.n() * input.c(); ++nc) {
        const T* plane = input.raw() + nc * H * W;
        for (std::size_t y = 0; y < os[2]; ++y) {
            const std::size_t y0 = 2 * y, y1 = std::min(2 * y + 1, H - 1);
            for (std::size_t x = 0; x < os[3]; ++x, ++o) {
                const std::size_t x0 = 2 * x, x1 = std::min(2 * x + 1, W - 1);
                out[o] = (plane[y0 * W + x0] + plane[y0 * W + x1] + plane[y1 * W + x0] +
                          plane[y1 * W + x1]) / T(4);
            }
        }
    }
    return out;
}

template <typename T>
Tensor<T> avgpool2_backward(const Tensor<T>& grad_out, const Shape& input_shape) {
    const Shape os = pooled_shape(input_shape);
    if (grad_out.shape() != os) throw DimensionError("avgpool2 backward: gradient shape mismatch");
    Tensor<T> gin(input_shape);
    const std::size_t H = input_shape[2], W = input_shape[3];
    std::size_t o = 0;
    for (std::size_t nc = 0; nc < os[0] * os[1]; ++nc) {
        T* plane = gin.raw() + nc * H * W;
        for (std::size_t y = 0; y < os[2]; ++y) {
            const std::size_t y0 = 2 * y, y1 = std::min(2 * y + 1, H - 1);
            for (std::size_t x = 0; x < os[3]; ++x, ++o) {
                const std::size_t x0 = 2 * x, x1 = std::min(2 * x + 1, W - 1);
                const T share = grad_out[o] / T(4);
                plane[y0 * W + x0] += share;
                plane[y0 * W + x1] += share;
                plane[y1 * W + x0] += share;
                plane[y1 * W + x1] += share;
            }
        }
    }
    return gin;
}

// ---------------------------------------------------------------------------

namespace {

// He-uniform: U(-b, b) with b = sqrt(6 / fan_in).
template <typename T>
void he_uniform(Tensor<T>& w, std::size_t fan_in, Rng* rng) {
    if (!rng) return;
    const double bound = std::sqrt(6.0 / static_cast<double>(std::max<std::size_t>(fan_in, 1)));
    for (auto& v : w.storage()) v = static_cast<T>(rng->uniform(-bound, bound));
}

void check_options(const ConvOptions& o, const std::string& name) {
    if (o.in_channels == 0 || o.out_channels == 0 || o.kernel == 0 || o.stride == 0)
        throw ConfigError(name + ": channels, kernel and stride must be positive");
}

} // namespace

template <typename T>
Conv2d<T>::Conv2d(const std::string& name, ConvOptions opt, Rng* rng)
    : opt_(opt),
      weight_(name + ".weight", {opt.out_channels, opt.in_channels, opt.kernel, opt.kernel}),
      bias_(name + ".bias", {opt.out_channels}) {
    check_options(opt, name);
    he_uniform(weight_.value, opt.in_channels * opt.kernel * opt.kernel, rng);
}

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x) {
    input_ = x;
    return conv2d_forward(x, weight_.value, bias_.value, opt_.stride, opt_.padding);
}

template <typename T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& grad_out) {
    auto g = conv2d_backward(grad_out, input_, weight_.value, opt_.stride, opt_.padding);
    weight_.grad += g.weight;
    bias_.grad += g.bias;
    return std::move(g.input);
}

template <typename T>
Shape Conv2d<T>::output_shape(const Shape& in) const {
    if (in.size() != 4 || in[1] != opt_.in_channels)
        throw DimensionError("conv2d: expected " + std::to_string(opt_.in_channels) +
                             " input channels, got shape " + shape_string(in));
    return {in[0], opt_.out_channels, conv_output_extent(in[2], opt_.kernel, opt_.stride, opt_.padding),
            conv_output_extent(in[3], opt_.kernel, opt_.stride, opt_.padding)};
}

template <typename T>
void Conv2d<T>::collect_parameters(ParamList<T>& out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
}

template <typename T>
Deconv2d<T>::Deconv2d(const std::string& name, ConvOptions opt, Rng* rng)
    : opt_(opt),
      weight_(name + ".weight", {opt.in_channels, opt.out_channels, opt.kernel, opt.kernel}),
      bias_(name + ".bias", {opt.out_channels}) {
    check_options(opt, name);
    // Each output pixel gathers from about (k / s)^2 input positions.
    const std::size_t taps = (opt.kernel + opt.stride - 1) / opt.stride;
    he_uniform(weight_.value, opt.in_channels * taps * taps, rng);
}

template <typename T>
Tensor<T> Deconv2d<T>::forward(const Tensor<T>& x) {
    input_ = x;
    return deconv2d_forward(x, weight_.value, bias_.value, opt_.stride, opt_.padding);
}

template <typename T>
Tensor<T> Deconv2d<T>::backward(const Tensor<T>& grad_out) {
    auto g = deconv2d_backward(grad_out, input_, weight_.value, opt_.stride, opt_.padding);
    weight_.grad += g.weight;
    bias_.grad += g.bias;
    return std::move(g.input);
}

template <typename T>
Shape Deconv2d<T>::output_shape(const Shape& in) const {
    if (in.size() != 4 || in[1] != opt_.in_channels)
        throw DimensionError("deconv2d: expected " + std::to_string(opt_.in_channels) +
                             " input channels, got shape " + shape_string(in));
    return {in[0], opt_.out_channels,
            deconv_output_extent(in[2], opt_.kernel, opt_.stride, opt_.padding),
            deconv_output_extent(in[3], opt_.kernel, opt_.stride, opt_.padding)};
}

template <typename T>
void Deconv2d<T>::collect_parameters(ParamList<T>& out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
}

template <typename T>
Tensor<T> MaxPool2<T>::forward(const Tensor<T>& x) {
    input_shape_ = x.shape();
    return maxpool2_forward(x, &argmax_);
}

template <typename T>
Tensor<T> MaxPool2<T>::backward(const Tensor<T>& grad_out) {
    return maxpool2_backward(grad_out, input_shape_, argmax_);
}

template <typename T>
Shape MaxPool2<T>::output_shape(const Shape& in) const {
    return pooled_shape(in);
}

template <typename T>
std::uint64_t MaxPool2<T>::branch_hash() const {
    return hash_bytes(argmax_.data(), argmax_.size() * sizeof(std::uint32_t));
}

template <typename T>
Tensor<T> AvgPool2<T>::forward(const Tensor<T>& x) {
    input_shape_ = x.shape();
    return avgpool2_forward(x);
}

template <typename T>
Tensor<T> AvgPool2<T>::backward(const Tensor<T>& grad_out) {
    return avgpool2_backward(grad_out, input_shape_);
}

template <typename T>
Shape AvgPool2<T>::output_shape(const Shape& in) const {
    return pooled_shape(in);
}

template <typename T>
Tensor<T> LeakyRelu<T>::forward(const Tensor<T>& x) {
    Tensor<T> out(x.shape());
    positive_.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const bool pos = x[i] > T{0};
        positive_[i] = pos;
        out[i] = pos ? x[i] : slope_ * x[i];
    }
    return out;
}

template <typename T>
Tensor<T> LeakyRelu<T>::backward(const Tensor<T>& grad_out) {
    if (grad_out.size() != positive_.size())
        throw DimensionError("leaky_relu backward: gradient shape mismatch");
    Tensor<T> gin(grad_out.shape());
    for (std::size_t i = 0; i < gin.size(); ++i)
        gin[i] = positive_[i] ? grad_out[i] : slope_ * grad_out[i];
    return gin;
}

template <typename T>
std::uint64_t LeakyRelu<T>::branch_hash() const {
    return hash_bytes(positive_.data(), positive_.size());
}

template <typename T>
Tensor<T> Sigmoid<T>::forward(const Tensor<T>& x) {
    output_ = Tensor<T>(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        // Split by sign so exp never overflows.
        const T v = x[i];
        if (v >= T{0}) {
            output_[i] = T{1} / (T{1} + std::exp(-v));
        } else {
            const T e = std::exp(v);
            output_[i] = e / (T{1} + e);
        }
        // Keep saturated outputs off the endpoints: 1 - eps/2 is the largest
        // value below one.
        output_[i] = std::clamp(output_[i], std::numeric_limits<T>::min(),
                                T{1} - std::numeric_limits<T>::epsilon() / T{2});
    }
    return output_;
}

template <typename T>
Tensor<T> Sigmoid<T>::backward(const Tensor<T>& grad_out) {
    output_.require_same_shape(grad_out, "sigmoid backward");
    Tensor<T> gin(grad_out.shape());
    for (std::size_t i = 0; i < gin.size(); ++i)
        gin[i] = grad_out[i] * output_[i] * (T{1} - output_[i]);
    return gin;
}

template <typename T>
Tensor<T> Sequential<T>::forward(const Tensor<T>& x) {
    Tensor<T> h = x;
    for (auto& l : layers_) h = l->forward(h);
    return h;
}

template <typename T>
Tensor<T> Sequential<T>::backward(const Tensor<T>& grad_out) {
    Tensor<T> g = grad_out;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
    return g;
}

template <typename T>
Shape Sequential<T>::output_shape(const Shape& in) const {
    Shape s = in;
    for (const auto& l : layers_) s = l->output_shape(s);
    return s;
}

template <typename T>
void Sequential<T>::collect_parameters(ParamList<T>& out) {
    for (auto& l : layers_) l->collect_parameters(out);
}

template <typename T>
std::uint64_t Sequential<T>::branch_hash() const {
    std::uint64_t h = 0;
    for (const auto& l : layers_) h = hash_combine(h, l->branch_hash());
    return h;
}

template <typename T>
Tensor<T> Concat<T>::forward(const Tensor<T>& x) {
    if (branches_.empty()) throw ConfigError("concat: no branches");
    widths_.clear();
    Tensor<T> out;
    for (auto& b : branches_) {
        Tensor<T> y = b->forward(x);
        widths_.push_back(y.c());
        out = out.empty() ? std::move(y) : concat_channels(out, y);
    }
    return out;
}

template <typename T>
Tensor<T> Concat<T>::backward(const Tensor<T>& grad_out) {
    Tensor<T> gin;
    std::size_t begin = 0;
    for (std::size_t i = 0; i < branches_.size(); ++i) {
        Tensor<T> g = branches_[i]->backward(slice_channels(grad_out, begin, widths_[i]));
        begin += widths_[i];
        if (gin.empty())
            gin = std::move(g);
        else
            gin += g;
    }
    return gin;
}

template <typename T>
Shape Concat<T>::output_shape(const Shape& in) const {
    Shape out;
    for (const auto& b : branches_) {
        Shape s = b->output_shape(in);
        if (out.empty()) {
            out = s;
        } else {
            if (s[0] != out[0] || s[2] != out[2] || s[3] != out[3])
                throw DimensionError("concat: branch extents differ");
            out[1] += s[1];
        }
    }
    return out;
}

template <typename T>
void Concat<T>::collect_parameters(ParamList<T>& out) {
    for (auto& b : branches_) b->collect_parameters(out);
}

template <typename T>
std::uint64_t Concat<T>::branch_hash() const {
    std::uint64_t h = 0;
    for (const auto& b : branches_) h = hash_combine(h, b->branch_hash());
    return h;
}

template <typename T>
DenseBlock<T>::DenseBlock(const std::string& name, DenseBlockOptions opt, Rng* rng) : opt_(opt) {
    if (opt.in_channels == 0) throw ConfigError(name + ": dense block needs input channels");
    if (opt.components > 0 && (opt.growth_rate == 0 || opt.bottleneck_factor == 0))
        throw ConfigError(name + ": growth rate and bottleneck factor must be positive");
    const std::size_t bottleneck = opt.bottleneck_factor * opt.growth_rate;
    std::size_t width = opt.in_channels;
    components_.resize(opt.components);
    for (std::size_t i = 0; i < opt.components; ++i) {
        const std::string prefix = name + ".c" + std::to_string(i);
        auto& seq = components_[i];
        seq.add(std::make_unique<Conv2d<T>>(prefix + ".conv1", ConvOptions{width, bottleneck, 1, 1, 0}, rng));
        seq.add(std::make_unique<LeakyRelu<T>>(static_cast<T>(opt.slope)));
        seq.add(std::make_unique<Conv2d<T>>(prefix + ".conv3", ConvOptions{bottleneck, opt.growth_rate, 3, 1, 1}, rng));
        seq.add(std::make_unique<LeakyRelu<T>>(static_cast<T>(opt.slope)));
        widths_.push_back(width);
        width += opt.growth_rate;
    }
}

template <typename T>
Tensor<T> DenseBlock<T>::forward(const Tensor<T>& x) {
    x.require_rank4("dense_block");
    if (x.c() != opt_.in_channels)
        throw DimensionError("dense_block: expected " + std::to_string(opt_.in_channels) +
                             " channels, got " + std::to_string(x.c()));
    Tensor<T> features = x;
    for (auto& comp : components_) features = concat_channels(features, comp.forward(features));
    return features;
}

template <typename T>
Tensor<T> DenseBlock<T>::backward(const Tensor<T>& grad_out) {
    Tensor<T> g = grad_out;
    for (std::size_t i = components_.size(); i-- > 0;) {
        const std::size_t w = widths_[i];
        Tensor<T> g_prev = slice_channels(g, 0, w);
        g_prev += components_[i].backward(slice_channels(g, w, opt_.growth_rate));
        g = std::move(g_prev);
    }
    return g;
}

template <typename T>
Shape DenseBlock<T>::output_shape(const Shape& in) const {
    if (in.size() != 4 || in[1] != opt_.in_channels)
        throw DimensionError("dense_block: input shape " + shape_string(in) +
                             " does not match " + std::to_string(opt_.in_channels) + " channels");
    return {in[0], out_channels(), in[2], in[3]};
}

template <typename T>
void DenseBlock<T>::collect_parameters(ParamList<T>& out) {
    for (auto& c : components_) c.collect_parameters(out);
}

template <typename T>
std::uint64_t DenseBlock<T>::branch_hash() const {
    std::uint64_t h = 0;
    for (const auto& c : components_) h = hash_combine(h, c.branch_hash());
    return h;
}

template <typename T>
TransitionBlock<T>::TransitionBlock(const std::string& name, std::size_t in_channels,
                                    std::size_t out_channels, Rng* rng)
    : conv_(name + ".conv", ConvOptions{in_channels, out_channels, 1, 1, 0}, rng) {}

template <typename T>
Tensor<T> TransitionBlock<T>::forward(const Tensor<T>& x) {
    return pool_.forward(conv_.forward(x));
}

template <typename T>
Tensor<T> TransitionBlock<T>::backward(const Tensor<T>& grad_out) {
    return conv_.backward(pool_.backward(grad_out));
}

template <typename T>
Shape TransitionBlock<T>::output_shape(const Shape& in) const {
    return pool_.output_shape(conv_.output_shape(in));
}

template <typename T>
void TransitionBlock<T>::collect_parameters(ParamList<T>& out) {
    conv_.collect_parameters(out);
}

#define CONNCRACK_INSTANTIATE(T)                                                                 \
    template Tensor<T> conv2d_forward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,      \
                                      std::size_t, std::size_t);                                 \
    template ConvGradients<T> conv2d_backward(const Tensor<T>&, const Tensor<T>&,                \
                                              const Tensor<T>&, std::size_t, std::size_t);       \
    template Tensor<T> deconv2d_forward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,    \
                                        std::size_t, std::size_t);                               \
    template ConvGradients<T> deconv2d_backward(const Tensor<T>&, const Tensor<T>&,              \
                                                const Tensor<T>&, std::size_t, std::size_t);     \
    template Tensor<T> maxpool2_forward(const Tensor<T>&, std::vector<std::uint32_t>*);          \
    template Tensor<T> maxpool2_backward(const Tensor<T>&, const Shape&,                         \
                                         const std::vector<std::uint32_t>&);                     \
    template Tensor<T> avgpool2_forward(const Tensor<T>&);                                       \
    template Tensor<T> avgpool2_backward(const Tensor<T>&, const Shape&);                        \
    template class Conv2d<T>;                                                                    \
    template class Deconv2d<T>;                                                                  \
    template class MaxPool2<T>;                                                                  \
    template class AvgPool2<T>;                                                                  \
    template class LeakyRelu<T>;                                                                 \
    template class Sigmoid<T>;                                                                   \
    template class Sequential<T>;                                                                \
    template class Concat<T>;                                                                    \
    template class DenseBlock<T>;                                                                \
    template class TransitionBlock<T>;

CONNCRACK_INSTANTIATE(float)
CONNCRACK_INSTANTIATE(double)

#undef CONNCRACK_INSTANTIATE

} // namespace conncrack::nn
