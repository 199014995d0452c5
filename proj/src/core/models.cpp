#include "conncrack/models.hpp"

#include "conncrack/connmap.hpp"

#include <algorithm>
#include <cmath>

namespace conncrack::models {

using nn::ConvOptions;

GeneratorConfig GeneratorConfig::paper() {
    GeneratorConfig c;
    c.stem_channels = 64;
    c.block_components = {6, 12, 24, 16};
    c.growth_rate = 32;
    c.head_channels = 64;
    return c;
}

GeneratorConfig GeneratorConfig::desk() {
    return GeneratorConfig{};
}

void GeneratorConfig::validate() const {
    if (in_channels == 0) throw ConfigError("generator: in_channels must be positive");
    if (stem_channels == 0 || stem_kernel == 0 || stem_kernel % 2 == 0)
        throw ConfigError("generator: stem needs positive channels and an odd kernel");
    if (growth_rate == 0 || bottleneck_factor == 0)
        throw ConfigError("generator: growth_rate and bottleneck_factor must be positive");
    if (!(compression > 0.0 && compression <= 1.0))
        throw ConfigError("generator: compression must lie in (0, 1]");
    if (head_channels == 0) throw ConfigError("generator: head_channels must be positive");
    for (std::size_t t : fusion_taps)
        if (t != 4 && t != 8 && t != 16)
            throw ConfigError("generator: fusion taps must be drawn from {4, 8, 16}");
    auto taps = fusion_taps;
    std::sort(taps.begin(), taps.end());
    if (std::adjacent_find(taps.begin(), taps.end()) != taps.end())
        throw ConfigError("generator: duplicate fusion tap");
}

std::array<std::size_t, 4> GeneratorConfig::block_output_channels() const {
    std::array<std::size_t, 4> out{};
    std::size_t c = stem_channels;
    for (std::size_t b = 0; b < 4; ++b) {
        c += block_components[b] * growth_rate;
        out[b] = c;
        if (b < 3)
            c = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(c * compression)));
    }
    return out;
}

CriticConfig CriticConfig::paper() {
    return CriticConfig{};
}

CriticConfig CriticConfig::desk() {
    CriticConfig c;
    c.widths = {32, 64, 128, 256, 1};
    return c;
}

void CriticConfig::validate() const {
    if (widths.size() != 5 || strides.size() != 5)
        throw ConfigError("critic: exactly 5 convolutional layers are required");
    for (auto w : widths)
        if (w == 0) throw ConfigError("critic: layer widths must be positive");
    for (auto s : strides)
        if (s == 0) throw ConfigError("critic: strides must be positive");
    if (kernel == 0) throw ConfigError("critic: kernel must be positive");
    if (in_channels <= connmap::kDirections)
        throw ConfigError("critic: input must hold image channels plus 8 map channels");
}

std::size_t receptive_field(std::span<const std::pair<std::size_t, std::size_t>> layers) {
    std::size_t r = 1, jump = 1;
    for (const auto& [k, s] : layers) {
        r += (k - 1) * jump;
        jump *= s;
    }
    return r;
}

std::size_t receptive_field(const CriticConfig& cfg) {
    cfg.validate();
    std::vector<std::pair<std::size_t, std::size_t>> layers;
    for (auto s : cfg.strides) layers.emplace_back(cfg.kernel, s);
    return receptive_field(layers);
}

// ---------------------------------------------------------------------------

namespace {

template <typename T>
std::vector<nn::DenseBlock<T>> make_blocks(const GeneratorConfig& cfg, Rng& rng) {
    std::vector<nn::DenseBlock<T>> blocks;
    std::size_t c = cfg.stem_channels;
    for (std::size_t b = 0; b < 4; ++b) {
        blocks.emplace_back("block" + std::to_string(b + 1),
                            nn::DenseBlockOptions{c, cfg.growth_rate, cfg.block_components[b],
                                                  cfg.bottleneck_factor, cfg.slope},
                            &rng);
        c = blocks.back().out_channels();
        if (b < 3) c = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(c * cfg.compression)));
    }
    return blocks;
}

} // namespace

template <typename T>
Generator<T>::Generator(const GeneratorConfig& cfg, std::uint64_t seed)
    : cfg_((cfg.validate(), cfg)),
      stem_("stem.conv",
            ConvOptions{cfg.in_channels, cfg.stem_channels, cfg.stem_kernel, 2, cfg.stem_kernel / 2},
            nullptr),
      stem_act_(static_cast<T>(cfg.slope)),
      out_conv_("head.out", ConvOptions{cfg.head_channels, connmap::kDirections, 1, 1, 0}, nullptr) {
    // Parameters are drawn in declaration order from a single stream.
    Rng rng(seed);
    stem_ = nn::Conv2d<T>("stem.conv",
                          ConvOptions{cfg.in_channels, cfg.stem_channels, cfg.stem_kernel, 2,
                                      cfg.stem_kernel / 2},
                          &rng);
    blocks_ = make_blocks<T>(cfg, rng);
    const auto widths = cfg.block_output_channels();
    for (std::size_t b = 0; b < 3; ++b) {
        const std::size_t out = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(widths[b] * cfg.compression)));
        transitions_.emplace_back("trans" + std::to_string(b + 1), widths[b], out, &rng);
    }
    const std::size_t hc = cfg.head_channels;
    ups_.emplace_back("head.up1", ConvOptions{widths[3], hc, 4, 2, 1}, &rng);
    ups_.emplace_back("head.up2", ConvOptions{hc, hc, 4, 2, 1}, &rng);
    ups_.emplace_back("head.up3", ConvOptions{hc, hc, 4, 2, 1}, &rng);
    ups_.emplace_back("head.up4", ConvOptions{hc, hc, 4, 4, 0}, &rng);
    for (int i = 0; i < 4; ++i) up_acts_.emplace_back(static_cast<T>(cfg.slope));
    for (std::size_t scale : {std::size_t{16}, std::size_t{8}, std::size_t{4}}) {
        if (!has_tap(scale)) continue;
        const std::size_t src = scale == 4 ? widths[0] : scale == 8 ? widths[1] : widths[2];
        projections_.emplace_back(
            scale, nn::Conv2d<T>("head.proj" + std::to_string(scale), ConvOptions{src, hc, 1, 1, 0}, &rng));
    }
    out_conv_ = nn::Conv2d<T>("head.out", ConvOptions{hc, connmap::kDirections, 1, 1, 0}, &rng);
}

template <typename T>
bool Generator<T>::has_tap(std::size_t scale) const {
    return std::find(cfg_.fusion_taps.begin(), cfg_.fusion_taps.end(), scale) != cfg_.fusion_taps.end();
}

template <typename T>
Shape Generator<T>::output_shape(const Shape& in) const {
    if (in.size() != 4 || in[1] != cfg_.in_channels)
        throw DimensionError("generator: expected N x " + std::to_string(cfg_.in_channels) +
                             " x H x W input, got " + nn::shape_string(in));
    if (in[2] == 0 || in[3] == 0 || in[2] % 32 != 0 || in[3] % 32 != 0)
        throw DimensionError("generator: input extents must be positive multiples of 32, got " +
                             nn::shape_string(in));
    return {in[0], connmap::kDirections, in[2], in[3]};
}

template <typename T>
Tensor<T> Generator<T>::forward_logits(const Tensor<T>& x) {
    output_shape(x.shape());
    Tensor<T> h = pool_.forward(stem_act_.forward(stem_.forward(x)));
    std::array<Tensor<T>, 3> taps;  // block outputs at 1/4, 1/8, 1/16
    for (std::size_t b = 0; b < 4; ++b) {
        h = blocks_[b].forward(h);
        if (b < 3) {
            taps[b] = h;
            h = transitions_[b].forward(h);
        }
    }
    auto fuse = [&](std::size_t scale, Tensor<T>& acc) {
        for (auto& [s, conv] : projections_)
            if (s == scale) acc += conv.forward(taps[scale == 4 ? 0 : scale == 8 ? 1 : 2]);
    };
    h = ups_[0].forward(h);
    fuse(16, h);
    h = up_acts_[0].forward(h);
    h = ups_[1].forward(h);
    fuse(8, h);
    h = up_acts_[1].forward(h);
    h = ups_[2].forward(h);
    fuse(4, h);
    h = up_acts_[2].forward(h);
    h = up_acts_[3].forward(ups_[3].forward(h));
    Tensor<T> logits = out_conv_.forward(h);
    probs_ = sigmoid_.forward(logits);
    return logits;
}

template <typename T>
Tensor<T> Generator<T>::forward(const Tensor<T>& x) {
    forward_logits(x);
    return probs_;
}

template <typename T>
Tensor<T> Generator<T>::backward(const Tensor<T>& grad_probs) {
    return backward_logits(sigmoid_.backward(grad_probs));
}

template <typename T>
Tensor<T> Generator<T>::backward_logits(const Tensor<T>& grad_logits) {
    std::array<Tensor<T>, 3> tap_grads;
    auto unfuse = [&](std::size_t scale, const Tensor<T>& g) {
        for (auto& [s, conv] : projections_)
            if (s == scale) tap_grads[scale == 4 ? 0 : scale == 8 ? 1 : 2] = conv.backward(g);
    };
    Tensor<T> g = out_conv_.backward(grad_logits);
    g = ups_[3].backward(up_acts_[3].backward(g));
    g = up_acts_[2].backward(g);
    unfuse(4, g);
    g = ups_[2].backward(g);
    g = up_acts_[1].backward(g);
    unfuse(8, g);
    g = ups_[1].backward(g);
    g = up_acts_[0].backward(g);
    unfuse(16, g);
    g = ups_[0].backward(g);

    for (std::size_t b = 4; b-- > 0;) {
        if (b < 3) {
            g = transitions_[b].backward(g);
            if (!tap_grads[b].empty()) g += tap_grads[b];
        }
        g = blocks_[b].backward(g);
    }
    return stem_.backward(stem_act_.backward(pool_.backward(g)));
}

template <typename T>
void Generator<T>::collect_parameters(nn::ParamList<T>& out) {
    stem_.collect_parameters(out);
    for (std::size_t b = 0; b < 4; ++b) {
        blocks_[b].collect_parameters(out);
        if (b < 3) transitions_[b].collect_parameters(out);
    }
    for (auto& u : ups_) u.collect_parameters(out);
    for (auto& [s, conv] : projections_) conv.collect_parameters(out);
    out_conv_.collect_parameters(out);
}

template <typename T>
std::uint64_t Generator<T>::branch_hash() const {
    std::uint64_t h = nn::hash_combine(stem_act_.branch_hash(), pool_.branch_hash());
    for (const auto& b : blocks_) h = nn::hash_combine(h, b.branch_hash());
    for (const auto& a : up_acts_) h = nn::hash_combine(h, a.branch_hash());
    return h;
}

template <typename T>
Critic<T>::Critic(const CriticConfig& cfg, std::uint64_t seed) : cfg_((cfg.validate(), cfg)) {
    Rng rng(seed);
    std::size_t c = cfg.in_channels;
    for (std::size_t i = 0; i < cfg.widths.size(); ++i) {
        net_.add(std::make_unique<nn::Conv2d<T>>(
            "critic.conv" + std::to_string(i + 1),
            ConvOptions{c, cfg.widths[i], cfg.kernel, cfg.strides[i], cfg.padding}, &rng));
        // Scores stay unbounded: no nonlinearity after the last layer.
        if (i + 1 < cfg.widths.size()) net_.add(std::make_unique<nn::LeakyRelu<T>>(static_cast<T>(cfg.slope)));
        c = cfg.widths[i];
    }
}

template <typename T>
Tensor<T> Critic<T>::score(const Tensor<T>& image, const Tensor<T>& maps) {
    image_channels_ = image.c();
    if (image_channels_ + maps.c() != cfg_.in_channels)
        throw DimensionError("critic: image + map channels (" + std::to_string(image_channels_) +
                             " + " + std::to_string(maps.c()) + ") do not match " +
                             std::to_string(cfg_.in_channels));
    return net_.forward(nn::concat_channels(image, maps));
}

template <typename T>
Tensor<T> Critic<T>::backward_to_maps(const Tensor<T>& grad_scores) {
    const Tensor<T> g = net_.backward(grad_scores);
    return nn::slice_channels(g, image_channels_, g.c() - image_channels_);
}

template class Generator<float>;
template class Generator<double>;
template class Critic<float>;
template class Critic<double>;

// ---------------------------------------------------------------------------

GeneratorConfig infer_generator_config(const nn::Checkpoint& ckpt) {
    GeneratorConfig cfg;
    const auto& stem = ckpt.at("stem.conv.weight");
    if (stem.rank() != 4) throw FormatError("stem.conv.weight must be rank 4");
    cfg.stem_channels = stem.dim(0);
    cfg.in_channels = stem.dim(1);
    cfg.stem_kernel = stem.dim(2);

    bool growth_known = false;
    for (std::size_t b = 0; b < 4; ++b) {
        std::size_t n = 0;
        const std::string prefix = "block" + std::to_string(b + 1) + ".c";
        while (ckpt.contains(prefix + std::to_string(n) + ".conv1.weight")) {
            if (!growth_known) {
                cfg.growth_rate = ckpt.at(prefix + std::to_string(n) + ".conv3.weight").dim(0);
                cfg.bottleneck_factor = ckpt.at(prefix + std::to_string(n) + ".conv1.weight").dim(0) / cfg.growth_rate;
                growth_known = true;
            }
            ++n;
        }
        cfg.block_components[b] = n;
    }
    // Any compression inside every transition's floor interval rebuilds the
    // same widths; prefer the smallest, which is exact for the usual ratios.
    double lo = 0.0, hi = 1.0;
    std::array<std::pair<std::size_t, std::size_t>, 3> trans{};
    for (std::size_t b = 0; b < 3; ++b) {
        const auto& t = ckpt.at("trans" + std::to_string(b + 1) + ".conv.weight");
        if (t.rank() != 4 || t.dim(1) == 0) throw FormatError("transition weights must be rank 4");
        trans[b] = {t.dim(1), t.dim(0)};
        const double in = static_cast<double>(t.dim(1)), out = static_cast<double>(t.dim(0));
        lo = std::max(lo, out == 1.0 ? 0.0 : out / in);
        hi = std::min(hi, (out + 1.0) / in);
    }
    auto widths_match = [&](double c) {
        cfg.compression = c;
        const auto outs = cfg.block_output_channels();
        std::size_t next = 0;
        for (std::size_t b = 0; b < 3; ++b) {
            next = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(outs[b] * c)));
            if (outs[b] != trans[b].first || next != trans[b].second) return false;
        }
        return c > 0.0 && c <= 1.0;
    };
    if (!widths_match(lo) && !widths_match(0.5 * (lo + hi)))
        throw FormatError("transition widths do not follow a single compression ratio");
    cfg.head_channels = ckpt.at("head.up1.weight").dim(1);
    cfg.fusion_taps.clear();
    for (std::size_t s : {std::size_t{4}, std::size_t{8}, std::size_t{16}})
        if (ckpt.contains("head.proj" + std::to_string(s) + ".weight")) cfg.fusion_taps.push_back(s);
    return cfg;
}

std::unique_ptr<Generator<float>> load_generator(const nn::Checkpoint& ckpt) {
    GeneratorConfig cfg;
    try {
        cfg = infer_generator_config(ckpt);
        cfg.validate();
    } catch (const Error& e) {
        throw FormatError(std::string("checkpoint does not describe a generator: ") + e.what());
    }
    auto g = std::make_unique<Generator<float>>(cfg, 0);
    nn::restore(ckpt, g->parameters());
    return g;
}

} // namespace conncrack::models
