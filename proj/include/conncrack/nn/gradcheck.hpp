#pragma once

#include "conncrack/nn/layers.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace conncrack::nn {

struct GradcheckOptions {
    double step = 1e-3;
    /// Probes that cross a kink are retried at step/10, step/100, ... down
    /// to this value before being counted as skipped.
    double min_step = 1e-6;
    std::size_t max_probes_per_tensor = 24;
    /// Gradients smaller than this are compared in absolute terms.
    double abs_floor = 1e-6;
    bool check_input = true;
};

struct GradcheckRow {
    std::string name;   // parameter name, or "input"
    std::string kind;   // layer kind the row belongs to
    double max_rel_error = 0.0;
    std::size_t probes = 0;
    std::size_t skipped = 0;  // probes whose +-step crossed a kink
};

using GradcheckReport = std::vector<GradcheckRow>;

/// |a - n| / max(|a|, |n|, floor)
double relative_error(double analytic, double numeric, double floor);

/// Central difference of `loss` with respect to `value`. `hash` fingerprints
/// the piecewise-linear branch of the last evaluation; a step whose
/// perturbation changes it from `base_hash` is retried smaller. Returns
/// nothing when every step down to opt.min_step crosses a kink.
template <typename Loss, typename Hash>
std::optional<double> central_difference(double& value, Loss&& loss, Hash&& hash, std::uint64_t base_hash,
                                         const GradcheckOptions& opt) {
    const double orig = value;
    for (double h = opt.step; h >= opt.min_step * (1.0 - 1e-9); h /= 10.0) {
        value = orig + h;
        const double lp = loss();
        const std::uint64_t hp = hash();
        value = orig - h;
        const double lm = loss();
        const std::uint64_t hm = hash();
        value = orig;
        if (hp == base_hash && hm == base_hash) return (lp - lm) / (2.0 * h);
    }
    return std::nullopt;
}

/// Compares analytic gradients of L = <module(x), R> against central
/// differences, with x and R drawn from `seed`. One row per parameter
/// tensor plus one for the input.
GradcheckReport gradcheck(Module<double>& module, const Shape& input_shape, std::uint64_t seed,
                          const GradcheckOptions& opt = {});

/// Per-layer rows for a layer list; an empty graph yields an empty report.
GradcheckReport gradcheck(Sequential<double>& graph, const Shape& input_shape, std::uint64_t seed,
                          const GradcheckOptions& opt = {});

/// One tiny graph per layer kind (conv2d, deconv2d, maxpool2, avgpool2,
/// leaky_relu, sigmoid, concat, dense_block, transition_block); one row per
/// kind holding the worst error across its tensors.
GradcheckReport gradcheck_layer_suite(std::uint64_t seed, const GradcheckOptions& opt = {});

} // namespace conncrack::nn
