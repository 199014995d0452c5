#pragma once

#include "conncrack/nn/layers.hpp"

namespace conncrack::nn {

struct RmsPropOptions {
    double lr = 1e-5;
    double decay = 0.9;
    double eps = 1e-8;
};

/// v <- decay*v + (1-decay)*g^2 ; p <- p - lr*g/sqrt(v+eps) ; g <- 0
template <typename T>
void rmsprop_step(const ParamList<T>& params, const RmsPropOptions& opt);

/// Clamp every parameter value into [-bound, bound]. Throws ConfigError
/// unless bound > 0.
template <typename T>
void clip_params(const ParamList<T>& params, double bound);

template <typename T>
void zero_grads(const ParamList<T>& params) {
    for (auto* p : params) p->grad.zero();
}

/// Largest |value| over all parameters (0 for an empty list).
template <typename T>
double max_abs_param(const ParamList<T>& params);

/// Order-sensitive hash of every parameter value; cheap change detector.
template <typename T>
std::uint64_t param_checksum(const ParamList<T>& params);

} // namespace conncrack::nn
