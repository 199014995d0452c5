#include "conncrack/nn/optim.hpp"

#include <cmath>

namespace conncrack::nn {

template <typename T>
void rmsprop_step(const ParamList<T>& params, const RmsPropOptions& opt) {
    const T lr = static_cast<T>(opt.lr), decay = static_cast<T>(opt.decay),
            eps = static_cast<T>(opt.eps);
    for (auto* p : params) {
        auto& v = p->mean_square.storage();
        auto& g = p->grad.storage();
        auto& w = p->value.storage();
        for (std::size_t i = 0; i < w.size(); ++i) {
            v[i] = decay * v[i] + (T{1} - decay) * g[i] * g[i];
            w[i] -= lr * g[i] / std::sqrt(v[i] + eps);
            g[i] = T{0};
        }
    }
}

template <typename T>
void clip_params(const ParamList<T>& params, double bound) {
    if (!(bound > 0.0)) throw ConfigError("clip bound must be positive");
    const T c = static_cast<T>(bound);
    for (auto* p : params)
        for (auto& v : p->value.storage()) v = std::min(std::max(v, -c), c);
}

template <typename T>
double max_abs_param(const ParamList<T>& params) {
    double m = 0.0;
    for (auto* p : params)
        for (auto v : p->value.storage()) m = std::max(m, std::abs(static_cast<double>(v)));
    return m;
}

template <typename T>
std::uint64_t param_checksum(const ParamList<T>& params) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (auto* p : params) h = hash_bytes(p->value.raw(), p->value.size() * sizeof(T), h);
    return h;
}

template void rmsprop_step(const ParamList<float>&, const RmsPropOptions&);
template void rmsprop_step(const ParamList<double>&, const RmsPropOptions&);
template void clip_params(const ParamList<float>&, double);
template void clip_params(const ParamList<double>&, double);
template double max_abs_param(const ParamList<float>&);
template double max_abs_param(const ParamList<double>&);
template std::uint64_t param_checksum(const ParamList<float>&);
template std::uint64_t param_checksum(const ParamList<double>&);

} // namespace conncrack::nn
