#include "conncrack/trainer.hpp"

#include <algorithm>
#include <numeric>

namespace conncrack::trainer {

namespace {

models::GeneratorConfig micro_generator() {
    models::GeneratorConfig c;
    c.stem_channels = 4;
    c.block_components = {1, 1, 1, 1};
    c.growth_rate = 2;
    c.bottleneck_factor = 2;
    c.head_channels = 4;
    return c;
}

models::CriticConfig micro_critic() {
    models::CriticConfig c;
    c.widths = {4, 4, 4, 4, 1};
    return c;
}

// Central differences of `loss` over sampled entries of `values`.
template <typename Loss, typename Hash>
void probe(std::vector<double>& values, const std::vector<double>& analytic, Loss&& loss, Hash&& hash,
           std::uint64_t base_hash, const nn::GradcheckOptions& opt, Rng& rng, nn::GradcheckRow& row) {
    std::vector<std::size_t> idx(values.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (idx.size() > opt.max_probes_per_tensor) {
        rng.shuffle(idx);
        idx.resize(opt.max_probes_per_tensor);
        std::sort(idx.begin(), idx.end());
    }
    for (std::size_t i : idx) {
        const auto numeric = nn::central_difference(values[i], loss, hash, base_hash, opt);
        if (!numeric) {
            ++row.skipped;
            continue;
        }
        row.max_rel_error = std::max(row.max_rel_error, nn::relative_error(analytic[i], *numeric, opt.abs_floor));
        ++row.probes;
    }
}

Batch<double> random_batch(std::size_t p, Rng& rng) {
    Batch<double> b{Tensor<double>({1, 3, p, p}), Tensor<double>({1, 8, p, p})};
    for (auto& v : b.images.storage()) v = rng.uniform(-1.0, 1.0);
    for (auto& v : b.maps.storage()) v = rng.bernoulli(0.3) ? 1.0 : 0.0;
    return b;
}

} // namespace

nn::GradcheckReport gradcheck_objectives(std::uint64_t seed, const nn::GradcheckOptions& opt) {
    Rng rng(seed);
    nn::GradcheckReport report;

    // Content loss with respect to the logits, both reductions.
    for (auto reduction : {connmap::Reduction::Mean, connmap::Reduction::Sum}) {
        Tensor<double> logits({1, 8, 4, 4}), target({1, 8, 4, 4});
        for (auto& v : logits.storage()) v = rng.uniform(-4.0, 4.0);
        for (auto& v : target.storage()) v = rng.bernoulli(0.4) ? 1.0 : 0.0;
        const auto base = connmap::content_loss(logits, target, reduction);
        nn::GradcheckRow row{reduction == connmap::Reduction::Mean ? "content_loss_mean" : "content_loss_sum",
                             "content_loss"};
        probe(logits.storage(), base.gradient.storage(),
              [&] { return connmap::content_loss(logits, target, reduction).value; }, [] { return std::uint64_t{0}; },
              0, opt, rng, row);
        report.push_back(row);
    }

    const std::size_t p = 32;
    models::Generator<double> g(micro_generator(), Rng::mix(seed, 1));
    models::Critic<double> d(micro_critic(), Rng::mix(seed, 2));
    const Batch<double> batch = random_batch(p, rng);
    const double lambda = 0.5;

    // Whole generator as a module: L = <G(x), R>.
    for (auto& row : nn::gradcheck(g, {1, 3, p, p}, Rng::mix(seed, 3), opt)) {
        row.kind = "generator";
        report.push_back(row);
    }

    // Generator objective: lambda * (-E[D(x, G(x))]) + content.
    {
        auto hash = [&] { return nn::hash_combine(g.branch_hash(), d.branch_hash()); };
        auto loss = [&] {
            return generator_objective(g, d, batch, lambda, connmap::Reduction::Mean, false).total;
        };
        auto params = g.parameters();
        nn::zero_grads(params);
        generator_objective(g, d, batch, lambda, connmap::Reduction::Mean, true);
        const std::uint64_t base_hash = hash();
        nn::GradcheckRow row{"generator_objective", "generator_objective"};
        for (auto* prm : params) {
            const std::vector<double> analytic = prm->grad.storage();
            probe(prm->value.storage(), analytic, loss, hash, base_hash, opt, rng, row);
        }
        report.push_back(row);
    }

    // Critic objective: E[D(x, G(x))] - E[D(x, y)].
    {
        const Tensor<double> fake = g.forward(batch.images);
        auto hash = [&] {
            d.score(batch.images, batch.maps);
            const std::uint64_t real_hash = d.branch_hash();
            d.score(batch.images, fake);
            return nn::hash_combine(real_hash, d.branch_hash());
        };
        auto loss = [&] { return critic_objective(g, d, batch, false); };
        auto params = d.parameters();
        nn::zero_grads(params);
        critic_objective(g, d, batch, true);
        const std::uint64_t base_hash = hash();
        nn::GradcheckRow row{"critic_objective", "critic_objective"};
        for (auto* prm : params) {
            const std::vector<double> analytic = prm->grad.storage();
            probe(prm->value.storage(), analytic, loss, hash, base_hash, opt, rng, row);
        }
        report.push_back(row);
    }
    return report;
}

} // namespace conncrack::trainer
