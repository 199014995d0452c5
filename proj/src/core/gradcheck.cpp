#include "conncrack/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace conncrack::nn {
namespace {

std::vector<std::size_t> probe_indices(std::size_t n, std::size_t max_probes, Rng& rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (n > max_probes) {
        rng.shuffle(idx);
        idx.resize(max_probes);
        std::sort(idx.begin(), idx.end());
    }
    return idx;
}

struct Objective {
    Module<double>& module;
    const Tensor<double>& projection;

    double operator()(const Tensor<double>& x, std::uint64_t* hash) const {
        const Tensor<double> y = module.forward(x);
        if (hash) *hash = module.branch_hash();
        return dot(y, projection);
    }
};

// Probes `values[i]` for the sampled indices and folds the result into `row`.
void probe_tensor(std::vector<double>& values, const std::vector<double>& analytic,
                  const Objective& f, const Tensor<double>& x, std::uint64_t base_hash,
                  const GradcheckOptions& opt, Rng& rng, GradcheckRow& row) {
    std::uint64_t last_hash = 0;
    auto loss = [&] { return f(x, &last_hash); };
    auto hash = [&] { return last_hash; };
    for (std::size_t i : probe_indices(values.size(), opt.max_probes_per_tensor, rng)) {
        const auto numeric = central_difference(values[i], loss, hash, base_hash, opt);
        if (!numeric) {
            ++row.skipped;
            continue;
        }
        row.max_rel_error = std::max(row.max_rel_error, relative_error(analytic[i], *numeric, opt.abs_floor));
        ++row.probes;
    }
}

} // namespace

double relative_error(double analytic, double numeric, double floor) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    return std::abs(analytic - numeric) / denom;
}

GradcheckReport gradcheck(Module<double>& module, const Shape& input_shape, std::uint64_t seed,
                          const GradcheckOptions& opt) {
    Rng rng(seed);
    Tensor<double> x(input_shape);
    for (auto& v : x.storage()) v = rng.uniform(-1.0, 1.0);
    Tensor<double> projection(module.output_shape(input_shape));
    for (auto& v : projection.storage()) v = rng.uniform(-1.0, 1.0);

    const Objective f{module, projection};
    std::uint64_t base_hash = 0;
    f(x, &base_hash);
    module.zero_grad();
    const Tensor<double> grad_input = module.backward(projection);

    GradcheckReport report;
    const std::string kind(module.kind());
    for (auto* p : module.parameters()) {
        GradcheckRow row{p->name, kind};
        const std::vector<double> analytic = p->grad.storage();
        probe_tensor(p->value.storage(), analytic, f, x, base_hash, opt, rng, row);
        report.push_back(row);
    }
    if (opt.check_input) {
        GradcheckRow row{"input", kind};
        Tensor<double> xp = x;
        probe_tensor(xp.storage(), grad_input.storage(), f, xp, base_hash, opt, rng, row);
        report.push_back(row);
    }
    module.zero_grad();
    return report;
}

GradcheckReport gradcheck(Sequential<double>& graph, const Shape& input_shape, std::uint64_t seed,
                          const GradcheckOptions& opt) {
    if (graph.size() == 0) return {};
    GradcheckReport rows = gradcheck(static_cast<Module<double>&>(graph), input_shape, seed, opt);
    // Attribute parameter rows to the layer that owns them.
    for (std::size_t i = 0; i < graph.size(); ++i) {
        for (auto* p : graph.layer(i).parameters())
            for (auto& r : rows)
                if (r.name == p->name) r.kind = std::string(graph.layer(i).kind());
    }
    return rows;
}

GradcheckReport gradcheck_layer_suite(std::uint64_t seed, const GradcheckOptions& opt) {
    Rng init(Rng::mix(seed, 17));
    struct Case {
        std::string kind;
        Sequential<double> graph;
        Shape input;
    };
    std::vector<Case> cases;
    auto add = [&](std::string kind, ModulePtr<double> m, Shape in) {
        Case c{std::move(kind), {}, std::move(in)};
        c.graph.add(std::move(m));
        cases.push_back(std::move(c));
    };

    add("conv2d", std::make_unique<Conv2d<double>>("conv", ConvOptions{2, 3, 3, 2, 1}, &init), {1, 2, 5, 5});
    add("deconv2d", std::make_unique<Deconv2d<double>>("deconv", ConvOptions{2, 3, 4, 2, 1}, &init), {1, 2, 3, 3});
    add("maxpool2", std::make_unique<MaxPool2<double>>(), {1, 2, 5, 4});
    add("avgpool2", std::make_unique<AvgPool2<double>>(), {1, 2, 5, 4});
    add("leaky_relu", std::make_unique<LeakyRelu<double>>(0.2), {1, 2, 4, 4});
    add("sigmoid", std::make_unique<Sigmoid<double>>(), {1, 2, 4, 4});
    {
        auto cat = std::make_unique<Concat<double>>();
        cat->add(std::make_unique<Identity<double>>());
        cat->add(std::make_unique<Conv2d<double>>("concat.conv", ConvOptions{2, 2, 3, 1, 1}, &init));
        add("concat", std::move(cat), {1, 2, 4, 4});
    }
    add("dense_block",
        std::make_unique<DenseBlock<double>>("dense", DenseBlockOptions{3, 2, 2, 2, 0.2}, &init),
        {1, 3, 4, 4});
    add("transition_block", std::make_unique<TransitionBlock<double>>("trans", 4, 2, &init), {1, 4, 4, 6});

    GradcheckReport report;
    for (std::size_t i = 0; i < cases.size(); ++i) {
        auto& c = cases[i];
        const auto rows = gradcheck(c.graph, c.input, Rng::mix(seed, i), opt);
        GradcheckRow agg{c.kind, c.kind};
        for (const auto& r : rows) {
            agg.max_rel_error = std::max(agg.max_rel_error, r.max_rel_error);
            agg.probes += r.probes;
            agg.skipped += r.skipped;
        }
        report.push_back(agg);
    }
    return report;
}

} // namespace conncrack::nn
