#include "kbrn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace kbrn {

double max_rel_error(GradientSet& analytic, GradientSet& numeric) {
    auto av = param_views(analytic);
    auto nv = param_views(numeric);
    if (av.size() != nv.size()) throw ShapeError("max_rel_error: gradient layouts differ");
    double worst = 0.0;
    for (std::size_t p = 0; p < av.size(); ++p) {
        for (std::size_t i = 0; i < av[p].size; ++i) {
            const double a = av[p].data[i];
            const double n = nv[p].data[i];
            const double rel = std::fabs(a - n) / std::max({1.0, std::fabs(a), std::fabs(n)});
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

namespace {

RecurrentModel random_instance_model(CellKind kind, std::size_t hidden, std::size_t input,
                                     std::size_t classes, std::size_t dict_size,
                                     bool learn_centers, Rng& rng) {
    ModelSpec spec;
    spec.kind = kind;
    spec.hidden = hidden;
    spec.input = input;
    spec.num_classes = classes;
    spec.dict_size = dict_size;
    spec.bandwidth_factor = 1.0;
    spec.learn_centers = learn_centers;
    RecurrentModel model = init_model(spec, rng);
    for (auto& pv : param_views(model)) {
        if (pv.name == "centers") continue;  // keep the sorted dictionary grid
        for (std::size_t i = 0; i < pv.size; ++i) pv.data[i] = rng.uniform(-1.0, 1.0);
    }
    model.commit_params();
    return model;
}

}  // namespace

GradCheckReport run_gradcheck(CellKind kind, std::uint64_t seed, std::size_t instances) {
    GradCheckReport report;
    report.kind = kind;
    report.instances = instances;
    Rng rng(seed);
    for (std::size_t inst = 0; inst < instances; ++inst) {
        const auto t_len = static_cast<std::size_t>(rng.uniform_int(2, 6));
        const auto hidden = static_cast<std::size_t>(rng.uniform_int(2, 4));
        const auto input = static_cast<std::size_t>(rng.uniform_int(2, 3));
        const auto classes = static_cast<std::size_t>(rng.uniform_int(2, 3));
        const auto dict_size = static_cast<std::size_t>(rng.uniform_int(3, 5));
        const bool learn_centers = kind == CellKind::kbrn && inst % 2 == 1;
        const double lambda_smooth = inst % 3 == 0 ? 0.1 : 0.0;
        const double lambda_weight = inst % 4 == 0 ? 0.05 : 0.0;

        RecurrentModel model =
            random_instance_model(kind, hidden, input, classes, dict_size, learn_centers, rng);
        std::vector<Vector> seq(t_len);
        for (auto& x : seq) {
            x.resize(input);
            for (auto& v : x) v = rng.uniform(-1.0, 1.0);
        }
        const int label = static_cast<int>(rng.uniform_int(0, static_cast<std::int64_t>(classes) - 1));

        BpttResult analytic = bptt(model, seq, label, lambda_smooth, lambda_weight);
        GradientSet numeric = finite_diff_grad(
            model,
            [&]() { return bptt(model, seq, label, lambda_smooth, lambda_weight).loss; }, 1e-5);
        report.max_error = std::max(report.max_error, max_rel_error(analytic.grads, numeric));
    }
    report.passed = report.max_error <= 1e-4;
    return report;
}

}  // namespace kbrn
