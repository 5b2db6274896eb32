#pragma once

// Test-only reference computations. Nothing here calls the analytic gradient path.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "fedsage/model.hpp"

namespace fedsage::testing {

/// Central finite differences of a scalar loss over every parameter.
inline std::vector<double> central_difference(const std::function<double(const ParameterVector&)>& loss,
                                              const ParameterVector& params, double eps = 1e-5) {
    std::vector<double> grad(params.size());
    ParameterVector probe = params;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double original = params.values()[i];
        probe.values()[i] = original + eps;
        const double up = loss(probe);
        probe.values()[i] = original - eps;
        const double down = loss(probe);
        probe.values()[i] = original;
        grad[i] = (up - down) / (2.0 * eps);
    }
    return grad;
}

/// Cross-entropy of a target against the model's forward pass, summed directly from probabilities.
inline double reference_cross_entropy(const ParameterVector& params, const ModelSpec& spec,
                                      const std::vector<std::vector<double>>& xs,
                                      const std::vector<std::vector<double>>& targets) {
    double total = 0.0;
    for (std::size_t n = 0; n < xs.size(); ++n) {
        const Prediction p = forward(params, spec, xs[n]);
        for (std::size_t c = 0; c < p.probs.size(); ++c) {
            if (targets[n][c] != 0.0) total -= targets[n][c] * std::log(std::max(p.probs[c], 1e-12));
        }
    }
    return total / static_cast<double>(xs.size());
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
}

/// A small random model, batch and soft targets for gradient checks.
struct GradientCase {
    ModelSpec spec;
    ParameterVector params;
    std::vector<std::vector<double>> xs;
    std::vector<std::size_t> labels;
    std::vector<std::vector<double>> soft_targets;
};

inline GradientCase random_gradient_case(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> dim(1, 4), classes(2, 5), hidden_layers(0, 2), width(1, 5), batch(1, 4);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    ModelSpec spec;
    spec.input_dim = dim(rng);
    spec.num_classes = classes(rng);
    spec.hidden_dims.clear();
    for (std::size_t l = hidden_layers(rng); l > 0; --l) spec.hidden_dims.push_back(width(rng));
    spec.activation = unit(rng) < 0.7 ? Activation::Tanh : Activation::Relu;

    ParameterVector params(make_layout(spec));
    for (double& v : params.values()) v = 0.8 * normal(rng);

    GradientCase gc{spec, params, {}, {}, {}};
    const std::size_t n = batch(rng);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> x(spec.input_dim);
        for (double& v : x) v = normal(rng);
        gc.xs.push_back(std::move(x));
        gc.labels.push_back(std::uniform_int_distribution<std::size_t>(0, spec.num_classes - 1)(rng));
        std::vector<double> t(spec.num_classes);
        double sum = 0.0;
        for (double& v : t) {
            v = unit(rng) < 0.3 ? 0.0 : unit(rng);
            sum += v;
        }
        if (sum == 0.0) {
            t[0] = 1.0;
            sum = 1.0;
        }
        for (double& v : t) v /= sum;
        gc.soft_targets.push_back(std::move(t));
    }
    return gc;
}

}  // namespace fedsage::testing
