#include "fedsage/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "fedsage/seed.hpp"

namespace fedsage {

namespace {

constexpr double kLogFloor = -27.631021115928547;  // log(1e-12)

double activate(Activation a, double v) {
    return a == Activation::Tanh ? std::tanh(v) : std::max(0.0, v);
}

// Derivative expressed through the activation output.
double activate_grad(Activation a, double out) {
    return a == Activation::Tanh ? 1.0 - out * out : (out > 0.0 ? 1.0 : 0.0);
}

void check_params(const ParameterVector& params, const ModelSpec& spec, const char* where) {
    if (!(params.layout() == make_layout(spec))) {
        throw std::invalid_argument(std::string(where) + ": parameter layout does not match model spec");
    }
}

// Per-layer outputs; activations[0] is the input, the last entry holds the logits.
struct ForwardTrace {
    std::vector<std::vector<double>> activations;
};

void run_layers(const ParameterVector& params, const ModelSpec& spec, std::span<const double> x,
                ForwardTrace& trace) {
    const auto& layers = params.layout().layers;
    const auto w = params.values();
    trace.activations.resize(layers.size() + 1);
    trace.activations[0].assign(x.begin(), x.end());
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const LayerBlock& block = layers[l];
        const auto& in = trace.activations[l];
        auto& out = trace.activations[l + 1];
        out.assign(w.begin() + static_cast<std::ptrdiff_t>(block.bias_offset),
                   w.begin() + static_cast<std::ptrdiff_t>(block.bias_offset + block.fan_out));
        for (std::size_t i = 0; i < block.fan_in; ++i) {
            const double xi = in[i];
            if (xi == 0.0) continue;
            const double* row = w.data() + block.weight_offset + i * block.fan_out;
            for (std::size_t o = 0; o < block.fan_out; ++o) out[o] += xi * row[o];
        }
        if (l + 1 < layers.size()) {
            for (double& v : out) v = activate(spec.activation, v);
        }
    }
}

// Adds the gradient of -sum_c t_c log softmax(z)_c for one sample into grad and returns the loss.
double accumulate_sample(const ParameterVector& params, const ModelSpec& spec, std::span<const double> x,
                         std::span<const double> target, std::span<double> grad, ForwardTrace& trace,
                         std::vector<double>& delta, std::vector<double>& next_delta) {
    run_layers(params, spec, x, trace);
    const auto& logits = trace.activations.back();
    const double zmax = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double z : logits) sum += std::exp(z - zmax);
    const double log_norm = zmax + std::log(sum);

    double loss = 0.0;
    delta.resize(logits.size());
    for (std::size_t c = 0; c < logits.size(); ++c) {
        const double log_p = logits[c] - log_norm;
        if (target[c] != 0.0) loss -= target[c] * std::max(log_p, kLogFloor);
        delta[c] = std::exp(log_p) - target[c];
    }

    const auto& layers = params.layout().layers;
    const auto w = params.values();
    for (std::size_t l = layers.size(); l-- > 0;) {
        const LayerBlock& block = layers[l];
        const auto& in = trace.activations[l];
        double* gw = grad.data() + block.weight_offset;
        double* gb = grad.data() + block.bias_offset;
        for (std::size_t o = 0; o < block.fan_out; ++o) gb[o] += delta[o];
        for (std::size_t i = 0; i < block.fan_in; ++i) {
            const double xi = in[i];
            if (xi == 0.0) continue;
            double* row = gw + i * block.fan_out;
            for (std::size_t o = 0; o < block.fan_out; ++o) row[o] += xi * delta[o];
        }
        if (l == 0) break;
        next_delta.assign(block.fan_in, 0.0);
        for (std::size_t i = 0; i < block.fan_in; ++i) {
            const double* row = w.data() + block.weight_offset + i * block.fan_out;
            double acc = 0.0;
            for (std::size_t o = 0; o < block.fan_out; ++o) acc += row[o] * delta[o];
            next_delta[i] = acc * activate_grad(spec.activation, in[i]);
        }
        std::swap(delta, next_delta);
    }
    return loss;
}

}  // namespace

Activation parse_activation(std::string_view name) {
    if (name == "tanh") return Activation::Tanh;
    if (name == "relu") return Activation::Relu;
    throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

std::string_view to_string(Activation a) {
    return a == Activation::Tanh ? "tanh" : "relu";
}

void ModelSpec::validate() const {
    if (input_dim < 1) throw std::invalid_argument("ModelSpec: input_dim must be >= 1");
    if (num_classes < 2) throw std::invalid_argument("ModelSpec: num_classes must be >= 2");
    for (std::size_t h : hidden_dims) {
        if (h < 1) throw std::invalid_argument("ModelSpec: hidden widths must be positive");
    }
}

ParameterLayout make_layout(const ModelSpec& spec) {
    spec.validate();
    ParameterLayout layout;
    std::size_t fan_in = spec.input_dim;
    std::size_t offset = 0;
    auto push = [&](std::size_t fan_out) {
        LayerBlock block{fan_in, fan_out, offset, offset + fan_in * fan_out};
        offset = block.bias_offset + fan_out;
        layout.layers.push_back(block);
        fan_in = fan_out;
    };
    for (std::size_t h : spec.hidden_dims) push(h);
    push(spec.num_classes);
    layout.size = offset;
    return layout;
}

ParameterVector::ParameterVector(ParameterLayout layout)
    : layout_(std::make_shared<const ParameterLayout>(std::move(layout))), values_(layout_->size, 0.0) {}

ParameterVector::ParameterVector(ParameterLayout layout, std::vector<double> values)
    : layout_(std::make_shared<const ParameterLayout>(std::move(layout))), values_(std::move(values)) {
    if (values_.size() != layout_->size) {
        throw std::invalid_argument("ParameterVector: value count does not match layout size");
    }
}

bool ParameterVector::all_finite() const noexcept {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

std::size_t argmax(std::span<const double> v) noexcept {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) best = i;
    }
    return best;
}

std::size_t Prediction::argmax() const noexcept { return fedsage::argmax(probs); }

double Prediction::max() const noexcept {
    return probs.empty() ? 0.0 : probs[fedsage::argmax(probs)];
}

Prediction softmax(std::span<const double> logits) {
    if (logits.empty()) throw std::invalid_argument("softmax: empty logits");
    const double zmax = *std::max_element(logits.begin(), logits.end());
    Prediction p;
    p.probs.resize(logits.size());
    double sum = 0.0;
    for (std::size_t c = 0; c < logits.size(); ++c) {
        p.probs[c] = std::exp(logits[c] - zmax);
        sum += p.probs[c];
    }
    for (double& v : p.probs) v /= sum;
    return p;
}

ParameterVector init_params(const ModelSpec& spec, std::uint64_t seed) {
    ParameterVector params(make_layout(spec));
    Rng rng(seed);
    auto values = params.values();
    for (const LayerBlock& block : params.layout().layers) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(block.fan_in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (std::size_t i = 0; i < block.fan_in * block.fan_out; ++i) {
            values[block.weight_offset + i] = dist(rng);
        }
    }
    return params;
}

Prediction forward(const ParameterVector& params, const ModelSpec& spec, std::span<const double> x) {
    if (x.size() != spec.input_dim) {
        throw std::invalid_argument("forward: input has length " + std::to_string(x.size()) + ", expected " +
                                    std::to_string(spec.input_dim));
    }
    check_params(params, spec, "forward");
    ForwardTrace trace;
    run_layers(params, spec, x, trace);
    return softmax(trace.activations.back());
}

LossGrad supervised_loss_grad(const ParameterVector& params, const ModelSpec& spec,
                              std::span<const LabeledRef> batch) {
    if (batch.empty()) throw std::invalid_argument("supervised_loss_grad: empty batch");
    check_params(params, spec, "supervised_loss_grad");
    LossGrad out{0.0, ParameterVector(params.layout())};
    ForwardTrace trace;
    std::vector<double> delta, next_delta;
    std::vector<double> onehot(spec.num_classes, 0.0);
    for (const LabeledRef& ex : batch) {
        if (ex.features.size() != spec.input_dim) {
            throw std::invalid_argument("supervised_loss_grad: feature dimension mismatch");
        }
        if (ex.label >= spec.num_classes) throw std::invalid_argument("supervised_loss_grad: label out of range");
        onehot[ex.label] = 1.0;
        out.loss += accumulate_sample(params, spec, ex.features, onehot, out.grad.values(), trace, delta, next_delta);
        onehot[ex.label] = 0.0;
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    out.loss *= inv;
    for (double& g : out.grad.values()) g *= inv;
    return out;
}

LossGrad unsupervised_loss_grad(const ParameterVector& params, const ModelSpec& spec,
                                std::span<const SoftTargetRef> batch) {
    check_params(params, spec, "unsupervised_loss_grad");
    LossGrad out{0.0, ParameterVector(params.layout())};
    if (batch.empty()) return out;
    ForwardTrace trace;
    std::vector<double> delta, next_delta;
    for (const SoftTargetRef& ex : batch) {
        if (ex.features.size() != spec.input_dim || ex.target.size() != spec.num_classes) {
            throw std::invalid_argument("unsupervised_loss_grad: dimension mismatch");
        }
        double sum = 0.0;
        for (double t : ex.target) {
            if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("unsupervised_loss_grad: target entry outside [0,1]");
            sum += t;
        }
        if (std::abs(sum - 1.0) > 1e-6) throw std::invalid_argument("unsupervised_loss_grad: target not normalized");
        out.loss += accumulate_sample(params, spec, ex.features, ex.target, out.grad.values(), trace, delta, next_delta);
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    out.loss *= inv;
    for (double& g : out.grad.values()) g *= inv;
    return out;
}

ParameterVector sgd_step(const ParameterVector& params, const ParameterVector& grad, double learning_rate) {
    ParameterVector out = params;
    axpy(out, -learning_rate, grad);
    return out;
}

void axpy(ParameterVector& params, double scale, const ParameterVector& other) {
    if (!params.same_layout(other)) throw std::invalid_argument("axpy: layout mismatch");
    auto p = params.values();
    auto o = other.values();
    for (std::size_t i = 0; i < p.size(); ++i) p[i] += scale * o[i];
}

}  // namespace fedsage
