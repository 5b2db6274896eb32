#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fedsage {

enum class Activation { Tanh, Relu };

Activation parse_activation(std::string_view name);
std::string_view to_string(Activation a);

struct ModelSpec {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden_dims{32};
    std::size_t num_classes = 0;
    Activation activation = Activation::Tanh;

    /// Throws std::invalid_argument unless input_dim >= 1, C >= 2 and all hidden widths are positive.
    void validate() const;
};

/// One dense layer: a row-major `fan_in x fan_out` weight block followed by `fan_out` biases.
struct LayerBlock {
    std::size_t fan_in = 0;
    std::size_t fan_out = 0;
    std::size_t weight_offset = 0;
    std::size_t bias_offset = 0;

    friend bool operator==(const LayerBlock&, const LayerBlock&) = default;
};

struct ParameterLayout {
    std::vector<LayerBlock> layers;
    std::size_t size = 0;

    friend bool operator==(const ParameterLayout&, const ParameterLayout&) = default;
};

ParameterLayout make_layout(const ModelSpec& spec);

/// Flat model weights plus the layout that maps layers onto index ranges.
/// The layout is shared between copies, so copying a vector copies only the values.
class ParameterVector {
public:
    explicit ParameterVector(ParameterLayout layout);
    ParameterVector(ParameterLayout layout, std::vector<double> values);

    std::span<const double> values() const noexcept { return values_; }
    std::span<double> values() noexcept { return values_; }
    const ParameterLayout& layout() const noexcept { return *layout_; }
    std::size_t size() const noexcept { return values_.size(); }

    bool same_layout(const ParameterVector& other) const noexcept {
        return layout_ == other.layout_ || *layout_ == *other.layout_;
    }
    bool all_finite() const noexcept;

    friend bool operator==(const ParameterVector& a, const ParameterVector& b) {
        return a.same_layout(b) && a.values_ == b.values_;
    }

private:
    std::shared_ptr<const ParameterLayout> layout_;
    std::vector<double> values_;
};

/// Normalized class probabilities for one sample.
struct Prediction {
    std::vector<double> probs;

    std::size_t num_classes() const noexcept { return probs.size(); }
    /// Lowest index wins on exact ties.
    std::size_t argmax() const noexcept;
    double max() const noexcept;
};

std::size_t argmax(std::span<const double> v) noexcept;

/// Max-subtracted softmax.
Prediction softmax(std::span<const double> logits);

/// Uniform(+-1/sqrt(fan_in)) weights, zero biases. Deterministic in (spec, seed).
ParameterVector init_params(const ModelSpec& spec, std::uint64_t seed);

Prediction forward(const ParameterVector& params, const ModelSpec& spec, std::span<const double> x);

struct LabeledRef {
    std::span<const double> features;
    std::size_t label = 0;
};

struct SoftTargetRef {
    std::span<const double> features;
    std::span<const double> target;
};

struct LossGrad {
    double loss = 0.0;
    ParameterVector grad;
};

/// Mean cross-entropy against hard labels.
LossGrad supervised_loss_grad(const ParameterVector& params, const ModelSpec& spec,
                              std::span<const LabeledRef> batch);

/// Mean cross-entropy -sum_c t_c log p_c against soft targets. Each target must sum to 1 within 1e-6.
/// An empty batch yields zero loss and a zero gradient.
LossGrad unsupervised_loss_grad(const ParameterVector& params, const ModelSpec& spec,
                                std::span<const SoftTargetRef> batch);

ParameterVector sgd_step(const ParameterVector& params, const ParameterVector& grad, double learning_rate);

/// params + scale * other, in place. Layouts must match.
void axpy(ParameterVector& params, double scale, const ParameterVector& other);

}  // namespace fedsage
