#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "fedsage/model.hpp"

namespace fedsage {

struct CorrectionConfig {
    double tau = 0.95;
    /// ln 2 / 0.05 rounded: equal local/global weight at a confidence gap of 0.05.
    double kappa = 13.86;

    void validate() const;
};

enum class DecisionKind {
    CorrectedSoft,  // confident local model, target blended towards the global argmax
    LocalHard,      // one-hot on the local argmax (LPL, and the local branch of CPG)
    GlobalHard,     // one-hot on the global argmax
    Abstain,
};

std::string_view to_string(DecisionKind kind);

struct PseudoLabelDecision {
    DecisionKind kind = DecisionKind::Abstain;
    /// Class distribution to train against; empty when abstaining.
    std::vector<double> target;
    double local_confidence = 0.0;
    double global_confidence = 0.0;
    /// Set iff kind == CorrectedSoft.
    std::optional<double> lambda;
    std::size_t local_class = 0;
    std::size_t global_class = 0;

    bool has_target() const noexcept { return kind != DecisionKind::Abstain; }
    /// Argmax of the target; only meaningful when has_target().
    std::size_t target_class() const noexcept { return argmax(target); }
};

enum class PseudoStrategy { LPL, GPL, CPG, SAGE };

PseudoStrategy parse_pseudo_strategy(std::string_view name);
std::string_view to_string(PseudoStrategy s);

/// Local-first hard pseudo-label: local argmax if max(p_l) > tau, else global argmax if max(p_g) > tau.
PseudoLabelDecision cpg_assign(const Prediction& local, const Prediction& global, const CorrectionConfig& cfg);

/// |max(p_l) - max(p_g)|
double confidence_gap(const Prediction& local, const Prediction& global);

/// exp(-kappa * gap)
double correction_coefficient(double gap, double kappa);

/// lambda * onehot(argmax p_l) + (1 - lambda) * onehot(argmax p_g)
std::vector<double> soft_correct(const Prediction& local, const Prediction& global, double lambda);

/// CPG dispatch with the confident-local branch replaced by the confidence-gap soft correction.
PseudoLabelDecision sage_assign(const Prediction& local, const Prediction& global, const CorrectionConfig& cfg);

PseudoLabelDecision strategy_assign(PseudoStrategy mode, const Prediction& local, const Prediction& global,
                                    const CorrectionConfig& cfg);

}  // namespace fedsage
