#include "fedsage/pseudo.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fedsage {

namespace {

void check_pair(const Prediction& local, const Prediction& global, const char* where) {
    if (local.num_classes() != global.num_classes() || local.num_classes() < 2) {
        throw std::invalid_argument(std::string(where) + ": predictions must share the same class count >= 2");
    }
}

PseudoLabelDecision base_decision(const Prediction& local, const Prediction& global) {
    PseudoLabelDecision d;
    d.local_class = local.argmax();
    d.global_class = global.argmax();
    d.local_confidence = local.probs[d.local_class];
    d.global_confidence = global.probs[d.global_class];
    return d;
}

void set_hard(PseudoLabelDecision& d, DecisionKind kind, std::size_t cls, std::size_t num_classes) {
    d.kind = kind;
    d.target.assign(num_classes, 0.0);
    d.target[cls] = 1.0;
}

}  // namespace

void CorrectionConfig::validate() const {
    if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("CorrectionConfig: tau must lie in (0, 1)");
    if (!(kappa >= 0.0) || std::isnan(kappa)) throw std::invalid_argument("CorrectionConfig: kappa must be >= 0");
}

std::string_view to_string(DecisionKind kind) {
    switch (kind) {
        case DecisionKind::CorrectedSoft: return "corrected_soft";
        case DecisionKind::LocalHard: return "local_hard";
        case DecisionKind::GlobalHard: return "global_hard";
        case DecisionKind::Abstain: return "abstain";
    }
    return "abstain";
}

PseudoStrategy parse_pseudo_strategy(std::string_view name) {
    if (name == "LPL") return PseudoStrategy::LPL;
    if (name == "GPL") return PseudoStrategy::GPL;
    if (name == "CPG") return PseudoStrategy::CPG;
    if (name == "SAGE") return PseudoStrategy::SAGE;
    throw std::invalid_argument("unknown pseudo-label strategy '" + std::string(name) + "'");
}

std::string_view to_string(PseudoStrategy s) {
    switch (s) {
        case PseudoStrategy::LPL: return "LPL";
        case PseudoStrategy::GPL: return "GPL";
        case PseudoStrategy::CPG: return "CPG";
        case PseudoStrategy::SAGE: return "SAGE";
    }
    return "SAGE";
}

PseudoLabelDecision cpg_assign(const Prediction& local, const Prediction& global, const CorrectionConfig& cfg) {
    check_pair(local, global, "cpg_assign");
    PseudoLabelDecision d = base_decision(local, global);
    if (d.local_confidence > cfg.tau) {
        set_hard(d, DecisionKind::LocalHard, d.local_class, local.num_classes());
    } else if (d.global_confidence > cfg.tau) {
        set_hard(d, DecisionKind::GlobalHard, d.global_class, global.num_classes());
    }
    return d;
}

double confidence_gap(const Prediction& local, const Prediction& global) {
    return std::abs(local.max() - global.max());
}

double correction_coefficient(double gap, double kappa) {
    if (gap < 0.0 || kappa < 0.0) throw std::invalid_argument("correction_coefficient: gap and kappa must be >= 0");
    return std::exp(-kappa * gap);
}

std::vector<double> soft_correct(const Prediction& local, const Prediction& global, double lambda) {
    check_pair(local, global, "soft_correct");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("soft_correct: lambda must lie in [0, 1]");
    std::vector<double> target(local.num_classes(), 0.0);
    target[local.argmax()] += lambda;
    target[global.argmax()] += 1.0 - lambda;
    return target;
}

PseudoLabelDecision sage_assign(const Prediction& local, const Prediction& global, const CorrectionConfig& cfg) {
    check_pair(local, global, "sage_assign");
    PseudoLabelDecision d = base_decision(local, global);
    if (d.local_confidence > cfg.tau) {
        const double lambda = correction_coefficient(confidence_gap(local, global), cfg.kappa);
        d.kind = DecisionKind::CorrectedSoft;
        d.lambda = lambda;
        d.target = soft_correct(local, global, lambda);
    } else if (d.global_confidence > cfg.tau) {
        set_hard(d, DecisionKind::GlobalHard, d.global_class, global.num_classes());
    }
    return d;
}

PseudoLabelDecision strategy_assign(PseudoStrategy mode, const Prediction& local, const Prediction& global,
                                    const CorrectionConfig& cfg) {
    check_pair(local, global, "strategy_assign");
    switch (mode) {
        case PseudoStrategy::LPL: {
            PseudoLabelDecision d = base_decision(local, global);
            if (d.local_confidence > cfg.tau) set_hard(d, DecisionKind::LocalHard, d.local_class, local.num_classes());
            return d;
        }
        case PseudoStrategy::GPL: {
            PseudoLabelDecision d = base_decision(local, global);
            if (d.global_confidence > cfg.tau) {
                set_hard(d, DecisionKind::GlobalHard, d.global_class, global.num_classes());
            }
            return d;
        }
        case PseudoStrategy::CPG: return cpg_assign(local, global, cfg);
        case PseudoStrategy::SAGE: return sage_assign(local, global, cfg);
    }
    throw std::invalid_argument("strategy_assign: unknown mode");
}

}  // namespace fedsage
