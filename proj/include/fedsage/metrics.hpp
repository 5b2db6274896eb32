#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "fedsage/data.hpp"
#include "fedsage/model.hpp"
#include "fedsage/pseudo.hpp"

namespace fedsage {

/// A decision paired with the hidden true label of the sample it was made for.
struct ScoredDecision {
    PseudoLabelDecision decision;
    std::size_t true_label = 0;
};

struct PseudoLabelAccuracy {
    std::size_t count = 0;
    std::size_t correct = 0;
    /// Empty when count == 0.
    std::optional<double> accuracy() const;
};

PseudoLabelAccuracy pseudo_label_accuracy(std::span<const ScoredDecision> decisions);

inline constexpr std::size_t kEntropyBins = 20;

/// Shannon entropy (nats) of the `bins`-bin histogram of values on [0, 1]; the last bin is closed.
/// Empty input yields no value.
std::optional<double> confidence_entropy(std::span<const double> confidences, std::size_t bins = kEntropyBins);

/// 1 + number of classes whose reference probability strictly exceeds that of `cls`.
std::size_t consensus_rank(std::size_t cls, const Prediction& reference);

struct RankPair {
    std::size_t source_class = 0;
    const Prediction* reference = nullptr;
};

/// counts[r - 1] is the number of pairs with rank r, for r in 1..C.
std::vector<std::size_t> consensus_rank_histogram(std::span<const RankPair> pairs, std::size_t num_classes);

/// KL(dist || uniform) with 0 log 0 = 0.
double heterogeneity_kl(const ClassDistribution& dist);

/// Sums and counts so that per-client statistics can be merged into round totals.
struct LambdaStatistics {
    double sum = 0.0;
    std::size_t count = 0;
    std::vector<double> class_sum;
    std::vector<std::size_t> class_count;
    double majority_sum = 0.0;
    std::size_t majority_count = 0;
    double minority_sum = 0.0;
    std::size_t minority_count = 0;

    std::optional<double> mean() const;
    std::optional<double> class_mean(std::size_t c) const;
    std::optional<double> majority_mean() const;
    std::optional<double> minority_mean() const;

    void merge(const LambdaStatistics& other);
};

/// Averages lambda over CorrectedSoft decisions, keyed by the local predicted class. Classes whose
/// mass in `shard_distribution` is at or above its median count as the client's majority classes.
LambdaStatistics lambda_statistics(std::span<const ScoredDecision> decisions,
                                   const ClassDistribution& shard_distribution);

/// Fraction of samples whose argmax matches the label.
double test_accuracy(const ParameterVector& params, const ModelSpec& spec, const Dataset& test_set);

}  // namespace fedsage
