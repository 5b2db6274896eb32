#include "fedsage/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fedsage {

namespace {

std::optional<double> ratio(double sum, std::size_t count) {
    if (count == 0) return std::nullopt;
    return sum / static_cast<double>(count);
}

}  // namespace

std::optional<double> PseudoLabelAccuracy::accuracy() const {
    return ratio(static_cast<double>(correct), count);
}

PseudoLabelAccuracy pseudo_label_accuracy(std::span<const ScoredDecision> decisions) {
    PseudoLabelAccuracy out;
    for (const ScoredDecision& d : decisions) {
        if (!d.decision.has_target()) continue;
        ++out.count;
        if (d.decision.target_class() == d.true_label) ++out.correct;
    }
    return out;
}

std::optional<double> confidence_entropy(std::span<const double> confidences, std::size_t bins) {
    if (bins < 2) throw std::invalid_argument("confidence_entropy: bins must be >= 2");
    if (confidences.empty()) return std::nullopt;
    std::vector<std::size_t> counts(bins, 0);
    for (double v : confidences) {
        if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("confidence_entropy: value outside [0, 1]");
        const auto bin = std::min(static_cast<std::size_t>(v * static_cast<double>(bins)), bins - 1);
        ++counts[bin];
    }
    const double n = static_cast<double>(confidences.size());
    double h = 0.0;
    for (std::size_t c : counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / n;
        h -= p * std::log(p);
    }
    return h;
}

std::size_t consensus_rank(std::size_t cls, const Prediction& reference) {
    if (cls >= reference.num_classes()) throw std::invalid_argument("consensus_rank: class out of range");
    const double p = reference.probs[cls];
    return 1 + static_cast<std::size_t>(
                   std::count_if(reference.probs.begin(), reference.probs.end(), [p](double q) { return q > p; }));
}

std::vector<std::size_t> consensus_rank_histogram(std::span<const RankPair> pairs, std::size_t num_classes) {
    std::vector<std::size_t> counts(num_classes, 0);
    for (const RankPair& pair : pairs) {
        if (pair.reference == nullptr || pair.reference->num_classes() != num_classes) {
            throw std::invalid_argument("consensus_rank_histogram: reference prediction has wrong class count");
        }
        ++counts[consensus_rank(pair.source_class, *pair.reference) - 1];
    }
    return counts;
}

double heterogeneity_kl(const ClassDistribution& dist) {
    const double c = static_cast<double>(dist.mass.size());
    double kl = 0.0;
    for (double q : dist.mass) {
        if (q > 0.0) kl += q * std::log(q * c);
    }
    return std::max(kl, 0.0);
}

std::optional<double> LambdaStatistics::mean() const { return ratio(sum, count); }

std::optional<double> LambdaStatistics::class_mean(std::size_t c) const {
    if (c >= class_sum.size()) return std::nullopt;
    return ratio(class_sum[c], class_count[c]);
}

std::optional<double> LambdaStatistics::majority_mean() const { return ratio(majority_sum, majority_count); }
std::optional<double> LambdaStatistics::minority_mean() const { return ratio(minority_sum, minority_count); }

void LambdaStatistics::merge(const LambdaStatistics& other) {
    sum += other.sum;
    count += other.count;
    if (class_sum.size() < other.class_sum.size()) {
        class_sum.resize(other.class_sum.size(), 0.0);
        class_count.resize(other.class_count.size(), 0);
    }
    for (std::size_t c = 0; c < other.class_sum.size(); ++c) {
        class_sum[c] += other.class_sum[c];
        class_count[c] += other.class_count[c];
    }
    majority_sum += other.majority_sum;
    majority_count += other.majority_count;
    minority_sum += other.minority_sum;
    minority_count += other.minority_count;
}

LambdaStatistics lambda_statistics(std::span<const ScoredDecision> decisions,
                                   const ClassDistribution& shard_distribution) {
    const std::size_t num_classes = shard_distribution.mass.size();
    LambdaStatistics stats;
    stats.class_sum.assign(num_classes, 0.0);
    stats.class_count.assign(num_classes, 0);
    if (num_classes == 0) return stats;

    std::vector<double> sorted = shard_distribution.mass;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t mid = num_classes / 2;
    const double median = num_classes % 2 == 1 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);

    for (const ScoredDecision& d : decisions) {
        if (d.decision.kind != DecisionKind::CorrectedSoft || !d.decision.lambda) continue;
        const double lambda = *d.decision.lambda;
        const std::size_t c = d.decision.local_class;
        if (c >= num_classes) throw std::invalid_argument("lambda_statistics: class out of range");
        stats.sum += lambda;
        ++stats.count;
        stats.class_sum[c] += lambda;
        ++stats.class_count[c];
        if (shard_distribution.mass[c] >= median) {
            stats.majority_sum += lambda;
            ++stats.majority_count;
        } else {
            stats.minority_sum += lambda;
            ++stats.minority_count;
        }
    }
    return stats;
}

double test_accuracy(const ParameterVector& params, const ModelSpec& spec, const Dataset& test_set) {
    if (test_set.samples.empty()) return 0.0;
    std::size_t hits = 0;
    for (const Sample& s : test_set.samples) {
        if (forward(params, spec, s.features).argmax() == s.label) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(test_set.samples.size());
}

}  // namespace fedsage
