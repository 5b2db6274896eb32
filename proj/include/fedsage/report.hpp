#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fedsage/federation.hpp"

namespace fedsage {

/// Bumped whenever a trace column is added, removed or reordered.
inline constexpr std::string_view kTraceSchemaVersion = "1";

inline const std::vector<std::string> kTraceColumns = {
    "round",        "test_acc",        "pl_count",        "pl_acc",   "mean_lambda", "mean_entropy_local",
    "mean_entropy_global", "pl_local",  "pl_global",       "abstain",  "filtered",    "lambda_majority",
    "lambda_minority",     "sup_loss",  "unsup_loss"};

/// Written for undefined values (no pseudo-labels, no corrected labels, ...).
inline constexpr std::string_view kMissing = "NA";

/// Shortest decimal that round-trips to the same double.
std::string format_real(double v);
std::string format_real(const std::optional<double>& v);

/// Header plus one row per round.
std::string trace_csv(std::span<const RoundMetrics> trace);

nlohmann::ordered_json round_json(const RoundMetrics& m);

/// Config echo, final/best accuracy and the per-round histograms and lambda breakdowns.
nlohmann::ordered_json summary_json(const ExperimentConfig& cfg, const ExperimentResult& result);

/// First `round` whose test accuracy is >= threshold.
std::optional<std::size_t> rounds_to_threshold(std::span<const RoundMetrics> trace, double threshold);

}  // namespace fedsage
