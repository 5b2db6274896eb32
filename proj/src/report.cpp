#include "fedsage/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "fedsage/config_io.hpp"

namespace fedsage {

std::string format_real(double v) {
    if (std::isnan(v)) return std::string(kMissing);
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string format_real(const std::optional<double>& v) {
    return v ? format_real(*v) : std::string(kMissing);
}

std::string trace_csv(std::span<const RoundMetrics> trace) {
    std::string out;
    for (std::size_t i = 0; i < kTraceColumns.size(); ++i) {
        if (i > 0) out += ',';
        out += kTraceColumns[i];
    }
    out += '\n';
    for (const RoundMetrics& m : trace) {
        const std::string fields[] = {
            std::to_string(m.round),
            format_real(m.test_accuracy),
            std::to_string(m.pseudo_count),
            format_real(m.pseudo_accuracy),
            format_real(m.mean_lambda),
            format_real(m.entropy_local),
            format_real(m.entropy_global),
            std::to_string(m.local_label_count),
            std::to_string(m.global_label_count),
            std::to_string(m.abstain_count),
            std::to_string(m.filtered_count),
            format_real(m.lambda_majority),
            format_real(m.lambda_minority),
            format_real(m.supervised_loss),
            format_real(m.unsupervised_loss),
        };
        static_assert(std::size(fields) == 15);
        for (std::size_t i = 0; i < std::size(fields); ++i) {
            if (i > 0) out += ',';
            out += fields[i];
        }
        out += '\n';
    }
    return out;
}

namespace {

nlohmann::ordered_json optional_json(const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

}  // namespace

nlohmann::ordered_json round_json(const RoundMetrics& m) {
    nlohmann::ordered_json j;
    j["round"] = m.round;
    j["test_acc"] = m.test_accuracy;
    j["pl_count"] = m.pseudo_count;
    j["pl_acc"] = optional_json(m.pseudo_accuracy);
    j["mean_lambda"] = optional_json(m.mean_lambda);
    j["lambda_majority"] = optional_json(m.lambda_majority);
    j["lambda_minority"] = optional_json(m.lambda_minority);
    auto by_class = nlohmann::ordered_json::array();
    for (const auto& v : m.lambda_by_class) by_class.push_back(optional_json(v));
    j["lambda_by_class"] = by_class;
    j["mean_entropy_local"] = optional_json(m.entropy_local);
    j["mean_entropy_global"] = optional_json(m.entropy_global);
    j["consensus_local_in_global"] = m.consensus_local_in_global;
    j["consensus_global_in_local"] = m.consensus_global_in_local;
    j["selected_clients"] = m.selected_clients;
    auto clients = nlohmann::ordered_json::array();
    for (const ClientSummary& c : m.per_client) {
        clients.push_back({{"client", c.client_id},
                           {"pl_count", c.pseudo_count},
                           {"pl_correct", c.pseudo_correct},
                           {"steps", c.steps}});
    }
    j["per_client"] = clients;
    return j;
}

nlohmann::ordered_json summary_json(const ExperimentConfig& cfg, const ExperimentResult& result) {
    nlohmann::ordered_json j;
    j["trace_schema_version"] = std::string(kTraceSchemaVersion);
    j["config"] = config_to_json(cfg);
    j["rounds"] = result.trace.size();
    if (!result.trace.empty()) {
        j["final_test_acc"] = result.trace.back().test_accuracy;
        const auto best = std::max_element(result.trace.begin(), result.trace.end(),
                                           [](const RoundMetrics& a, const RoundMetrics& b) {
                                               return a.test_accuracy < b.test_accuracy;
                                           });
        j["best_test_acc"] = best->test_accuracy;
        j["best_round"] = best->round;
    }
    auto rounds = nlohmann::ordered_json::array();
    for (const RoundMetrics& m : result.trace) rounds.push_back(round_json(m));
    j["per_round"] = rounds;
    return j;
}

std::optional<std::size_t> rounds_to_threshold(std::span<const RoundMetrics> trace, double threshold) {
    for (const RoundMetrics& m : trace) {
        if (m.test_accuracy >= threshold) return m.round;
    }
    return std::nullopt;
}

}  // namespace fedsage
