#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fedsage/federation.hpp"

namespace fedsage {

/// Fields that have no default and must appear in every config file.
inline const std::vector<std::string> kRequiredConfigFields = {
    "strategy", "rounds", "seed", "partition.dirichlet_alpha", "partition.label_fraction"};

struct ConfigParseResult {
    std::optional<ExperimentConfig> config;
    std::vector<ConfigIssue> issues;

    bool ok() const noexcept { return config.has_value() && issues.empty(); }
};

/// Reads an experiment config from JSON, fills defaults and checks every invariant.
/// Empty or whitespace-only text is treated as an empty object.
ConfigParseResult parse_config(std::string_view text);
ConfigParseResult parse_config_json(const nlohmann::json& doc);

/// Canonical form with every field spelled out; parse_config(config_to_json(c)) reproduces c.
nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg);

/// Sets `value` at a dotted path such as "partition.dirichlet_alpha", creating objects on the way.
void set_json_path(nlohmann::json& doc, std::string_view dotted_path, const nlohmann::json& value);

/// FNV-1a 64 of the canonical config dump, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace fedsage
