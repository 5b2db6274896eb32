#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fedsage/federation.hpp"

namespace fedsage::app {

enum class LogLevel { Quiet, Info, Debug };

LogLevel parse_log_level(std::string_view name);

struct Options {
    LogLevel log_level = LogLevel::Info;
    std::optional<std::uint64_t> seed_override;
};

/// Sentinel for a run that never reaches the accuracy threshold.
inline constexpr std::string_view kNeverReached = "None";

struct SweepSpec {
    nlohmann::json base;
    std::vector<std::pair<std::string, std::vector<nlohmann::json>>> axes;
    std::size_t repeats = 1;
    double threshold = 0.6;
    std::string reference_strategy = "LPL";
    std::size_t max_runs = 1000;

    std::size_t cell_count() const;
};

/// Throws std::invalid_argument on malformed specs or when cells * repeats exceeds max_runs.
SweepSpec parse_sweep(std::string_view text);

/// Seed used for repeat `r` of a sweep whose base config has seed `base_seed`.
std::uint64_t repeat_seed(std::uint64_t base_seed, std::size_t repeat);

/// Config json for one cell and repeat; the cell index enumerates the axis cross product
/// with the last axis varying fastest.
nlohmann::json sweep_cell_config(const SweepSpec& spec, std::size_t cell, std::size_t repeat);

struct SweepRow {
    std::size_t cell = 0;
    std::string strategy;
    double alpha = 0.0;
    std::size_t repeat = 0;
    std::uint64_t seed = 0;
    std::string axes;  // "path=value;..." for every swept axis
    double final_accuracy = 0.0;
    std::optional<std::size_t> rounds_to_threshold;
};

/// Combined comparison table: one row per run plus per-cell mean and standard deviation of the final
/// accuracy and the rounds-to-threshold speedup against the reference strategy.
std::string comparison_csv(const std::vector<SweepRow>& rows, const std::string& reference_strategy);

int validate_command(const std::filesystem::path& config_path, std::ostream& out, std::ostream& err);
int run_command(const std::filesystem::path& config_path, const std::filesystem::path& out_dir,
                const Options& options, std::ostream& err);
int sweep_command(const std::filesystem::path& sweep_path, const std::filesystem::path& out_dir,
                  const Options& options, std::ostream& err);
int export_shards_command(const std::filesystem::path& config_path, const std::filesystem::path& out_file,
                          const Options& options, std::ostream& err);

/// Writes trace.csv, summary.json and manifest.json for one finished experiment.
void write_run_outputs(const ExperimentConfig& cfg, const ExperimentResult& result,
                       const std::filesystem::path& out_dir);

}  // namespace fedsage::app
