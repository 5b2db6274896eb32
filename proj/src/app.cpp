#include "fedsage/app.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "fedsage/config_io.hpp"
#include "fedsage/report.hpp"
#include "fedsage/seed.hpp"

#ifndef FEDSAGE_VERSION
#define FEDSAGE_VERSION "dev"
#endif

namespace fedsage::app {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
        throw std::runtime_error("cannot create output directory '" + dir.string() + "'" +
                                 (ec ? ": " + ec.message() : std::string()));
    }
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void report_issues(const std::vector<ConfigIssue>& issues, std::ostream& err) {
    for (const ConfigIssue& issue : issues) {
        err << "error: " << (issue.path.empty() ? "<config>" : issue.path) << ": " << issue.message << '\n';
    }
}

std::optional<ExperimentConfig> load_config(const fs::path& path, const Options& options, std::ostream& err) {
    ConfigParseResult parsed = parse_config(read_file(path));
    if (!parsed.ok()) {
        report_issues(parsed.issues, err);
        return std::nullopt;
    }
    if (options.seed_override) parsed.config->seed = *options.seed_override;
    return parsed.config;
}

std::string render_axis_value(const nlohmann::json& v) {
    return v.is_string() ? v.get<std::string>() : v.dump();
}

}  // namespace

LogLevel parse_log_level(std::string_view name) {
    if (name == "quiet") return LogLevel::Quiet;
    if (name == "info") return LogLevel::Info;
    if (name == "debug") return LogLevel::Debug;
    throw std::invalid_argument("unknown log level '" + std::string(name) + "'");
}

std::size_t SweepSpec::cell_count() const {
    std::size_t n = 1;
    for (const auto& axis : axes) n *= axis.second.size();
    return n;
}

SweepSpec parse_sweep(std::string_view text) {
    nlohmann::ordered_json doc;
    try {
        doc = nlohmann::ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument(std::string("sweep: malformed JSON: ") + e.what());
    }
    if (!doc.is_object()) throw std::invalid_argument("sweep: spec must be a JSON object");
    SweepSpec spec;
    if (!doc.contains("base") || !doc["base"].is_object()) throw std::invalid_argument("sweep: 'base' config object is required");
    spec.base = nlohmann::json(doc["base"]);
    if (doc.contains("axes")) {
        if (!doc["axes"].is_object()) throw std::invalid_argument("sweep: 'axes' must map config paths to value lists");
        for (const auto& item : doc["axes"].items()) {
            if (!item.value().is_array() || item.value().empty()) {
                throw std::invalid_argument("sweep: axis '" + item.key() + "' must be a non-empty array");
            }
            std::vector<nlohmann::json> values;
            for (const auto& v : item.value()) values.emplace_back(v);
            spec.axes.emplace_back(item.key(), std::move(values));
        }
    }
    if (doc.contains("repeats")) {
        if (!doc["repeats"].is_number_unsigned() || doc["repeats"].get<std::size_t>() < 1) {
            throw std::invalid_argument("sweep: 'repeats' must be an integer >= 1");
        }
        spec.repeats = doc["repeats"].get<std::size_t>();
    }
    if (doc.contains("threshold")) {
        if (!doc["threshold"].is_number()) throw std::invalid_argument("sweep: 'threshold' must be a number");
        spec.threshold = doc["threshold"].get<double>();
    }
    if (doc.contains("reference_strategy")) {
        if (!doc["reference_strategy"].is_string()) throw std::invalid_argument("sweep: 'reference_strategy' must be a string");
        spec.reference_strategy = doc["reference_strategy"].get<std::string>();
    }
    if (doc.contains("max_runs")) {
        if (!doc["max_runs"].is_number_unsigned()) throw std::invalid_argument("sweep: 'max_runs' must be a non-negative integer");
        spec.max_runs = doc["max_runs"].get<std::size_t>();
    }
    for (const auto& item : doc.items()) {
        static const char* known[] = {"base", "axes", "repeats", "threshold", "reference_strategy", "max_runs"};
        if (std::find(std::begin(known), std::end(known), item.key()) == std::end(known)) {
            throw std::invalid_argument("sweep: unknown field '" + item.key() + "'");
        }
    }
    if (spec.cell_count() * spec.repeats > spec.max_runs) {
        throw std::invalid_argument("sweep: " + std::to_string(spec.cell_count() * spec.repeats) +
                                    " runs exceed max_runs = " + std::to_string(spec.max_runs));
    }
    return spec;
}

std::uint64_t repeat_seed(std::uint64_t base_seed, std::size_t repeat) {
    return derive_seed(base_seed, {stream::kRepeat, repeat});
}

nlohmann::json sweep_cell_config(const SweepSpec& spec, std::size_t cell, std::size_t repeat) {
    nlohmann::json cfg = spec.base;
    std::size_t rest = cell;
    for (std::size_t a = spec.axes.size(); a-- > 0;) {
        const auto& [path, values] = spec.axes[a];
        set_json_path(cfg, path, values[rest % values.size()]);
        rest /= values.size();
    }
    const std::uint64_t base_seed = cfg.contains("seed") && cfg["seed"].is_number_unsigned()
                                        ? cfg["seed"].get<std::uint64_t>()
                                        : 0;
    cfg["seed"] = repeat_seed(base_seed, repeat);
    return cfg;
}

std::string comparison_csv(const std::vector<SweepRow>& rows, const std::string& reference_strategy) {
    // Rows that differ only in strategy share a comparison key.
    auto key_without_strategy = [](const SweepRow& r) {
        std::string key;
        std::istringstream parts(r.axes);
        std::string part;
        while (std::getline(parts, part, ';')) {
            if (part.rfind("strategy=", 0) != 0) key += part + ";";
        }
        return key + "#" + std::to_string(r.repeat);
    };
    std::map<std::string, const SweepRow*> reference;
    std::map<std::size_t, std::vector<double>> per_cell;
    for (const SweepRow& r : rows) {
        if (r.strategy == reference_strategy) reference[key_without_strategy(r)] = &r;
        per_cell[r.cell].push_back(r.final_accuracy);
    }

    std::string out =
        "cell,strategy,alpha,repeat,seed,axes,final_acc,rounds_to_threshold,speedup,final_acc_mean,final_acc_std\n";
    for (const SweepRow& r : rows) {
        const auto& accs = per_cell[r.cell];
        double mean = 0.0;
        for (double a : accs) mean += a;
        mean /= static_cast<double>(accs.size());
        std::optional<double> stddev;
        if (accs.size() >= 2) {
            double ss = 0.0;
            for (double a : accs) ss += (a - mean) * (a - mean);
            stddev = std::sqrt(ss / static_cast<double>(accs.size() - 1));
        }
        std::string speedup(kMissing);
        if (auto it = reference.find(key_without_strategy(r)); it != reference.end()) {
            const auto& ref = it->second->rounds_to_threshold;
            if (ref && r.rounds_to_threshold) {
                speedup = format_real(static_cast<double>(*ref) / static_cast<double>(*r.rounds_to_threshold));
            }
        }
        out += std::to_string(r.cell) + ',' + r.strategy + ',' + format_real(r.alpha) + ',' +
               std::to_string(r.repeat) + ',' + std::to_string(r.seed) + ',' + r.axes + ',' +
               format_real(r.final_accuracy) + ',' +
               (r.rounds_to_threshold ? std::to_string(*r.rounds_to_threshold) : std::string(kNeverReached)) + ',' +
               speedup + ',' + format_real(mean) + ',' + format_real(stddev) + '\n';
    }
    return out;
}

void write_run_outputs(const ExperimentConfig& cfg, const ExperimentResult& result, const fs::path& out_dir) {
    ensure_dir(out_dir);
    write_file(out_dir / "trace.csv", trace_csv(result.trace));
    write_file(out_dir / "summary.json", summary_json(cfg, result).dump(2) + "\n");
    nlohmann::ordered_json manifest;
    manifest["config_hash"] = config_hash(cfg);
    manifest["seed"] = cfg.seed;
    manifest["strategy"] = std::string(to_string(cfg.strategy));
    manifest["code_version"] = FEDSAGE_VERSION;
    manifest["trace_schema_version"] = std::string(kTraceSchemaVersion);
    manifest["trace_columns"] = kTraceColumns;
    manifest["created_at"] = utc_timestamp();
    write_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
}

int validate_command(const fs::path& config_path, std::ostream& out, std::ostream& err) {
    try {
        const ConfigParseResult parsed = parse_config(read_file(config_path));
        if (!parsed.ok()) {
            report_issues(parsed.issues, err);
            return 2;
        }
        out << config_to_json(*parsed.config).dump(2) << '\n';
        return 0;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

int run_command(const fs::path& config_path, const fs::path& out_dir, const Options& options, std::ostream& err) {
    try {
        const auto cfg = load_config(config_path, options, err);
        if (!cfg) return 2;
        ensure_dir(out_dir);
        if (options.log_level != LogLevel::Quiet) {
            err << "running " << to_string(cfg->strategy) << " for " << cfg->rounds << " rounds (seed " << cfg->seed
                << ")\n";
        }
        const ExperimentResult result = run_experiment(*cfg);
        if (options.log_level == LogLevel::Debug) {
            for (const RoundMetrics& m : result.trace) {
                err << "round " << m.round << " test_acc " << format_real(m.test_accuracy) << " pl_count "
                    << m.pseudo_count << '\n';
            }
        }
        write_run_outputs(*cfg, result, out_dir);
        if (options.log_level != LogLevel::Quiet) {
            err << "final test accuracy " << format_real(result.trace.back().test_accuracy) << ", outputs in "
                << out_dir.string() << '\n';
        }
        return 0;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

int sweep_command(const fs::path& sweep_path, const fs::path& out_dir, const Options& options, std::ostream& err) {
    try {
        SweepSpec spec = parse_sweep(read_file(sweep_path));
        if (options.seed_override) spec.base["seed"] = *options.seed_override;
        ensure_dir(out_dir);

        // Validate every cell before running any of them.
        std::vector<std::vector<ExperimentConfig>> configs(spec.cell_count());
        bool valid = true;
        for (std::size_t cell = 0; cell < spec.cell_count(); ++cell) {
            for (std::size_t r = 0; r < spec.repeats; ++r) {
                ConfigParseResult parsed = parse_config_json(sweep_cell_config(spec, cell, r));
                if (!parsed.ok()) {
                    err << "cell " << cell << ", repeat " << r << ":\n";
                    report_issues(parsed.issues, err);
                    valid = false;
                    continue;
                }
                configs[cell].push_back(*parsed.config);
            }
        }
        if (!valid) return 2;

        std::vector<SweepRow> rows;
        for (std::size_t cell = 0; cell < configs.size(); ++cell) {
            std::string axes;
            const nlohmann::json cell_json = sweep_cell_config(spec, cell, 0);
            for (const auto& [path, values] : spec.axes) {
                const nlohmann::json* node = &cell_json;
                std::size_t start = 0;
                while (true) {
                    const std::size_t dot = path.find('.', start);
                    node = &node->at(path.substr(start, dot == std::string::npos ? std::string::npos : dot - start));
                    if (dot == std::string::npos) break;
                    start = dot + 1;
                }
                if (!axes.empty()) axes += ';';
                axes += path + "=" + render_axis_value(*node);
            }
            for (std::size_t r = 0; r < configs[cell].size(); ++r) {
                const ExperimentConfig& cfg = configs[cell][r];
                if (options.log_level != LogLevel::Quiet) {
                    err << "cell " << cell << " [" << axes << "] repeat " << r << '\n';
                }
                const ExperimentResult result = run_experiment(cfg);
                char dir[64];
                std::snprintf(dir, sizeof dir, "cell_%03zu/rep_%zu", cell, r);
                write_run_outputs(cfg, result, out_dir / dir);
                rows.push_back(SweepRow{cell, std::string(to_string(cfg.strategy)), cfg.dirichlet_alpha, r, cfg.seed,
                                        axes, result.trace.back().test_accuracy,
                                        rounds_to_threshold(result.trace, spec.threshold)});
            }
        }
        write_file(out_dir / "comparison.csv", comparison_csv(rows, spec.reference_strategy));
        if (options.log_level != LogLevel::Quiet) {
            err << rows.size() << " runs, comparison in " << (out_dir / "comparison.csv").string() << '\n';
        }
        return 0;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

int export_shards_command(const fs::path& config_path, const fs::path& out_file, const Options& options,
                          std::ostream& err) {
    try {
        const auto cfg = load_config(config_path, options, err);
        if (!cfg) return 2;
        const Dataset train = generate_synthetic(cfg->task, cfg->seed);
        const auto shards = dirichlet_partition(train, cfg->partition());
        if (out_file.has_parent_path()) ensure_dir(out_file.parent_path());
        std::ofstream out(out_file, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write '" + out_file.string() + "'");
        export_shards(shards, out);
        if (!out) throw std::runtime_error("write failed for '" + out_file.string() + "'");
        if (options.log_level != LogLevel::Quiet) {
            err << "wrote " << shards.size() << " shards to " << out_file.string() << '\n';
        }
        return 0;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace fedsage::app
