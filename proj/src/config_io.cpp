#include "fedsage/config_io.hpp"

#include <cstdint>
#include <cstdio>
#include <set>
#include <stdexcept>

namespace fedsage {

namespace {

using nlohmann::json;

std::string join(const std::string& prefix, const std::string& key) {
    return prefix.empty() ? key : prefix + "." + key;
}

// Walks one JSON object, pulling typed fields and recording problems by path.
class ObjectReader {
public:
    ObjectReader(const json* obj, std::string prefix, std::vector<ConfigIssue>& issues)
        : obj_(obj), prefix_(std::move(prefix)), issues_(issues) {}

    bool present(const std::string& key) const { return obj_ != nullptr && obj_->contains(key); }
    void mark(const std::string& key) { seen_.insert(key); }

    const json* child(const std::string& key) {
        seen_.insert(key);
        if (!present(key)) return nullptr;
        const json& v = obj_->at(key);
        if (!v.is_object()) {
            fail(key, "must be an object");
            return nullptr;
        }
        return &v;
    }

    void count(const std::string& key, std::size_t& out, bool required = false) {
        if (const json* v = fetch(key, required)) {
            if (v->is_number_unsigned()) {
                out = v->get<std::size_t>();
            } else if (v->is_number_integer()) {
                fail(key, "must be >= 0");
            } else {
                fail(key, "must be a non-negative integer");
            }
        }
    }

    void seed(const std::string& key, std::uint64_t& out, bool required = false) {
        if (const json* v = fetch(key, required)) {
            if (v->is_number_unsigned()) {
                out = v->get<std::uint64_t>();
            } else {
                fail(key, "must be a non-negative integer");
            }
        }
    }

    void real(const std::string& key, double& out, bool required = false) {
        if (const json* v = fetch(key, required)) {
            if (v->is_number()) {
                out = v->get<double>();
            } else {
                fail(key, "must be a number");
            }
        }
    }

    void optional_real(const std::string& key, std::optional<double>& out) {
        if (const json* v = fetch(key, false)) {
            if (v->is_number()) {
                out = v->get<double>();
            } else {
                fail(key, "must be a number or null");
            }
        }
    }

    void flag(const std::string& key, bool& out) {
        if (const json* v = fetch(key, false)) {
            if (v->is_boolean()) {
                out = v->get<bool>();
            } else {
                fail(key, "must be true or false");
            }
        }
    }

    template <class Parse>
    void name(const std::string& key, Parse parse, bool required = false) {
        if (const json* v = fetch(key, required)) {
            if (!v->is_string()) {
                fail(key, "must be a string");
                return;
            }
            try {
                parse(v->get<std::string>());
            } catch (const std::invalid_argument& e) {
                fail(key, e.what());
            }
        }
    }

    void counts(const std::string& key, std::vector<std::size_t>& out) {
        if (const json* v = fetch(key, false)) {
            if (!v->is_array()) {
                fail(key, "must be an array of positive integers");
                return;
            }
            std::vector<std::size_t> parsed;
            for (std::size_t i = 0; i < v->size(); ++i) {
                const json& e = (*v)[i];
                if (!e.is_number_unsigned()) {
                    fail(key + "[" + std::to_string(i) + "]", "must be a positive integer");
                    return;
                }
                parsed.push_back(e.get<std::size_t>());
            }
            out = std::move(parsed);
        }
    }

    void reject_unknown() {
        if (obj_ == nullptr) return;
        for (const auto& item : obj_->items()) {
            if (!seen_.contains(item.key())) fail(item.key(), "unknown field");
        }
    }

    void fail(const std::string& key, std::string message) {
        issues_.push_back({join(prefix_, key), std::move(message)});
    }

private:
    const json* fetch(const std::string& key, bool required) {
        seen_.insert(key);
        if (!present(key) || obj_->at(key).is_null()) {
            if (required) fail(key, "required field is missing");
            return nullptr;
        }
        return &obj_->at(key);
    }

    const json* obj_;
    std::string prefix_;
    std::vector<ConfigIssue>& issues_;
    std::set<std::string> seen_;
};

}  // namespace

ConfigParseResult parse_config(std::string_view text) {
    ConfigParseResult result;
    if (text.find_first_not_of(" \t\r\n") == std::string_view::npos) return parse_config_json(json::object());
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        result.issues.push_back({"", std::string("malformed JSON: ") + e.what()});
        return result;
    }
    return parse_config_json(doc);
}

ConfigParseResult parse_config_json(const nlohmann::json& doc) {
    ConfigParseResult result;
    auto& issues = result.issues;
    if (!doc.is_object()) {
        issues.push_back({"", "config must be a JSON object"});
        return result;
    }

    ExperimentConfig cfg;
    ObjectReader top(&doc, "", issues);
    top.name("strategy", [&](const std::string& s) { cfg.strategy = parse_strategy(s); }, true);
    top.count("rounds", cfg.rounds, true);
    top.seed("seed", cfg.seed, true);
    top.count("num_clients", cfg.num_clients);
    top.count("clients_per_round", cfg.clients_per_round);
    top.count("local_epochs", cfg.local_epochs);
    top.real("learning_rate", cfg.learning_rate);
    top.real("mu_u", cfg.mu_u);
    top.count("batch_size_s", cfg.batch_size_s);
    top.count("batch_size_u", cfg.batch_size_u);
    top.count("test_samples_per_class", cfg.test_samples_per_class);
    top.count("threads", cfg.threads);

    {
        const json* obj = top.child("correction");
        ObjectReader r(obj, "correction", issues);
        r.real("tau", cfg.correction.tau);
        r.real("kappa", cfg.correction.kappa);
        r.reject_unknown();
    }
    {
        const json* obj = top.child("partition");
        if (obj == nullptr && !top.present("partition")) {
            for (const char* key : {"dirichlet_alpha", "label_fraction"}) {
                issues.push_back({std::string("partition.") + key, "required field is missing"});
            }
        } else if (obj != nullptr) {
            ObjectReader r(obj, "partition", issues);
            r.real("dirichlet_alpha", cfg.dirichlet_alpha, true);
            r.real("label_fraction", cfg.label_fraction, true);
            r.reject_unknown();
        }
    }
    {
        ObjectReader r(top.child("task"), "task", issues);
        r.count("classes", cfg.task.classes);
        r.count("input_dim", cfg.task.input_dim);
        r.count("samples_per_class", cfg.task.samples_per_class);
        r.real("class_separation", cfg.task.class_separation);
        r.real("noise_scale", cfg.task.noise_scale);
        r.optional_real("pair_separation", cfg.task.pair_separation);
        r.reject_unknown();
    }
    {
        ObjectReader r(top.child("model"), "model", issues);
        r.counts("hidden_dims", cfg.hidden_dims);
        r.name("activation", [&](const std::string& s) { cfg.activation = parse_activation(s); });
        r.reject_unknown();
    }
    if (top.present("augment") && !doc.at("augment").is_null()) {
        const json* obj = top.child("augment");
        if (obj != nullptr) {
            AugmentConfig aug;
            ObjectReader r(obj, "augment", issues);
            r.real("weak_sigma", aug.weak_sigma, true);
            r.real("strong_sigma", aug.strong_sigma, true);
            r.real("drop_prob", aug.drop_prob, true);
            r.reject_unknown();
            cfg.augment = aug;
        }
    } else {
        top.mark("augment");
    }
    {
        ObjectReader r(top.child("diagnostics"), "diagnostics", issues);
        r.flag("oracle_filter", cfg.oracle_filter);
        r.count("entropy_bins", cfg.entropy_bins);
        r.reject_unknown();
    }
    top.reject_unknown();

    // Invariant checks still run after field errors; fields that failed to parse kept their defaults.
    std::set<std::string> reported;
    for (const ConfigIssue& issue : issues) reported.insert(issue.path);
    for (ConfigIssue& violation : check_config(cfg)) {
        if (!reported.contains(violation.path)) issues.push_back(std::move(violation));
    }
    if (!issues.empty()) return result;
    result.config = std::move(cfg);
    return result;
}

nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg) {
    nlohmann::ordered_json j;
    j["strategy"] = std::string(to_string(cfg.strategy));
    j["seed"] = cfg.seed;
    j["rounds"] = cfg.rounds;
    j["num_clients"] = cfg.num_clients;
    j["clients_per_round"] = cfg.clients_per_round;
    j["local_epochs"] = cfg.local_epochs;
    j["learning_rate"] = cfg.learning_rate;
    j["mu_u"] = cfg.mu_u;
    j["batch_size_s"] = cfg.batch_size_s;
    j["batch_size_u"] = cfg.batch_size_u;
    j["test_samples_per_class"] = cfg.test_samples_per_class;
    j["threads"] = cfg.threads;
    j["correction"] = {{"tau", cfg.correction.tau}, {"kappa", cfg.correction.kappa}};
    j["partition"] = {{"dirichlet_alpha", cfg.dirichlet_alpha}, {"label_fraction", cfg.label_fraction}};
    j["task"] = {{"classes", cfg.task.classes},
                 {"input_dim", cfg.task.input_dim},
                 {"samples_per_class", cfg.task.samples_per_class},
                 {"class_separation", cfg.task.class_separation},
                 {"noise_scale", cfg.task.noise_scale},
                 {"pair_separation", cfg.task.pair_separation ? json(*cfg.task.pair_separation) : json(nullptr)}};
    j["model"] = {{"hidden_dims", cfg.hidden_dims}, {"activation", std::string(to_string(cfg.activation))}};
    if (cfg.augment) {
        j["augment"] = {{"weak_sigma", cfg.augment->weak_sigma},
                        {"strong_sigma", cfg.augment->strong_sigma},
                        {"drop_prob", cfg.augment->drop_prob}};
    } else {
        j["augment"] = nullptr;
    }
    j["diagnostics"] = {{"oracle_filter", cfg.oracle_filter}, {"entropy_bins", cfg.entropy_bins}};
    return j;
}

void set_json_path(nlohmann::json& doc, std::string_view dotted_path, const nlohmann::json& value) {
    if (dotted_path.empty()) throw std::invalid_argument("set_json_path: empty path");
    nlohmann::json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const std::size_t dot = dotted_path.find('.', start);
        const std::string key(dotted_path.substr(start, dot == std::string_view::npos ? dotted_path.npos : dot - start));
        if (key.empty()) throw std::invalid_argument("set_json_path: empty segment in '" + std::string(dotted_path) + "'");
        if (!node->is_object()) {
            if (!node->is_null()) {
                throw std::invalid_argument("set_json_path: '" + std::string(dotted_path) + "' crosses a non-object");
            }
            *node = nlohmann::json::object();
        }
        if (dot == std::string_view::npos) {
            (*node)[key] = value;
            return;
        }
        node = &(*node)[key];
        start = dot + 1;
    }
}

std::string config_hash(const ExperimentConfig& cfg) {
    const std::string text = config_to_json(cfg).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace fedsage
