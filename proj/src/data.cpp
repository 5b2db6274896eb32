#include "fedsage/data.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace fedsage {

void PartitionConfig::validate() const {
    if (num_clients < 1) throw std::invalid_argument("PartitionConfig: num_clients must be >= 1");
    if (!(dirichlet_alpha > 0.0) || !std::isfinite(dirichlet_alpha)) {
        throw std::invalid_argument("PartitionConfig: dirichlet_alpha must be > 0");
    }
    if (!(label_fraction > 0.0 && label_fraction < 1.0)) {
        throw std::invalid_argument("PartitionConfig: label_fraction must lie in (0, 1)");
    }
}

SyntheticTask::SyntheticTask(TaskSpec spec, std::uint64_t seed) : spec_(spec) {
    if (spec_.classes < 2) throw std::invalid_argument("SyntheticTask: classes must be >= 2");
    if (spec_.input_dim < 1) throw std::invalid_argument("SyntheticTask: input_dim must be >= 1");
    Rng rng(derive_seed(seed, {stream::kData, 0}));
    std::normal_distribution<double> normal(0.0, 1.0);
    means_.resize(spec_.classes);
    for (auto& mean : means_) {
        mean.resize(spec_.input_dim);
        double norm = 0.0;
        do {
            norm = 0.0;
            for (double& v : mean) {
                v = normal(rng);
                norm += v * v;
            }
        } while (norm == 0.0);
        const double scale = spec_.class_separation / std::sqrt(norm);
        for (double& v : mean) v *= scale;
    }
    if (spec_.pair_separation) {
        if (!(spec_.class_separation > 0.0)) {
            throw std::invalid_argument("SyntheticTask: pair_separation needs class_separation > 0");
        }
        const double half = 0.5 * *spec_.pair_separation / spec_.class_separation;
        for (std::size_t c = 0; c + 1 < spec_.classes; c += 2) {
            // The partner's random direction (norm class_separation) becomes the offset axis.
            const std::vector<double> centre = means_[c];
            const std::vector<double> axis = means_[c + 1];
            for (std::size_t j = 0; j < spec_.input_dim; ++j) {
                means_[c][j] = centre[j] + half * axis[j];
                means_[c + 1][j] = centre[j] - half * axis[j];
            }
        }
    }
}

Dataset SyntheticTask::draw(std::size_t per_class, std::uint64_t stream_seed) const {
    Rng rng(stream_seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    Dataset ds{spec_.classes, spec_.input_dim, {}};
    ds.samples.reserve(per_class * spec_.classes);
    for (std::size_t c = 0; c < spec_.classes; ++c) {
        for (std::size_t i = 0; i < per_class; ++i) {
            Sample s{ds.samples.size(), means_[c], c};
            for (double& v : s.features) v += spec_.noise_scale * noise(rng);
            ds.samples.push_back(std::move(s));
        }
    }
    return ds;
}

Dataset generate_synthetic(const TaskSpec& spec, std::uint64_t seed) {
    if (spec.samples_per_class < 1) throw std::invalid_argument("generate_synthetic: samples_per_class must be >= 1");
    return SyntheticTask(spec, seed).draw(spec.samples_per_class, derive_seed(seed, {stream::kData, 1}));
}

Dataset generate_test_set(const TaskSpec& spec, std::uint64_t seed, std::size_t per_class) {
    return SyntheticTask(spec, seed).draw(per_class, derive_seed(seed, {stream::kTest}));
}

std::vector<double> sample_dirichlet(double alpha, std::size_t k, Rng& rng) {
    std::gamma_distribution<double> gamma(alpha, 1.0);
    std::vector<double> p(k);
    double sum = 0.0;
    // Tiny alpha can underflow every component; redraw in that case.
    for (int attempt = 0; attempt < 64 && !(sum > 0.0); ++attempt) {
        sum = 0.0;
        for (double& v : p) {
            v = gamma(rng);
            sum += v;
        }
    }
    if (!(sum > 0.0)) {
        std::fill(p.begin(), p.end(), 0.0);
        p[std::uniform_int_distribution<std::size_t>(0, k - 1)(rng)] = 1.0;
        return p;
    }
    for (double& v : p) v /= sum;
    return p;
}

namespace {

// owner[i] for each sample of `pool`, where pool is grouped by class in `by_class`.
std::vector<std::vector<double>> assign_pool(const std::vector<std::vector<std::size_t>>& by_class,
                                             std::size_t num_clients, double alpha, Rng& rng,
                                             std::vector<std::vector<std::size_t>>& members) {
    std::vector<std::vector<double>> proportions(by_class.size());
    members.assign(num_clients, {});
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        proportions[c] = sample_dirichlet(alpha, num_clients, rng);
        std::discrete_distribution<std::size_t> pick(proportions[c].begin(), proportions[c].end());
        for (std::size_t idx : by_class[c]) members[pick(rng)].push_back(idx);
    }
    return proportions;
}

void repair_empty_labeled(std::vector<std::vector<std::size_t>>& labeled,
                          const std::vector<std::vector<double>>& proportions, const Dataset& ds) {
    const std::size_t num_clients = labeled.size();
    for (std::size_t k = 0; k < num_clients; ++k) {
        if (!labeled[k].empty()) continue;
        std::size_t wanted = 0;
        for (std::size_t c = 1; c < proportions.size(); ++c) {
            if (proportions[c][k] > proportions[wanted][k]) wanted = c;
        }
        auto holds_wanted = [&](std::size_t d) {
            return std::any_of(labeled[d].begin(), labeled[d].end(),
                               [&](std::size_t i) { return ds.samples[i].label == wanted; });
        };
        // Largest donor that can spare a sample, preferring one that holds the wanted class.
        std::size_t donor = num_clients;
        bool donor_has_class = false;
        for (std::size_t d = 0; d < num_clients; ++d) {
            if (d == k || labeled[d].size() < 2) continue;
            const bool has = holds_wanted(d);
            if (donor == num_clients || (has && !donor_has_class) ||
                (has == donor_has_class && labeled[d].size() > labeled[donor].size())) {
                donor = d;
                donor_has_class = has;
            }
        }
        if (donor == num_clients) {
            throw std::invalid_argument("dirichlet_partition: not enough labeled samples to give every client one");
        }
        auto& pool = labeled[donor];
        auto it = pool.end() - 1;
        if (donor_has_class) {
            it = std::find_if(pool.rbegin(), pool.rend(), [&](std::size_t i) {
                     return ds.samples[i].label == wanted;
                 }).base() - 1;
        }
        labeled[k].push_back(*it);
        pool.erase(it);
    }
}

}  // namespace

std::vector<ClientShard> dirichlet_partition(const Dataset& dataset, const PartitionConfig& cfg) {
    cfg.validate();
    if (dataset.samples.empty()) throw std::invalid_argument("dirichlet_partition: empty dataset");
    Rng rng(cfg.seed);

    std::vector<std::vector<std::size_t>> by_class(dataset.num_classes);
    for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
        const std::size_t label = dataset.samples[i].label;
        if (label >= dataset.num_classes) throw std::invalid_argument("dirichlet_partition: label out of range");
        by_class[label].push_back(i);
    }

    std::vector<std::vector<std::size_t>> labeled_by_class(dataset.num_classes);
    std::vector<std::vector<std::size_t>> unlabeled_by_class(dataset.num_classes);
    std::size_t total_labeled = 0;
    for (std::size_t c = 0; c < dataset.num_classes; ++c) {
        auto& idx = by_class[c];
        std::shuffle(idx.begin(), idx.end(), rng);
        const auto n_labeled = static_cast<std::size_t>(
            std::lround(cfg.label_fraction * static_cast<double>(idx.size())));
        labeled_by_class[c].assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_labeled));
        unlabeled_by_class[c].assign(idx.begin() + static_cast<std::ptrdiff_t>(n_labeled), idx.end());
        total_labeled += n_labeled;
    }
    if (total_labeled < cfg.num_clients) {
        throw std::invalid_argument("dirichlet_partition: fewer labeled samples than clients");
    }

    std::vector<std::vector<std::size_t>> labeled_members;
    std::vector<std::vector<std::size_t>> unlabeled_members;
    const auto labeled_props = assign_pool(labeled_by_class, cfg.num_clients, cfg.dirichlet_alpha, rng, labeled_members);
    assign_pool(unlabeled_by_class, cfg.num_clients, cfg.dirichlet_alpha, rng, unlabeled_members);
    repair_empty_labeled(labeled_members, labeled_props, dataset);

    std::vector<ClientShard> shards(cfg.num_clients);
    for (std::size_t k = 0; k < cfg.num_clients; ++k) {
        ClientShard& shard = shards[k];
        shard.client_id = k;
        for (std::size_t i : labeled_members[k]) shard.labeled.push_back(dataset.samples[i]);
        for (std::size_t i : unlabeled_members[k]) shard.unlabeled.emplace_back(dataset.samples[i], false);
        for (std::size_t i : labeled_members[k]) shard.unlabeled.emplace_back(dataset.samples[i], true);
    }
    return shards;
}

namespace {

template <class Pool, class LabelOf>
ClassDistribution distribution_of(const Pool& pool, std::size_t num_classes, LabelOf label_of) {
    if (pool.empty()) throw std::invalid_argument("class_distribution: empty pool");
    ClassDistribution d{std::vector<double>(num_classes, 0.0)};
    for (const auto& s : pool) {
        const std::size_t label = label_of(s);
        if (label >= num_classes) throw std::invalid_argument("class_distribution: label out of range");
        d.mass[label] += 1.0;
    }
    for (double& m : d.mass) m /= static_cast<double>(pool.size());
    return d;
}

}  // namespace

ClassDistribution class_distribution(std::span<const Sample> pool, std::size_t num_classes) {
    return distribution_of(pool, num_classes, [](const Sample& s) { return s.label; });
}

ClassDistribution class_distribution(std::span<const UnlabeledSample> pool, std::size_t num_classes) {
    return distribution_of(pool, num_classes, [](const UnlabeledSample& s) { return s.hidden_label(); });
}

AugmentConfig AugmentConfig::scaled(double scale) {
    return AugmentConfig{0.05 * scale, 0.2 * scale, 0.1};
}

double feature_scale(const Dataset& dataset) {
    if (dataset.samples.empty()) return 1.0;
    const std::size_t d = dataset.input_dim;
    std::vector<double> mean(d, 0.0), sq(d, 0.0);
    for (const Sample& s : dataset.samples) {
        for (std::size_t j = 0; j < d; ++j) mean[j] += s.features[j];
    }
    const double n = static_cast<double>(dataset.samples.size());
    for (double& m : mean) m /= n;
    for (const Sample& s : dataset.samples) {
        for (std::size_t j = 0; j < d; ++j) {
            const double dev = s.features[j] - mean[j];
            sq[j] += dev * dev;
        }
    }
    const double avg_var = std::accumulate(sq.begin(), sq.end(), 0.0) / (n * static_cast<double>(d));
    return std::sqrt(avg_var);
}

std::vector<double> weak_augment(std::span<const double> x, const AugmentConfig& cfg, Rng& rng) {
    std::vector<double> out(x.begin(), x.end());
    if (cfg.weak_sigma == 0.0) return out;
    std::normal_distribution<double> noise(0.0, cfg.weak_sigma);
    for (double& v : out) v += noise(rng);
    return out;
}

std::vector<double> strong_augment(std::span<const double> x, const AugmentConfig& cfg, Rng& rng) {
    std::vector<double> out(x.begin(), x.end());
    std::normal_distribution<double> noise(0.0, 1.0);
    std::bernoulli_distribution drop(cfg.drop_prob);
    for (double& v : out) {
        if (cfg.strong_sigma != 0.0) v += cfg.strong_sigma * noise(rng);
        if (drop(rng)) v = 0.0;
    }
    return out;
}

void export_shards(const std::vector<ClientShard>& shards, std::ostream& out) {
    auto line = [&](std::size_t client, const char* pool, bool copy, std::size_t id, std::size_t label,
                    std::span<const double> features) {
        nlohmann::ordered_json j;
        j["client"] = client;
        j["pool"] = pool;
        j["copy"] = copy;
        j["id"] = id;
        j["label"] = label;
        j["features"] = std::vector<double>(features.begin(), features.end());
        out << j.dump() << '\n';
    };
    for (const ClientShard& shard : shards) {
        for (const Sample& s : shard.labeled) line(shard.client_id, "labeled", false, s.id, s.label, s.features);
        for (const UnlabeledSample& s : shard.unlabeled) {
            line(shard.client_id, "unlabeled", s.is_stripped_copy(), s.id(), s.hidden_label(), s.features());
        }
    }
}

std::vector<ClientShard> import_shards(std::istream& in) {
    std::vector<ClientShard> shards;
    std::string text;
    std::size_t line_no = 0;
    while (std::getline(in, text)) {
        ++line_no;
        if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(text);
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error("import_shards: line " + std::to_string(line_no) + ": " + e.what());
        }
        const auto client = j.at("client").get<std::size_t>();
        if (client >= shards.size()) {
            const std::size_t old = shards.size();
            shards.resize(client + 1);
            for (std::size_t k = old; k < shards.size(); ++k) shards[k].client_id = k;
        }
        Sample s{j.at("id").get<std::size_t>(), j.at("features").get<std::vector<double>>(),
                 j.at("label").get<std::size_t>()};
        const auto pool = j.at("pool").get<std::string>();
        if (pool == "labeled") {
            shards[client].labeled.push_back(std::move(s));
        } else if (pool == "unlabeled") {
            shards[client].unlabeled.emplace_back(s, j.value("copy", false));
        } else {
            throw std::runtime_error("import_shards: line " + std::to_string(line_no) + ": unknown pool '" + pool + "'");
        }
    }
    return shards;
}

}  // namespace fedsage
