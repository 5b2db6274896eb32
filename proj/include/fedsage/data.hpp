#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "fedsage/seed.hpp"

namespace fedsage {

struct TaskSpec {
    std::size_t classes = 10;
    std::size_t input_dim = 16;
    std::size_t samples_per_class = 200;
    double class_separation = 3.0;
    double noise_scale = 1.0;
    /// When set, classes 2k and 2k+1 share a centre and sit this far apart along a random direction.
    /// A confusable pair is told apart mostly by its prior, much like cat and dog images.
    std::optional<double> pair_separation;
};

struct Sample {
    std::size_t id = 0;  // index in the generated dataset
    std::vector<double> features;
    std::size_t label = 0;
};

struct Dataset {
    std::size_t num_classes = 0;
    std::size_t input_dim = 0;
    std::vector<Sample> samples;
};

/// A sample in the unlabeled role. The training path reads `features()` only;
/// the true label stays attached for diagnostics and the fully-labeled baseline.
class UnlabeledSample {
public:
    UnlabeledSample(const Sample& source, bool stripped_copy)
        : id_(source.id), features_(source.features), label_(source.label), stripped_copy_(stripped_copy) {}

    std::size_t id() const noexcept { return id_; }
    std::span<const double> features() const noexcept { return features_; }
    std::size_t hidden_label() const noexcept { return label_; }
    /// True for the label-stripped duplicate of one of the client's own labeled samples.
    bool is_stripped_copy() const noexcept { return stripped_copy_; }

private:
    std::size_t id_;
    std::vector<double> features_;
    std::size_t label_;
    bool stripped_copy_;
};

struct ClientShard {
    std::size_t client_id = 0;
    std::vector<Sample> labeled;
    std::vector<UnlabeledSample> unlabeled;
};

struct PartitionConfig {
    std::size_t num_clients = 20;
    double dirichlet_alpha = 0.5;
    double label_fraction = 0.1;
    std::uint64_t seed = 0;

    void validate() const;
};

struct ClassDistribution {
    std::vector<double> mass;
};

/// Gaussian mixture with one mean per class. Means are fixed by the task seed, so
/// training and held-out sets drawn from the same task share them.
class SyntheticTask {
public:
    SyntheticTask(TaskSpec spec, std::uint64_t seed);

    const TaskSpec& spec() const noexcept { return spec_; }
    const std::vector<std::vector<double>>& means() const noexcept { return means_; }

    /// Exactly `per_class` samples of every class, ordered by class.
    Dataset draw(std::size_t per_class, std::uint64_t stream_seed) const;

private:
    TaskSpec spec_;
    std::vector<std::vector<double>> means_;
};

Dataset generate_synthetic(const TaskSpec& spec, std::uint64_t seed);

/// Balanced held-out set from the same mixture as `generate_synthetic(spec, seed)`.
Dataset generate_test_set(const TaskSpec& spec, std::uint64_t seed, std::size_t per_class);

/// Per-class Dirichlet split of the labeled and unlabeled pools, drawn independently,
/// followed by empty-labeled-shard repair and appending of stripped labeled copies.
std::vector<ClientShard> dirichlet_partition(const Dataset& dataset, const PartitionConfig& cfg);

/// Gamma-normalized draw from Dir(alpha * 1_k).
std::vector<double> sample_dirichlet(double alpha, std::size_t k, Rng& rng);

ClassDistribution class_distribution(std::span<const Sample> pool, std::size_t num_classes);
ClassDistribution class_distribution(std::span<const UnlabeledSample> pool, std::size_t num_classes);

struct AugmentConfig {
    double weak_sigma = 0.05;
    double strong_sigma = 0.2;
    double drop_prob = 0.1;

    /// Defaults scaled to the feature scale.
    static AugmentConfig scaled(double feature_scale);
};

/// Root-mean per-coordinate standard deviation over the dataset.
double feature_scale(const Dataset& dataset);

std::vector<double> weak_augment(std::span<const double> x, const AugmentConfig& cfg, Rng& rng);
std::vector<double> strong_augment(std::span<const double> x, const AugmentConfig& cfg, Rng& rng);

/// One JSON object per line: client, pool, copy, id, label, features.
void export_shards(const std::vector<ClientShard>& shards, std::ostream& out);
std::vector<ClientShard> import_shards(std::istream& in);

}  // namespace fedsage
