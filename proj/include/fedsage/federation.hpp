#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedsage/data.hpp"
#include "fedsage/metrics.hpp"
#include "fedsage/model.hpp"
#include "fedsage/pseudo.hpp"

namespace fedsage {

enum class Strategy {
    SupervisedOnly,        // FedAvg on the labeled pools
    SupervisedUpperBound,  // FedAvg with every label revealed
    LPL,
    GPL,
    CpgOnly,
    Sage,
};

Strategy parse_strategy(std::string_view name);
std::string_view to_string(Strategy s);
/// Pseudo-labeling rule for the semi-supervised strategies; empty for the supervised ones.
std::optional<PseudoStrategy> pseudo_rule(Strategy s);

struct ExperimentConfig {
    std::size_t num_clients = 20;
    std::size_t clients_per_round = 8;
    std::size_t rounds = 100;
    std::size_t local_epochs = 5;
    double learning_rate = 0.1;
    double mu_u = 1.0;
    CorrectionConfig correction;
    Strategy strategy = Strategy::Sage;
    std::size_t batch_size_s = 16;
    std::size_t batch_size_u = 64;
    double dirichlet_alpha = 0.5;
    double label_fraction = 0.1;
    TaskSpec task;
    std::size_t test_samples_per_class = 100;
    std::vector<std::size_t> hidden_dims{32};
    Activation activation = Activation::Tanh;
    /// Absent: scaled from the training features.
    std::optional<AugmentConfig> augment;
    /// Drops pseudo-labels whose target argmax disagrees with the hidden label.
    bool oracle_filter = false;
    std::size_t entropy_bins = kEntropyBins;
    /// Client updates run on up to this many threads; results do not depend on it.
    std::size_t threads = 1;
    std::uint64_t seed = 0;

    /// Input width and class count follow the task.
    ModelSpec model_spec() const { return ModelSpec{task.input_dim, hidden_dims, task.classes, activation}; }
    PartitionConfig partition() const;
};

struct ConfigIssue {
    std::string path;
    std::string message;
};

/// Empty when the config satisfies every invariant.
std::vector<ConfigIssue> check_config(const ExperimentConfig& cfg);

/// M distinct ids drawn uniformly without replacement from 0..K-1, returned in draw order.
std::vector<std::size_t> select_clients(std::size_t num_clients, std::size_t count, Rng& rng);

/// Optional instrumentation of the training path.
struct TrainingProbe {
    /// Called with the parameters used for every global-model prediction.
    std::function<void(const ParameterVector&)> on_global_forward;
    /// Called once per pseudo-label assignment.
    std::function<void()> on_pseudo_assign;
};

struct ClientContext {
    std::size_t round = 0;
    std::uint64_t seed = 0;
    AugmentConfig augment;
    const TrainingProbe* probe = nullptr;
};

/// Everything a client observed about its pseudo-labels during one update.
struct ClientDiagnostics {
    std::size_t client_id = 0;
    std::size_t steps = 0;
    std::vector<ScoredDecision> decisions;
    std::vector<double> local_confidences;
    std::vector<double> global_confidences;
    std::vector<std::size_t> local_in_global;  // rank histogram
    std::vector<std::size_t> global_in_local;
    std::size_t filtered = 0;
    double supervised_loss_sum = 0.0;
    double unsupervised_loss_sum = 0.0;
};

struct ClientUpdate {
    ParameterVector params;
    std::size_t n_labeled = 0;
    std::size_t n_unlabeled = 0;
    ClientDiagnostics diagnostics;
};

/// Local training from the global parameters: E epochs of ceil(N^u / batch_size_u) steps, each step an
/// SGD update on L_s + mu_u * L_u. Global-model predictions always use `global`.
ClientUpdate client_update(const ParameterVector& global, const ClientShard& shard, const ExperimentConfig& cfg,
                           const ClientContext& ctx);

struct WeightedParams {
    const ParameterVector* params = nullptr;
    std::size_t n_labeled = 0;
    std::size_t n_unlabeled = 0;
};

/// Size-weighted average with weights (n_s + n_u) / sum(n_s + n_u).
ParameterVector aggregate(std::span<const WeightedParams> updates);

struct ClientSummary {
    std::size_t client_id = 0;
    std::size_t pseudo_count = 0;
    std::size_t pseudo_correct = 0;
    std::size_t steps = 0;
};

struct RoundMetrics {
    std::size_t round = 0;  // 1-based
    double test_accuracy = 0.0;
    std::size_t pseudo_count = 0;
    std::optional<double> pseudo_accuracy;
    std::size_t local_label_count = 0;   // LocalHard + CorrectedSoft
    std::size_t global_label_count = 0;  // GlobalHard
    std::size_t abstain_count = 0;
    std::size_t filtered_count = 0;
    std::optional<double> mean_lambda;
    std::optional<double> lambda_majority;
    std::optional<double> lambda_minority;
    std::vector<std::optional<double>> lambda_by_class;
    std::optional<double> entropy_local;
    std::optional<double> entropy_global;
    std::vector<std::size_t> consensus_local_in_global;
    std::vector<std::size_t> consensus_global_in_local;
    std::optional<double> supervised_loss;
    std::optional<double> unsupervised_loss;
    std::vector<std::size_t> selected_clients;
    std::vector<ClientSummary> per_client;
};

struct RoundState {
    std::size_t round = 0;  // index of the next round to run
    ParameterVector global_params;
    std::vector<std::size_t> selected_clients;
};

struct Environment {
    std::span<const ClientShard> shards;
    const Dataset* test_set = nullptr;
    AugmentConfig augment;
    const TrainingProbe* probe = nullptr;
};

/// Combines client diagnostics with the evaluated global model into one round record.
RoundMetrics summarize_round(std::size_t round_index, std::span<const ClientDiagnostics> clients,
                             std::span<const ClientShard> shards, const ExperimentConfig& cfg, double test_acc);

struct RoundResult {
    RoundState state;
    RoundMetrics metrics;
};

RoundResult run_round(const RoundState& state, const Environment& env, const ExperimentConfig& cfg);

/// Data, shards and initial parameters derived from the config seed.
struct ExperimentSetup {
    Dataset train;
    Dataset test;
    std::vector<ClientShard> shards;
    AugmentConfig augment;
    ParameterVector initial_params;
};

ExperimentSetup prepare_experiment(const ExperimentConfig& cfg);

struct ExperimentResult {
    std::vector<RoundMetrics> trace;
    ParameterVector final_params;
};

/// Throws std::invalid_argument if check_config reports issues.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const TrainingProbe* probe = nullptr);

}  // namespace fedsage
