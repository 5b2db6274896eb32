#include "fedsage/federation.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <stdexcept>

#include "fedsage/seed.hpp"

namespace fedsage {

Strategy parse_strategy(std::string_view name) {
    if (name == "SupervisedOnly") return Strategy::SupervisedOnly;
    if (name == "SupervisedUpperBound") return Strategy::SupervisedUpperBound;
    if (name == "LPL") return Strategy::LPL;
    if (name == "GPL") return Strategy::GPL;
    if (name == "CPG") return Strategy::CpgOnly;
    if (name == "SAGE") return Strategy::Sage;
    throw std::invalid_argument("unknown strategy '" + std::string(name) + "'");
}

std::string_view to_string(Strategy s) {
    switch (s) {
        case Strategy::SupervisedOnly: return "SupervisedOnly";
        case Strategy::SupervisedUpperBound: return "SupervisedUpperBound";
        case Strategy::LPL: return "LPL";
        case Strategy::GPL: return "GPL";
        case Strategy::CpgOnly: return "CPG";
        case Strategy::Sage: return "SAGE";
    }
    return "SAGE";
}

std::optional<PseudoStrategy> pseudo_rule(Strategy s) {
    switch (s) {
        case Strategy::LPL: return PseudoStrategy::LPL;
        case Strategy::GPL: return PseudoStrategy::GPL;
        case Strategy::CpgOnly: return PseudoStrategy::CPG;
        case Strategy::Sage: return PseudoStrategy::SAGE;
        default: return std::nullopt;
    }
}

PartitionConfig ExperimentConfig::partition() const {
    return PartitionConfig{num_clients, dirichlet_alpha, label_fraction, derive_seed(seed, {stream::kPartition})};
}

std::vector<ConfigIssue> check_config(const ExperimentConfig& cfg) {
    std::vector<ConfigIssue> issues;
    auto fail = [&](std::string path, std::string message) { issues.push_back({std::move(path), std::move(message)}); };

    if (cfg.num_clients < 1) fail("num_clients", "must be >= 1");
    if (cfg.clients_per_round < 1) fail("clients_per_round", "must be >= 1");
    if (cfg.clients_per_round > cfg.num_clients) fail("clients_per_round", "must not exceed num_clients");
    if (cfg.rounds < 1) fail("rounds", "must be >= 1");
    if (cfg.local_epochs < 1) fail("local_epochs", "must be >= 1");
    if (!(cfg.learning_rate > 0.0) || !std::isfinite(cfg.learning_rate)) fail("learning_rate", "must be > 0");
    if (!(cfg.mu_u >= 0.0) || !std::isfinite(cfg.mu_u)) fail("mu_u", "must be >= 0");
    if (!(cfg.correction.tau > 0.0 && cfg.correction.tau < 1.0)) fail("correction.tau", "must lie in (0, 1)");
    if (!(cfg.correction.kappa >= 0.0) || std::isnan(cfg.correction.kappa)) fail("correction.kappa", "must be >= 0");
    if (cfg.batch_size_s < 1) fail("batch_size_s", "must be >= 1");
    if (cfg.batch_size_u < 1) fail("batch_size_u", "must be >= 1");
    if (!(cfg.dirichlet_alpha > 0.0) || !std::isfinite(cfg.dirichlet_alpha)) {
        fail("partition.dirichlet_alpha", "must be > 0");
    }
    if (!(cfg.label_fraction > 0.0 && cfg.label_fraction < 1.0)) {
        fail("partition.label_fraction", "must lie in (0, 1)");
    } else if (cfg.label_fraction > 0.5) {
        fail("partition.label_fraction", "must be <= 0.5 so that labeled pools stay smaller than unlabeled pools");
    }
    if (cfg.task.classes < 2) fail("task.classes", "must be >= 2");
    if (cfg.task.input_dim < 1) fail("task.input_dim", "must be >= 1");
    if (cfg.task.samples_per_class < 1) fail("task.samples_per_class", "must be >= 1");
    if (!(cfg.task.noise_scale >= 0.0) || !std::isfinite(cfg.task.noise_scale)) fail("task.noise_scale", "must be >= 0");
    if (!std::isfinite(cfg.task.class_separation)) fail("task.class_separation", "must be finite");
    if (cfg.task.pair_separation) {
        if (!(*cfg.task.pair_separation >= 0.0) || !std::isfinite(*cfg.task.pair_separation)) {
            fail("task.pair_separation", "must be a finite number >= 0");
        }
        if (!(cfg.task.class_separation > 0.0)) fail("task.class_separation", "must be > 0 when pairs are used");
    }
    if (cfg.test_samples_per_class < 1) fail("test_samples_per_class", "must be >= 1");
    for (std::size_t i = 0; i < cfg.hidden_dims.size(); ++i) {
        if (cfg.hidden_dims[i] < 1) fail("model.hidden_dims[" + std::to_string(i) + "]", "must be >= 1");
    }
    if (cfg.augment) {
        if (!(cfg.augment->weak_sigma >= 0.0)) fail("augment.weak_sigma", "must be >= 0");
        if (!(cfg.augment->strong_sigma >= 0.0)) fail("augment.strong_sigma", "must be >= 0");
        if (!(cfg.augment->drop_prob >= 0.0 && cfg.augment->drop_prob <= 1.0)) {
            fail("augment.drop_prob", "must lie in [0, 1]");
        }
    }
    if (cfg.entropy_bins < 2) fail("diagnostics.entropy_bins", "must be >= 2");
    if (cfg.threads < 1) fail("threads", "must be >= 1");

    if (cfg.task.classes >= 1 && cfg.label_fraction > 0.0 && cfg.label_fraction < 1.0) {
        const auto per_class = static_cast<std::size_t>(
            std::lround(cfg.label_fraction * static_cast<double>(cfg.task.samples_per_class)));
        if (per_class * cfg.task.classes < cfg.num_clients) {
            fail("partition.label_fraction", "yields fewer labeled samples than clients");
        }
    }
    return issues;
}

std::vector<std::size_t> select_clients(std::size_t num_clients, std::size_t count, Rng& rng) {
    if (count > num_clients) throw std::invalid_argument("select_clients: cannot select more clients than exist");
    std::vector<std::size_t> ids(num_clients);
    std::iota(ids.begin(), ids.end(), std::size_t{0});
    for (std::size_t i = 0; i < count; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, num_clients - 1);
        std::swap(ids[i], ids[pick(rng)]);
    }
    ids.resize(count);
    return ids;
}

namespace {

// Endless reshuffled pass over 0..n-1.
class IndexCycler {
public:
    IndexCycler(std::size_t n, Rng& rng) : order_(n), pos_(n), rng_(rng) {
        std::iota(order_.begin(), order_.end(), std::size_t{0});
    }

    std::vector<std::size_t> next(std::size_t count) {
        std::vector<std::size_t> out;
        out.reserve(count);
        while (out.size() < count) {
            if (pos_ == order_.size()) {
                std::shuffle(order_.begin(), order_.end(), rng_);
                pos_ = 0;
            }
            out.push_back(order_[pos_++]);
        }
        return out;
    }

private:
    std::vector<std::size_t> order_;
    std::size_t pos_;
    Rng& rng_;
};

}  // namespace

ClientUpdate client_update(const ParameterVector& global, const ClientShard& shard, const ExperimentConfig& cfg,
                           const ClientContext& ctx) {
    const ModelSpec spec = cfg.model_spec();
    if (!(global.layout() == make_layout(spec))) {
        throw std::invalid_argument("client_update: global parameter layout does not match the model");
    }
    const std::optional<PseudoStrategy> rule = pseudo_rule(cfg.strategy);

    std::vector<LabeledRef> supervised;
    for (const Sample& s : shard.labeled) supervised.push_back({s.features, s.label});
    if (cfg.strategy == Strategy::SupervisedUpperBound) {
        for (const UnlabeledSample& u : shard.unlabeled) {
            if (!u.is_stripped_copy()) supervised.push_back({u.features(), u.hidden_label()});
        }
    }
    if (supervised.empty()) throw std::invalid_argument("client_update: client has no labeled samples");

    const std::size_t n_u = shard.unlabeled.size();
    const std::size_t steps_per_epoch =
        std::max<std::size_t>(1, (n_u + cfg.batch_size_u - 1) / cfg.batch_size_u);

    const std::uint64_t base = derive_seed(ctx.seed, {stream::kClient, ctx.round, shard.client_id});
    Rng labeled_rng(derive_seed(base, {1}));
    Rng unlabeled_rng(derive_seed(base, {2}));
    Rng augment_rng(derive_seed(base, {3}));
    IndexCycler labeled_cycle(supervised.size(), labeled_rng);
    IndexCycler unlabeled_cycle(n_u, unlabeled_rng);

    ClientUpdate result{global, shard.labeled.size(), n_u, {}};
    ClientDiagnostics& diag = result.diagnostics;
    diag.client_id = shard.client_id;
    diag.local_in_global.assign(spec.num_classes, 0);
    diag.global_in_local.assign(spec.num_classes, 0);

    ParameterVector& local = result.params;
    const TrainingProbe* probe = ctx.probe;
    std::vector<LabeledRef> batch_s;
    std::vector<std::vector<double>> strong_views;
    std::vector<std::vector<double>> targets;
    std::vector<SoftTargetRef> batch_u;

    for (std::size_t epoch = 0; epoch < cfg.local_epochs; ++epoch) {
        for (std::size_t step = 0; step < steps_per_epoch; ++step) {
            batch_s.clear();
            for (std::size_t i : labeled_cycle.next(std::min(cfg.batch_size_s, supervised.size()))) {
                batch_s.push_back(supervised[i]);
            }
            LossGrad total = supervised_loss_grad(local, spec, batch_s);
            diag.supervised_loss_sum += total.loss;

            if (rule && n_u > 0) {
                strong_views.clear();
                targets.clear();
                for (std::size_t i : unlabeled_cycle.next(std::min(cfg.batch_size_u, n_u))) {
                    const UnlabeledSample& u = shard.unlabeled[i];
                    const std::vector<double> weak = weak_augment(u.features(), ctx.augment, augment_rng);
                    const Prediction p_local = forward(local, spec, weak);
                    if (probe && probe->on_global_forward) probe->on_global_forward(global);
                    const Prediction p_global = forward(global, spec, weak);
                    if (probe && probe->on_pseudo_assign) probe->on_pseudo_assign();
                    PseudoLabelDecision decision = strategy_assign(*rule, p_local, p_global, cfg.correction);

                    diag.local_confidences.push_back(decision.local_confidence);
                    diag.global_confidences.push_back(decision.global_confidence);
                    if (decision.local_confidence > cfg.correction.tau) {
                        ++diag.local_in_global[consensus_rank(decision.local_class, p_global) - 1];
                    }
                    if (decision.global_confidence > cfg.correction.tau) {
                        ++diag.global_in_local[consensus_rank(decision.global_class, p_local) - 1];
                    }
                    if (cfg.oracle_filter && decision.has_target() && decision.target_class() != u.hidden_label()) {
                        ++diag.filtered;
                        decision.kind = DecisionKind::Abstain;
                        decision.target.clear();
                        decision.lambda.reset();
                    }
                    if (decision.has_target()) {
                        strong_views.push_back(strong_augment(u.features(), ctx.augment, augment_rng));
                        targets.push_back(decision.target);
                    }
                    diag.decisions.push_back({std::move(decision), u.hidden_label()});
                }
                batch_u.clear();
                for (std::size_t j = 0; j < targets.size(); ++j) batch_u.push_back({strong_views[j], targets[j]});
                const LossGrad unsup = unsupervised_loss_grad(local, spec, batch_u);
                diag.unsupervised_loss_sum += unsup.loss;
                axpy(total.grad, cfg.mu_u, unsup.grad);
            }
            local = sgd_step(local, total.grad, cfg.learning_rate);
            ++diag.steps;
        }
    }
    return result;
}

ParameterVector aggregate(std::span<const WeightedParams> updates) {
    if (updates.empty()) throw std::invalid_argument("aggregate: no updates");
    double total = 0.0;
    for (const WeightedParams& u : updates) {
        if (u.params == nullptr) throw std::invalid_argument("aggregate: null parameters");
        if (!u.params->same_layout(*updates.front().params)) throw std::invalid_argument("aggregate: layout mismatch");
        total += static_cast<double>(u.n_labeled + u.n_unlabeled);
    }
    if (!(total > 0.0)) throw std::invalid_argument("aggregate: total sample count is zero");

    // theta_0 + sum_m w_m (theta_m - theta_0): identical inputs come back unchanged.
    const ParameterVector& anchor = *updates.front().params;
    ParameterVector out = anchor;
    auto acc = out.values();
    const auto base = anchor.values();
    for (std::size_t m = 1; m < updates.size(); ++m) {
        const double w = static_cast<double>(updates[m].n_labeled + updates[m].n_unlabeled) / total;
        const auto v = updates[m].params->values();
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += w * (v[i] - base[i]);
    }
    return out;
}

RoundMetrics summarize_round(std::size_t round_index, std::span<const ClientDiagnostics> clients,
                             std::span<const ClientShard> shards, const ExperimentConfig& cfg, double test_acc) {
    const std::size_t num_classes = cfg.task.classes;
    RoundMetrics m;
    m.round = round_index + 1;
    m.test_accuracy = test_acc;
    m.consensus_local_in_global.assign(num_classes, 0);
    m.consensus_global_in_local.assign(num_classes, 0);

    std::vector<double> local_conf, global_conf;
    PseudoLabelAccuracy totals;
    LambdaStatistics lambdas;
    lambdas.class_sum.assign(num_classes, 0.0);
    lambdas.class_count.assign(num_classes, 0);
    double sup_loss = 0.0, unsup_loss = 0.0;
    std::size_t steps = 0;
    const bool semi_supervised = pseudo_rule(cfg.strategy).has_value();

    for (const ClientDiagnostics& d : clients) {
        const PseudoLabelAccuracy acc = pseudo_label_accuracy(d.decisions);
        totals.count += acc.count;
        totals.correct += acc.correct;
        m.per_client.push_back({d.client_id, acc.count, acc.correct, d.steps});
        for (const ScoredDecision& s : d.decisions) {
            switch (s.decision.kind) {
                case DecisionKind::CorrectedSoft:
                case DecisionKind::LocalHard: ++m.local_label_count; break;
                case DecisionKind::GlobalHard: ++m.global_label_count; break;
                case DecisionKind::Abstain: ++m.abstain_count; break;
            }
        }
        m.filtered_count += d.filtered;
        local_conf.insert(local_conf.end(), d.local_confidences.begin(), d.local_confidences.end());
        global_conf.insert(global_conf.end(), d.global_confidences.begin(), d.global_confidences.end());
        for (std::size_t r = 0; r < num_classes && r < d.local_in_global.size(); ++r) {
            m.consensus_local_in_global[r] += d.local_in_global[r];
            m.consensus_global_in_local[r] += d.global_in_local[r];
        }
        const ClientShard& shard = shards[d.client_id];
        if (!shard.unlabeled.empty()) {
            lambdas.merge(lambda_statistics(d.decisions, class_distribution(shard.unlabeled, num_classes)));
        }
        sup_loss += d.supervised_loss_sum;
        unsup_loss += d.unsupervised_loss_sum;
        steps += d.steps;
    }

    m.pseudo_count = totals.count;
    m.pseudo_accuracy = totals.accuracy();
    m.mean_lambda = lambdas.mean();
    m.lambda_majority = lambdas.majority_mean();
    m.lambda_minority = lambdas.minority_mean();
    for (std::size_t c = 0; c < num_classes; ++c) m.lambda_by_class.push_back(lambdas.class_mean(c));
    m.entropy_local = confidence_entropy(local_conf, cfg.entropy_bins);
    m.entropy_global = confidence_entropy(global_conf, cfg.entropy_bins);
    if (steps > 0) {
        m.supervised_loss = sup_loss / static_cast<double>(steps);
        if (semi_supervised) m.unsupervised_loss = unsup_loss / static_cast<double>(steps);
    }
    return m;
}

RoundResult run_round(const RoundState& state, const Environment& env, const ExperimentConfig& cfg) {
    if (env.test_set == nullptr) throw std::invalid_argument("run_round: missing test set");
    if (env.shards.size() != cfg.num_clients) throw std::invalid_argument("run_round: shard count != num_clients");

    Rng selection_rng(derive_seed(cfg.seed, {stream::kSelection, state.round}));
    const std::vector<std::size_t> selected = select_clients(cfg.num_clients, cfg.clients_per_round, selection_rng);

    const ClientContext ctx{state.round, cfg.seed, env.augment, env.probe};
    std::vector<std::optional<ClientUpdate>> updates(selected.size());
    auto work = [&](std::size_t slot) {
        updates[slot].emplace(client_update(state.global_params, env.shards[selected[slot]], cfg, ctx));
    };
    if (cfg.threads <= 1 || selected.size() <= 1) {
        for (std::size_t i = 0; i < selected.size(); ++i) work(i);
    } else {
        const std::size_t workers = std::min(cfg.threads, selected.size());
        std::vector<std::future<void>> jobs;
        for (std::size_t w = 0; w < workers; ++w) {
            jobs.push_back(std::async(std::launch::async, [&, w] {
                for (std::size_t i = w; i < selected.size(); i += workers) work(i);
            }));
        }
        for (auto& job : jobs) job.get();
    }

    std::vector<WeightedParams> weighted;
    std::vector<ClientDiagnostics> diagnostics;
    for (auto& u : updates) {
        weighted.push_back({&u->params, u->n_labeled, u->n_unlabeled});
        diagnostics.push_back(std::move(u->diagnostics));
    }

    RoundResult out{RoundState{state.round + 1, aggregate(weighted), selected}, {}};
    if (!out.state.global_params.all_finite()) {
        throw std::runtime_error("run_round: non-finite parameters after aggregation in round " +
                                 std::to_string(state.round + 1));
    }
    const double acc = test_accuracy(out.state.global_params, cfg.model_spec(), *env.test_set);
    out.metrics = summarize_round(state.round, diagnostics, env.shards, cfg, acc);
    out.metrics.selected_clients = selected;
    return out;
}

ExperimentSetup prepare_experiment(const ExperimentConfig& cfg) {
    Dataset train = generate_synthetic(cfg.task, cfg.seed);
    Dataset test = generate_test_set(cfg.task, cfg.seed, cfg.test_samples_per_class);
    auto shards = dirichlet_partition(train, cfg.partition());
    const AugmentConfig augment = cfg.augment.value_or(AugmentConfig::scaled(feature_scale(train)));
    ParameterVector params = init_params(cfg.model_spec(), derive_seed(cfg.seed, {stream::kInit}));
    return ExperimentSetup{std::move(train), std::move(test), std::move(shards), augment, std::move(params)};
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const TrainingProbe* probe) {
    if (const auto issues = check_config(cfg); !issues.empty()) {
        throw std::invalid_argument("run_experiment: invalid config at " + issues.front().path + ": " +
                                    issues.front().message);
    }
    ExperimentSetup setup = prepare_experiment(cfg);
    const Environment env{setup.shards, &setup.test, setup.augment, probe};
    RoundState state{0, std::move(setup.initial_params), {}};
    ExperimentResult result{{}, state.global_params};
    result.trace.reserve(cfg.rounds);
    for (std::size_t t = 0; t < cfg.rounds; ++t) {
        RoundResult r = run_round(state, env, cfg);
        state = std::move(r.state);
        result.trace.push_back(std::move(r.metrics));
    }
    result.final_params = state.global_params;
    return result;
}

}  // namespace fedsage
