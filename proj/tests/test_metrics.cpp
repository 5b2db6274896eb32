#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "fedsage/metrics.hpp"

using namespace fedsage;

namespace {

ScoredDecision hard(std::size_t cls, std::size_t truth, std::size_t classes = 4) {
    PseudoLabelDecision d;
    d.kind = DecisionKind::GlobalHard;
    d.target.assign(classes, 0.0);
    d.target[cls] = 1.0;
    return {d, truth};
}

ScoredDecision corrected(std::size_t local_class, double lambda, std::size_t classes = 4) {
    PseudoLabelDecision d;
    d.kind = DecisionKind::CorrectedSoft;
    d.local_class = local_class;
    d.global_class = (local_class + 1) % classes;
    d.lambda = lambda;
    d.target.assign(classes, 0.0);
    d.target[d.local_class] += lambda;
    d.target[d.global_class] += 1.0 - lambda;
    return {d, local_class};
}

}  // namespace

TEST_CASE("pseudo_label_accuracy") {
    SUBCASE("all abstain") {
        const std::vector<ScoredDecision> ds{{PseudoLabelDecision{}, 0}, {PseudoLabelDecision{}, 2}};
        const auto acc = pseudo_label_accuracy(ds);
        CHECK(acc.count == 0);
        CHECK_FALSE(acc.accuracy().has_value());
    }
    SUBCASE("counting example") {
        const std::vector<ScoredDecision> ds{hard(2, 2), hard(2, 1), hard(1, 1), {PseudoLabelDecision{}, 3}};
        const auto acc = pseudo_label_accuracy(ds);
        CHECK(acc.count == 3);
        CHECK(*acc.accuracy() == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    }
    SUBCASE("soft targets are scored by their argmax") {
        const std::vector<ScoredDecision> ds{corrected(0, 0.2), corrected(1, 0.8)};
        CHECK(*pseudo_label_accuracy(ds).accuracy() == 0.5);
    }
    SUBCASE("perfect labeller") {
        std::vector<ScoredDecision> ds;
        for (std::size_t i = 0; i < 40; ++i) ds.push_back(hard(i % 4, i % 4));
        CHECK(*pseudo_label_accuracy(ds).accuracy() == 1.0);
    }
    SUBCASE("property: permutation invariant and bounded") {
        std::mt19937_64 rng(3);
        std::uniform_int_distribution<std::size_t> cls(0, 3);
        for (int trial = 0; trial < 100; ++trial) {
            std::vector<ScoredDecision> ds;
            for (int i = 0; i < 30; ++i) {
                if (cls(rng) == 0) ds.push_back({PseudoLabelDecision{}, cls(rng)});
                else ds.push_back(hard(cls(rng), cls(rng)));
            }
            const auto before = pseudo_label_accuracy(ds);
            std::shuffle(ds.begin(), ds.end(), rng);
            const auto after = pseudo_label_accuracy(ds);
            CHECK(before.count == after.count);
            CHECK(before.correct == after.correct);
            if (auto a = before.accuracy()) CHECK((*a >= 0.0 && *a <= 1.0));
        }
    }
}

TEST_CASE("confidence_entropy") {
    SUBCASE("one bin") {
        const std::vector<double> v{0.96, 0.97, 0.98, 0.99};
        CHECK(*confidence_entropy(v) == 0.0);
    }
    SUBCASE("uniform over ten bins") {
        std::vector<double> v;
        for (int b = 0; b < 10; ++b) v.push_back(0.1 * b + 0.05);
        CHECK(std::abs(*confidence_entropy(v, 10) - std::log(10.0)) < 1e-6);
    }
    SUBCASE("mixed values against a direct histogram") {
        const std::vector<double> v{0.03, 0.07, 0.12, 0.51, 0.52, 0.58, 0.97, 0.99, 1.0, 0.33};
        CHECK(std::abs(*confidence_entropy(v) - 1.8343719702816237) < 1e-12);
    }
    SUBCASE("1.0 lands in the last bin") {
        const std::vector<double> v{0.96, 1.0};
        CHECK(*confidence_entropy(v) == 0.0);
    }
    SUBCASE("empty and invalid input") {
        CHECK_FALSE(confidence_entropy(std::vector<double>{}).has_value());
        CHECK_THROWS_AS(confidence_entropy(std::vector<double>{0.5}, 1), std::invalid_argument);
        CHECK_THROWS_AS(confidence_entropy(std::vector<double>{1.2}), std::invalid_argument);
        CHECK_THROWS_AS(confidence_entropy(std::vector<double>{-0.1}), std::invalid_argument);
    }
    SUBCASE("property: bounded by ln B") {
        std::mt19937_64 rng(8);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        for (std::size_t bins : {2, 5, 20, 50}) {
            for (int trial = 0; trial < 50; ++trial) {
                std::vector<double> v(1 + trial * 7);
                for (double& x : v) x = std::pow(unit(rng), 1.0 + trial % 5);
                const double h = *confidence_entropy(v, bins);
                CHECK(h >= 0.0);
                CHECK(h <= std::log(static_cast<double>(bins)) + 1e-12);
            }
        }
    }
}

TEST_CASE("consensus ranks") {
    const Prediction ref{{0.5, 0.3, 0.2}};
    CHECK(consensus_rank(1, ref) == 2);
    CHECK(consensus_rank(0, ref) == 1);
    CHECK(consensus_rank(2, ref) == 3);
    const Prediction uniform{{0.25, 0.25, 0.25, 0.25}};
    for (std::size_t c = 0; c < 4; ++c) CHECK(consensus_rank(c, uniform) == 1);

    SUBCASE("agreeing argmaxes put all mass at rank one") {
        const Prediction a{{0.1, 0.7, 0.2}}, b{{0.6, 0.3, 0.1}};
        const std::vector<RankPair> pairs{{1, &a}, {0, &b}, {1, &a}};
        CHECK(consensus_rank_histogram(pairs, 3) == std::vector<std::size_t>{3, 0, 0});
    }
    SUBCASE("property: histogram mass equals input size and ranks stay in range") {
        std::mt19937_64 rng(12);
        std::normal_distribution<double> normal(0.0, 2.0);
        for (int trial = 0; trial < 100; ++trial) {
            const std::size_t c = 2 + trial % 9;
            std::vector<Prediction> refs;
            for (int i = 0; i < 25; ++i) {
                std::vector<double> logits(c);
                for (double& v : logits) v = normal(rng);
                refs.push_back(softmax(logits));
            }
            std::vector<RankPair> pairs;
            std::uniform_int_distribution<std::size_t> cls(0, c - 1);
            for (const auto& r : refs) {
                const std::size_t k = cls(rng);
                const std::size_t rank = consensus_rank(k, r);
                CHECK(rank >= 1);
                CHECK(rank <= c);
                pairs.push_back({k, &r});
            }
            const auto hist = consensus_rank_histogram(pairs, c);
            CHECK(hist.size() == c);
            std::size_t total = 0;
            for (std::size_t h : hist) total += h;
            CHECK(total == pairs.size());
        }
    }
}

TEST_CASE("heterogeneity_kl") {
    CHECK(heterogeneity_kl({{0.25, 0.25, 0.25, 0.25}}) == doctest::Approx(0.0));
    std::vector<double> one_hot(10, 0.0);
    one_hot[3] = 1.0;
    CHECK(heterogeneity_kl({one_hot}) == doctest::Approx(std::log(10.0)).epsilon(1e-12));
    CHECK(heterogeneity_kl({{0.5, 0.5, 0.0, 0.0}}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    SUBCASE("property: non-negative, zero only at uniform") {
        std::mt19937_64 rng(4);
        for (int trial = 0; trial < 200; ++trial) {
            const std::size_t c = 2 + trial % 10;
            auto q = sample_dirichlet(0.1 + 0.05 * trial, c, rng);
            const double kl = heterogeneity_kl({q});
            CHECK(kl >= 0.0);
            bool uniform = true;
            for (double v : q) uniform = uniform && std::abs(v - 1.0 / static_cast<double>(c)) < 1e-9;
            if (!uniform) CHECK(kl > 1e-12);
        }
        for (std::size_t c = 2; c < 30; ++c) {
            CHECK(std::abs(heterogeneity_kl({std::vector<double>(c, 1.0 / static_cast<double>(c))})) <= 1e-12);
        }
    }
}

TEST_CASE("lambda_statistics") {
    const ClassDistribution mass{{0.4, 0.3, 0.2, 0.1}};

    SUBCASE("nothing corrected") {
        const std::vector<ScoredDecision> ds{hard(0, 0), {PseudoLabelDecision{}, 1}};
        const auto s = lambda_statistics(ds, mass);
        CHECK_FALSE(s.mean().has_value());
        CHECK_FALSE(s.majority_mean().has_value());
        CHECK_FALSE(s.minority_mean().has_value());
        for (std::size_t c = 0; c < 4; ++c) CHECK_FALSE(s.class_mean(c).has_value());
    }
    SUBCASE("single decision") {
        const std::vector<ScoredDecision> ds{corrected(2, 0.5)};
        CHECK(*lambda_statistics(ds, mass).mean() == 0.5);
    }
    SUBCASE("per-class and majority split against direct averaging") {
        const std::vector<ScoredDecision> ds{corrected(0, 0.9), corrected(0, 0.7), corrected(1, 0.5),
                                             corrected(2, 0.2), corrected(3, 0.1), corrected(3, 0.3),
                                             hard(1, 1)};
        const auto s = lambda_statistics(ds, mass);
        CHECK(*s.mean() == doctest::Approx(0.45).epsilon(1e-14));
        CHECK(*s.class_mean(0) == doctest::Approx(0.8).epsilon(1e-14));
        CHECK(*s.class_mean(1) == doctest::Approx(0.5).epsilon(1e-14));
        CHECK(*s.class_mean(2) == doctest::Approx(0.2).epsilon(1e-14));
        CHECK(*s.class_mean(3) == doctest::Approx(0.2).epsilon(1e-14));
        CHECK(*s.majority_mean() == doctest::Approx(0.7).epsilon(1e-14));
        CHECK(*s.minority_mean() == doctest::Approx(0.2).epsilon(1e-14));

        SUBCASE("merging split halves reproduces the whole") {
            const std::vector<ScoredDecision> a(ds.begin(), ds.begin() + 3), b(ds.begin() + 3, ds.end());
            LambdaStatistics merged = lambda_statistics(a, mass);
            merged.merge(lambda_statistics(b, mass));
            CHECK(*merged.mean() == doctest::Approx(*s.mean()).epsilon(1e-14));
            CHECK(merged.count == s.count);
            CHECK(merged.majority_count == s.majority_count);
            CHECK(*merged.class_mean(3) == doctest::Approx(0.2).epsilon(1e-14));
        }
    }
}

TEST_CASE("test_accuracy") {
    // Linear model that scores class c by feature c.
    const ModelSpec spec{2, {}, 2, Activation::Tanh};
    const ParameterVector params(make_layout(spec), {1.0, 0.0, 0.0, 1.0, 0.0, 0.0});
    Dataset ds{2, 2, {}};
    ds.samples.push_back({0, {2.0, 0.0}, 0});
    ds.samples.push_back({1, {0.0, 2.0}, 1});
    ds.samples.push_back({2, {0.0, 3.0}, 0});
    ds.samples.push_back({3, {1.0, 0.5}, 0});
    CHECK(test_accuracy(params, spec, ds) == 0.75);
}
