#include <doctest.h>

#include <cmath>
#include <random>

#include "fedsage/pseudo.hpp"

using namespace fedsage;

namespace {

const CorrectionConfig kDefault{};

Prediction peaked(std::size_t classes, std::size_t cls, double top) {
    std::vector<double> probs(classes, (1.0 - top) / static_cast<double>(classes - 1));
    probs[cls] = top;
    return Prediction{probs};
}

Prediction random_prediction(std::mt19937_64& rng, std::size_t classes) {
    // Sharpen with a random temperature so confident and diffuse predictions both show up.
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> temp(0.2, 12.0);
    const double t = temp(rng);
    std::vector<double> logits(classes);
    for (double& v : logits) v = t * normal(rng);
    return softmax(logits);
}

bool same_outcome(const PseudoLabelDecision& a, const PseudoLabelDecision& b) {
    return a.kind == b.kind && a.target == b.target && a.lambda == b.lambda;
}

bool is_distribution(const std::vector<double>& t) {
    double sum = 0.0;
    for (double v : t) {
        if (v < 0.0 || v > 1.0) return false;
        sum += v;
    }
    return std::abs(sum - 1.0) <= 1e-12;
}

}  // namespace

TEST_CASE("cpg_assign") {
    SUBCASE("confident local model wins") {
        const auto d = cpg_assign(peaked(4, 2, 0.96), peaked(4, 0, 0.99), kDefault);
        CHECK(d.kind == DecisionKind::LocalHard);
        CHECK(d.target == std::vector<double>{0, 0, 1, 0});
    }
    SUBCASE("falls back to a confident global model") {
        const auto d = cpg_assign(peaked(6, 1, 0.50), peaked(6, 5, 0.97), kDefault);
        CHECK(d.kind == DecisionKind::GlobalHard);
        CHECK(d.target == std::vector<double>{0, 0, 0, 0, 0, 1});
        CHECK_FALSE(d.lambda.has_value());
    }
    SUBCASE("abstains when neither is confident") {
        const auto d = cpg_assign(peaked(3, 0, 0.90), peaked(3, 1, 0.90), kDefault);
        CHECK(d.kind == DecisionKind::Abstain);
        CHECK(d.target.empty());
        CHECK_FALSE(d.has_target());
    }
    SUBCASE("exactly tau does not count as confident") {
        const Prediction at_tau{{0.95, 0.05}};
        CHECK(cpg_assign(at_tau, at_tau, kDefault).kind == DecisionKind::Abstain);
    }
    SUBCASE("class count mismatch is rejected") {
        CHECK_THROWS_AS(cpg_assign(peaked(3, 0, 0.99), peaked(4, 0, 0.99), kDefault), std::invalid_argument);
    }
}

TEST_CASE("confidence_gap") {
    const Prediction p{{0.2, 0.7, 0.1}};
    CHECK(confidence_gap(p, p) == 0.0);
    const Prediction l = peaked(3, 0, 0.99);
    const Prediction g = peaked(3, 1, 0.94);
    CHECK(confidence_gap(l, g) == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(confidence_gap(l, g) == confidence_gap(g, l));
}

TEST_CASE("correction_coefficient") {
    CHECK(correction_coefficient(0.0, 13.86) == 1.0);
    CHECK(correction_coefficient(0.05, 13.86) == doctest::Approx(0.5).epsilon(1e-3));
    CHECK(std::abs(correction_coefficient(0.05, 13.86) - 0.500073595696) < 1e-10);
    CHECK(correction_coefficient(0.7, 0.0) == 1.0);
    CHECK(correction_coefficient(0.12, 1e6) == 0.0);
    CHECK_THROWS_AS(correction_coefficient(-0.1, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(correction_coefficient(0.1, -1.0), std::invalid_argument);
}

TEST_CASE("soft_correct") {
    SUBCASE("agreeing argmaxes give a one-hot for any lambda") {
        for (double lambda : {0.0, 0.3, 1.0}) {
            CHECK(soft_correct(peaked(3, 2, 0.9), peaked(3, 2, 0.6), lambda) == std::vector<double>{0, 0, 1});
        }
    }
    SUBCASE("lambda one keeps the local class") {
        CHECK(soft_correct(peaked(3, 0, 0.9), peaked(3, 1, 0.6), 1.0) == std::vector<double>{1, 0, 0});
    }
    SUBCASE("interpolation arithmetic") {
        const auto t = soft_correct(peaked(10, 1, 0.9), peaked(10, 4, 0.8), 0.7);
        for (std::size_t c = 0; c < 10; ++c) {
            const double want = c == 1 ? 0.7 : (c == 4 ? 0.3 : 0.0);
            CHECK(t[c] == doctest::Approx(want).epsilon(1e-15));
        }
    }
    SUBCASE("lambda outside [0, 1] is rejected") {
        CHECK_THROWS_AS(soft_correct(peaked(3, 0, 0.9), peaked(3, 1, 0.9), 1.2), std::invalid_argument);
        CHECK_THROWS_AS(soft_correct(peaked(3, 0, 0.9), peaked(3, 1, 0.9), -0.1), std::invalid_argument);
    }
}

TEST_CASE("sage_assign") {
    SUBCASE("hand-derived corrected target") {
        const Prediction l{{0.97, 0.02, 0.01}};
        const Prediction g{{0.10, 0.85, 0.05}};
        const auto d = sage_assign(l, g, kDefault);
        REQUIRE(d.kind == DecisionKind::CorrectedSoft);
        REQUIRE(d.lambda.has_value());
        CHECK(std::abs(*d.lambda - 0.189531507839) < 1e-9);
        CHECK(std::abs(d.target[0] - 0.189531507839) < 1e-9);
        CHECK(std::abs(d.target[1] - 0.810468492161) < 1e-9);
        CHECK(d.target[2] == 0.0);
        CHECK(d.target[0] == doctest::Approx(0.1896).epsilon(1e-3));
        CHECK(d.local_confidence == 0.97);
        CHECK(d.global_confidence == 0.85);
        CHECK(d.local_class == 0);
        CHECK(d.global_class == 1);
    }
    SUBCASE("global fallback") {
        const Prediction l{{0.05, 0.90, 0.05}};
        const Prediction g{{0.96, 0.02, 0.02}};
        const auto d = sage_assign(l, g, kDefault);
        CHECK(d.kind == DecisionKind::GlobalHard);
        CHECK(d.target == std::vector<double>{1, 0, 0});
        CHECK_FALSE(d.lambda.has_value());
    }
    SUBCASE("abstain") {
        CHECK(sage_assign(peaked(3, 0, 0.6), peaked(3, 0, 0.7), kDefault).kind == DecisionKind::Abstain);
    }
    SUBCASE("huge kappa moves all mass to the global class") {
        const auto d = sage_assign(Prediction{{0.97, 0.02, 0.01}}, Prediction{{0.10, 0.85, 0.05}},
                                   CorrectionConfig{0.95, 1e6});
        CHECK(d.target[0] < 1e-9);
        CHECK(d.target[2] < 1e-9);
        CHECK(d.target[1] == doctest::Approx(1.0));
    }
    SUBCASE("class count mismatch is rejected") {
        CHECK_THROWS_AS(sage_assign(peaked(3, 0, 0.99), peaked(2, 0, 0.99), kDefault), std::invalid_argument);
    }
}

TEST_CASE("strategy_assign") {
    SUBCASE("LPL thresholds the local model only") {
        const auto d = strategy_assign(PseudoStrategy::LPL, peaked(4, 3, 0.96), peaked(4, 0, 0.2), kDefault);
        CHECK(d.kind == DecisionKind::LocalHard);
        CHECK(d.target == std::vector<double>{0, 0, 0, 1});
        CHECK(strategy_assign(PseudoStrategy::LPL, peaked(4, 3, 0.9), peaked(4, 0, 0.99), kDefault).kind ==
              DecisionKind::Abstain);
    }
    SUBCASE("GPL ignores the local prediction") {
        const Prediction g = peaked(4, 1, 0.97);
        const auto a = strategy_assign(PseudoStrategy::GPL, peaked(4, 3, 0.99), g, kDefault);
        const auto b = strategy_assign(PseudoStrategy::GPL, peaked(4, 0, 0.30), g, kDefault);
        CHECK(same_outcome(a, b));
        CHECK(a.kind == DecisionKind::GlobalHard);
    }
    SUBCASE("CPG and SAGE dispatch") {
        const Prediction l = peaked(3, 0, 0.97), g = peaked(3, 1, 0.85);
        CHECK(same_outcome(strategy_assign(PseudoStrategy::CPG, l, g, kDefault), cpg_assign(l, g, kDefault)));
        CHECK(same_outcome(strategy_assign(PseudoStrategy::SAGE, l, g, kDefault), sage_assign(l, g, kDefault)));
    }
    SUBCASE("names round-trip and unknown names are rejected") {
        for (auto s : {PseudoStrategy::LPL, PseudoStrategy::GPL, PseudoStrategy::CPG, PseudoStrategy::SAGE}) {
            CHECK(parse_pseudo_strategy(to_string(s)) == s);
        }
        CHECK_THROWS_AS(parse_pseudo_strategy("FixMatch"), std::invalid_argument);
    }
}

TEST_CASE("CorrectionConfig validation") {
    CHECK_NOTHROW(kDefault.validate());
    CHECK_THROWS_AS((CorrectionConfig{0.0, 1.0}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((CorrectionConfig{1.0, 1.0}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((CorrectionConfig{0.5, -1.0}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((CorrectionConfig{0.5, std::nan("")}.validate()), std::invalid_argument);
}

TEST_CASE("property: lambda decreases strictly in the gap and in kappa") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> gap(0.0, 0.99), kappa(0.01, 40.0);
    for (int trial = 0; trial < 1000; ++trial) {
        double g1 = gap(rng), g2 = gap(rng);
        if (g1 == g2) continue;
        if (g1 > g2) std::swap(g1, g2);
        const double k = kappa(rng);
        CHECK(correction_coefficient(g1, k) > correction_coefficient(g2, k));

        double k1 = kappa(rng), k2 = kappa(rng);
        if (k1 == k2) continue;
        if (k1 > k2) std::swap(k1, k2);
        const double g = gap(rng) + 1e-3;
        CHECK(correction_coefficient(g, k1) > correction_coefficient(g, k2));
    }
}

TEST_CASE("property: decisions over random prediction pairs") {
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<std::size_t> classes(2, 12);
    std::uniform_real_distribution<double> tau_dist(0.3, 0.99), kappa_dist(0.0, 30.0);
    std::size_t corrected = 0, fallbacks = 0, abstains = 0;

    for (int trial = 0; trial < 5000; ++trial) {
        const std::size_t c = classes(rng);
        const Prediction l = random_prediction(rng, c);
        const Prediction g = random_prediction(rng, c);
        const CorrectionConfig cfg{tau_dist(rng), kappa_dist(rng)};

        for (auto mode : {PseudoStrategy::LPL, PseudoStrategy::GPL, PseudoStrategy::CPG, PseudoStrategy::SAGE}) {
            const auto d = strategy_assign(mode, l, g, cfg);
            if (d.has_target()) {
                CHECK(is_distribution(d.target));
            } else {
                CHECK(d.target.empty());
            }
            if (d.kind == DecisionKind::GlobalHard || d.kind == DecisionKind::LocalHard) {
                CHECK(d.target[d.target_class()] == 1.0);
            }
        }

        const auto sage = sage_assign(l, g, cfg);
        if (sage.kind == DecisionKind::CorrectedSoft) {
            ++corrected;
            REQUIRE(sage.lambda.has_value());
            CHECK(*sage.lambda > 0.0);
            CHECK(*sage.lambda <= 1.0);
            for (std::size_t k = 0; k < c; ++k) {
                if (k != l.argmax() && k != g.argmax()) CHECK(sage.target[k] == 0.0);
            }
            if (l.argmax() == g.argmax()) CHECK(sage.target[l.argmax()] == 1.0);

            // kappa = 0 turns the correction off entirely.
            const auto no_correction = sage_assign(l, g, CorrectionConfig{cfg.tau, 0.0});
            const auto lpl = strategy_assign(PseudoStrategy::LPL, l, g, cfg);
            CHECK(no_correction.target == lpl.target);
            CHECK(*no_correction.lambda == 1.0);
        } else {
            // Local model not confident: all global-aware rules agree.
            const auto cpg = cpg_assign(l, g, cfg);
            const auto gpl = strategy_assign(PseudoStrategy::GPL, l, g, cfg);
            CHECK(same_outcome(sage, cpg));
            CHECK(same_outcome(sage, gpl));
            if (sage.kind == DecisionKind::GlobalHard) ++fallbacks;
            else ++abstains;
        }

        // Raising tau never turns an abstention into a label.
        const CorrectionConfig stricter{std::min(0.999, cfg.tau + 0.5 * (1.0 - cfg.tau)), cfg.kappa};
        for (auto mode : {PseudoStrategy::LPL, PseudoStrategy::GPL, PseudoStrategy::CPG, PseudoStrategy::SAGE}) {
            if (!strategy_assign(mode, l, g, cfg).has_target()) {
                CHECK_FALSE(strategy_assign(mode, l, g, stricter).has_target());
            }
        }
    }
    // The generator must exercise every branch for the checks above to mean anything.
    CHECK(corrected > 500);
    CHECK(fallbacks > 100);
    CHECK(abstains > 100);
}
