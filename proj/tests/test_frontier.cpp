#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <sstream>

#include "octopus/frontier.hpp"

using namespace octopus;

namespace {

// Monte-Carlo stopping time: simulate decide() to completion with outcomes
// drawn from the belief's own predictive distribution (the tree's model).
double mc_ballots_to_stop(const BeliefState& start, const StopPolicy& policy, double pay, int runs,
                          unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double total = 0.0;
    for (int r = 0; r < runs; ++r) {
        BeliefState b = start;
        int steps = 0;
        while (policy.decide(b, pay) == TaskAction::TakeBallot && steps < 200) {
            int o = u(rng) < b.predictive(1, policy.config().mean_gamma) ? 1 : 0;
            b = b.updated(o, policy.config().mean_gamma, pay);
            ++steps;
        }
        total += steps;
    }
    return total / runs;
}

}  // namespace

TEST_CASE("certain belief needs zero ballots") {
    StopPolicy policy{QualityConfig{}};
    BeliefState b = BeliefState::with_confidence(DifficultyPrior::uniform(40), 1.0);
    CHECK(expected_ballots(b, policy, 1.0) == 0.0);
}

TEST_CASE("a belief stopping after exactly one ballot has theta 1") {
    // With a myopic (depth-1) policy the take/stop boundary is a threshold on
    // the one-step gain, so just below it the parent takes while both children
    // stop. Search for such a belief and check the tree reports theta = 1.
    QualityConfig qc;
    qc.lookahead_depth = 1;
    StopPolicy policy{qc};
    auto prior = DifficultyPrior::beta(2.0, 2.0);
    bool found = false;
    for (double pay : qc.pay_grid) {
        for (double v = 0.5; v <= 0.999 && !found; v += 0.001) {
            BeliefState b = BeliefState::with_confidence(prior, v);
            if (policy.decide(b, pay) != TaskAction::TakeBallot) continue;
            bool both_stop = true;
            for (int o = 0; o < 2; ++o)
                both_stop = both_stop &&
                            policy.decide(b.updated(o, 1.0, pay), pay) == TaskAction::MarkComplete;
            if (!both_stop) continue;
            found = true;
            CHECK(expected_ballots(b, policy, pay) == Catch::Approx(1.0).margin(1e-9));
        }
        if (found) break;
    }
    CHECK(found);
}

TEST_CASE("trajectory tree leaves partition the probability") {
    StopPolicy policy{QualityConfig{}};
    auto prior = DifficultyPrior::beta(2.0, 2.0);
    for (double v : {0.5, 0.6, 0.8}) {
        TrajectoryTree tree = build_trajectory_tree(BeliefState::with_confidence(prior, v), policy, 1.0);
        CHECK(tree.leaf_prob_mass() == Catch::Approx(1.0).margin(1e-6));
        // Children path probabilities sum to the parent's.
        for (const auto& n : tree.nodes)
            if (n.leaf == LeafKind::None)
                CHECK(tree.nodes[n.child[0]].path_prob + tree.nodes[n.child[1]].path_prob ==
                      Catch::Approx(n.path_prob).margin(1e-9));
    }
}

TEST_CASE("expected_ballots is nonnegative and zero iff the policy stops at the root") {
    StopPolicy policy{QualityConfig{}};
    auto prior = DifficultyPrior::beta(2.0, 2.0);
    for (double v = 0.5; v <= 1.0; v += 0.025) {
        BeliefState b = BeliefState::with_confidence(prior, v);
        double theta = expected_ballots(b, policy, 2.0);
        CHECK(theta >= 0.0);
        bool stops = policy.decide(b, 2.0) == TaskAction::MarkComplete;
        CHECK((theta == 0.0) == stops);
    }
}

TEST_CASE("theta matches the Monte-Carlo stopping-time oracle on a fresh belief") {
    // Deep, finely pruned tree so truncation error is negligible against the
    // untruncated Monte-Carlo stopping time.
    QualityConfig qc;
    qc.tree_max_depth = 100;
    qc.prob_threshold = 1e-7;
    StopPolicy policy{qc};
    BeliefState b(DifficultyPrior::uniform(40));
    double tree = expected_ballots(b, policy, 1.0);
    double mc = mc_ballots_to_stop(b, policy, 1.0, 10000, 77);
    REQUIRE(mc > 0.0);
    CHECK(std::abs(tree - mc) / mc < 0.10);
}

TEST_CASE("theta table basics and monotonicity") {
    StopPolicy policy{QualityConfig{}};
    auto prior = DifficultyPrior::beta(2.0, 2.0);
    ThetaTable t = build_theta_table(policy, prior);
    REQUIRE(t.resolution() == 40);
    REQUIRE(t.pay_levels() == 6);
    for (int c = 0; c < t.pay_levels(); ++c) {
        CHECK(t.at(t.resolution(), c) == 0.0);  // nu = 1: certain answer
        // theta is not pointwise monotone in nu (the stopping boundary is
        // jagged), but it is bounded and vanishes at the certain end.
        for (int j = 0; j <= t.resolution(); ++j) {
            CHECK(t.at(j, c) >= 0.0);
            CHECK(t.at(j, c) <= QualityConfig{}.tree_max_depth);
        }
        CHECK(t.at(0, c) >= t.at(t.resolution(), c));
    }
    CHECK_THROWS_AS(build_theta_table(policy, prior, 5), std::invalid_argument);
    CHECK_THROWS_AS(t.query(1.5, 0), std::invalid_argument);
    // Piecewise-constant query convention.
    CHECK(t.query(0.012, 2) == t.at(0, 2));
    CHECK(t.query(1.0, 2) == t.at(40, 2));
}

TEST_CASE("batch theta is the sum of per-task thetas") {
    StopPolicy policy{QualityConfig{}};
    auto prior = DifficultyPrior::beta(2.0, 2.0);
    std::vector<BeliefState> certain(5, BeliefState::with_confidence(prior, 1.0));
    CHECK(batch_theta(certain, policy, 1.0) == 0.0);

    std::vector<BeliefState> batch(7, BeliefState(prior));
    double single = expected_ballots(BeliefState(prior), policy, 1.0);
    CHECK(batch_theta(batch, policy, 1.0) == Catch::Approx(7.0 * single).margin(1e-9));

    ThetaEstimator est(policy);
    CHECK(est.batch_theta(batch, 1.0) == Catch::Approx(7.0 * single).margin(1e-9));
}

TEST_CASE("theta table CSV round trip with version guard") {
    StopPolicy policy{QualityConfig{}};
    ThetaTable t = build_theta_table(policy, DifficultyPrior::beta(2.0, 2.0), 12);
    std::stringstream ss;
    write_theta_table_csv(t, ss);
    ThetaTable u = read_theta_table_csv(ss);
    REQUIRE(u.resolution() == t.resolution());
    REQUIRE(u.pay_levels() == t.pay_levels());
    for (int j = 0; j <= t.resolution(); ++j)
        for (int c = 0; c < t.pay_levels(); ++c)
            CHECK(u.at(j, c) == Catch::Approx(t.at(j, c)).margin(1e-12));

    std::stringstream bad("nu,pay_level,theta\n0,0,1\n");
    CHECK_THROWS(read_theta_table_csv(bad));
}
