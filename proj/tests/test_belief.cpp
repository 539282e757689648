#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>

#include "octopus/belief.hpp"

using namespace octopus;

TEST_CASE("fresh belief from uniform prior is flat") {
    BeliefState b(DifficultyPrior::uniform(40));
    for (int i = 0; i < 40; ++i)
        for (int a = 0; a < 2; ++a) CHECK(b.weight(i, a) == Catch::Approx(1.0 / 80).margin(1e-12));
    CHECK(b.v() == Catch::Approx(0.5).margin(1e-12));
    CHECK(b.task_quality() == Catch::Approx(0.0).margin(1e-12));
    CHECK(b.ballots_taken() == 0);
    CHECK(b.cost_spent() == 0.0);
}

TEST_CASE("fresh belief difficulty marginal matches the prior") {
    auto prior = DifficultyPrior::beta(2.0, 2.0);
    BeliefState b(prior);
    auto m = prior.masses();
    for (int i = 0; i < prior.bins; ++i)
        CHECK(b.weight(i, 0) + b.weight(i, 1) == Catch::Approx(m[i]).margin(1e-9));
    CHECK(b.v() == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("one ballot from the average worker under a uniform prior gives v=0.75") {
    // E_d[accuracy(1, d)] = 0.75 exactly by symmetry of the uniform bin centers.
    BeliefState b(DifficultyPrior::uniform(40));
    BeliefState u = b.updated(1, 1.0, 1.0);
    CHECK(u.answer_marginal(1) == Catch::Approx(0.75).margin(1e-12));
    CHECK(u.ballots_taken() == 1);
    CHECK(u.cost_spent() == 1.0);
}

TEST_CASE("opposite ballots cancel the answer marginal") {
    BeliefState b(DifficultyPrior::uniform(16));
    BeliefState u = b.updated(1, 1.0, 1.0).updated(0, 1.0, 1.0);
    CHECK(u.answer_marginal(1) == Catch::Approx(0.5).margin(1e-12));
    CHECK(u.ballots_taken() == 2);
}

TEST_CASE("certain beliefs stay certain") {
    BeliefState b = BeliefState::with_confidence(DifficultyPrior::uniform(20), 1.0);
    CHECK(b.v() == Catch::Approx(1.0).margin(1e-12));
    for (int ballot : {0, 1}) {
        BeliefState u = b.updated(ballot, 1.0, 1.0);
        CHECK(u.answer_marginal(1) == Catch::Approx(1.0).margin(1e-12));
    }
}

TEST_CASE("updates preserve normalization") {
    std::mt19937_64 rng(11);
    BeliefState b(DifficultyPrior::beta(2.0, 2.0));
    std::uniform_int_distribution<int> coin(0, 1);
    for (int i = 0; i < 30; ++i) {
        b = b.updated(coin(rng), 1.0, 1.0);
        CHECK(b.normalization() == Catch::Approx(1.0).margin(1e-9));
    }
}

TEST_CASE("updates commute over ballot multisets") {
    BeliefState b(DifficultyPrior::beta(2.0, 2.0, 24));
    std::vector<int> ballots = {1, 1, 0, 1, 0, 1};
    BeliefState fwd = b;
    for (int o : ballots) fwd = fwd.updated(o, 1.0, 1.0);
    std::sort(ballots.begin(), ballots.end());
    do {
        BeliefState alt = b;
        for (int o : ballots) alt = alt.updated(o, 1.0, 1.0);
        for (int i = 0; i < b.bins(); ++i)
            for (int a = 0; a < 2; ++a)
                CHECK(alt.weight(i, a) == Catch::Approx(fwd.weight(i, a)).margin(1e-12));
    } while (std::next_permutation(ballots.begin(), ballots.end()));
}

TEST_CASE("task quality and expected utility arithmetic") {
    auto prior = DifficultyPrior::uniform(10);
    CHECK(BeliefState::with_confidence(prior, 0.5).task_quality() == Catch::Approx(0.0).margin(1e-12));
    CHECK(BeliefState::with_confidence(prior, 1.0).task_quality() == Catch::Approx(1.0).margin(1e-12));
    CHECK(BeliefState::with_confidence(prior, 0.75).task_quality() == Catch::Approx(0.5).margin(1e-12));

    CHECK(expected_task_utility(BeliefState::with_confidence(prior, 1.0), 200.0) ==
          Catch::Approx(0.0).margin(1e-12));
    CHECK(expected_task_utility(BeliefState::with_confidence(prior, 0.5), 200.0) ==
          Catch::Approx(-100.0).margin(1e-12));
    CHECK(expected_task_utility(BeliefState::with_confidence(prior, 0.75), 200.0) ==
          Catch::Approx(-50.0).margin(1e-12));
}

TEST_CASE("predictive probabilities are a distribution") {
    BeliefState b(DifficultyPrior::beta(2.0, 2.0));
    b = b.updated(1, 1.0, 1.0).updated(1, 0.4, 1.0);
    CHECK(b.predictive(0, 1.0) + b.predictive(1, 1.0) == Catch::Approx(1.0).margin(1e-12));
}
