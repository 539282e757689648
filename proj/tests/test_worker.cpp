#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <sstream>

#include "octopus/trace.hpp"
#include "octopus/worker.hpp"

using namespace octopus;

TEST_CASE("accuracy matches closed form") {
    CHECK(accuracy(0.0, 0.7) == 1.0);              // error-free worker
    CHECK(accuracy(2.0, 1.0) == 0.5);              // impossible task
    CHECK(accuracy(1.0, 0.5) == Catch::Approx(0.75).margin(1e-15));
}

TEST_CASE("accuracy rejects domain violations") {
    CHECK_THROWS_AS(accuracy(-0.1, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(accuracy(1.0, -0.01), std::invalid_argument);
    CHECK_THROWS_AS(accuracy(1.0, 1.01), std::invalid_argument);
    CHECK_THROWS_AS(accuracy(std::numeric_limits<double>::infinity(), 0.5), std::invalid_argument);
}

TEST_CASE("accuracy range and monotonicity on a 20x20 grid") {
    for (int gi = 0; gi < 20; ++gi) {
        double gamma = 0.25 * (gi + 1);
        double prev = 2.0;
        for (int di = 0; di < 20; ++di) {
            double d = di / 19.0;
            double a = accuracy(gamma, d);
            CHECK(a >= 0.5);
            CHECK(a <= 1.0);
            CHECK(a <= prev + 1e-15);  // nonincreasing in d for gamma > 0
            prev = a;
        }
    }
    for (int di = 1; di < 19; ++di) {  // d in (0,1)
        double d = di / 19.0;
        double prev = 2.0;
        for (int gi = 0; gi < 20; ++gi) {
            double a = accuracy(0.25 * gi, d);
            CHECK(a <= prev + 1e-15);  // nonincreasing in gamma
            prev = a;
        }
    }
}

TEST_CASE("sample_ballot is deterministic for an error-free worker") {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 1000; ++i) CHECK(sample_ballot(rng, 0.0, 0.3, 1) == 1);
}

TEST_CASE("sample_ballot empirical frequency matches accuracy") {
    struct Case {
        double gamma, d;
        int truth;
    } cases[] = {{2.0, 1.0, 0}, {1.0, 0.5, 1}, {0.7, 0.2, 1}, {3.0, 0.8, 0}};
    std::mt19937_64 rng(42);
    const int N = 100000;
    for (const auto& c : cases) {
        long match = 0;
        for (int i = 0; i < N; ++i) match += sample_ballot(rng, c.gamma, c.d, c.truth) == c.truth;
        double a = accuracy(c.gamma, c.d);
        double sigma = std::sqrt(a * (1.0 - a) / N);
        // 3-sigma binomial band, with a floor for the degenerate a=0.5 case's spec band (1e-2)
        CHECK(std::abs(static_cast<double>(match) / N - a) <= std::max(3.0 * sigma, 1e-10) + 0.0);
        CHECK(std::abs(static_cast<double>(match) / N - a) <= 0.01);
    }
}

TEST_CASE("difficulty prior masses sum to one") {
    for (const auto& prior : {DifficultyPrior::uniform(), DifficultyPrior::beta(2.0, 2.0),
                              DifficultyPrior::beta(0.5, 3.0, 17)}) {
        auto m = prior.masses();
        double s = 0.0;
        for (double x : m) s += x;
        CHECK(s == Catch::Approx(1.0).margin(1e-9));
        CHECK(static_cast<int>(m.size()) == prior.bins);
    }
    CHECK_THROWS_AS(DifficultyPrior::beta(-1.0, 2.0).masses(), std::invalid_argument);
}

TEST_CASE("worker pool mean error is shape times scale") {
    WorkerPool pool{2.0, 0.5};
    CHECK(pool.mean_error() == Catch::Approx(1.0).margin(1e-9));
    std::mt19937_64 rng(3);
    double s = 0.0;
    const int N = 200000;
    for (int i = 0; i < N; ++i) s += pool.sample(rng);
    CHECK(s / N == Catch::Approx(1.0).margin(0.01));
}

TEST_CASE("ballot trace validates ordering and labels") {
    BallotTrace t;
    t.events = {{10, 0, 0, 1, 0}, {5, 1, 1, 0, 0}};
    CHECK_THROWS_AS(t.validate(), std::invalid_argument);
    t.sort();
    CHECK_NOTHROW(t.validate());
    t.events.push_back({20, 2, 2, 7, 0});
    CHECK_THROWS_AS(t.validate(), std::invalid_argument);
    t.events.back().label = 1;
    t.events.back().pay_level = 9;
    CHECK_THROWS_AS(t.validate(6), std::invalid_argument);
}

TEST_CASE("trace CSV round trip") {
    BallotTrace t;
    t.events = {{0, 3, 11, 1, 2}, {4, 0, 12, 0, 2}, {4, 1, 9, 1, 3}};
    std::stringstream ss;
    write_trace_csv(t, ss);
    CHECK(ss.str().rfind("timestamp_sec,task_id,worker_id,label,pay_level\n", 0) == 0);
    BallotTrace u = read_trace_csv(ss);
    REQUIRE(u.events.size() == t.events.size());
    for (std::size_t i = 0; i < t.events.size(); ++i) {
        CHECK(u.events[i].timestamp_sec == t.events[i].timestamp_sec);
        CHECK(u.events[i].task_id == t.events[i].task_id);
        CHECK(u.events[i].worker_id == t.events[i].worker_id);
        CHECK(u.events[i].label == t.events[i].label);
        CHECK(u.events[i].pay_level == t.events[i].pay_level);
    }
}

TEST_CASE("trace CSV parse errors report line numbers") {
    std::stringstream ss("timestamp_sec,task_id,worker_id,label,pay_level\n1,2,3,1,0\nbad,line\n");
    try {
        read_trace_csv(ss);
        FAIL("expected parse error");
    } catch (const std::exception& e) {
        CHECK(std::string(e.what()).find("3") != std::string::npos);
    }
}
