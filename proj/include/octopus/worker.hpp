#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace octopus {

/// Worker error parameter. 0 means error-free; larger values mean noisier workers.
struct WorkerErrorRate {
    double gamma = 1.0;
};

/// Task difficulty in [0,1]. 0 is trivially easy, 1 is impossible.
struct TaskDifficulty {
    double d = 0.5;
};

/// Probability that a worker with error `gamma` answers a task of difficulty `d`
/// correctly: a = 0.5 * (1 + (1-d)^gamma). Always in [0.5, 1].
inline double accuracy(double gamma, double d) {
    if (!(gamma >= 0.0) || !std::isfinite(gamma))
        throw std::invalid_argument("accuracy: gamma must be finite and >= 0, got " +
                                    std::to_string(gamma));
    if (!(d >= 0.0 && d <= 1.0))
        throw std::invalid_argument("accuracy: d must lie in [0,1], got " + std::to_string(d));
    return 0.5 * (1.0 + std::pow(1.0 - d, gamma));
}

inline double accuracy(WorkerErrorRate w, TaskDifficulty t) { return accuracy(w.gamma, t.d); }

/// Draws a ballot: returns `true_answer` with probability accuracy(gamma, d),
/// the flipped label otherwise.
template <class Rng>
int sample_ballot(Rng& rng, double gamma, double d, int true_answer) {
    if (true_answer != 0 && true_answer != 1)
        throw std::invalid_argument("sample_ballot: true_answer must be 0 or 1");
    const double a = accuracy(gamma, d);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    return u(rng) < a ? true_answer : 1 - true_answer;
}

/// Prior over task difficulty, discretized into `bins` equal-width cells with
/// mass placed at cell centers.
struct DifficultyPrior {
    enum class Kind { Uniform, Beta };

    Kind kind = Kind::Uniform;
    double a = 1.0;
    double b = 1.0;
    int bins = 40;

    static DifficultyPrior uniform(int bins = 40) { return DifficultyPrior{Kind::Uniform, 1.0, 1.0, bins}; }
    static DifficultyPrior beta(double a, double b, int bins = 40) {
        return DifficultyPrior{Kind::Beta, a, b, bins};
    }

    void validate() const {
        if (bins < 2) throw std::invalid_argument("DifficultyPrior: need at least 2 bins");
        if (kind == Kind::Beta && (a <= 0.0 || b <= 0.0))
            throw std::invalid_argument("DifficultyPrior: beta parameters must be positive");
    }

    double bin_center(int i) const { return (i + 0.5) / bins; }

    /// Discretized mass per bin; sums to 1 exactly by normalization.
    std::vector<double> masses() const {
        validate();
        std::vector<double> m(bins);
        double total = 0.0;
        for (int i = 0; i < bins; ++i) {
            double x = bin_center(i);
            double w = (kind == Kind::Uniform) ? 1.0
                                               : std::pow(x, a - 1.0) * std::pow(1.0 - x, b - 1.0);
            m[i] = w;
            total += w;
        }
        for (double& v : m) v /= total;
        return m;
    }

    /// Continuous draw from the prior (used for ground-truth difficulty sampling).
    template <class Rng>
    double sample(Rng& rng) const {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        if (kind == Kind::Uniform) return u(rng);
        // Beta(a,b) via two gamma draws.
        std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
        double x = ga(rng), y = gb(rng);
        return x / (x + y);
    }
};

/// Population of workers: error rates drawn from Gamma(shape, scale).
struct WorkerPool {
    double shape = 2.0;
    double scale = 0.5;

    double mean_error() const { return shape * scale; }

    void validate() const {
        if (shape <= 0.0 || scale <= 0.0)
            throw std::invalid_argument("WorkerPool: shape and scale must be positive");
    }

    template <class Rng>
    double sample(Rng& rng) const {
        std::gamma_distribution<double> g(shape, scale);
        return g(rng);
    }
};

}  // namespace octopus
