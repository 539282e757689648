#pragma once

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "octopus/worker.hpp"

namespace octopus {

/// Joint belief over (difficulty bin, true answer) for one binary task.
///
/// weights are stored row-major: w[2*bin + answer]. They are kept normalized;
/// updates return new values rather than mutating in place.
class BeliefState {
  public:
    BeliefState() = default;

    /// Product of the difficulty prior with a symmetric 0.5/0.5 answer prior.
    explicit BeliefState(const DifficultyPrior& prior) : bins_(prior.bins) {
        auto m = prior.masses();
        w_.resize(2 * bins_);
        for (int i = 0; i < bins_; ++i) {
            w_[2 * i + 0] = 0.5 * m[i];
            w_[2 * i + 1] = 0.5 * m[i];
        }
        centers_.resize(bins_);
        for (int i = 0; i < bins_; ++i) centers_[i] = prior.bin_center(i);
    }

    /// Belief with the given confidence v in answer 1 and difficulty marginal
    /// equal to the prior. Used for theta-table construction.
    static BeliefState with_confidence(const DifficultyPrior& prior, double v) {
        if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("with_confidence: v out of [0,1]");
        BeliefState b(prior);
        auto m = prior.masses();
        for (int i = 0; i < b.bins_; ++i) {
            b.w_[2 * i + 0] = (1.0 - v) * m[i];
            b.w_[2 * i + 1] = v * m[i];
        }
        return b;
    }

    int bins() const { return bins_; }
    const std::vector<double>& weights() const { return w_; }
    double weight(int bin, int answer) const { return w_[2 * bin + answer]; }
    double center(int bin) const { return centers_[bin]; }
    int ballots_taken() const { return ballots_; }
    double cost_spent() const { return cost_; }

    double answer_marginal(int answer) const {
        double s = 0.0;
        for (int i = 0; i < bins_; ++i) s += w_[2 * i + answer];
        return s;
    }

    /// Confidence in the most probable answer; in [0.5, 1].
    double v() const {
        double v1 = answer_marginal(1);
        return std::max(v1, 1.0 - v1);
    }

    /// Normalized task quality nu = 2v - 1, in [0, 1].
    double task_quality() const { return 2.0 * v() - 1.0; }

    double difficulty_mean() const {
        double s = 0.0;
        for (int i = 0; i < bins_; ++i) s += centers_[i] * (w_[2 * i] + w_[2 * i + 1]);
        return s;
    }

    /// Predictive probability that the next ballot reads `label`, for a worker
    /// with error rate `gamma`, marginalized over the current belief.
    double predictive(int label, double gamma) const {
        double p = 0.0;
        for (int i = 0; i < bins_; ++i) {
            double a = accuracy(gamma, centers_[i]);
            p += w_[2 * i + label] * a + w_[2 * i + (1 - label)] * (1.0 - a);
        }
        return p;
    }

    /// Bayesian update on observing `ballot` from a worker with error `gamma`,
    /// paid `pay`. Throws if the total likelihood degenerates to zero.
    BeliefState updated(int ballot, double gamma, double pay) const {
        if (ballot != 0 && ballot != 1) throw std::invalid_argument("updated: ballot must be 0 or 1");
        BeliefState out = *this;
        double total = 0.0;
        for (int i = 0; i < bins_; ++i) {
            double a = accuracy(gamma, centers_[i]);
            out.w_[2 * i + ballot] = w_[2 * i + ballot] * a;
            out.w_[2 * i + (1 - ballot)] = w_[2 * i + (1 - ballot)] * (1.0 - a);
            total += out.w_[2 * i] + out.w_[2 * i + 1];
        }
        if (!(total > 1e-300))
            throw std::runtime_error("BeliefState::updated: degenerate posterior (zero likelihood)");
        for (double& x : out.w_) x /= total;
        out.ballots_ = ballots_ + 1;
        out.cost_ = cost_ + pay;
        return out;
    }

    double normalization() const { return std::accumulate(w_.begin(), w_.end(), 0.0); }

  private:
    int bins_ = 0;
    std::vector<double> w_;
    std::vector<double> centers_;
    int ballots_ = 0;
    double cost_ = 0.0;
};

inline BeliefState init_belief(const DifficultyPrior& prior) { return BeliefState(prior); }

inline BeliefState update_belief(const BeliefState& b, int ballot, double gamma, double pay) {
    return b.updated(ballot, gamma, pay);
}

inline double task_quality(const BeliefState& b) { return b.task_quality(); }

/// Expected utility of submitting now: -P * (1 - v). Cost is accounted separately.
inline double expected_task_utility(const BeliefState& b, double penalty) {
    return -penalty * (1.0 - b.v());
}

}  // namespace octopus
