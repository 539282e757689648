#pragma once

#include <cmath>
#include <cstdint>
#include <mutex>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "octopus/belief.hpp"

namespace octopus {

/// Parameters shared by the per-task stopping policy and the planners built
/// on top of it.
struct QualityConfig {
    double penalty = 200.0;                       // money per wrong answer
    std::vector<double> pay_grid = {1, 2, 3, 4, 5, 6};
    double mean_gamma = 1.0;                      // average worker error
    int lookahead_depth = 6;                      // expectimax horizon
    double prob_threshold = 1e-3;                 // trajectory-tree pruning
    int tree_max_depth = 10;                      // trajectory-tree depth cap

    void validate() const {
        if (!(penalty >= 0.0)) throw std::invalid_argument("QualityConfig: penalty must be >= 0");
        if (pay_grid.empty()) throw std::invalid_argument("QualityConfig: empty pay grid");
        for (std::size_t i = 1; i < pay_grid.size(); ++i)
            if (!(pay_grid[i] > pay_grid[i - 1]))
                throw std::invalid_argument("QualityConfig: pay grid must be strictly increasing");
        if (lookahead_depth < 1) throw std::invalid_argument("QualityConfig: lookahead_depth >= 1");
        if (!(prob_threshold > 0.0 && prob_threshold < 1.0))
            throw std::invalid_argument("QualityConfig: prob_threshold in (0,1)");
        if (tree_max_depth < 1) throw std::invalid_argument("QualityConfig: tree_max_depth >= 1");
    }
};

enum class TaskAction { TakeBallot, MarkComplete };

/// Depth-limited expectimax over future average-worker ballots, deciding
/// between taking one more ballot at the current pay and stopping.
///
/// Values are memoized on beliefs quantized to 1e-3 in (v, mean difficulty),
/// which bounds the cache while leaving the policy essentially unchanged.
/// The cache only ever stores values of the same pure function, so concurrent
/// callers see identical results; a mutex guards the map itself.
class StopPolicy {
  public:
    explicit StopPolicy(QualityConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

    const QualityConfig& config() const { return cfg_; }

    /// Value of the optimal depth-limited continuation from belief b at `pay`.
    double value(const BeliefState& b, double pay) const {
        return value_rec(b, pay, cfg_.lookahead_depth);
    }

    TaskAction decide(const BeliefState& b, double pay) const {
        const double stop = expected_task_utility(b, cfg_.penalty);
        const double take = ballot_value(b, pay, cfg_.lookahead_depth);
        return take > stop + kTieEps ? TaskAction::TakeBallot : TaskAction::MarkComplete;
    }

    /// One-step expected utility gain of a ballot from an average worker,
    /// ignoring pay (the TaskSelector's priority phi). Cached on the same
    /// quantized-belief key as the lookahead values.
    double one_step_gain(const BeliefState& b) const {
        const Key key = make_key(b, 0.0, -1);
        {
            std::lock_guard<std::mutex> lock(mu_);
            auto it = phi_cache_.find(key);
            if (it != phi_cache_.end()) return it->second;
        }
        double g = one_step_gain_uncached(b);
        std::lock_guard<std::mutex> lock(mu_);
        phi_cache_.emplace(key, g);
        return g;
    }

    double one_step_gain_uncached(const BeliefState& b) const {
        const double u_now = expected_task_utility(b, cfg_.penalty);
        double u_next = 0.0;
        for (int o = 0; o < 2; ++o) {
            double p = b.predictive(o, cfg_.mean_gamma);
            if (p <= 0.0) continue;
            u_next += p * expected_task_utility(b.updated(o, cfg_.mean_gamma, 0.0), cfg_.penalty);
        }
        return u_next - u_now;
    }

    std::size_t cache_size() const {
        std::lock_guard<std::mutex> lock(mu_);
        return cache_.size();
    }

  private:
    static constexpr double kTieEps = 1e-12;

    struct Key {
        std::int64_t vq, dq, payq;
        int depth;
        bool operator==(const Key& o) const {
            return vq == o.vq && dq == o.dq && payq == o.payq && depth == o.depth;
        }
    };
    struct KeyHash {
        std::size_t operator()(const Key& k) const {
            std::uint64_t h = 1469598103934665603ull;
            auto mix = [&h](std::uint64_t x) {
                h ^= x;
                h *= 1099511628211ull;
            };
            mix(static_cast<std::uint64_t>(k.vq));
            mix(static_cast<std::uint64_t>(k.dq));
            mix(static_cast<std::uint64_t>(k.payq));
            mix(static_cast<std::uint64_t>(k.depth));
            return static_cast<std::size_t>(h);
        }
    };

    static Key make_key(const BeliefState& b, double pay, int depth) {
        return Key{static_cast<std::int64_t>(std::llround(b.answer_marginal(1) * 1000.0)),
                   static_cast<std::int64_t>(std::llround(b.difficulty_mean() * 1000.0)),
                   static_cast<std::int64_t>(std::llround(pay * 1e6)), depth};
    }

    double value_rec(const BeliefState& b, double pay, int depth) const {
        const double stop = expected_task_utility(b, cfg_.penalty);
        if (depth <= 0) return stop;
        return std::max(stop, ballot_value(b, pay, depth));
    }

    double ballot_value(const BeliefState& b, double pay, int depth) const {
        const Key key = make_key(b, pay, depth);
        {
            std::lock_guard<std::mutex> lock(mu_);
            auto it = cache_.find(key);
            if (it != cache_.end()) return it->second;
        }
        double v = -pay;
        for (int o = 0; o < 2; ++o) {
            double p = b.predictive(o, cfg_.mean_gamma);
            if (p <= 0.0) continue;
            v += p * value_rec(b.updated(o, cfg_.mean_gamma, pay), pay, depth - 1);
        }
        std::lock_guard<std::mutex> lock(mu_);
        cache_.emplace(key, v);
        return v;
    }

    QualityConfig cfg_;
    mutable std::mutex mu_;
    mutable std::unordered_map<Key, double, KeyHash> cache_;
    mutable std::unordered_map<Key, double, KeyHash> phi_cache_;
};

inline TaskAction decide(const BeliefState& b, const StopPolicy& policy, double pay) {
    return policy.decide(b, pay);
}

}  // namespace octopus
