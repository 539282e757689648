#pragma once

#include <optional>
#include <queue>
#include <random>
#include <vector>

#include "octopus/stop_policy.hpp"

namespace octopus {

enum class SelectorKind { Greedy, Random, RandomRobin };

/// One-step expected utility gain of a ballot on `b` (phi). Pay is excluded:
/// it is uniform across tasks at any instant, so the argmax is unaffected.
inline double priority(const BeliefState& b, const StopPolicy& policy) {
    return policy.one_step_gain(b);
}

/// Routes each incoming worker to an incomplete ("light") task.
///
/// Greedy keeps phi values in a lazy max-heap: only the task whose belief
/// changed is recomputed, stale heap entries are discarded on pop. Ties break
/// toward the lowest task id. Dark/light status is re-evaluated for the whole
/// batch on every pay change.
class TaskSelector {
  public:
    TaskSelector(SelectorKind kind, const StopPolicy& policy, int n)
        : kind_(kind), policy_(policy), light_(n, false), phi_(n, 0.0), version_(n, 0) {}

    SelectorKind kind() const { return kind_; }

    /// Full refresh; call at start and whenever pay changes.
    void reset(const std::vector<BeliefState>& beliefs, double pay) {
        for (std::size_t q = 0; q < beliefs.size(); ++q) refresh_task(static_cast<int>(q), beliefs[q], pay);
    }

    void on_belief_changed(int q, const BeliefState& b, double pay) { refresh_task(q, b, pay); }

    int light_count() const {
        int c = 0;
        for (bool l : light_) c += l;
        return c;
    }

    bool is_light(int q) const { return light_[q]; }
    double phi(int q) const { return phi_[q]; }

    /// Next task to hand to an incoming worker, or nullopt if every task is dark.
    template <class Rng>
    std::optional<int> next(Rng& rng) {
        switch (kind_) {
            case SelectorKind::Greedy:
                return next_greedy();
            case SelectorKind::Random:
                return next_random(rng);
            case SelectorKind::RandomRobin:
                if (robin_cursor_ < static_cast<int>(light_.size())) {
                    while (robin_cursor_ < static_cast<int>(light_.size())) {
                        int q = robin_cursor_++;
                        if (light_[q]) return q;
                    }
                }
                return next_random(rng);
        }
        return std::nullopt;
    }

  private:
    struct Entry {
        double phi;
        int q;
        long version;
        bool operator<(const Entry& o) const {
            if (phi != o.phi) return phi < o.phi;
            return q > o.q;  // prefer lowest id on ties
        }
    };

    void refresh_task(int q, const BeliefState& b, double pay) {
        light_[q] = policy_.decide(b, pay) == TaskAction::TakeBallot;
        ++version_[q];
        if (light_[q] && kind_ == SelectorKind::Greedy) {
            phi_[q] = priority(b, policy_);
            heap_.push({phi_[q], q, version_[q]});
        }
    }

    std::optional<int> next_greedy() {
        while (!heap_.empty()) {
            Entry top = heap_.top();
            if (top.version != version_[top.q] || !light_[top.q]) {
                heap_.pop();
                continue;
            }
            return top.q;
        }
        return std::nullopt;
    }

    template <class Rng>
    std::optional<int> next_random(Rng& rng) {
        std::vector<int> ids;
        ids.reserve(light_.size());
        for (std::size_t q = 0; q < light_.size(); ++q)
            if (light_[q]) ids.push_back(static_cast<int>(q));
        if (ids.empty()) return std::nullopt;
        std::uniform_int_distribution<std::size_t> u(0, ids.size() - 1);
        return ids[u(rng)];
    }

    SelectorKind kind_;
    const StopPolicy& policy_;
    std::vector<bool> light_;
    std::vector<double> phi_;
    std::vector<long> version_;
    std::priority_queue<Entry> heap_;
    int robin_cursor_ = 0;
};

/// Convenience one-shot selection over a belief snapshot.
template <class Rng>
std::optional<int> select_next(const std::vector<BeliefState>& beliefs, const StopPolicy& policy,
                               SelectorKind kind, double pay, Rng& rng) {
    TaskSelector sel(kind, policy, static_cast<int>(beliefs.size()));
    sel.reset(beliefs, pay);
    return sel.next(rng);
}

}  // namespace octopus
