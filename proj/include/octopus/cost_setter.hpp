#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "octopus/beta_fit.hpp"
#include "octopus/frontier.hpp"
#include "octopus/selector.hpp"
#include "octopus/stop_policy.hpp"

namespace octopus {

/// Discretization of the aggregate state (nu_bar, theta, tau, c).
struct CostGrids {
    int nu_levels = 101;        // nu_bar in {0, 1/100, ..., 1}
    double delta_theta = 10.0;  // theta bucket width
    int theta_levels = 0;       // theta in {0, delta_theta, ..., (levels-1)*delta_theta}
    double delta_tau_min = 15.0;
    double tau_max_min = 360.0;
    int pay_levels = 6;

    int epochs() const { return static_cast<int>(std::llround(tau_max_min / delta_tau_min)); }

    double nu_value(int i) const { return static_cast<double>(i) / (nu_levels - 1); }
    int nu_index(double nu) const {
        return std::clamp(static_cast<int>(std::llround(nu * (nu_levels - 1))), 0, nu_levels - 1);
    }
    double theta_value(int j) const { return j * delta_theta; }
    int theta_index(double theta) const {
        return std::clamp(static_cast<int>(std::llround(theta / delta_theta)), 0, theta_levels - 1);
    }

    void validate() const {
        if (nu_levels < 2 || theta_levels < 1 || pay_levels < 1)
            throw std::invalid_argument("CostGrids: bad grid dimensions");
        if (!(delta_theta > 0.0) || !(delta_tau_min > 0.0) || !(tau_max_min >= delta_tau_min))
            throw std::invalid_argument("CostGrids: bad granularities");
    }
};

/// The aggregate 4-tuple in grid coordinates.
struct AggregateState {
    int nu_idx = 0;
    int theta_idx = 0;
    int tau_idx = 0;
    int pay_idx = 0;
};

enum class PayAction : std::int8_t { Up = 0, Down = 1, NoChange = 2, Terminate = 3 };

inline const char* pay_action_name(PayAction a) {
    switch (a) {
        case PayAction::Up: return "up";
        case PayAction::Down: return "down";
        case PayAction::NoChange: return "no_change";
        case PayAction::Terminate: return "terminate";
    }
    return "?";
}

/// Pay-dependent Poisson ballot-completion model, truncated where the tail
/// mass falls below `truncation` and renormalized, then grouped into
/// delta_theta-wide buckets to match the theta grid arithmetic.
class CompletionModel {
  public:
    struct Bucket {
        double prob = 0.0;
        double mean_nb = 0.0;  // exact conditional mean; used in expected-value backups
        int theta_shift = 0;   // grid-bucket index; rounded n_b = theta_shift * delta_theta
    };

    CompletionModel() = default;
    CompletionModel(std::vector<double> rates_per_epoch, double delta_theta,
                    double truncation = 1e-4)
        : rates_(std::move(rates_per_epoch)), truncation_(truncation) {
        for (double r : rates_)
            if (!(r > 0.0)) throw std::invalid_argument("CompletionModel: rates must be > 0");
        buckets_.resize(rates_.size());
        for (std::size_t c = 0; c < rates_.size(); ++c)
            buckets_[c] = bucketize(rates_[c], delta_theta, truncation_);
    }

    const std::vector<double>& rates() const { return rates_; }
    const std::vector<Bucket>& buckets(int pay_idx) const { return buckets_.at(pay_idx); }

    int max_bucket() const {
        int m = 0;
        for (const auto& bs : buckets_)
            for (const auto& b : bs) m = std::max(m, b.theta_shift);
        return m;
    }

  private:
    static std::vector<Bucket> bucketize(double rate, double delta_theta, double truncation) {
        // Poisson pmf by forward recurrence until the remaining tail < truncation.
        std::vector<double> pmf;
        double p = std::exp(-rate);
        double cdf = 0.0;
        int k = 0;
        while (true) {
            pmf.push_back(p);
            cdf += p;
            if (1.0 - cdf < truncation && k > rate) break;
            ++k;
            p *= rate / k;
            if (k > 10 * rate + 1000) break;
        }
        std::vector<Bucket> out;
        for (int i = 0; i < static_cast<int>(pmf.size()); ++i) {
            int bucket = static_cast<int>(std::llround(i / delta_theta));
            if (bucket >= static_cast<int>(out.size())) out.resize(bucket + 1);
            out[bucket].prob += pmf[i];
            out[bucket].mean_nb += i * pmf[i];
            out[bucket].theta_shift = bucket;
        }
        double total = 0.0;
        for (auto& b : out) total += b.prob;
        std::erase_if(out, [](const Bucket& b) { return b.prob <= 0.0; });
        for (auto& b : out) {
            b.mean_nb /= b.prob;
            b.prob /= total;
        }
        return out;
    }

    std::vector<double> rates_;
    double truncation_ = 1e-4;
    std::vector<std::vector<Bucket>> buckets_;
};

/// Cached empirical distributions (nu_bar, n_b bucket) -> nu_bar'. The nu_bar
/// transition depends on the ballot count but not on theta, tau or c, so one
/// table serves every state.
class NuTransitionCache {
  public:
    using Row = std::vector<std::pair<int, double>>;  // (nu' index, probability)

    NuTransitionCache() = default;
    NuTransitionCache(int nu_levels, int buckets) : nu_levels_(nu_levels), rows_(nu_levels * buckets) {}

    int nu_levels() const { return nu_levels_; }
    int buckets() const { return nu_levels_ ? static_cast<int>(rows_.size()) / nu_levels_ : 0; }

    const Row& row(int nu_idx, int bucket) const { return rows_.at(index(nu_idx, bucket)); }
    void set_row(int nu_idx, int bucket, Row r) { rows_.at(index(nu_idx, bucket)) = std::move(r); }

    double expected_nu_index(int nu_idx, int bucket) const {
        double e = 0.0;
        for (const auto& [i, p] : row(nu_idx, bucket)) e += i * p;
        return e;
    }

  private:
    std::size_t index(int nu_idx, int bucket) const {
        return static_cast<std::size_t>(nu_idx) * buckets() + bucket;
    }
    int nu_levels_ = 0;
    std::vector<Row> rows_;
};

struct NuRolloutOptions {
    // Beta concentration used when reconstructing a batch from nu_bar alone.
    // Greedy routing keeps real batches tight around their mean, so a fairly
    // concentrated shape tracks the aggregate response best.
    double lambda_recon = 8.0;
    int hist_bins = 100;
    int repeats = 32;
    std::uint64_t seed = 0x0c70b05;
};

/// One rollout of the reconstructed batch: instantiate n beliefs from the
/// histogram, route n_b average-worker ballots greedily, return the new nu_bar.
template <class Rng>
double simulate_reconstructed_batch(const BatchHistogram& hist, const DifficultyPrior& prior,
                                    const StopPolicy& policy, double pay, long n_b, Rng& rng) {
    std::vector<BeliefState> beliefs;
    beliefs.reserve(hist.total());
    for (int i = 0; i < hist.bins(); ++i) {
        if (hist.counts[i] == 0) continue;
        double v = 0.5 * (hist.bin_center(i) + 1.0);
        BeliefState proto = BeliefState::with_confidence(prior, v);
        for (long k = 0; k < hist.counts[i]; ++k) beliefs.push_back(proto);
    }
    if (beliefs.empty()) return 0.0;

    TaskSelector sel(SelectorKind::Greedy, policy, static_cast<int>(beliefs.size()));
    sel.reset(beliefs, pay);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (long b = 0; b < n_b; ++b) {
        auto q = sel.next(rng);
        if (!q) break;
        const double p1 = beliefs[*q].predictive(1, policy.config().mean_gamma);
        int outcome = u(rng) < p1 ? 1 : 0;
        beliefs[*q] = beliefs[*q].updated(outcome, policy.config().mean_gamma, pay);
        sel.on_belief_changed(*q, beliefs[*q], pay);
    }
    double s = 0.0;
    for (const auto& b : beliefs) s += b.task_quality();
    return s / beliefs.size();
}

/// Expected nu_bar after n_b greedily routed average-worker ballots on a batch
/// beta-reconstructed from nu_bar, averaged over seeded repeats.
inline double estimate_nu_transition(double nu_bar, long n_b, const DifficultyPrior& prior,
                                     const StopPolicy& policy, double pay, int n,
                                     const NuRolloutOptions& opts = {}) {
    if (n_b == 0) return nu_bar;                  // no updates, exact
    if (nu_bar >= 1.0 - 1e-12) return 1.0;        // all tasks certain, none selected
    BetaFit fit;
    fit.lambda = opts.lambda_recon;
    fit.nu_bar = std::clamp(nu_bar, 1.0 / (2.0 * n), 1.0 - 1.0 / (2.0 * n));
    BatchHistogram hist = reconstruct_histogram(fit, n, opts.hist_bins);
    double sum = 0.0;
    for (int rep = 0; rep < opts.repeats; ++rep) {
        std::mt19937_64 rng(opts.seed + 0x9e3779b97f4a7c15ull * (rep + 1));
        sum += simulate_reconstructed_batch(hist, prior, policy, pay, n_b, rng);
    }
    return sum / opts.repeats;
}

/// Builds the full (nu_bar, bucket) -> nu_bar' table. Rollout randomness is
/// collapsed into the empirical distribution over the R seeded repeats.
inline NuTransitionCache build_nu_cache(const CostGrids& grids, int max_bucket,
                                        const DifficultyPrior& prior, const StopPolicy& policy,
                                        double pay, int n, const NuRolloutOptions& opts = {}) {
    NuTransitionCache cache(grids.nu_levels, max_bucket + 1);
    for (int i = 0; i < grids.nu_levels; ++i) {
        const double nu = grids.nu_value(i);
        for (int b = 0; b <= max_bucket; ++b) {
            NuTransitionCache::Row row;
            const long nb = std::lround(b * grids.delta_theta);
            if (nb == 0 || i == grids.nu_levels - 1) {
                row.push_back({i, 1.0});
                cache.set_row(i, b, std::move(row));
                continue;
            }
            BetaFit fit;
            fit.lambda = opts.lambda_recon;
            fit.nu_bar = std::clamp(nu, 1.0 / (2.0 * n), 1.0 - 1.0 / (2.0 * n));
            BatchHistogram hist = reconstruct_histogram(fit, n, opts.hist_bins);
            std::vector<double> counts(grids.nu_levels, 0.0);
            for (int rep = 0; rep < opts.repeats; ++rep) {
                std::mt19937_64 rng(opts.seed + 0x9e3779b97f4a7c15ull * (rep + 1) +
                                    0x517cc1b727220a95ull * (i * 1013 + b));
                double nup = simulate_reconstructed_batch(hist, prior, policy, pay, nb, rng);
                counts[grids.nu_index(nup)] += 1.0;
            }
            for (int j = 0; j < grids.nu_levels; ++j)
                if (counts[j] > 0.0) row.push_back({j, counts[j] / opts.repeats});
            cache.set_row(i, b, std::move(row));
        }
    }
    return cache;
}

/// Terminal utility of submitting the batch: n * (-0.5 * P * (1 - nu_bar)).
inline double terminal_reward(double nu_bar, double penalty, int n) {
    return n * (-0.5 * penalty * (1.0 - nu_bar));
}

/// Optimal action and value for every discretized aggregate state.
class CostPolicy {
  public:
    CostPolicy() = default;
    CostPolicy(CostGrids grids, std::vector<double> pay_grid)
        : grids_(grids), pay_grid_(std::move(pay_grid)) {
        const std::size_t total = static_cast<std::size_t>(grids_.epochs() + 1) * slice_size();
        value_.assign(total, 0.0);
        action_.assign(total, static_cast<std::int8_t>(PayAction::Terminate));
    }

    const CostGrids& grids() const { return grids_; }
    const std::vector<double>& pay_grid() const { return pay_grid_; }

    std::size_t slice_size() const {
        return static_cast<std::size_t>(grids_.nu_levels) * grids_.theta_levels * grids_.pay_levels;
    }
    std::size_t index(const AggregateState& s) const {
        return ((static_cast<std::size_t>(s.tau_idx) * grids_.nu_levels + s.nu_idx) *
                    grids_.theta_levels +
                s.theta_idx) *
                   grids_.pay_levels +
               s.pay_idx;
    }

    double value_at(const AggregateState& s) const { return value_[index(s)]; }
    PayAction action_at(const AggregateState& s) const {
        return static_cast<PayAction>(action_[index(s)]);
    }
    void set(const AggregateState& s, PayAction a, double v) {
        value_[index(s)] = v;
        action_[index(s)] = static_cast<std::int8_t>(a);
    }

    const std::vector<double>& raw_values() const { return value_; }
    const std::vector<std::int8_t>& raw_actions() const { return action_; }

    void load_tables(std::vector<double> values, std::vector<std::int8_t> actions) {
        if (values.size() != value_.size() || actions.size() != action_.size())
            throw std::invalid_argument("CostPolicy::load_tables: size mismatch");
        value_ = std::move(values);
        action_ = std::move(actions);
    }

  private:
    CostGrids grids_;
    std::vector<double> pay_grid_;
    std::vector<double> value_;
    std::vector<std::int8_t> action_;
};

struct SolverOptions {
    double eps_switch = 0.1;  // small pay-change cost; suppresses up/down cycling
    double tol = 1e-6;
    int max_inner_iters = 10000;
};

/// Target theta index after a pay change: theta + theta0(target) - theta0(current),
/// clamped at zero and rounded to the grid. nu_bar and tau are unchanged.
inline int pay_change_theta_index(const CostGrids& grids, int theta_idx, int pay_from, int pay_to,
                                  const std::vector<double>& theta0) {
    double theta = grids.theta_value(theta_idx) + theta0.at(pay_to) - theta0.at(pay_from);
    return grids.theta_index(std::max(theta, 0.0));
}

inline AggregateState pay_change_transition(const CostGrids& grids, const AggregateState& s,
                                            PayAction dir, const std::vector<double>& theta0) {
    if (dir != PayAction::Up && dir != PayAction::Down)
        throw std::invalid_argument("pay_change_transition: dir must be Up or Down");
    int target = s.pay_idx + (dir == PayAction::Up ? 1 : -1);
    if (target < 0 || target >= grids.pay_levels)
        throw std::invalid_argument("pay_change_transition: pay level unavailable at grid edge");
    AggregateState out = s;
    out.pay_idx = target;
    out.theta_idx = pay_change_theta_index(grids, s.theta_idx, s.pay_idx, target, theta0);
    return out;
}

/// Finite-horizon solver: backward induction over tau epochs. NoChange moves to
/// the next epoch; pay changes stay within the epoch and are resolved by an
/// inner fixed point (converges for eps_switch > 0).
///
/// `terminal` maps (nu_bar value, theta value) to the submit reward, which lets
/// the same solver drive both the Octopus pricing MDP and the fixed-r baseline
/// (identity nu cache, zero theta0 shifts, quality-curve terminal).
inline CostPolicy solve_pricing_mdp(const CostGrids& grids, const std::vector<double>& pay_grid,
                                    const CompletionModel& model, const NuTransitionCache& cache,
                                    const std::vector<double>& theta0,
                                    const std::function<double(double, double)>& terminal,
                                    const SolverOptions& opts = {}) {
    grids.validate();
    if (static_cast<int>(pay_grid.size()) != grids.pay_levels)
        throw std::invalid_argument("solve_pricing_mdp: pay grid size mismatch");
    CostPolicy policy(grids, pay_grid);
    const int E = grids.epochs();
    const int NU = grids.nu_levels, TH = grids.theta_levels, K = grids.pay_levels;

    auto term_of = [&](int i, int j) { return terminal(grids.nu_value(i), grids.theta_value(j)); };

    // Precompute pay-change theta targets.
    std::vector<int> up_theta(static_cast<std::size_t>(TH) * K, -1), down_theta(up_theta);
    for (int j = 0; j < TH; ++j)
        for (int c = 0; c < K; ++c) {
            if (c + 1 < K) up_theta[j * K + c] = pay_change_theta_index(grids, j, c, c + 1, theta0);
            if (c - 1 >= 0) down_theta[j * K + c] = pay_change_theta_index(grids, j, c, c - 1, theta0);
        }

    const std::size_t S = policy.slice_size();
    std::vector<double> v_next(S), v_cur(S), nochange(S);
    auto sidx = [&](int i, int j, int c) {
        return (static_cast<std::size_t>(i) * TH + j) * K + c;
    };

    // Horizon slice: Terminate is mandatory at tau_max.
    for (int i = 0; i < NU; ++i)
        for (int j = 0; j < TH; ++j)
            for (int c = 0; c < K; ++c) {
                AggregateState s{i, j, E, c};
                policy.set(s, PayAction::Terminate, term_of(i, j));
                v_next[sidx(i, j, c)] = term_of(i, j);
            }

    for (int e = E - 1; e >= 0; --e) {
        // Expected value of posting at pay c for one epoch, against the next slice.
        for (int i = 0; i < NU; ++i)
            for (int j = 0; j < TH; ++j)
                for (int c = 0; c < K; ++c) {
                    double v = 0.0;
                    for (const auto& b : model.buckets(c)) {
                        int j2 = std::max(j - b.theta_shift, 0);
                        double cont = 0.0;
                        for (const auto& [i2, p] : cache.row(i, std::min(b.theta_shift, cache.buckets() - 1)))
                            cont += p * v_next[sidx(i2, j2, c)];
                        v += b.prob * (-pay_grid[c] * b.mean_nb + cont);
                    }
                    nochange[sidx(i, j, c)] = v;
                }
        for (std::size_t s = 0; s < S; ++s) v_cur[s] = nochange[s];
        for (int i = 0; i < NU; ++i)
            for (int j = 0; j < TH; ++j) {
                double t = term_of(i, j);
                for (int c = 0; c < K; ++c) {
                    auto s = sidx(i, j, c);
                    if (t > v_cur[s]) v_cur[s] = t;
                }
            }
        // Inner fixed point for within-epoch pay changes.
        int iters = 0;
        double delta = std::numeric_limits<double>::infinity();
        while (delta > opts.tol) {
            if (++iters > opts.max_inner_iters)
                throw std::runtime_error(
                    "solve_pricing_mdp: inner sweep did not converge (eps_switch too small?)");
            delta = 0.0;
            for (int i = 0; i < NU; ++i)
                for (int j = 0; j < TH; ++j)
                    for (int c = 0; c < K; ++c) {
                        auto s = sidx(i, j, c);
                        double best = v_cur[s];
                        if (c + 1 < K) best = std::max(best, -opts.eps_switch + v_cur[sidx(i, up_theta[j * K + c], c + 1)]);
                        if (c - 1 >= 0) best = std::max(best, -opts.eps_switch + v_cur[sidx(i, down_theta[j * K + c], c - 1)]);
                        if (best > v_cur[s]) {
                            delta = std::max(delta, best - v_cur[s]);
                            v_cur[s] = best;
                        }
                    }
        }
        // Record optimal actions against the converged values.
        for (int i = 0; i < NU; ++i)
            for (int j = 0; j < TH; ++j)
                for (int c = 0; c < K; ++c) {
                    auto s = sidx(i, j, c);
                    AggregateState st{i, j, e, c};
                    PayAction act = PayAction::Terminate;
                    double best = term_of(i, j);
                    if (nochange[s] > best + 1e-12) {
                        best = nochange[s];
                        act = PayAction::NoChange;
                    }
                    if (c + 1 < K) {
                        double v = -opts.eps_switch + v_cur[sidx(i, up_theta[j * K + c], c + 1)];
                        if (v > best + 1e-12) {
                            best = v;
                            act = PayAction::Up;
                        }
                    }
                    if (c - 1 >= 0) {
                        double v = -opts.eps_switch + v_cur[sidx(i, down_theta[j * K + c], c - 1)];
                        if (v > best + 1e-12) {
                            best = v;
                            act = PayAction::Down;
                        }
                    }
                    policy.set(st, act, v_cur[s]);
                }
        std::swap(v_next, v_cur);
    }
    return policy;
}

/// Snaps the live batch onto the aggregate grid: nu_bar is the mean task
/// quality and theta the batch FrontierFinding estimate.
inline AggregateState synchronize(const std::vector<BeliefState>& beliefs,
                                  const ThetaEstimator& estimator, const CostGrids& grids,
                                  double pay, int pay_idx, int tau_idx) {
    double nu = 0.0;
    for (const auto& b : beliefs) nu += b.task_quality();
    if (!beliefs.empty()) nu /= beliefs.size();
    double theta = estimator.batch_theta(beliefs, pay);
    return AggregateState{grids.nu_index(nu), grids.theta_index(theta), tau_idx, pay_idx};
}

/// Feasible theta interval per (nu_bar, pay): the beta-fit residual rule
/// |theta - theta_hat(lambda*)| <= 0.5 * delta_theta prunes unreachable
/// aggregates. theta_hat is continuous in lambda, so the reachable set per
/// (nu_bar, c) is an interval of the lambda sweep's range.
struct FeasibleThetaRange {
    double lo = 0.0, hi = 0.0;
    bool contains(double theta, double delta_theta) const {
        return theta >= lo - 0.5 * delta_theta && theta <= hi + 0.5 * delta_theta;
    }
};

inline std::vector<FeasibleThetaRange> feasible_theta_ranges(const CostGrids& grids,
                                                             const ThetaTable& table, int n,
                                                             const LambdaSearch& search = {}) {
    std::vector<FeasibleThetaRange> out(static_cast<std::size_t>(grids.nu_levels) *
                                        grids.pay_levels);
    const int steps = static_cast<int>(std::llround((search.hi - search.lo) / search.step));
    for (int i = 0; i < grids.nu_levels; ++i) {
        double nu = std::clamp(grids.nu_value(i), 1.0 / (2.0 * n), 1.0 - 1.0 / (2.0 * n));
        for (int c = 0; c < grids.pay_levels; ++c) {
            double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
            for (int s = 0; s <= steps; ++s) {
                double th = expected_theta(search.lo + s * search.step, nu, c, table, n);
                lo = std::min(lo, th);
                hi = std::max(hi, th);
            }
            out[static_cast<std::size_t>(i) * grids.pay_levels + c] = {lo, hi};
        }
    }
    return out;
}

}  // namespace octopus
