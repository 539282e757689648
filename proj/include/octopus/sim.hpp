#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "octopus/cost_setter.hpp"
#include "octopus/selector.hpp"
#include "octopus/trace.hpp"

namespace octopus {

/// Full simulation configuration. The seed is part of the contract: identical
/// (config, seed) pairs must reproduce RunResult byte for byte.
struct SimConfig {
    int n = 500;
    DifficultyPrior prior = DifficultyPrior::beta(2.0, 2.0);
    WorkerPool pool{2.0, 0.5};
    QualityConfig quality;
    std::vector<double> rates_per_epoch;  // expected ballots per epoch, per pay level
    double delta_tau_min = 15.0;
    double tau_max_min = 360.0;
    std::uint64_t seed = 0;
    SelectorKind selector = SelectorKind::Greedy;
    bool synchronize_each_epoch = true;

    // Aggregate-grid parameters for the pricing MDP.
    int nu_levels = 101;
    double delta_theta = 10.0;
    NuRolloutOptions rollout;

    int epochs() const { return static_cast<int>(std::llround(tau_max_min / delta_tau_min)); }

    void validate() const {
        if (n < 1) throw std::invalid_argument("SimConfig: n must be >= 1");
        prior.validate();
        pool.validate();
        quality.validate();
        if (rates_per_epoch.size() != quality.pay_grid.size())
            throw std::invalid_argument("SimConfig: one arrival rate per pay level required");
        for (double r : rates_per_epoch)
            if (!(r > 0.0)) throw std::invalid_argument("SimConfig: rates must be positive");
        if (!(delta_tau_min > 0.0) || !(tau_max_min >= delta_tau_min))
            throw std::invalid_argument("SimConfig: bad time grid");
        if (seed == 0) throw std::invalid_argument("SimConfig: an explicit nonzero seed is required");
    }

    /// Default rates: roughly one ballot per task per hour at the lowest pay,
    /// doubling linearly by the highest.
    static std::vector<double> default_rates(int n, double delta_tau_min, int pay_levels) {
        std::vector<double> r(pay_levels);
        for (int c = 0; c < pay_levels; ++c) {
            double scale = pay_levels > 1 ? 1.0 + static_cast<double>(c) / (pay_levels - 1) : 1.0;
            r[c] = n * (delta_tau_min / 60.0) * scale;
        }
        return r;
    }
};

enum class ControllerKind { Octopus, StaticPay, GaoFixed };

struct ControllerSpec {
    ControllerKind kind = ControllerKind::Octopus;
    int static_pay_idx = 0;  // StaticPay
    int gao_r = 1;           // GaoFixed ballots per task
    SelectorKind selector = SelectorKind::Greedy;

    std::string name() const {
        switch (kind) {
            case ControllerKind::Octopus:
                switch (selector) {
                    case SelectorKind::Greedy: return "octopus";
                    case SelectorKind::Random: return "octopus-random";
                    case SelectorKind::RandomRobin: return "octopus-random-robin";
                }
                return "octopus";
            case ControllerKind::StaticPay: return "static-pay-" + std::to_string(static_pay_idx + 1);
            case ControllerKind::GaoFixed: return "gao-" + std::to_string(gao_r);
        }
        return "?";
    }
};

/// Shared per-process evaluation state: the stop policy and the memoized
/// frontier estimator. Reusing one context across episodes keeps the caches warm.
struct SimContext {
    StopPolicy policy;
    ThetaEstimator estimator;

    explicit SimContext(const QualityConfig& cfg) : policy(cfg), estimator(policy) {}
};

/// Prebuilt Octopus pricing artifacts for one config.
struct OctopusPlanner {
    CostGrids grids;
    ThetaTable theta_table;
    std::vector<double> theta0;  // n * theta~(0, c) per pay level
    NuTransitionCache nu_cache;
    CompletionModel completion;
    CostPolicy policy;
};

inline OctopusPlanner build_octopus_planner(const SimConfig& cfg, SimContext& ctx,
                                            const SolverOptions& solver = {}) {
    cfg.validate();
    OctopusPlanner p;
    p.theta_table = build_theta_table(ctx.policy, cfg.prior);
    const int k = static_cast<int>(cfg.quality.pay_grid.size());
    p.theta0.resize(k);
    for (int c = 0; c < k; ++c) p.theta0[c] = cfg.n * p.theta_table.at(0, c);

    p.grids.nu_levels = cfg.nu_levels;
    p.grids.delta_theta = cfg.delta_theta;
    p.grids.delta_tau_min = cfg.delta_tau_min;
    p.grids.tau_max_min = cfg.tau_max_min;
    p.grids.pay_levels = k;
    double theta_max = 0.0;
    for (int c = 0; c < k; ++c) theta_max = std::max(theta_max, p.theta0[c]);
    p.grids.theta_levels = static_cast<int>(std::ceil(theta_max / cfg.delta_theta)) + 1;

    p.completion = CompletionModel(cfg.rates_per_epoch, cfg.delta_theta);
    // The cached nu transition uses the lowest pay's stopping policy; the table
    // is shared across c per the caching observation.
    p.nu_cache = build_nu_cache(p.grids, p.completion.max_bucket(), cfg.prior, ctx.policy,
                                cfg.quality.pay_grid[0], cfg.n, cfg.rollout);
    const double penalty = cfg.quality.penalty;
    const int n = cfg.n;
    p.policy = solve_pricing_mdp(
        p.grids, cfg.quality.pay_grid, p.completion, p.nu_cache, p.theta0,
        [penalty, n](double nu, double) { return terminal_reward(nu, penalty, n); }, solver);
    return p;
}

/// Expected residual error 1 - E[v] after j average-worker ballots from a
/// fresh belief, by exhaustive outcome enumeration.
inline std::vector<double> quality_curve(const DifficultyPrior& prior, double mean_gamma,
                                         int max_ballots) {
    std::vector<double> g(max_ballots + 1, 0.0);
    struct Walker {
        double mean_gamma;
        std::vector<double>& g;
        void walk(const BeliefState& b, int depth, double prob, int max_depth) {
            g[depth] += prob * (1.0 - b.v());
            if (depth == max_depth) return;
            for (int o = 0; o < 2; ++o) {
                double p = b.predictive(o, mean_gamma);
                if (p <= 0.0) continue;
                walk(b.updated(o, mean_gamma, 0.0), depth + 1, prob * p, max_depth);
            }
        }
    } walker{mean_gamma, g};
    walker.walk(BeliefState(prior), 0, 1.0, max_ballots);
    return g;
}

/// Fixed-r baseline pricing MDP: same up/down/no-change machinery over a
/// deterministic remaining-ballot counter, no nu_bar and no per-task stopping.
struct GaoPlanner {
    int r = 1;
    CostGrids grids;
    CompletionModel completion;
    CostPolicy policy;
    std::vector<double> curve;  // quality_curve up to r
};

inline GaoPlanner build_gao_planner(const SimConfig& cfg, int r, const SolverOptions& solver = {}) {
    cfg.validate();
    if (r < 1) throw std::invalid_argument("build_gao_planner: r must be >= 1");
    GaoPlanner p;
    p.r = r;
    const int k = static_cast<int>(cfg.quality.pay_grid.size());
    p.grids.nu_levels = 2;  // nu plays no role; keep the minimal legal grid
    p.grids.delta_theta = cfg.delta_theta;
    p.grids.delta_tau_min = cfg.delta_tau_min;
    p.grids.tau_max_min = cfg.tau_max_min;
    p.grids.pay_levels = k;
    p.grids.theta_levels = static_cast<int>(std::ceil(static_cast<double>(cfg.n) * r / cfg.delta_theta)) + 1;
    p.completion = CompletionModel(cfg.rates_per_epoch, cfg.delta_theta);
    p.curve = quality_curve(cfg.prior, cfg.quality.mean_gamma, r);

    NuTransitionCache identity(p.grids.nu_levels, p.completion.max_bucket() + 1);
    for (int i = 0; i < p.grids.nu_levels; ++i)
        for (int b = 0; b <= p.completion.max_bucket(); ++b) identity.set_row(i, b, {{i, 1.0}});
    std::vector<double> zero_shift(k, 0.0);

    const double penalty = cfg.quality.penalty;
    const int n = cfg.n;
    const auto curve = p.curve;
    auto terminal = [penalty, n, r, curve](double, double theta) {
        long demand = static_cast<long>(n) * r;
        long received = std::clamp(demand - static_cast<long>(std::llround(theta)), 0L, demand);
        long base = received / n, extra = received % n;
        double miss = extra * curve[std::min<long>(base + 1, r)] + (n - extra) * curve[std::min<long>(base, r)];
        return -penalty * miss;
    };
    p.policy = solve_pricing_mdp(p.grids, cfg.quality.pay_grid, p.completion, identity, zero_shift,
                                 terminal, solver);
    return p;
}

struct EpochRecord {
    int epoch = 0;
    double tau_min = 0.0;
    double pay = 0.0;
    long ballots = 0;
    double nu_bar_tracked = 0.0;
    double nu_bar_true = 0.0;
    double theta_tracked = 0.0;
    double theta_true = 0.0;
    double cum_cost = 0.0;
};

struct RunResult {
    std::string controller;
    int n = 0;
    std::uint64_t seed = 0;
    double utility = 0.0;
    double accuracy = 0.0;
    double total_cost = 0.0;
    long ballots = 0;
    long wrong = 0;
    bool terminated_early = false;
    double terminated_at_min = 0.0;
    std::vector<double> pay_schedule;  // pay in effect during each epoch
    std::vector<EpochRecord> epochs;
    BallotTrace trace;
    std::vector<int> answers;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["controller"] = controller;
        j["n"] = n;
        j["seed"] = seed;
        j["utility"] = utility;
        j["accuracy"] = accuracy;
        j["total_cost"] = total_cost;
        j["ballots"] = ballots;
        j["wrong"] = wrong;
        j["terminated_early"] = terminated_early;
        j["terminated_at_min"] = terminated_at_min;
        j["pay_schedule"] = pay_schedule;
        j["answers"] = answers;
        auto& eps = j["epochs"] = nlohmann::json::array();
        for (const auto& e : epochs) {
            eps.push_back({{"epoch", e.epoch},
                           {"tau_min", e.tau_min},
                           {"pay", e.pay},
                           {"ballots", e.ballots},
                           {"nu_bar_tracked", e.nu_bar_tracked},
                           {"nu_bar_true", e.nu_bar_true},
                           {"theta_tracked", e.theta_tracked},
                           {"theta_true", e.theta_true},
                           {"cum_cost", e.cum_cost}});
        }
        return j;
    }
};

/// Hidden per-task truths, used only for ballot generation and final scoring.
struct GroundTruth {
    std::vector<int> answer;
    std::vector<double> difficulty;

    template <class Rng>
    static GroundTruth sample(const SimConfig& cfg, Rng& rng) {
        GroundTruth gt;
        gt.answer.resize(cfg.n);
        gt.difficulty.resize(cfg.n);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int q = 0; q < cfg.n; ++q) {
            gt.answer[q] = u(rng) < 0.5 ? 0 : 1;
            gt.difficulty[q] = cfg.prior.sample(rng);
        }
        return gt;
    }
};

namespace detail {

/// Round-robin assignment capped at r ballots per task (Gao's selection rule).
class CappedRoundRobin {
  public:
    CappedRoundRobin(int n, int r) : counts_(n, 0), r_(r) {}
    std::optional<int> next() {
        const int n = static_cast<int>(counts_.size());
        for (int step = 0; step < n; ++step) {
            int q = cursor_;
            cursor_ = (cursor_ + 1) % n;
            if (counts_[q] < r_) {
                ++counts_[q];
                return q;
            }
        }
        return std::nullopt;
    }

  private:
    std::vector<int> counts_;
    int r_;
    int cursor_ = 0;
};

}  // namespace detail

/// Runs one simulated episode. Ballot arrivals follow a Poisson process at the
/// current pay's rate; each arrival draws a fresh worker from the pool, gets
/// routed by the selector, and triggers a Bayesian update with the average
/// worker model. The controller acts at every epoch boundary.
inline RunResult run_episode(const SimConfig& cfg, const ControllerSpec& spec, SimContext& ctx,
                             const OctopusPlanner* octopus = nullptr,
                             const GaoPlanner* gao = nullptr) {
    cfg.validate();
    if (spec.kind == ControllerKind::Octopus && !octopus)
        throw std::invalid_argument("run_episode: Octopus controller requires a planner");
    if (spec.kind == ControllerKind::GaoFixed && !gao)
        throw std::invalid_argument("run_episode: Gao controller requires a planner");
    if (spec.kind == ControllerKind::StaticPay &&
        (spec.static_pay_idx < 0 ||
         spec.static_pay_idx >= static_cast<int>(cfg.quality.pay_grid.size())))
        throw std::invalid_argument("run_episode: static pay index out of range");

    std::mt19937_64 rng(cfg.seed);
    GroundTruth gt = GroundTruth::sample(cfg, rng);

    std::vector<BeliefState> beliefs(cfg.n, BeliefState(cfg.prior));
    TaskSelector selector(spec.selector, ctx.policy, cfg.n);
    detail::CappedRoundRobin gao_rr(cfg.n, gao ? gao->r : 1);

    const auto& pay_grid = cfg.quality.pay_grid;
    int pay_idx = spec.kind == ControllerKind::StaticPay ? spec.static_pay_idx : 0;
    const int E = cfg.epochs();

    RunResult res;
    res.controller = spec.name();
    res.n = cfg.n;
    res.seed = cfg.seed;

    // Tracked aggregates (continuous); policy queries snap to the grid.
    const CostGrids* grids = octopus ? &octopus->grids : (gao ? &gao->grids : nullptr);
    double tracked_theta = 0.0, tracked_nu = 0.0;
    if (spec.kind == ControllerKind::Octopus) tracked_theta = octopus->theta0[pay_idx];
    if (spec.kind == ControllerKind::GaoFixed) tracked_theta = static_cast<double>(cfg.n) * gao->r;

    selector.reset(beliefs, pay_grid[pay_idx]);

    auto true_nu = [&]() {
        double s = 0.0;
        for (const auto& b : beliefs) s += b.task_quality();
        return s / cfg.n;
    };
    auto true_theta = [&]() { return ctx.estimator.batch_theta(beliefs, pay_grid[pay_idx]); };

    std::uniform_real_distribution<double> unif(0.0, 1.0);
    bool terminated = false;
    double cum_cost = 0.0;
    long total_ballots = 0;

    for (int e = 0; e < E && !terminated; ++e) {
        // Controller acts at the epoch boundary (pay changes take no wall-clock time).
        if (spec.kind == ControllerKind::Octopus || spec.kind == ControllerKind::GaoFixed) {
            const CostPolicy& pol = spec.kind == ControllerKind::Octopus ? octopus->policy : gao->policy;
            const std::vector<double>* theta0 =
                spec.kind == ControllerKind::Octopus ? &octopus->theta0 : nullptr;
            if (spec.kind == ControllerKind::Octopus && cfg.synchronize_each_epoch) {
                AggregateState s = synchronize(beliefs, ctx.estimator, *grids, pay_grid[pay_idx],
                                               pay_idx, e);
                tracked_nu = grids->nu_value(s.nu_idx);
                tracked_theta = grids->theta_value(s.theta_idx);
            }
            for (int guard = 0; guard < 2 * grids->pay_levels; ++guard) {
                AggregateState s{grids->nu_index(tracked_nu), grids->theta_index(tracked_theta), e,
                                 pay_idx};
                PayAction a = pol.action_at(s);
                if (a == PayAction::Terminate) {
                    terminated = true;
                    res.terminated_at_min = e * cfg.delta_tau_min;
                    break;
                }
                if (a == PayAction::NoChange) break;
                int next_pay = pay_idx + (a == PayAction::Up ? 1 : -1);
                if (theta0) tracked_theta = std::max(tracked_theta + (*theta0)[next_pay] - (*theta0)[pay_idx], 0.0);
                pay_idx = next_pay;
                selector.reset(beliefs, pay_grid[pay_idx]);
            }
            if (terminated) break;
        }

        const double pay = pay_grid[pay_idx];
        res.pay_schedule.push_back(pay);

        // Poisson arrivals inside this epoch, timestamps uniform over it.
        std::poisson_distribution<long> pois(cfg.rates_per_epoch[pay_idx]);
        long k = pois(rng);
        std::vector<std::int64_t> times(k);
        const double t0 = e * cfg.delta_tau_min * 60.0;
        for (long i = 0; i < k; ++i)
            times[i] = static_cast<std::int64_t>(t0 + unif(rng) * cfg.delta_tau_min * 60.0);
        std::sort(times.begin(), times.end());

        long epoch_ballots = 0;
        for (long i = 0; i < k; ++i) {
            double worker_gamma = cfg.pool.sample(rng);
            std::optional<int> q;
            if (spec.kind == ControllerKind::GaoFixed)
                q = gao_rr.next();
            else
                q = selector.next(rng);
            if (!q) continue;
            int ballot = sample_ballot(rng, worker_gamma, gt.difficulty[*q], gt.answer[*q]);
            beliefs[*q] = beliefs[*q].updated(ballot, cfg.quality.mean_gamma, pay);
            if (spec.kind != ControllerKind::GaoFixed)
                selector.on_belief_changed(*q, beliefs[*q], pay);
            cum_cost += pay;
            ++epoch_ballots;
            ++total_ballots;
            res.trace.events.push_back({times[i], *q, static_cast<int>(total_ballots), ballot, pay_idx});
        }

        // Tracked-state update from the observed ballot count (used when not
        // synchronizing; with sync it is overwritten at the next boundary).
        if (grids) {
            int bucket = std::clamp(
                static_cast<int>(std::llround(epoch_ballots / grids->delta_theta)), 0,
                spec.kind == ControllerKind::Octopus ? octopus->nu_cache.buckets() - 1 : 1 << 20);
            if (spec.kind == ControllerKind::Octopus && epoch_ballots > 0) {
                double enu = octopus->nu_cache.expected_nu_index(grids->nu_index(tracked_nu), bucket);
                tracked_nu = enu / (grids->nu_levels - 1);
            }
            tracked_theta = std::max(tracked_theta - epoch_ballots, 0.0);
        }

        EpochRecord rec;
        rec.epoch = e;
        rec.tau_min = (e + 1) * cfg.delta_tau_min;
        rec.pay = pay;
        rec.ballots = epoch_ballots;
        rec.cum_cost = cum_cost;
        rec.nu_bar_true = true_nu();
        rec.theta_true = true_theta();
        rec.nu_bar_tracked = spec.kind == ControllerKind::Octopus ? tracked_nu : rec.nu_bar_true;
        rec.theta_tracked = grids ? tracked_theta : rec.theta_true;
        res.epochs.push_back(rec);
    }

    // Submit: argmax label per belief, ties resolved to 0.
    res.answers.resize(cfg.n);
    for (int q = 0; q < cfg.n; ++q) {
        res.answers[q] = beliefs[q].answer_marginal(1) > 0.5 ? 1 : 0;
        if (res.answers[q] != gt.answer[q]) ++res.wrong;
    }
    res.terminated_early = terminated;
    if (!terminated) res.terminated_at_min = cfg.tau_max_min;
    res.total_cost = cum_cost;
    res.ballots = total_ballots;
    res.accuracy = 1.0 - static_cast<double>(res.wrong) / cfg.n;
    res.utility = -cfg.quality.penalty * res.wrong - res.total_cost;
    return res;
}

/// Replays recorded arrivals. The selector picks the task; the ballot label is
/// taken verbatim when both the task and the pay level match the recording,
/// otherwise resampled uniformly from the task's recorded ballot pool (worker
/// quality is pay-independent).
inline RunResult replay_episode(const BallotTrace& trace, const std::vector<int>& gold,
                                const SimConfig& cfg, const ControllerSpec& spec, SimContext& ctx,
                                const OctopusPlanner* octopus = nullptr,
                                const GaoPlanner* gao = nullptr) {
    cfg.validate();
    if (trace.events.empty()) throw std::invalid_argument("replay_episode: empty trace");
    std::vector<std::vector<int>> pool(cfg.n);
    for (const auto& ev : trace.events) {
        if (ev.task_id < 0 || ev.task_id >= cfg.n ||
            ev.task_id >= static_cast<int>(gold.size()))
            throw std::invalid_argument("replay_episode: task " + std::to_string(ev.task_id) +
                                        " has no gold label");
        pool[ev.task_id].push_back(ev.label);
    }

    std::mt19937_64 rng(cfg.seed);
    std::vector<BeliefState> beliefs(cfg.n, BeliefState(cfg.prior));
    TaskSelector selector(spec.selector, ctx.policy, cfg.n);
    detail::CappedRoundRobin gao_rr(cfg.n, gao ? gao->r : 1);

    const auto& pay_grid = cfg.quality.pay_grid;
    int pay_idx = spec.kind == ControllerKind::StaticPay ? spec.static_pay_idx : 0;
    const CostGrids* grids = octopus ? &octopus->grids : (gao ? &gao->grids : nullptr);
    double tracked_theta = 0.0, tracked_nu = 0.0;
    if (spec.kind == ControllerKind::Octopus) tracked_theta = octopus->theta0[pay_idx];
    if (spec.kind == ControllerKind::GaoFixed) tracked_theta = static_cast<double>(cfg.n) * gao->r;
    selector.reset(beliefs, pay_grid[pay_idx]);

    RunResult res;
    res.controller = spec.name() + "-replay";
    res.n = cfg.n;
    res.seed = cfg.seed;

    const int E = cfg.epochs();
    bool terminated = false;
    double cum_cost = 0.0;
    long total_ballots = 0;
    std::size_t next_event = 0;

    for (int e = 0; e < E && !terminated; ++e) {
        if (spec.kind == ControllerKind::Octopus || spec.kind == ControllerKind::GaoFixed) {
            const CostPolicy& pol = spec.kind == ControllerKind::Octopus ? octopus->policy : gao->policy;
            if (spec.kind == ControllerKind::Octopus && cfg.synchronize_each_epoch) {
                AggregateState s = synchronize(beliefs, ctx.estimator, *grids, pay_grid[pay_idx],
                                               pay_idx, e);
                tracked_nu = grids->nu_value(s.nu_idx);
                tracked_theta = grids->theta_value(s.theta_idx);
            }
            for (int guard = 0; guard < 2 * grids->pay_levels; ++guard) {
                AggregateState s{grids->nu_index(tracked_nu), grids->theta_index(tracked_theta), e,
                                 pay_idx};
                PayAction a = pol.action_at(s);
                if (a == PayAction::Terminate) {
                    terminated = true;
                    res.terminated_at_min = e * cfg.delta_tau_min;
                    break;
                }
                if (a == PayAction::NoChange) break;
                int next_pay = pay_idx + (a == PayAction::Up ? 1 : -1);
                if (spec.kind == ControllerKind::Octopus)
                    tracked_theta = std::max(
                        tracked_theta + octopus->theta0[next_pay] - octopus->theta0[pay_idx], 0.0);
                pay_idx = next_pay;
                selector.reset(beliefs, pay_grid[pay_idx]);
            }
            if (terminated) break;
        }

        const double pay = pay_grid[pay_idx];
        res.pay_schedule.push_back(pay);
        const std::int64_t epoch_end = static_cast<std::int64_t>((e + 1) * cfg.delta_tau_min * 60.0);

        long epoch_ballots = 0;
        while (next_event < trace.events.size() &&
               trace.events[next_event].timestamp_sec < epoch_end) {
            const BallotEvent& ev = trace.events[next_event++];
            std::optional<int> q;
            if (spec.kind == ControllerKind::GaoFixed)
                q = gao_rr.next();
            else
                q = selector.next(rng);
            if (!q) continue;
            int label;
            if (*q == ev.task_id && pay_idx == ev.pay_level) {
                label = ev.label;
            } else {
                const auto& candidates = pool[*q];
                std::uniform_int_distribution<std::size_t> u(0, candidates.size() - 1);
                label = candidates[u(rng)];
            }
            beliefs[*q] = beliefs[*q].updated(label, cfg.quality.mean_gamma, pay);
            if (spec.kind != ControllerKind::GaoFixed)
                selector.on_belief_changed(*q, beliefs[*q], pay);
            cum_cost += pay;
            ++epoch_ballots;
            ++total_ballots;
            res.trace.events.push_back({ev.timestamp_sec, *q, ev.worker_id, label, pay_idx});
        }

        EpochRecord rec;
        rec.epoch = e;
        rec.tau_min = (e + 1) * cfg.delta_tau_min;
        rec.pay = pay;
        rec.ballots = epoch_ballots;
        rec.cum_cost = cum_cost;
        double nu = 0.0;
        for (const auto& b : beliefs) nu += b.task_quality();
        rec.nu_bar_true = nu / cfg.n;
        rec.theta_true = ctx.estimator.batch_theta(beliefs, pay);
        rec.nu_bar_tracked = spec.kind == ControllerKind::Octopus ? tracked_nu : rec.nu_bar_true;
        rec.theta_tracked = grids ? tracked_theta : rec.theta_true;
        res.epochs.push_back(rec);
        if (grids) tracked_theta = std::max(tracked_theta - epoch_ballots, 0.0);
    }

    res.answers.resize(cfg.n);
    for (int q = 0; q < cfg.n; ++q) {
        res.answers[q] = beliefs[q].answer_marginal(1) > 0.5 ? 1 : 0;
        if (q < static_cast<int>(gold.size()) && res.answers[q] != gold[q]) ++res.wrong;
    }
    res.terminated_early = terminated;
    if (!terminated) res.terminated_at_min = cfg.tau_max_min;
    res.total_cost = cum_cost;
    res.ballots = total_ballots;
    res.accuracy = 1.0 - static_cast<double>(res.wrong) / cfg.n;
    res.utility = -cfg.quality.penalty * res.wrong - res.total_cost;
    return res;
}

}  // namespace octopus
