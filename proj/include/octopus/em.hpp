#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "octopus/trace.hpp"
#include "octopus/worker.hpp"

namespace octopus {

struct EmOptions {
    double init_gamma = 1.0;
    double ll_tolerance = 1e-6;
    int max_rounds = 500;
    int mstep_iters = 25;
    bool estimate_worker_gamma = true;  // off: only task posteriors/difficulties move
};

struct EmResult {
    std::vector<int> worker_ids;
    std::vector<int> task_ids;
    std::vector<double> gamma;        // parallel to worker_ids
    std::vector<double> difficulty;   // parallel to task_ids
    std::vector<double> posterior1;   // Pr(answer = 1), parallel to task_ids
    std::vector<double> ll_history;   // observed log-likelihood per round
    bool converged = false;

    double gamma_of(int worker_id) const { return gamma[index(worker_ids, worker_id)]; }
    double d_of(int task_id) const { return difficulty[index(task_ids, task_id)]; }
    double posterior_of(int task_id) const { return posterior1[index(task_ids, task_id)]; }
    int answer_of(int task_id) const { return posterior_of(task_id) >= 0.5 ? 1 : 0; }

  private:
    static std::size_t index(const std::vector<int>& ids, int id) {
        auto it = std::find(ids.begin(), ids.end(), id);
        if (it == ids.end()) throw std::invalid_argument("EmResult: unknown id " + std::to_string(id));
        return static_cast<std::size_t>(it - ids.begin());
    }
};

namespace detail {

// Parameters are kept strictly inside their boxes so that log-likelihood terms
// stay finite; the boundary is approached but never hit.
inline double clamp_d(double d) { return std::clamp(d, 1e-9, 1.0 - 1e-9); }
inline double clamp_gamma(double g) { return std::clamp(g, 0.0, 100.0); }

}  // namespace detail

/// Whitehill-style EM over ballot data: latent true answers, per-worker error
/// rates and per-task difficulties. The E-step computes answer posteriors; the
/// M-step improves the expected complete-data log-likelihood by projected
/// gradient ascent with step halving. Stops when the observed log-likelihood
/// gain falls below tolerance or after the round cap (then `converged` = false).
inline EmResult em_estimate(const BallotTrace& trace, const DifficultyPrior& prior,
                            const EmOptions& opts = {}) {
    if (trace.events.empty()) throw std::invalid_argument("em_estimate: empty trace");
    prior.validate();

    // Dense reindex.
    std::unordered_map<int, int> wmap, tmap;
    EmResult r;
    for (const auto& e : trace.events) {
        if (wmap.emplace(e.worker_id, static_cast<int>(r.worker_ids.size())).second)
            r.worker_ids.push_back(e.worker_id);
        if (tmap.emplace(e.task_id, static_cast<int>(r.task_ids.size())).second)
            r.task_ids.push_back(e.task_id);
    }
    const int W = static_cast<int>(r.worker_ids.size());
    const int T = static_cast<int>(r.task_ids.size());

    struct Ballot {
        int w, t, label;
    };
    std::vector<Ballot> ballots;
    ballots.reserve(trace.events.size());
    std::vector<std::vector<int>> task_ballots(T);
    for (const auto& e : trace.events) {
        task_ballots[tmap[e.task_id]].push_back(static_cast<int>(ballots.size()));
        ballots.push_back({wmap[e.worker_id], tmap[e.task_id], e.label});
    }

    double prior_mean_d = 0.0;
    {
        auto m = prior.masses();
        for (int i = 0; i < prior.bins; ++i) prior_mean_d += m[i] * prior.bin_center(i);
    }
    r.gamma.assign(W, detail::clamp_gamma(opts.init_gamma));
    r.difficulty.assign(T, detail::clamp_d(prior_mean_d));
    r.posterior1.assign(T, 0.5);

    auto loglik_of_ballot = [&](const Ballot& bl, int truth, double g, double d) {
        double a = accuracy(g, d);
        return std::log(bl.label == truth ? a : 1.0 - a);
    };

    // E-step: posterior over each task's answer; returns observed log-likelihood.
    auto e_step = [&]() {
        double ll = 0.0;
        for (int q = 0; q < T; ++q) {
            double lw0 = std::log(0.5), lw1 = std::log(0.5);
            for (int bi : task_ballots[q]) {
                const Ballot& bl = ballots[bi];
                lw0 += loglik_of_ballot(bl, 0, r.gamma[bl.w], r.difficulty[q]);
                lw1 += loglik_of_ballot(bl, 1, r.gamma[bl.w], r.difficulty[q]);
            }
            double m = std::max(lw0, lw1);
            double z0 = std::exp(lw0 - m), z1 = std::exp(lw1 - m);
            r.posterior1[q] = z1 / (z0 + z1);
            ll += m + std::log(z0 + z1);
        }
        return ll;
    };

    // Expected complete-data log-likelihood under the current posteriors.
    auto q_value = [&](const std::vector<double>& gam, const std::vector<double>& dif) {
        double qv = 0.0;
        for (const auto& bl : ballots) {
            double p1 = r.posterior1[bl.t];
            qv += (1.0 - p1) * loglik_of_ballot(bl, 0, gam[bl.w], dif[bl.t]);
            qv += p1 * loglik_of_ballot(bl, 1, gam[bl.w], dif[bl.t]);
        }
        return qv;
    };

    auto m_step = [&]() {
        std::vector<double> ggrad(W), dgrad(T);
        double step = 1.0;
        double q_cur = q_value(r.gamma, r.difficulty);
        for (int it = 0; it < opts.mstep_iters; ++it) {
            std::fill(ggrad.begin(), ggrad.end(), 0.0);
            std::fill(dgrad.begin(), dgrad.end(), 0.0);
            for (const auto& bl : ballots) {
                double g = r.gamma[bl.w], d = r.difficulty[bl.t];
                double pw = std::pow(1.0 - d, g);
                double a = 0.5 * (1.0 + pw);
                double da_dg = 0.5 * pw * std::log(1.0 - d);
                double da_dd = -0.5 * g * std::pow(1.0 - d, g - 1.0);
                double p1 = r.posterior1[bl.t];
                // weight on "ballot correct" is p_match; on incorrect 1 - p_match
                double p_match = (bl.label == 1) ? p1 : 1.0 - p1;
                double dll_da = p_match / a - (1.0 - p_match) / (1.0 - a);
                ggrad[bl.w] += dll_da * da_dg;
                dgrad[bl.t] += dll_da * da_dd;
            }
            // Backtracking line search on a joint step.
            bool accepted = false;
            while (step > 1e-12) {
                std::vector<double> gam = r.gamma, dif = r.difficulty;
                if (opts.estimate_worker_gamma)
                    for (int w = 0; w < W; ++w) gam[w] = detail::clamp_gamma(gam[w] + step * ggrad[w]);
                for (int t = 0; t < T; ++t) dif[t] = detail::clamp_d(dif[t] + step * dgrad[t]);
                double q_new = q_value(gam, dif);
                if (q_new > q_cur) {
                    r.gamma = std::move(gam);
                    r.difficulty = std::move(dif);
                    q_cur = q_new;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if (!accepted) break;
        }
    };

    double prev_ll = e_step();
    r.ll_history.push_back(prev_ll);
    for (int round = 0; round < opts.max_rounds; ++round) {
        m_step();
        double ll = e_step();
        r.ll_history.push_back(ll);
        if (ll - prev_ll < opts.ll_tolerance) {
            r.converged = true;
            break;
        }
        prev_ll = ll;
    }
    return r;
}

}  // namespace octopus
