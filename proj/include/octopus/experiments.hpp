#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "octopus/sim.hpp"

namespace octopus {

/// A comparison suite: every listed controller is run on the same seeds and
/// deadlines, and compared against the first one (the reference).
struct ExperimentSpec {
    SimConfig base;
    std::vector<double> deadlines_min;      // tau_max sweep
    std::vector<std::uint64_t> seeds;       // one episode per (controller, deadline, seed)
    std::vector<ControllerSpec> controllers;
    double alpha = 0.05;

    void validate() const {
        base.validate();
        if (deadlines_min.empty()) throw std::invalid_argument("ExperimentSpec: no deadlines");
        if (seeds.empty()) throw std::invalid_argument("ExperimentSpec: no seeds");
        if (controllers.size() < 2)
            throw std::invalid_argument("ExperimentSpec: need a reference and a challenger");
        for (auto s : seeds)
            if (s == 0) throw std::invalid_argument("ExperimentSpec: seeds must be nonzero");
    }
};

struct SampleStats {
    int count = 0;
    double mean = 0.0;
    double variance = 0.0;  // unbiased

    static SampleStats of(const std::vector<double>& xs) {
        SampleStats s;
        s.count = static_cast<int>(xs.size());
        if (s.count == 0) return s;
        for (double x : xs) s.mean += x;
        s.mean /= s.count;
        if (s.count > 1) {
            for (double x : xs) s.variance += (x - s.mean) * (x - s.mean);
            s.variance /= (s.count - 1);
        }
        return s;
    }
};

/// Two-sided Welch's t-test. Returns the p-value; degenerate (zero pooled
/// variance) pairs give p = 1 when the means match and p = 0 otherwise.
inline double welch_p_value(const SampleStats& a, const SampleStats& b) {
    if (a.count < 2 || b.count < 2) throw std::invalid_argument("welch_p_value: need >= 2 samples");
    double va = a.variance / a.count, vb = b.variance / b.count;
    double se2 = va + vb;
    if (se2 <= 0.0) return a.mean == b.mean ? 1.0 : 0.0;
    double t = (a.mean - b.mean) / std::sqrt(se2);
    double dof = se2 * se2 / (va * va / (a.count - 1) + vb * vb / (b.count - 1));
    boost::math::students_t dist(dof);
    return 2.0 * boost::math::cdf(dist, -std::abs(t));
}

/// Mean pay per ballot over a run; absent when no ballots were bought.
inline std::optional<double> avg_pay_per_ballot(const RunResult& result) {
    if (result.ballots == 0) return std::nullopt;
    return result.total_cost / result.ballots;
}

struct CellResult {
    std::string controller;
    double deadline_min = 0.0;
    SampleStats utility;
    SampleStats accuracy;
    SampleStats cost;
    SampleStats ballots;
    std::optional<double> avg_pay_per_ballot;  // absent when no ballots were bought
    double normalized_utility = 1.0;           // reference maps to 1.0
    double p_value_vs_reference = 1.0;
    bool significant = false;
};

struct ComparisonReport {
    ExperimentSpec spec;
    std::vector<CellResult> cells;

    const CellResult& cell(const std::string& controller, double deadline) const {
        for (const auto& c : cells)
            if (c.controller == controller && c.deadline_min == deadline) return c;
        throw std::out_of_range("ComparisonReport: no such cell");
    }
};

/// Normalizes x against the reference utility u_ref as x / u_ref, so the
/// reference maps to 1.0. Sign convention: when u_ref > 0 larger is better;
/// when u_ref < 0 the ratio flips, so *smaller* normalized values are better.
/// Ordering is always recoverable by multiplying by sign(u_ref), which
/// run_suite asserts.
inline double normalize_utility(double x, double u_ref) {
    if (u_ref == 0.0) return x == 0.0 ? 1.0 : x;
    return x / u_ref;
}

inline ComparisonReport run_suite(const ExperimentSpec& spec, SimContext& ctx) {
    spec.validate();
    ComparisonReport report;
    report.spec = spec;

    for (double deadline : spec.deadlines_min) {
        SimConfig cfg = spec.base;
        cfg.tau_max_min = deadline;

        // Planners are per-deadline; they are shared across seeds.
        std::optional<OctopusPlanner> octo;
        std::map<int, GaoPlanner> gao;
        for (const auto& c : spec.controllers) {
            if (c.kind == ControllerKind::Octopus && !octo) {
                cfg.seed = spec.seeds.front();
                octo = build_octopus_planner(cfg, ctx);
            }
            if (c.kind == ControllerKind::GaoFixed && !gao.count(c.gao_r)) {
                cfg.seed = spec.seeds.front();
                gao.emplace(c.gao_r, build_gao_planner(cfg, c.gao_r));
            }
        }

        std::vector<CellResult> row;
        for (const auto& c : spec.controllers) {
            std::vector<double> util, acc, cost, ballots;
            long total_ballots = 0;
            double total_cost = 0.0;
            for (auto seed : spec.seeds) {
                cfg.seed = seed;
                RunResult r = run_episode(cfg, c, ctx, octo ? &*octo : nullptr,
                                          c.kind == ControllerKind::GaoFixed ? &gao.at(c.gao_r)
                                                                             : nullptr);
                util.push_back(r.utility);
                acc.push_back(r.accuracy);
                cost.push_back(r.total_cost);
                ballots.push_back(static_cast<double>(r.ballots));
                total_ballots += r.ballots;
                total_cost += r.total_cost;
            }
            CellResult cell;
            cell.controller = c.name();
            cell.deadline_min = deadline;
            cell.utility = SampleStats::of(util);
            cell.accuracy = SampleStats::of(acc);
            cell.cost = SampleStats::of(cost);
            cell.ballots = SampleStats::of(ballots);
            if (total_ballots > 0) cell.avg_pay_per_ballot = total_cost / total_ballots;
            row.push_back(std::move(cell));
        }

        const SampleStats ref = row.front().utility;
        const double sign = ref.mean < 0.0 ? -1.0 : 1.0;
        for (auto& cell : row) {
            cell.normalized_utility = normalize_utility(cell.utility.mean, ref.mean);
            if (&cell != &row.front()) {
                cell.p_value_vs_reference = welch_p_value(ref, cell.utility);
                cell.significant = cell.p_value_vs_reference < spec.alpha;
            }
            report.cells.push_back(cell);
        }
        // Ordering must be recoverable from the normalized values.
        for (std::size_t i = 0; i + 1 < row.size(); ++i)
            for (std::size_t j = i + 1; j < row.size(); ++j)
                if ((row[i].utility.mean < row[j].utility.mean) !=
                    (sign * row[i].normalized_utility < sign * row[j].normalized_utility) &&
                    row[i].utility.mean != row[j].utility.mean)
                    throw std::logic_error("run_suite: normalization broke utility ordering");
    }
    return report;
}

namespace detail {

inline std::string fmt(double x) {
    std::ostringstream os;
    os.precision(10);
    os << x;
    return os.str();
}

}  // namespace detail

/// Writes the report as plotting-friendly CSVs into `dir`:
///   utility_vs_deadline.csv, accuracy_vs_deadline.csv, cost_vs_deadline.csv,
///   significance.csv
inline void emit_plots_data(const ComparisonReport& report, const std::string& dir) {
    auto open = [&](const std::string& name) {
        std::ofstream out(dir + "/" + name);
        if (!out) throw std::runtime_error("emit_plots_data: cannot write " + dir + "/" + name);
        return out;
    };
    {
        auto out = open("utility_vs_deadline.csv");
        out << "controller,deadline_min,mean_utility,normalized_utility,stddev,count\n";
        for (const auto& c : report.cells)
            out << c.controller << ',' << detail::fmt(c.deadline_min) << ','
                << detail::fmt(c.utility.mean) << ',' << detail::fmt(c.normalized_utility) << ','
                << detail::fmt(std::sqrt(c.utility.variance)) << ',' << c.utility.count << '\n';
    }
    {
        auto out = open("accuracy_vs_deadline.csv");
        out << "controller,deadline_min,mean_accuracy,stddev\n";
        for (const auto& c : report.cells)
            out << c.controller << ',' << detail::fmt(c.deadline_min) << ','
                << detail::fmt(c.accuracy.mean) << ',' << detail::fmt(std::sqrt(c.accuracy.variance))
                << '\n';
    }
    {
        auto out = open("cost_vs_deadline.csv");
        out << "controller,deadline_min,mean_cost,mean_ballots,avg_pay_per_ballot\n";
        for (const auto& c : report.cells) {
            out << c.controller << ',' << detail::fmt(c.deadline_min) << ','
                << detail::fmt(c.cost.mean) << ',' << detail::fmt(c.ballots.mean) << ',';
            if (c.avg_pay_per_ballot) out << detail::fmt(*c.avg_pay_per_ballot);
            out << '\n';
        }
    }
    {
        auto out = open("significance.csv");
        out << "controller,deadline_min,p_value_vs_reference,significant\n";
        for (const auto& c : report.cells)
            out << c.controller << ',' << detail::fmt(c.deadline_min) << ','
                << detail::fmt(c.p_value_vs_reference) << ',' << (c.significant ? 1 : 0) << '\n';
    }
}

}  // namespace octopus
