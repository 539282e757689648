#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "octopus/stop_policy.hpp"

namespace octopus {

enum class LeafKind { None, PolicyStopped, ProbabilityPruned, DepthCapped };

/// Binary tree of future ballot outcomes under the stopping policy.
/// Internal nodes always have both children; child path probabilities sum to
/// the parent's.
struct TrajectoryTree {
    struct Node {
        double path_prob = 1.0;
        int depth = 0;
        LeafKind leaf = LeafKind::None;
        int child[2] = {-1, -1};  // indexed by ballot outcome
    };
    std::vector<Node> nodes;  // nodes[0] is the root

    double expected_depth() const {
        double s = 0.0;
        for (const auto& n : nodes)
            if (n.leaf != LeafKind::None) s += n.path_prob * n.depth;
        return s;
    }

    double leaf_prob_mass() const {
        double s = 0.0;
        for (const auto& n : nodes)
            if (n.leaf != LeafKind::None) s += n.path_prob;
        return s;
    }
};

/// Expands the outcome tree from `b` under `policy` at `pay`. Outcome
/// probabilities integrate the average worker over the current difficulty
/// marginal. A node becomes a leaf when the policy stops, when its path
/// probability drops below the configured threshold, or at the depth cap.
inline TrajectoryTree build_trajectory_tree(const BeliefState& b, const StopPolicy& policy,
                                            double pay) {
    const QualityConfig& cfg = policy.config();
    TrajectoryTree tree;

    struct Item {
        BeliefState belief;
        int node;
    };
    std::vector<Item> stack;
    tree.nodes.push_back({1.0, 0, LeafKind::None, {-1, -1}});
    stack.push_back({b, 0});

    while (!stack.empty()) {
        Item it = std::move(stack.back());
        stack.pop_back();
        TrajectoryTree::Node& node = tree.nodes[it.node];
        if (policy.decide(it.belief, pay) == TaskAction::MarkComplete) {
            node.leaf = LeafKind::PolicyStopped;
            continue;
        }
        if (node.path_prob < cfg.prob_threshold) {
            node.leaf = LeafKind::ProbabilityPruned;
            continue;
        }
        if (node.depth >= cfg.tree_max_depth) {
            node.leaf = LeafKind::DepthCapped;
            continue;
        }
        const double pp = node.path_prob;
        const int depth = node.depth;
        for (int o = 0; o < 2; ++o) {
            double p = it.belief.predictive(o, cfg.mean_gamma);
            int idx = static_cast<int>(tree.nodes.size());
            tree.nodes.push_back({pp * p, depth + 1, LeafKind::None, {-1, -1}});
            tree.nodes[it.node].child[o] = idx;
            stack.push_back({it.belief.updated(o, cfg.mean_gamma, pay), idx});
        }
    }
    return tree;
}

/// Expected ballots until the policy stops, from belief b at `pay`.
/// Pruned and depth-capped leaves contribute their depth, so the estimate is a
/// lower bound with bias at most threshold * depth cap.
inline double expected_ballots(const BeliefState& b, const StopPolicy& policy, double pay) {
    return build_trajectory_tree(b, policy, pay).expected_depth();
}

/// Memoizing wrapper around expected_ballots, keyed on beliefs quantized the
/// same way as the stop policy's cache. Live batches revisit near-identical
/// beliefs constantly, so this turns per-epoch theta recomputation from tree
/// builds into hash lookups.
class ThetaEstimator {
  public:
    explicit ThetaEstimator(const StopPolicy& policy) : policy_(policy) {}

    double theta(const BeliefState& b, double pay) const {
        const std::uint64_t key = make_key(b, pay);
        {
            std::lock_guard<std::mutex> lock(mu_);
            auto it = cache_.find(key);
            if (it != cache_.end()) return it->second;
        }
        double t = expected_ballots(b, policy_, pay);
        std::lock_guard<std::mutex> lock(mu_);
        cache_.emplace(key, t);
        return t;
    }

    template <class BeliefRange>
    double batch_theta(const BeliefRange& beliefs, double pay) const {
        double s = 0.0;
        for (const auto& b : beliefs) s += theta(b, pay);
        return s;
    }

  private:
    static std::uint64_t make_key(const BeliefState& b, double pay) {
        std::uint64_t v = static_cast<std::uint64_t>(std::llround(b.answer_marginal(1) * 1000.0));
        std::uint64_t d = static_cast<std::uint64_t>(std::llround(b.difficulty_mean() * 1000.0));
        std::uint64_t p = static_cast<std::uint64_t>(std::llround(pay * 1e6));
        return (v << 42) ^ (d << 21) ^ p;
    }

    const StopPolicy& policy_;
    mutable std::mutex mu_;
    mutable std::unordered_map<std::uint64_t, double> cache_;
};

/// Sum of per-task expected ballots at the current pay.
template <class BeliefRange>
double batch_theta(const BeliefRange& beliefs, const StopPolicy& policy, double pay) {
    double s = 0.0;
    for (const auto& b : beliefs) s += expected_ballots(b, policy, pay);
    return s;
}

/// theta~(nu, c): expected remaining ballots for a task at quality nu under
/// pay level c, precomputed on a (G+1)-point nu grid for every pay level.
/// Queries use piecewise-constant interpolation on [j/G, (j+1)/G).
class ThetaTable {
  public:
    ThetaTable() = default;
    ThetaTable(int resolution, int pay_levels)
        : g_(resolution), k_(pay_levels), values_((resolution + 1) * pay_levels, 0.0) {}

    int resolution() const { return g_; }
    int pay_levels() const { return k_; }

    double& at(int nu_idx, int pay_idx) { return values_[nu_idx * k_ + pay_idx]; }
    double at(int nu_idx, int pay_idx) const { return values_[nu_idx * k_ + pay_idx]; }
    double nu_value(int nu_idx) const { return static_cast<double>(nu_idx) / g_; }

    double query(double nu, int pay_idx) const {
        if (!(nu >= 0.0 && nu <= 1.0)) throw std::invalid_argument("ThetaTable::query: nu out of [0,1]");
        int j = std::min(static_cast<int>(std::floor(nu * g_)), g_);
        return at(j, pay_idx);
    }

    double max_at_nu(int nu_idx) const {
        double m = 0.0;
        for (int c = 0; c < k_; ++c) m = std::max(m, at(nu_idx, c));
        return m;
    }

  private:
    int g_ = 0;
    int k_ = 0;
    std::vector<double> values_;
};

/// Fills the theta~ grid by initiating a belief with confidence v = 0.5(nu+1)
/// (mass on answer 1, difficulty marginal = prior) and running FrontierFinding
/// at every pay level.
inline ThetaTable build_theta_table(const StopPolicy& policy, const DifficultyPrior& prior,
                                    int resolution = 40) {
    if (resolution < 10) throw std::invalid_argument("build_theta_table: resolution must be >= 10");
    const auto& cfg = policy.config();
    ThetaTable table(resolution, static_cast<int>(cfg.pay_grid.size()));
    for (int j = 0; j <= resolution; ++j) {
        double nu = static_cast<double>(j) / resolution;
        BeliefState b = BeliefState::with_confidence(prior, 0.5 * (nu + 1.0));
        for (std::size_t c = 0; c < cfg.pay_grid.size(); ++c)
            table.at(j, static_cast<int>(c)) = expected_ballots(b, policy, cfg.pay_grid[c]);
    }
    return table;
}

inline const char* kThetaTableVersion = "octopus-theta-table v1";

inline void write_theta_table_csv(const ThetaTable& t, std::ostream& out) {
    out << "# " << kThetaTableVersion << " G=" << t.resolution() << " K=" << t.pay_levels() << "\n";
    out << "nu,pay_level,theta\n";
    out.precision(17);
    for (int j = 0; j <= t.resolution(); ++j)
        for (int c = 0; c < t.pay_levels(); ++c)
            out << t.nu_value(j) << ',' << c << ',' << t.at(j, c) << "\n";
}

inline void write_theta_table_csv(const ThetaTable& t, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    write_theta_table_csv(t, f);
}

inline ThetaTable read_theta_table_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("# " + std::string(kThetaTableVersion), 0) != 0)
        throw std::runtime_error("theta table cache: bad or missing version line");
    int g = -1, k = -1;
    {
        std::istringstream ss(line);
        std::string tok;
        while (ss >> tok) {
            if (tok.rfind("G=", 0) == 0) g = std::stoi(tok.substr(2));
            if (tok.rfind("K=", 0) == 0) k = std::stoi(tok.substr(2));
        }
    }
    if (g < 10 || k < 1) throw std::runtime_error("theta table cache: bad dimensions");
    std::getline(in, line);  // column header
    ThetaTable t(g, k);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string f1, f2, f3;
        std::getline(ss, f1, ',');
        std::getline(ss, f2, ',');
        std::getline(ss, f3, ',');
        int j = static_cast<int>(std::llround(std::stod(f1) * g));
        t.at(j, std::stoi(f2)) = std::stod(f3);
    }
    return t;
}

inline ThetaTable read_theta_table_csv_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open: " + path);
    return read_theta_table_csv(f);
}

}  // namespace octopus
