#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "octopus/sim.hpp"

namespace octopus {

namespace detail {

inline std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stod(trim(tok)));
    return out;
}

inline std::string join(const std::vector<double>& xs) {
    std::ostringstream os;
    os.precision(17);
    for (std::size_t i = 0; i < xs.size(); ++i) os << (i ? "," : "") << xs[i];
    return os.str();
}

}  // namespace detail

/// Reads a SimConfig from a `key = value` text file. Lines starting with `#`
/// and blank lines are ignored. Unknown keys are an error (typo protection).
inline SimConfig read_sim_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_sim_config: cannot open " + path);
    SimConfig cfg;
    bool have_rates = false;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = detail::trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto eq = t.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected key = value");
        std::string key = detail::trim(t.substr(0, eq));
        std::string val = detail::trim(t.substr(eq + 1));
        try {
            if (key == "n") cfg.n = std::stoi(val);
            else if (key == "prior") {
                if (val == "uniform") cfg.prior = DifficultyPrior::uniform();
                else {
                    auto ab = detail::parse_list(val);
                    if (ab.size() != 2) throw std::runtime_error("prior needs 'uniform' or 'a,b'");
                    cfg.prior = DifficultyPrior::beta(ab[0], ab[1]);
                }
            }
            else if (key == "prior_bins") cfg.prior.bins = std::stoi(val);
            else if (key == "pool_shape") cfg.pool.shape = std::stod(val);
            else if (key == "pool_scale") cfg.pool.scale = std::stod(val);
            else if (key == "penalty") cfg.quality.penalty = std::stod(val);
            else if (key == "pay_grid") cfg.quality.pay_grid = detail::parse_list(val);
            else if (key == "mean_gamma") cfg.quality.mean_gamma = std::stod(val);
            else if (key == "lookahead_depth") cfg.quality.lookahead_depth = std::stoi(val);
            else if (key == "prob_threshold") cfg.quality.prob_threshold = std::stod(val);
            else if (key == "tree_max_depth") cfg.quality.tree_max_depth = std::stoi(val);
            else if (key == "rates") { cfg.rates_per_epoch = detail::parse_list(val); have_rates = true; }
            else if (key == "delta_tau_min") cfg.delta_tau_min = std::stod(val);
            else if (key == "tau_max_min") cfg.tau_max_min = std::stod(val);
            else if (key == "seed") cfg.seed = std::stoull(val);
            else if (key == "selector") {
                if (val == "greedy") cfg.selector = SelectorKind::Greedy;
                else if (val == "random") cfg.selector = SelectorKind::Random;
                else if (val == "random-robin") cfg.selector = SelectorKind::RandomRobin;
                else throw std::runtime_error("unknown selector '" + val + "'");
            }
            else if (key == "synchronize") cfg.synchronize_each_epoch = (val == "1" || val == "true");
            else if (key == "nu_levels") cfg.nu_levels = std::stoi(val);
            else if (key == "delta_theta") cfg.delta_theta = std::stod(val);
            else if (key == "rollout_repeats") cfg.rollout.repeats = std::stoi(val);
            else if (key == "rollout_lambda") cfg.rollout.lambda_recon = std::stod(val);
            else if (key == "rollout_seed") cfg.rollout.seed = std::stoull(val);
            else throw std::runtime_error("unknown key '" + key + "'");
        } catch (const std::exception& e) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (!have_rates)
        cfg.rates_per_epoch = SimConfig::default_rates(
            cfg.n, cfg.delta_tau_min, static_cast<int>(cfg.quality.pay_grid.size()));
    return cfg;
}

inline void write_sim_config(const SimConfig& cfg, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_sim_config: cannot write " + path);
    out.precision(17);
    out << "n = " << cfg.n << "\n";
    if (cfg.prior.kind == DifficultyPrior::Kind::Uniform) out << "prior = uniform\n";
    else out << "prior = " << cfg.prior.a << "," << cfg.prior.b << "\n";
    out << "prior_bins = " << cfg.prior.bins << "\n";
    out << "pool_shape = " << cfg.pool.shape << "\n";
    out << "pool_scale = " << cfg.pool.scale << "\n";
    out << "penalty = " << cfg.quality.penalty << "\n";
    out << "pay_grid = " << detail::join(cfg.quality.pay_grid) << "\n";
    out << "mean_gamma = " << cfg.quality.mean_gamma << "\n";
    out << "lookahead_depth = " << cfg.quality.lookahead_depth << "\n";
    out << "prob_threshold = " << cfg.quality.prob_threshold << "\n";
    out << "tree_max_depth = " << cfg.quality.tree_max_depth << "\n";
    out << "rates = " << detail::join(cfg.rates_per_epoch) << "\n";
    out << "delta_tau_min = " << cfg.delta_tau_min << "\n";
    out << "tau_max_min = " << cfg.tau_max_min << "\n";
    out << "seed = " << cfg.seed << "\n";
    out << "selector = "
        << (cfg.selector == SelectorKind::Greedy ? "greedy"
            : cfg.selector == SelectorKind::Random ? "random" : "random-robin")
        << "\n";
    out << "synchronize = " << (cfg.synchronize_each_epoch ? 1 : 0) << "\n";
    out << "nu_levels = " << cfg.nu_levels << "\n";
    out << "delta_theta = " << cfg.delta_theta << "\n";
    out << "rollout_repeats = " << cfg.rollout.repeats << "\n";
    out << "rollout_lambda = " << cfg.rollout.lambda_recon << "\n";
    out << "rollout_seed = " << cfg.rollout.seed << "\n";
}

/// Per-epoch CSV emitted alongside the RunResult JSON.
inline void write_epoch_csv(const RunResult& res, std::ostream& out) {
    out.precision(17);
    out << "epoch,tau_min,pay,ballots,nu_bar_tracked,nu_bar_true,theta_tracked,theta_true,cum_cost\n";
    for (const auto& e : res.epochs)
        out << e.epoch << ',' << e.tau_min << ',' << e.pay << ',' << e.ballots << ','
            << e.nu_bar_tracked << ',' << e.nu_bar_true << ',' << e.theta_tracked << ','
            << e.theta_true << ',' << e.cum_cost << '\n';
}

inline void write_epoch_csv(const RunResult& res, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_epoch_csv: cannot write " + path);
    write_epoch_csv(res, out);
}

// ---- versioned policy cache directory ----

inline constexpr const char* kCacheVersion = "octopus-cache v1";

namespace detail {

inline void put_doubles(std::ostream& out, const std::vector<double>& xs) {
    std::uint64_t m = xs.size();
    out.write(reinterpret_cast<const char*>(&m), sizeof m);
    out.write(reinterpret_cast<const char*>(xs.data()), static_cast<std::streamsize>(m * sizeof(double)));
}

inline std::vector<double> get_doubles(std::istream& in) {
    std::uint64_t m = 0;
    in.read(reinterpret_cast<char*>(&m), sizeof m);
    std::vector<double> xs(m);
    in.read(reinterpret_cast<char*>(xs.data()), static_cast<std::streamsize>(m * sizeof(double)));
    if (!in) throw std::runtime_error("policy cache: truncated double block");
    return xs;
}

}  // namespace detail

/// Saves the pricing artifacts (grids, theta table, nu cache, value/action
/// tables) into `dir`. The version header guards against format drift.
inline void save_planner(const OctopusPlanner& p, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    {
        write_theta_table_csv(p.theta_table, dir + "/theta_table.csv");
    }
    std::ofstream out(dir + "/policy.bin", std::ios::binary);
    if (!out) throw std::runtime_error("save_planner: cannot write policy.bin");
    std::string header = std::string(kCacheVersion) + "\n";
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    const CostGrids& g = p.grids;
    std::int32_t dims[5] = {g.nu_levels, g.theta_levels, g.pay_levels,
                            static_cast<std::int32_t>(g.epochs()),
                            static_cast<std::int32_t>(p.nu_cache.buckets())};
    out.write(reinterpret_cast<const char*>(dims), sizeof dims);
    double scal[3] = {g.delta_theta, g.delta_tau_min, g.tau_max_min};
    out.write(reinterpret_cast<const char*>(scal), sizeof scal);
    detail::put_doubles(out, p.theta0);
    // nu cache rows, flattened as (index, prob) pairs per row
    for (int i = 0; i < g.nu_levels; ++i)
        for (int b = 0; b < p.nu_cache.buckets(); ++b) {
            const auto& row = p.nu_cache.row(i, b);
            std::uint32_t m = static_cast<std::uint32_t>(row.size());
            out.write(reinterpret_cast<const char*>(&m), sizeof m);
            for (const auto& [idx, pr] : row) {
                std::int32_t ii = idx;
                out.write(reinterpret_cast<const char*>(&ii), sizeof ii);
                out.write(reinterpret_cast<const char*>(&pr), sizeof pr);
            }
        }
    detail::put_doubles(out, p.policy.raw_values());
    const auto& acts = p.policy.raw_actions();
    std::uint64_t m = acts.size();
    out.write(reinterpret_cast<const char*>(&m), sizeof m);
    out.write(reinterpret_cast<const char*>(acts.data()), static_cast<std::streamsize>(m));
    if (!out) throw std::runtime_error("save_planner: write failed");
}

/// Loads artifacts written by save_planner. The arrival-rate completion model
/// is rebuilt from the config (it is derived data, not cached).
inline OctopusPlanner load_planner(const std::string& dir, const SimConfig& cfg) {
    OctopusPlanner p;
    {
        std::ifstream in(dir + "/theta_table.csv");
        if (!in) throw std::runtime_error("load_planner: missing theta_table.csv in " + dir);
        p.theta_table = read_theta_table_csv(in);
    }
    std::ifstream in(dir + "/policy.bin", std::ios::binary);
    if (!in) throw std::runtime_error("load_planner: missing policy.bin in " + dir);
    std::string header;
    std::getline(in, header);
    if (header != kCacheVersion)
        throw std::runtime_error("load_planner: cache version mismatch in " + dir);
    std::int32_t dims[5];
    in.read(reinterpret_cast<char*>(dims), sizeof dims);
    double scal[3];
    in.read(reinterpret_cast<char*>(scal), sizeof scal);
    if (!in) throw std::runtime_error("load_planner: truncated header");
    p.grids.nu_levels = dims[0];
    p.grids.theta_levels = dims[1];
    p.grids.pay_levels = dims[2];
    p.grids.delta_theta = scal[0];
    p.grids.delta_tau_min = scal[1];
    p.grids.tau_max_min = scal[2];
    p.grids.validate();
    if (p.grids.epochs() != dims[3]) throw std::runtime_error("load_planner: epoch count mismatch");
    p.theta0 = detail::get_doubles(in);
    const int buckets = dims[4];
    p.nu_cache = NuTransitionCache(p.grids.nu_levels, buckets);
    for (int i = 0; i < p.grids.nu_levels; ++i)
        for (int b = 0; b < buckets; ++b) {
            std::uint32_t m = 0;
            in.read(reinterpret_cast<char*>(&m), sizeof m);
            NuTransitionCache::Row row(m);
            for (std::uint32_t k = 0; k < m; ++k) {
                std::int32_t ii = 0;
                double pr = 0.0;
                in.read(reinterpret_cast<char*>(&ii), sizeof ii);
                in.read(reinterpret_cast<char*>(&pr), sizeof pr);
                row[k] = {ii, pr};
            }
            if (!in) throw std::runtime_error("load_planner: truncated nu cache");
            p.nu_cache.set_row(i, b, std::move(row));
        }
    std::vector<double> values = detail::get_doubles(in);
    std::uint64_t m = 0;
    in.read(reinterpret_cast<char*>(&m), sizeof m);
    std::vector<std::int8_t> actions(m);
    in.read(reinterpret_cast<char*>(actions.data()), static_cast<std::streamsize>(m));
    if (!in) throw std::runtime_error("load_planner: truncated tables");
    p.policy = CostPolicy(p.grids, cfg.quality.pay_grid);
    p.policy.load_tables(std::move(values), std::move(actions));
    p.completion = CompletionModel(cfg.rates_per_epoch, p.grids.delta_theta);
    return p;
}

}  // namespace octopus
