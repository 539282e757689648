// Command-line front end: policy building, simulation sweeps, trace replay,
// report emission, and policy inspection.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "octopus/experiments.hpp"
#include "octopus/io.hpp"

namespace fs = std::filesystem;
using namespace octopus;

namespace {

ControllerSpec parse_controller(const std::string& name, const SimConfig& cfg) {
    ControllerSpec c;
    if (name == "octopus") {
        c.kind = ControllerKind::Octopus;
        c.selector = SelectorKind::Greedy;
    } else if (name == "octopus-random") {
        c.kind = ControllerKind::Octopus;
        c.selector = SelectorKind::Random;
    } else if (name == "octopus-random-robin") {
        c.kind = ControllerKind::Octopus;
        c.selector = SelectorKind::RandomRobin;
    } else if (name.rfind("static-pay-", 0) == 0) {
        c.kind = ControllerKind::StaticPay;
        c.static_pay_idx = std::stoi(name.substr(11)) - 1;
        if (c.static_pay_idx < 0 || c.static_pay_idx >= static_cast<int>(cfg.quality.pay_grid.size()))
            throw CLI::ValidationError("controller", "static pay level out of range: " + name);
        c.selector = cfg.selector;
    } else if (name.rfind("gao-", 0) == 0) {
        c.kind = ControllerKind::GaoFixed;
        c.gao_r = std::stoi(name.substr(4));
        if (c.gao_r < 1) throw CLI::ValidationError("controller", "gao r must be >= 1");
    } else {
        throw CLI::ValidationError("controller", "unknown controller: " + name);
    }
    return c;
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(tok);
    return out;
}

nlohmann::json report_to_json(const ComparisonReport& report) {
    nlohmann::json j;
    j["alpha"] = report.spec.alpha;
    auto& cells = j["cells"] = nlohmann::json::array();
    for (const auto& c : report.cells) {
        nlohmann::json jc;
        jc["controller"] = c.controller;
        jc["deadline_min"] = c.deadline_min;
        jc["utility_mean"] = c.utility.mean;
        jc["utility_var"] = c.utility.variance;
        jc["accuracy_mean"] = c.accuracy.mean;
        jc["accuracy_var"] = c.accuracy.variance;
        jc["cost_mean"] = c.cost.mean;
        jc["cost_var"] = c.cost.variance;
        jc["ballots_mean"] = c.ballots.mean;
        jc["count"] = c.utility.count;
        if (c.avg_pay_per_ballot) jc["avg_pay_per_ballot"] = *c.avg_pay_per_ballot;
        else jc["avg_pay_per_ballot"] = nullptr;
        jc["normalized_utility"] = c.normalized_utility;
        jc["p_value_vs_reference"] = c.p_value_vs_reference;
        jc["significant"] = c.significant;
        cells.push_back(jc);
    }
    return j;
}

ComparisonReport report_from_json(const nlohmann::json& j) {
    ComparisonReport report;
    report.spec.alpha = j.value("alpha", 0.05);
    for (const auto& jc : j.at("cells")) {
        CellResult c;
        c.controller = jc.at("controller").get<std::string>();
        c.deadline_min = jc.at("deadline_min").get<double>();
        c.utility.mean = jc.at("utility_mean").get<double>();
        c.utility.variance = jc.at("utility_var").get<double>();
        c.utility.count = jc.at("count").get<int>();
        c.accuracy.mean = jc.at("accuracy_mean").get<double>();
        c.accuracy.variance = jc.value("accuracy_var", 0.0);
        c.accuracy.count = c.utility.count;
        c.cost.mean = jc.at("cost_mean").get<double>();
        c.cost.variance = jc.value("cost_var", 0.0);
        c.cost.count = c.utility.count;
        c.ballots.mean = jc.at("ballots_mean").get<double>();
        c.ballots.count = c.utility.count;
        if (!jc.at("avg_pay_per_ballot").is_null())
            c.avg_pay_per_ballot = jc.at("avg_pay_per_ballot").get<double>();
        c.normalized_utility = jc.at("normalized_utility").get<double>();
        c.p_value_vs_reference = jc.at("p_value_vs_reference").get<double>();
        c.significant = jc.at("significant").get<bool>();
        report.cells.push_back(c);
    }
    return report;
}

void write_result(const RunResult& res, const std::string& dir, const std::string& stem) {
    fs::create_directories(dir);
    {
        std::ofstream out(dir + "/" + stem + ".json");
        out << res.to_json().dump(2) << "\n";
    }
    write_epoch_csv(res, dir + "/" + stem + "_epochs.csv");
    write_trace_csv(res.trace, dir + "/" + stem + "_trace.csv");
}

/// Loads the planner from the cache dir when present; otherwise builds it
/// (warning on stderr) and saves it back if a cache dir was named.
OctopusPlanner obtain_planner(const SimConfig& cfg, SimContext& ctx, const std::string& cache_dir) {
    if (!cache_dir.empty() && fs::exists(cache_dir + "/policy.bin")) {
        try {
            return load_planner(cache_dir, cfg);
        } catch (const std::exception& e) {
            std::cerr << "warning: cache at " << cache_dir << " unusable (" << e.what()
                      << "); rebuilding\n";
        }
    } else if (!cache_dir.empty()) {
        std::cerr << "warning: no policy cache at " << cache_dir << "; building\n";
    }
    OctopusPlanner p = build_octopus_planner(cfg, ctx);
    if (!cache_dir.empty()) save_planner(p, cache_dir);
    return p;
}

std::vector<int> read_gold(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open gold labels: " + path);
    std::vector<int> gold;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        gold.push_back(std::stoi(line));
    }
    return gold;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"octopus: batch crowd-task pricing, routing, and stopping"};
    app.require_subcommand(1);

    std::string config_path, out_dir = ".", cache_dir, trace_path, gold_path, report_path;
    std::string controllers_arg =
        "octopus,static-pay-1,static-pay-2,static-pay-3,static-pay-4,static-pay-5,static-pay-6";
    std::string controller_arg = "octopus";
    std::string deadlines_arg;
    std::uint64_t seed_base = 1;
    int seed_count = 10;
    int jobs = 1;

    auto* plan = app.add_subcommand("plan", "build pricing policy tables from a config file");
    plan->add_option("--config", config_path, "SimConfig key=value file")->required();
    plan->add_option("--out", out_dir, "cache directory to write");

    auto* simulate = app.add_subcommand("simulate", "run a simulation suite");
    simulate->add_option("--config", config_path, "SimConfig key=value file")->required();
    simulate->add_option("--out", out_dir, "output directory");
    simulate->add_option("--cache", cache_dir, "policy cache dir (built if missing, with a warning)");
    simulate->add_option("--controllers", controllers_arg, "comma-separated controller list");
    simulate->add_option("--deadlines", deadlines_arg, "comma-separated deadlines in minutes");
    simulate->add_option("--seed", seed_base, "first seed");
    simulate->add_option("--seeds", seed_count, "seeds per cell");
    simulate->add_option("--jobs", jobs, "worker count (episodes are sequential per cell)");

    auto* replay_cmd = app.add_subcommand("replay", "replay a recorded ballot trace");
    replay_cmd->add_option("--config", config_path, "SimConfig key=value file")->required();
    replay_cmd->add_option("--trace", trace_path, "BallotTrace CSV")->required();
    replay_cmd->add_option("--gold", gold_path, "gold labels, one 0/1 per line")->required();
    replay_cmd->add_option("--controller", controller_arg, "controller name");
    replay_cmd->add_option("--cache", cache_dir, "policy cache dir");
    replay_cmd->add_option("--out", out_dir, "output directory");
    replay_cmd->add_option("--seed", seed_base, "first resampling seed");
    replay_cmd->add_option("--seeds", seed_count, "number of resampled trajectories");

    auto* report_cmd = app.add_subcommand("report", "emit plot CSVs from a saved report JSON");
    report_cmd->add_option("--in", report_path, "report.json from a simulate run")->required();
    report_cmd->add_option("--out", out_dir, "output directory");

    auto* policy_cmd = app.add_subcommand("policy", "policy table utilities");
    policy_cmd->require_subcommand(1);
    auto* inspect = policy_cmd->add_subcommand("inspect", "dump per-state actions as CSV");
    inspect->add_option("--config", config_path, "SimConfig key=value file")->required();
    inspect->add_option("--cache", cache_dir, "policy cache dir (built if missing)");
    inspect->add_option("--out", out_dir, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (plan->parsed()) {
            SimConfig cfg = read_sim_config(config_path);
            SimContext ctx(cfg.quality);
            OctopusPlanner p = build_octopus_planner(cfg, ctx);
            save_planner(p, out_dir);
            std::cout << "policy cache written to " << out_dir << "\n";
            return 0;
        }

        if (simulate->parsed()) {
            SimConfig cfg = read_sim_config(config_path);
            SimContext ctx(cfg.quality);

            ExperimentSpec spec;
            spec.base = cfg;
            if (deadlines_arg.empty()) {
                spec.deadlines_min = {cfg.tau_max_min};
            } else {
                for (const auto& d : split_csv(deadlines_arg))
                    spec.deadlines_min.push_back(std::stod(d));
            }
            for (int i = 0; i < seed_count; ++i) spec.seeds.push_back(seed_base + i);
            for (const auto& name : split_csv(controllers_arg))
                spec.controllers.push_back(parse_controller(name, cfg));

            ComparisonReport rep = run_suite(spec, ctx);
            fs::create_directories(out_dir);
            {
                std::ofstream out(out_dir + "/report.json");
                out << report_to_json(rep).dump(2) << "\n";
            }
            emit_plots_data(rep, out_dir);
            std::cout << "suite complete: " << rep.cells.size() << " cells -> " << out_dir << "\n";
            return 0;
        }

        if (replay_cmd->parsed()) {
            SimConfig cfg = read_sim_config(config_path);
            SimContext ctx(cfg.quality);
            BallotTrace trace = read_trace_csv_file(trace_path);
            std::vector<int> gold = read_gold(gold_path);
            ControllerSpec c = parse_controller(controller_arg, cfg);
            std::optional<OctopusPlanner> octo;
            std::optional<GaoPlanner> gao;
            if (c.kind == ControllerKind::Octopus) octo = obtain_planner(cfg, ctx, cache_dir);
            if (c.kind == ControllerKind::GaoFixed) gao = build_gao_planner(cfg, c.gao_r);
            fs::create_directories(out_dir);
            for (int i = 0; i < seed_count; ++i) {
                SimConfig run_cfg = cfg;
                run_cfg.seed = seed_base + i;
                RunResult res = replay_episode(trace, gold, run_cfg, c, ctx,
                                               octo ? &*octo : nullptr, gao ? &*gao : nullptr);
                write_result(res, out_dir, "replay_" + std::to_string(run_cfg.seed));
            }
            std::cout << seed_count << " replay trajectories -> " << out_dir << "\n";
            return 0;
        }

        if (report_cmd->parsed()) {
            std::ifstream in(report_path);
            if (!in) throw std::runtime_error("cannot open " + report_path);
            nlohmann::json j;
            in >> j;
            ComparisonReport rep = report_from_json(j);
            fs::create_directories(out_dir);
            emit_plots_data(rep, out_dir);
            std::cout << "plot CSVs -> " << out_dir << "\n";
            return 0;
        }

        if (inspect->parsed()) {
            SimConfig cfg = read_sim_config(config_path);
            SimContext ctx(cfg.quality);
            OctopusPlanner p = obtain_planner(cfg, ctx, cache_dir);
            fs::create_directories(out_dir);
            std::ofstream out(out_dir + "/policy.csv");
            out.precision(17);
            out << "nu_bar,theta,tau,pay,action,value\n";
            const CostGrids& g = p.grids;
            for (int e = 0; e <= g.epochs(); ++e)
                for (int i = 0; i < g.nu_levels; ++i)
                    for (int j = 0; j < g.theta_levels; ++j)
                        for (int c = 0; c < g.pay_levels; ++c) {
                            AggregateState s{i, j, e, c};
                            out << g.nu_value(i) << ',' << g.theta_value(j) << ','
                                << e * g.delta_tau_min << ',' << cfg.quality.pay_grid[c] << ','
                                << pay_action_name(p.policy.action_at(s)) << ','
                                << p.policy.value_at(s) << '\n';
                        }
            std::cout << "policy table -> " << out_dir << "/policy.csv\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
