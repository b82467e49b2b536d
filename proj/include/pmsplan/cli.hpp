#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "pmsplan/errors.hpp"
#include "pmsplan/inference.hpp"
#include "pmsplan/io.hpp"
#include "pmsplan/loss.hpp"
#include "pmsplan/planner.hpp"
#include "pmsplan/priors.hpp"
#include "pmsplan/supply_model.hpp"
#include "pmsplan/utility.hpp"

namespace pms {

namespace detail {

// Everything a command needs, assembled from the config and data files.
struct RunContext {
    Config cfg;
    Network network;
    Dataset data;
    PriorSpec prior;
    LossSpec loss;
    double sensitivity = 1.0;
    double specificity = 1.0;
    std::size_t h1 = 5000, h2 = 300;
    std::uint64_t seed = 1;
    double confidence = 0.95;
    long budget = 0;
    long interval = 10;
    bool use_prioritization = false;
    std::optional<SourcingMatrix> sourcing; // set when records exist

    // Average records per tested node; the bootstrap row size for nodes
    // without records.
    std::size_t bootstrap_draws_per_node() const {
        CountMatrices counts = aggregate_traces(data, network);
        long tested = 0, records = 0;
        for (std::size_t a = 0; a < counts.rows; ++a) {
            long row = 0;
            for (std::size_t b = 0; b < counts.cols; ++b) row += counts.n_at(a, b);
            if (row > 0) {
                ++tested;
                records += row;
            }
        }
        if (tested == 0) return 1;
        return static_cast<std::size_t>((records + tested - 1) / tested);
    }
};

inline RunContext load_context(const std::string& data_path, const std::string& config_path,
                               bool needs_sourcing, bool needs_budget) {
    RunContext ctx;
    ctx.cfg = Config::parse_file(config_path);
    ctx.network = network_from_config(ctx.cfg);
    ctx.loss = loss_from_config(ctx.cfg);
    ctx.prior = prior_from_network(ctx.network, ctx.cfg.get_double("prior_variance_nu", 2.0));
    ctx.sensitivity = ctx.cfg.get_double("sensitivity", 1.0);
    ctx.specificity = ctx.cfg.get_double("specificity", 1.0);
    long h1 = ctx.cfg.get_long("h1", 5000);
    long h2 = ctx.cfg.get_long("h2", 300);
    if (h1 < 100) throw config_error("h1 must be >= 100");
    if (h2 < 1) throw config_error("h2 must be >= 1");
    ctx.h1 = static_cast<std::size_t>(h1);
    ctx.h2 = static_cast<std::size_t>(h2);
    ctx.seed = static_cast<std::uint64_t>(ctx.cfg.get_long("seed", 1));
    ctx.confidence = ctx.cfg.get_double("confidence_level", 0.95);
    ctx.use_prioritization = ctx.cfg.get_bool("use_prioritization", false);
    ctx.data = read_records(data_path, ctx.network, ctx.sensitivity, ctx.specificity);

    if (needs_budget) {
        ctx.budget = ctx.cfg.require_long("budget");
        ctx.interval = ctx.cfg.get_long("interval", 10);
        if (ctx.interval < 1) throw config_error("interval must be >= 1");
        if (ctx.budget < ctx.interval) throw config_error("budget must be >= interval");
    }
    if (needs_sourcing) {
        if (ctx.data.empty()) {
            throw data_error("sourcing probabilities need at least one record; "
                             "the records file is empty");
        }
        ctx.sourcing = estimate_sourcing_with_bootstrap(
            ctx.data, ctx.network, ctx.bootstrap_draws_per_node(),
            stream_seed(ctx.seed, stream_subset + 0x10));
        if (ctx.use_prioritization) {
            ctx.loss.prioritization = node_prioritization(ctx.network, *ctx.sourcing);
        }
    }
    return ctx;
}

inline std::filesystem::path prepare_out_dir(const std::string& out_path) {
    std::filesystem::path dir(out_path);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw data_error("cannot create output directory '" + out_path + "'");
    return dir;
}

template <typename Fn>
int run_command(Fn&& fn) {
    try {
        fn();
        return exit_ok;
    } catch (const config_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_input_error;
    } catch (const data_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_input_error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_numeric_error;
    }
}

// Budget grid 0, interval, 2*interval, ..., budget.
inline std::vector<long> budget_grid(long budget, long interval) {
    std::vector<long> grid;
    for (long b = 0; b <= budget; b += interval) grid.push_back(b);
    return grid;
}

// Greedy, uniform, and (data permitting) fixed policy curves for one seed.
struct PolicyRun {
    std::vector<long> budgets;
    std::vector<GreedyStep> greedy;
    std::vector<std::pair<SamplingPlan, UtilityEstimate>> uniform;
    std::vector<std::pair<SamplingPlan, UtilityEstimate>> fixed; // empty if no reference
    std::vector<double> greedy_means, uniform_means, fixed_means;
};

inline PolicyRun run_policies(const RunContext& ctx, std::uint64_t seed) {
    PolicyRun run;
    UtilityEvaluator eval =
        make_evaluator(ctx.data, ctx.network, ctx.loss, *ctx.sourcing, ctx.prior,
                       ctx.sensitivity, ctx.specificity, ctx.h1, ctx.h2, seed, ctx.confidence);
    UtilityFn fn = [&eval](const SamplingPlan& p) { return eval.utility(p); };

    run.greedy = greedy_allocations(ctx.budget, ctx.interval, ctx.network.n_test(), fn);
    run.budgets.push_back(0);
    run.greedy_means.push_back(0.0);
    for (const GreedyStep& step : run.greedy) {
        run.budgets.push_back(step.budget);
        run.greedy_means.push_back(step.utility.mean);
    }

    std::vector<double> reference;
    bool have_reference = false;
    if (!ctx.data.empty()) {
        CountMatrices counts = aggregate_traces(ctx.data, ctx.network);
        reference.assign(counts.rows, 0.0);
        double total = 0.0;
        for (std::size_t a = 0; a < counts.rows; ++a) {
            long row = 0;
            for (std::size_t b = 0; b < counts.cols; ++b) row += counts.n_at(a, b);
            reference[a] = static_cast<double>(row);
            total += reference[a];
        }
        have_reference = total > 0.0;
    }

    for (long b : run.budgets) {
        SamplingPlan up = uniform_plan(b, ctx.network.n_test());
        run.uniform.emplace_back(up, fn(up));
        run.uniform_means.push_back(run.uniform.back().second.mean);
        if (have_reference) {
            SamplingPlan fp = fixed_plan(b, reference);
            run.fixed.emplace_back(fp, fn(fp));
            run.fixed_means.push_back(run.fixed.back().second.mean);
        }
    }
    return run;
}

} // namespace detail

// Sample the posterior for the given data and write the draws plus a per-node
// quantile summary.
inline int cmd_infer(const std::string& data_path, const std::string& config_path,
                     const std::string& out_path) {
    return detail::run_command([&] {
        detail::RunContext ctx = detail::load_context(data_path, config_path,
                                                      /*needs_sourcing=*/false,
                                                      /*needs_budget=*/false);
        auto dir = detail::prepare_out_dir(out_path);
        DrawSet draws = sample_posterior(ctx.data, ctx.network, ctx.prior, ctx.h1, ctx.seed);
        write_draws(dir / "draws.csv", draws, ctx.network);
        write_summary(dir / "summary.csv", draws, ctx.network);
    });
}

// Estimate the utility of every named plan over the budget grid and write
// `plan,budget,mean,ci_low,ci_high`. With `oracle` set, expected losses come
// from the reference estimator (fresh posterior per simulated dataset) instead
// of the fast path; the no-new-data baseline is the same deterministic
// functional of the truth draws either way.
inline int cmd_utility(const std::string& data_path, const std::string& config_path,
                       const std::string& plans_path, const std::string& out_path,
                       bool oracle = false) {
    return detail::run_command([&] {
        detail::RunContext ctx = detail::load_context(data_path, config_path,
                                                      /*needs_sourcing=*/true,
                                                      /*needs_budget=*/true);
        auto plans = read_plans(plans_path, ctx.network);
        auto dir = detail::prepare_out_dir(out_path);
        std::vector<long> grid = detail::budget_grid(ctx.budget, ctx.interval);

        UtilityEvaluator eval = make_evaluator(ctx.data, ctx.network, ctx.loss, *ctx.sourcing,
                                               ctx.prior, ctx.sensitivity, ctx.specificity,
                                               ctx.h1, ctx.h2, ctx.seed, ctx.confidence);

        auto out = detail::open_output(dir / "utility.csv");
        out << "plan,budget,mean,ci_low,ci_high\n";
        for (const auto& [name, weights] : plans) {
            for (long b : grid) {
                SamplingPlan plan = fixed_plan(b, weights);
                UtilityEstimate u;
                if (oracle) {
                    LossEstimate e = expected_loss_mcmc(
                        ctx.data, ctx.network, plan, ctx.loss, *ctx.sourcing, ctx.prior,
                        ctx.sensitivity, ctx.specificity, ctx.h1, ctx.h2, ctx.seed,
                        ctx.confidence);
                    u.mean = eval.baseline_expected_loss() - e.mean;
                    u.ci_low = eval.baseline_expected_loss() - e.ci_high;
                    u.ci_high = eval.baseline_expected_loss() - e.ci_low;
                } else {
                    u = eval.utility(plan);
                }
                out << name << ',' << b << ',' << detail::format_double(u.mean) << ','
                    << detail::format_double(u.ci_low) << ','
                    << detail::format_double(u.ci_high) << '\n';
            }
        }
    });
}

// Run the greedy sweep plus uniform/fixed baselines, write allocations, the
// utility curves, and the budget savings of greedy against each baseline at
// the final budget. With replications > 1 the whole procedure repeats with
// distinct seeds (replication 0 uses the configured seed).
inline int cmd_plan(const std::string& data_path, const std::string& config_path,
                    const std::string& out_path, int replications = 1) {
    return detail::run_command([&] {
        if (replications < 1) throw config_error("replications must be >= 1");
        detail::RunContext ctx = detail::load_context(data_path, config_path,
                                                      /*needs_sourcing=*/true,
                                                      /*needs_budget=*/true);
        auto dir = detail::prepare_out_dir(out_path);

        std::vector<std::tuple<std::string, int, long, SamplingPlan>> alloc_rows;
        auto curves = detail::open_output(dir / "curves.csv");
        curves << "policy,replication,budget,mean,ci_low,ci_high\n";
        auto savings = detail::open_output(dir / "savings.csv");
        savings << "comparison,replication,at_budget,savings\n";

        for (int rep = 0; rep < replications; ++rep) {
            std::uint64_t seed = rep == 0 ? ctx.seed : stream_seed(ctx.seed, 0x5EED0000ULL + rep);
            detail::PolicyRun run = detail::run_policies(ctx, seed);

            auto curve_row = [&](const std::string& policy, long budget,
                                 const UtilityEstimate& u) {
                curves << policy << ',' << rep << ',' << budget << ','
                       << detail::format_double(u.mean) << ',' << detail::format_double(u.ci_low)
                       << ',' << detail::format_double(u.ci_high) << '\n';
            };
            for (const GreedyStep& step : run.greedy) {
                alloc_rows.emplace_back("greedy", rep, step.budget, step.plan);
                curve_row("greedy", step.budget, step.utility);
            }
            for (std::size_t k = 0; k < run.budgets.size(); ++k) {
                const auto& [up, uu] = run.uniform[k];
                alloc_rows.emplace_back("uniform", rep, run.budgets[k], up);
                curve_row("uniform", run.budgets[k], uu);
                if (!run.fixed.empty()) {
                    const auto& [fp, fu] = run.fixed[k];
                    alloc_rows.emplace_back("fixed", rep, run.budgets[k], fp);
                    curve_row("fixed", run.budgets[k], fu);
                }
            }

            auto write_saving = [&](const std::string& label, const std::vector<double>& other) {
                std::optional<long> s =
                    budget_savings(run.budgets, run.greedy_means, other, ctx.budget);
                savings << label << ',' << rep << ',' << ctx.budget << ',';
                if (s) {
                    savings << *s << '\n';
                } else {
                    savings << "not_attained\n";
                }
            };
            write_saving("greedy_vs_uniform", run.uniform_means);
            if (!run.fixed.empty()) write_saving("greedy_vs_fixed", run.fixed_means);
        }
        write_allocations(dir / "allocations.csv", ctx.network, alloc_rows);
    });
}

// One greedy run per scenario row, varying loss/prior/sourcing parameters;
// emits the final-budget allocation and the budget savings per scenario.
inline int cmd_sensitivity(const std::string& data_path, const std::string& config_path,
                           const std::string& grid_path, const std::string& out_path) {
    return detail::run_command([&] {
        detail::RunContext base = detail::load_context(data_path, config_path,
                                                       /*needs_sourcing=*/true,
                                                       /*needs_budget=*/true);
        auto dir = detail::prepare_out_dir(out_path);

        std::ifstream in(grid_path);
        if (!in) throw data_error("cannot open scenario grid '" + grid_path + "'");
        std::string line;
        if (!std::getline(in, line)) throw data_error(grid_path + ":1: missing header");
        std::vector<std::string> header = detail::split(detail::trim(line), ',');
        for (std::string& h : header) h = detail::trim(h);
        const std::vector<std::string> expected = {"scenario", "underestimation_v",
                                                   "weight_slope_m", "prior_variance_nu",
                                                   "sourcing_seed"};
        if (header != expected) {
            throw data_error(grid_path +
                             ":1: header must be "
                             "'scenario,underestimation_v,weight_slope_m,prior_variance_nu,"
                             "sourcing_seed'");
        }

        auto out = detail::open_output(dir / "sensitivity.csv");
        out << "scenario,underestimation_v,weight_slope_m,prior_variance_nu,sourcing_seed";
        for (const std::string& id : base.network.test_nodes) out << ',' << id;
        out << ",savings_vs_uniform,savings_vs_fixed\n";

        std::size_t line_no = 1;
        while (std::getline(in, line)) {
            ++line_no;
            std::string body = detail::trim(line);
            if (body.empty()) continue;
            std::vector<std::string> cells = detail::split(body, ',');
            for (std::string& c : cells) c = detail::trim(c);
            if (cells.size() != 5) {
                throw data_error(grid_path + ":" + std::to_string(line_no) +
                                 ": expected 5 fields");
            }

            detail::RunContext ctx = base;
            if (!cells[1].empty()) {
                ctx.loss.underestimation_v = detail::parse_double(cells[1], "underestimation_v");
            }
            if (!cells[2].empty()) {
                ctx.loss.weight_slope_m = detail::parse_double(cells[2], "weight_slope_m");
            }
            ctx.loss.validate();
            if (!cells[3].empty()) {
                double nu = detail::parse_double(cells[3], "prior_variance_nu");
                ctx.prior = prior_from_network(ctx.network, nu);
            }
            if (!cells[4].empty()) {
                auto seed = static_cast<std::uint64_t>(
                    detail::parse_long(cells[4], "sourcing_seed"));
                std::vector<std::size_t> all_nodes(ctx.network.n_test());
                std::iota(all_nodes.begin(), all_nodes.end(), std::size_t{0});
                auto rows = bootstrap_sourcing(ctx.data, ctx.network.n_supply(),
                                               ctx.bootstrap_draws_per_node(), all_nodes, seed);
                SourcingMatrix q(ctx.network.n_test(), ctx.network.n_supply());
                for (std::size_t a = 0; a < q.rows; ++a) {
                    for (std::size_t b = 0; b < q.cols; ++b) q.at(a, b) = rows[a][b];
                }
                ctx.sourcing = q;
                if (ctx.use_prioritization) {
                    ctx.loss.prioritization = node_prioritization(ctx.network, q);
                }
            }

            detail::PolicyRun run = detail::run_policies(ctx, ctx.seed);
            const SamplingPlan& final_plan = run.greedy.back().plan;
            auto fmt_saving = [&](const std::vector<double>& other,
                                  bool available) -> std::string {
                if (!available) return "not_attained";
                std::optional<long> s =
                    budget_savings(run.budgets, run.greedy_means, other, ctx.budget);
                return s ? std::to_string(*s) : std::string("not_attained");
            };

            out << cells[0] << ',' << detail::format_double(ctx.loss.underestimation_v) << ','
                << detail::format_double(ctx.loss.weight_slope_m) << ','
                << detail::format_double(ctx.prior.nu) << ','
                << (cells[4].empty() ? "default" : cells[4]);
            for (long v : final_plan.alloc) out << ',' << v;
            out << ',' << fmt_saving(run.uniform_means, true) << ','
                << fmt_saving(run.fixed_means, !run.fixed.empty()) << '\n';
        }
    });
}

} // namespace pms
