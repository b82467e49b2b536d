#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "pmsplan/errors.hpp"
#include "pmsplan/utility.hpp"

namespace pms {

using UtilityFn = std::function<UtilityEstimate(const SamplingPlan&)>;

struct GreedyStep {
    long budget = 0;
    std::size_t chosen_node = 0;
    SamplingPlan plan;
    UtilityEstimate utility;
};

// Greedy budget sweep: starting from the zero plan, each step adds `interval`
// tests to the node whose augmented plan has the highest estimated utility
// (comparing the candidates is equivalent to comparing their gains, since the
// current plan's utility is a common constant). Ties break toward the lowest
// node index. The returned plans are nested by construction. For the argmax to
// compare like with like, utility_fn should evaluate every plan against common
// random numbers, as UtilityEvaluator does.
inline std::vector<GreedyStep> greedy_allocations(long budget, long interval,
                                                  std::size_t n_test_nodes,
                                                  const UtilityFn& utility_fn) {
    if (interval < 1) throw config_error("interval must be >= 1");
    if (budget < interval) throw config_error("budget must be >= interval");
    if (n_test_nodes == 0) throw config_error("need at least one test node");

    std::vector<GreedyStep> steps;
    SamplingPlan current;
    current.alloc.assign(n_test_nodes, 0);
    long n_steps = budget / interval;
    steps.reserve(static_cast<std::size_t>(n_steps));
    for (long step = 0; step < n_steps; ++step) {
        std::size_t best_node = 0;
        UtilityEstimate best_u;
        double best_mean = -std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < n_test_nodes; ++a) {
            SamplingPlan cand = current;
            cand.alloc[a] += interval;
            UtilityEstimate u = utility_fn(cand);
            if (u.mean > best_mean) {
                best_mean = u.mean;
                best_node = a;
                best_u = u;
            }
        }
        current.alloc[best_node] += interval;
        steps.push_back({current.total(), best_node, current, best_u});
    }
    return steps;
}

// Even split: floor(budget/|A|) per node, remainder to the lowest-indexed nodes.
inline SamplingPlan uniform_plan(long budget, std::size_t n_test_nodes) {
    if (budget < 0) throw config_error("budget must be nonnegative");
    if (n_test_nodes == 0) throw config_error("need at least one test node");
    SamplingPlan plan;
    long base = budget / static_cast<long>(n_test_nodes);
    long rem = budget % static_cast<long>(n_test_nodes);
    plan.alloc.assign(n_test_nodes, base);
    for (long a = 0; a < rem; ++a) plan.alloc[static_cast<std::size_t>(a)] += 1;
    return plan;
}

// Allocate a budget proportionally to reference weights, rounding by largest
// remainders; remainder ties break toward the lowest index.
inline SamplingPlan fixed_plan(long budget, const std::vector<double>& reference) {
    if (budget < 0) throw config_error("budget must be nonnegative");
    if (reference.empty()) throw config_error("fixed_plan needs a reference allocation");
    double total = 0.0;
    for (double w : reference) {
        if (w < 0.0) throw config_error("reference weights must be nonnegative");
        total += w;
    }
    if (!(total > 0.0)) throw config_error("fixed_plan reference must not be all zero");

    SamplingPlan plan;
    plan.alloc.assign(reference.size(), 0);
    std::vector<double> remainder(reference.size());
    long assigned = 0;
    for (std::size_t a = 0; a < reference.size(); ++a) {
        double quota = static_cast<double>(budget) * reference[a] / total;
        plan.alloc[a] = static_cast<long>(std::floor(quota));
        remainder[a] = quota - std::floor(quota);
        assigned += plan.alloc[a];
    }
    std::vector<std::size_t> order(reference.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        return remainder[i] > remainder[j];
    });
    for (long k = 0; k < budget - assigned; ++k) {
        plan.alloc[order[static_cast<std::size_t>(k)]] += 1;
    }
    return plan;
}

inline SamplingPlan fixed_plan(long budget, const SamplingPlan& reference) {
    std::vector<double> w(reference.alloc.begin(), reference.alloc.end());
    return fixed_plan(budget, w);
}

// How many more samples the other policy needs to match the target policy's
// utility at `at_budget`: the smallest grid budget where the other curve
// reaches that level, minus `at_budget`. Empty when the other curve never
// reaches the level within the grid.
inline std::optional<long> budget_savings(const std::vector<long>& budgets,
                                          const std::vector<double>& target_curve,
                                          const std::vector<double>& other_curve,
                                          long at_budget) {
    if (budgets.size() != target_curve.size() || budgets.size() != other_curve.size()) {
        throw config_error("budget_savings: curves must share one budget grid");
    }
    auto it = std::find(budgets.begin(), budgets.end(), at_budget);
    if (it == budgets.end()) {
        throw config_error("budget_savings: at_budget " + std::to_string(at_budget) +
                           " is not on the grid");
    }
    double level = target_curve[static_cast<std::size_t>(it - budgets.begin())];
    bool found = false;
    long best = 0;
    for (std::size_t k = 0; k < budgets.size(); ++k) {
        if (other_curve[k] >= level && (!found || budgets[k] < best)) {
            best = budgets[k];
            found = true;
        }
    }
    if (!found) return std::nullopt;
    return best - at_budget;
}

// Number of distinct plans allocating exactly `budget` across `n_nodes` nodes,
// grouped by support size: sum over i of C(n_nodes, i) * C(budget-1, i-1).
// Saturates at a large sentinel instead of overflowing.
inline unsigned long long count_plans(std::size_t n_nodes, long budget) {
    constexpr unsigned long long sentinel = std::numeric_limits<unsigned long long>::max();
    auto binom = [](unsigned long long n, unsigned long long k) -> unsigned long long {
        if (k > n) return 0;
        if (k > n - k) k = n - k;
        unsigned long long r = 1;
        for (unsigned long long i = 1; i <= k; ++i) {
            if (r > 1'000'000'000'000ULL) return sentinel; // plenty beyond any cap
            r = r * (n - k + i) / i;
        }
        return r;
    };
    if (budget <= 0) return budget == 0 ? 1 : 0;
    unsigned long long total = 0;
    std::size_t max_support = std::min<std::size_t>(n_nodes, static_cast<std::size_t>(budget));
    for (std::size_t i = 1; i <= max_support; ++i) {
        unsigned long long t1 = binom(n_nodes, i);
        unsigned long long t2 = binom(static_cast<unsigned long long>(budget) - 1, i - 1);
        if (t1 == sentinel || t2 == sentinel || (t2 != 0 && t1 > sentinel / t2)) return sentinel;
        unsigned long long term = t1 * t2;
        if (total > sentinel - term) return sentinel;
        total += term;
    }
    return total;
}

struct ExhaustiveResult {
    SamplingPlan plan;
    UtilityEstimate utility;
    unsigned long long plans_evaluated = 0;
};

// Evaluate every plan that spends the budget exactly and return the best.
// Refuses instances beyond the cap; the greedy sweep handles those.
inline ExhaustiveResult exhaustive_best(long budget, std::size_t n_test_nodes,
                                        const UtilityFn& utility_fn,
                                        unsigned long long cap = 10'000) {
    if (budget < 0) throw config_error("budget must be nonnegative");
    if (n_test_nodes == 0) throw config_error("need at least one test node");
    unsigned long long n_plans = count_plans(n_test_nodes, budget);
    if (n_plans > cap) {
        throw config_error("exhaustive search over " + std::to_string(n_plans) +
                           " plans exceeds the cap of " + std::to_string(cap) +
                           "; use the greedy sweep instead");
    }

    ExhaustiveResult best;
    double best_mean = -std::numeric_limits<double>::infinity();
    SamplingPlan plan;
    plan.alloc.assign(n_test_nodes, 0);
    unsigned long long evaluated = 0;

    auto consider = [&]() {
        UtilityEstimate u = utility_fn(plan);
        ++evaluated;
        if (u.mean > best_mean) {
            best_mean = u.mean;
            best.plan = plan;
            best.utility = u;
        }
    };
    // Enumerate compositions of `budget` over the nodes in lexicographic order.
    auto recurse = [&](auto&& self, std::size_t node, long remaining) -> void {
        if (node + 1 == n_test_nodes) {
            plan.alloc[node] = remaining;
            consider();
            plan.alloc[node] = 0;
            return;
        }
        for (long take = remaining; take >= 0; --take) {
            plan.alloc[node] = take;
            self(self, node + 1, remaining - take);
        }
        plan.alloc[node] = 0;
    };
    recurse(recurse, 0, budget);
    best.plans_evaluated = evaluated;
    return best;
}

} // namespace pms
