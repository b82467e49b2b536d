#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "pmsplan/planner.hpp"

using namespace pms;

namespace {

// Deterministic separable concave utility; greedy with interval 1 is exactly
// optimal for this family, which makes it a sharp planner oracle.
UtilityFn concave_fn(std::vector<double> gains) {
    return [gains](const SamplingPlan& plan) {
        UtilityEstimate u;
        for (std::size_t a = 0; a < plan.alloc.size(); ++a) {
            u.mean += gains[a] * std::sqrt(static_cast<double>(plan.alloc[a]));
        }
        return u;
    };
}

} // namespace

TEST_CASE("greedy steps are nested and sized by the interval", "[planner]") {
    auto fn = concave_fn({1.0, 2.0, 0.5});
    auto steps = greedy_allocations(7, 2, 3, fn);
    REQUIRE(steps.size() == 3); // floor(7/2) steps
    CHECK(steps[0].budget == 2);
    CHECK(steps[1].budget == 4);
    CHECK(steps[2].budget == 6);
    for (std::size_t k = 1; k < steps.size(); ++k) {
        for (std::size_t a = 0; a < 3; ++a) {
            CHECK(steps[k].plan.alloc[a] >= steps[k - 1].plan.alloc[a]);
        }
        CHECK(steps[k].plan.total() == steps[k - 1].plan.total() + 2);
    }
    // The first pick goes to the highest-gain node.
    CHECK(steps[0].chosen_node == 1);
}

TEST_CASE("greedy ties break toward the lowest node index", "[planner]") {
    UtilityFn constant = [](const SamplingPlan&) { return UtilityEstimate{}; };
    auto steps = greedy_allocations(4, 1, 3, constant);
    for (const GreedyStep& s : steps) CHECK(s.chosen_node == 0);
    CHECK(steps.back().plan.alloc[0] == 4);
}

TEST_CASE("greedy matches exhaustive search on a separable concave utility", "[planner]") {
    auto fn = concave_fn({1.0, 1.4, 0.7, 1.1});
    auto steps = greedy_allocations(6, 1, 4, fn);
    ExhaustiveResult best = exhaustive_best(6, 4, fn);
    CHECK(steps.back().utility.mean == Catch::Approx(best.utility.mean).margin(1e-12));
    CHECK(steps.back().plan.alloc == best.plan.alloc);
}

TEST_CASE("uniform plans split evenly with remainder to the front", "[planner]") {
    CHECK(uniform_plan(8, 4).alloc == std::vector<long>{2, 2, 2, 2});
    CHECK(uniform_plan(9, 4).alloc == std::vector<long>{3, 2, 2, 2});
    CHECK(uniform_plan(0, 3).alloc == std::vector<long>{0, 0, 0});
    CHECK_THROWS_AS(uniform_plan(-1, 3), config_error);
}

TEST_CASE("fixed plans allocate by largest remainder", "[planner]") {
    // A reference that sums to the budget reproduces itself exactly.
    std::vector<double> ref = {39.0, 17.0, 95.0, 26.0};
    CHECK(fixed_plan(177, ref).alloc == std::vector<long>{39, 17, 95, 26});
    // Remainder ties break toward the lowest index.
    CHECK(fixed_plan(3, std::vector<double>{1.0, 1.0}).alloc == std::vector<long>{2, 1});
    CHECK(fixed_plan(0, ref).alloc == std::vector<long>{0, 0, 0, 0});
    CHECK(fixed_plan(10, std::vector<double>{0.0, 1.0, 0.0}).alloc ==
          std::vector<long>{0, 10, 0});
    CHECK_THROWS_AS(fixed_plan(5, std::vector<double>{0.0, 0.0}), config_error);

    SamplingPlan proto;
    proto.alloc = {1, 0, 3, 0};
    CHECK(fixed_plan(8, proto).alloc == std::vector<long>{2, 0, 6, 0});
}

TEST_CASE("budget savings compare curves on a shared grid", "[planner]") {
    std::vector<long> budgets;
    std::vector<double> target, lagging, equal, weak;
    for (long b = 0; b <= 100; b += 10) {
        budgets.push_back(b);
        target.push_back(static_cast<double>(b));
        lagging.push_back(static_cast<double>(b) - 30.0);
        equal.push_back(static_cast<double>(b));
        weak.push_back(static_cast<double>(b) / 2.0);
    }
    auto s = budget_savings(budgets, target, lagging, 70);
    REQUIRE(s.has_value());
    CHECK(*s == 30);
    CHECK(budget_savings(budgets, target, equal, 70).value() == 0);
    CHECK_FALSE(budget_savings(budgets, target, weak, 70).has_value());
    CHECK_THROWS_AS(budget_savings(budgets, target, weak, 75), config_error);
    std::vector<double> short_curve(3, 0.0);
    CHECK_THROWS_AS(budget_savings(budgets, target, short_curve, 70), config_error);
}

TEST_CASE("plan counting by support size", "[planner]") {
    CHECK(count_plans(3, 6) == 28);
    CHECK(count_plans(4, 40) == 12341);
    CHECK(count_plans(4, 0) == 1);
    CHECK(count_plans(1, 5) == 1);
    CHECK(count_plans(2, 3) == 4);
}

TEST_CASE("exhaustive search visits every plan and respects its cap", "[planner]") {
    auto fn = concave_fn({1.0, 1.4, 0.7});
    ExhaustiveResult res = exhaustive_best(6, 3, fn);
    CHECK(res.plans_evaluated == 28);
    CHECK(res.plan.alloc.size() == 3);
    CHECK(res.plan.alloc[0] + res.plan.alloc[1] + res.plan.alloc[2] == 6);

    CHECK_THROWS_WITH(exhaustive_best(6, 3, fn, 10),
                      Catch::Matchers::ContainsSubstring("greedy"));
    auto fn4 = concave_fn({1.0, 1.4, 0.7, 1.1});
    CHECK_THROWS_AS(exhaustive_best(40, 4, fn4), config_error);
}

TEST_CASE("planner argument guards", "[planner]") {
    auto fn = concave_fn({1.0});
    CHECK_THROWS_AS(greedy_allocations(5, 0, 1, fn), config_error);
    CHECK_THROWS_AS(greedy_allocations(3, 5, 1, fn), config_error);
    CHECK_THROWS_AS(greedy_allocations(5, 1, 0, fn), config_error);
}
