#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <vector>

#include "fixtures.hpp"
#include "pmsplan/estimators.hpp"
#include "pmsplan/priors.hpp"

using namespace pms;

namespace {

DrawSet draws_from_columns(const std::vector<std::vector<double>>& theta_cols) {
    DrawSet out;
    std::size_t h = theta_cols[0].size();
    for (std::size_t i = 0; i < h; ++i) {
        std::vector<double> theta;
        for (const auto& col : theta_cols) theta.push_back(col[i]);
        out.draws.emplace_back(std::move(theta), std::vector<double>{});
    }
    return out;
}

DrawSet prior_draws(std::size_t h, std::uint64_t seed) {
    PriorSpec spec;
    spec.medians = {0.15, 0.15, 0.15, 0.15, 0.15, 0.15};
    spec.nu = 2.0;
    DrawSet out;
    out.draws = sample_prior(spec, 4, h, seed);
    return out;
}

// Position of a value in the sorted column; the estimators only ever return
// values that appear among the draws.
std::size_t sorted_rank(std::vector<double> col, double value) {
    std::sort(col.begin(), col.end());
    auto it = std::find(col.begin(), col.end(), value);
    REQUIRE(it != col.end());
    return static_cast<std::size_t>(it - col.begin());
}

} // namespace

TEST_CASE("weighted quantile picks the smallest value crossing the mass", "[estimators]") {
    std::vector<double> values = {1.0, 2.0, 3.0};
    std::vector<double> weights = {1.0, 1.0, 1.0};
    CHECK(weighted_quantile(values, weights, 0.5) == 2.0);
    CHECK(weighted_quantile(values, weights, 0.9) == 3.0);
    CHECK(weighted_quantile(values, weights, 0.2) == 1.0);

    // Unsorted input and unequal weights.
    std::vector<double> v2 = {5.0, 1.0, 3.0};
    std::vector<double> w2 = {0.1, 0.7, 0.2};
    CHECK(weighted_quantile(v2, w2, 0.5) == 1.0);
    CHECK(weighted_quantile(v2, w2, 0.75) == 3.0);

    std::vector<double> negative = {1.0, -1.0, 1.0};
    std::vector<double> zeros = {0.0, 0.0, 0.0};
    CHECK_THROWS_AS(weighted_quantile(values, negative, 0.5), numeric_error);
    CHECK_THROWS_AS(weighted_quantile(values, zeros, 0.5), numeric_error);
}

TEST_CASE("assessment estimate is the importance-weighted quantile", "[estimators]") {
    DrawSet draws = prior_draws(4000, 808);
    std::vector<double> w(draws.size(), 1.0 / static_cast<double>(draws.size()));
    LossSpec spec = fixtures::default_loss();

    SECTION("v = 1 targets the weighted median") {
        RateVector est = bayes_estimate_assessment(draws, w, spec);
        // Against the raw (unweighted) median the importance weight shifts the
        // answer only slightly; both must be interior draws.
        for (std::size_t g = 0; g < 6; ++g) {
            std::vector<double> col = draws.node_column(g);
            std::size_t rank = sorted_rank(col, est.node(g));
            CHECK(rank > col.size() / 4);
            CHECK(rank < col.size() * 3 / 4);
        }
    }
    SECTION("larger v pushes the estimate upward") {
        RateVector low = bayes_estimate_assessment(draws, w, spec);
        spec.underestimation_v = 5.0;
        RateVector high = bayes_estimate_assessment(draws, w, spec);
        for (std::size_t g = 0; g < 6; ++g) CHECK(high.node(g) >= low.node(g));

        // With uniform importance and v = 5 the plain weighted 5/6-quantile
        // sits close; the importance weight only nudges it.
        std::vector<double> col = draws.node_column(0);
        std::vector<double> ones(col.size(), 1.0);
        double plain = weighted_quantile(col, ones, 5.0 / 6.0);
        std::size_t r_est = sorted_rank(col, high.node(0));
        std::size_t r_plain = sorted_rank(col, plain);
        CHECK(std::abs(static_cast<long>(r_est) - static_cast<long>(r_plain)) <
              static_cast<long>(col.size() / 10));
    }
    SECTION("weight rescaling does not change the estimate") {
        RateVector a = bayes_estimate_assessment(draws, w, spec);
        std::vector<double> w7(w.size());
        for (std::size_t i = 0; i < w.size(); ++i) w7[i] = 7.0 * w[i];
        RateVector b = bayes_estimate_assessment(draws, w7, spec);
        for (std::size_t g = 0; g < 6; ++g) CHECK(a.node(g) == b.node(g));
    }
}

TEST_CASE("classification estimate thresholds the weighted below-mass", "[estimators]") {
    LossSpec spec = fixtures::default_loss();
    spec.score_kind = ScoreKind::classification;
    spec.threshold_l = 0.2;

    auto column_of = [](double below_frac, std::size_t h) {
        std::vector<double> col(h);
        std::size_t k = static_cast<std::size_t>(below_frac * static_cast<double>(h) + 0.5);
        for (std::size_t i = 0; i < h; ++i) col[i] = i < k ? 0.05 : 0.55;
        return col;
    };
    std::vector<double> w(100, 1.0);

    SECTION("no mass below the threshold gives class 1") {
        DrawSet d = draws_from_columns({column_of(0.0, 100)});
        CHECK(bayes_estimate_classification(d, w, spec)[0] == 1);
    }
    SECTION("all mass below gives class 0") {
        DrawSet d = draws_from_columns({column_of(1.0, 100)});
        CHECK(bayes_estimate_classification(d, w, spec)[0] == 0);
    }
    SECTION("0.9 below with v = 5 stays class 0") {
        spec.underestimation_v = 5.0; // cutoff 5/6
        DrawSet d = draws_from_columns({column_of(0.9, 100)});
        CHECK(bayes_estimate_classification(d, w, spec)[0] == 0);
    }
    SECTION("the exact cutoff resolves to class 1") {
        spec.underestimation_v = 1.0; // cutoff 1/2
        DrawSet d = draws_from_columns({column_of(0.5, 100)});
        CHECK(bayes_estimate_classification(d, w, spec)[0] == 1);
    }
}

TEST_CASE("analytic estimates agree with the numeric minimizer", "[estimators]") {
    DrawSet draws = prior_draws(1500, 616);
    auto weng = make_engine(1234, 0);
    std::vector<double> w(draws.size());
    for (double& x : w) x = 0.1 + runif(weng);

    for (double v : {1.0, 5.0}) {
        LossSpec spec = fixtures::default_loss();
        spec.underestimation_v = v;

        RateVector analytic = bayes_estimate_assessment(draws, w, spec);
        RateVector numeric = bayes_estimate_numeric(draws, w, spec);
        for (std::size_t g = 0; g < 6; ++g) {
            std::vector<double> col = draws.node_column(g);
            long ra = static_cast<long>(sorted_rank(col, analytic.node(g)));
            long rn = static_cast<long>(sorted_rank(col, numeric.node(g)));
            INFO("node " << g << " v " << v);
            CHECK(std::abs(ra - rn) <= 1);
        }

        spec.score_kind = ScoreKind::classification;
        std::vector<int> cls = bayes_estimate_classification(draws, w, spec);
        RateVector rep = bayes_estimate_numeric(draws, w, spec);
        for (std::size_t g = 0; g < 6; ++g) {
            CHECK(cls[g] == classify(rep.node(g), spec.threshold_l));
        }
    }
}

TEST_CASE("estimator input guards", "[estimators]") {
    DrawSet draws = prior_draws(200, 2);
    std::vector<double> w(draws.size(), 1.0);
    LossSpec spec = fixtures::default_loss();
    std::vector<double> short_w(10, 1.0);
    CHECK_THROWS_AS(bayes_estimate_assessment(draws, short_w, spec), error);
    spec.score_kind = ScoreKind::classification;
    CHECK_THROWS_AS(bayes_estimate_assessment(draws, w, spec), error);
    DrawSet empty;
    spec.score_kind = ScoreKind::assessment;
    CHECK_THROWS_AS(bayes_estimate_assessment(empty, w, spec), numeric_error);
}
