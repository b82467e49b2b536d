#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "fixtures.hpp"
#include "pmsplan/supply_model.hpp"

using namespace pms;

TEST_CASE("consolidated rate combines both echelons", "[supply_model]") {
    CHECK(consolidated_sfp_rate(0.1, 0.2) == Catch::Approx(0.28).margin(1e-12));
    CHECK(consolidated_sfp_rate(0.0, 0.0) == 0.0);
    CHECK(consolidated_sfp_rate(1.0, 0.3) == 1.0);
    CHECK(consolidated_sfp_rate(0.3, 1.0) == 1.0);
    // Contamination at either node is symmetric.
    CHECK(consolidated_sfp_rate(0.17, 0.43) ==
          Catch::Approx(consolidated_sfp_rate(0.43, 0.17)).margin(1e-15));
}

TEST_CASE("detection probability folds in the diagnostic", "[supply_model]") {
    CHECK(detection_probability(0.1, 0.2, 1.0, 1.0) == Catch::Approx(0.28).margin(1e-12));
    // s*z + (1-r)*(1-z) with z = 0.28.
    CHECK(detection_probability(0.1, 0.2, 0.9, 0.95) == Catch::Approx(0.288).margin(1e-12));
    // A perfect diagnostic reports the consolidated rate itself.
    CHECK(detection_probability(0.33, 0.44, 1.0, 1.0) ==
          Catch::Approx(consolidated_sfp_rate(0.33, 0.44)).margin(1e-15));
}

TEST_CASE("rate vectors validate and clamp", "[supply_model]") {
    CHECK_THROWS_AS(RateVector({-0.1}, {0.5}), data_error);
    CHECK_THROWS_AS(RateVector({0.5}, {1.1}), data_error);
    RateVector edge({0.0, 1.0}, {0.5});
    CHECK(edge.node(0) > 0.0);
    CHECK(edge.node(1) < 1.0);
    CHECK(edge.node(2) == 0.5);
    CHECK(edge.size() == 3);
}

TEST_CASE("log likelihood matches hand values", "[supply_model]") {
    Network net = fixtures::tiny_network();
    // theta = 0.5, delta ~ 0 gives a detection probability of 0.5.
    RateVector rates({0.5}, {0.0});

    Dataset one_of_two = fixtures::dataset_from_counts({{2}}, {{1}});
    CHECK(log_likelihood(rates, one_of_two, net) ==
          Catch::Approx(2.0 * std::log(0.5)).margin(1e-8));

    Dataset zero_of_one = fixtures::dataset_from_counts({{1}}, {{0}});
    CHECK(log_likelihood(rates, zero_of_one, net) ==
          Catch::Approx(std::log(0.5)).margin(1e-8));

    Dataset empty;
    CHECK(log_likelihood(rates, empty, net) == 0.0);
}

TEST_CASE("zero-count traces contribute exactly zero", "[supply_model]") {
    Network net = fixtures::sixnode_network();
    RateVector rates({0.1, 0.2, 0.3, 0.4}, {0.05, 0.15});
    // All mass on one trace; the other seven traces must not perturb the sum.
    Dataset data = fixtures::dataset_from_counts({{3, 0}, {0, 0}, {0, 0}, {0, 0}},
                                                 {{1, 0}, {0, 0}, {0, 0}, {0, 0}});
    double p = detection_probability(0.1, 0.05, 1.0, 1.0);
    double expected = std::log(p) + 2.0 * std::log(1.0 - p);
    CHECK(log_likelihood(rates, data, net) == Catch::Approx(expected).margin(1e-12));
}

TEST_CASE("aggregation reproduces the six-node counts", "[supply_model]") {
    Network net = fixtures::sixnode_network();
    Dataset data = fixtures::sixnode_dataset();
    CountMatrices counts = aggregate_traces(data, net);

    CHECK(counts.total_tests() == 33);
    CHECK(counts.n_at(0, 0) == 7);
    CHECK(counts.n_at(0, 1) == 5);
    CHECK(counts.y_at(0, 0) == 3);
    CHECK(counts.y_at(0, 1) == 1);
    CHECK(counts.n_at(1, 0) == 0);
    CHECK(counts.n_at(1, 1) == 3);
    CHECK(counts.y_at(1, 1) == 0);
    CHECK(counts.n_at(3, 0) == 8);
    CHECK(counts.n_at(3, 1) == 3);
    CHECK(counts.y_at(3, 0) == 2);
    CHECK(counts.y_at(3, 1) == 1);

    long positives = 0;
    for (long v : counts.y) positives += v;
    CHECK(positives == 7);
}

TEST_CASE("record order does not change the likelihood", "[supply_model]") {
    Network net = fixtures::sixnode_network();
    Dataset data = fixtures::sixnode_dataset();
    Dataset reversed = data;
    std::reverse(reversed.records.begin(), reversed.records.end());
    RateVector rates({0.3, 0.1, 0.05, 0.2}, {0.12, 0.07});
    CHECK(log_likelihood(rates, data, net) == log_likelihood(rates, reversed, net));
}

TEST_CASE("records outside the network are rejected with their index", "[supply_model]") {
    Network net = fixtures::tiny_network();
    Dataset data;
    data.records.push_back({0, 0, 1, 1.0, 1.0});
    data.records.push_back({5, 0, 1, 1.0, 1.0});
    CHECK_THROWS_WITH(aggregate_traces(data, net),
                      Catch::Matchers::ContainsSubstring("record 1"));
}

TEST_CASE("mixed diagnostics split into strata", "[supply_model]") {
    Network net = fixtures::tiny_network();
    Dataset data;
    data.records.push_back({0, 0, 1, 1.0, 1.0});
    data.records.push_back({0, 0, 0, 0.9, 0.8});
    auto strata = aggregate_strata(data, net);
    REQUIRE(strata.size() == 2);

    RateVector rates({0.5}, {0.0});
    double z = 0.5;
    double p2 = 0.9 * z + 0.2 * (1.0 - z);
    double expected = std::log(z) + std::log(1.0 - p2);
    CHECK(log_likelihood(rates, strata) == Catch::Approx(expected).margin(1e-8));
    CHECK(log_likelihood(rates, data, net) == Catch::Approx(expected).margin(1e-8));

    // A homogeneous dataset collapses to a single stratum and matches the
    // count-matrix path.
    Dataset homo = fixtures::sixnode_dataset();
    Network six = fixtures::sixnode_network();
    auto one = aggregate_strata(homo, six);
    REQUIRE(one.size() == 1);
    RateVector r6({0.3, 0.1, 0.05, 0.2}, {0.12, 0.07});
    CHECK(log_likelihood(r6, homo, six) ==
          log_likelihood(r6, aggregate_traces(homo, six), 1.0, 1.0));
}

TEST_CASE("empirical sourcing rows are trace frequencies", "[supply_model]") {
    Network net = fixtures::sixnode_network();
    SourcingMatrix q = estimate_sourcing(fixtures::sixnode_dataset(), net);
    q.validate();
    CHECK(q.at(0, 0) == Catch::Approx(7.0 / 12.0).margin(1e-12));
    CHECK(q.at(0, 1) == Catch::Approx(5.0 / 12.0).margin(1e-12));
    CHECK(q.at(1, 0) == 0.0);
    CHECK(q.at(1, 1) == 1.0);
    CHECK(q.at(2, 0) == Catch::Approx(3.0 / 7.0).margin(1e-12));
    CHECK(q.at(3, 0) == Catch::Approx(8.0 / 11.0).margin(1e-12));
}

TEST_CASE("sourcing estimation refuses nodes without records", "[supply_model]") {
    Network net = fixtures::sixnode_network();
    Dataset data = fixtures::dataset_from_counts({{7, 5}, {0, 0}, {3, 4}, {8, 3}},
                                                 {{3, 1}, {0, 0}, {0, 0}, {2, 1}});
    CHECK_THROWS_WITH(estimate_sourcing(data, net),
                      Catch::Matchers::ContainsSubstring("TN2"));
}

TEST_CASE("bootstrap fills untested rows deterministically", "[supply_model]") {
    Network net = fixtures::sixnode_network();
    Dataset data = fixtures::dataset_from_counts({{7, 5}, {0, 0}, {3, 4}, {8, 3}},
                                                 {{3, 1}, {0, 0}, {0, 0}, {2, 1}});
    SourcingMatrix q1 = estimate_sourcing_with_bootstrap(data, net, 16, 77);
    SourcingMatrix q2 = estimate_sourcing_with_bootstrap(data, net, 16, 77);
    q1.validate();
    CHECK(q1.probs == q2.probs);
    // Tested rows keep their empirical frequencies.
    CHECK(q1.at(0, 0) == Catch::Approx(7.0 / 12.0).margin(1e-12));
    // The bootstrapped row is a multiple of 1/16 and sums to one.
    double sum = q1.at(1, 0) + q1.at(1, 1);
    CHECK(sum == Catch::Approx(1.0).margin(1e-12));
    CHECK(std::abs(q1.at(1, 0) * 16.0 - std::round(q1.at(1, 0) * 16.0)) < 1e-9);

    // A different seed is allowed to produce a different row, and a node's row
    // does not depend on which other nodes are being filled.
    auto rows_a = bootstrap_sourcing(data, net.n_supply(), 16, {1}, 77);
    auto rows_b = bootstrap_sourcing(data, net.n_supply(), 16, {0, 1, 2}, 77);
    CHECK(rows_a[0] == rows_b[1]);
}

TEST_CASE("bootstrap of a single-supplier pool is a point mass", "[supply_model]") {
    Network net = fixtures::sixnode_network();
    Dataset data;
    for (int k = 0; k < 5; ++k) data.records.push_back({0, 1, 0, 1.0, 1.0});
    auto rows = bootstrap_sourcing(data, net.n_supply(), 12, {1, 2, 3}, 5);
    for (const auto& row : rows) {
        CHECK(row[0] == 0.0);
        CHECK(row[1] == 1.0);
    }
    Dataset empty;
    CHECK_THROWS_AS(bootstrap_sourcing(empty, 2, 4, {0}, 1), data_error);
}

TEST_CASE("network validation catches structural errors", "[supply_model]") {
    Network net = fixtures::sixnode_network();
    net.test_nodes[1] = "TN1";
    CHECK_THROWS_AS(net.validate(), config_error);

    Network short_catchments = fixtures::sixnode_network();
    short_catchments.catchments = {1.0, 2.0};
    CHECK_THROWS_AS(short_catchments.validate(), config_error);

    Network ok = fixtures::sixnode_network();
    ok.catchments = {1.0, 2.0, 3.0, 4.0};
    CHECK_NOTHROW(ok.validate());
    CHECK(ok.node_name(0) == "TN1");
    CHECK(ok.node_name(4) == "SN1");
    CHECK(ok.test_index("TN3") == 2);
    CHECK(ok.supply_index("SN2") == 1);
    CHECK_THROWS_AS(ok.test_index("SN1"), data_error);
}
