#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "fixtures.hpp"
#include "pmsplan/inference.hpp"

using namespace pms;

namespace {

double mean_of(const std::vector<double>& x) {
    double m = 0.0;
    for (double v : x) m += v;
    return m / static_cast<double>(x.size());
}

} // namespace

TEST_CASE("empty dataset reproduces the prior", "[inference]") {
    Network net = fixtures::tiny_network(); // medians 0.10
    PriorSpec prior = prior_from_network(net, 2.0);
    DrawSet draws = sample_posterior(Dataset{}, net, prior, 20000, 31);
    REQUIRE(draws.size() == 20000);
    for (std::size_t g = 0; g < 2; ++g) {
        double med = sample_quantile(draws.node_column(g), 0.5);
        CHECK(med == Catch::Approx(0.10).margin(0.02));
    }
    CHECK(draws.chains == 4);
    CHECK(draws.thinning == 5);
    CHECK(draws.seed == 31);
    CHECK(draws.rhat.size() == 2);
}

TEST_CASE("sampling is deterministic in the seed", "[inference]") {
    Network net = fixtures::sixnode_network();
    PriorSpec prior = prior_from_network(net, 2.0);
    Dataset data = fixtures::sixnode_dataset();
    DrawSet a = sample_posterior(data, net, prior, 400, 11);
    DrawSet b = sample_posterior(data, net, prior, 400, 11);
    DrawSet c = sample_posterior(data, net, prior, 400, 12);
    REQUIRE(a.size() == b.size());
    bool identical = true;
    for (std::size_t i = 0; i < a.size() && identical; ++i) {
        for (std::size_t g = 0; g < 6; ++g) {
            if (a[i].node(g) != b[i].node(g)) identical = false;
        }
    }
    CHECK(identical);
    bool differs = false;
    for (std::size_t i = 0; i < a.size() && !differs; ++i) {
        if (a[i].node(0) != c[i].node(0)) differs = true;
    }
    CHECK(differs);
    CHECK(a.dataset_fingerprint == b.dataset_fingerprint);
}

TEST_CASE("quadrature agrees with exact prior sampling when there is no data", "[inference]") {
    Network net = fixtures::tiny_network();
    PriorSpec prior = prior_from_network(net, 2.0);
    PosteriorMoments qm = quadrature_posterior_moments(Dataset{}, net, prior, 401);

    auto mc = sample_prior_scalar(0.10, 2.0, 200000, 99);
    double mc_mean = mean_of(mc);
    CHECK(qm.mean[0] == Catch::Approx(mc_mean).margin(0.005));
    CHECK(qm.mean[1] == Catch::Approx(mc_mean).margin(0.005));

    // Grid refinement does not move the answer.
    PosteriorMoments fine = quadrature_posterior_moments(Dataset{}, net, prior, 801);
    CHECK(qm.mean[0] == Catch::Approx(fine.mean[0]).margin(1e-4));
    CHECK(qm.variance[0] == Catch::Approx(fine.variance[0]).margin(1e-4));
}

TEST_CASE("posterior means track the quadrature oracle with data", "[inference]") {
    Network net = fixtures::tiny_network();
    PriorSpec prior = prior_from_network(net, 2.0);
    Dataset data = fixtures::dataset_from_counts({{20}}, {{6}});

    PosteriorMoments qm = quadrature_posterior_moments(data, net, prior, 401);
    DrawSet draws = sample_posterior(data, net, prior, 10000, 5150);
    for (std::size_t g = 0; g < 2; ++g) {
        std::vector<double> col = draws.node_column(g);
        double se = batch_means_stderr(col);
        CHECK(mean_of(col) == Catch::Approx(qm.mean[g]).margin(std::max(0.015, 4.0 * se)));
    }
}

TEST_CASE("quadrature guards its domain", "[inference]") {
    Network six = fixtures::sixnode_network();
    PriorSpec p6 = prior_from_network(six, 2.0);
    CHECK_THROWS_AS(quadrature_posterior_moments(Dataset{}, six, p6, 401), config_error);

    Network net = fixtures::tiny_network();
    PriorSpec prior = prior_from_network(net, 2.0);
    CHECK_THROWS_AS(quadrature_posterior_moments(Dataset{}, net, prior, 50), config_error);
}

TEST_CASE("dimension and size guards", "[inference]") {
    Network net = fixtures::sixnode_network();
    PriorSpec wrong;
    wrong.medians = {0.1, 0.1};
    wrong.nu = 2.0;
    CHECK_THROWS_AS(sample_posterior(Dataset{}, net, wrong, 500, 1), config_error);
    PriorSpec prior = prior_from_network(net, 2.0);
    CHECK_THROWS_AS(sample_posterior(Dataset{}, net, prior, 50, 1), config_error);
}

TEST_CASE("data tightens the posterior", "[inference]") {
    Network net = fixtures::sixnode_network();
    PriorSpec prior = prior_from_network(net, 2.0);
    DrawSet flat = sample_posterior(Dataset{}, net, prior, 6000, 21);
    DrawSet fit = sample_posterior(fixtures::sixnode_dataset(), net, prior, 6000, 21);

    auto iqr = [](std::vector<double> col) {
        return sample_quantile(col, 0.75) - sample_quantile(col, 0.25);
    };
    // Nodes with plenty of records: TN1 (12 tests) and SN1 (18 tests).
    CHECK(iqr(fit.node_column(0)) < iqr(flat.node_column(0)));
    CHECK(iqr(fit.node_column(4)) < iqr(flat.node_column(4)));
}

TEST_CASE("chain diagnostics behave on clean input", "[inference]") {
    // Four iid standard-uniform chains: split R-hat should sit near 1.
    std::vector<std::vector<double>> chains(4);
    auto eng = make_engine(2024, 0);
    for (auto& c : chains) {
        c.resize(2000);
        for (double& v : c) v = runif(eng);
    }
    CHECK(split_rhat(chains) == Catch::Approx(1.0).margin(0.1));

    // Batch-means standard error on iid data matches the classical one within
    // a broad factor.
    std::vector<double> x(4096);
    for (double& v : x) v = runif(eng);
    double bm = batch_means_stderr(x);
    double classical = summarize(x).std_error;
    CHECK(bm > classical / 3.0);
    CHECK(bm < classical * 3.0);
}
