#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "pmsplan/errors.hpp"
#include "pmsplan/numeric.hpp"
#include "pmsplan/rng.hpp"
#include "pmsplan/supply_model.hpp"

namespace pms {

// Prior over per-node SFP rates: independent normals in logit space, centered
// at logit(median) with common standard deviation nu. Because logit is
// monotone, the probability-space median of each node's prior is exactly its
// configured median.
struct PriorSpec {
    std::vector<double> medians; // one per node, test nodes first then supply nodes
    double nu = 2.0;

    void validate() const {
        if (medians.empty()) throw config_error("prior needs at least one node median");
        for (double m : medians) {
            if (!(m > 0.0 && m < 1.0)) throw config_error("prior medians must lie in (0,1)");
        }
        if (!(nu > 0.0)) throw config_error("prior nu must be positive");
    }
};

// Appraisal levels 1..7 map to fixed prior medians.
inline double risk_to_median(int level) {
    static constexpr std::array<double, 7> table = {0.01, 0.02, 0.05, 0.10, 0.15, 0.20, 0.25};
    if (level < 1 || level > 7) {
        throw config_error("risk level " + std::to_string(level) + " outside 1..7");
    }
    return table[static_cast<std::size_t>(level - 1)];
}

// Build the node-ordered prior from per-node risk appraisals. Every node must
// carry a level.
inline PriorSpec prior_from_network(const Network& network, double nu) {
    PriorSpec spec;
    spec.nu = nu;
    spec.medians.reserve(network.n_nodes());
    for (std::size_t g = 0; g < network.n_nodes(); ++g) {
        const std::string& id = network.node_name(g);
        auto it = network.risk_levels.find(id);
        if (it == network.risk_levels.end()) {
            throw config_error("no risk level configured for node '" + id + "'");
        }
        spec.medians.push_back(risk_to_median(it->second));
    }
    spec.validate();
    return spec;
}

// Unnormalized log prior density over logit-space coordinates x_g = logit(rate_g).
inline double log_prior_density_logit(const std::vector<double>& x, const PriorSpec& spec) {
    if (x.size() != spec.medians.size()) {
        throw config_error("rate vector length does not match prior medians");
    }
    double acc = 0.0;
    for (std::size_t g = 0; g < x.size(); ++g) {
        double d = (x[g] - logit(spec.medians[g])) / spec.nu;
        acc -= 0.5 * d * d;
    }
    return acc;
}

// Unnormalized log prior density evaluated at probability-space rates.
inline double log_prior_density(const RateVector& rates, const PriorSpec& spec) {
    if (rates.size() != spec.medians.size()) {
        throw config_error("rate vector length does not match prior medians");
    }
    double acc = 0.0;
    for (std::size_t g = 0; g < rates.size(); ++g) {
        double d = (logit(rates.node(g)) - logit(spec.medians[g])) / spec.nu;
        acc -= 0.5 * d * d;
    }
    return acc;
}

// Exact prior sampling for a single node's rate.
inline std::vector<double> sample_prior_scalar(double median, double nu, std::size_t count,
                                               std::uint64_t seed) {
    if (!(median > 0.0 && median < 1.0)) throw config_error("prior median must lie in (0,1)");
    if (!(nu > 0.0)) throw config_error("prior nu must be positive");
    auto eng = make_engine(seed, 0);
    double center = logit(median);
    std::vector<double> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        out.push_back(sigmoid(center + nu * rnorm(eng)));
    }
    return out;
}

// Exact joint prior sampling; n_test splits the flat node order into
// (theta, delta) components.
inline std::vector<RateVector> sample_prior(const PriorSpec& spec, std::size_t n_test,
                                            std::size_t count, std::uint64_t seed) {
    spec.validate();
    if (n_test > spec.medians.size()) throw config_error("n_test exceeds prior dimension");
    auto eng = make_engine(seed, 0);
    std::size_t dim = spec.medians.size();
    std::vector<double> centers(dim);
    for (std::size_t g = 0; g < dim; ++g) centers[g] = logit(spec.medians[g]);
    std::vector<RateVector> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::vector<double> theta(n_test), delta(dim - n_test);
        for (std::size_t g = 0; g < dim; ++g) {
            double v = sigmoid(centers[g] + spec.nu * rnorm(eng));
            if (g < n_test) {
                theta[g] = v;
            } else {
                delta[g - n_test] = v;
            }
        }
        out.emplace_back(std::move(theta), std::move(delta));
    }
    return out;
}

} // namespace pms
