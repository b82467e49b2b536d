#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pmsplan/errors.hpp"
#include "pmsplan/numeric.hpp"
#include "pmsplan/rng.hpp"

namespace pms {

// Two-echelon network: products flow from supply nodes to the test nodes
// where sampling happens. Node order is significant and fixed at construction;
// the flat node index space puts all test nodes first, then all supply nodes.
struct Network {
    std::vector<std::string> test_nodes;
    std::vector<std::string> supply_nodes;
    std::vector<double> catchments;               // empty, or one population per test node
    std::map<std::string, int> risk_levels;       // optional appraisal level (1..7) per node id

    std::size_t n_test() const { return test_nodes.size(); }
    std::size_t n_supply() const { return supply_nodes.size(); }
    std::size_t n_nodes() const { return n_test() + n_supply(); }

    // Flat node id: test nodes first, then supply nodes.
    const std::string& node_name(std::size_t g) const {
        return g < n_test() ? test_nodes[g] : supply_nodes[g - n_test()];
    }

    std::size_t test_index(const std::string& id) const {
        auto it = std::find(test_nodes.begin(), test_nodes.end(), id);
        if (it == test_nodes.end()) throw data_error("unknown test node '" + id + "'");
        return static_cast<std::size_t>(it - test_nodes.begin());
    }

    std::size_t supply_index(const std::string& id) const {
        auto it = std::find(supply_nodes.begin(), supply_nodes.end(), id);
        if (it == supply_nodes.end()) throw data_error("unknown supply node '" + id + "'");
        return static_cast<std::size_t>(it - supply_nodes.begin());
    }

    void validate() const {
        auto check_unique = [](const std::vector<std::string>& ids, const char* what) {
            std::vector<std::string> sorted = ids;
            std::sort(sorted.begin(), sorted.end());
            if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
                throw config_error(std::string("duplicate ") + what + " node identifier");
            }
        };
        if (test_nodes.empty()) throw config_error("network needs at least one test node");
        if (supply_nodes.empty()) throw config_error("network needs at least one supply node");
        check_unique(test_nodes, "test");
        check_unique(supply_nodes, "supply");
        if (!catchments.empty()) {
            if (catchments.size() != n_test()) {
                throw config_error("catchments must cover every test node");
            }
            double total = 0.0;
            for (double c : catchments) {
                if (c < 0.0) throw config_error("catchment populations must be nonnegative");
                total += c;
            }
            if (!(total > 0.0)) throw config_error("catchment populations must not all be zero");
        }
    }
};

// One binary test outcome on a (test node, supply node) trace, with the
// diagnostic's sensitivity and specificity.
struct TestRecord {
    std::size_t test_node = 0;   // index into Network::test_nodes
    std::size_t supply_node = 0; // index into Network::supply_nodes
    int result = 0;              // 1 = detected as SFP
    double sensitivity = 1.0;
    double specificity = 1.0;
};

struct Dataset {
    std::vector<TestRecord> records; // may be empty: zero prior data is legal

    std::size_t size() const { return records.size(); }
    bool empty() const { return records.empty(); }
};

// Row-stochastic sourcing probabilities: row a gives test node a's probability
// of receiving product from each supply node.
struct SourcingMatrix {
    std::size_t rows = 0, cols = 0;
    std::vector<double> probs; // row-major, rows*cols

    SourcingMatrix() = default;
    SourcingMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), probs(r * c, 0.0) {}

    double& at(std::size_t a, std::size_t b) { return probs[a * cols + b]; }
    double at(std::size_t a, std::size_t b) const { return probs[a * cols + b]; }

    void validate() const {
        for (std::size_t a = 0; a < rows; ++a) {
            double sum = 0.0;
            for (std::size_t b = 0; b < cols; ++b) {
                double p = at(a, b);
                if (p < 0.0 || p > 1.0) throw data_error("sourcing probability out of [0,1]");
                sum += p;
            }
            if (std::abs(sum - 1.0) > 1e-9) {
                throw data_error("sourcing row " + std::to_string(a) + " does not sum to 1");
            }
        }
    }
};

// One SFP rate per node: theta over test nodes, delta over supply nodes.
// Components are clamped into the open unit interval at construction.
struct RateVector {
    std::vector<double> theta;
    std::vector<double> delta;

    RateVector() = default;
    RateVector(std::vector<double> th, std::vector<double> de)
        : theta(std::move(th)), delta(std::move(de)) {
        auto fix = [](std::vector<double>& v) {
            for (double& p : v) {
                if (p < 0.0 || p > 1.0) throw data_error("rate outside [0,1]");
                p = clamp_rate(p);
            }
        };
        fix(theta);
        fix(delta);
    }

    std::size_t size() const { return theta.size() + delta.size(); }

    // Flat per-node access: test nodes first, then supply nodes.
    double node(std::size_t g) const {
        return g < theta.size() ? theta[g] : delta[g - theta.size()];
    }
};

// Per-trace totals materialized from a record list: n counts tests, y counts
// positives.
struct CountMatrices {
    std::size_t rows = 0, cols = 0;
    std::vector<long> n, y; // row-major

    CountMatrices() = default;
    CountMatrices(std::size_t r, std::size_t c)
        : rows(r), cols(c), n(r * c, 0), y(r * c, 0) {}

    long& n_at(std::size_t a, std::size_t b) { return n[a * cols + b]; }
    long n_at(std::size_t a, std::size_t b) const { return n[a * cols + b]; }
    long& y_at(std::size_t a, std::size_t b) { return y[a * cols + b]; }
    long y_at(std::size_t a, std::size_t b) const { return y[a * cols + b]; }

    long total_tests() const {
        long t = 0;
        for (long v : n) t += v;
        return t;
    }
};

// Probability that a product on trace (a,b) is an SFP: contamination at either
// node makes the product an SFP.
inline double consolidated_sfp_rate(double theta_a, double delta_b) {
    return theta_a + (1.0 - theta_a) * delta_b;
}

// Probability that a test on trace (a,b) comes back positive, accounting for
// the diagnostic's sensitivity s and specificity r.
inline double detection_probability(double theta_a, double delta_b, double s, double r) {
    double z = consolidated_sfp_rate(theta_a, delta_b);
    return s * z + (1.0 - r) * (1.0 - z);
}

// Materialize per-trace totals. Throws if a record's node indices do not fit
// the network, naming the record's position.
inline CountMatrices aggregate_traces(const Dataset& dataset, const Network& network) {
    CountMatrices counts(network.n_test(), network.n_supply());
    for (std::size_t i = 0; i < dataset.records.size(); ++i) {
        const TestRecord& rec = dataset.records[i];
        if (rec.test_node >= counts.rows || rec.supply_node >= counts.cols) {
            throw data_error("record " + std::to_string(i) + " names a node outside the network");
        }
        counts.n_at(rec.test_node, rec.supply_node) += 1;
        counts.y_at(rec.test_node, rec.supply_node) += rec.result;
    }
    return counts;
}

// Binomial log-likelihood of per-trace totals under a homogeneous diagnostic.
// Traces with n_ab = 0 contribute exactly 0.
inline double log_likelihood(const RateVector& rates, const CountMatrices& counts,
                             double s, double r) {
    double ll = 0.0;
    for (std::size_t a = 0; a < counts.rows; ++a) {
        for (std::size_t b = 0; b < counts.cols; ++b) {
            long n = counts.n_at(a, b);
            if (n == 0) continue;
            long y = counts.y_at(a, b);
            double p = detection_probability(rates.theta[a], rates.delta[b], s, r);
            ll += static_cast<double>(y) * std::log(p) +
                  static_cast<double>(n - y) * std::log(1.0 - p);
        }
    }
    return ll;
}

// Records grouped by their exact (sensitivity, specificity) pair. Mixed
// diagnostics are handled by summing per-group log-likelihoods.
struct Stratum {
    double sensitivity = 1.0;
    double specificity = 1.0;
    CountMatrices counts;
};

inline std::vector<Stratum> aggregate_strata(const Dataset& dataset, const Network& network) {
    std::map<std::pair<double, double>, std::size_t> index;
    std::vector<Stratum> strata;
    for (std::size_t i = 0; i < dataset.records.size(); ++i) {
        const TestRecord& rec = dataset.records[i];
        auto key = std::make_pair(rec.sensitivity, rec.specificity);
        auto [it, inserted] = index.try_emplace(key, strata.size());
        if (inserted) {
            strata.push_back({rec.sensitivity, rec.specificity,
                              CountMatrices(network.n_test(), network.n_supply())});
        }
        Stratum& st = strata[it->second];
        if (rec.test_node >= st.counts.rows || rec.supply_node >= st.counts.cols) {
            throw data_error("record " + std::to_string(i) + " names a node outside the network");
        }
        st.counts.n_at(rec.test_node, rec.supply_node) += 1;
        st.counts.y_at(rec.test_node, rec.supply_node) += rec.result;
    }
    return strata;
}

inline double log_likelihood(const RateVector& rates, const std::vector<Stratum>& strata) {
    double ll = 0.0;
    for (const Stratum& st : strata) {
        ll += log_likelihood(rates, st.counts, st.sensitivity, st.specificity);
    }
    return ll;
}

inline double log_likelihood(const RateVector& rates, const Dataset& dataset,
                             const Network& network) {
    return log_likelihood(rates, aggregate_strata(dataset, network));
}

// Empirical sourcing probabilities: row a is the supply-node frequency among
// test node a's records. Every test node must have at least one record;
// otherwise callers should fill the missing rows via bootstrap_sourcing.
inline SourcingMatrix estimate_sourcing(const Dataset& dataset, const Network& network) {
    CountMatrices counts = aggregate_traces(dataset, network);
    SourcingMatrix q(counts.rows, counts.cols);
    for (std::size_t a = 0; a < counts.rows; ++a) {
        long row_total = 0;
        for (std::size_t b = 0; b < counts.cols; ++b) row_total += counts.n_at(a, b);
        if (row_total == 0) {
            throw data_error("test node '" + network.test_nodes[a] +
                             "' has no records; use bootstrap_sourcing for its row");
        }
        for (std::size_t b = 0; b < counts.cols; ++b) {
            q.at(a, b) = static_cast<double>(counts.n_at(a, b)) / static_cast<double>(row_total);
        }
    }
    return q;
}

// Sourcing rows for untested nodes: supply-node labels are resampled uniformly
// with replacement from the pooled observed traces, then normalized. Rows are
// returned in the order of `untested_nodes` and are deterministic given the
// seed (each node draws from its own stream, so the row for a given node does
// not depend on the rest of the list).
inline std::vector<std::vector<double>> bootstrap_sourcing(const Dataset& dataset,
                                                           std::size_t n_supply,
                                                           std::size_t draws_per_node,
                                                           const std::vector<std::size_t>& untested_nodes,
                                                           std::uint64_t rng_seed) {
    if (dataset.empty()) throw data_error("bootstrap_sourcing: dataset is empty, nothing to resample");
    if (draws_per_node < 1) throw config_error("bootstrap_sourcing: draws_per_node must be >= 1");
    std::vector<std::size_t> pool;
    pool.reserve(dataset.size());
    for (const TestRecord& rec : dataset.records) {
        if (rec.supply_node >= n_supply) throw data_error("record names a supply node outside the network");
        pool.push_back(rec.supply_node);
    }
    std::vector<std::vector<double>> rows;
    rows.reserve(untested_nodes.size());
    for (std::size_t a : untested_nodes) {
        auto eng = make_engine(rng_seed, a);
        std::vector<double> row(n_supply, 0.0);
        for (std::size_t k = 0; k < draws_per_node; ++k) {
            row[pool[rindex(eng, pool.size())]] += 1.0;
        }
        for (double& p : row) p /= static_cast<double>(draws_per_node);
        rows.push_back(std::move(row));
    }
    return rows;
}

// Convenience: empirical rows where data exists, bootstrap rows elsewhere.
inline SourcingMatrix estimate_sourcing_with_bootstrap(const Dataset& dataset,
                                                       const Network& network,
                                                       std::size_t draws_per_node,
                                                       std::uint64_t rng_seed) {
    CountMatrices counts = aggregate_traces(dataset, network);
    std::vector<std::size_t> untested;
    for (std::size_t a = 0; a < counts.rows; ++a) {
        long row_total = 0;
        for (std::size_t b = 0; b < counts.cols; ++b) row_total += counts.n_at(a, b);
        if (row_total == 0) untested.push_back(a);
    }
    SourcingMatrix q(counts.rows, counts.cols);
    for (std::size_t a = 0; a < counts.rows; ++a) {
        long row_total = 0;
        for (std::size_t b = 0; b < counts.cols; ++b) row_total += counts.n_at(a, b);
        if (row_total == 0) continue;
        for (std::size_t b = 0; b < counts.cols; ++b) {
            q.at(a, b) = static_cast<double>(counts.n_at(a, b)) / static_cast<double>(row_total);
        }
    }
    if (!untested.empty()) {
        auto rows = bootstrap_sourcing(dataset, network.n_supply(), draws_per_node, untested, rng_seed);
        for (std::size_t k = 0; k < untested.size(); ++k) {
            for (std::size_t b = 0; b < q.cols; ++b) q.at(untested[k], b) = rows[k][b];
        }
    }
    return q;
}

} // namespace pms
