#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "pmsplan/errors.hpp"
#include "pmsplan/supply_model.hpp"

namespace pms {

enum class ScoreKind { classification, assessment };

// Regulator-configurable loss: a score (how wrong the estimate is), a weight
// (how much the true rate matters near the action threshold), and optional
// per-node prioritization.
struct LossSpec {
    ScoreKind score_kind = ScoreKind::assessment;
    double threshold_l = 0.2;       // action threshold on the SFP rate
    double underestimation_v = 1.0; // penalty multiplier for underestimation
    double weight_slope_m = 0.6;    // weight decay away from the threshold
    std::vector<double> prioritization; // empty, or one weight per node (flat order)

    void validate() const {
        if (!(threshold_l > 0.0 && threshold_l < 1.0)) {
            throw config_error("threshold_l must lie in (0,1)");
        }
        if (!(underestimation_v > 0.0)) throw config_error("underestimation_v must be positive");
        if (weight_slope_m < 0.0 || weight_slope_m > 1.0) {
            throw config_error("weight_slope_m must lie in [0,1]");
        }
        for (double r : prioritization) {
            if (r < 0.0) throw config_error("prioritization weights must be nonnegative");
        }
    }
};

// Action classification: rates at or above the threshold are class 1.
inline int classify(double rate, double l) {
    return rate >= l ? 1 : 0;
}

// Penalty {0, 1, v} for classifying on the wrong side of the threshold;
// underclassification costs v.
inline double classification_score(double est, double truth, const LossSpec& spec) {
    double ce = classify(est, spec.threshold_l);
    double ct = classify(truth, spec.threshold_l);
    double over = std::max(ce - ct, 0.0);
    double under = std::max(ct - ce, 0.0);
    return over + spec.underestimation_v * under;
}

// Asymmetric absolute-error penalty; underestimation costs v per unit.
inline double assessment_score(double est, double truth, const LossSpec& spec) {
    double over = std::max(est - truth, 0.0);
    double under = std::max(truth - est, 0.0);
    return over + spec.underestimation_v * under;
}

// Importance of the true rate: piecewise-linear, peaking at the threshold.
// Below l the weight is 1-(m-1)*truth-l; at or above it is 1-m*truth. Both
// branches stay strictly positive for m in [0,1].
inline double assessment_weight(double truth, double l, double m) {
    double adj = m;
    if (truth < l) adj -= 1.0 - l / truth;
    return 1.0 - truth * adj;
}

namespace detail {

inline double score(double est, double truth, const LossSpec& spec) {
    return spec.score_kind == ScoreKind::assessment ? assessment_score(est, truth, spec)
                                                    : classification_score(est, truth, spec);
}

// The assessment objective weights by the true rate's importance; the
// classification objective uses a neutral weight of 1.
inline double weight(double truth, const LossSpec& spec) {
    return spec.score_kind == ScoreKind::assessment
               ? assessment_weight(truth, spec.threshold_l, spec.weight_slope_m)
               : 1.0;
}

} // namespace detail

// Per-node importance from catchment populations: test-node weights are
// population shares, and each supply node inherits the sourcing-weighted share
// of the test nodes it serves. Returned in flat node order; each echelon's
// block sums to 1.
inline std::vector<double> node_prioritization(const Network& network,
                                               const SourcingMatrix& sourcing) {
    if (network.catchments.empty()) {
        throw config_error("node_prioritization requires catchment populations");
    }
    network.validate();
    if (sourcing.rows != network.n_test() || sourcing.cols != network.n_supply()) {
        throw config_error("sourcing matrix does not match the network");
    }
    double total = 0.0;
    for (double c : network.catchments) total += c;
    std::vector<double> out(network.n_nodes(), 0.0);
    for (std::size_t a = 0; a < network.n_test(); ++a) {
        out[a] = network.catchments[a] / total;
    }
    for (std::size_t b = 0; b < network.n_supply(); ++b) {
        double acc = 0.0;
        for (std::size_t a = 0; a < network.n_test(); ++a) {
            acc += sourcing.at(a, b) * out[a];
        }
        out[network.n_test() + b] = acc;
    }
    return out;
}

// Total loss of an estimate against a truth: per-node score times weight,
// times the node's prioritization when configured, summed over all nodes.
inline double total_loss(const RateVector& est, const RateVector& truth, const LossSpec& spec) {
    spec.validate();
    if (est.size() != truth.size()) throw data_error("estimate/truth dimension mismatch");
    if (!spec.prioritization.empty() && spec.prioritization.size() != truth.size()) {
        throw config_error("prioritization length does not match the rate vectors");
    }
    double acc = 0.0;
    for (std::size_t g = 0; g < truth.size(); ++g) {
        double term = detail::score(est.node(g), truth.node(g), spec) *
                      detail::weight(truth.node(g), spec);
        if (!spec.prioritization.empty()) term *= spec.prioritization[g];
        acc += term;
    }
    return acc;
}

} // namespace pms
