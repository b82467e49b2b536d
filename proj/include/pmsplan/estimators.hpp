#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "pmsplan/errors.hpp"
#include "pmsplan/inference.hpp"
#include "pmsplan/loss.hpp"

namespace pms {

// Smallest value whose normalized cumulative weight reaches q. Ties in values
// are safe: the scan accumulates all weight at or below each candidate.
inline double weighted_quantile(std::span<const double> values,
                                std::span<const double> weights, double q) {
    if (values.empty()) throw numeric_error("weighted_quantile: no values");
    if (values.size() != weights.size()) {
        throw numeric_error("weighted_quantile: values/weights length mismatch");
    }
    double total = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw numeric_error("weighted_quantile: negative weight");
        total += w;
    }
    if (!(total > 0.0)) throw numeric_error("weighted_quantile: weights sum to zero");

    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });

    double target = q * total;
    double cum = 0.0;
    for (std::size_t k : order) {
        cum += weights[k];
        if (cum >= target) return values[k];
    }
    return values[order.back()];
}

// Bayes estimate under the assessment loss: per node, the weighted quantile of
// the draws at q = v/(1+v), where each draw's effective weight is its column
// weight times the importance weight of the drawn rate. Per-node
// prioritization scales every draw of a node equally, so it cannot move the
// quantile and is ignored here.
inline RateVector bayes_estimate_assessment(const DrawSet& draws,
                                            std::span<const double> column_weights,
                                            const LossSpec& spec) {
    spec.validate();
    if (spec.score_kind != ScoreKind::assessment) {
        throw config_error("bayes_estimate_assessment requires the assessment score");
    }
    if (draws.size() == 0) throw numeric_error("bayes_estimate_assessment: empty draw set");
    if (column_weights.size() != draws.size()) {
        throw numeric_error("bayes_estimate_assessment: one weight per draw required");
    }
    const std::size_t n_test = draws[0].theta.size();
    const std::size_t dim = draws[0].size();
    const double q = spec.underestimation_v / (1.0 + spec.underestimation_v);

    std::vector<double> values(draws.size()), eff(draws.size());
    std::vector<double> theta(n_test), delta(dim - n_test);
    for (std::size_t g = 0; g < dim; ++g) {
        for (std::size_t i = 0; i < draws.size(); ++i) {
            double v = draws[i].node(g);
            values[i] = v;
            eff[i] = column_weights[i] *
                     assessment_weight(v, spec.threshold_l, spec.weight_slope_m);
        }
        double est = weighted_quantile(values, eff, q);
        if (g < n_test) {
            theta[g] = est;
        } else {
            delta[g - n_test] = est;
        }
    }
    return RateVector(std::move(theta), std::move(delta));
}

// Bayes estimate under the classification loss: node g is classified 1 exactly
// when the weighted posterior probability of lying at or below the threshold
// is <= v/(1+v). The boundary counts as class 1.
inline std::vector<int> bayes_estimate_classification(const DrawSet& draws,
                                                      std::span<const double> column_weights,
                                                      const LossSpec& spec) {
    spec.validate();
    if (spec.score_kind != ScoreKind::classification) {
        throw config_error("bayes_estimate_classification requires the classification score");
    }
    if (draws.size() == 0) throw numeric_error("bayes_estimate_classification: empty draw set");
    if (column_weights.size() != draws.size()) {
        throw numeric_error("bayes_estimate_classification: one weight per draw required");
    }
    const std::size_t dim = draws[0].size();
    double total = 0.0;
    for (double w : column_weights) {
        if (w < 0.0) throw numeric_error("bayes_estimate_classification: negative weight");
        total += w;
    }
    if (!(total > 0.0)) throw numeric_error("bayes_estimate_classification: weights sum to zero");

    const double cutoff = spec.underestimation_v / (1.0 + spec.underestimation_v);
    std::vector<int> out(dim, 0);
    for (std::size_t g = 0; g < dim; ++g) {
        double below = 0.0;
        for (std::size_t i = 0; i < draws.size(); ++i) {
            if (draws[i].node(g) <= spec.threshold_l) below += column_weights[i];
        }
        out[g] = (below / total <= cutoff) ? 1 : 0;
    }
    return out;
}

// Generic numeric minimizer used as an oracle for the analytic estimators.
// The loss separates across nodes, so each node is minimized independently:
// for the assessment score over the node's own draw values (the expected loss
// is convex piecewise-linear with kinks only at draws), and for the
// classification score by exhaustively comparing both classes. Ties between
// classes resolve to class 1, matching the analytic boundary convention.
inline RateVector bayes_estimate_numeric(const DrawSet& draws,
                                         std::span<const double> column_weights,
                                         const LossSpec& spec) {
    spec.validate();
    if (draws.size() == 0) throw numeric_error("bayes_estimate_numeric: empty draw set");
    if (column_weights.size() != draws.size()) {
        throw numeric_error("bayes_estimate_numeric: one weight per draw required");
    }
    const std::size_t n_test = draws[0].theta.size();
    const std::size_t dim = draws[0].size();
    const std::size_t h = draws.size();
    const double l = spec.threshold_l;
    const double v = spec.underestimation_v;

    std::vector<double> theta(n_test), delta(dim - n_test);
    std::vector<double> col(h), ww(h);
    for (std::size_t g = 0; g < dim; ++g) {
        for (std::size_t i = 0; i < h; ++i) col[i] = draws[i].node(g);

        double best = 0.0;
        if (spec.score_kind == ScoreKind::assessment) {
            for (std::size_t i = 0; i < h; ++i) {
                ww[i] = column_weights[i] * assessment_weight(col[i], l, spec.weight_slope_m);
            }
            double best_loss = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < h; ++c) {
                double cand = col[c];
                double acc = 0.0;
                for (std::size_t i = 0; i < h; ++i) {
                    double d = cand - col[i];
                    acc += ww[i] * (d > 0.0 ? d : -v * d);
                }
                if (acc < best_loss) {
                    best_loss = acc;
                    best = cand;
                }
            }
        } else {
            // Expected score of classifying low vs high; representatives on
            // each side of the threshold carry the class.
            double cost_low = 0.0, cost_high = 0.0;
            for (std::size_t i = 0; i < h; ++i) {
                if (col[i] >= l) {
                    cost_low += v * column_weights[i]; // truth high, classified low
                } else {
                    cost_high += column_weights[i]; // truth low, classified high
                }
            }
            best = cost_high <= cost_low ? (1.0 + l) / 2.0 : l / 2.0;
        }
        if (g < n_test) {
            theta[g] = best;
        } else {
            delta[g - n_test] = best;
        }
    }
    return RateVector(std::move(theta), std::move(delta));
}

} // namespace pms
