#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "pmsplan/errors.hpp"
#include "pmsplan/estimators.hpp"
#include "pmsplan/inference.hpp"
#include "pmsplan/loss.hpp"
#include "pmsplan/numeric.hpp"
#include "pmsplan/priors.hpp"
#include "pmsplan/rng.hpp"
#include "pmsplan/supply_model.hpp"

namespace pms {

// Nonnegative integer test allocation per test node.
struct SamplingPlan {
    std::vector<long> alloc;

    long total() const {
        long t = 0;
        for (long v : alloc) t += v;
        return t;
    }

    void validate(std::size_t n_test) const {
        if (alloc.size() != n_test) throw config_error("plan does not match the test-node count");
        for (long v : alloc) {
            if (v < 0) throw config_error("plan allocations must be nonnegative");
        }
    }
};

struct LossEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    std::size_t h1 = 0, h2 = 0;
    std::uint64_t seed = 0;
};

struct UtilityEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    std::size_t h1 = 0, h2 = 0;
    std::uint64_t seed = 0;
    double baseline_expected_loss = 0.0;
};

// Likelihood matrix of simulated datasets: h1 rows (truth draws) by h2 columns
// (simulated datasets), column-normalized to sum 1. Stored column-major.
struct DataMatrix {
    std::size_t rows = 0, cols = 0;
    std::vector<double> d;

    DataMatrix() = default;
    DataMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), d(r * c, 0.0) {}
    double at(std::size_t i, std::size_t j) const { return d[j * rows + i]; }
    double& at(std::size_t i, std::size_t j) { return d[j * rows + i]; }
};

// Fixed stream ids so that every consumer of a user seed draws from a distinct,
// reproducible stream. Data-simulation columns use streams 1..h2.
inline constexpr std::uint64_t stream_subset = 0x4000000000000000ULL;
inline constexpr std::uint64_t stream_gamma0 = 0x4000000000000001ULL;
inline constexpr std::uint64_t stream_truth_pick = 0x4000000000000002ULL;
inline constexpr std::uint64_t stream_fresh_base = 0x4800000000000000ULL;

namespace detail {

// Supply node drawn from a sourcing row by inverse CDF on one uniform.
inline std::size_t draw_supply_node(const SourcingMatrix& q, std::size_t a,
                                    std::mt19937_64& eng) {
    double u = runif(eng);
    double cum = 0.0;
    for (std::size_t b = 0; b + 1 < q.cols; ++b) {
        cum += q.at(a, b);
        if (u < cum) return b;
    }
    return q.cols - 1;
}

} // namespace detail

// Simulate executing a plan under a known truth: each test at node a draws its
// supply node from the sourcing row, then a positive result with the trace's
// detection probability. Record order is by test node, then test number.
inline Dataset simulate_dataset(const SamplingPlan& plan, const SourcingMatrix& sourcing,
                                const RateVector& truth, double s, double r,
                                std::mt19937_64& eng) {
    plan.validate(sourcing.rows);
    if (truth.theta.size() != sourcing.rows || truth.delta.size() != sourcing.cols) {
        throw config_error("truth rates do not match the sourcing matrix");
    }
    Dataset out;
    out.records.reserve(static_cast<std::size_t>(plan.total()));
    for (std::size_t a = 0; a < sourcing.rows; ++a) {
        for (long t = 0; t < plan.alloc[a]; ++t) {
            std::size_t b = detail::draw_supply_node(sourcing, a, eng);
            double p = detection_probability(truth.theta[a], truth.delta[b], s, r);
            int y = runif(eng) < p ? 1 : 0;
            out.records.push_back({a, b, y, s, r});
        }
    }
    return out;
}

inline Dataset simulate_dataset(const SamplingPlan& plan, const SourcingMatrix& sourcing,
                                const RateVector& truth, double s, double r,
                                std::uint64_t rng_seed) {
    auto eng = make_engine(rng_seed, 1);
    return simulate_dataset(plan, sourcing, truth, s, r, eng);
}

// Likelihood matrix over truth draws and simulated datasets: column j holds
// the (normalized) likelihood of a dataset simulated under data_draws[j],
// evaluated at every truth draw. Likelihoods are computed in log space with a
// per-column max subtraction; the constant binomial coefficient cancels in the
// normalization and is omitted.
inline DataMatrix build_data_matrix(const DrawSet& truth_draws, const DrawSet& data_draws,
                                    const SamplingPlan& plan, const SourcingMatrix& sourcing,
                                    double s, double r, std::uint64_t rng_seed) {
    const std::size_t h1 = truth_draws.size();
    const std::size_t h2 = data_draws.size();
    if (h1 == 0 || h2 == 0) throw config_error("build_data_matrix: empty draw set");
    plan.validate(sourcing.rows);

    DataMatrix out(h1, h2);
    std::vector<double> logd(h1);
    for (std::size_t j = 0; j < h2; ++j) {
        auto eng = make_engine(rng_seed, j + 1);
        Dataset sim = simulate_dataset(plan, sourcing, data_draws[j], s, r, eng);
        CountMatrices counts(sourcing.rows, sourcing.cols);
        for (const TestRecord& rec : sim.records) {
            counts.n_at(rec.test_node, rec.supply_node) += 1;
            counts.y_at(rec.test_node, rec.supply_node) += rec.result;
        }

        std::fill(logd.begin(), logd.end(), 0.0);
        for (std::size_t a = 0; a < counts.rows; ++a) {
            for (std::size_t b = 0; b < counts.cols; ++b) {
                long n = counts.n_at(a, b);
                if (n == 0) continue;
                long y = counts.y_at(a, b);
                for (std::size_t i = 0; i < h1; ++i) {
                    const RateVector& g = truth_draws[i];
                    double p = detection_probability(g.theta[a], g.delta[b], s, r);
                    logd[i] += static_cast<double>(y) * std::log(p) +
                               static_cast<double>(n - y) * std::log(1.0 - p);
                }
            }
        }

        double m = *std::max_element(logd.begin(), logd.end());
        double sum = 0.0;
        for (std::size_t i = 0; i < h1; ++i) {
            out.at(i, j) = std::exp(logd[i] - m);
            sum += out.at(i, j);
        }
        if (!(sum > 0.0)) {
            throw numeric_error("data matrix column " + std::to_string(j) +
                                " vanished after stabilization");
        }
        for (std::size_t i = 0; i < h1; ++i) out.at(i, j) /= sum;
    }
    return out;
}

// Shared engine for fast expected-loss estimation. Holds one posterior draw
// set (the truth distribution), the per-trace log detection-probability
// tables, and per-node sorted views, so that a whole greedy sweep can evaluate
// many plans against identical randomness (common random numbers): the same
// truth draws and the same per-column simulation streams are reused for every
// plan evaluated through one evaluator.
class UtilityEvaluator {
public:
    UtilityEvaluator(DrawSet gamma0, SourcingMatrix sourcing, LossSpec spec, double s, double r,
                     std::size_t h2, std::uint64_t seed, double confidence_level = 0.95)
        : gamma0_(std::move(gamma0)),
          q_(std::move(sourcing)),
          spec_(std::move(spec)),
          s_(s),
          r_(r),
          h2_(h2),
          seed_(seed),
          zmult_(ci_multiplier(confidence_level)) {
        spec_.validate();
        q_.validate();
        h1_ = gamma0_.size();
        if (h1_ == 0) throw config_error("utility evaluator needs a nonempty truth draw set");
        if (h2_ == 0 || h2_ > h1_) {
            throw config_error("h2 must satisfy 1 <= h2 <= h1 (dataset draws are a subset of truth draws)");
        }
        n_test_ = gamma0_[0].theta.size();
        n_supply_ = gamma0_[0].delta.size();
        dim_ = n_test_ + n_supply_;
        if (q_.rows != n_test_ || q_.cols != n_supply_) {
            throw config_error("sourcing matrix does not match the draw dimensions");
        }
        if (!spec_.prioritization.empty() && spec_.prioritization.size() != dim_) {
            throw config_error("prioritization length does not match the node count");
        }
        prio_.assign(dim_, 1.0);
        if (!spec_.prioritization.empty()) {
            prio_ = spec_.prioritization;
        }

        // Per-trace log detection probabilities across all truth draws.
        logp_.resize(n_test_ * n_supply_ * h1_);
        log1mp_.resize(n_test_ * n_supply_ * h1_);
        for (std::size_t a = 0; a < n_test_; ++a) {
            for (std::size_t b = 0; b < n_supply_; ++b) {
                double* lp = &logp_[(a * n_supply_ + b) * h1_];
                double* lq = &log1mp_[(a * n_supply_ + b) * h1_];
                for (std::size_t i = 0; i < h1_; ++i) {
                    double p = detection_probability(gamma0_[i].theta[a], gamma0_[i].delta[b], s_, r_);
                    lp[i] = std::log(p);
                    lq[i] = std::log(1.0 - p);
                }
            }
        }

        // Per-node sorted views for the quantile scans, importance weights in
        // sorted order, and strict-below flags for the classification score.
        order_.resize(dim_ * h1_);
        sorted_vals_.resize(dim_ * h1_);
        sorted_w_.resize(dim_ * h1_);
        below_.assign(dim_ * h1_, 0);
        for (std::size_t g = 0; g < dim_; ++g) {
            std::vector<std::uint32_t> idx(h1_);
            std::iota(idx.begin(), idx.end(), 0u);
            std::sort(idx.begin(), idx.end(), [&](std::uint32_t i, std::uint32_t j) {
                return gamma0_[i].node(g) < gamma0_[j].node(g);
            });
            for (std::size_t k = 0; k < h1_; ++k) {
                std::uint32_t i = idx[k];
                double val = gamma0_[i].node(g);
                order_[g * h1_ + k] = i;
                sorted_vals_[g * h1_ + k] = val;
                sorted_w_[g * h1_ + k] =
                    assessment_weight(val, spec_.threshold_l, spec_.weight_slope_m);
            }
            for (std::size_t i = 0; i < h1_; ++i) {
                below_[g * h1_ + i] = gamma0_[i].node(g) < spec_.threshold_l ? 1 : 0;
            }
        }

        // Dataset draws are a uniformly random h2-subset of the truth draws.
        subset_.resize(h1_);
        std::iota(subset_.begin(), subset_.end(), std::size_t{0});
        auto eng = make_engine(seed_, stream_subset);
        for (std::size_t k = 0; k < h2_; ++k) {
            std::size_t pick = k + rindex(eng, h1_ - k);
            std::swap(subset_[k], subset_[pick]);
        }
        subset_.resize(h2_);

        // Expected loss with no new data: identical arithmetic to a simulated
        // column whose dataset is empty, which keeps the zero-plan utility
        // exactly zero.
        std::vector<double> logd(h1_, 0.0), dcol(h1_);
        baseline_ = column_loss(logd, dcol, std::numeric_limits<std::size_t>::max());
    }

    std::size_t h1() const { return h1_; }
    std::size_t h2() const { return h2_; }
    std::uint64_t seed() const { return seed_; }
    double baseline_expected_loss() const { return baseline_; }
    const DrawSet& truth_draws() const { return gamma0_; }
    const std::vector<std::size_t>& dataset_draw_indices() const { return subset_; }
    const LossSpec& loss_spec() const { return spec_; }
    const SourcingMatrix& sourcing() const { return q_; }
    double sensitivity() const { return s_; }
    double specificity() const { return r_; }

    // Mean minimal posterior-weighted loss across simulated datasets.
    LossEstimate expected_loss(const SamplingPlan& plan) const {
        plan.validate(n_test_);
        if (plan.total() == 0) {
            // No tests: every simulated dataset is empty, so the loss equals
            // the baseline with certainty (and the utility is exactly zero).
            LossEstimate out;
            out.mean = baseline_;
            out.std_error = 0.0;
            out.ci_low = baseline_;
            out.ci_high = baseline_;
            out.h1 = h1_;
            out.h2 = h2_;
            out.seed = seed_;
            return out;
        }
        std::vector<double> losses(h2_);
        std::vector<double> logd(h1_), dcol(h1_);
        CountMatrices counts(n_test_, n_supply_);
        for (std::size_t j = 0; j < h2_; ++j) {
            auto eng = make_engine(seed_, j + 1);
            const RateVector& truth = gamma0_[subset_[j]];
            Dataset sim = simulate_dataset(plan, q_, truth, s_, r_, eng);
            std::fill(counts.n.begin(), counts.n.end(), 0L);
            std::fill(counts.y.begin(), counts.y.end(), 0L);
            for (const TestRecord& rec : sim.records) {
                counts.n_at(rec.test_node, rec.supply_node) += 1;
                counts.y_at(rec.test_node, rec.supply_node) += rec.result;
            }

            std::fill(logd.begin(), logd.end(), 0.0);
            for (std::size_t a = 0; a < n_test_; ++a) {
                for (std::size_t b = 0; b < n_supply_; ++b) {
                    long n = counts.n_at(a, b);
                    if (n == 0) continue;
                    double yd = static_cast<double>(counts.y_at(a, b));
                    double nd = static_cast<double>(n);
                    const double* lp = &logp_[(a * n_supply_ + b) * h1_];
                    const double* lq = &log1mp_[(a * n_supply_ + b) * h1_];
                    for (std::size_t i = 0; i < h1_; ++i) {
                        logd[i] += yd * lp[i] + (nd - yd) * lq[i];
                    }
                }
            }
            losses[j] = column_loss(logd, dcol, j);
        }

        LossEstimate out;
        SampleStats st = summarize(losses);
        out.mean = st.mean;
        out.std_error = st.std_error;
        out.ci_low = st.mean - zmult_ * st.std_error;
        out.ci_high = st.mean + zmult_ * st.std_error;
        out.h1 = h1_;
        out.h2 = h2_;
        out.seed = seed_;
        return out;
    }

    // Expected loss reduction against collecting no new data. The empty plan
    // reproduces the baseline arithmetic exactly, so its utility is exactly 0.
    UtilityEstimate utility(const SamplingPlan& plan) const {
        LossEstimate e = expected_loss(plan);
        UtilityEstimate out;
        out.mean = baseline_ - e.mean;
        out.std_error = e.std_error;
        out.ci_low = baseline_ - e.ci_high;
        out.ci_high = baseline_ - e.ci_low;
        out.h1 = h1_;
        out.h2 = h2_;
        out.seed = seed_;
        out.baseline_expected_loss = baseline_;
        return out;
    }

private:
    // Minimal expected loss for one simulated dataset, given per-truth-draw
    // log likelihoods. Normalizes in log space, then minimizes per node: the
    // assessment score via the importance-weighted quantile and its
    // piecewise-linear loss value, the classification score by comparing both
    // classes. `col` only labels error messages.
    double column_loss(const std::vector<double>& logd, std::vector<double>& dcol,
                       std::size_t col) const {
        double m = -std::numeric_limits<double>::infinity();
        for (double v : logd) m = std::max(m, v);
        double sum = 0.0;
        for (std::size_t i = 0; i < h1_; ++i) {
            dcol[i] = std::exp(logd[i] - m);
            sum += dcol[i];
        }
        if (!(sum > 0.0)) {
            throw numeric_error("data matrix column " +
                                (col == std::numeric_limits<std::size_t>::max()
                                     ? std::string("(baseline)")
                                     : std::to_string(col)) +
                                " vanished after stabilization");
        }
        double inv = 1.0 / sum;
        for (std::size_t i = 0; i < h1_; ++i) dcol[i] *= inv;

        const double v = spec_.underestimation_v;
        const double q = v / (1.0 + v);
        double total = 0.0;
        for (std::size_t g = 0; g < dim_; ++g) {
            double loss_g;
            if (spec_.score_kind == ScoreKind::assessment) {
                const std::uint32_t* ord = &order_[g * h1_];
                const double* vals = &sorted_vals_[g * h1_];
                const double* ws = &sorted_w_[g * h1_];
                double tw = 0.0, twv = 0.0;
                for (std::size_t k = 0; k < h1_; ++k) {
                    double w = dcol[ord[k]] * ws[k];
                    tw += w;
                    twv += w * vals[k];
                }
                double target = q * tw;
                double cum = 0.0, cumv = 0.0, c = vals[h1_ - 1];
                for (std::size_t k = 0; k < h1_; ++k) {
                    double w = dcol[ord[k]] * ws[k];
                    cum += w;
                    cumv += w * vals[k];
                    if (cum >= target) {
                        c = vals[k];
                        break;
                    }
                }
                loss_g = (c * cum - cumv) + v * ((twv - cumv) - c * (tw - cum));
            } else {
                const std::uint8_t* flags = &below_[g * h1_];
                double below = 0.0;
                for (std::size_t i = 0; i < h1_; ++i) {
                    if (flags[i]) below += dcol[i];
                }
                loss_g = std::min(below, v * (1.0 - below));
            }
            total += prio_[g] * loss_g;
        }
        return total;
    }

    DrawSet gamma0_;
    SourcingMatrix q_;
    LossSpec spec_;
    double s_, r_;
    std::size_t h1_ = 0, h2_ = 0, n_test_ = 0, n_supply_ = 0, dim_ = 0;
    std::uint64_t seed_ = 0;
    double zmult_ = 1.96;
    std::vector<double> logp_, log1mp_;
    std::vector<std::uint32_t> order_;
    std::vector<double> sorted_vals_, sorted_w_;
    std::vector<std::uint8_t> below_;
    std::vector<double> prio_;
    std::vector<std::size_t> subset_;
    double baseline_ = 0.0;
};

// Build an evaluator by sampling the truth draws from the posterior given the
// existing data. Both the fast estimator and the CLI go through this, so a
// fixed user seed yields identical truth draws everywhere.
inline UtilityEvaluator make_evaluator(const Dataset& existing, const Network& network,
                                       const LossSpec& spec, const SourcingMatrix& sourcing,
                                       const PriorSpec& prior, double s, double r,
                                       std::size_t h1, std::size_t h2, std::uint64_t seed,
                                       double confidence_level = 0.95) {
    DrawSet gamma0 = sample_posterior(existing, network, prior, h1,
                                      stream_seed(seed, stream_gamma0));
    return UtilityEvaluator(std::move(gamma0), sourcing, spec, s, r, h2, seed,
                            confidence_level);
}

// Fast estimator of the expected loss after executing a plan: one posterior
// draw set doubles as the truth distribution and (via a random subset) the
// generator of simulated datasets, and every simulated dataset is scored
// through likelihood reweighting instead of a fresh posterior run.
inline LossEstimate expected_loss_fast(const Dataset& existing, const Network& network,
                                       const SamplingPlan& plan, const LossSpec& spec,
                                       const SourcingMatrix& sourcing, const PriorSpec& prior,
                                       double s, double r, std::size_t h1, std::size_t h2,
                                       std::uint64_t seed, double confidence_level = 0.95) {
    return make_evaluator(existing, network, spec, sourcing, prior, s, r, h1, h2, seed,
                          confidence_level)
        .expected_loss(plan);
}

// Reference estimator: every simulated dataset triggers a fresh posterior
// sampling run over the combined data, and the estimate is restricted to the
// best member of that run's draw set. Slow but assumption-free; used to
// validate the fast path.
inline LossEstimate expected_loss_mcmc(const Dataset& existing, const Network& network,
                                       const SamplingPlan& plan, const LossSpec& spec,
                                       const SourcingMatrix& sourcing, const PriorSpec& prior,
                                       double s, double r, std::size_t h1, std::size_t h2,
                                       std::uint64_t seed, double confidence_level = 0.95) {
    spec.validate();
    sourcing.validate();
    plan.validate(network.n_test());
    const std::size_t dim = network.n_nodes();
    if (!spec.prioritization.empty() && spec.prioritization.size() != dim) {
        throw config_error("prioritization length does not match the node count");
    }
    std::vector<double> prio(dim, 1.0);
    if (!spec.prioritization.empty()) prio = spec.prioritization;

    DrawSet gamma0 = sample_posterior(existing, network, prior, h1,
                                      stream_seed(seed, stream_gamma0));
    auto pick_eng = make_engine(seed, stream_truth_pick);
    const double v = spec.underestimation_v;
    const double l = spec.threshold_l;

    std::vector<double> losses(h2);
    for (std::size_t j = 0; j < h2; ++j) {
        std::size_t pick = rindex(pick_eng, h1);
        auto sim_eng = make_engine(seed, j + 1);
        Dataset sim = simulate_dataset(plan, sourcing, gamma0[pick], s, r, sim_eng);
        Dataset combined;
        combined.records.reserve(existing.size() + sim.size());
        combined.records.insert(combined.records.end(), existing.records.begin(),
                                existing.records.end());
        combined.records.insert(combined.records.end(), sim.records.begin(), sim.records.end());

        DrawSet fresh = sample_posterior(combined, network, prior, h1,
                                         stream_seed(seed, stream_fresh_base + j));
        const std::size_t h = fresh.size();

        // Total expected loss of using each member as the estimate, via
        // per-node loss curves evaluated at every member's component.
        std::vector<double> member_total(h, 0.0);
        std::vector<std::uint32_t> idx(h);
        std::vector<double> vals(h), ws(h), curve(h);
        for (std::size_t g = 0; g < dim; ++g) {
            for (std::size_t i = 0; i < h; ++i) vals[i] = fresh[i].node(g);
            if (spec.score_kind == ScoreKind::assessment) {
                std::iota(idx.begin(), idx.end(), 0u);
                std::sort(idx.begin(), idx.end(), [&](std::uint32_t x, std::uint32_t y) {
                    return vals[x] < vals[y];
                });
                double tw = 0.0, twv = 0.0;
                for (std::size_t k = 0; k < h; ++k) {
                    double w = assessment_weight(vals[idx[k]], l, spec.weight_slope_m) /
                               static_cast<double>(h);
                    ws[k] = w;
                    tw += w;
                    twv += w * vals[idx[k]];
                }
                // Expected loss of estimating c = sorted value k, by prefix sums.
                double cum = 0.0, cumv = 0.0;
                for (std::size_t k = 0; k < h; ++k) {
                    cum += ws[k];
                    cumv += ws[k] * vals[idx[k]];
                    double c = vals[idx[k]];
                    curve[k] = (c * cum - cumv) + v * ((twv - cumv) - c * (tw - cum));
                }
                for (std::size_t k = 0; k < h; ++k) {
                    member_total[idx[k]] += prio[g] * curve[k];
                }
            } else {
                double below = 0.0;
                for (std::size_t i = 0; i < h; ++i) {
                    if (vals[i] < l) below += 1.0;
                }
                below /= static_cast<double>(h);
                double loss_high = below, loss_low = v * (1.0 - below);
                for (std::size_t i = 0; i < h; ++i) {
                    member_total[i] += prio[g] * (vals[i] >= l ? loss_high : loss_low);
                }
            }
        }
        losses[j] = *std::min_element(member_total.begin(), member_total.end());
    }

    LossEstimate out;
    SampleStats st = summarize(losses);
    double z = ci_multiplier(confidence_level);
    out.mean = st.mean;
    out.std_error = st.std_error;
    out.ci_low = st.mean - z * st.std_error;
    out.ci_high = st.mean + z * st.std_error;
    out.h1 = h1;
    out.h2 = h2;
    out.seed = seed;
    return out;
}

// Expected loss reduction of a plan versus collecting no new data, via the
// fast estimator. The baseline is a deterministic functional of the truth
// draws, so the interval is the plan-loss interval with its bounds flipped.
inline UtilityEstimate plan_utility(const Dataset& existing, const Network& network,
                                    const SamplingPlan& plan, const LossSpec& spec,
                                    const SourcingMatrix& sourcing, const PriorSpec& prior,
                                    double s, double r, std::size_t h1, std::size_t h2,
                                    std::uint64_t seed, double confidence_level = 0.95) {
    return make_evaluator(existing, network, spec, sourcing, prior, s, r, h1, h2, seed,
                          confidence_level)
        .utility(plan);
}

} // namespace pms
