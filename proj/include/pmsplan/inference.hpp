#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "pmsplan/errors.hpp"
#include "pmsplan/numeric.hpp"
#include "pmsplan/priors.hpp"
#include "pmsplan/rng.hpp"
#include "pmsplan/supply_model.hpp"

namespace pms {

// Posterior (or prior) draws plus the provenance needed to reproduce them.
struct DrawSet {
    std::vector<RateVector> draws;
    std::string dataset_fingerprint;
    int chains = 0;
    std::size_t burn_in = 0; // discarded sweeps per chain
    int thinning = 0;
    std::uint64_t seed = 0;
    std::vector<double> rhat; // split-chain diagnostic per node (empty if single sequence)

    std::size_t size() const { return draws.size(); }
    const RateVector& operator[](std::size_t i) const { return draws[i]; }

    // Per-node draw column in flat node order (test nodes first).
    std::vector<double> node_column(std::size_t g) const {
        std::vector<double> col;
        col.reserve(draws.size());
        for (const RateVector& rv : draws) col.push_back(rv.node(g));
        return col;
    }
};

struct PosteriorMoments {
    std::vector<double> mean;     // per node, flat order
    std::vector<double> variance; // per node, flat order
};

namespace detail {

// Log-likelihood terms that involve a single coordinate: the row of a test
// node or the column of a supply node. Used for O(1)-per-trace Metropolis
// updates instead of full recomputation.
inline double loglik_terms_for_node(const std::vector<Stratum>& strata,
                                    const std::vector<double>& theta,
                                    const std::vector<double>& delta,
                                    std::size_t g, double value) {
    double acc = 0.0;
    std::size_t n_test = theta.size();
    for (const Stratum& st : strata) {
        const CountMatrices& c = st.counts;
        if (g < n_test) {
            std::size_t a = g;
            for (std::size_t b = 0; b < c.cols; ++b) {
                long n = c.n_at(a, b);
                if (n == 0) continue;
                long y = c.y_at(a, b);
                double p = detection_probability(value, delta[b], st.sensitivity, st.specificity);
                acc += static_cast<double>(y) * std::log(p) +
                       static_cast<double>(n - y) * std::log(1.0 - p);
            }
        } else {
            std::size_t b = g - n_test;
            for (std::size_t a = 0; a < c.rows; ++a) {
                long n = c.n_at(a, b);
                if (n == 0) continue;
                long y = c.y_at(a, b);
                double p = detection_probability(theta[a], value, st.sensitivity, st.specificity);
                acc += static_cast<double>(y) * std::log(p) +
                       static_cast<double>(n - y) * std::log(1.0 - p);
            }
        }
    }
    return acc;
}

inline std::string dataset_fingerprint(const Dataset& dataset, const std::vector<Stratum>& strata) {
    long tests = 0, positives = 0;
    for (const Stratum& st : strata) {
        tests += st.counts.total_tests();
        for (long v : st.counts.y) positives += v;
    }
    std::ostringstream os;
    os << "records=" << dataset.size() << ";strata=" << strata.size() << ";tests=" << tests
       << ";positives=" << positives;
    return os.str();
}

} // namespace detail

// Split-chain potential scale reduction for one node, from per-chain kept
// sequences. Each chain is halved; the usual between/within variance ratio is
// returned. Values near 1 indicate the chains mixed.
inline double split_rhat(const std::vector<std::vector<double>>& chains) {
    std::vector<std::vector<double>> seqs;
    for (const auto& chain : chains) {
        std::size_t half = chain.size() / 2;
        if (half < 2) return 1.0; // too short to diagnose
        seqs.emplace_back(chain.begin(), chain.begin() + half);
        seqs.emplace_back(chain.begin() + half, chain.begin() + 2 * half);
    }
    std::size_t m = seqs.size();
    std::size_t n = seqs.front().size();
    std::vector<double> means(m), vars(m);
    double grand = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        SampleStats st = summarize(seqs[k]);
        means[k] = st.mean;
        vars[k] = st.sd * st.sd;
        grand += st.mean;
    }
    grand /= static_cast<double>(m);
    double B = 0.0, W = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        B += (means[k] - grand) * (means[k] - grand);
        W += vars[k];
    }
    B *= static_cast<double>(n) / static_cast<double>(m - 1);
    W /= static_cast<double>(m);
    if (!(W > 0.0)) return 1.0;
    double var_plus = (static_cast<double>(n - 1) / n) * W + B / static_cast<double>(n);
    return std::sqrt(var_plus / W);
}

// Markov-chain-aware standard error of a mean via batch means: the sequence is
// cut into floor(sqrt(n)) equal batches and the batch means' spread estimates
// the autocorrelation-adjusted error.
inline double batch_means_stderr(const std::vector<double>& x) {
    std::size_t n = x.size();
    if (n < 4) return summarize(x).std_error;
    auto batch = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n))));
    std::size_t k = n / batch;
    std::vector<double> bm;
    bm.reserve(k);
    for (std::size_t j = 0; j < k; ++j) {
        double s = 0.0;
        for (std::size_t i = j * batch; i < (j + 1) * batch; ++i) s += x[i];
        bm.push_back(s / static_cast<double>(batch));
    }
    SampleStats st = summarize(bm);
    return st.sd / std::sqrt(static_cast<double>(k));
}

// Draws from the posterior over per-node rates given binary test data: the
// binomial detection likelihood times the logit-normal prior. Sampler:
// component-wise adaptive random-walk Metropolis in logit space, 4 chains,
// 50% burn-in, fixed thinning, chains initialized at the prior medians with
// jitter. Deterministic given (seed, chain count). With an empty dataset the
// draws follow the prior.
inline DrawSet sample_posterior(const Dataset& dataset, const Network& network,
                                const PriorSpec& prior, std::size_t count,
                                std::uint64_t rng_seed) {
    if (count < 100) throw config_error("sample_posterior: count must be >= 100");
    network.validate();
    prior.validate();
    const std::size_t n_test = network.n_test();
    const std::size_t dim = network.n_nodes();
    if (prior.medians.size() != dim) {
        throw config_error("prior dimension does not match the network");
    }
    const std::vector<Stratum> strata = aggregate_strata(dataset, network);

    constexpr int n_chains = 4;
    constexpr int thin = 5;
    const std::size_t keep_per_chain = (count + n_chains - 1) / n_chains;
    const std::size_t post_burn_sweeps = keep_per_chain * thin;
    const std::size_t burn_sweeps = post_burn_sweeps; // 50% burn-in
    constexpr std::size_t adapt_batch = 50;

    std::vector<double> centers(dim);
    for (std::size_t g = 0; g < dim; ++g) centers[g] = logit(prior.medians[g]);

    // kept[chain][node][iteration]
    std::vector<std::vector<std::vector<double>>> kept(
        n_chains, std::vector<std::vector<double>>(dim));

    for (int chain = 0; chain < n_chains; ++chain) {
        auto eng = make_engine(rng_seed, static_cast<std::uint64_t>(chain));
        std::vector<double> x(dim);
        std::vector<double> theta(n_test), delta(dim - n_test);
        for (std::size_t g = 0; g < dim; ++g) {
            x[g] = centers[g] + 0.5 * rnorm(eng);
            double v = clamp_rate(sigmoid(x[g]));
            if (g < n_test) {
                theta[g] = v;
            } else {
                delta[g - n_test] = v;
            }
        }

        // Per-coordinate cached log-target pieces are recomputed from the
        // affected row/column only; verify the starting point is finite.
        for (std::size_t g = 0; g < dim; ++g) {
            double t = detail::loglik_terms_for_node(strata, theta, delta, g,
                                                     g < n_test ? theta[g] : delta[g - n_test]);
            double d = (x[g] - centers[g]) / prior.nu;
            if (!std::isfinite(t - 0.5 * d * d)) {
                throw numeric_error("non-finite log target at initialization for node '" +
                                    network.node_name(g) + "'");
            }
        }

        std::vector<double> scale(dim, 1.0);
        std::vector<std::size_t> accepts(dim, 0);
        const std::size_t total_sweeps = burn_sweeps + post_burn_sweeps;
        for (std::size_t sweep = 0; sweep < total_sweeps; ++sweep) {
            for (std::size_t g = 0; g < dim; ++g) {
                double old_x = x[g];
                double old_v = g < n_test ? theta[g] : delta[g - n_test];
                double new_x = old_x + scale[g] * rnorm(eng);
                double new_v = clamp_rate(sigmoid(new_x));
                double old_d = (old_x - centers[g]) / prior.nu;
                double new_d = (new_x - centers[g]) / prior.nu;
                double delta_log = detail::loglik_terms_for_node(strata, theta, delta, g, new_v) -
                                   detail::loglik_terms_for_node(strata, theta, delta, g, old_v) -
                                   0.5 * (new_d * new_d - old_d * old_d);
                if (delta_log >= 0.0 || std::log(1.0 - runif(eng)) < delta_log) {
                    x[g] = new_x;
                    if (g < n_test) {
                        theta[g] = new_v;
                    } else {
                        delta[g - n_test] = new_v;
                    }
                    ++accepts[g];
                }
            }

            bool in_burn = sweep < burn_sweeps;
            if (in_burn && (sweep + 1) % adapt_batch == 0) {
                for (std::size_t g = 0; g < dim; ++g) {
                    double rate = static_cast<double>(accepts[g]) / adapt_batch;
                    if (rate > 0.4) {
                        scale[g] *= 1.4;
                    } else if (rate < 0.2) {
                        scale[g] *= 0.7;
                    }
                    scale[g] = std::clamp(scale[g], 1e-3, 50.0);
                    accepts[g] = 0;
                }
            }
            if (!in_burn && (sweep - burn_sweeps) % thin == thin - 1) {
                for (std::size_t g = 0; g < dim; ++g) {
                    kept[chain][g].push_back(g < n_test ? theta[g] : delta[g - n_test]);
                }
            }
        }
    }

    DrawSet out;
    out.dataset_fingerprint = detail::dataset_fingerprint(dataset, strata);
    out.chains = n_chains;
    out.burn_in = burn_sweeps;
    out.thinning = thin;
    out.seed = rng_seed;

    out.rhat.resize(dim);
    for (std::size_t g = 0; g < dim; ++g) {
        std::vector<std::vector<double>> per_chain;
        per_chain.reserve(n_chains);
        for (int chain = 0; chain < n_chains; ++chain) per_chain.push_back(kept[chain][g]);
        out.rhat[g] = split_rhat(per_chain);
        if (out.rhat[g] > 1.1) {
            std::cerr << "warning: split-chain diagnostic " << out.rhat[g] << " for node '"
                      << network.node_name(g) << "' exceeds 1.1; consider more draws\n";
        }
    }

    out.draws.reserve(n_chains * keep_per_chain);
    for (int chain = 0; chain < n_chains; ++chain) {
        for (std::size_t i = 0; i < keep_per_chain; ++i) {
            std::vector<double> theta(n_test), delta(dim - n_test);
            for (std::size_t g = 0; g < dim; ++g) {
                double v = kept[chain][g][i];
                if (g < n_test) {
                    theta[g] = v;
                } else {
                    delta[g - n_test] = v;
                }
            }
            out.draws.emplace_back(std::move(theta), std::move(delta));
        }
    }
    out.draws.resize(count);
    return out;
}

// Independent oracle for tiny problems: trapezoid-rule posterior moments over
// a logit-space grid. Supports exactly one test node and one supply node (a
// 2-dimensional integrand). The grid spans +/- 9 prior standard deviations
// around each node's prior center, which covers all non-negligible mass.
inline PosteriorMoments quadrature_posterior_moments(const Dataset& dataset,
                                                     const Network& network,
                                                     const PriorSpec& prior,
                                                     std::size_t grid_points) {
    network.validate();
    prior.validate();
    if (network.n_test() != 1 || network.n_supply() != 1) {
        throw config_error("quadrature_posterior_moments supports only 1x1 networks");
    }
    if (grid_points < 200) {
        throw config_error("quadrature_posterior_moments needs >= 200 grid points per axis");
    }
    if (prior.medians.size() != 2) {
        throw config_error("prior dimension does not match the network");
    }
    const std::vector<Stratum> strata = aggregate_strata(dataset, network);
    constexpr double span = 9.0;

    const std::size_t G = grid_points;
    std::vector<double> xs_t(G), xs_d(G), p_t(G), p_d(G), lp_t(G), lp_d(G);
    double c_t = logit(prior.medians[0]);
    double c_d = logit(prior.medians[1]);
    for (std::size_t i = 0; i < G; ++i) {
        double frac = static_cast<double>(i) / static_cast<double>(G - 1);
        xs_t[i] = c_t - span * prior.nu + 2.0 * span * prior.nu * frac;
        xs_d[i] = c_d - span * prior.nu + 2.0 * span * prior.nu * frac;
        p_t[i] = clamp_rate(sigmoid(xs_t[i]));
        p_d[i] = clamp_rate(sigmoid(xs_d[i]));
        double dt = (xs_t[i] - c_t) / prior.nu;
        double dd = (xs_d[i] - c_d) / prior.nu;
        lp_t[i] = -0.5 * dt * dt;
        lp_d[i] = -0.5 * dd * dd;
    }

    // First pass: find the log-target maximum for stable exponentiation.
    auto log_target = [&](std::size_t i, std::size_t j) {
        double ll = 0.0;
        for (const Stratum& st : strata) {
            long n = st.counts.n_at(0, 0);
            if (n == 0) continue;
            long y = st.counts.y_at(0, 0);
            double p = detection_probability(p_t[i], p_d[j], st.sensitivity, st.specificity);
            ll += static_cast<double>(y) * std::log(p) +
                  static_cast<double>(n - y) * std::log(1.0 - p);
        }
        return ll + lp_t[i] + lp_d[j];
    };

    double max_lt = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < G; ++i) {
        for (std::size_t j = 0; j < G; ++j) {
            max_lt = std::max(max_lt, log_target(i, j));
        }
    }
    if (!std::isfinite(max_lt)) throw numeric_error("quadrature target is non-finite everywhere");

    auto trap = [G](std::size_t i) { return (i == 0 || i == G - 1) ? 0.5 : 1.0; };
    double Z = 0.0, s_t = 0.0, s_d = 0.0, ss_t = 0.0, ss_d = 0.0;
    for (std::size_t i = 0; i < G; ++i) {
        for (std::size_t j = 0; j < G; ++j) {
            double w = std::exp(log_target(i, j) - max_lt) * trap(i) * trap(j);
            Z += w;
            s_t += w * p_t[i];
            s_d += w * p_d[j];
            ss_t += w * p_t[i] * p_t[i];
            ss_d += w * p_d[j] * p_d[j];
        }
    }
    if (!(Z > 0.0)) throw numeric_error("quadrature mass vanished");

    PosteriorMoments out;
    out.mean = {s_t / Z, s_d / Z};
    out.variance = {ss_t / Z - out.mean[0] * out.mean[0], ss_d / Z - out.mean[1] * out.mean[1]};
    return out;
}

} // namespace pms
