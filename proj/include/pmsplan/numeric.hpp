#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "pmsplan/errors.hpp"

namespace pms {

// Rates live in the open unit interval; values at or beyond the boundary are
// pulled inside by this margin at construction so logit-space internals stay
// finite.
inline constexpr double rate_margin = 1e-10;

inline double clamp_rate(double p) {
    return std::clamp(p, rate_margin, 1.0 - rate_margin);
}

inline double logit(double p) {
    return std::log(p / (1.0 - p));
}

// Numerically stable inverse logit.
inline double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    double e = std::exp(x);
    return e / (1.0 + e);
}

struct SampleStats {
    double mean = 0.0;
    double sd = 0.0;        // sample standard deviation (n-1 denominator)
    double std_error = 0.0; // sd / sqrt(n)
    std::size_t n = 0;
};

inline SampleStats summarize(std::span<const double> x) {
    SampleStats s;
    s.n = x.size();
    if (s.n == 0) return s;
    double sum = 0.0;
    for (double v : x) sum += v;
    s.mean = sum / static_cast<double>(s.n);
    if (s.n > 1) {
        double ss = 0.0;
        for (double v : x) {
            double d = v - s.mean;
            ss += d * d;
        }
        s.sd = std::sqrt(ss / static_cast<double>(s.n - 1));
        s.std_error = s.sd / std::sqrt(static_cast<double>(s.n));
    }
    return s;
}

// Quantile of an unweighted sample: smallest element with empirical CDF >= q.
inline double sample_quantile(std::vector<double> x, double q) {
    if (x.empty()) throw numeric_error("sample_quantile: empty sample");
    std::sort(x.begin(), x.end());
    double target = q * static_cast<double>(x.size());
    auto k = static_cast<std::size_t>(std::ceil(target));
    if (k < 1) k = 1;
    if (k > x.size()) k = x.size();
    return x[k - 1];
}

// Inverse standard normal CDF (Acklam's rational approximation, |error| < 1.2e-9).
// Used to turn a confidence level into a z multiplier.
inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw config_error("normal_quantile: p must lie in (0,1)");
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                   -2.759285104469687e+02, 1.383577518672690e+02,
                                   -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                   -1.556989798598866e+02, 6.680131188771972e+01,
                                   -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                   -2.400758277161838e+00, -2.549732539343734e+00,
                                   4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                   2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double plow = 0.02425;
    constexpr double phigh = 1.0 - plow;
    double q, r;
    if (p < plow) {
        q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (p > phigh) {
        q = std::sqrt(-2.0 * std::log(1.0 - p));
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    q = p - 0.5;
    r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

// z multiplier for a two-sided interval at the given confidence level.
inline double ci_multiplier(double confidence_level) {
    if (!(confidence_level > 0.0 && confidence_level < 1.0)) {
        throw config_error("confidence_level must lie in (0,1)");
    }
    return normal_quantile(0.5 + confidence_level / 2.0);
}

} // namespace pms
