#pragma once

// Test-only statistical oracles, independent of the library implementation:
// analytic CDFs, one/two-sample Kolmogorov-Smirnov, an Anderson-Darling
// statistic for fully specified normals, and adaptive Simpson quadrature.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "xsdec/distributions.hpp"

namespace oracles {

inline double normal_cdf(double x, double mu, double sigma) {
    return 0.5 * std::erfc(-(x - mu) / (sigma * std::sqrt(2.0)));
}

// Regularized lower incomplete gamma P(a, x), series + continued fraction.
inline double gammp(double a, double x) {
    if (x < 0.0 || a <= 0.0) throw std::invalid_argument("gammp: bad arguments");
    if (x == 0.0) return 0.0;
    double gln = std::lgamma(a);
    if (x < a + 1.0) {
        double ap = a, del = 1.0 / a, sum = del;
        for (int i = 0; i < 500; ++i) {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if (std::abs(del) < std::abs(sum) * 1e-16) break;
        }
        return sum * std::exp(-x + a * std::log(x) - gln);
    }
    double eps = 1e-16;
    double fpmin = 1e-300;
    double b = x + 1.0 - a, c = 1.0 / fpmin, d = 1.0 / b, h = d;
    for (int i = 1; i <= 500; ++i) {
        double an = -static_cast<double>(i) * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < fpmin) d = fpmin;
        c = b + an / c;
        if (std::abs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) <= eps) break;
    }
    return 1.0 - std::exp(-x + a * std::log(x) - gln) * h;
}

inline double gamma_cdf(double x, double shape, double scale) {
    if (x <= 0.0) return 0.0;
    return gammp(shape, x / scale);
}

inline double dist_cdf(const xsdec::DistributionSpec& d, double x) {
    switch (d.kind) {
        case xsdec::Dist::Uniform:
            if (x <= d.a) return 0.0;
            if (x >= d.b) return 1.0;
            return (x - d.a) / (d.b - d.a);
        case xsdec::Dist::Normal: return normal_cdf(x, d.a, d.b);
        case xsdec::Dist::Gamma: return gamma_cdf(x, d.a, d.b);
    }
    return 0.0;
}

inline double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
    std::sort(samples.begin(), samples.end());
    double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        double f = cdf(samples[i]);
        d = std::max(d, std::abs(f - static_cast<double>(i) / n));
        d = std::max(d, std::abs(static_cast<double>(i + 1) / n - f));
    }
    return d;
}

// Asymptotic one-sample critical value at significance alpha.
inline double ks_critical(double alpha, std::size_t n) {
    double c = std::sqrt(-0.5 * std::log(alpha / 2.0));
    return c / std::sqrt(static_cast<double>(n));
}

inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double d = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] <= b[j]) ++i;
        else ++j;
        double fa = static_cast<double>(i) / a.size();
        double fb = static_cast<double>(j) / b.size();
        d = std::max(d, std::abs(fa - fb));
    }
    return d;
}

inline double ks_two_sample_critical(double alpha, std::size_t n, std::size_t m) {
    double c = std::sqrt(-0.5 * std::log(alpha / 2.0));
    return c * std::sqrt(static_cast<double>(n + m) /
                         (static_cast<double>(n) * static_cast<double>(m)));
}

// Anderson-Darling A^2 against a fully specified normal (case 0: both
// parameters known; 1% critical value 3.857).
inline double anderson_darling_normal(std::vector<double> samples, double mu, double sigma) {
    std::sort(samples.begin(), samples.end());
    std::size_t n = samples.size();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double z_lo = std::clamp(normal_cdf(samples[i], mu, sigma), 1e-300, 1.0 - 1e-16);
        double z_hi = std::clamp(normal_cdf(samples[n - 1 - i], mu, sigma), 1e-300, 1.0 - 1e-16);
        acc += (2.0 * static_cast<double>(i) + 1.0) * (std::log(z_lo) + std::log1p(-z_hi));
    }
    return -static_cast<double>(n) - acc / static_cast<double>(n);
}

inline constexpr double kAndersonDarlingCrit1pc = 3.857;

inline double simpson(const std::function<double(double)>& f, double a, double b, int n) {
    if (n % 2 == 1) ++n;
    double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
    return s * h / 3.0;
}

// Adaptive Simpson with absolute tolerance.
inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double tol, int depth = 24) {
    double m = 0.5 * (a + b);
    double whole = simpson(f, a, b, 2);
    double left = simpson(f, a, m, 2);
    double right = simpson(f, m, b, 2);
    if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol) {
        return left + right + (left + right - whole) / 15.0;
    }
    return adaptive_simpson(f, a, m, tol / 2, depth - 1) +
           adaptive_simpson(f, m, b, tol / 2, depth - 1);
}

} // namespace oracles
