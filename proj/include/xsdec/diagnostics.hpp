#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "xsdec/errors.hpp"

namespace xsdec {

// Normalized empirical autocorrelation up to max_lag inclusive. rho[0] = 1.
// Lag-t covariances are averaged over the n-t available products so that a
// perfectly alternating series gives rho[1] = -1 exactly.
inline std::vector<double> autocorrelation(std::span<const double> series, std::size_t max_lag) {
    std::size_t n = series.size();
    if (max_lag < 1 || n <= max_lag) {
        throw invalid_input("autocorrelation: need series longer than max_lag >= 1");
    }
    double mean = 0.0;
    for (double x : series) mean += x;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double x : series) var += (x - mean) * (x - mean);
    var /= static_cast<double>(n);
    if (var <= 0.0) throw degenerate_input("autocorrelation: zero-variance series");

    std::vector<double> rho(max_lag + 1);
    rho[0] = 1.0;
    for (std::size_t t = 1; t <= max_lag; ++t) {
        double c = 0.0;
        for (std::size_t i = 0; i + t < n; ++i) {
            c += (series[i] - mean) * (series[i + t] - mean);
        }
        rho[t] = c / (static_cast<double>(n - t) * var);
    }
    return rho;
}

} // namespace xsdec
