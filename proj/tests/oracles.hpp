#pragma once

// Independent numeric oracles used by the test suites. Nothing here calls
// into the implementation paths it is used to check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

namespace oracles {

// log|det J| of f: R^n -> R^n via central differences and LU with partial
// pivoting. Only intended for small n.
inline double numeric_logdet(const std::function<std::vector<double>(const std::vector<double>&)>& f,
                             std::vector<double> x, double h = 1e-6) {
    std::size_t n = x.size();
    std::vector<double> jac(n * n);
    for (std::size_t j = 0; j < n; ++j) {
        double saved = x[j];
        x[j] = saved + h;
        std::vector<double> fp = f(x);
        x[j] = saved - h;
        std::vector<double> fm = f(x);
        x[j] = saved;
        for (std::size_t i = 0; i < n; ++i) jac[i * n + j] = (fp[i] - fm[i]) / (2.0 * h);
    }
    // LU factorization, log of |det|.
    double logdet = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::fabs(jac[i * n + k]) > std::fabs(jac[piv * n + k])) piv = i;
        if (piv != k)
            for (std::size_t c = 0; c < n; ++c) std::swap(jac[k * n + c], jac[piv * n + c]);
        double d = jac[k * n + k];
        logdet += std::log(std::fabs(d));
        for (std::size_t i = k + 1; i < n; ++i) {
            double factor = jac[i * n + k] / d;
            for (std::size_t c = k; c < n; ++c) jac[i * n + c] -= factor * jac[k * n + c];
        }
    }
    return logdet;
}

// One-sample Kolmogorov-Smirnov statistic against a CDF.
inline double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
    std::sort(samples.begin(), samples.end());
    double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        double f = cdf(samples[i]);
        d = std::max(d, std::fabs(f - static_cast<double>(i) / n));
        d = std::max(d, std::fabs(static_cast<double>(i + 1) / n - f));
    }
    return d;
}

inline double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double variance(const std::vector<double>& v) {
    double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size());
}

// Condition number of a square matrix via Jacobi eigenvalues of A^T A.
inline double condition_number(const std::vector<double>& a, std::size_t n) {
    std::vector<double> s(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < n; ++k) acc += a[k * n + i] * a[k * n + j];
            s[i * n + j] = acc;
        }
    for (int sweep = 0; sweep < 60; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += s[p * n + q] * s[p * n + q];
        if (off < 1e-24) break;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                double apq = s[p * n + q];
                if (std::fabs(apq) < 1e-300) continue;
                double theta = (s[q * n + q] - s[p * n + p]) / (2.0 * apq);
                double t = (theta >= 0 ? 1.0 : -1.0) /
                           (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double sn = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    double skp = s[k * n + p], skq = s[k * n + q];
                    s[k * n + p] = c * skp - sn * skq;
                    s[k * n + q] = sn * skp + c * skq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    double spk = s[p * n + k], sqk = s[q * n + k];
                    s[p * n + k] = c * spk - sn * sqk;
                    s[q * n + k] = sn * spk + c * sqk;
                }
            }
    }
    double lmax = 0.0, lmin = 1e300;
    for (std::size_t i = 0; i < n; ++i) {
        lmax = std::max(lmax, s[i * n + i]);
        lmin = std::min(lmin, s[i * n + i]);
    }
    if (lmin <= 0.0) return 1e300;
    return std::sqrt(lmax / lmin);
}

}  // namespace oracles
