#include <cmath>
#include <numbers>
#include <string>

#include "flowdet/errors.hpp"
#include "flowdet/noise.hpp"

namespace flowdet::noise {

namespace {

constexpr double kPi = std::numbers::pi;

// Abscissas/weights for 8-point Gauss-Legendre on [-1, 1].
constexpr double kGlX[4] = {0.1834346424956498, 0.5255324099163290, 0.7966664774136267,
                            0.9602898564975363};
constexpr double kGlW[4] = {0.3626837833783620, 0.3137066458778873, 0.2223810344533745,
                            0.1012285362903763};

// Integrates g over [a, b] with composite 8-point Gauss-Legendre on
// `panels` equal panels.
template <typename F>
double gl_composite(F g, double a, double b, int panels) {
    double total = 0.0;
    double w = (b - a) / panels;
    for (int p = 0; p < panels; ++p) {
        double lo = a + p * w;
        double mid = lo + 0.5 * w;
        double half = 0.5 * w;
        double acc = 0.0;
        for (int k = 0; k < 4; ++k)
            acc += kGlW[k] * (g(mid - half * kGlX[k]) + g(mid + half * kGlX[k]));
        total += acc * half;
    }
    return total;
}

}  // namespace

double sas_pdf_numeric(double alpha, double sigma, double w, const QuadratureConfig& cfg) {
    if (!(alpha > 0.0 && alpha <= 2.0)) throw ParamError("sas_pdf_numeric: alpha in (0, 2]");
    if (!(sigma > 0.0)) throw ParamError("sas_pdf_numeric: sigma > 0");

    // f(w) = 1/(pi*sigma) * int_0^inf exp(-u^alpha) cos(u * w/sigma) du
    double x = std::fabs(w) / sigma;
    double umax = std::pow(46.0, 1.0 / alpha);  // exp(-46) ~ 1e-20 tail cut
    auto integrand = [&](double u) { return std::exp(-std::pow(u, alpha)) * std::cos(u * x); };

    // Panel width capped at a quarter oscillation period.
    auto run = [&](int mult) {
        double panel_width = umax;
        if (x > 0.0) panel_width = std::min(panel_width, kPi / (2.0 * x));
        panel_width = std::min(panel_width, 0.5);
        int panels = static_cast<int>(std::ceil(umax / panel_width)) * mult;
        return gl_composite(integrand, 0.0, umax, panels);
    };

    double prev = run(1);
    for (int level = 1; level <= cfg.max_refinements; ++level) {
        double cur = run(1 << level);
        if (std::fabs(cur - prev) < cfg.abs_tol) return cur / (kPi * sigma);
        prev = cur;
    }
    throw NumericError("sas_pdf_numeric did not converge (alpha=" + std::to_string(alpha) +
                       ", sigma=" + std::to_string(sigma) + ", w=" + std::to_string(w) + ")");
}

}  // namespace flowdet::noise
