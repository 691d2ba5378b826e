#include <cmath>
#include <vector>

#include "flowdet/detectors.hpp"

namespace flowdet::det {

namespace {

constexpr double kDamping = 0.7;
constexpr double kFixedPointTol = 1e-8;
constexpr double kVarFloor = 1e-12;
constexpr double kAmp = 0.7071067811865475244;  // QPSK amplitude per real dim

bool finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

DetectionResult matched_filter_fallback(const mimo::Frame& frame, int iters_used) {
    std::size_t n = frame.n_tx, m = frame.n_rx;
    DetectionResult r;
    r.diverged = true;
    r.iterations_used = iters_used;
    r.x_hat.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        cplx acc{0.0, 0.0};
        for (std::size_t i = 0; i < m; ++i) acc += std::conj(frame.H[i * n + j]) * frame.y[i];
        r.x_hat[j] = mimo::qpsk_symbol(mimo::qpsk_slice_index(acc));
    }
    r.score = 0.0;
    return r;
}

}  // namespace

DetectionResult ggamp_detect(const mimo::Frame& frame, int iters, double noise_var_per_real_dim) {
    if (iters < 1) throw ParamError("ggamp_detect: iteration count must be >= 1");
    std::size_t n2 = 2 * frame.n_tx;
    std::size_t m2 = 2 * frame.n_rx;
    mimo::RealizedFrame rf = mimo::realify(frame);
    const std::vector<double>& A = rf.H_bar;  // m2 x n2
    const std::vector<double>& y = rf.y_bar;

    double vw = std::max(noise_var_per_real_dim, kVarFloor);
    std::vector<double> a2(m2 * n2);
    for (std::size_t i = 0; i < A.size(); ++i) a2[i] = A[i] * A[i];

    std::vector<double> xhat(n2, 0.0), taux(n2, kAmp * kAmp);
    std::vector<double> shat(m2, 0.0), taus(m2, 0.0);
    std::vector<double> p(m2), taup(m2), r(n2), taur(n2), xprev(n2);

    int used = 0;
    for (int t = 0; t < iters; ++t) {
        used = t + 1;
        // output linear step
        for (std::size_t i = 0; i < m2; ++i) {
            double tp = 0.0, pm = 0.0;
            const double* arow = A.data() + i * n2;
            const double* a2row = a2.data() + i * n2;
            for (std::size_t j = 0; j < n2; ++j) {
                tp += a2row[j] * taux[j];
                pm += arow[j] * xhat[j];
            }
            taup[i] = tp;
            p[i] = pm - tp * shat[i];
        }
        // Gaussian output channel
        for (std::size_t i = 0; i < m2; ++i) {
            double denom = taup[i] + vw;
            double snew = (y[i] - p[i]) / denom;
            double tnew = 1.0 / denom;
            shat[i] = kDamping * snew + (1.0 - kDamping) * shat[i];
            taus[i] = kDamping * tnew + (1.0 - kDamping) * taus[i];
        }
        // input linear step
        for (std::size_t j = 0; j < n2; ++j) {
            double acc_t = 0.0, acc_r = 0.0;
            for (std::size_t i = 0; i < m2; ++i) {
                acc_t += a2[i * n2 + j] * taus[i];
                acc_r += A[i * n2 + j] * shat[i];
            }
            if (acc_t < kVarFloor) acc_t = kVarFloor;
            taur[j] = 1.0 / acc_t;
            r[j] = xhat[j] + taur[j] * acc_r;
        }
        // binary prior denoiser
        xprev = xhat;
        for (std::size_t j = 0; j < n2; ++j) {
            double xn = kAmp * std::tanh(kAmp * r[j] / taur[j]);
            double tn = kAmp * kAmp - xn * xn;
            if (tn < kVarFloor) tn = kVarFloor;
            xhat[j] = kDamping * xn + (1.0 - kDamping) * xhat[j];
            taux[j] = kDamping * tn + (1.0 - kDamping) * taux[j];
        }
        if (!finite(xhat) || !finite(shat) || !finite(taux) || !finite(taus))
            return matched_filter_fallback(frame, used);
        double delta = 0.0;
        for (std::size_t j = 0; j < n2; ++j) delta = std::max(delta, std::fabs(xhat[j] - xprev[j]));
        if (delta < kFixedPointTol) break;
    }

    DetectionResult res;
    res.iterations_used = used;
    res.evaluations = 0;
    std::size_t n = frame.n_tx;
    res.x_hat.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        cplx soft{xhat[j], xhat[n + j]};
        res.x_hat[j] = mimo::qpsk_symbol(mimo::qpsk_slice_index(soft));
    }
    // score: negative residual distance of the hard decision
    double dist = 0.0;
    for (std::size_t i = 0; i < frame.n_rx; ++i) {
        cplx acc = frame.y[i];
        for (std::size_t j = 0; j < n; ++j) acc -= frame.H[i * n + j] * res.x_hat[j];
        dist += std::norm(acc);
    }
    res.score = -dist;
    return res;
}

}  // namespace flowdet::det
