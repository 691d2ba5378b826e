#include "flowdet/detectors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "flowdet/errors.hpp"

namespace flowdet::det {

namespace {

// Per-frame candidate scorer: precomputes the column contribution of every
// (antenna, symbol) pair so each candidate costs O(N*M) adds.
class ResidualTable {
  public:
    explicit ResidualTable(const mimo::Frame& frame) : n_(frame.n_tx), m_(frame.n_rx) {
        contrib_.resize(n_ * 4 * m_);
        for (std::size_t a = 0; a < n_; ++a)
            for (int s = 0; s < 4; ++s) {
                cplx sym = mimo::qpsk_symbol(s);
                for (std::size_t i = 0; i < m_; ++i)
                    contrib_[(a * 4 + s) * m_ + i] = frame.H[i * n_ + a] * sym;
            }
        y_ = frame.y;
        w_.resize(m_);
        wbar_.resize(2 * m_);
    }

    // residual w = y - H x(cand)
    const std::vector<cplx>& residual(const std::uint8_t* cand) {
        for (std::size_t i = 0; i < m_; ++i) w_[i] = y_[i];
        for (std::size_t a = 0; a < n_; ++a) {
            const cplx* col = contrib_.data() + (a * 4 + cand[a]) * m_;
            for (std::size_t i = 0; i < m_; ++i) w_[i] -= col[i];
        }
        return w_;
    }

    double distance2(const std::uint8_t* cand) {
        residual(cand);
        double d = 0.0;
        for (std::size_t i = 0; i < m_; ++i) d += std::norm(w_[i]);
        return d;
    }

    const std::vector<double>& residual_flat(const std::uint8_t* cand) {
        residual(cand);
        for (std::size_t i = 0; i < m_; ++i) {
            wbar_[i] = w_[i].real();
            wbar_[m_ + i] = w_[i].imag();
        }
        return wbar_;
    }

  private:
    std::size_t n_, m_;
    std::vector<cplx> contrib_;
    std::vector<cplx> y_;
    std::vector<cplx> w_;
    std::vector<double> wbar_;
};

std::vector<cplx> symbols_of(const std::uint8_t* cand, std::size_t n) {
    std::vector<cplx> out(n);
    for (std::size_t a = 0; a < n; ++a) out[a] = mimo::qpsk_symbol(cand[a]);
    return out;
}

}  // namespace

void DetectorConfig::validate(std::size_t n_tx) const {
    switch (kind) {
        case DetectorKind::kManfe:
        case DetectorKind::kGgampManfe:
            if (!flow) throw ConfigError("detector config: manfe-family detectors need a flow");
            break;
        case DetectorKind::kOracleMle:
            if (!oracle_noise)
                throw ConfigError("detector config: oracle detector needs a noise spec");
            break;
        default: break;
    }
    if (kind == DetectorKind::kGgampManfe || kind == DetectorKind::kGgampEmle) {
        if (max_errors < 0 || static_cast<std::size_t>(max_errors) > n_tx)
            throw ConfigError("detector config: need 0 <= E <= N");
    }
    if (kind != DetectorKind::kEmle && kind != DetectorKind::kManfe &&
        kind != DetectorKind::kOracleMle && gamp_iters < 1)
        throw ConfigError("detector config: need T >= 1");
}

DetectionResult emle_detect(const mimo::Frame& frame, const mimo::CandidateSet& candidates) {
    ResidualTable table(frame);
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < candidates.count; ++c) {
        double d = table.distance2(candidates.candidate(c));
        if (d < best_d) {  // ties keep the lowest candidate index
            best_d = d;
            best = c;
        }
    }
    DetectionResult r;
    r.x_hat = symbols_of(candidates.candidate(best), candidates.n);
    r.score = -best_d;
    r.evaluations = candidates.count;
    return r;
}

DetectionResult manfe_detect(const mimo::Frame& frame, const mimo::CandidateSet& candidates,
                             flow::FlowScorer& scorer) {
    ResidualTable table(frame);
    std::size_t best = 0;
    double best_ll = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < candidates.count; ++c) {
        const auto& wbar = table.residual_flat(candidates.candidate(c));
        double ll = scorer.logprob(std::span<const double>(wbar.data(), wbar.size()));
        if (ll > best_ll) {
            best_ll = ll;
            best = c;
        }
    }
    DetectionResult r;
    r.x_hat = symbols_of(candidates.candidate(best), candidates.n);
    r.score = best_ll;
    r.evaluations = candidates.count;
    return r;
}

DetectionResult oracle_mle_detect(const mimo::Frame& frame, const mimo::CandidateSet& candidates,
                                  const noise::NoiseSpec& spec) {
    ResidualTable table(frame);
    std::size_t best = 0;
    double best_ll = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < candidates.count; ++c) {
        const auto& w = table.residual(candidates.candidate(c));
        double ll = noise::log_pdf_analytic(spec, w);
        if (ll > best_ll) {
            best_ll = ll;
            best = c;
        }
    }
    DetectionResult r;
    r.x_hat = symbols_of(candidates.candidate(best), candidates.n);
    r.score = best_ll;
    r.evaluations = candidates.count;
    return r;
}

std::size_t neighborhood_size(std::size_t n, int p, int e) {
    std::size_t total = 0;
    double binom = 1.0;  // C(n, i)
    double pow_pm1 = 1.0;
    for (int i = 0; i <= e; ++i) {
        total += static_cast<std::size_t>(binom * pow_pm1 + 0.5);
        binom = binom * static_cast<double>(n - i) / static_cast<double>(i + 1);
        pow_pm1 *= static_cast<double>(p - 1);
    }
    return total;
}

std::vector<std::uint8_t> neighborhood(const std::uint8_t* x0, std::size_t n, int p, int e) {
    if (e < 0 || static_cast<std::size_t>(e) > n) throw ParamError("neighborhood: need 0 <= E <= N");
    std::vector<std::uint8_t> out;
    out.reserve(neighborhood_size(n, p, e) * n);
    out.insert(out.end(), x0, x0 + n);

    // positions chosen in lexicographic combination order; substituted
    // symbols ascend, skipping the original
    std::vector<std::size_t> pos;
    std::vector<std::uint8_t> work(x0, x0 + n);

    auto emit_for_positions = [&](auto&& self, std::size_t depth) -> void {
        if (depth == pos.size()) {
            out.insert(out.end(), work.begin(), work.end());
            return;
        }
        std::size_t a = pos[depth];
        for (int s = 0; s < p; ++s) {
            if (s == x0[a]) continue;
            work[a] = static_cast<std::uint8_t>(s);
            self(self, depth + 1);
        }
        work[a] = x0[a];
    };

    auto choose = [&](auto&& self, std::size_t start, int remaining) -> void {
        if (remaining == 0) {
            emit_for_positions(emit_for_positions, 0);
            return;
        }
        for (std::size_t a = start; a + remaining <= n; ++a) {
            pos.push_back(a);
            self(self, a + 1, remaining - 1);
            pos.pop_back();
        }
    };

    for (int errors = 1; errors <= e; ++errors) choose(choose, 0, errors);
    return out;
}

namespace {

DetectionResult refine_over_neighborhood(const mimo::Frame& frame, const DetectionResult& init,
                                         int p, int e, flow::FlowScorer* scorer) {
    std::size_t n = frame.n_tx;
    std::vector<std::uint8_t> x0(n);
    for (std::size_t a = 0; a < n; ++a) x0[a] = static_cast<std::uint8_t>(
        mimo::qpsk_slice_index(init.x_hat[a]));
    std::vector<std::uint8_t> cands = neighborhood(x0.data(), n, p, e);
    std::size_t count = cands.size() / n;

    ResidualTable table(frame);
    std::size_t best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < count; ++c) {
        const std::uint8_t* cand = cands.data() + c * n;
        double score;
        if (scorer) {
            const auto& wbar = table.residual_flat(cand);
            score = scorer->logprob(std::span<const double>(wbar.data(), wbar.size()));
        } else {
            score = -table.distance2(cand);
        }
        if (score > best_score) {
            best_score = score;
            best = c;
        }
    }
    DetectionResult r;
    r.x_hat = symbols_of(cands.data() + best * n, n);
    r.score = best_score;
    r.evaluations = count;
    r.iterations_used = init.iterations_used;
    r.diverged = init.diverged;
    return r;
}

}  // namespace

DetectionResult ggamp_manfe_detect(const mimo::Frame& frame, flow::FlowScorer& scorer, int iters,
                                   int e, double noise_var_per_real_dim) {
    DetectionResult init = ggamp_detect(frame, iters, noise_var_per_real_dim);
    return refine_over_neighborhood(frame, init, 4, e, &scorer);
}

DetectionResult ggamp_emle_detect(const mimo::Frame& frame, int iters, int e,
                                  double noise_var_per_real_dim) {
    DetectionResult init = ggamp_detect(frame, iters, noise_var_per_real_dim);
    return refine_over_neighborhood(frame, init, 4, e, nullptr);
}

DetectorRuntime::DetectorRuntime(const DetectorConfig& config, std::size_t n_tx, std::size_t n_rx)
    : config_(config) {
    config_.validate(n_tx);
    if (config_.kind == DetectorKind::kEmle || config_.kind == DetectorKind::kManfe ||
        config_.kind == DetectorKind::kOracleMle)
        candidates_ = mimo::all_candidates(n_tx, 4);
    if (config_.flow) {
        if (config_.flow->config.dim != n_rx)
            throw ConfigError("detector config: flow dimension does not match n_rx");
        scorer_.emplace(*config_.flow);
    }
}

DetectionResult DetectorRuntime::detect(const mimo::Frame& frame) {
    switch (config_.kind) {
        case DetectorKind::kEmle: return emle_detect(frame, *candidates_);
        case DetectorKind::kManfe: return manfe_detect(frame, *candidates_, *scorer_);
        case DetectorKind::kGgamp:
            return ggamp_detect(frame, config_.gamp_iters, config_.noise_var_per_real_dim);
        case DetectorKind::kGgampManfe:
            return ggamp_manfe_detect(frame, *scorer_, config_.gamp_iters, config_.max_errors,
                                      config_.noise_var_per_real_dim);
        case DetectorKind::kGgampEmle:
            return ggamp_emle_detect(frame, config_.gamp_iters, config_.max_errors,
                                     config_.noise_var_per_real_dim);
        case DetectorKind::kOracleMle:
            return oracle_mle_detect(frame, *candidates_, *config_.oracle_noise);
    }
    throw ConfigError("unknown detector kind");
}

}  // namespace flowdet::det
