#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <vector>

#include "flowdet/flow.hpp"
#include "flowdet/mimo.hpp"
#include "flowdet/noise.hpp"

namespace flowdet::det {

using cplx = std::complex<double>;

enum class DetectorKind { kEmle, kManfe, kGgamp, kGgampManfe, kGgampEmle, kOracleMle };

struct DetectorConfig {
    DetectorKind kind = DetectorKind::kEmle;
    int gamp_iters = 30;                        // T
    int max_errors = 1;                         // E
    const flow::FlowParams* flow = nullptr;     // manfe family
    std::optional<noise::NoiseSpec> oracle_noise;
    double noise_var_per_real_dim = 1.0;        // handed to G-GAMP

    void validate(std::size_t n_tx) const;
};

struct DetectionResult {
    std::vector<cplx> x_hat;
    double score = 0.0;
    std::size_t evaluations = 0;
    int iterations_used = 0;
    bool diverged = false;
};

// Sum-product GAMP on the realized model with a Gaussian output channel and
// uniform prior on {-1/sqrt2, +1/sqrt2} per real dimension. Damping 0.7,
// fixed-point tolerance 1e-8. Falls back to a matched filter on divergence.
DetectionResult ggamp_detect(const mimo::Frame& frame, int iters, double noise_var_per_real_dim);

DetectionResult emle_detect(const mimo::Frame& frame, const mimo::CandidateSet& candidates);

DetectionResult manfe_detect(const mimo::Frame& frame, const mimo::CandidateSet& candidates,
                             flow::FlowScorer& scorer);

DetectionResult oracle_mle_detect(const mimo::Frame& frame, const mimo::CandidateSet& candidates,
                                  const noise::NoiseSpec& spec);

// All index vectors within Hamming distance E of x0, ordered by error count,
// then error positions, then substituted symbol index; x0 itself first.
std::vector<std::uint8_t> neighborhood(const std::uint8_t* x0, std::size_t n, int p, int e);
std::size_t neighborhood_size(std::size_t n, int p, int e);

DetectionResult ggamp_manfe_detect(const mimo::Frame& frame, flow::FlowScorer& scorer, int iters,
                                   int e, double noise_var_per_real_dim);

DetectionResult ggamp_emle_detect(const mimo::Frame& frame, int iters, int e,
                                  double noise_var_per_real_dim);

// Per-thread detector state (scorer workspaces, cached candidate set).
class DetectorRuntime {
  public:
    DetectorRuntime(const DetectorConfig& config, std::size_t n_tx, std::size_t n_rx);
    DetectionResult detect(const mimo::Frame& frame);
    const DetectorConfig& config() const { return config_; }

  private:
    DetectorConfig config_;
    std::optional<mimo::CandidateSet> candidates_;
    std::optional<flow::FlowScorer> scorer_;
};

}  // namespace flowdet::det
