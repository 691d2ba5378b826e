#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "flowdet/autodiff.hpp"
#include "flowdet/noise.hpp"

namespace flowdet::flow {

using cplx = std::complex<double>;

struct FlowConfig {
    std::size_t k_steps = 4;
    std::size_t dim = 4;          // complex dimension M
    std::size_t partition_m = 2;  // rows 1..m condition the lower coupling
    std::size_t hidden_width = 8;
    std::size_t mlp_depth = 3;

    static FlowConfig for_dim(std::size_t m, std::size_t k = 4, std::size_t hidden = 8);
    void validate() const;
};

// A squeezed sample is stored flat in "wbar" order: indices [0, M) hold the
// real channel, [M, 2M) the imaginary channel. This is the column-major
// reading of the M x 2 squeeze tensor and matches the stacked real form of
// the linear model.
std::vector<double> squeeze_flat(std::span<const cplx> w);
std::vector<cplx> unsqueeze_flat(std::span<const double> wbar);
ad::Tensor squeeze(std::span<const cplx> w);      // M x 2, col 0 = real
std::vector<cplx> unsqueeze(const ad::Tensor& t);

// Coupling scales are s = exp(c * tanh(raw / c)) with c the bound below:
// positive, exactly invertible, equal to exp(raw) to first order near zero,
// and bounded so that heavy-tailed activations cannot cascade through the
// stack. The log-det term sums the bounded exponents and stays exact.
inline constexpr double kCouplingScaleBound = 2.0;

struct Mlp {
    std::vector<ad::NodePtr> weights;  // layer l: (out_l x in_l)
    std::vector<ad::NodePtr> biases;   // layer l: (out_l x 1)
};

struct CouplingBlock {
    Mlp scale_net;  // raw log-scale; s = exp(raw)
    Mlp bias_net;
};

struct FlowStep {
    ad::NodePtr actnorm_s;  // 2 x 1, per channel
    ad::NodePtr actnorm_b;  // 2 x 1
    ad::NodePtr conv_w;     // 4 x 1, [w00 w01 w10 w11]
    CouplingBlock lower;    // transforms rows m+1..M conditioned on rows 1..m
    CouplingBlock upper;    // transforms rows 1..m conditioned on rows m+1..M
};

struct FlowParams {
    FlowConfig config;
    std::vector<FlowStep> steps;
    ad::NodePtr latent_mu;      // 2M x 1
    ad::NodePtr latent_logvar;  // 2M x 1
    bool actnorm_initialized = false;

    std::vector<ad::NodePtr> all_params() const;
};

FlowParams init_flow_params(const FlowConfig& config, std::uint64_t seed);

// Index sets (into the flat 2M vector) for one coupling side. For M == 1 the
// two real channels are split instead of the (unsplittable) single row.
struct CouplingLayout {
    std::vector<std::size_t> cond;
    std::vector<std::size_t> trans;
};
CouplingLayout coupling_layout(const FlowConfig& config, bool upper);

struct FlowTrace {
    std::vector<std::vector<double>> activations;  // h_0 .. h_K (flat 2M)
    std::vector<double> log_dets;                  // one per layer
    std::vector<std::string> layer_names;
    double latent_logprob = 0.0;
    double total = 0.0;  // latent_logprob + sum(log_dets)
};

// Per-layer forwards on a flat 2M vector; exposed for the Jacobian tests.
struct LayerResult {
    std::vector<double> h;
    double log_det = 0.0;
};
LayerResult actnorm_forward(const FlowStep& step, std::span<const double> h, std::size_t m_dim);
LayerResult invconv_forward(const FlowStep& step, std::span<const double> h, std::size_t m_dim);
LayerResult coupling_forward(const FlowParams& params, std::size_t step_index, bool upper,
                             std::span<const double> h);

// Data-dependent actnorm initialization from the first mini-batch
// (columns of `batch` are squeezed samples). Runs once; throws on reuse.
void actnorm_init(FlowParams& params, const ad::Tensor& batch);

// Reusable evaluator; keeps workspaces so the per-candidate hot loop does
// not allocate.
class FlowScorer {
  public:
    explicit FlowScorer(const FlowParams& params);
    double logprob(std::span<const double> wbar, FlowTrace* trace = nullptr);
    double logprob(std::span<const cplx> w, FlowTrace* trace = nullptr);

  private:
    const FlowParams* p_;
    std::vector<double> h_, tmp_, raw_s_, raw_b_, scratch_a_, scratch_b_;
};

double flow_logprob(const FlowParams& params, std::span<const cplx> w,
                    FlowTrace* trace = nullptr);

// Layer-by-layer analytic inverse: latent (flat) back to wbar.
std::vector<double> flow_inverse(const FlowParams& params, std::span<const double> z);

// Mean NLL over the columns of a squeezed sample matrix (fast path).
double mean_nll(const FlowParams& params, const ad::Tensor& samples);

// Autodiff NLL: mean of -log q over the batch columns.
ad::NodePtr build_nll_loss(const FlowParams& params, const ad::Tensor& batch);

struct TrainOptions {
    std::size_t batch_size = 1024;
    std::size_t epochs = 20;
    double learning_rate = 1e-3;
    std::uint64_t seed = 1;
    double holdout_fraction = 0.1;
    bool verbose = false;
};

struct TrainLog {
    double initial_holdout_nll = 0.0;
    std::vector<double> epoch_holdout_nll;
    double final_holdout_nll = 0.0;
    std::size_t train_count = 0;
    std::size_t holdout_count = 0;
};

TrainLog train_flow(FlowParams& params, const noise::NoiseBatch& dataset,
                    const TrainOptions& opts);

struct CheckpointMeta {
    noise::NoiseSpec spec;
    std::uint64_t train_count = 0;
    std::uint64_t test_count = 0;
    double final_nll = 0.0;
    std::uint64_t seed = 0;
};

// Versioned binary container with named parameter arrays; bit-exact
// round trip. Layout in docs/FORMATS.md.
void save_checkpoint(const FlowParams& params, const CheckpointMeta& meta,
                     const std::string& path);
struct Checkpoint {
    FlowParams params;
    CheckpointMeta meta;
};
Checkpoint load_checkpoint(const std::string& path);

}  // namespace flowdet::flow
