#include "flowdet/flow.hpp"

#include <cmath>
#include <numbers>

#include "flowdet/errors.hpp"
#include "flowdet/rng.hpp"

namespace flowdet::flow {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

double bounded_log_scale(double raw) {
    return kCouplingScaleBound * std::tanh(raw / kCouplingScaleBound);
}

void check_layer_finite(std::span<const double> h, const char* layer, std::size_t step) {
    for (double v : h)
        if (!std::isfinite(v))
            throw NumericError(std::string("non-finite activation after ") + layer + " in step " +
                               std::to_string(step));
}

// out = W_L(...relu(W_1 in + b_1)...) + b_L
void mlp_eval(const Mlp& mlp, std::span<const double> in, std::span<double> out,
              std::vector<double>& a, std::vector<double>& b) {
    const double* cur = in.data();
    std::size_t depth = mlp.weights.size();
    for (std::size_t l = 0; l < depth; ++l) {
        const auto& W = mlp.weights[l]->value;
        const auto& bias = mlp.biases[l]->value;
        std::size_t rows = W.rows(), cols = W.cols();
        std::vector<double>& dst_vec = (l % 2 == 0) ? a : b;
        double* dst;
        if (l == depth - 1) {
            dst = out.data();
        } else {
            dst_vec.resize(rows);
            dst = dst_vec.data();
        }
        for (std::size_t r = 0; r < rows; ++r) {
            double acc = bias.values[r];
            const double* wrow = W.values.data() + r * cols;
            for (std::size_t c = 0; c < cols; ++c) acc += wrow[c] * cur[c];
            dst[r] = (l == depth - 1) ? acc : (acc > 0.0 ? acc : 0.0);
        }
        cur = dst;
    }
}

}  // namespace

FlowConfig FlowConfig::for_dim(std::size_t m, std::size_t k, std::size_t hidden) {
    FlowConfig c;
    c.dim = m;
    c.k_steps = k;
    c.hidden_width = hidden;
    c.partition_m = m / 2;  // 0 for M == 1: channel-split mode
    return c;
}

void FlowConfig::validate() const {
    if (k_steps < 1) throw ParamError("flow config: k_steps must be >= 1");
    if (dim < 1) throw ParamError("flow config: dim must be >= 1");
    if (dim > 1 && !(partition_m >= 1 && partition_m < dim))
        throw ParamError("flow config: need 1 <= partition_m < dim");
    if (hidden_width < 1) throw ParamError("flow config: hidden_width must be >= 1");
    if (mlp_depth < 2) throw ParamError("flow config: mlp_depth must be >= 2");
}

std::vector<double> squeeze_flat(std::span<const cplx> w) {
    std::vector<double> out(2 * w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
        out[i] = w[i].real();
        out[w.size() + i] = w[i].imag();
    }
    return out;
}

std::vector<cplx> unsqueeze_flat(std::span<const double> wbar) {
    std::size_t m = wbar.size() / 2;
    std::vector<cplx> out(m);
    for (std::size_t i = 0; i < m; ++i) out[i] = {wbar[i], wbar[m + i]};
    return out;
}

ad::Tensor squeeze(std::span<const cplx> w) {
    ad::Tensor t(ad::Shape{w.size(), 2});
    for (std::size_t i = 0; i < w.size(); ++i) {
        t.at(i, 0) = w[i].real();
        t.at(i, 1) = w[i].imag();
    }
    return t;
}

std::vector<cplx> unsqueeze(const ad::Tensor& t) {
    if (t.cols() != 2) throw ShapeError("unsqueeze: expected an M x 2 tensor");
    std::vector<cplx> out(t.rows());
    for (std::size_t i = 0; i < t.rows(); ++i) out[i] = {t.at(i, 0), t.at(i, 1)};
    return out;
}

CouplingLayout coupling_layout(const FlowConfig& config, bool upper) {
    CouplingLayout lay;
    std::size_t mdim = config.dim;
    if (mdim == 1) {
        // Split the two real channels.
        if (!upper) {
            lay.cond = {0};
            lay.trans = {1};
        } else {
            lay.cond = {1};
            lay.trans = {0};
        }
        return lay;
    }
    std::size_t m = config.partition_m;
    std::vector<std::size_t> head, tail;
    for (std::size_t i = 0; i < m; ++i) head.push_back(i);
    for (std::size_t i = 0; i < m; ++i) head.push_back(mdim + i);
    for (std::size_t i = m; i < mdim; ++i) tail.push_back(i);
    for (std::size_t i = m; i < mdim; ++i) tail.push_back(mdim + i);
    if (!upper) {
        lay.cond = head;
        lay.trans = tail;
    } else {
        lay.cond = tail;
        lay.trans = head;
    }
    return lay;
}

std::vector<ad::NodePtr> FlowParams::all_params() const {
    std::vector<ad::NodePtr> out;
    auto push_mlp = [&](const Mlp& mlp) {
        for (const auto& w : mlp.weights) out.push_back(w);
        for (const auto& b : mlp.biases) out.push_back(b);
    };
    for (const auto& s : steps) {
        out.push_back(s.actnorm_s);
        out.push_back(s.actnorm_b);
        out.push_back(s.conv_w);
        push_mlp(s.lower.scale_net);
        push_mlp(s.lower.bias_net);
        push_mlp(s.upper.scale_net);
        push_mlp(s.upper.bias_net);
    }
    out.push_back(latent_mu);
    out.push_back(latent_logvar);
    return out;
}

namespace {

Mlp init_mlp(std::size_t in_dim, std::size_t out_dim, const FlowConfig& cfg,
             const CounterRng& rng, std::uint64_t& counter) {
    Mlp mlp;
    std::size_t depth = cfg.mlp_depth;
    for (std::size_t l = 0; l < depth; ++l) {
        std::size_t li = (l == 0) ? in_dim : cfg.hidden_width;
        std::size_t lo = (l == depth - 1) ? out_dim : cfg.hidden_width;
        ad::Tensor w(ad::Shape{lo, li});
        if (l != depth - 1) {
            double bound = 1.0 / std::sqrt(static_cast<double>(li));
            for (auto& v : w.values) v = (rng.uniform(counter++) * 2.0 - 1.0) * bound;
        }
        // final layer stays zero so the coupling starts as the identity
        mlp.weights.push_back(ad::make_param(std::move(w)));
        mlp.biases.push_back(ad::make_param(ad::Tensor(ad::Shape{lo, 1})));
    }
    return mlp;
}

}  // namespace

FlowParams init_flow_params(const FlowConfig& config, std::uint64_t seed) {
    config.validate();
    FlowParams p;
    p.config = config;
    CounterRng rng(seed, kTagParamInit);
    std::uint64_t counter = 0;
    auto lower_lay = coupling_layout(config, false);
    auto upper_lay = coupling_layout(config, true);
    for (std::size_t k = 0; k < config.k_steps; ++k) {
        FlowStep s;
        s.actnorm_s = ad::make_param(ad::Tensor(ad::Shape{2, 1}, {1.0, 1.0}));
        s.actnorm_b = ad::make_param(ad::Tensor(ad::Shape{2, 1}, {0.0, 0.0}));
        double th = 2.0 * std::numbers::pi * rng.uniform(counter++);
        s.conv_w = ad::make_param(
            ad::Tensor(ad::Shape{4, 1}, {std::cos(th), -std::sin(th), std::sin(th), std::cos(th)}));
        s.lower.scale_net =
            init_mlp(lower_lay.cond.size(), lower_lay.trans.size(), config, rng, counter);
        s.lower.bias_net =
            init_mlp(lower_lay.cond.size(), lower_lay.trans.size(), config, rng, counter);
        s.upper.scale_net =
            init_mlp(upper_lay.cond.size(), upper_lay.trans.size(), config, rng, counter);
        s.upper.bias_net =
            init_mlp(upper_lay.cond.size(), upper_lay.trans.size(), config, rng, counter);
        p.steps.push_back(std::move(s));
    }
    p.latent_mu = ad::make_param(ad::Tensor(ad::Shape{2 * config.dim, 1}));
    p.latent_logvar = ad::make_param(ad::Tensor(ad::Shape{2 * config.dim, 1}));
    return p;
}

LayerResult actnorm_forward(const FlowStep& step, std::span<const double> h, std::size_t m_dim) {
    const auto& s = step.actnorm_s->value.values;
    const auto& b = step.actnorm_b->value.values;
    if (s[0] == 0.0 || s[1] == 0.0) throw ParamError("actnorm scale is zero");
    LayerResult r;
    r.h.assign(h.begin(), h.end());
    for (std::size_t i = 0; i < m_dim; ++i) {
        r.h[i] = r.h[i] * s[0] + b[0];
        r.h[m_dim + i] = r.h[m_dim + i] * s[1] + b[1];
    }
    r.log_det =
        static_cast<double>(m_dim) * (std::log(std::fabs(s[0])) + std::log(std::fabs(s[1])));
    return r;
}

LayerResult invconv_forward(const FlowStep& step, std::span<const double> h, std::size_t m_dim) {
    const auto& w = step.conv_w->value.values;
    double det = w[0] * w[3] - w[1] * w[2];
    if (det == 0.0 || !std::isfinite(det)) throw ParamError("1x1 convolution weight is singular");
    LayerResult r;
    r.h.assign(h.begin(), h.end());
    for (std::size_t i = 0; i < m_dim; ++i) {
        double re = r.h[i], im = r.h[m_dim + i];
        r.h[i] = w[0] * re + w[1] * im;
        r.h[m_dim + i] = w[2] * re + w[3] * im;
    }
    r.log_det = static_cast<double>(m_dim) * std::log(std::fabs(det));
    return r;
}

LayerResult coupling_forward(const FlowParams& params, std::size_t step_index, bool upper,
                             std::span<const double> h) {
    const FlowStep& step = params.steps[step_index];
    const CouplingBlock& block = upper ? step.upper : step.lower;
    CouplingLayout lay = coupling_layout(params.config, upper);
    LayerResult r;
    r.h.assign(h.begin(), h.end());
    std::vector<double> cond(lay.cond.size());
    for (std::size_t i = 0; i < lay.cond.size(); ++i) cond[i] = h[lay.cond[i]];
    std::vector<double> raw_s(lay.trans.size()), raw_b(lay.trans.size());
    std::vector<double> sa, sb;
    mlp_eval(block.scale_net, cond, raw_s, sa, sb);
    mlp_eval(block.bias_net, cond, raw_b, sa, sb);
    double ld = 0.0;
    for (std::size_t i = 0; i < lay.trans.size(); ++i) {
        double a = bounded_log_scale(raw_s[i]);
        r.h[lay.trans[i]] = h[lay.trans[i]] * std::exp(a) + raw_b[i];
        ld += a;
    }
    r.log_det = ld;
    return r;
}

FlowScorer::FlowScorer(const FlowParams& params) : p_(&params) {
    std::size_t d = 2 * params.config.dim;
    h_.resize(d);
    tmp_.resize(d);
    raw_s_.resize(d);
    raw_b_.resize(d);
    std::size_t w = std::max(params.config.hidden_width, d);
    scratch_a_.resize(w);
    scratch_b_.resize(w);
}

double FlowScorer::logprob(std::span<const cplx> w, FlowTrace* trace) {
    std::size_t mdim = p_->config.dim;
    if (w.size() != mdim) throw ShapeError("flow_logprob: dimension mismatch");
    for (std::size_t i = 0; i < mdim; ++i) {
        h_[i] = w[i].real();
        h_[mdim + i] = w[i].imag();
    }
    return logprob(std::span<const double>(h_.data(), 2 * mdim), trace);
}

double FlowScorer::logprob(std::span<const double> wbar, FlowTrace* trace) {
    const FlowConfig& cfg = p_->config;
    std::size_t mdim = cfg.dim;
    std::size_t d = 2 * mdim;
    if (wbar.size() != d) throw ShapeError("flow_logprob: dimension mismatch");
    if (wbar.data() != h_.data()) std::copy(wbar.begin(), wbar.end(), h_.begin());
    if (trace) {
        trace->activations.clear();
        trace->log_dets.clear();
        trace->layer_names.clear();
        trace->activations.emplace_back(h_.begin(), h_.end());
    }
    double logdet_total = 0.0;
    auto record = [&](double ld, const char* name, std::size_t k) {
        check_layer_finite(h_, name, k);
        logdet_total += ld;
        if (trace) {
            trace->activations.emplace_back(h_.begin(), h_.end());
            trace->log_dets.push_back(ld);
            trace->layer_names.push_back(std::string(name) + "#" + std::to_string(k));
        }
    };

    for (std::size_t k = 0; k < p_->steps.size(); ++k) {
        const FlowStep& step = p_->steps[k];
        {
            const auto& s = step.actnorm_s->value.values;
            const auto& b = step.actnorm_b->value.values;
            if (s[0] == 0.0 || s[1] == 0.0) throw ParamError("actnorm scale is zero");
            for (std::size_t i = 0; i < mdim; ++i) {
                h_[i] = h_[i] * s[0] + b[0];
                h_[mdim + i] = h_[mdim + i] * s[1] + b[1];
            }
            record(mdim * (std::log(std::fabs(s[0])) + std::log(std::fabs(s[1]))), "actnorm", k);
        }
        {
            const auto& wv = step.conv_w->value.values;
            double det = wv[0] * wv[3] - wv[1] * wv[2];
            if (det == 0.0 || !std::isfinite(det))
                throw ParamError("1x1 convolution weight is singular");
            for (std::size_t i = 0; i < mdim; ++i) {
                double re = h_[i], im = h_[mdim + i];
                h_[i] = wv[0] * re + wv[1] * im;
                h_[mdim + i] = wv[2] * re + wv[3] * im;
            }
            record(mdim * std::log(std::fabs(det)), "invconv", k);
        }
        for (bool upper : {false, true}) {
            const CouplingBlock& block = upper ? step.upper : step.lower;
            CouplingLayout lay = coupling_layout(cfg, upper);
            for (std::size_t i = 0; i < lay.cond.size(); ++i) tmp_[i] = h_[lay.cond[i]];
            std::span<const double> cond(tmp_.data(), lay.cond.size());
            mlp_eval(block.scale_net, cond, std::span<double>(raw_s_.data(), lay.trans.size()),
                     scratch_a_, scratch_b_);
            mlp_eval(block.bias_net, cond, std::span<double>(raw_b_.data(), lay.trans.size()),
                     scratch_a_, scratch_b_);
            double ld = 0.0;
            for (std::size_t i = 0; i < lay.trans.size(); ++i) {
                std::size_t t = lay.trans[i];
                double a = bounded_log_scale(raw_s_[i]);
                h_[t] = h_[t] * std::exp(a) + raw_b_[i];
                ld += a;
            }
            record(ld, upper ? "coupling_upper" : "coupling_lower", k);
        }
    }

    const auto& mu = p_->latent_mu->value.values;
    const auto& lv = p_->latent_logvar->value.values;
    double lp = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        double diff = h_[i] - mu[i];
        lp += -0.5 * (kLog2Pi + lv[i] + diff * diff * std::exp(-lv[i]));
    }
    if (!std::isfinite(lp)) throw NumericError("non-finite latent log-probability");
    if (trace) {
        trace->latent_logprob = lp;
        trace->total = lp + logdet_total;
    }
    return lp + logdet_total;
}

double flow_logprob(const FlowParams& params, std::span<const cplx> w, FlowTrace* trace) {
    FlowScorer scorer(params);
    return scorer.logprob(w, trace);
}

std::vector<double> flow_inverse(const FlowParams& params, std::span<const double> z) {
    const FlowConfig& cfg = params.config;
    std::size_t mdim = cfg.dim;
    std::size_t d = 2 * mdim;
    if (z.size() != d) throw ShapeError("flow_inverse: dimension mismatch");
    std::vector<double> h(z.begin(), z.end());
    std::vector<double> cond, raw_s, raw_b, sa, sb;
    for (std::size_t k = params.steps.size(); k-- > 0;) {
        const FlowStep& step = params.steps[k];
        for (bool upper : {true, false}) {
            const CouplingBlock& block = upper ? step.upper : step.lower;
            CouplingLayout lay = coupling_layout(cfg, upper);
            cond.resize(lay.cond.size());
            for (std::size_t i = 0; i < lay.cond.size(); ++i) cond[i] = h[lay.cond[i]];
            raw_s.resize(lay.trans.size());
            raw_b.resize(lay.trans.size());
            mlp_eval(block.scale_net, cond, raw_s, sa, sb);
            mlp_eval(block.bias_net, cond, raw_b, sa, sb);
            for (std::size_t i = 0; i < lay.trans.size(); ++i) {
                std::size_t t = lay.trans[i];
                h[t] = (h[t] - raw_b[i]) * std::exp(-bounded_log_scale(raw_s[i]));
            }
        }
        {
            const auto& wv = step.conv_w->value.values;
            double det = wv[0] * wv[3] - wv[1] * wv[2];
            if (det == 0.0) throw ParamError("1x1 convolution weight is singular");
            for (std::size_t i = 0; i < mdim; ++i) {
                double a = h[i], b = h[mdim + i];
                h[i] = (wv[3] * a - wv[1] * b) / det;
                h[mdim + i] = (-wv[2] * a + wv[0] * b) / det;
            }
        }
        {
            const auto& s = step.actnorm_s->value.values;
            const auto& b = step.actnorm_b->value.values;
            for (std::size_t i = 0; i < mdim; ++i) {
                h[i] = (h[i] - b[0]) / s[0];
                h[mdim + i] = (h[mdim + i] - b[1]) / s[1];
            }
        }
    }
    return h;
}

void actnorm_init(FlowParams& params, const ad::Tensor& batch) {
    if (params.actnorm_initialized) throw ParamError("actnorm already initialized");
    const FlowConfig& cfg = params.config;
    std::size_t mdim = cfg.dim;
    std::size_t d = 2 * mdim;
    if (batch.rows() != d) throw ShapeError("actnorm_init: batch row count must be 2*dim");
    std::size_t bsz = batch.cols();
    if (bsz * mdim < 2) throw ParamError("actnorm_init: need at least 2 values per channel");

    // Propagate the batch through each step, initializing that step's
    // actnorm from the activations that reach it.
    ad::Tensor work = batch;
    std::vector<double> col(d);
    for (std::size_t k = 0; k < params.steps.size(); ++k) {
        FlowStep& step = params.steps[k];
        double n = static_cast<double>(bsz * mdim);
        double mean[2] = {0.0, 0.0}, var[2] = {0.0, 0.0};
        for (std::size_t c = 0; c < bsz; ++c)
            for (std::size_t i = 0; i < mdim; ++i) {
                mean[0] += work.at(i, c);
                mean[1] += work.at(mdim + i, c);
            }
        mean[0] /= n;
        mean[1] /= n;
        for (std::size_t c = 0; c < bsz; ++c)
            for (std::size_t i = 0; i < mdim; ++i) {
                double d0 = work.at(i, c) - mean[0];
                double d1 = work.at(mdim + i, c) - mean[1];
                var[0] += d0 * d0;
                var[1] += d1 * d1;
            }
        var[0] /= n;
        var[1] /= n;
        for (int ch = 0; ch < 2; ++ch) {
            double sd = std::sqrt(var[ch]);
            if (sd < 1e-6) sd = 1e-6;
            step.actnorm_s->value.values[ch] = 1.0 / sd;
            step.actnorm_b->value.values[ch] = -mean[ch] / sd;
        }
        for (std::size_t c = 0; c < bsz; ++c) {
            for (std::size_t i = 0; i < d; ++i) col[i] = work.at(i, c);
            LayerResult r1 = actnorm_forward(step, col, mdim);
            LayerResult r2 = invconv_forward(step, r1.h, mdim);
            LayerResult r3 = coupling_forward(params, k, false, r2.h);
            LayerResult r4 = coupling_forward(params, k, true, r3.h);
            for (std::size_t i = 0; i < d; ++i) work.at(i, c) = r4.h[i];
        }
    }
    params.actnorm_initialized = true;
}

double mean_nll(const FlowParams& params, const ad::Tensor& samples) {
    FlowScorer scorer(params);
    std::size_t d = samples.rows();
    std::size_t count = samples.cols();
    std::vector<double> col(d);
    double total = 0.0;
    for (std::size_t c = 0; c < count; ++c) {
        for (std::size_t i = 0; i < d; ++i) col[i] = samples.at(i, c);
        total += scorer.logprob(std::span<const double>(col.data(), d));
    }
    return -total / static_cast<double>(count);
}

}  // namespace flowdet::flow
