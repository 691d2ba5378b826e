#include <cmath>

#include "flowdet/errors.hpp"
#include "flowdet/flow.hpp"

// Autodiff construction of the training NLL. Samples sit in the columns of a
// 2M x B matrix; every layer below mirrors the scalar fast path in flow.cpp.

namespace flowdet::flow {

using ad::NodePtr;

namespace {

NodePtr gather_rows(const NodePtr& x, const std::vector<std::size_t>& idx) {
    std::vector<NodePtr> parts;
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j + 1 < idx.size() && idx[j + 1] == idx[j] + 1) ++j;
        parts.push_back(ad::slice_rows(x, idx[i], idx[j] + 1));
        i = j + 1;
    }
    return parts.size() == 1 ? parts[0] : ad::concat_rows(parts);
}

// Rebuilds the full 2M x B state: rows listed in `trans` (sorted) come from
// u_prime (in that order), everything else passes through from x.
NodePtr reassemble(const NodePtr& x, const NodePtr& u_prime,
                   const std::vector<std::size_t>& trans, std::size_t d) {
    std::vector<NodePtr> parts;
    std::size_t r = 0, tpos = 0;
    while (r < d) {
        if (tpos < trans.size() && trans[tpos] == r) {
            std::size_t start_t = tpos;
            while (tpos < trans.size() && trans[tpos] == r) {
                ++tpos;
                ++r;
            }
            parts.push_back(ad::slice_rows(u_prime, start_t, tpos));
        } else {
            std::size_t start_r = r;
            while (r < d && (tpos >= trans.size() || trans[tpos] != r)) ++r;
            parts.push_back(ad::slice_rows(x, start_r, r));
        }
    }
    return parts.size() == 1 ? parts[0] : ad::concat_rows(parts);
}

NodePtr mlp_graph(const Mlp& mlp, NodePtr in) {
    std::size_t depth = mlp.weights.size();
    for (std::size_t l = 0; l < depth; ++l) {
        in = ad::add(ad::matmul(mlp.weights[l], in), mlp.biases[l]);
        if (l + 1 != depth) in = ad::relu(in);
    }
    return in;
}

NodePtr add_all(const std::vector<NodePtr>& terms) {
    NodePtr acc = terms[0];
    for (std::size_t i = 1; i < terms.size(); ++i) acc = ad::add(acc, terms[i]);
    return acc;
}

}  // namespace

ad::NodePtr build_nll_loss(const FlowParams& params, const ad::Tensor& batch) {
    const FlowConfig& cfg = params.config;
    std::size_t mdim = cfg.dim;
    std::size_t d = 2 * mdim;
    if (batch.rows() != d) throw ShapeError("build_nll_loss: batch row count must be 2*dim");
    double bsz = static_cast<double>(batch.cols());

    NodePtr x = ad::make_constant(batch);
    std::vector<NodePtr> per_sample_logdets;  // 1x1 nodes, data-independent
    std::vector<NodePtr> batch_logdet_sums;   // 1x1 nodes, already summed over batch

    for (const FlowStep& step : params.steps) {
        // actnorm: per-channel affine
        {
            NodePtr s_re = ad::slice_rows(step.actnorm_s, 0, 1);
            NodePtr s_im = ad::slice_rows(step.actnorm_s, 1, 2);
            NodePtr b_re = ad::slice_rows(step.actnorm_b, 0, 1);
            NodePtr b_im = ad::slice_rows(step.actnorm_b, 1, 2);
            NodePtr xre = ad::slice_rows(x, 0, mdim);
            NodePtr xim = ad::slice_rows(x, mdim, d);
            std::vector<NodePtr> halves{ad::add(ad::elemwise_mul(xre, s_re), b_re),
                                        ad::add(ad::elemwise_mul(xim, s_im), b_im)};
            x = ad::concat_rows(halves);
            per_sample_logdets.push_back(ad::scale(
                ad::sum(ad::log_op(ad::abs_op(step.actnorm_s))), static_cast<double>(mdim)));
        }
        // invertible 1x1 convolution acting on each (re, im) pair
        {
            NodePtr w00 = ad::slice_rows(step.conv_w, 0, 1);
            NodePtr w01 = ad::slice_rows(step.conv_w, 1, 2);
            NodePtr w10 = ad::slice_rows(step.conv_w, 2, 3);
            NodePtr w11 = ad::slice_rows(step.conv_w, 3, 4);
            NodePtr xre = ad::slice_rows(x, 0, mdim);
            NodePtr xim = ad::slice_rows(x, mdim, d);
            std::vector<NodePtr> halves{
                ad::add(ad::elemwise_mul(xre, w00), ad::elemwise_mul(xim, w01)),
                ad::add(ad::elemwise_mul(xre, w10), ad::elemwise_mul(xim, w11))};
            x = ad::concat_rows(halves);
            NodePtr det = ad::sub(ad::elemwise_mul(w00, w11), ad::elemwise_mul(w01, w10));
            per_sample_logdets.push_back(
                ad::scale(ad::log_op(ad::abs_op(det)), static_cast<double>(mdim)));
        }
        // alternating affine couplings; the raw log-scale is soft-bounded the
        // same way as the evaluation path in flow.cpp
        for (bool upper : {false, true}) {
            const CouplingBlock& block = upper ? step.upper : step.lower;
            CouplingLayout lay = coupling_layout(cfg, upper);
            NodePtr cond = gather_rows(x, lay.cond);
            NodePtr trans = gather_rows(x, lay.trans);
            NodePtr raw = mlp_graph(block.scale_net, cond);
            NodePtr bounded = ad::scale(ad::tanh_op(ad::scale(raw, 1.0 / kCouplingScaleBound)),
                                        kCouplingScaleBound);
            NodePtr bias = mlp_graph(block.bias_net, cond);
            NodePtr u_prime = ad::add(ad::elemwise_mul(trans, ad::exp_op(bounded)), bias);
            x = reassemble(x, u_prime, lay.trans, d);
            batch_logdet_sums.push_back(ad::sum(bounded));
        }
    }

    // Diagonal Gaussian latent, summed over dims and batch.
    NodePtr diff = ad::sub(x, params.latent_mu);
    NodePtr inv_var = ad::exp_op(ad::scale(params.latent_logvar, -1.0));
    NodePtr quad = ad::sum(ad::elemwise_mul(ad::elemwise_mul(diff, diff), inv_var));
    constexpr double kLog2Pi = 1.8378770664093454836;
    std::vector<NodePtr> total_terms{
        ad::make_constant(ad::Tensor::scalar(-0.5 * static_cast<double>(d) * bsz * kLog2Pi)),
        ad::scale(ad::sum(params.latent_logvar), -0.5 * bsz),
        ad::scale(quad, -0.5),
        ad::scale(add_all(per_sample_logdets), bsz),
    };
    for (const auto& t : batch_logdet_sums) total_terms.push_back(t);
    NodePtr total_loglik = add_all(total_terms);
    return ad::scale(total_loglik, -1.0 / bsz);
}

}  // namespace flowdet::flow
