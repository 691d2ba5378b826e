#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "flowdet/errors.hpp"
#include "flowdet/flow.hpp"

namespace flowdet::flow {

namespace {

// Divergence detection uses a trimmed holdout NLL: a single extreme tail
// sample that the flow extrapolates badly can dominate the plain mean by
// many orders of magnitude without the bulk of the fit moving at all.
double trimmed_mean_nll(const FlowParams& params, const ad::Tensor& samples, double trim) {
    FlowScorer scorer(params);
    std::size_t d = samples.rows();
    std::size_t count = samples.cols();
    std::vector<double> col(d), nll(count);
    for (std::size_t c = 0; c < count; ++c) {
        for (std::size_t i = 0; i < d; ++i) col[i] = samples.at(i, c);
        nll[c] = -scorer.logprob(std::span<const double>(col.data(), d));
    }
    std::sort(nll.begin(), nll.end());
    std::size_t keep = count - static_cast<std::size_t>(std::ceil(trim * count));
    if (keep < 1) keep = 1;
    double acc = 0.0;
    for (std::size_t c = 0; c < keep; ++c) acc += nll[c];
    return acc / static_cast<double>(keep);
}

// Keeps the 1x1 convolutions invertible: if an update drove |det W| below
// threshold, walk the weight back halfway toward its previous value.
void guard_conv_dets(FlowParams& params, const std::vector<std::array<double, 4>>& saved) {
    constexpr double kDetFloor = 1e-8;
    for (std::size_t k = 0; k < params.steps.size(); ++k) {
        auto& w = params.steps[k].conv_w->value.values;
        for (int tries = 0; tries < 60; ++tries) {
            double det = w[0] * w[3] - w[1] * w[2];
            if (std::fabs(det) >= kDetFloor) break;
            for (int i = 0; i < 4; ++i) w[i] = 0.5 * (w[i] + saved[k][i]);
        }
        double det = w[0] * w[3] - w[1] * w[2];
        if (std::fabs(det) < kDetFloor)
            for (int i = 0; i < 4; ++i) w[i] = saved[k][i];
    }
}

}  // namespace

TrainLog train_flow(FlowParams& params, const noise::NoiseBatch& dataset,
                    const TrainOptions& opts) {
    const FlowConfig& cfg = params.config;
    if (dataset.dim != cfg.dim)
        throw ConfigError("train_flow: dataset dim does not match flow dim");
    if (dataset.count < 4) throw ParamError("train_flow: dataset too small");
    if (opts.batch_size < 1 || opts.epochs < 1)
        throw ParamError("train_flow: batch_size and epochs must be >= 1");

    std::size_t d = 2 * cfg.dim;
    std::size_t holdout = std::max<std::size_t>(1, static_cast<std::size_t>(
                                                       std::llround(dataset.count * opts.holdout_fraction)));
    if (holdout >= dataset.count) holdout = dataset.count / 4;
    std::size_t n_train = dataset.count - holdout;

    ad::Tensor train_mat(ad::Shape{d, n_train});
    for (std::size_t s = 0; s < n_train; ++s)
        for (std::size_t i = 0; i < cfg.dim; ++i) {
            train_mat.at(i, s) = dataset.at(s, i).real();
            train_mat.at(cfg.dim + i, s) = dataset.at(s, i).imag();
        }
    ad::Tensor holdout_mat(ad::Shape{d, holdout});
    for (std::size_t s = 0; s < holdout; ++s)
        for (std::size_t i = 0; i < cfg.dim; ++i) {
            holdout_mat.at(i, s) = dataset.at(n_train + s, i).real();
            holdout_mat.at(cfg.dim + i, s) = dataset.at(n_train + s, i).imag();
        }

    TrainLog log;
    log.train_count = n_train;
    log.holdout_count = holdout;

    auto params_vec = params.all_params();
    auto adam = ad::AdamState::init(params_vec, opts.learning_rate);

    std::size_t bs = std::min(opts.batch_size, n_train);
    std::vector<std::size_t> order(n_train);
    std::iota(order.begin(), order.end(), 0);
    ad::Tensor batch(ad::Shape{d, bs});

    int consecutive_bad = 0;
    double initial_trimmed = 0.0;
    for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
        // deterministic per-epoch shuffle
        CounterRng shuffle_rng(mix64(opts.seed + (epoch + 1) * kGolden), kTagShuffle);
        for (std::size_t i = n_train - 1; i > 0; --i) {
            std::size_t j = shuffle_rng.bits(i) % (i + 1);
            std::swap(order[i], order[j]);
        }

        for (std::size_t start = 0; start < n_train; start += bs) {
            std::size_t cur = std::min(bs, n_train - start);
            ad::Tensor* bptr = &batch;
            ad::Tensor tail_batch;
            if (cur != bs) {
                tail_batch = ad::Tensor(ad::Shape{d, cur});
                bptr = &tail_batch;
            }
            for (std::size_t c = 0; c < cur; ++c) {
                std::size_t src = order[start + c];
                for (std::size_t i = 0; i < d; ++i) bptr->at(i, c) = train_mat.at(i, src);
            }

            if (!params.actnorm_initialized) {
                actnorm_init(params, *bptr);
                log.initial_holdout_nll = mean_nll(params, holdout_mat);
                initial_trimmed = trimmed_mean_nll(params, holdout_mat, 0.01);
            }

            std::vector<std::array<double, 4>> saved_w(params.steps.size());
            for (std::size_t k = 0; k < params.steps.size(); ++k)
                for (int i = 0; i < 4; ++i)
                    saved_w[k][i] = params.steps[k].conv_w->value.values[i];

            try {
                ad::NodePtr loss = build_nll_loss(params, *bptr);
                ad::backward(loss);
                ad::adam_step(params_vec, adam);
            } catch (const NumericError& e) {
                throw TrainingDiverged(std::string("training diverged (numeric overflow in epoch ") +
                                       std::to_string(epoch + 1) + "): " + e.what());
            }
            guard_conv_dets(params, saved_w);
        }

        double nll = mean_nll(params, holdout_mat);
        log.epoch_holdout_nll.push_back(nll);
        double trimmed = trimmed_mean_nll(params, holdout_mat, 0.01);
        if (opts.verbose)
            std::fprintf(stderr, "epoch %zu/%zu  holdout nll %.6f (trimmed %.6f)\n", epoch + 1,
                         opts.epochs, nll, trimmed);

        double threshold = initial_trimmed + 9.0 * std::fabs(initial_trimmed);
        if (trimmed > threshold) {
            if (++consecutive_bad >= 3)
                throw TrainingDiverged("training diverged: trimmed holdout NLL " +
                                       std::to_string(trimmed) + " vs initial " +
                                       std::to_string(initial_trimmed) + " for 3 epochs");
        } else {
            consecutive_bad = 0;
        }
    }
    log.final_holdout_nll = log.epoch_holdout_nll.back();
    return log;
}

}  // namespace flowdet::flow
