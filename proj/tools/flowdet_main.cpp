#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <limits>
#include <optional>
#include <string>

#include "flowdet/bench.hpp"
#include "flowdet/detectors.hpp"
#include "flowdet/flow.hpp"
#include "flowdet/mimo.hpp"
#include "flowdet/noise.hpp"

namespace {

using namespace flowdet;

struct NoiseFlags {
    std::string family = "gaussian";
    double alpha = 1.9;
    double sigma = 1.0;
    double m = 2.0;
    double omega = 1.0;

    void attach(CLI::App* cmd) {
        cmd->add_option("--family", family, "noise family")
            ->check(CLI::IsMember({"gaussian", "sas", "gaussian_mixture", "nakagami"}));
        cmd->add_option("--alpha", alpha, "sas characteristic exponent");
        cmd->add_option("--sigma", sigma, "scale (std per real dimension / sas scale exponent)");
        cmd->add_option("--m", m, "nakagami shape");
        cmd->add_option("--omega", omega, "nakagami spread");
    }

    noise::NoiseSpec spec() const {
        if (family == "gaussian") return noise::NoiseSpec::gaussian(sigma);
        if (family == "sas") return noise::NoiseSpec::sas(alpha, sigma);
        if (family == "gaussian_mixture") return noise::NoiseSpec::mixture_default();
        return noise::NoiseSpec::nakagami(m, omega);
    }
};

int cmd_noise_gen(const NoiseFlags& nf, std::size_t count, std::size_t dim, std::uint64_t seed,
                  const std::string& out) {
    auto batch = noise::sample_noise(nf.spec(), count, dim, seed);
    noise::write_noise_file(out, batch);
    std::printf("wrote %zu x %zu samples (%s) to %s\n", batch.count, batch.dim,
                batch.spec.family_name().c_str(), out.c_str());
    return 0;
}

int cmd_train(const NoiseFlags& nf, double snr, std::size_t ntx, std::size_t nrx,
              std::size_t k_steps, std::size_t hidden, std::size_t batch, std::size_t epochs,
              double lr, std::uint64_t seed, std::size_t train_samples, std::size_t test_samples,
              std::string out, const std::string& ckpt_dir, bool verbose) {
    mimo::MimoScenario sc;
    sc.n_tx = ntx;
    sc.n_rx = nrx;
    sc.snr_db = snr;
    sc.noise = nf.spec();
    sc.validate();

    noise::NoiseSpec spec = mimo::noise_at_snr(sc);
    auto dataset = noise::sample_noise(spec, train_samples + test_samples, nrx, seed);

    flow::FlowConfig config = flow::FlowConfig::for_dim(nrx, k_steps, hidden);
    flow::FlowParams params = flow::init_flow_params(config, seed);
    flow::TrainOptions opts;
    opts.batch_size = batch;
    opts.epochs = epochs;
    opts.learning_rate = lr;
    opts.seed = seed;
    opts.holdout_fraction =
        static_cast<double>(test_samples) / static_cast<double>(train_samples + test_samples);
    opts.verbose = verbose;
    auto log = flow::train_flow(params, dataset, opts);

    if (out.empty()) out = bench::CheckpointRegistry(ckpt_dir).path_for(sc);
    flow::CheckpointMeta meta;
    meta.spec = spec;
    meta.train_count = log.train_count;
    meta.test_count = log.holdout_count;
    meta.final_nll = log.final_holdout_nll;
    meta.seed = seed;
    flow::save_checkpoint(params, meta, out);
    std::printf("trained %zu epochs on %zu samples; holdout NLL %.6f (%.6f/dim); saved %s\n",
                epochs, log.train_count, log.final_holdout_nll,
                log.final_holdout_nll / (2.0 * static_cast<double>(nrx)), out.c_str());
    return 0;
}

int cmd_bench(std::string preset, const NoiseFlags& nf, std::string axis,
              std::vector<double> values, double fixed_snr, std::size_t ntx, std::size_t nrx,
              std::vector<std::string> detector_names, std::size_t frames, std::uint64_t seed,
              std::string csv, const std::string& ckpt_dir, int threads, bool train_missing,
              bool verbose) {
    bench::BenchPlan plan;
    if (!preset.empty()) {
        plan = bench::preset_plan(preset);
    } else {
        plan.scenario.n_tx = ntx;
        plan.scenario.n_rx = nrx;
        plan.scenario.noise = nf.spec();
        plan.scenario.snr_db = fixed_snr;
        plan.axis = axis == "alpha" ? bench::SweepAxis::kAlpha : bench::SweepAxis::kSnr;
        plan.axis_values = std::move(values);
        for (const auto& d : detector_names)
            plan.detectors.push_back(bench::DetectorSpec::parse(d));
    }
    if (frames) plan.frames = frames;
    if (seed) plan.base_seed = seed;
    if (!csv.empty()) plan.csv_path = csv;
    if (plan.csv_path.empty())
        plan.csv_path = (preset.empty() ? std::string("bench") : preset) + ".csv";
    plan.threads = threads;
    plan.validate();

    bench::CheckpointRegistry registry(ckpt_dir);
    if (train_missing) {
        for (std::size_t pt = 0; pt < plan.axis_values.size(); ++pt)
            for (const auto& d : plan.detectors)
                if (d.needs_flow() && !registry.has(plan.scenario_at(pt))) {
                    auto sc = plan.scenario_at(pt);
                    std::printf("training missing checkpoint %s\n",
                                bench::CheckpointRegistry::key(sc).c_str());
                    registry.train_and_store(sc, 100000, 20000, 15, verbose);
                }
    }
    auto records = bench::run_sweep(plan, registry);
    for (const auto& r : records)
        std::printf("%-18s %-16s axis=%g  ber=%.3e  (%zu errors, %zu divergent, %.1fs)\n",
                    r.detector.c_str(), r.family.c_str(),
                    plan.axis == bench::SweepAxis::kSnr ? r.snr_db : r.alpha, r.ber, r.bit_errors,
                    r.divergence_count, r.wall_time_s);
    std::printf("wrote %s\n", plan.csv_path.c_str());
    return 0;
}

int cmd_detect(const std::string& frames_path, const std::string& detector_name,
               const std::string& checkpoint, int t_iters, int e_errors, double noise_var,
               const NoiseFlags& oracle_flags) {
    auto frames = mimo::read_frame_file(frames_path);
    if (frames.empty()) throw ConfigError("frame file is empty");

    bench::DetectorSpec spec = bench::DetectorSpec::parse(detector_name);
    det::DetectorConfig config;
    config.kind = spec.kind;
    config.gamp_iters = t_iters > 0 ? t_iters : spec.T;
    config.max_errors = e_errors >= 0 ? e_errors : spec.E;
    config.noise_var_per_real_dim = noise_var;

    std::optional<flow::Checkpoint> ck;
    if (spec.needs_flow()) {
        if (checkpoint.empty()) throw ConfigError("detector needs --checkpoint");
        ck = flow::load_checkpoint(checkpoint);
        config.flow = &ck->params;
    }
    if (spec.kind == det::DetectorKind::kOracleMle) config.oracle_noise = oracle_flags.spec();

    det::DetectorRuntime runtime(config, frames[0].n_tx, frames[0].n_rx);
    for (std::size_t f = 0; f < frames.size(); ++f) {
        auto r = runtime.detect(frames[f]);
        nlohmann::json j;
        j["frame"] = f;
        std::vector<std::vector<double>> xs;
        for (const auto& s : r.x_hat) xs.push_back({s.real(), s.imag()});
        j["x_hat"] = xs;
        std::string bits;
        for (const auto& s : r.x_hat) {
            int idx = mimo::qpsk_slice_index(s);
            bits += static_cast<char>('0' + ((idx >> 1) & 1));
            bits += static_cast<char>('0' + (idx & 1));
        }
        j["bits"] = bits;
        j["score"] = r.score;
        j["evaluations"] = r.evaluations;
        j["iterations"] = r.iterations_used;
        j["diverged"] = r.diverged;
        std::cout << j.dump() << "\n";
    }
    return 0;
}

int cmd_frame_gen(const NoiseFlags& nf, double snr, std::size_t ntx, std::size_t nrx,
                  std::size_t count, std::uint64_t seed, const std::string& out) {
    mimo::MimoScenario sc;
    sc.n_tx = ntx;
    sc.n_rx = nrx;
    sc.snr_db = snr;
    sc.noise = nf.spec();
    sc.seed = seed;
    auto frames = mimo::gen_frames(sc, count);
    mimo::write_frame_file(out, frames);
    std::printf("wrote %zu frames (%zux%zu, snr %g dB, %s) to %s\n", count, ntx, nrx, snr,
                sc.noise.family_name().c_str(), out.c_str());
    return 0;
}

int cmd_plot(const std::string& csv, const std::string& axis, const std::string& out) {
    bench::emit_plot(csv, axis == "alpha" ? bench::SweepAxis::kAlpha : bench::SweepAxis::kSnr,
                     out);
    std::printf("wrote %s\n", out.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"flowdet: flow-based maximum-likelihood MIMO detection laboratory"};
    app.set_config("--config", "", "read options from an INI/TOML file");
    app.require_subcommand(0, 1);

    auto* gen = app.add_subcommand("noise-gen", "sample a noise batch to a binary file");
    NoiseFlags gen_noise;
    gen_noise.attach(gen);
    std::size_t gen_count = 100000, gen_dim = 4;
    std::uint64_t gen_seed = 1;
    std::string gen_out;
    gen->add_option("--count", gen_count, "number of vectors");
    gen->add_option("--dim", gen_dim, "complex dimension per vector");
    gen->add_option("--seed", gen_seed, "rng seed");
    gen->add_option("--out", gen_out, "output path")->required();

    auto* train = app.add_subcommand("train", "train a flow on noise samples");
    NoiseFlags train_noise;
    train_noise.family = "sas";
    train_noise.attach(train);
    double train_snr = 25.0;
    std::size_t train_ntx = 4, train_nrx = 4, train_k = 4, train_hidden = 8;
    std::size_t train_batch = 1024, train_epochs = 15;
    std::size_t train_samples = 100000, test_samples = 20000;
    double train_lr = 1e-3;
    std::uint64_t train_seed = 1;
    std::string train_out, train_ckpt_dir = "checkpoints";
    bool train_verbose = false;
    train->add_option("--noise-family", train_noise.family, "alias of --family")
        ->check(CLI::IsMember({"gaussian", "sas", "gaussian_mixture", "nakagami"}));
    train->add_option("--snr", train_snr, "SNR (dB) fixing the noise scale");
    train->add_option("--ntx", train_ntx, "transmit antennas");
    train->add_option("--nrx", train_nrx, "receive antennas (flow dimension)");
    train->add_option("--k-steps", train_k, "flow steps");
    train->add_option("--hidden", train_hidden, "coupling MLP width");
    train->add_option("--batch", train_batch, "mini-batch size");
    train->add_option("--epochs", train_epochs, "training epochs");
    train->add_option("--lr", train_lr, "Adam learning rate");
    train->add_option("--seed", train_seed, "rng seed");
    train->add_option("--train-samples", train_samples, "training sample count");
    train->add_option("--test-samples", test_samples, "held-out sample count");
    train->add_option("--out", train_out, "checkpoint path (default: registry name)");
    train->add_option("--ckpt-dir", train_ckpt_dir, "checkpoint registry directory");
    train->add_flag("--verbose", train_verbose, "per-epoch progress");

    auto* bench_cmd = app.add_subcommand("bench", "Monte Carlo BER sweep");
    NoiseFlags bench_noise;
    bench_noise.family = "sas";
    bench_noise.attach(bench_cmd);
    std::string bench_preset, bench_axis = "snr", bench_csv;
    std::vector<double> bench_values;
    double bench_fixed_snr = 25.0;
    std::size_t bench_ntx = 4, bench_nrx = 4, bench_frames = 0;
    std::uint64_t bench_seed = 0;
    std::vector<std::string> bench_detectors;
    std::string bench_ckpt_dir = "checkpoints";
    int bench_threads = 1;
    bool bench_train_missing = false, bench_verbose = false;
    bench_cmd->add_option("--preset", bench_preset, "named plan: fig3-desk .. fig10-desk");
    bench_cmd->add_option("--axis", bench_axis, "sweep axis")
        ->check(CLI::IsMember({"snr", "alpha"}));
    bench_cmd->add_option("--values", bench_values, "sweep values");
    bench_cmd->add_option("--snr", bench_fixed_snr, "fixed SNR for alpha sweeps");
    bench_cmd->add_option("--ntx", bench_ntx, "transmit antennas");
    bench_cmd->add_option("--nrx", bench_nrx, "receive antennas");
    bench_cmd->add_option("--detectors", bench_detectors,
                          "detector names, e.g. manfe e_mle ggamp30_manfe1");
    bench_cmd->add_option("--frames", bench_frames, "frames per point (preset override)");
    bench_cmd->add_option("--seed", bench_seed, "base seed (preset override)");
    bench_cmd->add_option("--out", bench_csv, "CSV output path");
    bench_cmd->add_option("--ckpt-dir", bench_ckpt_dir, "checkpoint registry directory");
    bench_cmd->add_option("--threads", bench_threads, "frame-level worker threads");
    bench_cmd->add_flag("--train-missing", bench_train_missing,
                        "train any missing checkpoints at desk scale first");
    bench_cmd->add_flag("--verbose", bench_verbose, "per-epoch training progress");

    auto* detect = app.add_subcommand("detect", "run a detector over a frame file");
    std::string detect_frames, detect_name = "e_mle", detect_ckpt;
    int detect_t = -1, detect_e = -1;
    double detect_nv = 1.0;
    NoiseFlags detect_oracle;
    detect->add_option("--frames", detect_frames, "frame file from frame-gen")->required();
    detect->add_option("--detector", detect_name, "detector name");
    detect->add_option("--checkpoint", detect_ckpt, "flow checkpoint (manfe family)");
    detect->add_option("--T", detect_t, "GAMP iterations");
    detect->add_option("--E", detect_e, "max symbol errors for the neighborhood");
    detect->add_option("--noise-var", detect_nv, "noise variance per real dimension for GAMP");
    detect_oracle.attach(detect);

    auto* fgen = app.add_subcommand("frame-gen", "generate frames to a binary file");
    NoiseFlags fgen_noise;
    fgen_noise.attach(fgen);
    double fgen_snr = 20.0;
    std::size_t fgen_ntx = 4, fgen_nrx = 4, fgen_count = 100;
    std::uint64_t fgen_seed = 1;
    std::string fgen_out;
    fgen->add_option("--snr", fgen_snr, "SNR in dB (inf for zero noise)");
    fgen->add_option("--ntx", fgen_ntx, "transmit antennas");
    fgen->add_option("--nrx", fgen_nrx, "receive antennas");
    fgen->add_option("--count", fgen_count, "frame count");
    fgen->add_option("--seed", fgen_seed, "rng seed");
    fgen->add_option("--out", fgen_out, "output path")->required();

    auto* plot = app.add_subcommand("plot", "render a BER sweep CSV as SVG");
    std::string plot_csv, plot_axis = "snr", plot_out = "plot.svg";
    plot->add_option("--csv", plot_csv, "input CSV")->required();
    plot->add_option("--axis", plot_axis, "x axis")->check(CLI::IsMember({"snr", "alpha"}));
    plot->add_option("--out", plot_out, "output SVG path");

    if (argc <= 1) {
        std::cout << app.help() << std::endl;
        return 2;
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (gen->parsed()) return cmd_noise_gen(gen_noise, gen_count, gen_dim, gen_seed, gen_out);
        if (train->parsed())
            return cmd_train(train_noise, train_snr, train_ntx, train_nrx, train_k, train_hidden,
                             train_batch, train_epochs, train_lr, train_seed, train_samples,
                             test_samples, train_out, train_ckpt_dir, train_verbose);
        if (bench_cmd->parsed())
            return cmd_bench(bench_preset, bench_noise, bench_axis, bench_values, bench_fixed_snr,
                             bench_ntx, bench_nrx, bench_detectors, bench_frames, bench_seed,
                             bench_csv, bench_ckpt_dir, bench_threads, bench_train_missing,
                             bench_verbose);
        if (detect->parsed())
            return cmd_detect(detect_frames, detect_name, detect_ckpt, detect_t, detect_e,
                              detect_nv, detect_oracle);
        if (fgen->parsed())
            return cmd_frame_gen(fgen_noise, fgen_snr, fgen_ntx, fgen_nrx, fgen_count, fgen_seed,
                                 fgen_out);
        if (plot->parsed()) return cmd_plot(plot_csv, plot_axis, plot_out);
        std::cout << app.help() << std::endl;
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
