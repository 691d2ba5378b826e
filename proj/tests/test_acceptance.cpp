// Acceptance suite: runs every gate criterion at its stated tolerance and
// prints one PASS/FAIL line per criterion. Exits nonzero on any failure.
//
// Trained checkpoints and sweep CSVs are cached in the working directory
// (acceptance_ckpts/, acceptance_out/), so re-runs skip the expensive parts.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <string>
#include <thread>
#include <vector>

#include "flowdet/bench.hpp"
#include "flowdet/detectors.hpp"
#include "flowdet/flow.hpp"
#include "flowdet/mimo.hpp"
#include "flowdet/noise.hpp"
#include "oracles.hpp"

using namespace flowdet;

namespace {

struct Gate {
    int failures = 0;
    void report(const std::string& id, bool pass, const std::string& detail) {
        std::printf("%s %s: %s\n", pass ? "PASS" : "FAIL", id.c_str(), detail.c_str());
        std::fflush(stdout);
        if (!pass) ++failures;
    }
};

std::size_t g_frames = 100000;
int g_threads = 2;
std::size_t g_train = 100000, g_test = 20000, g_epochs = 15;

mimo::MimoScenario scenario_for(noise::NoiseSpec spec, double snr) {
    mimo::MimoScenario sc;
    sc.n_tx = 4;
    sc.n_rx = 4;
    sc.noise = std::move(spec);
    sc.snr_db = snr;
    return sc;
}

bench::BenchPlan make_plan(noise::NoiseSpec spec, bench::SweepAxis axis,
                           std::vector<double> values, const std::vector<std::string>& detectors,
                           const std::string& csv) {
    bench::BenchPlan plan;
    plan.scenario = scenario_for(std::move(spec), 25.0);
    plan.axis = axis;
    plan.axis_values = std::move(values);
    for (const auto& d : detectors) plan.detectors.push_back(bench::DetectorSpec::parse(d));
    plan.frames = g_frames;
    plan.base_seed = 424242;
    plan.csv_path = csv;
    plan.threads = g_threads;
    return plan;
}

// (detector, axis value) -> record
using RecordMap = std::map<std::pair<std::string, double>, bench::BerRecord>;

RecordMap index_records(const std::vector<bench::BerRecord>& records, bench::SweepAxis axis) {
    RecordMap map;
    for (const auto& r : records)
        map[{r.detector, axis == bench::SweepAxis::kSnr ? r.snr_db : r.alpha}] = r;
    return map;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

flow::FlowParams randomized_params(std::size_t mdim, std::uint64_t seed, double amp,
                                   std::size_t k_steps = 4) {
    flow::FlowParams p = flow::init_flow_params(flow::FlowConfig::for_dim(mdim, k_steps), seed);
    CounterRng rng(seed, 0xD00D);
    std::uint64_t c = 0;
    for (const auto& node : p.all_params())
        for (double& v : node->value.values) v += (rng.uniform(c++) * 2.0 - 1.0) * amp;
    p.actnorm_initialized = true;
    return p;
}

}  // namespace

int main(int argc, char** argv) {
    for (int i = 1; i < argc; ++i) {
        if (!std::strcmp(argv[i], "--frames") && i + 1 < argc) g_frames = std::stoul(argv[++i]);
        if (!std::strcmp(argv[i], "--threads") && i + 1 < argc) g_threads = std::stoi(argv[++i]);
        if (!std::strcmp(argv[i], "--train-samples") && i + 1 < argc)
            g_train = std::stoul(argv[++i]);
    }
    unsigned hw = std::thread::hardware_concurrency();
    if (hw > 0) g_threads = std::min<int>(g_threads > 0 ? g_threads : 2, static_cast<int>(hw));
    std::printf("acceptance: %zu frames/point, %d threads, %zu train samples\n", g_frames,
                g_threads, g_train);

    Gate gate;
    std::filesystem::create_directories("acceptance_out");
    bench::CheckpointRegistry registry("acceptance_ckpts");

    // ---- phase 0: checkpoints -------------------------------------------
    // The gaussian-family point needs only the desk default; the non-Gaussian
    // criteria are decided by tail behavior, which keeps improving with
    // sample count, so those flows get a 5x budget (still minutes per model).
    auto ensure = [&](noise::NoiseSpec spec, double snr, std::size_t mult) {
        auto sc = scenario_for(std::move(spec), snr);
        if (!registry.has(sc)) {
            std::printf("  training %s (x%zu budget)\n",
                        bench::CheckpointRegistry::key(sc).c_str(), mult);
            std::fflush(stdout);
            registry.train_and_store(sc, g_train * mult, g_test * mult,
                                     mult > 1 ? 40 : g_epochs);
        }
    };
    for (double snr : {10.0, 15.0, 20.0}) ensure(noise::NoiseSpec::sas(2.0, 1.0), snr, 1);
    for (double snr : {10.0, 15.0, 20.0, 25.0, 30.0})
        ensure(noise::NoiseSpec::sas(1.9, 1.0), snr, 5);
    for (double snr : {5.0, 10.0, 15.0}) ensure(noise::NoiseSpec::nakagami(2.0, 1.0), snr, 5);
    for (double snr : {5.0, 10.0, 15.0}) ensure(noise::NoiseSpec::mixture_default(), snr, 5);
    ensure(noise::NoiseSpec::sas(1.5, 1.0), 25.0, 5);

    // ---- phase 1: sweeps -------------------------------------------------
    std::vector<std::string> full_set{"manfe", "e_mle", "ggamp30", "ggamp30_manfe1",
                                      "ggamp30_manfe2"};
    auto planA = make_plan(noise::NoiseSpec::sas(1.9, 1.0), bench::SweepAxis::kSnr,
                           {10, 15, 20, 25, 30}, full_set, "acceptance_out/sas19_snr.csv");
    auto planB = make_plan(noise::NoiseSpec::sas(2.0, 1.0), bench::SweepAxis::kSnr, {10, 15, 20},
                           {"manfe", "e_mle"}, "acceptance_out/sas20_snr.csv");
    // SNR grid for the analytic-noise scenarios: chosen so both BERs stay
    // >= ~1e-4 and the ratio is resolvable at 1e5 frames/point.
    auto planC = make_plan(noise::NoiseSpec::nakagami(2.0, 1.0), bench::SweepAxis::kSnr,
                           {5, 10, 15}, {"manfe", "oracle_mle"},
                           "acceptance_out/nakagami_snr.csv");
    auto planD = make_plan(noise::NoiseSpec::mixture_default(), bench::SweepAxis::kSnr,
                           {5, 10, 15}, {"manfe", "oracle_mle"},
                           "acceptance_out/mixture_snr.csv");
    auto planE = make_plan(noise::NoiseSpec::sas(1.5, 1.0), bench::SweepAxis::kAlpha, {1.5},
                           full_set, "acceptance_out/sas15_point.csv");
    planE.scenario.snr_db = 25.0;

    std::printf("running sweeps (cached rows are reused from acceptance_out/*.csv)\n");
    auto A = index_records(bench::run_sweep(planA, registry), planA.axis);
    auto B = index_records(bench::run_sweep(planB, registry), planB.axis);
    auto C = index_records(bench::run_sweep(planC, registry), planC.axis);
    auto D = index_records(bench::run_sweep(planD, registry), planD.axis);
    auto E = index_records(bench::run_sweep(planE, registry), planE.axis);
    bench::emit_plot(planA.csv_path, bench::SweepAxis::kSnr, "acceptance_out/sas19_snr.svg");

    // ---- criterion 1: gaussian equivalence ------------------------------
    {
        bool pass = true;
        std::string detail;
        for (double snr : {10.0, 15.0, 20.0}) {
            double manfe = B[{"manfe", snr}].ber;
            double emle = B[{"e_mle", snr}].ber;
            double rel = emle > 0 ? std::fabs(manfe - emle) / emle : 0.0;
            detail += "snr" + fmt(snr) + ": manfe=" + fmt(manfe) + " emle=" + fmt(emle) +
                      " rel=" + fmt(rel) + "; ";
            if (rel > 0.25) pass = false;
        }
        gate.report("criterion 1 (gaussian equivalence, alpha=2)", pass, detail);
    }

    // ---- criterion 2: impulsive advantage -------------------------------
    {
        double manfe = A[{"manfe", 25.0}].ber;
        double emle = A[{"e_mle", 25.0}].ber;
        bool pass = manfe <= 0.25 * emle;
        gate.report("criterion 2 (impulsive advantage, alpha=1.9, 25 dB)", pass,
                    "manfe=" + fmt(manfe) + " emle=" + fmt(emle) +
                        " ratio=" + fmt(emle > 0 ? manfe / emle : 0.0) + " (need <= 0.25)");
    }

    // ---- criterion 3: low-complexity refinement -------------------------
    {
        double g1 = A[{"ggamp30_manfe1", 25.0}].ber;
        double g0 = A[{"ggamp30", 25.0}].ber;
        bool pass = g1 <= 0.8 * g0;
        std::string detail = "at 25 dB: ggamp=" + fmt(g0) + " ggamp_manfe1=" + fmt(g1) +
                             " ratio=" + fmt(g0 > 0 ? g1 / g0 : 0.0) + " (need <= 0.8); E2<=E1:";
        for (double snr : {10.0, 15.0, 20.0, 25.0, 30.0}) {
            double e1 = A[{"ggamp30_manfe1", snr}].ber;
            double e2 = A[{"ggamp30_manfe2", snr}].ber;
            detail += " " + fmt(snr) + "dB " + fmt(e2) + "/" + fmt(e1);
            if (e2 > e1) pass = false;
        }
        gate.report("criterion 3 (refinement, alpha=1.9)", pass, detail);
    }

    // ---- criterion 4: candidate-count identities -------------------------
    {
        bool pass = det::neighborhood_size(4, 4, 1) == 13 && det::neighborhood_size(4, 4, 2) == 67 &&
                    mimo::all_candidates(4, 4).count == 256;
        std::vector<std::uint8_t> x0{0, 1, 2, 3};
        pass = pass && det::neighborhood(x0.data(), 4, 4, 1).size() / 4 == 13 &&
               det::neighborhood(x0.data(), 4, 4, 2).size() / 4 == 67;
        gate.report("criterion 4 (candidate-count identities)", pass,
                    "neighborhood(E=1)=13, neighborhood(E=2)=67, enumeration=256");
    }

    // ---- criterion 5: analytic-noise oracles -----------------------------
    {
        bool pass = true;
        std::string detail;
        for (auto& [name, map] : std::vector<std::pair<std::string, RecordMap*>>{
                 {"nakagami", &C}, {"mixture", &D}}) {
            for (double snr : {5.0, 10.0, 15.0}) {
                double manfe = (*map)[{"manfe", snr}].ber;
                double oracle = (*map)[{"oracle_mle", snr}].ber;
                double ratio = oracle > 0 ? manfe / oracle : (manfe > 0 ? 1e9 : 1.0);
                detail += name + "@" + fmt(snr) + ": " + fmt(ratio) + "; ";
                if (ratio > 1.3) pass = false;
            }
        }
        gate.report("criterion 5 (analytic oracles, need ratio <= 1.3)", pass, detail);
    }

    // ---- criterion 6: flow correctness suite ------------------------------
    {
        // (a) full-flow log-det vs dense numerical Jacobian
        bool pass_a = true;
        double worst_a = 0.0;
        {
            auto sc = scenario_for(noise::NoiseSpec::sas(2.0, 1.0), 15.0);
            const flow::FlowParams& trained = registry.load(sc);
            double sigma = mimo::sigma_for_snr(sc);
            for (std::size_t mdim : {1, 2, 4}) {
                const flow::FlowParams* params;
                flow::FlowParams local;
                int inputs = mdim == 4 ? 100 : 30;
                if (mdim == 4) {
                    params = &trained;
                } else {
                    local = randomized_params(mdim, 400 + mdim, 0.12);
                    params = &local;
                }
                flow::FlowScorer scorer(*params);
                CounterRng rng(900 + mdim, 0xACC);
                for (int t = 0; t < inputs; ++t) {
                    std::vector<double> w(2 * mdim);
                    for (std::size_t i = 0; i < w.size(); ++i)
                        w[i] = (rng.uniform(t * 16 + i) * 2.0 - 1.0) * (mdim == 4 ? 3.0 * sigma : 1.5);
                    flow::FlowTrace trace;
                    scorer.logprob(std::span<const double>(w.data(), w.size()), &trace);
                    double analytic = 0.0;
                    for (double ld : trace.log_dets) analytic += ld;
                    double numeric = oracles::numeric_logdet(
                        [&](const std::vector<double>& in) {
                            flow::FlowTrace t2;
                            flow::FlowScorer s2(*params);
                            s2.logprob(std::span<const double>(in.data(), in.size()), &t2);
                            return t2.activations.back();
                        },
                        w, 1e-6);
                    worst_a = std::max(worst_a, std::fabs(analytic - numeric));
                }
            }
            pass_a = worst_a < 1e-5;
        }

        // (b) layer-by-layer inverse reconstruction
        bool pass_b = true;
        double worst_b = 0.0;
        {
            auto sc = scenario_for(noise::NoiseSpec::sas(1.9, 1.0), 25.0);
            const flow::FlowParams& trained = registry.load(sc);
            flow::FlowScorer scorer(trained);
            CounterRng rng(77, 0xACC);
            double sigma = mimo::sigma_for_snr(sc);
            for (int t = 0; t < 100; ++t) {
                std::vector<double> w(8);
                for (std::size_t i = 0; i < w.size(); ++i)
                    w[i] = (rng.uniform(t * 8 + i) * 2.0 - 1.0) * 4.0 * sigma;
                flow::FlowTrace trace;
                scorer.logprob(std::span<const double>(w.data(), w.size()), &trace);
                auto rec = flow::flow_inverse(trained, trace.activations.back());
                for (std::size_t i = 0; i < w.size(); ++i)
                    worst_b = std::max(worst_b, std::fabs(rec[i] - w[i]));
            }
            pass_b = worst_b < 1e-8;
        }

        // (c) NLL gradient vs finite differences
        flow::FlowParams small = randomized_params(2, 85, 0.15, 2);
        ad::Tensor batch(ad::Shape{4, 6});
        CounterRng rng(15, 0x99);
        std::uint64_t cc = 0;
        for (std::size_t col = 0; col < 6; ++col)
            for (std::size_t i = 0; i < 4; ++i)
                batch.at(i, col) = (rng.uniform(cc++) * 2.0 - 1.0) * 1.5;
        auto params_vec = small.all_params();
        auto rep = ad::gradient_check([&] { return flow::build_nll_loss(small, batch); },
                                      params_vec, 1e-4);
        bool pass_c = rep.pass;

        // (d) M=1 density integrates to 1
        bool pass_d = true;
        double integral = 0.0;
        {
            flow::FlowParams p1 = flow::init_flow_params(flow::FlowConfig::for_dim(1, 4), 3);
            auto data = noise::sample_noise(noise::NoiseSpec::gaussian(0.8), 4000, 1, 17);
            flow::TrainOptions opts;
            opts.batch_size = 256;
            opts.epochs = 6;
            opts.seed = 3;
            flow::train_flow(p1, data, opts);
            flow::FlowScorer scorer(p1);
            double step = 0.02;
            std::vector<double> wb(2);
            for (double re = -16.0; re <= 16.0; re += step)
                for (double im = -16.0; im <= 16.0; im += step) {
                    wb[0] = re;
                    wb[1] = im;
                    integral +=
                        std::exp(scorer.logprob(std::span<const double>(wb.data(), 2))) * step * step;
                }
            pass_d = std::fabs(integral - 1.0) <= 0.01;
        }

        // (e) trained-on-Gaussian NLL within 0.05 nats/dim of the entropy
        bool pass_e = true;
        double per_dim = 0.0;
        {
            const char* path = "acceptance_ckpts/entropy_m4.ckpt";
            flow::FlowParams pg;
            if (std::filesystem::exists(path)) {
                pg = flow::load_checkpoint(path).params;
                auto holdout = noise::sample_noise(noise::NoiseSpec::gaussian(1.0), 20000, 4,
                                                   0xE117 + 1);
                ad::Tensor mat(ad::Shape{8, holdout.count});
                for (std::size_t s = 0; s < holdout.count; ++s)
                    for (std::size_t i = 0; i < 4; ++i) {
                        mat.at(i, s) = holdout.at(s, i).real();
                        mat.at(4 + i, s) = holdout.at(s, i).imag();
                    }
                per_dim = flow::mean_nll(pg, mat) / 8.0;
            } else {
                auto data = noise::sample_noise(noise::NoiseSpec::gaussian(1.0),
                                                g_train + g_test, 4, 0xE117);
                pg = flow::init_flow_params(flow::FlowConfig::for_dim(4, 4), 0xE117);
                flow::TrainOptions opts;
                opts.epochs = g_epochs;
                opts.seed = 0xE117;
                opts.holdout_fraction =
                    static_cast<double>(g_test) / static_cast<double>(g_train + g_test);
                auto log = flow::train_flow(pg, data, opts);
                per_dim = log.final_holdout_nll / 8.0;
                flow::CheckpointMeta meta;
                meta.spec = noise::NoiseSpec::gaussian(1.0);
                meta.final_nll = log.final_holdout_nll;
                meta.seed = 0xE117;
                flow::save_checkpoint(pg, meta, path);
            }
            double entropy = 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e);
            pass_e = std::fabs(per_dim - entropy) <= 0.05;
        }

        gate.report("criterion 6a (log-det vs dense Jacobian <= 1e-5)", pass_a,
                    "worst " + fmt(worst_a));
        gate.report("criterion 6b (inverse reconstruction <= 1e-8)", pass_b,
                    "worst " + fmt(worst_b));
        gate.report("criterion 6c (NLL gradient vs finite differences <= 1e-4)", pass_c,
                    "max rel err " + fmt(rep.max_rel_error));
        gate.report("criterion 6d (M=1 density integral = 1 +- 0.01)", pass_d,
                    "integral " + fmt(integral));
        gate.report("criterion 6e (gaussian NLL within 0.05 nats/dim of entropy)", pass_e,
                    "nll/dim " + fmt(per_dim) + " vs 1.4189");
    }

    // ---- criterion 7: determinism ----------------------------------------
    {
        // checkpoints: identical training runs produce identical bytes
        auto train_once = [&](const std::string& path) {
            auto data = noise::sample_noise(noise::NoiseSpec::gaussian(0.7), 3000, 2, 41);
            flow::FlowParams p = flow::init_flow_params(flow::FlowConfig::for_dim(2, 2), 13);
            flow::TrainOptions opts;
            opts.batch_size = 256;
            opts.epochs = 3;
            opts.seed = 13;
            auto log = flow::train_flow(p, data, opts);
            flow::CheckpointMeta meta;
            meta.spec = data.spec;
            meta.final_nll = log.final_holdout_nll;
            flow::save_checkpoint(p, meta, path);
        };
        train_once("acceptance_out/det_a.ckpt");
        train_once("acceptance_out/det_b.ckpt");
        auto read_bytes = [](const std::string& p) {
            std::ifstream f(p, std::ios::binary);
            return std::string((std::istreambuf_iterator<char>(f)),
                               std::istreambuf_iterator<char>());
        };
        bool ckpt_ok = read_bytes("acceptance_out/det_a.ckpt") ==
                       read_bytes("acceptance_out/det_b.ckpt");

        // detections: repeated runs identical, bitwise scores
        auto sc = scenario_for(noise::NoiseSpec::sas(1.9, 1.0), 25.0);
        const flow::FlowParams& trained = registry.load(sc);
        flow::FlowScorer s1(trained), s2(trained);
        auto cs = mimo::all_candidates(4, 4);
        bool detect_ok = true;
        for (std::uint64_t f = 0; f < 200; ++f) {
            auto fr = mimo::gen_frame(sc, f);
            auto a = det::manfe_detect(fr, cs, s1);
            auto b = det::manfe_detect(fr, cs, s2);
            if (a.x_hat != b.x_hat || a.score != b.score) detect_ok = false;
        }

        // CSVs: serial vs parallel sweeps agree except wall_time
        auto plan = make_plan(noise::NoiseSpec::sas(1.9, 1.0), bench::SweepAxis::kSnr, {15, 25},
                              {"e_mle", "ggamp30_manfe1"}, "acceptance_out/det_serial.csv");
        plan.frames = 2000;
        plan.threads = 1;
        std::filesystem::remove(plan.csv_path);
        auto serial = bench::run_sweep(plan, registry);
        plan.csv_path = "acceptance_out/det_parallel.csv";
        plan.threads = 3;
        std::filesystem::remove(plan.csv_path);
        auto parallel = bench::run_sweep(plan, registry);
        bool csv_ok = serial.size() == parallel.size();
        for (std::size_t i = 0; csv_ok && i < serial.size(); ++i)
            csv_ok = bench::records_equal_ignoring_walltime(serial[i], parallel[i]);

        gate.report("criterion 7 (determinism: checkpoints, detections, CSVs)",
                    ckpt_ok && detect_ok && csv_ok,
                    std::string("checkpoints ") + (ckpt_ok ? "ok" : "differ") + ", detections " +
                        (detect_ok ? "ok" : "differ") + ", serial-vs-parallel " +
                        (csv_ok ? "ok" : "differ"));
    }

    // ---- criterion 8: E=N degeneracy --------------------------------------
    {
        auto sc = scenario_for(noise::NoiseSpec::sas(1.9, 1.0), 25.0);
        const flow::FlowParams& trained = registry.load(sc);
        double sigma = mimo::sigma_for_snr(sc);
        flow::FlowScorer s1(trained), s2(trained);
        auto cs = mimo::all_candidates(4, 4);

        // candidate spaces: neighborhood(x0, E=N) == full enumeration as sets
        std::vector<std::uint8_t> x0{3, 1, 0, 2};
        auto nb = det::neighborhood(x0.data(), 4, 4, 4);
        std::vector<std::vector<std::uint8_t>> nb_set, full_set_v;
        for (std::size_t c = 0; c < nb.size() / 4; ++c)
            nb_set.emplace_back(nb.begin() + c * 4, nb.begin() + (c + 1) * 4);
        for (std::size_t c = 0; c < cs.count; ++c)
            full_set_v.emplace_back(cs.candidate(c), cs.candidate(c) + 4);
        std::sort(nb_set.begin(), nb_set.end());
        std::sort(full_set_v.begin(), full_set_v.end());
        bool sets_ok = nb_set == full_set_v;

        bool decisions_ok = true;
        for (std::uint64_t f = 0; f < 1000; ++f) {
            auto fr = mimo::gen_frame(sc, f);
            auto full = det::manfe_detect(fr, cs, s1);
            auto combo = det::ggamp_manfe_detect(fr, s2, 30, 4, sigma * sigma);
            if (full.x_hat != combo.x_hat) decisions_ok = false;
        }
        gate.report("criterion 8 (E=N degeneracy over 1000 frames)", sets_ok && decisions_ok,
                    std::string("candidate sets ") + (sets_ok ? "equal" : "differ") +
                        ", decisions " + (decisions_ok ? "identical" : "differ"));
    }

    // ---- supplementary: detector ordering and BER monotonicity ------------
    {
        double manfe = E[{"manfe", 1.5}].ber;
        double g2 = E[{"ggamp30_manfe2", 1.5}].ber;
        double g1 = E[{"ggamp30_manfe1", 1.5}].ber;
        double gg = E[{"ggamp30", 1.5}].ber;
        double em = E[{"e_mle", 1.5}].ber;
        // ordering holds up to Monte Carlo resolution (E1 and E-MLE coincide
        // at this alpha in the reference curves): allow 2-sigma slack
        double bits = static_cast<double>(g_frames) * 8.0;
        auto leq = [&](double a, double b) {
            return a <= b + 2.0 * std::sqrt(std::max(a, b) * (1.0 - std::min(a, b)) / bits);
        };
        bool order_ok = leq(manfe, g2) && leq(g2, g1) && leq(g1, gg) && leq(g1, em);
        gate.report("supplementary (alpha=1.5 ranking manfe <= E2 <= E1 <= {ggamp, e_mle})",
                    order_ok,
                    "manfe=" + fmt(manfe) + " E2=" + fmt(g2) + " E1=" + fmt(g1) + " ggamp=" +
                        fmt(gg) + " e_mle=" + fmt(em));

        bool mono_ok = true;
        std::string detail;
        for (const auto& d : {"manfe", "e_mle", "ggamp30", "ggamp30_manfe1", "ggamp30_manfe2"}) {
            double prev = 1.0;
            for (double snr : {10.0, 15.0, 20.0, 25.0, 30.0}) {
                const auto& r = A[{d, snr}];
                double sd = std::sqrt(std::max(r.ber * (1.0 - r.ber), 1e-12) /
                                      (static_cast<double>(r.frames) * 8.0));
                if (r.ber > prev + sd) {
                    mono_ok = false;
                    detail += std::string(d) + "@" + fmt(snr) + " rises; ";
                }
                prev = r.ber;
            }
        }
        gate.report("supplementary (BER non-increasing in SNR, 1-sigma slack)", mono_ok,
                    mono_ok ? "all detectors monotone" : detail);
    }

    std::printf("acceptance: %d failure(s)\n", gate.failures);
    return gate.failures == 0 ? 0 : 1;
}
