#include "flowdet/bench.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "flowdet/errors.hpp"
#include "flowdet/rng.hpp"

namespace flowdet::bench {

namespace {

std::string fmt_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string fmt_g(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

double parse_double(const std::string& s) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw FormatError("bad numeric field in CSV: " + s, 0);
    return v;
}

std::uint64_t parse_u64(const std::string& s) {
    std::uint64_t v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw FormatError("bad integer field in CSV: " + s, 0);
    return v;
}

}  // namespace

std::string DetectorSpec::name() const {
    switch (kind) {
        case det::DetectorKind::kEmle: return "e_mle";
        case det::DetectorKind::kManfe: return "manfe";
        case det::DetectorKind::kOracleMle: return "oracle_mle";
        case det::DetectorKind::kGgamp: return "ggamp" + std::to_string(T);
        case det::DetectorKind::kGgampManfe:
            return "ggamp" + std::to_string(T) + "_manfe" + std::to_string(E);
        case det::DetectorKind::kGgampEmle:
            return "ggamp" + std::to_string(T) + "_emle" + std::to_string(E);
    }
    throw ConfigError("unknown detector kind");
}

DetectorSpec DetectorSpec::parse(const std::string& s) {
    DetectorSpec d;
    if (s == "e_mle") {
        d.kind = det::DetectorKind::kEmle;
        return d;
    }
    if (s == "manfe") {
        d.kind = det::DetectorKind::kManfe;
        return d;
    }
    if (s == "oracle_mle") {
        d.kind = det::DetectorKind::kOracleMle;
        return d;
    }
    if (s.rfind("ggamp", 0) == 0) {
        std::size_t pos = 5;
        std::size_t us = s.find('_', pos);
        std::string tpart = s.substr(pos, us == std::string::npos ? std::string::npos : us - pos);
        d.T = static_cast<int>(parse_u64(tpart));
        if (us == std::string::npos) {
            d.kind = det::DetectorKind::kGgamp;
            return d;
        }
        std::string rest = s.substr(us + 1);
        if (rest.rfind("manfe", 0) == 0) {
            d.kind = det::DetectorKind::kGgampManfe;
            d.E = static_cast<int>(parse_u64(rest.substr(5)));
            return d;
        }
        if (rest.rfind("emle", 0) == 0) {
            d.kind = det::DetectorKind::kGgampEmle;
            d.E = static_cast<int>(parse_u64(rest.substr(4)));
            return d;
        }
    }
    throw ConfigError("unknown detector name: " + s);
}

bool DetectorSpec::needs_flow() const {
    return kind == det::DetectorKind::kManfe || kind == det::DetectorKind::kGgampManfe;
}

void BenchPlan::validate() const {
    scenario.validate();
    if (frames < 1000) throw ConfigError("bench plan: need frames >= 1000");
    if (detectors.empty()) throw ConfigError("bench plan: detector list is empty");
    if (axis_values.empty()) throw ConfigError("bench plan: no sweep points");
    if (axis == SweepAxis::kAlpha && scenario.noise.family != noise::Family::kSas)
        throw ConfigError("bench plan: alpha sweep requires sas noise");
    if (threads < 1) throw ConfigError("bench plan: need threads >= 1");
}

mimo::MimoScenario BenchPlan::scenario_at(std::size_t point_index) const {
    if (point_index >= axis_values.size()) throw ConfigError("bench plan: point out of range");
    mimo::MimoScenario sc = scenario;
    if (axis == SweepAxis::kSnr)
        sc.snr_db = axis_values[point_index];
    else
        sc.noise.alpha = axis_values[point_index];
    sc.seed = frame_key(derive_key(base_seed, kTagPoint), point_index);
    return sc;
}

bool records_equal_ignoring_walltime(const BerRecord& a, const BerRecord& b) {
    return a.detector == b.detector && a.family == b.family && a.alpha == b.alpha &&
           a.sigma == b.sigma && a.snr_db == b.snr_db && a.n_tx == b.n_tx && a.n_rx == b.n_rx &&
           a.frames == b.frames && a.bit_errors == b.bit_errors && a.ber == b.ber &&
           a.divergence_count == b.divergence_count && a.seed == b.seed;
}

CheckpointRegistry::CheckpointRegistry(std::string dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
}

std::string CheckpointRegistry::key(const mimo::MimoScenario& sc) {
    std::string base;
    switch (sc.noise.family) {
        case noise::Family::kGaussian: base = "gaussian"; break;
        case noise::Family::kSas: base = "sas_a" + std::string(fmt_g(sc.noise.alpha)); break;
        case noise::Family::kGaussianMixture: base = "gaussian_mixture"; break;
        case noise::Family::kNakagami: base = "nakagami_m" + std::string(fmt_g(sc.noise.m)); break;
    }
    return base + "_snr" + fmt_g(sc.snr_db) + "_" + std::to_string(sc.n_tx) + "x" +
           std::to_string(sc.n_rx) + ".ckpt";
}

std::string CheckpointRegistry::path_for(const mimo::MimoScenario& sc) const {
    return dir_ + "/" + key(sc);
}

bool CheckpointRegistry::has(const mimo::MimoScenario& sc) const {
    return std::filesystem::exists(path_for(sc));
}

const flow::FlowParams& CheckpointRegistry::load(const mimo::MimoScenario& sc) {
    std::string path = path_for(sc);
    auto it = cache_.find(path);
    if (it == cache_.end()) {
        if (!std::filesystem::exists(path))
            throw ConfigError("missing checkpoint " + key(sc) + " in " + dir_ +
                              " (train it first or pass --train-missing)");
        it = cache_.emplace(path, flow::load_checkpoint(path)).first;
        if (it->second.params.config.dim != sc.n_rx)
            throw ConfigError("checkpoint " + key(sc) + " has wrong dimension");
    }
    return it->second.params;
}

const flow::FlowParams& CheckpointRegistry::train_and_store(const mimo::MimoScenario& sc,
                                                            std::size_t train_samples,
                                                            std::size_t test_samples,
                                                            std::size_t epochs, bool verbose) {
    std::string path = path_for(sc);
    if (std::filesystem::exists(path)) return load(sc);

    // Seed derives from the registry key so checkpoints do not depend on
    // which plan requested them.
    std::string k = key(sc);
    std::uint64_t seed = 0xcbf29ce484222325ull;
    for (char c : k) seed = mix64(seed ^ static_cast<unsigned char>(c));

    noise::NoiseSpec spec = mimo::noise_at_snr(sc);
    auto dataset = noise::sample_noise(spec, train_samples + test_samples, sc.n_rx, seed);
    flow::FlowParams params = flow::init_flow_params(flow::FlowConfig::for_dim(sc.n_rx), seed);
    flow::TrainOptions opts;
    opts.seed = seed;
    opts.epochs = epochs;
    opts.holdout_fraction =
        static_cast<double>(test_samples) / static_cast<double>(train_samples + test_samples);
    opts.verbose = verbose;
    auto log = flow::train_flow(params, dataset, opts);

    flow::CheckpointMeta meta;
    meta.spec = spec;
    meta.train_count = log.train_count;
    meta.test_count = log.holdout_count;
    meta.final_nll = log.final_holdout_nll;
    meta.seed = seed;
    flow::save_checkpoint(params, meta, path);
    return load(sc);
}

BerRecord run_point(const BenchPlan& plan, std::size_t point_index, const DetectorSpec& spec,
                    CheckpointRegistry& registry) {
    auto t0 = std::chrono::steady_clock::now();
    mimo::MimoScenario sc = plan.scenario_at(point_index);
    sc.validate();

    det::DetectorConfig config;
    config.kind = spec.kind;
    config.gamp_iters = spec.T;
    config.max_errors = spec.E;
    double sigma = mimo::sigma_for_snr(sc);
    config.noise_var_per_real_dim = sigma * sigma;
    if (spec.needs_flow()) config.flow = &registry.load(sc);
    if (spec.kind == det::DetectorKind::kOracleMle) config.oracle_noise = mimo::noise_at_snr(sc);

    int nthreads = std::max(1, plan.threads);
    std::vector<std::size_t> errors(nthreads, 0), divergences(nthreads, 0);
    std::vector<std::exception_ptr> faults(nthreads);
    auto worker = [&](int t) {
        try {
            det::DetectorRuntime runtime(config, sc.n_tx, sc.n_rx);
            std::size_t chunk = (plan.frames + nthreads - 1) / nthreads;
            std::size_t begin = t * chunk;
            std::size_t end = std::min(plan.frames, begin + chunk);
            for (std::size_t f = begin; f < end; ++f) {
                mimo::Frame frame = mimo::gen_frame(sc, f);
                det::DetectionResult r = runtime.detect(frame);
                for (std::size_t a = 0; a < sc.n_tx; ++a) {
                    int truth = mimo::qpsk_slice_index(frame.x[a]);
                    int got = mimo::qpsk_slice_index(r.x_hat[a]);
                    int diff = truth ^ got;
                    errors[t] += static_cast<std::size_t>((diff >> 1) & 1) +
                                 static_cast<std::size_t>(diff & 1);
                }
                if (r.diverged) ++divergences[t];
            }
        } catch (...) {
            faults[t] = std::current_exception();
        }
    };
    if (nthreads == 1) {
        worker(0);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker, t);
        for (auto& th : pool) th.join();
    }
    for (auto& f : faults)
        if (f) std::rethrow_exception(f);

    BerRecord rec;
    rec.detector = spec.name();
    rec.family = sc.noise.family_name();
    switch (sc.noise.family) {
        case noise::Family::kSas: rec.alpha = sc.noise.alpha; break;
        case noise::Family::kGaussian: rec.alpha = 2.0; break;
        default: rec.alpha = 0.0; break;
    }
    rec.sigma = sigma;
    rec.snr_db = sc.snr_db;
    rec.n_tx = sc.n_tx;
    rec.n_rx = sc.n_rx;
    rec.frames = plan.frames;
    for (int t = 0; t < nthreads; ++t) {
        rec.bit_errors += errors[t];
        rec.divergence_count += divergences[t];
    }
    rec.ber = static_cast<double>(rec.bit_errors) /
              (static_cast<double>(plan.frames) * static_cast<double>(sc.n_tx) * 2.0);
    if (rec.ber > 0.6) throw NumericError("ber sanity bound exceeded: " + fmt_double(rec.ber));
    rec.seed = plan.base_seed;
    rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rec;
}

namespace {

std::string point_key(const std::string& detector, double axis_value) {
    return detector + "@" + fmt_double(axis_value);
}

}  // namespace

std::vector<BerRecord> run_sweep(const BenchPlan& plan, CheckpointRegistry& registry) {
    plan.validate();

    // Fail fast on missing checkpoints before any simulation.
    for (std::size_t pt = 0; pt < plan.axis_values.size(); ++pt)
        for (const auto& d : plan.detectors)
            if (d.needs_flow()) registry.load(plan.scenario_at(pt));

    std::map<std::string, BerRecord> done;
    if (!plan.csv_path.empty() && std::filesystem::exists(plan.csv_path)) {
        for (auto& r : read_csv(plan.csv_path).records) {
            double axis_value = plan.axis == SweepAxis::kSnr ? r.snr_db : r.alpha;
            done.emplace(point_key(r.detector, axis_value), std::move(r));
        }
    }

    std::vector<BerRecord> records;
    std::vector<std::string> errors;
    for (std::size_t pt = 0; pt < plan.axis_values.size(); ++pt) {
        for (const auto& d : plan.detectors) {
            std::string key = point_key(d.name(), plan.axis_values[pt]);
            auto it = done.find(key);
            if (it != done.end()) {
                records.push_back(it->second);
                continue;
            }
            try {
                records.push_back(run_point(plan, pt, d, registry));
            } catch (const std::exception& e) {
                errors.push_back(std::string("# error,") + d.name() + "," +
                                 fmt_double(plan.axis_values[pt]) + "," + e.what());
                continue;
            }
            if (!plan.csv_path.empty()) write_csv(plan.csv_path, records, errors);
        }
    }
    if (!plan.csv_path.empty()) write_csv(plan.csv_path, records, errors);
    return records;
}

void write_csv(const std::string& path, std::span<const BerRecord> records,
               std::span<const std::string> error_lines) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open CSV for writing: " + path, 0);
    out << kCsvHeader << "\n";
    for (const auto& r : records) {
        out << r.detector << ',' << r.family << ',' << fmt_double(r.alpha) << ','
            << fmt_double(r.sigma) << ',' << fmt_double(r.snr_db) << ',' << r.n_tx << ','
            << r.n_rx << ',' << r.frames << ',' << r.bit_errors << ',' << fmt_double(r.ber) << ','
            << r.divergence_count << ',' << r.seed << ',' << fmt_double(r.wall_time_s) << "\n";
    }
    for (const auto& e : error_lines) out << e << "\n";
}

CsvContent read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open CSV: " + path, 0);
    CsvContent content;
    std::string line;
    if (!std::getline(in, line)) throw FormatError("empty CSV: " + path, 0);
    if (line != kCsvHeader) throw FormatError("unexpected CSV header in " + path, 0);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            content.error_lines.push_back(line);
            continue;
        }
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != 13) throw FormatError("bad CSV row: " + line, 0);
        BerRecord r;
        r.detector = fields[0];
        r.family = fields[1];
        r.alpha = parse_double(fields[2]);
        r.sigma = parse_double(fields[3]);
        r.snr_db = parse_double(fields[4]);
        r.n_tx = parse_u64(fields[5]);
        r.n_rx = parse_u64(fields[6]);
        r.frames = parse_u64(fields[7]);
        r.bit_errors = parse_u64(fields[8]);
        r.ber = parse_double(fields[9]);
        r.divergence_count = parse_u64(fields[10]);
        r.seed = parse_u64(fields[11]);
        r.wall_time_s = parse_double(fields[12]);
        content.records.push_back(std::move(r));
    }
    return content;
}

namespace {

std::vector<double> arange(double lo, double hi, double step) {
    std::vector<double> out;
    for (double v = lo; v <= hi + 1e-9; v += step) out.push_back(std::round(v * 1e6) / 1e6);
    return out;
}

BenchPlan base_plan(std::size_t n, std::size_t m, noise::NoiseSpec spec) {
    BenchPlan plan;
    plan.scenario.n_tx = n;
    plan.scenario.n_rx = m;
    plan.scenario.noise = std::move(spec);
    plan.frames = 100000;
    plan.base_seed = 20240901;
    return plan;
}

}  // namespace

std::vector<std::string> preset_names() {
    return {"fig3-desk", "fig4-desk", "fig5-desk", "fig6-desk", "fig7-desk",
            "fig8-desk", "fig9-desk", "fig10-desk"};
}

BenchPlan preset_plan(const std::string& name) {
    using det::DetectorKind;
    auto D = [](DetectorKind k, int T = 30, int E = 1) {
        DetectorSpec d;
        d.kind = k;
        d.T = T;
        d.E = E;
        return d;
    };
    std::vector<DetectorSpec> full_set{
        D(DetectorKind::kManfe), D(DetectorKind::kEmle), D(DetectorKind::kGgamp),
        D(DetectorKind::kGgampManfe, 30, 1), D(DetectorKind::kGgampManfe, 30, 2)};
    std::vector<DetectorSpec> neighborhood_set{D(DetectorKind::kGgamp),
                                               D(DetectorKind::kGgampManfe, 30, 2),
                                               D(DetectorKind::kGgampEmle, 30, 2)};
    std::vector<DetectorSpec> analytic_set{
        D(DetectorKind::kManfe), D(DetectorKind::kEmle), D(DetectorKind::kOracleMle),
        D(DetectorKind::kGgamp), D(DetectorKind::kGgampManfe, 30, 2)};

    if (name == "fig3-desk") {
        BenchPlan p = base_plan(4, 4, noise::NoiseSpec::sas(1.5, 1.0));
        p.scenario.snr_db = 25.0;
        p.axis = SweepAxis::kAlpha;
        p.axis_values = arange(1.0, 2.0, 0.1);
        p.detectors = full_set;
        return p;
    }
    if (name == "fig4-desk" || name == "fig5-desk" || name == "fig6-desk") {
        double alpha = name == "fig4-desk" ? 1.9 : (name == "fig5-desk" ? 1.5 : 1.1);
        BenchPlan p = base_plan(4, 4, noise::NoiseSpec::sas(alpha, 1.0));
        p.axis = SweepAxis::kSnr;
        p.axis_values = {10, 15, 20, 25, 30};
        p.detectors = full_set;
        return p;
    }
    if (name == "fig7-desk") {
        BenchPlan p = base_plan(8, 8, noise::NoiseSpec::sas(1.5, 1.0));
        p.scenario.snr_db = 25.0;
        p.axis = SweepAxis::kAlpha;
        p.axis_values = arange(1.0, 2.0, 0.1);
        p.detectors = neighborhood_set;
        return p;
    }
    if (name == "fig8-desk") {
        BenchPlan p = base_plan(8, 8, noise::NoiseSpec::sas(1.9, 1.0));
        p.axis = SweepAxis::kSnr;
        p.axis_values = {10, 15, 20, 25, 30};
        p.detectors = neighborhood_set;
        return p;
    }
    // Analytic-noise grids stop at 15 dB: beyond that the optimal BER falls
    // under ~1e-5 and 1e5 frames/point cannot resolve detector ratios.
    if (name == "fig9-desk") {
        BenchPlan p = base_plan(4, 4, noise::NoiseSpec::nakagami(2.0, 1.0));
        p.axis = SweepAxis::kSnr;
        p.axis_values = {5, 10, 15};
        p.detectors = analytic_set;
        return p;
    }
    if (name == "fig10-desk") {
        BenchPlan p = base_plan(4, 4, noise::NoiseSpec::mixture_default());
        p.axis = SweepAxis::kSnr;
        p.axis_values = {5, 10, 15};
        p.detectors = analytic_set;
        return p;
    }
    throw ConfigError("unknown preset: " + name + " (expected one of fig3-desk .. fig10-desk)");
}

}  // namespace flowdet::bench
