#include <pybind11/complex.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "flowdet/bench.hpp"
#include "flowdet/detectors.hpp"
#include "flowdet/flow.hpp"
#include "flowdet/mimo.hpp"
#include "flowdet/noise.hpp"

namespace py = pybind11;
using namespace flowdet;

namespace {

noise::NoiseSpec make_spec(const std::string& family, double alpha, double sigma, double m,
                           double omega) {
    if (family == "gaussian") return noise::NoiseSpec::gaussian(sigma);
    if (family == "sas") return noise::NoiseSpec::sas(alpha, sigma);
    if (family == "gaussian_mixture") return noise::NoiseSpec::mixture_default();
    if (family == "nakagami") return noise::NoiseSpec::nakagami(m, omega);
    throw ConfigError("unknown noise family: " + family);
}

struct PyFlow {
    flow::FlowParams params;
    flow::CheckpointMeta meta;
};

py::dict result_to_dict(const det::DetectionResult& r) {
    py::dict d;
    d["x_hat"] = r.x_hat;
    d["score"] = r.score;
    d["evaluations"] = r.evaluations;
    d["iterations"] = r.iterations_used;
    d["diverged"] = r.diverged;
    std::vector<int> bits;
    for (const auto& s : r.x_hat) {
        int idx = mimo::qpsk_slice_index(s);
        bits.push_back((idx >> 1) & 1);
        bits.push_back(idx & 1);
    }
    d["bits"] = bits;
    return d;
}

}  // namespace

PYBIND11_MODULE(_flowdet, mod) {
    mod.doc() = "flow-based maximum-likelihood MIMO detection laboratory";

    py::class_<noise::NoiseSpec>(mod, "NoiseSpec")
        .def(py::init([](const std::string& family, double alpha, double sigma, double m,
                         double omega) { return make_spec(family, alpha, sigma, m, omega); }),
             py::arg("family"), py::arg("alpha") = 2.0, py::arg("sigma") = 1.0,
             py::arg("m") = 2.0, py::arg("omega") = 1.0)
        .def_property_readonly("family", &noise::NoiseSpec::family_name)
        .def_readonly("alpha", &noise::NoiseSpec::alpha)
        .def_readonly("sigma", &noise::NoiseSpec::sigma)
        .def("nominal_power", &noise::NoiseSpec::nominal_power)
        .def("scaled_to_power", &noise::NoiseSpec::scaled_to_power);

    mod.def(
        "sample_noise",
        [](const noise::NoiseSpec& spec, std::size_t count, std::size_t dim, std::uint64_t seed) {
            return noise::sample_noise(spec, count, dim, seed).samples;
        },
        py::arg("spec"), py::arg("count"), py::arg("dim"), py::arg("seed"));
    mod.def(
        "log_pdf_analytic",
        [](const noise::NoiseSpec& spec, const std::vector<std::complex<double>>& w) {
            return noise::log_pdf_analytic(spec, w);
        },
        py::arg("spec"), py::arg("w"));
    mod.def("sas_pdf_numeric",
            [](double alpha, double sigma, double w) { return noise::sas_pdf_numeric(alpha, sigma, w); },
            py::arg("alpha"), py::arg("sigma"), py::arg("w"));

    mod.def("qpsk_modulate", [](const std::vector<int>& bits) { return mimo::qpsk_modulate(bits); });
    mod.def("qpsk_demap", [](const std::vector<std::complex<double>>& syms) {
        return mimo::qpsk_demap(syms);
    });

    py::class_<mimo::MimoScenario>(mod, "MimoScenario")
        .def(py::init([](std::size_t n_tx, std::size_t n_rx, double snr_db,
                         const noise::NoiseSpec& spec, std::uint64_t seed) {
                 mimo::MimoScenario sc;
                 sc.n_tx = n_tx;
                 sc.n_rx = n_rx;
                 sc.snr_db = snr_db;
                 sc.noise = spec;
                 sc.seed = seed;
                 return sc;
             }),
             py::arg("n_tx"), py::arg("n_rx"), py::arg("snr_db"), py::arg("noise"),
             py::arg("seed") = 1)
        .def_readwrite("snr_db", &mimo::MimoScenario::snr_db)
        .def_readwrite("seed", &mimo::MimoScenario::seed);

    py::class_<mimo::Frame>(mod, "Frame")
        .def_readonly("H", &mimo::Frame::H)
        .def_readonly("x", &mimo::Frame::x)
        .def_readonly("w", &mimo::Frame::w)
        .def_readonly("y", &mimo::Frame::y)
        .def_readonly("n_tx", &mimo::Frame::n_tx)
        .def_readonly("n_rx", &mimo::Frame::n_rx);

    mod.def("sigma_for_snr", &mimo::sigma_for_snr);
    mod.def("gen_frame", &mimo::gen_frame, py::arg("scenario"), py::arg("frame_index"));
    mod.def("candidate_count",
            [](std::size_t n, int p) { return mimo::all_candidates(n, p).count; });
    mod.def("neighborhood_size", &det::neighborhood_size, py::arg("n"), py::arg("p"),
            py::arg("e"));

    py::class_<PyFlow>(mod, "Flow")
        .def_property_readonly("dim", [](const PyFlow& f) { return f.params.config.dim; })
        .def_property_readonly("final_nll", [](const PyFlow& f) { return f.meta.final_nll; })
        .def("logprob", [](const PyFlow& f, const std::vector<std::complex<double>>& w) {
            return flow::flow_logprob(f.params, w);
        });

    mod.def(
        "train_flow",
        [](const noise::NoiseSpec& spec, std::size_t dim, std::size_t count, std::uint64_t seed,
           std::size_t epochs, std::size_t batch_size, double lr) {
            auto dataset = noise::sample_noise(spec, count, dim, seed);
            auto params = flow::init_flow_params(flow::FlowConfig::for_dim(dim), seed);
            flow::TrainOptions opts;
            opts.epochs = epochs;
            opts.batch_size = batch_size;
            opts.learning_rate = lr;
            opts.seed = seed;
            auto log = flow::train_flow(params, dataset, opts);
            PyFlow f;
            f.params = std::move(params);
            f.meta.spec = spec;
            f.meta.train_count = log.train_count;
            f.meta.test_count = log.holdout_count;
            f.meta.final_nll = log.final_holdout_nll;
            f.meta.seed = seed;
            return f;
        },
        py::arg("spec"), py::arg("dim"), py::arg("count"), py::arg("seed") = 1,
        py::arg("epochs") = 10, py::arg("batch_size") = 1024, py::arg("lr") = 1e-3);

    mod.def("save_checkpoint", [](const PyFlow& f, const std::string& path) {
        flow::save_checkpoint(f.params, f.meta, path);
    });
    mod.def("load_checkpoint", [](const std::string& path) {
        auto ck = flow::load_checkpoint(path);
        PyFlow f;
        f.params = std::move(ck.params);
        f.meta = ck.meta;
        return f;
    });

    mod.def("detect_emle", [](const mimo::Frame& frame) {
        auto cs = mimo::all_candidates(frame.n_tx, 4);
        return result_to_dict(det::emle_detect(frame, cs));
    });
    mod.def("detect_manfe", [](const mimo::Frame& frame, const PyFlow& f) {
        auto cs = mimo::all_candidates(frame.n_tx, 4);
        flow::FlowScorer scorer(f.params);
        return result_to_dict(det::manfe_detect(frame, cs, scorer));
    });
    mod.def(
        "detect_ggamp",
        [](const mimo::Frame& frame, int iters, double noise_var) {
            return result_to_dict(det::ggamp_detect(frame, iters, noise_var));
        },
        py::arg("frame"), py::arg("iters") = 30, py::arg("noise_var") = 1.0);
    mod.def(
        "detect_ggamp_manfe",
        [](const mimo::Frame& frame, const PyFlow& f, int iters, int e, double noise_var) {
            flow::FlowScorer scorer(f.params);
            return result_to_dict(det::ggamp_manfe_detect(frame, scorer, iters, e, noise_var));
        },
        py::arg("frame"), py::arg("flow"), py::arg("iters") = 30, py::arg("e") = 1,
        py::arg("noise_var") = 1.0);
    mod.def(
        "detect_oracle_mle",
        [](const mimo::Frame& frame, const noise::NoiseSpec& spec) {
            auto cs = mimo::all_candidates(frame.n_tx, 4);
            return result_to_dict(det::oracle_mle_detect(frame, cs, spec));
        },
        py::arg("frame"), py::arg("spec"));

    mod.attr("__version__") = "0.1.0";
}
