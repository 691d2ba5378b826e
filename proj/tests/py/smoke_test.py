"""Smoke tests for the python bindings. Run with PYTHONPATH pointing at the
build tree's python/ directory (ctest sets this up)."""

import math
import os
import tempfile

import flowdet


def test_noise_sampling():
    spec = flowdet.NoiseSpec("sas", alpha=1.5, sigma=0.5)
    a = flowdet.sample_noise(spec, 100, 4, 42)
    b = flowdet.sample_noise(spec, 100, 4, 42)
    assert len(a) == 400
    assert a == b
    c = flowdet.sample_noise(spec, 100, 4, 43)
    assert a != c

    g = flowdet.NoiseSpec("gaussian", sigma=1.0)
    samples = flowdet.sample_noise(g, 20000, 1, 7)
    var = sum(z.real * z.real + z.imag * z.imag for z in samples) / len(samples)
    assert abs(var - 2.0) < 0.1  # 2 sigma^2 per complex element


def test_log_pdfs():
    g = flowdet.NoiseSpec("gaussian", sigma=1.0 / math.sqrt(2.0))
    assert abs(flowdet.log_pdf_analytic(g, [0j]) - math.log(1.0 / math.pi)) < 1e-12
    cauchy = flowdet.sas_pdf_numeric(1.0, 1.0, 0.0)
    assert abs(cauchy - 1.0 / math.pi) < 1e-6


def test_qpsk_roundtrip():
    bits = [0, 0, 0, 1, 1, 0, 1, 1]
    syms = flowdet.qpsk_modulate(bits)
    assert len(syms) == 4
    assert flowdet.qpsk_demap(syms) == bits
    assert abs(abs(syms[0]) - 1.0) < 1e-12


def test_candidate_counts():
    assert flowdet.candidate_count(4, 4) == 256
    assert flowdet.neighborhood_size(4, 4, 1) == 13
    assert flowdet.neighborhood_size(4, 4, 2) == 67


def test_frames_and_emle():
    spec = flowdet.NoiseSpec("gaussian", sigma=1.0)
    sc = flowdet.MimoScenario(4, 4, float("inf"), spec, seed=5)
    frame = flowdet.gen_frame(sc, 0)
    result = flowdet.detect_emle(frame)
    assert result["evaluations"] == 256
    truth = flowdet.qpsk_demap(frame.x)
    assert result["bits"] == truth
    assert abs(result["score"]) < 1e-18


def test_flow_train_detect_checkpoint():
    spec = flowdet.NoiseSpec("gaussian", sigma=0.3)
    model = flowdet.train_flow(spec, dim=2, count=4000, seed=3, epochs=4, batch_size=512)
    assert model.dim == 2
    lp = model.logprob([0.1 + 0.2j, -0.05 + 0.0j])
    assert math.isfinite(lp)

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "flow.ckpt")
        flowdet.save_checkpoint(model, path)
        again = flowdet.load_checkpoint(path)
        assert again.logprob([0.1 + 0.2j, -0.05 + 0.0j]) == lp

    sc = flowdet.MimoScenario(2, 2, 12.0, spec, seed=9)
    nv = flowdet.sigma_for_snr(sc) ** 2
    frame = flowdet.gen_frame(sc, 0)
    manfe = flowdet.detect_manfe(frame, model)
    assert manfe["evaluations"] == 16
    combo = flowdet.detect_ggamp_manfe(frame, model, iters=30, e=2, noise_var=nv)
    assert combo["evaluations"] == flowdet.neighborhood_size(2, 4, 2)
    gg = flowdet.detect_ggamp(frame, iters=30, noise_var=nv)
    assert len(gg["bits"]) == 4


def main():
    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_")]
    for t in tests:
        t()
        print(f"ok {t.__name__}")
    print(f"{len(tests)} smoke tests passed")


if __name__ == "__main__":
    main()
