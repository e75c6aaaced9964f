"""Acceptance criteria, one test per criterion, each at its stated tolerance.

``conftest.py`` prints a PASS/FAIL line per criterion at the end of the run.
"""

import math
import time
from pathlib import Path

import numpy as np
import pytest

import cachesched
from cachesched import cli
from cachesched.cfg_freq import FreqWeights, cfg_delta, dft_split, reconstruct_uncond
from cachesched.diff_kernels import l1_rel
from cachesched.errors import DegenerateError
from cachesched.pca_threshold import fuse_threshold, score_prompt, sigmoid_stretch, silhouette
from cachesched.poly_fit import FitDataset, expand_features, fit, mse
from cachesched.scheduler import PolicyConfig, StepEstimates, simulate, simulate_main
from cachesched.synth import factor_study
from cachesched.trace_model import DiffCodebook, EmbeddingBank, MainDecision, PcaConfig

from .oracles import brute_silhouette, check_boundary, monomials, naive_dft

DATA = Path(cachesched.__file__).parent / "data"
C = MainDecision.COMPUTE
WAN = dict(k=50.0, delta_min=0.1, delta_max=0.23)


def computed(decisions):
    return [t for t, d in enumerate(decisions) if d is C]


@pytest.mark.criterion("01 l1_rel kernel: identity, scale covariance, hand value, degenerate rejected, < 1 s")
def test_c01_l1_kernel():
    start = time.perf_counter()
    rng = np.random.default_rng(0)
    for _ in range(200):
        a = rng.normal(size=16)
        b = rng.normal(size=16)
        assert l1_rel(a, a) == 0.0
        alpha = float(rng.choice([-8.0, -0.5, 0.25, 2.0, 4.0]))
        # power-of-two scales are exact in binary floating point
        assert l1_rel(alpha * a, alpha * b) == l1_rel(a, b)
    assert l1_rel([2, 0], [1, 1]) == 1.0
    with pytest.raises(DegenerateError):
        l1_rel([1, 1], [0, 0])
    assert time.perf_counter() - start < 1.0


@pytest.mark.criterion("02 feature expansion: 1000 pairs vs monomial oracle within 1e-12 rel, (2,3) exact")
def test_c02_expansion():
    rng = np.random.default_rng(1)
    for x, t in rng.uniform(-2, 2, size=(1000, 2)):
        got = expand_features(x, t)
        want = monomials(x, t)
        for g, w in zip(got, want):
            assert abs(g - w) <= 1e-12 * abs(w)
    assert list(expand_features(2, 3)) == [1, 2, 3, 4, 9, 6, 8, 27, 12, 18, 16, 81]


@pytest.mark.criterion("03 fit recovery on 10x10 grid: coeff rel error <= 1e-6, MSE <= 1e-12, < 1 s")
def test_c03_fit_recovery():
    start = time.perf_counter()
    theta = np.random.default_rng(2).uniform(0.5, 1.5, 12)
    rows = []
    for x in np.linspace(0.0, 1.0, 10):
        for t_raw in range(10):
            rows.append((x, t_raw, float(np.dot(theta, monomials(x, t_raw / 9)))))
    data = FitDataset.from_rows(rows, t_normalizer=9, num_steps=10)
    model = fit(data, "multivariate12")
    rel = np.abs(np.array(model.coeffs) - theta) / np.abs(theta)
    assert rel.max() <= 1e-6
    assert mse(model, data) <= 1e-12
    assert time.perf_counter() - start < 1.0


@pytest.mark.criterion("04 multivariate12 MSE < univariate5 MSE on y = x + 0.5(t/T)^2, 20 seeds, < 5 s")
def test_c04_multi_beats_uni():
    start = time.perf_counter()
    T, n_prompts = 50, 100
    for seed in range(20):
        rng = np.random.default_rng(seed)
        x = rng.uniform(0.0, 0.1, size=(n_prompts, T))
        t = np.broadcast_to(np.arange(T), (n_prompts, T))
        y = x + 0.5 * (t / T) ** 2
        data = FitDataset(x.ravel(), t.ravel().astype(float), y.ravel(), float(T - 1), T)
        assert mse(fit(data, "multivariate12"), data) < mse(fit(data, "univariate5"), data)
    assert time.perf_counter() - start < 5.0


@pytest.mark.criterion("05 scheduler boundary: 1000 random instances vs brute-force oracle, ties reuse, < 5 s")
def test_c05_boundary_oracle():
    start = time.perf_counter()
    rng = np.random.default_rng(5)
    for i in range(1000):
        T = int(rng.integers(1, 51))
        est = list(rng.uniform(0.0, 0.3, T))
        delta = float(rng.uniform(0.05, 1.0))
        decisions, _ = simulate_main(est, delta)
        assert check_boundary(est, delta, computed(decisions)) == [], f"instance {i}"
    # accumulator lands on delta: 0.2 + 0.4 rounds above 0.6, 0.25 + 0.5 is exact
    assert simulate_main([0.0, 0.2, 0.4], 0.6)[0] == [C, MainDecision.REUSE, MainDecision.REUSE]
    assert simulate_main([0.0, 0.25, 0.5], 0.75)[0] == [C, MainDecision.REUSE, MainDecision.REUSE]
    assert simulate_main([99.0, 0.5, 0.3, 0.2, 0.4], 0.6)[0] == [C, MainDecision.REUSE, C,
                                                                 MainDecision.REUSE, MainDecision.REUSE]
    assert time.perf_counter() - start < 5.0


@pytest.mark.criterion("06 threshold monotonicity: 200 sequences, delta grid {0.05,0.1,0.2,0.3,0.5}")
def test_c06_monotonicity():
    rng = np.random.default_rng(6)
    grid = [0.05, 0.1, 0.2, 0.3, 0.5]
    for _ in range(200):
        est = list(rng.uniform(0.0, 0.3, int(rng.integers(1, 51))))
        counts = [simulate_main(est, d)[0].count(C) for d in grid]
        assert all(a >= b for a, b in zip(counts, counts[1:])), counts


@pytest.mark.criterion("07 PCA pipeline: S(0.5)=0.5, bounds hold, delta -> delta_min as R -> 1, worked example 1e-6")
def test_c07_pca_pipeline():
    for k in (0.5, 1.0, 50.0, 200.0):
        assert sigmoid_stretch(0.5, k) == 0.5
    cfg = PcaConfig(**WAN)
    for S in np.linspace(0, 1, 101):
        assert 0.1 <= fuse_threshold(float(S), cfg) <= 0.23
    prev = None
    for R in (0.9, 0.99, 0.999, 1.0):
        delta = fuse_threshold(sigmoid_stretch(R, 50.0), cfg)
        assert prev is None or delta <= prev
        prev = delta
    assert abs(prev - 0.1) < 1e-10
    bank = EmbeddingBank.from_arrays([[1.0, 0.0]], [[0.0, 1.0]])
    score = score_prompt([1.0, 0.0], bank, cfg)
    assert abs(score.R - 1.0) <= 1e-6
    assert abs(score.delta_pca - 0.1) <= 1e-6


@pytest.mark.criterion("08 pass accounting: prompttea T=4 speedup 2.0, dyncfg_only 4/3, all-compute 1.0")
def test_c08_pass_accounting():
    est = StepEstimates((0.0, 0.1, 0.9, 0.1), DiffCodebook((0.0, 0.05, 0.05, 0.05)))
    sched = simulate(PolicyConfig("prompttea", 0.5, 0.02), est)
    assert [d.value for d in sched.main_decisions] == ["Compute", "Reuse", "Compute", "Reuse"]
    assert (sched.computed_passes, sched.baseline_passes, sched.speedup) == (4, 8, 2.0)
    dyn = simulate(PolicyConfig("dyncfg_only", delta_cfg=0.02),
                   StepEstimates((0.0,) * 4, DiffCodebook((0.0, 0.01, 0.01, 0.05))))
    assert dyn.computed_passes == 6 and dyn.speedup == 4 / 3
    full = simulate(PolicyConfig("teacache", 0.01, cfg_enabled=False), StepEstimates((1.0,) * 50))
    assert (full.computed_passes, full.speedup) == (50, 1.0)


@pytest.mark.criterion("09 DFT: exact reconstruction n in {4,8,16,64}, naive DFT agreement, Parseval, all 1e-9")
def test_c09_dft():
    rng = np.random.default_rng(9)
    for n in (4, 8, 16, 64):
        for _ in range(25):
            c, u = rng.normal(size=n), rng.normal(size=n)
            cutoff = float(rng.uniform(0.05, 0.95))
            dl, dh = cfg_delta(c, u, cutoff)
            rec = reconstruct_uncond(c, dl, dh, FreqWeights(t0=10, beta=1.0), int(rng.integers(0, 20)))
            assert np.max(np.abs(rec - u)) <= 1e-9
            spectrum = dft_split(c, cutoff).full
            assert np.max(np.abs(spectrum - np.array(naive_dft(list(c))))) <= 1e-9
            energy = math.fsum(float(v) ** 2 for v in c)
            assert abs(float(np.sum(np.abs(spectrum) ** 2)) / n - energy) <= 1e-9 * energy


@pytest.mark.criterion("10 silhouette: brute-force agreement 1e-9 (n <= 30), tight > 0.99, interleaved within 0.05")
def test_c10_silhouette():
    rng = np.random.default_rng(10)
    for _ in range(50):
        n = int(rng.integers(3, 31))
        labels = [int(v) for v in rng.integers(0, 3, n)]
        labels[0], labels[1] = 0, 1
        X = rng.normal(size=(n, 3)) + np.array(labels)[:, None]
        assert abs(silhouette(X, labels) - brute_silhouette(X.tolist(), labels)) <= 1e-9
    tight = np.vstack([rng.normal(0, 0.003, (10, 3)), rng.normal(0, 0.003, (10, 3)) + [100, 0, 0]])
    assert silhouette(tight, [0] * 10 + [1] * 10) > 0.99
    pts = rng.normal(size=(30, 2))
    assert abs(silhouette(np.vstack([pts, pts]), [0] * 30 + [1] * 30)) <= 0.05


@pytest.mark.criterion("11 CV factor study: strong-factor CV > weak-factor CV in >= 95/100 runs")
def test_c11_cv_factor_study():
    results = [factor_study(seed) for seed in range(100)]
    wins = sum(r["vary_strong"] > r["vary_weak"] for r in results)
    assert wins >= 95, wins


@pytest.mark.criterion("12 end-to-end: simulate --preset wan21 on bundled trace is byte-identical across runs")
def test_c12_determinism(tmp_path):
    outs = []
    for name in ("a.json", "b.json"):
        out = tmp_path / name
        argv = ["simulate", "--preset", "wan21", "--trace", str(DATA / "trace.json"),
                "--model", str(DATA / "model.json"), "--codebook", str(DATA / "codebook.json"),
                "--embedding", str(DATA / "embedding.json"), "--bank", str(DATA / "bank.json"),
                "--out", str(out)]
        assert cli.run(argv) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
