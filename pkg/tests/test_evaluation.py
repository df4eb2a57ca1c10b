import math
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from harmonic_enf.evaluation import (
    Scenario,
    TrialReport,
    aggregate,
    crlb,
    frame_truth,
    monte_carlo,
    mse,
    mse_nmse,
    nmse,
    oracle_mwc,
    phase_slope_weights,
    simulate_recording,
)
from harmonic_enf.model import NORMALIZED, FrameConfig, IfSeries

MS = (2, 3, 4, 5, 6, 7)


def fisher_crlb(n, snr, harmonics, fs, f0=50.0):
    """Exact CRLB on 2*f0 from the Fisher matrix of the harmonic model.

    Unknowns: f0, then an amplitude and a phase per harmonic. White noise
    variance follows from the total signal energy and ``snr``.
    """
    t = np.arange(n) / fs
    ph = [0.3 * k for k in range(len(harmonics))]
    s = sum(np.cos(2 * np.pi * m * f0 * t + p) for m, p in zip(harmonics, ph))
    sigma2 = np.dot(s, s) / n / snr
    cols = [sum(-2 * np.pi * m * t * np.sin(2 * np.pi * m * f0 * t + p) for m, p in zip(harmonics, ph))]
    for m, p in zip(harmonics, ph):
        cols.append(np.cos(2 * np.pi * m * f0 * t + p))
        cols.append(-np.sin(2 * np.pi * m * f0 * t + p))
    D = np.array(cols)
    J = D @ D.T / sigma2
    return 4 * np.linalg.inv(J)[0, 0]


def test_crlb_hand_value():
    assert crlb(6400, 1.0, MS, 800.0) == pytest.approx(1.28e-7, rel=0.01)


def test_crlb_scaling_rules():
    assert crlb(6400, 2.0, MS, 800.0) == pytest.approx(crlb(6400, 1.0, MS, 800.0) / 2)
    r = crlb(6400, 1.0, (2,), 800.0, n_components=6) / crlb(6400, 1.0, MS, 800.0)
    assert r == pytest.approx(139 / 4)


@pytest.mark.parametrize("snr", [0.1, 1.0, 10.0])
def test_crlb_matches_fisher_information(snr):
    assert crlb(6400, snr, MS, 800.0) == pytest.approx(fisher_crlb(6400, snr, MS, 800.0), rel=0.01)


def test_crlb_validation():
    with pytest.raises(ValueError):
        crlb(100, 1.0, ())
    with pytest.raises(ValueError):
        crlb(100, 0.0, MS)


# -- metrics --------------------------------------------------------------------

def test_mse_examples():
    a = IfSeries(np.full(10, 100.0), NORMALIZED)
    assert mse(a, a) == 0.0
    assert mse(IfSeries(np.full(10, 100.01), NORMALIZED), a) == pytest.approx(1e-4)
    assert mse(IfSeries(np.full(9, 100.0), NORMALIZED), a, offset=1) == 0.0
    assert mse_nmse(a, a) == (0.0, 0.0)


def test_mse_aligns_harmonic_scales_and_lengths():
    est = IfSeries(np.full(5, 200.2), 4)
    ref = IfSeries(np.full(8, 100.1), NORMALIZED)
    assert mse(est, ref) == pytest.approx(0.0, abs=1e-20)
    assert mse([1.0, 2.0, 3.0], [0.0, 2.0, 3.0], offset=-1) == pytest.approx((2.0 ** 2 + 1.0) / 2)


def test_mse_needs_overlap():
    with pytest.raises(ValueError):
        mse([1.0], [1.0, 2.0], offset=5)
    with pytest.raises(ValueError):
        nmse([])


@settings(max_examples=50, deadline=None)
@given(est=st.lists(st.floats(99.8, 100.2), min_size=1, max_size=40),
       truth=st.lists(st.floats(99.8, 100.2), min_size=1, max_size=40))
def test_in_band_error_is_bounded(est, truth):
    assert mse(est, truth) <= 0.4 ** 2 + 1e-12


@settings(max_examples=50, deadline=None)
@given(vals=st.lists(st.tuples(st.sampled_from(["mle", "p_mle"]), st.sampled_from([-20.0, 0.0]),
                               st.floats(0, 1e-3)), min_size=1, max_size=20), seed=st.integers(0, 1000))
def test_aggregation_ignores_trial_order(vals, seed):
    reps = [TrialReport(s, snr, v, v, 6, k) for k, (s, snr, v) in enumerate(vals)]
    shuffled = reps[:]
    random.Random(seed).shuffle(shuffled)
    assert aggregate(reps) == aggregate(shuffled)


# -- reference ENF per frame ---------------------------------------------------------

def test_phase_slope_weights_are_a_parabola():
    w = phase_slope_weights(6)
    assert w.sum() == pytest.approx(1.0)
    assert w[-1] == 0.0 and np.all(w[:-1] > 0)
    # c_i = sum_{k>i}(k - mean) for n=6
    assert np.allclose(w, np.array([5, 8, 9, 8, 5, 0]) / 35)
    assert np.argmax(w) in (2, 3)


def test_frame_truth_is_the_least_squares_phase_slope():
    # fit a line to the accumulated phase and compare
    rng = np.random.default_rng(2)
    cfg = FrameConfig(1000, 500)
    f = 50 + np.cumsum(0.001 * rng.standard_normal(4000))
    phase = np.concatenate(([0.0], np.cumsum(f[:-1])))
    t = frame_truth(f, cfg).values_hz
    for l in range(3):
        seg = phase[l * 500: l * 500 + 1000]
        slope = np.polyfit(np.arange(seg.size), seg, 1)[0]
        assert t[l] == pytest.approx(2 * slope, abs=1e-9)
    m = frame_truth(f, cfg, weighting="mean").values_hz
    assert m[0] == pytest.approx(2 * f[:1000].mean())
    with pytest.raises(ValueError):
        frame_truth(f, cfg, weighting="median")


# -- Monte Carlo -----------------------------------------------------------------------

def test_monte_carlo_counts_and_determinism():
    sc = Scenario(duration_s=20, snrs_db=(-10.0, 0.0), schemes=("mle",), trials=2, seed=3,
                  n_rep=50)
    a, b = monte_carlo(sc), monte_carlo(sc)
    assert len(a.reports) == 4
    assert a.reports == b.reports
    assert set(a.nmse_table) == {("mle", -10.0), ("mle", 0.0)}
    assert a.nmse("mle", 0.0) == pytest.approx(np.mean([r.mse_hz2 for r in a.reports if r.snr_db == 0.0]))


def test_simulated_noise_matches_requested_snr():
    sc = Scenario(duration_s=20, seed=1)
    clean, _, _ = simulate_recording(sc, math.inf, 0)
    noisy, truth, _ = simulate_recording(sc, -20.0, 0)
    v = noisy.samples - clean.samples
    assert 10 * math.log10(clean.energy() / np.dot(v, v)) == pytest.approx(-20.0, abs=1e-9)
    assert len(truth) == 5


# -- clique oracle ---------------------------------------------------------------------

def test_oracle_two_clique_weights():
    def R(w125, w34):
        M = np.eye(5)
        for i, j in ((0, 1), (0, 4), (1, 4)):
            M[i, j] = M[j, i] = w125
        M[2, 3] = M[3, 2] = w34
        return M

    assert oracle_mwc(R(0.95, 0.9), 0.8) == (0, 1, 4)
    assert oracle_mwc(R(0.9, 0.95), 0.8) == (2, 3)


def test_oracle_edgeless_and_size_limit():
    assert oracle_mwc(np.eye(4) + 0.1 * (1 - np.eye(4)), 0.8) == ()
    with pytest.raises(ValueError):
        oracle_mwc(np.eye(13), 0.5)


def test_oracle_over_all_subsets_picks_best_edge():
    M = np.full((3, 3), 0.9)
    M[0, 1] = M[1, 0] = 0.95
    np.fill_diagonal(M, 1)
    assert oracle_mwc(M, 0.8) == (0, 1, 2)
    assert oracle_mwc(M, 0.8, maximal_only=False) == (0, 1)
