import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from harmonic_enf.model import FrameConfig, HarmonicModelSpec, SampleBuffer, num_frames, synth_enf_ar1, synth_multitone
from harmonic_enf.preprocess import apply_fir, decimate, design_comb, frame, preprocess

FS = 800.0
MS = (2, 3, 4, 5, 6, 7)


def _db(x):
    return 20 * np.log10(x)


def _amplitude(x, fs, f):
    n = np.arange(x.size)
    return 2 * np.abs(np.dot(x, np.exp(-2j * np.pi * f * n / fs))) / x.size


# -- decimation ------------------------------------------------------------

def test_decimate_shrinks_length_tenfold():
    x = SampleBuffer(np.random.default_rng(0).standard_normal(80_005), 8000.0)
    y = decimate(x, 800.0)
    assert y.sample_rate_hz == 800.0
    assert len(y) == 8001  # tail zero-padded to a multiple of 10


def test_decimate_keeps_a_100hz_tone():
    n = 8000 * 20
    x = np.cos(2 * np.pi * 100 * np.arange(n) / 8000.0)
    y = decimate(SampleBuffer(x, 8000.0), 800.0).samples
    core = y[800:-800]
    assert abs(_amplitude(core, 800.0, 100.0) - 1.0) < 0.01
    ref = np.cos(2 * np.pi * 100 * np.arange(y.size) / 800.0)
    # no delay: matches the tone sampled directly at 800 Hz
    assert np.max(np.abs(core - ref[800:-800])) < 0.01


def test_decimate_rejects_alias_band():
    n = 8000 * 10
    x = np.cos(2 * np.pi * 1230 * np.arange(n) / 8000.0)   # aliases to 30 Hz if unfiltered
    y = decimate(SampleBuffer(x, 8000.0), 800.0).samples
    assert np.max(np.abs(y[400:-400])) < 1e-3


def test_decimate_factor_one_is_identity():
    x = SampleBuffer(np.random.default_rng(1).standard_normal(1000), 800.0)
    assert np.array_equal(decimate(x, 800.0).samples, x.samples)


def test_decimate_non_integer_factor():
    with pytest.raises(ValueError):
        decimate(SampleBuffer(np.zeros(1000), 44100.0), 800.0)


# -- comb design -----------------------------------------------------------

def test_comb_has_six_passbands_and_deep_gaps():
    c = design_comb(MS, FS, 256)
    assert c.length == 256
    assert np.allclose(c.taps, c.taps[::-1])   # linear phase
    assert [((lo + hi) / 2) for lo, hi in c.bands] == [100.0, 150.0, 200.0, 250.0, 300.0, 350.0]
    for lo, hi in c.bands:
        assert _db(c.response(np.linspace(lo, hi, 41))).min() >= -3.0
    gaps = [50 * m + 25 for m in MS[:-1]]
    assert _db(c.response(gaps)).max() <= -40.0


def test_comb_single_band_stopband_at_150():
    c = design_comb((2,), FS)
    assert _db(c.response([150.0]))[0] <= -40.0


def test_comb_unit_gain_at_centres():
    c = design_comb(MS, FS)
    assert np.allclose(c.response([50.0 * m for m in MS]), 1.0, atol=1e-9)


def test_comb_input_validation():
    with pytest.raises(ValueError):
        design_comb((), FS)
    with pytest.raises(ValueError):
        design_comb((8,), FS)
    with pytest.raises(ValueError):
        design_comb((2,), FS, length=1)


# -- filtering ---------------------------------------------------------------

def test_in_band_tone_amplitude_and_phase_kept():
    c = design_comb(MS, FS)
    n = 16000
    x = np.cos(2 * np.pi * 200.3 * np.arange(n) / FS + 0.7)
    y = apply_fir(SampleBuffer(x, FS), c).samples
    core = slice(1000, n - 1000)
    assert abs(_amplitude(y[core], FS, 200.3) - 1.0) < 0.03
    assert np.max(np.abs(y[core] - x[core])) < 0.03   # zero phase


def test_dc_and_zero_rejected():
    c = design_comb(MS, FS)
    y = apply_fir(SampleBuffer(np.ones(8000), FS), c).samples
    assert np.max(np.abs(y[500:-500])) < 1e-3
    assert not np.any(apply_fir(SampleBuffer(np.zeros(8000), FS), c).samples)


def test_filter_needs_longer_buffer():
    c = design_comb(MS, FS)
    with pytest.raises(ValueError):
        apply_fir(SampleBuffer(np.ones(100), FS), c)
    with pytest.raises(ValueError):
        apply_fir(SampleBuffer(np.ones(1000), 1000.0), c)


@settings(max_examples=20, deadline=None)
@given(a=st.floats(-5, 5), b=st.floats(-5, 5), seed=st.integers(0, 1000))
def test_filtering_is_linear(a, b, seed):
    c = design_comb(MS, FS)
    rng = np.random.default_rng(seed)
    x, y = rng.standard_normal((2, 2000))
    lhs = apply_fir(SampleBuffer(a * x + b * y, FS), c).samples
    rhs = a * apply_fir(SampleBuffer(x, FS), c).samples + b * apply_fir(SampleBuffer(y, FS), c).samples
    assert np.max(np.abs(lhs - rhs)) < 1e-9


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_in_band_enf_energy_ratio(seed):
    n = int(60 * FS)
    spec = HarmonicModelSpec.from_fundamental(synth_enf_ar1(n, seed), MS, seed=seed)
    x = synth_multitone(spec, FS)
    y = apply_fir(x, design_comb(MS, FS))
    ratio = y.energy() / x.energy()
    assert 0.94 <= ratio <= 1.0


def test_preprocess_decimates_then_filters():
    n = 8000 * 20
    x = np.cos(2 * np.pi * 100 * np.arange(n) / 8000.0) + np.cos(2 * np.pi * 25 * np.arange(n) / 8000.0)
    y = preprocess(SampleBuffer(x, 8000.0), MS, 800.0)
    assert y.sample_rate_hz == 800.0 and len(y) == n // 10
    ref = np.cos(2 * np.pi * 100 * np.arange(len(y)) / 800.0)
    assert np.max(np.abs(y.samples[1000:-1000] - ref[1000:-1000])) < 0.03


# -- framing -----------------------------------------------------------------

def test_frames_non_overlapping_when_step_equals_length():
    x = np.arange(200.0)
    f = frame(x, FrameConfig(100, 100))
    assert f.shape == (2, 100)
    assert np.array_equal(f.ravel(), x)


def test_default_frames_share_fifteen_sixteenths():
    cfg = FrameConfig.default(FS)
    x = np.arange(40 * 800.0)
    f = frame(x, cfg)
    assert np.array_equal(f[0][800:], f[1][:-800])
    assert f.shape == (num_frames(x.size, cfg), 12800)


def test_short_input_gives_one_padded_frame():
    f = frame(np.ones(10), FrameConfig(16, 4))
    assert f.shape == (1, 16)
    assert np.array_equal(f[0], np.r_[np.ones(10), np.zeros(6)])


@settings(max_examples=100, deadline=None)
@given(n=st.integers(1, 3000), frame_len=st.integers(1, 300), step=st.integers(1, 300))
def test_frame_starts_reassemble_padded_signal(n, frame_len, step):
    if step > frame_len:
        step, frame_len = frame_len, step
    cfg = FrameConfig(frame_len, step)
    x = np.arange(1.0, n + 1)
    f = frame(x, cfg)
    assert f.shape[0] == num_frames(n, cfg)
    for l in range(f.shape[0]):
        seg = x[l * step: l * step + frame_len]
        assert np.array_equal(f[l][:seg.size], seg)
        assert not np.any(f[l][seg.size:])
