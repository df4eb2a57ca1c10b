import json
import struct
import wave

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from harmonic_enf import io as fio
from harmonic_enf.io import ReferenceParseError, WavDecodeError
from harmonic_enf.model import NORMALIZED, FrameConfig, IfSeries, SampleBuffer


def stdlib_wav(path, pcm, rate=8000, channels=1):
    # written by the standard library, independent of the package writer
    with wave.open(str(path), "wb") as w:
        w.setnchannels(channels)
        w.setsampwidth(2)
        w.setframerate(rate)
        w.writeframes(np.asarray(pcm, dtype="<i2").tobytes())


def test_one_second_at_8khz(tmp_path):
    p = tmp_path / "a.wav"
    stdlib_wav(p, np.zeros(8000))
    x = fio.read_wav(p)
    assert len(x) == 8000 and x.sample_rate_hz == 8000.0


def test_full_scale_square(tmp_path):
    p = tmp_path / "sq.wav"
    stdlib_wav(p, np.where(np.arange(800) % 80 < 40, 32767, -32768))
    x = fio.read_wav(p).samples
    assert x.max() == pytest.approx(32767 / 32768) and x.min() == -1.0


def test_stereo_is_averaged(tmp_path):
    p = tmp_path / "st.wav"
    stdlib_wav(p, np.array([[1000, 3000]] * 10).ravel(), channels=2)
    assert np.allclose(fio.read_wav(p).samples, 2000 / 32768)


def test_write_then_read(tmp_path):
    p = tmp_path / "w.wav"
    x = np.sin(np.arange(1000) / 7.0)
    gain = fio.write_wav(p, SampleBuffer(x, 8000.0))
    y = fio.read_wav(p).samples
    assert np.max(np.abs(y - x * gain * 32767 / 32768)) <= 1 / 32768


def test_truncated_data_is_rejected(tmp_path):
    p = tmp_path / "t.wav"
    stdlib_wav(p, np.zeros(1000))
    p.write_bytes(p.read_bytes()[:-100])
    with pytest.raises(WavDecodeError) as e:
        fio.read_wav(p)
    assert e.value.offset == 36


@pytest.mark.parametrize("blob,offset", [(b"RIF", 3), (b"RIFX" + bytes(8), 0),
                                         (b"RIFF\0\0\0\0WAVX", 8), (b"RIFF\0\0\0\0WAVE", 12)])
def test_malformed_headers(tmp_path, blob, offset):
    p = tmp_path / "m.wav"
    p.write_bytes(blob)
    with pytest.raises(WavDecodeError) as e:
        fio.read_wav(p)
    assert e.value.offset == offset


def test_non_pcm_and_wrong_depth(tmp_path):
    def fmt_file(tag, bits):
        fmt = struct.pack("<HHIIHH", tag, 1, 8000, 8000 * bits // 8, bits // 8, bits)
        body = b"WAVE" + b"fmt " + struct.pack("<I", 16) + fmt + b"data" + struct.pack("<I", 4) + bytes(4)
        return b"RIFF" + struct.pack("<I", len(body)) + body

    p = tmp_path / "f.wav"
    p.write_bytes(fmt_file(3, 32))
    with pytest.raises(WavDecodeError, match="codec"):
        fio.read_wav(p)
    p.write_bytes(fmt_file(1, 8))
    with pytest.raises(WavDecodeError, match="bit depth"):
        fio.read_wav(p)


# -- reference files -------------------------------------------------------------

def test_constant_reference_scaled_to_2nd(tmp_path):
    p = tmp_path / "r.txt"
    p.write_text("50.0\n" * 5)
    r = fio.read_reference_enf(p)
    assert r.is_normalized and np.all(r.values_hz == 100.0)


def test_reference_header_and_two_columns(tmp_path):
    p = tmp_path / "r.csv"
    p.write_text("time,freq\n0.5,50.01\n1.5,49.99\n")
    assert np.allclose(fio.read_reference_enf(p).values_hz, [100.02, 99.98])


def test_reference_errors_carry_line(tmp_path):
    p = tmp_path / "r.txt"
    p.write_text("")
    with pytest.raises(ReferenceParseError):
        fio.read_reference_enf(p)
    p.write_text("50.0\n50.1\nabc\n")
    with pytest.raises(ReferenceParseError) as e:
        fio.read_reference_enf(p)
    assert e.value.line == 3


def test_reference_write_read(tmp_path):
    p = tmp_path / "ref.csv"
    s = IfSeries([100.02, 100.0, 99.96], NORMALIZED)
    fio.write_reference_enf(p, s, 800.0, FrameConfig.default(800.0))
    assert np.allclose(fio.read_reference_enf(p).values_hz, s.values_hz, rtol=0, atol=1e-12)


# -- ENF CSV -------------------------------------------------------------------------

@settings(max_examples=50, deadline=None)
@given(vals=st.lists(st.floats(99.8, 100.2), min_size=1, max_size=30))
def test_enf_csv_round_trip(tmp_path_factory, vals):
    d = tmp_path_factory.mktemp("csv")
    cfg = FrameConfig.default(800.0)
    fio.write_enf_csv(d / "a.csv", IfSeries(vals, NORMALIZED), 800.0, cfg)
    s, t = fio.read_enf_csv(d / "a.csv")
    assert s.values_hz.tolist() == vals
    assert np.allclose(t, 8.0 + np.arange(len(vals)))
    fio.write_enf_csv(d / "b.csv", s, 800.0, cfg)
    assert (d / "a.csv").read_bytes() == (d / "b.csv").read_bytes()


def test_enf_csv_normalises_harmonic_series(tmp_path):
    fio.write_enf_csv(tmp_path / "h.csv", IfSeries([200.2], 4), 800.0)
    lines = (tmp_path / "h.csv").read_text().splitlines()
    assert lines[0] == "frame_index,time_sec,freq_hz"
    assert float(lines[1].split(",")[2]) == pytest.approx(100.1)


def test_failed_write_leaves_nothing(tmp_path):
    def boom(f):
        f.write("partial")
        raise RuntimeError("disk full")

    with pytest.raises(RuntimeError):
        fio._atomic_write(tmp_path / "x.csv", boom)
    assert list(tmp_path.iterdir()) == []


def test_bad_enf_csv_rejected(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b,c\n")
    with pytest.raises(ValueError):
        fio.read_enf_csv(p)


# -- JSON and config ---------------------------------------------------------------------

def test_json_handles_numpy_and_nonfinite(tmp_path):
    p = tmp_path / "d.json"
    fio.write_json(p, {"R": np.eye(2), "eta": np.float64(0.8), "k": np.int64(3), "bad": float("nan"),
                       "omega": (2, 4)})
    d = json.loads(p.read_text())
    assert d == {"R": [[1.0, 0.0], [0.0, 1.0]], "eta": 0.8, "k": 3, "bad": None, "omega": [2, 4]}


def test_config_file(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("# comment\nscheme = mle\nn-rep=500  # trailing\n\n")
    assert fio.read_config(p) == {"scheme": "mle", "n_rep": "500"}
    p.write_text("nonsense\n")
    with pytest.raises(ValueError):
        fio.read_config(p)
