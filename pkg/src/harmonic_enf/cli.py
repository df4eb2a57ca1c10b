"""Command line entry point: extract, synth, mc, eval-dataset, compare."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io as fio
from .enhancement import EnhancerConfig
from .estimators import DEFAULT_HARMONICS, Pipeline, SchemeId, SchemeParams
from .evaluation import Scenario, frame_truth, monte_carlo, mse, simulate_recording
from .model import FrameConfig, SampleBuffer
from .selection import corr_matrix

log = logging.getLogger("harmonic_enf")

REFERENCE_SUFFIXES = (".csv", ".txt", ".ref")


class UsageError(Exception):
    pass


def _ints(text) -> tuple[int, ...]:
    if isinstance(text, (tuple, list)):
        return tuple(int(v) for v in text)
    return tuple(int(v) for v in str(text).replace(" ", "").split(",") if v)


def _floats(text) -> tuple[float, ...]:
    if isinstance(text, (tuple, list)):
        return tuple(float(v) for v in text)
    return tuple(float(v) for v in str(text).replace(" ", "").split(",") if v)


def _schemes(text) -> tuple[str, ...]:
    if text in (None, "", "all"):
        return tuple(s.value for s in SchemeId)
    names = text if isinstance(text, (tuple, list)) else str(text).replace(" ", "").split(",")
    try:
        return tuple(SchemeId(n).value for n in names if n)
    except ValueError as e:
        raise UsageError(str(e)) from None


@dataclass
class RunConfig:
    """Run parameters shared by all subcommands."""

    input: str | None = None
    scheme: str = "p_mle"
    target_fs: float = 800.0
    harmonics: tuple = DEFAULT_HARMONICS
    iterations: int = 2
    tau: int = 3000
    frame_seconds: float = 16.0
    step_seconds: float = 1.0
    resolution: float = 1.0 / 4000.0
    kappa: float = 4.0
    n_rep: int = 10_000
    desk: bool = False
    seed: int = 0

    _PARSERS = {
        "input": str, "scheme": str, "target_fs": float, "harmonics": _ints,
        "iterations": int, "tau": int, "frame_seconds": float, "step_seconds": float,
        "resolution": float, "kappa": float, "n_rep": int, "seed": int,
        "desk": lambda v: str(v).lower() in ("1", "true", "yes", "on"),
    }

    @classmethod
    def build(cls, file_values: dict, flag_values: dict) -> "RunConfig":
        """Defaults, overridden by the config file, overridden by flags."""
        cfg = cls()
        for source in (file_values, flag_values):
            for k, v in source.items():
                if v is None or k not in cls._PARSERS:
                    continue
                try:
                    setattr(cfg, k, cls._PARSERS[k](v))
                except ValueError:
                    raise UsageError(f"invalid value for {k}: {v!r}") from None
        if cfg.desk and "n_rep" not in flag_values and "n_rep" not in file_values:
            cfg.n_rep = 1000
        _schemes([cfg.scheme])
        return cfg

    @property
    def frame_config(self) -> FrameConfig:
        return FrameConfig(int(round(self.frame_seconds * self.target_fs)),
                           int(round(self.step_seconds * self.target_fs)), self.resolution)

    def scheme_params(self) -> SchemeParams:
        enh = EnhancerConfig(tau=self.tau, iterations=self.iterations, sample_rate_hz=self.target_fs,
                             frame_config=self.frame_config)
        return SchemeParams(harmonics=tuple(self.harmonics), target_fs_hz=self.target_fs,
                            frame_config=self.frame_config, enhancer=enh, kappa=self.kappa,
                            n_rep=self.n_rep, seed=self.seed)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}


def _load_recording(path) -> SampleBuffer:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"input file not found: {p}")
    return fio.read_wav(p)


def _diagnostics(result, cfg: RunConfig) -> dict:
    payload = {"scheme": result.scheme.value, "omega": list(result.omega), "eta": result.eta,
               "seed": cfg.seed, "config": cfg.as_dict(), "cc_matrix": None}
    if result.selection is not None and result.selection.tracks:
        ms, R = corr_matrix(result.selection.tracks)
        payload["cc_matrix"] = {"harmonics": list(ms), "values": R}
        payload["fallback"] = result.selection.fallback
    return payload


def cmd_extract(args, cfg: RunConfig) -> int:
    rec = _load_recording(cfg.input)
    pipe = Pipeline(rec, cfg.scheme_params())
    res = pipe.run(cfg.scheme)
    fio.write_enf_csv(args.output, res.estimate, cfg.target_fs, cfg.frame_config)
    diag = _diagnostics(res, cfg)
    if args.reference:
        ref = fio.read_reference_enf(args.reference)
        diag["mse_hz2"] = mse(res.estimate, ref, args.offset)
    if args.diagnostics:
        fio.write_json(args.diagnostics, diag)
    log.info("extracted %d frames with %s, omega=%s", len(res.estimate), res.scheme.value, res.omega)
    return 0


def cmd_synth(args, cfg: RunConfig) -> int:
    sc = Scenario(duration_s=args.duration, harmonics=tuple(cfg.harmonics), seed=cfg.seed,
                  corrupt_set=_ints(args.corrupt), corruption_snr_db=args.corruption_snr,
                  sample_rate_hz=args.wav_rate)
    rec, _, spec = simulate_recording(sc, args.snr, 0)
    fio.write_wav(args.output, rec)
    out_cfg = cfg.frame_config
    truth = frame_truth(_resample_path(spec.fundamental_if_hz, args.wav_rate, cfg.target_fs), out_cfg)
    fio.write_reference_enf(args.truth, truth, cfg.target_fs, out_cfg)
    return 0


def _resample_path(f: np.ndarray, src_fs: float, dst_fs: float) -> np.ndarray:
    n = int(round(f.size * dst_fs / src_fs))
    return np.interp(np.arange(n) * src_fs / dst_fs, np.arange(f.size), f)


def cmd_mc(args, cfg: RunConfig) -> int:
    schemes = _schemes(args.schemes)
    sc = Scenario(duration_s=args.duration, snrs_db=_floats(args.snrs), schemes=schemes,
                  corrupt_set=_ints(args.corrupt), corruption_snr_db=args.corruption_snr,
                  trials=args.trials, seed=cfg.seed, harmonics=tuple(cfg.harmonics),
                  sample_rate_hz=cfg.target_fs, enhancer=cfg.scheme_params().enhancer,
                  n_rep=cfg.n_rep, track_omega=args.omega is not None)
    res = monte_carlo(sc)
    fio.write_rows(args.output, ("scheme", "snr_db", "nmse_hz2"),
                   [(s, snr, v) for (s, snr), v in res.nmse_table.items()])
    if args.trials_out:
        fio.write_rows(args.trials_out, ("scheme", "snr_db", "trial", "mse_hz2", "omega_size"),
                       [(r.scheme, r.snr_db, r.seed, r.mse_hz2, r.omega_size) for r in res.reports])
    if args.omega:
        fio.write_rows(args.omega, ("snr_db", "mean_omega_before", "mean_omega_after"),
                       [(snr, a, b) for snr, (a, b) in sorted(res.omega_sizes.items())])
    print(f"{len(res.reports)} trial reports")
    return 0


def find_recordings(directory) -> list[tuple[Path, Path]]:
    """WAV files paired with a sibling reference file of the same stem."""
    d = Path(directory)
    if not d.is_dir():
        raise UsageError(f"not a directory: {d}")
    pairs = []
    for wav in sorted(d.glob("*.wav")):
        refs = [wav.with_suffix(s) for s in REFERENCE_SUFFIXES if wav.with_suffix(s).is_file()]
        if not refs:
            log.warning("no reference for %s; skipped", wav.name)
            continue
        pairs.append((wav, refs[0]))
    if not pairs:
        raise UsageError(f"no recording/reference pairs in {d}")
    return pairs


def evaluate_dataset(directory, schemes, cfg: RunConfig, offset: int = 0):
    """Per-recording MSE rows and the per-scheme summary rows."""
    rows = []
    for wav, ref_path in find_recordings(directory):
        pipe = Pipeline(fio.read_wav(wav), cfg.scheme_params())
        ref = fio.read_reference_enf(ref_path)
        for s in schemes:
            res = pipe.run(s)
            rows.append((wav.stem, s, mse(res.estimate, ref, offset), len(res.omega)))
    summary = []
    for s in schemes:
        errs = np.array([r[2] for r in rows if r[1] == s])
        sizes = [r[3] for r in rows if r[1] == s]
        m_size = 1 if SchemeId(s).single_tone else len(cfg.harmonics)
        summary.append((s, m_size, float(np.mean(sizes)), float(errs.mean()), float(errs.std())))
    return rows, summary


def cmd_eval_dataset(args, cfg: RunConfig) -> int:
    schemes = _schemes(args.schemes)
    rows, summary = evaluate_dataset(args.directory, schemes, cfg, args.offset)
    fio.write_rows(args.output, ("recording", "scheme", "mse_hz2", "omega_size"), rows)
    fio.write_rows(args.summary, ("scheme", "n_harmonics", "mean_omega", "nmse_hz2", "std_mse_hz2"), summary)
    for s, k, om, nm, sd in summary:
        print(f"{s:8s} |M|={k} mean|Omega|={om:.2f} NMSE={nm:.3e} std={sd:.3e}")
    return 0


def cmd_compare(args, cfg: RunConfig) -> int:
    rec = _load_recording(cfg.input)
    pipe = Pipeline(rec, cfg.scheme_params())
    results = {s: pipe.run(s) for s in SchemeId}
    n = min(len(r.estimate) for r in results.values())
    ref = fio.read_reference_enf(args.reference) if args.reference else None
    header = ["frame_index"] + [s.value for s in SchemeId]
    rows = [[i] + [float(results[s].estimate.values_hz[i]) for s in SchemeId] for i in range(n)]
    fio.write_rows(args.output, header, rows)
    for s, r in results.items():
        extra = f" mse={mse(r.estimate, ref, args.offset):.3e}" if ref is not None else ""
        print(f"{s.value:8s} omega={','.join(map(str, r.omega))}{extra}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("run configuration")
    g.add_argument("--config", help="key=value file; flags take precedence")
    g.add_argument("--scheme", help="estimation scheme (default p_mle)")
    g.add_argument("--target-fs", dest="target_fs", type=float, help="analysis rate in Hz (800)")
    g.add_argument("--harmonics", help="comma-separated harmonic indices (2,3,4,5,6,7)")
    g.add_argument("--iterations", type=int, help="enhancer iterations (2)")
    g.add_argument("--tau", type=int, help="enhancer lags (3000)")
    g.add_argument("--frame-seconds", dest="frame_seconds", type=float, help="frame length in s (16)")
    g.add_argument("--step-seconds", dest="step_seconds", type=float, help="frame step in s (1)")
    g.add_argument("--resolution", type=float, help="periodogram grid in Hz (1/4000)")
    g.add_argument("--kappa", type=float, help="threshold multiplier (4)")
    g.add_argument("--n-rep", dest="n_rep", type=int, help="noise pairs for the threshold (10000)")
    g.add_argument("--desk", action="store_const", const=True, help="desk mode: 1000 noise pairs")
    g.add_argument("--seed", type=int, help="base seed (0)")
    g.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="harmonic-enf", description="ENF extraction from audio recordings.")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("extract", parents=[common], help="estimate the ENF of one WAV file")
    e.add_argument("input")
    e.add_argument("-o", "--output", required=True, help="ENF CSV path")
    e.add_argument("--diagnostics", help="JSON diagnostics path")
    e.add_argument("--reference", help="reference ENF file for an MSE report")
    e.add_argument("--offset", type=int, default=0, help="frames to skip at the start of the reference")
    e.set_defaults(func=cmd_extract)

    s = sub.add_parser("synth", parents=[common], help="write a synthetic recording and its truth")
    s.add_argument("-o", "--output", required=True, help="WAV path")
    s.add_argument("--truth", required=True, help="ground-truth reference path (time,freq at the fundamental)")
    s.add_argument("--duration", type=float, default=300.0)
    s.add_argument("--snr", type=float, default=20.0)
    s.add_argument("--wav-rate", dest="wav_rate", type=float, default=8000.0)
    s.add_argument("--corrupt", default="", help="harmonics to corrupt, e.g. 3,6,7")
    s.add_argument("--corruption-snr", dest="corruption_snr", type=float, default=-10.0)
    s.set_defaults(func=cmd_synth)

    m = sub.add_parser("mc", parents=[common], help="Monte Carlo NMSE versus SNR")
    m.add_argument("-o", "--output", required=True, help="NMSE table CSV")
    m.add_argument("--snrs", default="-20,-10,0")
    m.add_argument("--trials", type=int, default=10)
    m.add_argument("--schemes", default="all")
    m.add_argument("--duration", type=float, default=120.0)
    m.add_argument("--corrupt", default="")
    m.add_argument("--corruption-snr", dest="corruption_snr", type=float, default=-10.0)
    m.add_argument("--omega", help="CSV of mean selected-set size before/after enhancement")
    m.add_argument("--trials-out", dest="trials_out", help="per-trial CSV")
    m.set_defaults(func=cmd_mc)

    d = sub.add_parser("eval-dataset", parents=[common], help="per-recording MSE over a directory")
    d.add_argument("directory")
    d.add_argument("-o", "--output", required=True, help="per-recording MSE CSV")
    d.add_argument("--summary", required=True, help="per-scheme summary CSV")
    d.add_argument("--schemes", default="all")
    d.add_argument("--offset", type=int, default=0)
    d.set_defaults(func=cmd_eval_dataset)

    c = sub.add_parser("compare", parents=[common], help="run all ten schemes on one WAV file")
    c.add_argument("input")
    c.add_argument("-o", "--output", required=True, help="per-frame CSV, one column per scheme")
    c.add_argument("--reference")
    c.add_argument("--offset", type=int, default=0)
    c.set_defaults(func=cmd_compare)
    return p


_CONFIG_KEYS = ("scheme", "target_fs", "harmonics", "iterations", "tau", "frame_seconds",
                "step_seconds", "resolution", "kappa", "n_rep", "desk", "seed")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        file_values = fio.read_config(args.config) if args.config else {}
        flags = {k: getattr(args, k) for k in _CONFIG_KEYS if getattr(args, k, None) is not None}
        if getattr(args, "input", None):
            flags["input"] = args.input
        cfg = RunConfig.build(file_values, flags)
        return args.func(args, cfg)
    except (UsageError, FileNotFoundError) as e:
        print(f"harmonic-enf: error: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"harmonic-enf: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
