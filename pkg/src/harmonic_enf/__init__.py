"""Robust ENF extraction from audio recordings.

Harmonic enhancement, graph-based harmonic selection and multi-tone
maximum-likelihood estimation of the electric network frequency.
"""

from .enhancement import EnhancedSignal, EnhancerConfig, hrfa, rfa_component, sfm_encode
from .estimators import (
    Pipeline,
    SchemeId,
    SchemeParams,
    WeightMatrix,
    estimate_weights,
    mle,
    run_scheme,
    run_schemes,
    wmle,
)
from .evaluation import Scenario, crlb, crlb_experiment, monte_carlo, mse, oracle_mwc
from .model import (
    FrameConfig,
    HarmonicModelSpec,
    IfSeries,
    SampleBuffer,
    add_wgn_at_snr,
    corrupt_harmonics,
    num_frames,
    synth_enf_ar1,
    synth_multitone,
)
from .preprocess import apply_fir, decimate, design_comb, preprocess
from .selection import ghsa, maximal_cliques, select_mwc, threshold_eta
from .spectral import interpolate_if, normalize_to_2nd, periodogram, track_if

__version__ = "0.1.0"
