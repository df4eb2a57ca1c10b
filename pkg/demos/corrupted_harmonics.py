"""Corrupted harmonics: plain MLE versus enhancement + selection (P-MLE).

Five minutes of synthetic ENF at -20 dB, with harmonics 3, 6 and 7 buried
under extra noise. Prints the selected set and the MSE of each scheme.

    python3 demos/corrupted_harmonics.py
"""

import numpy as np

from harmonic_enf import Pipeline, Scenario, SchemeParams
from harmonic_enf.evaluation import mse, simulate_recording

sc = Scenario(duration_s=300, corrupt_set=(3, 6, 7), corruption_snr_db=-10.0, seed=0)
rec, truth, _ = simulate_recording(sc, -20.0, 0)
print(f"{len(rec) / rec.sample_rate_hz:.0f} s at {rec.sample_rate_hz:.0f} Hz, {len(truth)} frames")

pipe = Pipeline(rec, SchemeParams(n_rep=1000))  # desk-sized threshold estimate

# correlation-based selection before and after enhancement
for enhanced in (False, True):
    sel = pipe.selection(enhanced)
    tag = "enhanced" if enhanced else "raw     "
    print(f"{tag} omega={sel.omega} avg cc={sel.average_weight:.3f} fallback={sel.fallback}")

for scheme in ("single", "mle", "wmle", "s_mle", "p_mle", "p_wmle"):
    res = pipe.run(scheme)
    print(f"{scheme:7s} omega={','.join(map(str, res.omega)):12s} mse={mse(res.estimate, truth):.2e} Hz^2")

est = pipe.run("p_mle").estimate.values_hz
print("first frames (Hz):", np.round(est[:5], 4), "truth:", np.round(truth.values_hz[:5], 4))
