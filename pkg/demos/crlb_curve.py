"""Single-frame NMSE of single-tone, MLE and WMLE against the CRLB.

One 8 s frame per trial, constant fundamental drawn near 50 Hz, white
noise. Roughly a minute with the default 100 trials.

    python3 demos/crlb_curve.py [trials]
"""

import sys

from harmonic_enf import crlb_experiment

trials = int(sys.argv[1]) if len(sys.argv) > 1 else 100
snrs = (-40, -30, -20, -10, 0, 10)
r = crlb_experiment(snrs_db=snrs, trials=trials, n_f=6400)

print(f"{'snr':>5s} " + " ".join(f"{k:>10s}" for k in ("single", "mle", "wmle", "crlb")))
for s in map(float, snrs):
    print(f"{s:5.0f} " + " ".join(f"{r[k][s]:10.2e}" for k in ("single", "mle", "wmle", "crlb")))
