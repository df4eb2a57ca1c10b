"""Harmonic selection on a hand-made correlation matrix.

Harmonics 2, 3 and 6 agree with each other; 4 and 5 agree only with each
other. The maximal clique with the larger mean correlation wins.

    python3 demos/clique_selection.py
"""

import numpy as np

from harmonic_enf.selection import build_graph, maximal_cliques, select_from_matrix

ms = (2, 3, 4, 5, 6)
R = np.eye(5)
for i, j, w in ((0, 1, 0.95), (0, 4, 0.93), (1, 4, 0.94), (2, 3, 0.90), (0, 2, 0.3)):
    R[i, j] = R[j, i] = w

g = build_graph(R, 0.8)
print("edges:", [(ms[i], ms[j]) for i, j in g.edges()])
for c in maximal_cliques(g):
    w = np.mean([R[i, j] for k, i in enumerate(c) for j in c[k + 1:]])
    print("clique", tuple(ms[v] for v in c), f"mean cc {w:.3f}")

sel = select_from_matrix(R, 0.8, vertices=ms)
print("selected:", sel.omega)
