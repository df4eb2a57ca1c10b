"""Graph-based harmonic selection.

Harmonic IF tracks that agree with each other are connected in a graph
(edge weight = clamped correlation, kept only above a threshold). The
selected subset is the maximal clique with the highest average edge weight;
if no pair agrees, the smoothest single track is kept.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache
from itertools import combinations
from typing import Mapping

import numpy as np

from .model import FrameConfig, IfSeries, SampleBuffer
from .spectral import SEARCH_BAND, as_normalized, track_if

ETA_CAP = 0.8
DEFAULT_KAPPA = 4.0
_ETA_CHUNK_ELEMS = 2_000_000


@dataclass(frozen=True)
class HarmonicGraph:
    """Thresholded correlation graph; vertex ``i`` is harmonic ``vertices[i]``."""

    vertices: tuple[int, ...]
    adjacency: np.ndarray
    eta: float

    def __post_init__(self):
        a = np.array(self.adjacency, dtype=np.float64)
        if a.shape != (len(self.vertices), len(self.vertices)):
            raise ValueError("adjacency shape does not match the vertex list")
        a.setflags(write=False)
        object.__setattr__(self, "adjacency", a)
        object.__setattr__(self, "vertices", tuple(int(v) for v in self.vertices))

    @property
    def n_edges(self) -> int:
        return int(np.count_nonzero(np.triu(self.adjacency, 1)))

    def neighbours(self, i: int) -> set[int]:
        return set(np.flatnonzero(self.adjacency[i]).tolist())

    def edges(self):
        i, j = np.nonzero(np.triu(self.adjacency, 1))
        return [(int(a), int(b)) for a, b in zip(i, j)]


@dataclass(frozen=True)
class CliqueSelection:
    """Selected harmonic subset.

    ``average_weight`` is ``None`` when the smoothest-component fallback was
    used. ``all_maximal_cliques`` holds vertex-index tuples.
    """

    omega: tuple[int, ...]
    average_weight: float | None
    all_maximal_cliques: list = field(default_factory=list)
    graph: HarmonicGraph | None = None
    tracks: Mapping[int, IfSeries] | None = None

    @property
    def fallback(self) -> bool:
        return self.average_weight is None


def clamped_pearson(a, b) -> float:
    """Pearson correlation clamped to ``[0, 1]``; 0 if either input is constant."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("series lengths differ")
    da = a - a.mean()
    db = b - b.mean()
    den = np.sqrt(np.dot(da, da) * np.dot(db, db))
    if den == 0:
        return 0.0
    return float(min(1.0, max(0.0, np.dot(da, db) / den)))


def _values(series) -> np.ndarray:
    if isinstance(series, IfSeries):
        return as_normalized(series).values_hz
    return np.asarray(series, dtype=np.float64)


def corr_matrix(series_by_harmonic: Mapping[int, IfSeries]) -> tuple[tuple[int, ...], np.ndarray]:
    """Clamped-correlation matrix over harmonics sorted ascending.

    Returns ``(harmonics, R)``; the diagonal is 1.
    """
    ms = tuple(sorted(series_by_harmonic))
    vals = [_values(series_by_harmonic[m]) for m in ms]
    lens = {v.size for v in vals}
    if len(lens) > 1:
        raise ValueError(f"series lengths differ: {sorted(lens)}")
    if vals and vals[0].size < 2:
        raise ValueError("need at least two frames to correlate")
    R = np.eye(len(ms))
    for i, j in combinations(range(len(ms)), 2):
        R[i, j] = R[j, i] = clamped_pearson(vals[i], vals[j])
    return ms, R


@lru_cache(maxsize=64)
def _max_noise_corr(n_enf: int, n_rep: int, seed: int) -> float:
    rng = np.random.default_rng(seed)
    rows = max(1, _ETA_CHUNK_ELEMS // n_enf)
    best = -1.0
    for start in range(0, n_rep, rows):
        k = min(rows, n_rep - start)
        a = rng.standard_normal((k, n_enf))
        b = rng.standard_normal((k, n_enf))
        a -= a.mean(axis=1, keepdims=True)
        b -= b.mean(axis=1, keepdims=True)
        cc = np.einsum("ij,ij->i", a, b) / np.sqrt(np.einsum("ij,ij->i", a, a) * np.einsum("ij,ij->i", b, b))
        best = max(best, float(cc.max()))
    return best


def threshold_eta(n_enf: int, kappa: float = DEFAULT_KAPPA, n_rep: int = 10_000, seed: int = 0) -> float:
    """``min(kappa * eta_R, 0.8)``.

    ``eta_R`` is the largest correlation among ``n_rep`` pairs of
    independent white Gaussian sequences of length ``n_enf``.
    """
    if int(n_enf) != n_enf or n_enf < 2:
        raise ValueError("n_enf must be an integer >= 2")
    if not kappa > 1:
        raise ValueError("kappa must exceed 1")
    if int(n_rep) != n_rep or n_rep < 1:
        raise ValueError("n_rep must be a positive integer")
    return min(kappa * _max_noise_corr(int(n_enf), int(n_rep), int(seed)), ETA_CAP)


def build_graph(R, eta: float, vertices=None) -> HarmonicGraph:
    """Drop the diagonal and every entry below ``eta``."""
    R = np.asarray(R, dtype=np.float64)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise ValueError("R must be square")
    if not np.allclose(R, R.T):
        raise ValueError("R must be symmetric")
    adj = np.where(R >= eta, R, 0.0)
    np.fill_diagonal(adj, 0.0)
    if vertices is None:
        vertices = tuple(range(1, R.shape[0] + 1))
    return HarmonicGraph(tuple(vertices), adj, float(eta))


def _canonical(cliques) -> list[tuple[int, ...]]:
    return sorted((tuple(sorted(c)) for c in cliques), key=lambda c: (-len(c), c))


def maximal_cliques(g: HarmonicGraph) -> list[tuple[int, ...]]:
    """All maximal cliques with at least two vertices (vertex indices).

    Bron-Kerbosch with Tomita pivoting; sorted by size (descending) then
    lexicographically.
    """
    nbrs = [g.neighbours(i) for i in range(len(g.vertices))]
    found = []

    def expand(r, p, x):
        if not p and not x:
            if len(r) >= 2:
                found.append(r)
            return
        pivot = max(p | x, key=lambda u: len(p & nbrs[u]))
        for v in sorted(p - nbrs[pivot]):
            expand(r + [v], p & nbrs[v], x & nbrs[v])
            p = p - {v}
            x = x | {v}

    expand([], set(range(len(g.vertices))), set())
    return _canonical(found)


def average_weight(clique, adjacency) -> float:
    c = list(clique)
    if len(c) < 2:
        raise ValueError("average weight needs at least two vertices")
    w = sum(adjacency[i, j] for i, j in combinations(c, 2))
    return float(w / (len(c) * (len(c) - 1) / 2))


def _rank_key(clique, adjacency):
    # higher is better: weight, then size, then lexicographically smallest
    return (average_weight(clique, adjacency), len(clique), tuple(-v for v in clique))


def select_mwc(cliques, g: HarmonicGraph) -> CliqueSelection:
    """Clique with the greatest average edge weight.

    Ties go to the larger clique, then to the lexicographically smaller one.
    """
    if not cliques:
        raise ValueError("no cliques to choose from")
    cl = _canonical(cliques)
    best = max(cl, key=lambda c: _rank_key(c, g.adjacency))
    omega = tuple(sorted(g.vertices[i] for i in best))
    return CliqueSelection(omega, average_weight(best, g.adjacency), cl, g)


def total_variation(values) -> float:
    v = _values(values)
    return float(np.sum(np.abs(np.diff(v))))


def smoothest_component(series_by_harmonic: Mapping[int, IfSeries]) -> tuple[int, ...]:
    """Harmonic with the smallest total variation; ties go to the smallest m."""
    if not series_by_harmonic:
        raise ValueError("no series given")
    ms = sorted(series_by_harmonic)
    return (min(ms, key=lambda m: (total_variation(series_by_harmonic[m]), m)),)


def select_from_matrix(R, eta: float, vertices=None, total_variation=None) -> CliqueSelection:
    """Threshold ``R`` and pick the best maximal clique.

    When no edge survives, the vertex with the smallest entry of
    ``total_variation`` is kept (first vertex if none is given).
    """
    g = build_graph(R, eta, vertices)
    if g.n_edges == 0:
        tv = np.zeros(len(g.vertices)) if total_variation is None else np.asarray(total_variation, float)
        order = sorted(range(len(g.vertices)), key=lambda i: (tv[i], g.vertices[i]))
        return CliqueSelection((g.vertices[order[0]],), None, [], g)
    return select_mwc(maximal_cliques(g), g)


def select_from_tracks(tracks: Mapping[int, IfSeries], eta: float) -> CliqueSelection:
    """Correlate, threshold and pick a clique (or fall back) from IF tracks."""
    ms, R = corr_matrix(tracks)
    tv = [total_variation(tracks[m]) for m in ms]
    sel = select_from_matrix(R, eta, ms, tv)
    return replace(sel, tracks=dict(tracks))


def harmonic_tracks(signal, harmonics, cfg: FrameConfig,
                    search_band: tuple[float, float] = SEARCH_BAND) -> dict[int, IfSeries]:
    """Normalized IF track of every harmonic.

    ``signal`` is a ``SampleBuffer`` (one mixture for all harmonics) or an
    enhanced signal, whose per-harmonic components are tracked separately.
    """
    out = {}
    for m in sorted({int(m) for m in harmonics}):
        if isinstance(signal, SampleBuffer):
            buf = signal
        else:
            buf = signal.component(m)
        out[m] = as_normalized(track_if(buf, m, cfg, search_band))
    return out


def ghsa(signal, eta: float, harmonics, cfg: FrameConfig,
         search_band: tuple[float, float] = SEARCH_BAND) -> CliqueSelection:
    """Select the harmonic subset whose IF tracks agree best."""
    return select_from_tracks(harmonic_tracks(signal, harmonics, cfg, search_band), eta)
