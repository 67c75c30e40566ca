"""Distributions on a finite state space and the uniform lattice on the simplex.

A distribution over ``d`` states is a plain float array whose entries are
nonnegative and sum to one.  The lattice of resolution ``N`` holds every
vector whose entries are multiples of ``1/N``; nearest-point projection on it
turns the continuous simplex into a finite state set for tabular learning.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import comb, sqrt

import numpy as np

from .errors import (
    DimensionMismatch,
    NegativeMass,
    NormalizationTooLarge,
    SizeOverflow,
    ZeroTotalMass,
)

MASS_TOL = 1e-9
STRICT_RTOL = 1e-6
DEFAULT_GRID_CAP = 10**7
DEFAULT_PROFILE_CAP = 10**6
# squared-distance slack under which two grid points count as equidistant
TIE_TOL = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


def new_distribution(weights, *, strict: bool = True, cell_width: float | None = None) -> np.ndarray:
    """Validate and normalize a vector of masses.

    With ``cell_width`` set the vector is read as a density histogram whose
    total mass is ``sum(weights) * cell_width``.  In strict mode, inputs that
    need a relative correction larger than 1e-6 are rejected instead of being
    silently rescaled.
    """
    w = np.array(weights, dtype=float).ravel()
    if w.size == 0:
        raise ZeroTotalMass("empty weight vector")
    if not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite")
    if np.any(w < 0.0):
        raise NegativeMass(f"negative component {w.min():.3g}")
    total = float(w.sum()) * (1.0 if cell_width is None else float(cell_width))
    if total <= 0.0:
        raise ZeroTotalMass("weights sum to zero")
    if strict and abs(total - 1.0) > STRICT_RTOL:
        raise NormalizationTooLarge(f"total mass {total!r} is not 1 (pass strict=False to rescale)")
    if total != 1.0:
        w = w / total
    return _frozen(w)


def distance(mu1, mu2) -> float:
    """Euclidean distance between two distribution vectors."""
    a = np.asarray(mu1, dtype=float)
    b = np.asarray(mu2, dtype=float)
    if a.shape != b.shape:
        raise DimensionMismatch(f"{a.shape} vs {b.shape}")
    return float(np.sqrt(np.sum((a - b) ** 2)))


def grid_size(dimension: int, resolution: int) -> int:
    """Number of weak compositions of ``resolution`` into ``dimension`` parts."""
    return comb(resolution + dimension - 1, dimension - 1)


@dataclass(frozen=True, eq=False)
class SimplexGrid:
    """Uniform lattice ``{k / N : k in Z^d, k >= 0, sum(k) = N}``, sorted lexicographically."""

    dimension: int
    resolution: int
    counts: np.ndarray = field(repr=False)
    points: np.ndarray = field(repr=False)
    _lookup: dict = field(repr=False)

    def __len__(self) -> int:
        return self.counts.shape[0]

    def __getitem__(self, i) -> np.ndarray:
        return self.points[i]

    @property
    def epsilon(self) -> float:
        """Covering radius guarantee ``sqrt(d) / (2N)``."""
        return sqrt(self.dimension) / (2 * self.resolution)

    def index_of(self, point) -> int:
        """Index of an exact lattice point (raises ``KeyError`` otherwise)."""
        k = np.rint(np.asarray(point, dtype=float) * self.resolution).astype(int)
        return self._lookup[tuple(k.tolist())]

    def project(self, mu) -> int:
        mu = np.asarray(mu, dtype=float)
        if mu.shape != (self.dimension,):
            raise DimensionMismatch(f"expected a {self.dimension}-vector, got shape {mu.shape}")
        d2 = np.sum((self.points - mu) ** 2, axis=1)
        return int(np.flatnonzero(d2 <= d2.min() + TIE_TOL)[0])

    def project_many(self, mus, chunk: int = 4096) -> np.ndarray:
        """Vectorized ``project`` over the rows of ``mus``."""
        mus = np.atleast_2d(np.asarray(mus, dtype=float))
        if mus.shape[1] != self.dimension:
            raise DimensionMismatch(f"expected rows of length {self.dimension}, got {mus.shape[1]}")
        out = np.empty(mus.shape[0], dtype=np.int64)
        for start in range(0, mus.shape[0], chunk):
            block = mus[start : start + chunk]
            d2 = np.sum((block[:, None, :] - self.points[None, :, :]) ** 2, axis=2)
            near = d2 <= d2.min(axis=1, keepdims=True) + TIE_TOL
            out[start : start + chunk] = np.argmax(near, axis=1)
        return out


def enumerate_grid(dimension: int, resolution: int, *, cap: int = DEFAULT_GRID_CAP) -> SimplexGrid:
    """Build the resolution-``N`` lattice on the ``dimension``-simplex."""
    if dimension < 1 or resolution < 1:
        raise ValueError("dimension and resolution must be positive")
    n = grid_size(dimension, resolution)
    if n > cap:
        raise SizeOverflow(f"{n} grid points exceeds cap {cap}")
    if dimension == 1:
        counts = np.array([[resolution]], dtype=np.int64)
    else:
        # stars and bars: bar positions among N + d - 1 slots
        bars = np.array(list(itertools.combinations(range(resolution + dimension - 1), dimension - 1)), dtype=np.int64)
        edges = np.hstack([np.full((n, 1), -1), bars, np.full((n, 1), resolution + dimension - 1)])
        counts = np.diff(edges, axis=1) - 1
        order = np.lexsort(counts.T[::-1])
        counts = counts[order]
    lookup = {tuple(r): i for i, r in enumerate(counts.tolist())}
    return SimplexGrid(dimension, resolution, _frozen(counts), _frozen(counts / resolution), lookup)


def enumerate_action_profiles(num_states: int, num_actions: int, *, cap: int = DEFAULT_PROFILE_CAP) -> np.ndarray:
    """All maps ``state -> action`` as rows, in base-``num_actions`` counting order.

    State 0 is the most significant digit, so ``(2, 2)`` gives
    ``[[0, 0], [0, 1], [1, 0], [1, 1]]``.
    """
    if num_states < 1 or num_actions < 1:
        raise ValueError("num_states and num_actions must be positive")
    n = num_actions**num_states
    if n > cap:
        raise SizeOverflow(f"{n} action profiles exceeds cap {cap}")
    profiles = np.array(list(itertools.product(range(num_actions), repeat=num_states)), dtype=np.int64)
    return _frozen(profiles.reshape(n, num_states))
