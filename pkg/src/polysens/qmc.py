"""Sobol' low-discrepancy sequences and training-design construction.

The generator implements the classic binary Gray-code scheme over the
Joe-Kuo direction numbers shipped in ``data/joe_kuo_d32.txt``.  Points
are fixed-point dyadics with 30 fractional bits, so two correct
implementations of the same table agree bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .distributions import ParameterSpace

_BITS = 30
_MC_GENERATOR = "philox4x64"  # numpy Philox, counter-based, bit-exact across platforms


class UnsupportedDimensionError(ValueError):
    """Requested more dimensions than the direction-number table provides."""


def _load_table():
    """Parse the Joe-Kuo text table into (s, a, m) per dimension >= 2."""
    text = resources.files("polysens.data").joinpath("joe_kuo_d32.txt").read_text()
    rows = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#") or line.startswith("d "):
            continue
        parts = [int(tok) for tok in line.split()]
        d, s, a, m = parts[0], parts[1], parts[2], parts[3:]
        assert len(m) == s, f"malformed direction-number row for d={d}"
        rows.append((s, a, m))
    return rows


_TABLE = None


def max_dimension():
    global _TABLE
    if _TABLE is None:
        _TABLE = _load_table()
    return len(_TABLE) + 1


def _direction_integers(d):
    """Direction integers V with shape (bits, d), scaled to 2**_BITS."""
    global _TABLE
    if _TABLE is None:
        _TABLE = _load_table()
    if d < 1:
        raise UnsupportedDimensionError("dimension must be >= 1")
    if d > len(_TABLE) + 1:
        raise UnsupportedDimensionError(
            f"dimension {d} exceeds direction-number table ({len(_TABLE) + 1} dims)")
    V = np.zeros((_BITS, d), dtype=np.uint64)
    # dimension 1: van der Corput in base 2, m_k = 1 for all k
    for k in range(_BITS):
        V[k, 0] = 1 << (_BITS - 1 - k)
    for j in range(1, d):
        s, a, m_init = _TABLE[j - 1]
        m = list(m_init)
        for k in range(s, _BITS):
            # m_k = m_{k-s} ^ (2^s m_{k-s}) ^ sum_i 2^i a_i m_{k-i}
            new = m[k - s] ^ (m[k - s] << s)
            for i in range(1, s):
                if (a >> (s - 1 - i)) & 1:
                    new ^= m[k - i] << i
            m.append(new)
        for k in range(_BITS):
            V[k, j] = m[k] << (_BITS - 1 - k)
    return V


class SobolGenerator:
    """Deterministic stream of canonical Sobol' points in [0, 1)^d.

    The stream starts at the all-zeros point (index 0); use ``skip`` to
    drop leading points.  Same (d, skip) always yields the same stream.
    """

    def __init__(self, d, skip=0):
        self.d = int(d)
        self._V = _direction_integers(self.d)
        self.index = 0
        self._state = np.zeros(self.d, dtype=np.uint64)
        if skip:
            self.fast_forward(skip)

    def fast_forward(self, index):
        """Jump to an absolute sequence index via the Gray-code formula."""
        index = int(index)
        gray = index ^ (index >> 1)
        state = np.zeros(self.d, dtype=np.uint64)
        for b in range(_BITS):
            if (gray >> b) & 1:
                state ^= self._V[b]
        self._state = state
        self.index = index

    def next_points(self, n):
        """Next n points of the stream, shape (n, d)."""
        n = int(n)
        out = np.empty((n, self.d), dtype=np.uint64)
        state = self._state
        idx = self.index
        for i in range(n):
            out[i] = state
            # advance: flip the direction of the lowest zero bit of idx
            low = (~idx & (idx + 1)).bit_length() - 1
            state = state ^ self._V[low]
            idx += 1
        self._state = state
        self.index = idx
        return out.astype(np.float64) / float(1 << _BITS)


def sobol_points(d, n, skip=1):
    """Rows skip .. skip+n-1 of the canonical Sobol' sequence, shape (n, d).

    The default skip drops the all-zeros point: mapped through marginal
    quantiles it would pin a training row to interval endpoints where
    truncated densities vanish.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    if skip < 0:
        raise ValueError("skip must be nonnegative")
    V = _direction_integers(d)
    idx = np.arange(skip, skip + n, dtype=np.uint64)
    gray = idx ^ (idx >> np.uint64(1))
    x = np.zeros((n, d), dtype=np.uint64)
    for b in range(_BITS):
        mask = (gray >> np.uint64(b)) & np.uint64(1)
        x ^= mask[:, None] * V[b][None, :]
    return x.astype(np.float64) / float(1 << _BITS)


def mc_points(d, n, seed):
    """Pseudo-random uniforms on [0,1)^d from seeded Philox, shape (n, d)."""
    rng = np.random.Generator(np.random.Philox(key=int(seed)))
    return rng.random((int(n), int(d)))


@dataclass(frozen=True)
class DesignMatrix:
    """Parameter samples in physical units, one row per model run."""

    values: np.ndarray  # (n, M)
    names: tuple
    provenance: str  # qmc | mc | external
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ValueError("design values must be a 2-D array")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "names", tuple(self.names))
        if len(self.names) != values.shape[1]:
            raise ValueError("one name per design column required")
        if self.provenance not in ("qmc", "mc", "external"):
            raise ValueError(f"unknown provenance {self.provenance!r}")

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def M(self):
        return self.values.shape[1]


def map_design(points, space: ParameterSpace, provenance="qmc", meta=None):
    """Push unit-cube points through the marginal quantiles of ``space``."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != space.M:
        raise ValueError(
            f"points have {points.shape[1]} columns, space has {space.M} dimensions")
    values = space.quantile(points)
    return DesignMatrix(values=values, names=tuple(space.names),
                        provenance=provenance, meta=dict(meta or {}))


def qmc_design(space, n, skip=1):
    """Sobol' training design mapped to the parameter space."""
    pts = sobol_points(space.M, n, skip=skip)
    return map_design(pts, space, provenance="qmc", meta={"skip": skip})


def mc_design(space, n, seed):
    """Pseudo-random design mapped to the parameter space."""
    pts = mc_points(space.M, n, seed)
    return map_design(pts, space, provenance="mc",
                      meta={"seed": int(seed), "generator": _MC_GENERATOR})
