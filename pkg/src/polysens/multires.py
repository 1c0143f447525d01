"""Dyadic decomposition of the input space and the piecewise basis.

Each input dimension is split into 2**level equal-mass bins at empirical
quantiles of the training design.  Per (dimension, bin) an orthonormal
basis is built from the bin's samples; rescaling by 2**(level/2) per
dimension makes the resulting piecewise multivariate polynomials
orthonormal on the whole domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations_with_replacement

import numpy as np

from .polybasis import (BasisConstructionError, OrthonormalBasis1D,
                        build_basis, eval_basis, raw_moments)
from .qmc import DesignMatrix


class DecompositionError(ValueError):
    """Training data cannot support the requested refinement level."""


@dataclass(frozen=True)
class Decomposition:
    """Per-dimension equal-mass bin edges for the training design.

    ``breakpoints`` has shape (M, 2**level + 1); bins are left-closed,
    right-open, except the last bin which is closed.  A sample equal to
    an interior breakpoint belongs to the upper bin.
    """

    level: int
    breakpoints: np.ndarray
    warnings: tuple = ()

    @property
    def M(self):
        return self.breakpoints.shape[0]

    @property
    def n_bins(self):
        return 1 << self.level

    @property
    def n_subdomains(self):
        return 1 << (self.level * self.M)


def decompose(design: DesignMatrix, level) -> Decomposition:
    """Split every dimension at empirical quantiles k * 2**-level.

    Interior breakpoints sit midway between the order statistics
    bracketing each equal-mass cut, so bin counts differ by at most one
    unless ties force an imbalance (recorded as a warning).
    """
    if level < 0:
        raise DecompositionError("refinement level must be nonnegative")
    X = design.values
    n, M = X.shape
    nbins = 1 << level
    if n < nbins:
        raise DecompositionError(f"{n} samples cannot fill {nbins} bins")
    breakpoints = np.empty((M, nbins + 1))
    warnings = []
    for j in range(M):
        col = np.sort(X[:, j])
        if len(np.unique(col)) < nbins:
            raise DecompositionError(
                f"dimension {design.names[j]!r} has fewer than {nbins} distinct values")
        breakpoints[j, 0] = col[0]
        breakpoints[j, nbins] = col[-1]
        for k in range(1, nbins):
            cut = (n * k) // nbins
            breakpoints[j, k] = 0.5 * (col[cut - 1] + col[cut])
        counts = np.bincount(
            _bin_of(breakpoints[j], X[:, j]), minlength=nbins)
        if counts.max() - counts.min() > 1:
            warnings.append(
                f"ties in dimension {design.names[j]!r} force uneven bins "
                f"(sizes {counts.min()}..{counts.max()})")
    return Decomposition(level=int(level), breakpoints=breakpoints,
                         warnings=tuple(warnings))


def _bin_of(edges, x):
    """Bin indices under the half-open convention; clamps outside values."""
    return np.searchsorted(edges[1:-1], x, side="right")


def locate(dec: Decomposition, x):
    """Subdomain multi-index of a point, one bin id per dimension."""
    x = np.asarray(x, dtype=float)
    return tuple(int(_bin_of(dec.breakpoints[j], x[j])) for j in range(dec.M))


def locate_batch(dec: Decomposition, X):
    """Vectorized locate: (n, M) bin ids plus a was-clamped row mask."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n, M = X.shape
    idx = np.empty((n, M), dtype=np.int64)
    clamped = np.zeros(n, dtype=bool)
    for j in range(M):
        idx[:, j] = _bin_of(dec.breakpoints[j], X[:, j])
        clamped |= (X[:, j] < dec.breakpoints[j, 0]) | (X[:, j] > dec.breakpoints[j, -1])
    return idx, clamped


def linear_index(l, level):
    """Bijective linearization: dimension 1 is the least-significant digit."""
    return sum(int(lj) << (level * j) for j, lj in enumerate(l))


def subdomain_indices(M, level):
    """All subdomain multi-indices, ordered by their linear index: (2**(M*level), M)."""
    nbins = 1 << level
    count = nbins ** M
    out = np.empty((count, M), dtype=np.int64)
    codes = np.arange(count)
    for j in range(M):
        out[:, j] = (codes >> (level * j)) & (nbins - 1)
    return out


@dataclass(frozen=True)
class DegreeIndexSet:
    """Degree multi-indices with q-norm at most ``order``, graded-lex sorted."""

    M: int
    order: int
    q: float
    indices: np.ndarray  # (count, M) int

    def __len__(self):
        return self.indices.shape[0]

    def position(self, alpha):
        """Row of a multi-index in the set, or raise if absent."""
        alpha = tuple(int(a) for a in alpha)
        for i, row in enumerate(self.indices):
            if tuple(row) == alpha:
                return i
        raise KeyError(f"degree index {alpha} not in truncation set")


def degree_set(M, order, q=1.0) -> DegreeIndexSet:
    """Enumerate {alpha : ||alpha||_q <= order} in graded lexicographic order.

    q = 1 is classical total-degree truncation; q < 1 prunes interaction
    terms. Comparison uses sum(alpha_i^q) <= order^q with a relative
    1e-12 slack so that boundary members are kept under rounding.
    """
    if not 0.0 < q <= 1.0:
        raise ValueError("q must lie in (0, 1]")
    if order < 0 or M < 1:
        raise ValueError("need order >= 0 and M >= 1")
    rows = []
    for total in range(order + 1):
        layer = []
        for slots in combinations_with_replacement(range(M), total):
            alpha = [0] * M
            for s in slots:
                alpha[s] += 1
            layer.append(tuple(alpha))
        for alpha in sorted(set(layer)):
            if q == 1.0:
                rows.append(alpha)
            elif sum(a ** q for a in alpha) <= (order ** q) * (1.0 + 1e-12):
                rows.append(alpha)
    return DegreeIndexSet(M=M, order=order, q=float(q),
                          indices=np.array(rows, dtype=np.int64).reshape(len(rows), M))


def coeff_count(M, level, order):
    """Full-tensor coefficient count 2**(M*level) * C(order+M, M)."""
    return (1 << (M * level)) * math.comb(order + M, M)


@dataclass(frozen=True)
class PiecewiseBasis:
    """Per-(dimension, bin) orthonormal bases over a decomposition.

    ``bases[j][l]`` is the basis of dimension j restricted to bin l.
    Multiplying each univariate value by 2**(level/2) yields the family
    that is orthonormal on the whole domain.
    """

    decomposition: Decomposition
    order: int
    bases: tuple  # M-tuple of (2**level)-tuples of OrthonormalBasis1D
    gram_tol: float = field(default=0.0)

    @property
    def M(self):
        return self.decomposition.M

    @property
    def level(self):
        return self.decomposition.level

    @property
    def dim_scale(self):
        return 2.0 ** (self.level / 2.0)

    def eval_dim(self, j, bin_id, x):
        """Globally-normalized values of dimension j's bin basis: (..., order+1)."""
        return self.dim_scale * eval_basis(self.bases[j][bin_id], x)


def build_piecewise_basis(design: DesignMatrix, dec: Decomposition,
                          order) -> PiecewiseBasis:
    """Construct every (dimension, bin) basis from the bin's samples."""
    X = design.values
    nbins = dec.n_bins
    all_bases = []
    worst = 0.0
    for j in range(dec.M):
        bins = _bin_of(dec.breakpoints[j], X[:, j])
        per_bin = []
        for l in range(nbins):
            samples = X[bins == l, j]
            try:
                moments = raw_moments(samples, K=2 * order)
                basis = build_basis(moments, order)
            except (ValueError, BasisConstructionError) as exc:
                raise BasisConstructionError(
                    f"basis construction failed for dimension "
                    f"{design.names[j]!r}, bin {l}: {exc}") from exc
            worst = max(worst, basis.gram_tol)
            per_bin.append(basis)
        all_bases.append(tuple(per_bin))
    return PiecewiseBasis(decomposition=dec, order=int(order),
                          bases=tuple(all_bases), gram_tol=worst)
