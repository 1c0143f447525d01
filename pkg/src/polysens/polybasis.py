"""Orthonormal 1-D polynomial bases built from raw moments.

The construction is data-driven: given raw moments of a weighted sample
set, a Stieltjes-type recurrence with full reorthogonalization (inner
products evaluated exactly from the moments) produces the three-term
coefficients of the orthonormal family.  Samples are affinely mapped to
[-1, 1] internally to keep the moment (Hankel) matrix well conditioned;
the map is undone at evaluation time, which leaves the basis unchanged
because orthonormal families are affine-equivariant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

PD_TOL = 1e-12  # relative eigenvalue floor for the Hankel positive-definiteness check


class DegenerateMomentsError(ValueError):
    """Sample set cannot support the requested number of moments."""


class BasisConstructionError(ArithmeticError):
    """Moment matrix is not numerically positive definite."""


@dataclass(frozen=True)
class MomentSet:
    """Raw moments m_0..m_K of a weighted sample set, m_0 = 1.

    ``moments`` refers to the original variable.  ``scaled_moments`` are
    the moments of y = (x - shift)/scale, the internally rescaled
    variable actually used for basis construction.
    """

    moments: np.ndarray
    scaled_moments: np.ndarray
    shift: float
    scale: float
    count: int

    def __post_init__(self):
        object.__setattr__(self, "moments", np.asarray(self.moments, dtype=float))
        object.__setattr__(self, "scaled_moments",
                           np.asarray(self.scaled_moments, dtype=float))
        if abs(self.moments[0] - 1.0) > 1e-12:
            raise DegenerateMomentsError("m_0 must equal 1 after normalization")

    @property
    def K(self):
        return len(self.moments) - 1

    @classmethod
    def from_values(cls, moments, count=0):
        """Wrap externally known (e.g. analytic) moments; no rescaling."""
        m = np.asarray(moments, dtype=float)
        return cls(moments=m, scaled_moments=m.copy(), shift=0.0, scale=1.0,
                   count=count)


def raw_moments(samples, K, weights=None):
    """Weighted raw moments m_k = sum w_i x_i^k / sum w_i for k = 0..K."""
    x = np.asarray(samples, dtype=float).ravel()
    if weights is None:
        w = np.ones_like(x)
    else:
        w = np.asarray(weights, dtype=float).ravel()
        if w.shape != x.shape:
            raise ValueError("weights must match samples")
        if np.any(w < 0) or not np.any(w > 0):
            raise ValueError("weights must be nonnegative and not all zero")
    distinct = np.unique(x[w > 0] if weights is not None else x)
    # K/2+1 distinct support points keep the order-K/2 Hankel matrix
    # positive definite downstream; constants only carry K = 0
    needed = max(2, K // 2 + 1) if K >= 1 else 1
    if len(distinct) < needed:
        raise DegenerateMomentsError(
            f"need at least {needed} distinct samples for K={K}, got {len(distinct)}")
    lo, hi = distinct[0], distinct[-1]
    shift = 0.5 * (hi + lo)
    scale = 0.5 * (hi - lo) if hi > lo else 1.0  # K=0 tolerates constant samples
    y = (x - shift) / scale

    wsum = math.fsum(w)
    moments = np.empty(K + 1)
    scaled = np.empty(K + 1)
    xp = np.ones_like(x)
    yp = np.ones_like(y)
    for k in range(K + 1):
        if k:
            xp = xp * x
            yp = yp * y
        moments[k] = math.fsum(w * xp) / wsum
        scaled[k] = math.fsum(w * yp) / wsum
    moments[0] = scaled[0] = 1.0
    return MomentSet(moments=moments, scaled_moments=scaled,
                     shift=shift, scale=scale, count=len(x))


@dataclass(frozen=True)
class OrthonormalBasis1D:
    """Degrees 0..order, orthonormal under the measure behind the moments.

    Stored as three-term recurrence coefficients in the rescaled
    variable y = (x - shift)/scale:

        phi_0 = 1
        b_{k+1} phi_{k+1}(y) = (y - a_k) phi_k(y) - b_k phi_{k-1}(y)

    plus the monomial coefficient rows used for diagnostics and the
    dual-path evaluation check.
    """

    rec_a: np.ndarray  # a_0..a_{order-1}
    rec_b: np.ndarray  # b_1..b_order
    coeffs: np.ndarray  # (order+1, order+1) lower-triangular, in y
    shift: float
    scale: float
    gram_tol: float  # measured max |G - I| against the building moments
    domain: tuple = field(default=(-1.0, 1.0))

    @property
    def order(self):
        return self.coeffs.shape[0] - 1

    def __call__(self, x):
        return eval_basis(self, x)


def _pairwise_dot(u, v, m):
    """<u, v> under moments m, for monomial coefficient vectors u, v."""
    acc = 0.0
    for i, ui in enumerate(u):
        if ui == 0.0:
            continue
        acc += ui * np.dot(v, m[i:i + len(v)])
    return acc


def build_basis(moments: MomentSet, order):
    """Orthonormal basis of degrees 0..order from a moment set.

    Requires K >= 2*order and a positive-definite Hankel matrix of the
    (rescaled) moments; rejects construction otherwise, reporting the
    offending eigenvalue.
    """
    if order < 0:
        raise ValueError("order must be nonnegative")
    if moments.K < 2 * order:
        raise DegenerateMomentsError(
            f"need moments up to 2*order={2 * order}, have K={moments.K}")
    m = moments.scaled_moments
    H = np.array([[m[i + j] for j in range(order + 1)] for i in range(order + 1)])
    eig = np.linalg.eigvalsh(H)
    if eig[0] <= PD_TOL * eig[-1]:
        raise BasisConstructionError(
            f"Hankel matrix not positive definite: min eigenvalue {eig[0]:.3e} "
            f"vs max {eig[-1]:.3e}")

    n = order + 1
    coeffs = np.zeros((n, n))
    coeffs[0, 0] = 1.0
    rec_a = np.zeros(max(order, 0))
    rec_b = np.zeros(max(order, 0))
    for k in range(order):
        q = np.zeros(k + 2)
        q[1:] = coeffs[k, :k + 1]  # multiply by y
        # full reorthogonalization, two passes
        for _ in range(2):
            for j in range(k + 1):
                c = _pairwise_dot(q, coeffs[j, :j + 1], m)
                if j == k:
                    rec_a[k] += c
                q = q - c * np.pad(coeffs[j, :j + 1], (0, k + 1 - j))
        norm2 = _pairwise_dot(q, q, m)
        if not np.isfinite(norm2) or norm2 <= 0.0:
            raise BasisConstructionError(
                f"lost orthogonality at degree {k + 1}: squared norm {norm2:.3e}")
        rec_b[k] = math.sqrt(norm2)
        coeffs[k + 1, :k + 2] = q / rec_b[k]

    U = coeffs
    Hfull = np.array([[m[i + j] for j in range(n)] for i in range(n)])
    G = U @ Hfull @ U.T
    gram_tol = float(np.max(np.abs(G - np.eye(n))))
    return OrthonormalBasis1D(rec_a=rec_a, rec_b=rec_b, coeffs=coeffs,
                              shift=moments.shift, scale=moments.scale,
                              gram_tol=gram_tol)


def eval_basis(basis: OrthonormalBasis1D, x):
    """Values (phi_0(x), ..., phi_order(x)) by forward three-term recurrence.

    Accepts scalars or arrays; output has one trailing axis of length
    order+1.
    """
    y = (np.asarray(x, dtype=float) - basis.shift) / basis.scale
    scalar = y.ndim == 0
    y = np.atleast_1d(y)
    order = basis.order
    out = np.empty(y.shape + (order + 1,))
    out[..., 0] = 1.0
    if order >= 1:
        out[..., 1] = (y - basis.rec_a[0]) / basis.rec_b[0]
    for k in range(1, order):
        out[..., k + 1] = ((y - basis.rec_a[k]) * out[..., k]
                           - basis.rec_b[k - 1] * out[..., k - 1]) / basis.rec_b[k]
    return out[0] if scalar else out


def eval_basis_monomial(basis: OrthonormalBasis1D, x):
    """Direct evaluation from monomial coefficients (diagnostic dual path)."""
    y = (np.asarray(x, dtype=float) - basis.shift) / basis.scale
    powers = np.power.outer(np.atleast_1d(y), np.arange(basis.order + 1))
    vals = powers @ basis.coeffs.T
    return vals[0] if np.ndim(x) == 0 else vals
