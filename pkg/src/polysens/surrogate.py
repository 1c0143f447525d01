"""Least-squares fitting and evaluation of the piecewise expansion.

Because every basis function vanishes outside its subdomain, the global
regression decouples into one dense block per subdomain.  Each block is
factored once (SVD pseudoinverse) and applied to all output cells.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .multires import (Decomposition, DegreeIndexSet, PiecewiseBasis,
                       build_piecewise_basis, decompose, degree_set,
                       linear_index, locate_batch)
from .qmc import DesignMatrix

DEFAULT_RCOND = 1e-10

THREADS_ENV = "POLYSENS_THREADS"


class FitError(RuntimeError):
    """Training data insufficient or inconsistent for the requested fit."""


class DataError(ValueError):
    """Ingested arrays are malformed (shape mismatch, non-finite rows)."""


@dataclass(frozen=True)
class TrainingSet:
    """Design rows paired with field snapshots, one output row per run."""

    design: DesignMatrix
    outputs: np.ndarray  # (n, P)
    grid: tuple | None = None  # (rows, cols) cell geometry, optional

    def __post_init__(self):
        Y = np.asarray(self.outputs, dtype=float)
        if Y.ndim == 1:
            Y = Y[:, None]
        object.__setattr__(self, "outputs", Y)
        if Y.shape[0] != self.design.n:
            raise DataError(
                f"design has {self.design.n} rows, outputs have {Y.shape[0]}")
        bad = np.where(~np.isfinite(Y).all(axis=1))[0]
        if bad.size:
            raise DataError(f"non-finite outputs in rows {bad.tolist()[:20]}")
        bad = np.where(~np.isfinite(self.design.values).all(axis=1))[0]
        if bad.size:
            raise DataError(f"non-finite design entries in rows {bad.tolist()[:20]}")
        if self.grid is not None and np.prod(self.grid) != Y.shape[1]:
            raise DataError(f"grid {self.grid} does not match {Y.shape[1]} cells")

    @property
    def n(self):
        return self.outputs.shape[0]

    @property
    def P(self):
        return self.outputs.shape[1]


@dataclass(frozen=True)
class SurrogateModel:
    """Expansion coefficients per output cell over (subdomain, degree) pairs.

    ``coeffs`` has shape (P, n_subdomains, n_degrees); subdomains are
    ordered by their linear index, degrees in graded-lex order.  This
    layout is part of the model file format.
    """

    basis: PiecewiseBasis
    degrees: DegreeIndexSet
    coeffs: np.ndarray
    diagnostics: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def M(self):
        return self.basis.M

    @property
    def level(self):
        return self.basis.level

    @property
    def order(self):
        return self.degrees.order

    @property
    def q(self):
        return self.degrees.q

    @property
    def P(self):
        return self.coeffs.shape[0]

    @property
    def n_subdomains(self):
        return self.coeffs.shape[1]


def _dim_values(basis: PiecewiseBasis, X, bins):
    """Per-dimension normalized basis values for each row's own bin.

    Returns a list of M arrays of shape (n, order+1).
    """
    n = X.shape[0]
    vals = []
    for j in range(basis.M):
        Vj = np.empty((n, basis.order + 1))
        for l in range(basis.decomposition.n_bins):
            rows = np.where(bins[:, j] == l)[0]
            if rows.size:
                Vj[rows] = basis.eval_dim(j, l, X[rows, j])
        vals.append(Vj)
    return vals


def _block_matrix(dim_vals, rows, alpha):
    """Rows of the design-matrix block: products over dimensions."""
    A = dim_vals[0][rows][:, alpha[:, 0]].copy()
    for j in range(1, len(dim_vals)):
        A *= dim_vals[j][rows][:, alpha[:, j]]
    return A


def assemble_design(basis: PiecewiseBasis, degrees: DegreeIndexSet,
                    design: DesignMatrix):
    """Per-subdomain design-matrix blocks for a training design.

    Returns a list, indexed by subdomain linear index, of (row_indices,
    block) pairs where block has shape (n_rows, len(degrees)).  Raises
    if any subdomain receives no training rows.
    """
    X = design.values
    dec = basis.decomposition
    bins, _ = locate_batch(dec, X)
    codes = np.zeros(X.shape[0], dtype=np.int64)
    for j in range(dec.M):
        codes |= bins[:, j] << (dec.level * j)
    dim_vals = _dim_values(basis, X, bins)
    alpha = degrees.indices
    blocks = []
    for sd in range(dec.n_subdomains):
        rows = np.where(codes == sd)[0]
        if rows.size == 0:
            raise FitError(f"subdomain {sd} received no training rows")
        blocks.append((rows, _block_matrix(dim_vals, rows, alpha)))
    return blocks


def fit(train: TrainingSet, level, order, q=1.0,
        rcond=DEFAULT_RCOND) -> SurrogateModel:
    """Fit expansion coefficients by per-subdomain pseudoinverse.

    Underdetermined subdomains (fewer rows than coefficients) get the
    minimum-norm solution and are flagged in the diagnostics rather than
    rejected.  Deterministic for fixed inputs.
    """
    dec = decompose(train.design, level)
    basis = build_piecewise_basis(train.design, dec, order)
    degrees = degree_set(train.design.M, order, q)
    blocks = assemble_design(basis, degrees, train.design)

    n_sd = dec.n_subdomains
    n_alpha = len(degrees)
    P = train.P
    n = train.n
    coeffs = np.zeros((P, n_sd, n_alpha))
    sd_rows = np.zeros(n_sd, dtype=np.int64)
    sd_rank = np.zeros(n_sd, dtype=np.int64)
    sd_cond = np.zeros(n_sd)
    sd_gram = np.zeros(n_sd)

    def solve(sd):
        rows, A = blocks[sd]
        Y = train.outputs[rows]
        U, s, Vt = np.linalg.svd(A, full_matrices=False)
        keep = s > rcond * s[0] if s.size else np.zeros(0, dtype=bool)
        r = int(np.count_nonzero(keep))
        if r == 0:
            raise FitError(f"subdomain {sd} produced a zero design block")
        c = Vt[:r].T @ ((U[:, :r].T @ Y) / s[:r, None])
        G = (A.T @ A) / n
        return sd, rows.size, r, float(s[0] / s[r - 1]), \
            float(np.max(np.abs(G - np.eye(n_alpha)))), c

    workers = max(1, int(os.environ.get(THREADS_ENV, "1")))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(solve, range(n_sd)))
    else:
        results = [solve(sd) for sd in range(n_sd)]
    underdetermined = []
    for sd, nrows, rank, cond, gram, c in results:
        sd_rows[sd] = nrows
        sd_rank[sd] = rank
        sd_cond[sd] = cond
        sd_gram[sd] = gram
        coeffs[:, sd, :] = c.T
        if nrows < n_alpha:
            underdetermined.append(sd)

    diagnostics = {
        "sd_rows": sd_rows,
        "sd_rank": sd_rank,
        "sd_cond": sd_cond,
        "sd_gram_dev": sd_gram,
        "gram_dev_max": float(sd_gram.max()),
        "basis_gram_tol": basis.gram_tol,
        "underdetermined": underdetermined,
        "warnings": list(dec.warnings),
    }
    if underdetermined:
        diagnostics["warnings"].append(
            f"{len(underdetermined)} subdomains underdetermined "
            f"(min rows {int(sd_rows.min())} < {n_alpha} coefficients); "
            "minimum-norm solution used")
    meta = {
        "level": int(level),
        "order": int(order),
        "q": float(q),
        "rcond": float(rcond),
        "n_train": int(n),
        "names": list(train.design.names),
        "provenance": train.design.provenance,
        "design_meta": dict(train.design.meta),
        "grid": list(train.grid) if train.grid else None,
    }
    return SurrogateModel(basis=basis, degrees=degrees, coeffs=coeffs,
                          diagnostics=diagnostics, meta=meta)


def predict(model: SurrogateModel, x):
    """Surrogate field at one parameter point: vector of P cell values."""
    return predict_batch(model, np.asarray(x, dtype=float)[None, :])[0]


def predict_batch(model: SurrogateModel, X, return_clamped=False):
    """Surrogate fields at many points, shape (k, P); row order preserved.

    Points outside the training hull are clamped to the nearest
    subdomain; pass return_clamped=True to also get that count.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.M:
        raise DataError(f"points have {X.shape[1]} columns, model has {model.M}")
    dec = model.basis.decomposition
    bins, clamped = locate_batch(dec, X)
    codes = np.zeros(X.shape[0], dtype=np.int64)
    for j in range(dec.M):
        codes |= bins[:, j] << (dec.level * j)
    dim_vals = _dim_values(model.basis, X, bins)
    out = np.empty((X.shape[0], model.P))
    for sd in np.unique(codes):
        rows = np.where(codes == sd)[0]
        A = _block_matrix(dim_vals, rows, model.degrees.indices)
        out[rows] = A @ model.coeffs[:, sd, :].T
    if return_clamped:
        return out, int(np.count_nonzero(clamped))
    return out
