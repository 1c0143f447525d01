"""Variance-based sensitivity indices computed from expansion coefficients.

For a single-subdomain expansion the classic identities apply: partial
variances are sums of squared coefficients grouped by the support of
the degree multi-index.  With subdomain refinement the zero-degree
coefficients also carry variance; the partial variance of a subset I is
recovered by inclusion-exclusion over conditional second moments

    T_J = sum_{l,m} sum_{supp(alpha) in J} c_{l,alpha} c_{m,alpha}
          2^(-level*(M-|J|)) [l_j = m_j for j in J]

which equals E[(E[Y | inputs in J])^2] by the global orthonormality of
the piecewise basis, so that

    var_I = sum_{J subset I} (-1)^(|I - J|) T_J,   T_empty = mean^2.

A pick-freeze Monte-Carlo estimator is included as an independent
validation oracle.

Dimensions are numbered from 1 in all subset arguments and report
labels, matching the order of the parameter space.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .distributions import ParameterSpace
from .multires import subdomain_indices
from .qmc import mc_points
from .surrogate import SurrogateModel, predict_batch

DEFAULT_VAR_FLOOR = 1e-10

FULL_ENUMERATION_MAX_M = 12


class MethodError(RuntimeError):
    """Index routine called on an incompatible model."""


class SubsetError(ValueError):
    """Malformed dimension subset."""


def _normalize_subset(subset, M, allow_empty=False):
    idx = sorted({int(i) for i in subset})
    if not idx and not allow_empty:
        raise SubsetError("subset must be nonempty")
    if idx and (idx[0] < 1 or idx[-1] > M):
        raise SubsetError(f"subset {subset} outside 1..{M}")
    if len(idx) != len(set(idx)):
        raise SubsetError("subset elements must be unique")
    return tuple(idx)


def mean_from_coeffs(model: SurrogateModel):
    """Per-cell mean: zero-degree coefficients summed over subdomains."""
    scale = 2.0 ** (-model.M * model.level / 2.0)
    return model.coeffs[:, :, 0].sum(axis=1) * scale


def variance_from_coeffs(model: SurrogateModel):
    """Per-cell variance: sum of squared coefficients minus squared mean.

    Evaluated in the algebraically identical cancellation-free form
    sum_{alpha != 0} c^2 + sum_l (c_{l,0} - mean * 2^(-M*level/2))^2, so
    a constant field yields exactly zero instead of rounding residue.
    """
    higher = np.einsum("psa,psa->p", model.coeffs[:, :, 1:],
                       model.coeffs[:, :, 1:])
    scale = 2.0 ** (-model.M * model.level / 2.0)
    spread = model.coeffs[:, :, 0] - mean_from_coeffs(model)[:, None] * scale
    return higher + np.einsum("ps,ps->p", spread, spread)


def _support_mask(alpha, inside):
    """Degree rows whose support is contained in the 0-based dims ``inside``."""
    mask = np.ones(alpha.shape[0], dtype=bool)
    outside = [j for j in range(alpha.shape[1]) if j not in inside]
    for j in outside:
        mask &= alpha[:, j] == 0
    return mask


def _conditional_second_moment(model: SurrogateModel, J0):
    """T_J for a 0-based subset J0; equals mean^2 for the empty subset."""
    alpha = model.degrees.indices
    cols = np.where(_support_mask(alpha, set(J0)))[0]
    c = model.coeffs[:, :, cols]  # (P, n_sd, |cols|)
    level = model.level
    sd = subdomain_indices(model.M, level)
    codes = np.zeros(sd.shape[0], dtype=np.int64)
    for pos, j in enumerate(sorted(J0)):
        codes |= sd[:, j] << (level * pos)
    acc = np.zeros(model.P)
    for g in np.unique(codes):
        S = c[:, codes == g, :].sum(axis=1)
        acc += np.einsum("pa,pa->p", S, S)
    return acc * 2.0 ** (-level * (model.M - len(J0)))


def amrpc_variance_index(model: SurrogateModel, subset):
    """Partial variance of a dimension subset, from coefficients only.

    Inclusion-exclusion over conditional second moments; exact for the
    expansion under the measure in which the basis is orthonormal.
    """
    I = _normalize_subset(subset, model.M)
    I0 = [i - 1 for i in I]
    var_I = np.zeros(model.P)
    for size in range(len(I0) + 1):
        sign = (-1.0) ** (len(I0) - size)
        for J0 in combinations(I0, size):
            var_I += sign * _conditional_second_moment(model, J0)
    return var_I


def _flagged_ratio(numer, variance, var_floor):
    """Normalize, leaving cells below the variance floor undefined (NaN)."""
    out = np.full_like(numer, np.nan)
    ok = variance >= var_floor
    out[ok] = numer[ok] / variance[ok]
    return out


def amrpc_sobol(model, subset, var_floor=DEFAULT_VAR_FLOOR):
    """Sobol' index of a subset for any refinement level."""
    return _flagged_ratio(amrpc_variance_index(model, subset),
                          variance_from_coeffs(model), var_floor)


def amrpc_total(model, i, var_floor=DEFAULT_VAR_FLOOR):
    """Total index of dimension i: variance not explained by the rest.

    Uses sum_{J containing i} var_J = var - (T_rest - mean^2), the
    complement form of the subset sum, which is algebraically identical
    and needs a single conditional moment.
    """
    (i,) = _normalize_subset([i], model.M)
    rest = [j for j in range(model.M) if j != i - 1]
    variance = variance_from_coeffs(model)
    numer = variance - _conditional_second_moment(model, rest) \
        + _conditional_second_moment(model, ())
    return _flagged_ratio(numer, variance, var_floor)


def pce_sobol(model, subset, var_floor=DEFAULT_VAR_FLOOR):
    """Sobol' index from a single-subdomain expansion.

    Sum of squared coefficients whose degree support equals the subset.
    """
    if model.level != 0:
        raise MethodError("model has refinement level > 0; use amrpc_sobol")
    I = _normalize_subset(subset, model.M)
    alpha = model.degrees.indices
    mask = np.ones(alpha.shape[0], dtype=bool)
    for j in range(model.M):
        if j + 1 in I:
            mask &= alpha[:, j] > 0
        else:
            mask &= alpha[:, j] == 0
    numer = np.einsum("pa,pa->p", model.coeffs[:, 0, mask],
                      model.coeffs[:, 0, mask])
    return _flagged_ratio(numer, variance_from_coeffs(model), var_floor)


def pce_total(model, i, var_floor=DEFAULT_VAR_FLOOR):
    """Total index from a single-subdomain expansion: any alpha_i > 0 counts."""
    if model.level != 0:
        raise MethodError("model has refinement level > 0; use amrpc_total")
    (i,) = _normalize_subset([i], model.M)
    mask = model.degrees.indices[:, i - 1] > 0
    numer = np.einsum("pa,pa->p", model.coeffs[:, 0, mask],
                      model.coeffs[:, 0, mask])
    return _flagged_ratio(numer, variance_from_coeffs(model), var_floor)


def sobol_index(model, subset, var_floor=DEFAULT_VAR_FLOOR):
    """Sobol' index via the route matching the model's refinement level."""
    if model.level == 0:
        return pce_sobol(model, subset, var_floor)
    return amrpc_sobol(model, subset, var_floor)


def total_index(model, i, var_floor=DEFAULT_VAR_FLOOR):
    if model.level == 0:
        return pce_total(model, i, var_floor)
    return amrpc_total(model, i, var_floor)


@dataclass(frozen=True)
class SensitivityReport:
    """Per-cell and space-averaged indices of a fitted surrogate."""

    mean: np.ndarray  # (P,)
    variance: np.ndarray  # (P,)
    first_order: np.ndarray  # (M, P)
    total: np.ndarray  # (M, P)
    interactions: dict  # subset tuple -> (P,)
    var_floor: float
    names: tuple
    meta: dict = field(default_factory=dict)

    @property
    def retained(self):
        return self.variance >= self.var_floor

    def space_averaged(self):
        out = {"retained_cells": int(np.count_nonzero(self.retained)),
               "total_cells": int(self.variance.size),
               "first_order": {}, "total": {}, "interactions": {}}
        for k, name in enumerate(self.names):
            out["first_order"][name] = space_average(
                self.first_order[k], self.variance, self.var_floor)
            out["total"][name] = space_average(
                self.total[k], self.variance, self.var_floor)
        for subset, vals in self.interactions.items():
            key = ",".join(str(i) for i in subset)
            out["interactions"][key] = space_average(
                vals, self.variance, self.var_floor)
        return out


def space_average(values, variance, var_floor=DEFAULT_VAR_FLOOR):
    """Mean and box-plot summary over cells above the variance floor.

    Whiskers follow the 1.5*IQR convention; values beyond them are
    counted as outliers.  An all-excluded field yields an empty flag
    instead of NaN statistics.
    """
    values = np.asarray(values, dtype=float)
    keep = (np.asarray(variance) >= var_floor) & np.isfinite(values)
    vals = values[keep]
    if vals.size == 0:
        return {"empty": True, "retained": 0}
    q1, med, q3 = np.percentile(vals, [25.0, 50.0, 75.0])
    iqr = q3 - q1
    inside = vals[(vals >= q1 - 1.5 * iqr) & (vals <= q3 + 1.5 * iqr)]
    return {
        "empty": False,
        "retained": int(vals.size),
        "mean": float(vals.mean()),
        "q1": float(q1),
        "median": float(med),
        "q3": float(q3),
        "whisker_lo": float(inside.min()),
        "whisker_hi": float(inside.max()),
        "n_outliers": int(vals.size - inside.size),
        "min": float(vals.min()),
        "max": float(vals.max()),
    }


def analyze(model: SurrogateModel, interactions="none",
            var_floor=DEFAULT_VAR_FLOOR) -> SensitivityReport:
    """First-order and total indices for every dimension, plus optional
    interaction subsets.

    ``interactions`` is "none", "all" (every subset of size >= 2, only
    for M <= 12), or an iterable of subsets.
    """
    M = model.M
    first = np.stack([sobol_index(model, [i], var_floor) for i in range(1, M + 1)])
    total = np.stack([total_index(model, i, var_floor) for i in range(1, M + 1)])
    extra = {}
    if interactions == "all":
        if M > FULL_ENUMERATION_MAX_M:
            raise SubsetError(
                f"full enumeration limited to M <= {FULL_ENUMERATION_MAX_M}")
        for size in range(2, M + 1):
            for subset in combinations(range(1, M + 1), size):
                extra[subset] = sobol_index(model, subset, var_floor)
    elif interactions != "none":
        for subset in interactions:
            key = _normalize_subset(subset, M)
            extra[key] = sobol_index(model, key, var_floor)
    return SensitivityReport(
        mean=mean_from_coeffs(model),
        variance=variance_from_coeffs(model),
        first_order=first,
        total=total,
        interactions=extra,
        var_floor=float(var_floor),
        names=tuple(model.meta.get("names", [f"x{i}" for i in range(1, M + 1)])),
        meta={"level": model.level, "order": model.order, "q": model.q,
              "n_train": model.meta.get("n_train")},
    )


@dataclass(frozen=True)
class OracleResult:
    """Pick-freeze Monte-Carlo index estimates with bootstrap spread."""

    first_order: np.ndarray  # (M, P)
    total: np.ndarray  # (M, P)
    first_order_std: np.ndarray
    total_std: np.ndarray
    variance: np.ndarray  # (P,)
    undefined: np.ndarray  # (P,) bool, zero-variance cells
    n: int
    seed: int


def mc_sobol_oracle(evaluator, space: ParameterSpace, n, seed=0,
                    n_boot=200) -> OracleResult:
    """Saltelli-style pick-freeze estimates of first-order and total indices.

    Uses the correlation form for first-order indices and the Jansen
    form for totals; bootstrap over sample rows supplies standard
    errors.  Deterministic for a fixed seed.
    """
    n = int(n)
    if n < 64:
        raise ValueError("oracle needs n >= 64")
    M = space.M
    u = mc_points(2 * M, n, seed)
    A = space.quantile(u[:, :M])
    B = space.quantile(u[:, M:])
    fA = np.asarray(evaluator(A), dtype=float).reshape(n, -1)
    fB = np.asarray(evaluator(B), dtype=float).reshape(n, -1)
    fAB = np.empty((M, n, fA.shape[1]))
    for i in range(M):
        ABi = A.copy()
        ABi[:, i] = B[:, i]
        fAB[i] = np.asarray(evaluator(ABi), dtype=float).reshape(n, -1)

    def estimate(rows):
        a, b = fA[rows], fB[rows]
        var = np.concatenate([a, b]).var(axis=0)
        s1 = np.empty((M, a.shape[1]))
        st = np.empty((M, a.shape[1]))
        with np.errstate(divide="ignore", invalid="ignore"):
            for i in range(M):
                d = fAB[i][rows]
                s1[i] = (b * (d - a)).mean(axis=0) / var
                st[i] = 0.5 * ((a - d) ** 2).mean(axis=0) / var
        return s1, st, var

    rows = np.arange(n)
    s1, st, var = estimate(rows)
    undefined = var <= 0
    s1 = np.where(undefined[None, :], np.nan, s1)
    st = np.where(undefined[None, :], np.nan, st)

    rng = np.random.Generator(np.random.Philox(key=int(seed) + 0x9E3779B9))
    boots1 = np.empty((n_boot,) + s1.shape)
    bootst = np.empty((n_boot,) + st.shape)
    for b in range(n_boot):
        sample = rng.integers(0, n, size=n)
        bs1, bst, _ = estimate(sample)
        boots1[b] = bs1
        bootst[b] = bst
    return OracleResult(
        first_order=s1, total=st,
        first_order_std=boots1.std(axis=0), total_std=bootst.std(axis=0),
        variance=var, undefined=undefined, n=n, seed=int(seed))
