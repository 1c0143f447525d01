"""Analytic test models with known sensitivity structure.

These stand in for external solver datasets: each model maps parameter
rows to one or more output cells, and where a closed-form variance
decomposition exists it is computed here from the defining integrals
(1-D quadrature) rather than transcribed constants.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.integrate import quad

from .distributions import ParameterSpace, Uniform
from .multires import linear_index
from .qmc import DesignMatrix
from .surrogate import SurrogateModel, TrainingSet, fit


@dataclass(frozen=True)
class AnalyticModel:
    """Deterministic evaluator over a parameter space, plus optional truth.

    ``decomposition`` maps subset tuples (1-based dimensions) to partial
    variances; ``total_variance`` is their sum.  Both are None when no
    closed form is attached.
    """

    name: str
    space: ParameterSpace
    evaluator: object  # callable (n, M) -> (n,) or (n, P)
    P: int = 1
    decomposition: dict | None = None
    total_variance: float | None = None
    meta: dict = field(default_factory=dict)

    def __call__(self, X):
        return self.evaluator(np.atleast_2d(np.asarray(X, dtype=float)))

    def sobol_truth(self, subset):
        return self.decomposition[tuple(sorted(subset))] / self.total_variance

    def total_truth(self, i):
        num = sum(v for k, v in self.decomposition.items() if i in k)
        return num / self.total_variance

    def training_set(self, design: DesignMatrix, grid=None):
        return TrainingSet(design=design, outputs=self(design.values), grid=grid)


def g_function(a) -> AnalyticModel:
    """Product benchmark: Y = prod_i (|4 z_i - 2| + a_i) / (1 + a_i).

    Inputs are Uniform[0,1]; every subset's partial variance is a
    product of the per-factor variances D_i, evaluated by quadrature.
    """
    a = np.asarray(a, dtype=float)
    if np.any(a < 0):
        raise ValueError("g-function coefficients must be nonnegative")
    M = len(a)

    def evaluator(X):
        F = (np.abs(4.0 * X - 2.0) + a[None, :]) / (1.0 + a[None, :])
        return F.prod(axis=1)

    D = []
    for ai in a:
        gi = lambda t, ai=ai: (abs(4.0 * t - 2.0) + ai) / (1.0 + ai)
        m1, _ = quad(gi, 0.0, 1.0, points=[0.5])
        m2, _ = quad(lambda t: gi(t) ** 2, 0.0, 1.0, points=[0.5])
        D.append(m2 - m1 ** 2)
    decomposition = {}
    for size in range(1, M + 1):
        for subset in combinations(range(1, M + 1), size):
            decomposition[subset] = float(np.prod([D[i - 1] for i in subset]))
    total = float(np.prod([1.0 + d for d in D]) - 1.0)
    space = ParameterSpace(dims=tuple(
        (f"z{i}", Uniform(0.0, 1.0)) for i in range(1, M + 1)))
    return AnalyticModel(name="g_function", space=space, evaluator=evaluator,
                         decomposition=decomposition, total_variance=total,
                         meta={"a": a.tolist(), "D": D})


def ishigami(a=7.0, b=0.1) -> AnalyticModel:
    """Y = sin z1 + a sin^2 z2 + b z3^4 sin z1 on Uniform[-pi, pi]^3.

    Smooth but high-degree; z3 acts only through its interaction with
    z1.  The variance decomposition follows from conditional means,
    with every moment taken by quadrature.
    """
    def evaluator(X):
        return (np.sin(X[:, 0]) + a * np.sin(X[:, 1]) ** 2
                + b * X[:, 2] ** 4 * np.sin(X[:, 0]))

    density = 1.0 / (2.0 * np.pi)
    mom = lambda f: quad(lambda t: f(t) * density, -np.pi, np.pi, limit=200)[0]
    e_sin2 = mom(lambda t: np.sin(t) ** 2)
    e_sin4 = mom(lambda t: np.sin(t) ** 4)
    e_t4 = mom(lambda t: t ** 4)
    e_t8 = mom(lambda t: t ** 8)
    d1 = (1.0 + b * e_t4) ** 2 * e_sin2
    d2 = a ** 2 * (e_sin4 - e_sin2 ** 2)
    d13 = b ** 2 * e_sin2 * (e_t8 - e_t4 ** 2)
    decomposition = {(1,): d1, (2,): d2, (3,): 0.0,
                     (1, 2): 0.0, (1, 3): d13, (2, 3): 0.0, (1, 2, 3): 0.0}
    space = ParameterSpace(dims=(
        ("z1", Uniform(-np.pi, np.pi)),
        ("z2", Uniform(-np.pi, np.pi)),
        ("z3", Uniform(-np.pi, np.pi)),
    ))
    return AnalyticModel(name="ishigami", space=space, evaluator=evaluator,
                         decomposition=decomposition,
                         total_variance=d1 + d2 + d13,
                         meta={"a": a, "b": b})


def span_polynomial(space: ParameterSpace, design: DesignMatrix, terms,
                    level=0, order=2, q=1.0) -> AnalyticModel:
    """Model lying exactly in the truncated expansion span.

    ``terms`` maps (subdomain multi-index, degree multi-index) pairs to
    coefficients; for level 0 the subdomain part may be omitted.  The
    exact coefficients are stored in meta["coeffs"] in model layout,
    making this the primary exactness oracle for fitting and for
    coefficient-based indices.
    """
    ref = _reference_model(design, level, order, q)
    n_sd = ref.n_subdomains
    n_alpha = len(ref.degrees)
    coeffs = np.zeros((1, n_sd, n_alpha))
    for key, value in terms.items():
        if level == 0 and (np.ndim(key) == 1 or not isinstance(key[0], (tuple, list))):
            sd, alpha = (0,) * space.M, tuple(key)
        else:
            sd, alpha = tuple(key[0]), tuple(key[1])
        coeffs[0, linear_index(sd, level), ref.degrees.position(alpha)] = value

    model = SurrogateModel(basis=ref.basis, degrees=ref.degrees, coeffs=coeffs,
                           meta=dict(ref.meta))

    def evaluator(X):
        from .surrogate import predict_batch
        return predict_batch(model, X)[:, 0]

    return AnalyticModel(name="span_polynomial", space=space,
                         evaluator=evaluator,
                         meta={"coeffs": coeffs, "level": level,
                               "order": order, "q": q})


def _reference_model(design, level, order, q):
    """Zero-coefficient surrogate used to share basis/degree layout."""
    zero = TrainingSet(design=design,
                       outputs=np.zeros((design.n, 1)))
    return fit(zero, level=level, order=order, q=q)


def field_toy(space: ParameterSpace, grid=(20, 20)) -> AnalyticModel:
    """Synthetic field over a grid, blending two dominant parameters.

    Along grid columns the sensitivity shifts smoothly from the first
    parameter to the last one; one interior row band has exactly zero
    variance to exercise the low-variance exclusion path.
    """
    rows, cols = grid
    P = rows * cols
    r, c = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    s = (c / max(cols - 1, 1)).ravel()  # 0 -> first-parameter dominated
    t = (r / max(rows - 1, 1)).ravel()
    dead = (t >= 0.4) & (t <= 0.6)  # zero-variance band
    amp = np.where(dead, 0.0, 0.5 + 0.5 * t)
    first = space.specs[0]
    last = space.specs[-1]

    def evaluator(X):
        X = np.atleast_2d(X)
        u = first.cdf(X[:, 0]) - 0.5
        v = last.cdf(X[:, -1]) - 0.5
        mix = np.outer(u, (1.0 - s) * amp) + np.outer(v, s * amp)
        return mix + (1.0 + t + s ** 2)[None, :]

    return AnalyticModel(name="field_toy", space=space, evaluator=evaluator,
                         P=P, meta={"grid": list(grid),
                                    "dead_cells": np.where(dead)[0].tolist()})
