"""Asymptotic covariance of the modified least-squares estimator.

The scaled estimator fluctuations converge to N(0, V) with the sandwich

    V = D^-1 Sigma D^-1,

where D is the target component's regressor second-moment matrix and, writing
``w[s] = <(a^m)^2 p^s>`` and ``c[s, t] = <(a^m)^2 p^s p^t>`` for the limiting
weight co-moments and ``delta_s = b^(s) - b^(m)``,

    Sigma[i, k] = sum_s w[s] * (D2_s[i, k] * sigma_s^2
                                + delta_s' L4_s[i, k] delta_s)
                - sum_{s,t} c[s, t] * (D2_s delta_s)[i] * (D2_t delta_t)[k].

The double sum is evaluated through the d x M matrix of vectors
``u_s = D2_s delta_s`` as ``U c U'``, which is algebraically identical to the
four-index product tensor but O(M^2 d^2).

Two modes are provided: analytic (true component moments supplied, used to
validate simulations) and plug-in (every population quantity replaced by its
weighted-empirical estimate from one dataset).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .concentrations import (
    DEFAULT_DET_TOL,
    ConcentrationMatrix,
    WeightMatrix,
    compute_weights,
    weight_co_moments,
)
from .errors import SingularD
from .estimator import FitResult
from .moments import (
    ComponentMoments,
    Dataset,
    component_regression_moments,
    weighted_fourth_moment,
)

_D_CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class AsymptoticCovariance:
    """Sandwich covariance for one component.

    ``std_errors`` holds sqrt(V[i, i] / N) in plug-in mode and is ``None`` in
    analytic mode, where no sample size is involved.  ``warnings`` records
    finite-sample degeneracies (clamped negative variance estimates).
    """

    sigma: np.ndarray
    v: np.ndarray
    component: int
    mode: str
    d_matrix: np.ndarray
    std_errors: np.ndarray | None = None
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        for name in ("sigma", "v", "d_matrix"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if self.std_errors is not None:
            se = np.array(self.std_errors, dtype=float)
            se.flags.writeable = False
            object.__setattr__(self, "std_errors", se)


def _assemble_sigma(
    moments: list[ComponentMoments] | tuple[ComponentMoments, ...],
    co_moments: np.ndarray,
    m: int,
) -> np.ndarray:
    n_comp = len(moments)
    co = np.asarray(co_moments, dtype=float)
    if co.shape != (n_comp, n_comp):
        raise ValueError("co_moments must be M x M")
    if not np.allclose(co, co.T, atol=1e-8):
        raise ValueError("co_moments must be symmetric")
    if not 0 <= m < n_comp:
        raise ValueError(f"component index {m} out of range")
    d = moments[m].d2.shape[0]
    w = co.sum(axis=1)  # <(a^m)^2 p^s>: rows of p sum to one
    b_m = moments[m].b
    sigma = np.zeros((d, d))
    u = np.zeros((d, n_comp))  # u[:, s] = D2_s (b_s - b_m)
    for s, mom in enumerate(moments):
        delta = mom.b - b_m
        sigma += w[s] * (mom.d2 * mom.sigma2 + np.einsum("iklq,l,q->ik", mom.l4, delta, delta))
        u[:, s] = mom.d2 @ delta
    sigma -= u @ co @ u.T
    return (sigma + sigma.T) / 2.0


def _sandwich(d2: np.ndarray, sigma: np.ndarray, component: int) -> np.ndarray:
    eig = np.linalg.eigvalsh(d2)
    largest = float(np.max(np.abs(eig)))
    smallest = float(np.min(np.abs(eig)))
    if smallest == 0.0 or largest / smallest > _D_CONDITION_LIMIT:
        raise SingularD(component, f"condition number {largest / max(smallest, 1e-300):.3g}")
    half = scipy.linalg.solve(d2, sigma, assume_a="sym")  # D^-1 Sigma
    v = scipy.linalg.solve(d2, half.T, assume_a="sym").T  # (D^-1 Sigma) D^-1
    return (v + v.T) / 2.0


def analytic_sigma(
    moments: list[ComponentMoments] | tuple[ComponentMoments, ...],
    co_moments: np.ndarray,
    m: int,
) -> AsymptoticCovariance:
    """Assemble Sigma and V from true component moments.

    Parameters
    ----------
    moments : sequence of ComponentMoments
        One entry per component: second moments, fourth moments, error
        variance, and coefficient vector.
    co_moments : ndarray
        M x M symmetric matrix of the limits ``<(a^m)^2 p^s p^t>`` for the
        target component's weights.
    m : int
        Target component, 0-based.

    Raises
    ------
    SingularD
        If the target component's second-moment matrix is singular.
    """
    sigma = _assemble_sigma(moments, co_moments, m)
    v = _sandwich(moments[m].d2, sigma, m)
    return AsymptoticCovariance(
        sigma=sigma, v=v, component=m, mode="analytic", d_matrix=moments[m].d2
    )


def plug_in_covariance(
    data: Dataset,
    p: ConcentrationMatrix,
    fit: FitResult,
    m: int,
    det_tol: float = DEFAULT_DET_TOL,
    weights: WeightMatrix | None = None,
) -> AsymptoticCovariance:
    """Plug-in estimate of the sandwich covariance from one dataset.

    Every population quantity in Sigma is replaced by its weighted-empirical
    counterpart: component ``s``'s moments use the weights of component
    ``s``, the error variance is the weighted mean squared residual at that
    component's fitted coefficients, and the co-moment limits are replaced by
    their finite-sample averages.

    A negative weighted residual variance (possible with signed weights) is
    clamped to zero and reported through ``warnings`` instead of failing the
    whole covariance.

    Parameters
    ----------
    data, p : Dataset, ConcentrationMatrix
        The observations the fit was computed from.
    fit : FitResult
        Successful fit of *all* components; their coefficient differences
        enter Sigma.
    m : int
        Target component, 0-based.
    det_tol : float, optional
        Floor for det(Gamma) when weights are recomputed here.
    weights : WeightMatrix, optional
        Precomputed minimax weights for ``p``.
    """
    if fit.errors:
        bad = sorted(fit.errors)
        raise ValueError(
            f"plug-in covariance needs every component fitted; components {bad} failed"
        )
    if data.n_obs != p.n_obs:
        raise ValueError("dataset and concentration matrix disagree on N")
    if weights is None:
        weights = compute_weights(p, det_tol=det_tol)
    n = data.n_obs
    notes: list[str] = []
    moments = []
    for s in range(p.n_components):
        a_s = weights.values[:, s]
        xtx, _ = component_regression_moments(data, a_s)
        l4 = weighted_fourth_moment(data, a_s)
        resid = data.y - data.x @ fit.coefficients[s]
        sigma2 = float(np.einsum("j,j->", a_s, resid**2) / n)
        if sigma2 < 0.0:
            notes.append(
                f"degenerate-variance: component index {s} plug-in error variance "
                f"{sigma2:.6g} clamped to 0"
            )
            sigma2 = 0.0
        moments.append(
            ComponentMoments(d2=xtx, l4=l4, sigma2=sigma2, b=fit.coefficients[s])
        )
    co = weight_co_moments(weights, p, m)
    sigma = _assemble_sigma(moments, co, m)
    v = _sandwich(moments[m].d2, sigma, m)
    variances = np.diag(v).copy()
    if np.any(variances < -1e-10):
        notes.append(
            f"degenerate-variance: component index {m} plug-in V has negative "
            f"diagonal entries (min {variances.min():.6g}); standard errors clamped"
        )
    std_errors = np.sqrt(np.maximum(variances, 0.0) / n)
    return AsymptoticCovariance(
        sigma=sigma,
        v=v,
        component=m,
        mode="plug_in",
        d_matrix=moments[m].d2,
        std_errors=std_errors,
        warnings=tuple(notes),
    )
