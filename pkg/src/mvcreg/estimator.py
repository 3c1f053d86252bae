"""Modified least-squares estimator for mixture regression coefficients.

For target component ``m`` the estimate solves the weighted normal equations

    (X'AX) b = X'AY,    A = diag(a[:, m]),

with the signed minimax weights from :mod:`mvcreg.concentrations`.  Because
some weights are negative, ``X'AX`` is symmetric but possibly indefinite: the
solve uses a symmetric-indefinite factorization and the eigenvalue signs are
surfaced as a diagnostic rather than assumed away.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from .concentrations import (
    DEFAULT_DET_TOL,
    ConcentrationMatrix,
    GramianSummary,
    WeightMatrix,
    build_gramian,
    compute_weights,
)
from .errors import DegenerateWeights, SingularNormalMatrix
from .moments import Dataset, component_regression_moments

#: default ceiling on cond(X'AX); beyond it the component is reported as
#: rank-deficient instead of silently returning noise
DEFAULT_XTX_TOL = 1e10

_WEIGHT_FLOOR = 1e-12  # mean |a| below this means the component got no mass


@dataclass(frozen=True)
class ComponentFit:
    """Fit of a single component: coefficients plus solver diagnostics."""

    coefficients: np.ndarray
    condition: float
    negative_eigenvalues: int

    def __post_init__(self):
        coef = np.array(self.coefficients, dtype=float)
        coef.flags.writeable = False
        object.__setattr__(self, "coefficients", coef)


@dataclass(frozen=True)
class FitResult:
    """Per-component coefficient estimates with shared diagnostics.

    ``coefficients`` row ``m`` solves that component's normal equations; rows
    of failed components are NaN and the failure is recorded in ``errors``
    keyed by component index.  ``plug_in_cov`` stays ``None`` until filled by
    the covariance module.
    """

    coefficients: np.ndarray
    det_gamma: float
    xtx_condition: np.ndarray
    negative_eigenvalues: tuple[int, ...]
    n_obs: int
    errors: dict[int, SingularNormalMatrix | DegenerateWeights]
    plug_in_cov: tuple[np.ndarray, ...] | None = None

    def __post_init__(self):
        coef = np.array(self.coefficients, dtype=float)
        cond = np.array(self.xtx_condition, dtype=float)
        coef.flags.writeable = False
        cond.flags.writeable = False
        object.__setattr__(self, "coefficients", coef)
        object.__setattr__(self, "xtx_condition", cond)

    @property
    def n_components(self) -> int:
        return self.coefficients.shape[0]

    @property
    def ok(self) -> bool:
        """True when every component fitted cleanly."""
        return not self.errors

    def with_plug_in_cov(self, covs: tuple[np.ndarray, ...]) -> "FitResult":
        return replace(self, plug_in_cov=tuple(np.asarray(c, dtype=float) for c in covs))


def _solve_component(
    data: Dataset, a_col: np.ndarray, m: int, xtx_tol: float
) -> ComponentFit:
    mean_abs = float(np.mean(np.abs(a_col)))
    if mean_abs < _WEIGHT_FLOOR:
        raise DegenerateWeights(m, mean_abs)
    xtx, xty = component_regression_moments(data, a_col)
    eig = np.linalg.eigvalsh(xtx)
    largest = float(np.max(np.abs(eig)))
    smallest = float(np.min(np.abs(eig)))
    condition = np.inf if smallest == 0.0 else largest / smallest
    if not np.isfinite(condition) or condition > xtx_tol:
        raise SingularNormalMatrix(m, condition, xtx_tol)
    # Bunch-Kaufman (assume_a="sym"): valid for the indefinite case, unlike
    # Cholesky; never form the explicit inverse
    coef = scipy.linalg.solve(xtx, xty, assume_a="sym")
    return ComponentFit(
        coefficients=coef,
        condition=condition,
        negative_eigenvalues=int(np.sum(eig < 0.0)),
    )


def fit_component(
    data: Dataset,
    p: ConcentrationMatrix,
    m: int,
    det_tol: float = DEFAULT_DET_TOL,
    xtx_tol: float = DEFAULT_XTX_TOL,
    weights: WeightMatrix | None = None,
) -> ComponentFit:
    """Estimate the coefficient vector of component ``m``.

    Parameters
    ----------
    data : Dataset
        Observations; ``data.n_obs`` must match ``p.n_obs``.
    p : ConcentrationMatrix
        Known mixing probabilities.
    m : int
        Target component, 0-based.
    det_tol, xtx_tol : float, optional
        Floors for det(Gamma) and cond(X'AX).
    weights : WeightMatrix, optional
        Precomputed minimax weights for ``p`` (skips the Gramian solve).

    Raises
    ------
    SingularGramian
        Concentration columns (near-)linearly dependent.
    SingularNormalMatrix
        cond(X'AX) exceeds ``xtx_tol`` for this component.
    DegenerateWeights
        The component's weights are numerically all zero.
    """
    if data.n_obs != p.n_obs:
        raise ValueError("dataset and concentration matrix disagree on N")
    if not 0 <= m < p.n_components:
        raise ValueError(f"component index {m} out of range")
    if weights is None:
        weights = compute_weights(p, det_tol=det_tol)
    return _solve_component(data, weights.values[:, m], m, xtx_tol)


def fit_all(
    data: Dataset,
    p: ConcentrationMatrix,
    det_tol: float = DEFAULT_DET_TOL,
    xtx_tol: float = DEFAULT_XTX_TOL,
    gramian: GramianSummary | None = None,
    weights: WeightMatrix | None = None,
) -> FitResult:
    """Fit every component, sharing one Gramian and weight computation.

    A singular Gramian aborts the whole fit; a singular normal matrix only
    fails its own component, which gets a NaN coefficient row and an entry in
    ``FitResult.errors``.
    """
    if data.n_obs != p.n_obs:
        raise ValueError("dataset and concentration matrix disagree on N")
    if gramian is None:
        gramian = build_gramian(p)
    if weights is None:
        weights = compute_weights(p, gramian, det_tol=det_tol)
    n_comp = p.n_components
    d = data.n_regressors
    coef = np.full((n_comp, d), np.nan)
    cond = np.full(n_comp, np.nan)
    neg = []
    failures: dict[int, SingularNormalMatrix | DegenerateWeights] = {}
    for m in range(n_comp):
        try:
            fit = _solve_component(data, weights.values[:, m], m, xtx_tol)
        except (SingularNormalMatrix, DegenerateWeights) as exc:
            failures[m] = exc
            if isinstance(exc, SingularNormalMatrix):
                cond[m] = exc.condition
            neg.append(0)
            continue
        coef[m] = fit.coefficients
        cond[m] = fit.condition
        neg.append(fit.negative_eigenvalues)
    return FitResult(
        coefficients=coef,
        det_gamma=gramian.det_gamma,
        xtx_condition=cond,
        negative_eigenvalues=tuple(neg),
        n_obs=data.n_obs,
        errors=failures,
    )
