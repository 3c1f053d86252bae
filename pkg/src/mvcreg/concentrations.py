"""Concentration Gramian and minimax weights.

The mixing probabilities of the observations form an N x M row-stochastic
matrix ``p``.  Averaging products of its columns gives the M x M Gramian
``Gamma = (1/N) p'p`` whose nonsingularity is the identifiability condition
for the mixture.  The minimax weight for component ``m`` at observation ``j``
is the cofactor combination

    a[j, m] = (1/det Gamma) * sum_k (-1)**(k+m) * minor(m, k) * p[j, k],

which is the unique linear-in-p weight system satisfying the biorthogonality
identity ``(1/N) sum_j a[j, m] p[j, k] = delta(m, k)``.
"""

from __future__ import annotations

from dataclasses import InitVar, dataclass

import numpy as np

from .errors import SingularGramian

#: default absolute floor for det(Gamma); the theory only requires a positive
#: constant, so callers with better knowledge of their design should tighten it
DEFAULT_DET_TOL = 1e-8

# explicit cofactor expansion up to M=4 keeps the minors exact; larger M falls
# back to LU-based determinants of the deleted submatrices
_CLOSED_FORM_LIMIT = 4


@dataclass(frozen=True)
class ConcentrationMatrix:
    """Known mixing probabilities, one row per observation.

    Parameters
    ----------
    values : ndarray
        N x M matrix; row ``j`` holds the probabilities that observation ``j``
        belongs to each of the M components.  Entries must lie in [0, 1] and
        each row must sum to 1 within ``row_sum_tol``.
    row_sum_tol : float, optional
        Tolerance for the row-sum check.  Rows are validated, never
        renormalized: off-simplex input is a modeling error, not noise.
    """

    values: np.ndarray
    row_sum_tol: InitVar[float] = 1e-9

    def __post_init__(self, row_sum_tol: float):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2:
            raise ValueError("concentration matrix must be two-dimensional")
        n, m = values.shape
        if m < 1:
            raise ValueError("need at least one component")
        if n < m:
            raise ValueError(f"need at least as many observations as components (N={n} < M={m})")
        if not np.all(np.isfinite(values)):
            raise ValueError("concentration matrix contains non-finite entries")
        if values.min() < 0.0 or values.max() > 1.0:
            raise ValueError("concentration entries must lie in [0, 1]")
        row_err = np.abs(values.sum(axis=1) - 1.0)
        worst = int(np.argmax(row_err))
        if row_err[worst] > row_sum_tol:
            raise ValueError(
                f"row {worst} sums to {values[worst].sum():.12g}, "
                f"off 1 by more than {row_sum_tol:g}"
            )
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def n_obs(self) -> int:
        return self.values.shape[0]

    @property
    def n_components(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class GramianSummary:
    """Gramian of the concentration columns with determinant and minors.

    ``minors[l, m]`` is the determinant of ``gamma`` with row ``l`` and column
    ``m`` deleted (for M=1 the empty determinant is 1 by convention).
    """

    gamma: np.ndarray
    det_gamma: float
    minors: np.ndarray

    def __post_init__(self):
        for name in ("gamma", "minors"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "det_gamma", float(self.det_gamma))


@dataclass(frozen=True)
class WeightMatrix:
    """Minimax weights, one column per component.

    Column ``m`` weights the observations when component ``m`` is the
    estimation target.  Entries are signed: whenever M > 1 some weights must
    be negative for the biorthogonality identity to hold.
    """

    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2:
            raise ValueError("weights must be an N x M matrix")
        if not np.all(np.isfinite(values)):
            raise ValueError("weights must be finite")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def n_obs(self) -> int:
        return self.values.shape[0]

    @property
    def n_components(self) -> int:
        return self.values.shape[1]


def _det_small(a: np.ndarray) -> float:
    """Determinant by closed form for order <= 3, LU beyond."""
    n = a.shape[0]
    if n == 0:
        return 1.0
    if n == 1:
        return float(a[0, 0])
    if n == 2:
        return float(a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0])
    if n == 3:
        return float(
            a[0, 0] * (a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1])
            - a[0, 1] * (a[1, 0] * a[2, 2] - a[1, 2] * a[2, 0])
            + a[0, 2] * (a[1, 0] * a[2, 1] - a[1, 1] * a[2, 0])
        )
    return float(np.linalg.det(a))


def _minor(gamma: np.ndarray, row: int, col: int) -> float:
    sub = np.delete(np.delete(gamma, row, axis=0), col, axis=1)
    return _det_small(sub)


def _minor_matrix(gamma: np.ndarray, det: float) -> np.ndarray:
    m = gamma.shape[0]
    if m <= _CLOSED_FORM_LIMIT:
        minors = np.empty((m, m))
        for l in range(m):
            for k in range(m):
                minors[l, k] = _minor(gamma, l, k)
        return minors
    # adjugate route: adj = det * inv, so minor(l, m) = (-1)**(l+m) adj[m, l];
    # near-singular Gamma falls back to per-submatrix determinants
    scale = float(np.abs(gamma).max()) or 1.0
    if abs(det) > 1e-12 * scale**m:
        adj = det * np.linalg.inv(gamma)
        signs = (-1.0) ** (np.add.outer(np.arange(m), np.arange(m)))
        return signs * adj.T
    minors = np.empty((m, m))
    for l in range(m):
        for k in range(m):
            minors[l, k] = _minor(gamma, l, k)
    return minors


def build_gramian(p: ConcentrationMatrix) -> GramianSummary:
    """Compute the concentration Gramian, its determinant, and all minors.

    Parameters
    ----------
    p : ConcentrationMatrix
        Validated concentrations.

    Returns
    -------
    GramianSummary
        ``gamma = (1/N) p'p`` with ``det_gamma`` and the full matrix of
        first minors.  Singularity is diagnosed downstream, not here: a
        degenerate design still gets its Gramian reported.
    """
    values = p.values
    n = p.n_obs
    gamma = np.einsum("jl,jm->lm", values, values) / n
    gamma = (gamma + gamma.T) / 2.0
    det = _det_small(gamma) if gamma.shape[0] <= _CLOSED_FORM_LIMIT else float(np.linalg.det(gamma))
    minors = _minor_matrix(gamma, det)
    return GramianSummary(gamma=gamma, det_gamma=det, minors=minors)


def compute_weights(
    p: ConcentrationMatrix,
    g: GramianSummary | None = None,
    det_tol: float = DEFAULT_DET_TOL,
) -> WeightMatrix:
    """Build the minimax weight matrix from the Gramian cofactors.

    Parameters
    ----------
    p : ConcentrationMatrix
        Concentrations the weights are built from.
    g : GramianSummary, optional
        Precomputed Gramian of ``p``; computed here when omitted.
    det_tol : float, optional
        Positive floor for ``det(Gamma)``.

    Returns
    -------
    WeightMatrix
        ``a[j, m] = (1/det) * sum_k (-1)**(k+m) * minors[m, k] * p[j, k]``.

    Raises
    ------
    SingularGramian
        If ``det(Gamma) <= det_tol``: the concentration columns are
        (near-)linearly dependent and the components are not identifiable.
    """
    if g is None:
        g = build_gramian(p)
    if g.det_gamma <= det_tol:
        raise SingularGramian(g.det_gamma, det_tol)
    m = p.n_components
    signs = (-1.0) ** (np.add.outer(np.arange(m), np.arange(m)))
    cof = signs * g.minors  # cofactor matrix of Gamma
    a = p.values @ cof.T / g.det_gamma
    return WeightMatrix(values=a)


def weight_co_moments(a: WeightMatrix, p: ConcentrationMatrix, m: int) -> np.ndarray:
    """Averaged products of squared weights with concentration pairs.

    Returns the M x M matrix with (s, t) entry
    ``(1/N) sum_j a[j, m]**2 p[j, s] p[j, t]``, the finite-sample proxy for
    the limiting co-moments entering the asymptotic covariance.  Symmetric by
    construction; its row sums estimate ``<(a^m)^2 p^s>`` because the
    concentration rows sum to one.
    """
    if a.values.shape != p.values.shape:
        raise ValueError("weight and concentration matrices must share dimensions")
    if not 0 <= m < p.n_components:
        raise ValueError(f"component index {m} out of range")
    asq = a.values[:, m] ** 2
    out = np.einsum("j,js,jt->st", asq, p.values, p.values) / p.n_obs
    return (out + out.T) / 2.0
