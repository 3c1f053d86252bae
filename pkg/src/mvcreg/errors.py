"""Exception types shared across the package."""

from __future__ import annotations


class MvcregError(Exception):
    """Base class for all errors raised by this package."""

    #: short machine-parsable slug, used by the CLI diagnostic prefix
    code = "error"


class SingularGramian(MvcregError):
    """Concentration Gramian is (near-)singular; components not identifiable.

    Raised when ``det(Gamma)`` falls at or below the configured floor.  The
    consistency theory requires ``det(Gamma)`` bounded away from zero: the
    concentration vectors must stay linearly independent.
    """

    code = "singular-gramian"

    def __init__(self, det: float, tol: float):
        self.det = float(det)
        self.tol = float(tol)
        super().__init__(
            f"det(Gamma)={det:.6g} <= tol={tol:.6g}; concentration columns are "
            "(near-)linearly dependent, violating the identifiability condition "
            "det(Gamma) > C > 0 required for consistency"
        )


class SingularNormalMatrix(MvcregError):
    """Weighted normal matrix for one component is numerically singular.

    Signals a finite-sample violation of the condition that the component's
    regressor second-moment matrix D be nonsingular.
    """

    code = "singular-normal-matrix"

    def __init__(self, component: int, condition: float, tol: float):
        self.component = int(component)
        self.condition = float(condition)
        self.tol = float(tol)
        super().__init__(
            f"weighted normal matrix X'AX for component index {component} has "
            f"condition number {condition:.6g} > tol={tol:.6g}; the second-moment "
            "matrix D of the regressors must be nonsingular for the estimator to "
            "be consistent"
        )


class SingularD(MvcregError):
    """Second-moment matrix D of the target component is singular.

    The sandwich covariance V = D^-1 Sigma D^-1 requires a nonsingular D.
    """

    code = "singular-d"

    def __init__(self, component: int, detail: str = ""):
        self.component = int(component)
        msg = (
            f"second-moment matrix D for component index {component} is singular; "
            "the asymptotic covariance D^-1 Sigma D^-1 is undefined"
        )
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class DegenerateWeights(MvcregError):
    """All weights for a component are numerically zero."""

    code = "degenerate-weights"

    def __init__(self, component: int, mean_abs: float):
        self.component = int(component)
        self.mean_abs = float(mean_abs)
        super().__init__(
            f"weights for component index {component} are degenerate "
            f"(mean |a| = {mean_abs:.3g}); the weighted moments are meaningless"
        )


class NonFiniteMoment(MvcregError):
    """A moment callback produced a non-finite value on some observation."""

    code = "non-finite-moment"

    def __init__(self, row: int):
        self.row = int(row)
        super().__init__(f"moment function returned a non-finite value at row {row}")


class DataFormatError(MvcregError):
    """Input data file does not follow the expected layout."""

    code = "data-format"


class ConfigError(MvcregError):
    """Invalid simulation or study configuration."""

    code = "config-error"

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class ExcessiveFailures(MvcregError):
    """Too many replications of a study grid point failed to fit."""

    code = "excessive-failures"

    def __init__(self, n_obs: int, failures: int, rep_count: int):
        self.n_obs = int(n_obs)
        self.failures = int(failures)
        self.rep_count = int(rep_count)
        super().__init__(
            f"{failures} of {rep_count} replications failed at n_obs={n_obs}; "
            "more than half the sample is unusable, so the summary would be "
            "meaningless"
        )
