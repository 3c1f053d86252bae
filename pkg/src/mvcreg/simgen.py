"""Synthetic data generation for mixture regression.

Each observation draws a latent component label from its own row of the
concentration matrix, then regressors and a Gaussian error from that
component's spec, and assembles the response through the per-component linear
model.  Draws come from a counter-based Philox stream keyed by the config
seed, with a fixed draw layout (label uniforms, then the regressor normal
block, then error normals), so identical configs produce identical bytes no
matter how the surrounding code is scheduled.

The module also knows the closed-form population moments of its own designs,
which is what the analytic covariance is validated against.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field, replace
from importlib import resources
from itertools import product
from typing import Union

import numpy as np
from scipy.integrate import quad

from .concentrations import ConcentrationMatrix, compute_weights, weight_co_moments
from .errors import ConfigError
from .moments import ComponentMoments, Dataset

_MAX_SEED = 2**64


@dataclass(frozen=True)
class GaussianRegressor:
    """Regressor drawn as N(mean, sd^2), independent of the others."""

    mean: float
    sd: float

    kind = "gaussian"

    def raw_moment(self, order: int) -> float:
        mu, s2 = self.mean, self.sd**2
        if order == 0:
            return 1.0
        if order == 1:
            return mu
        if order == 2:
            return mu**2 + s2
        if order == 3:
            return mu**3 + 3.0 * mu * s2
        if order == 4:
            return mu**4 + 6.0 * mu**2 * s2 + 3.0 * s2**2
        raise ValueError(f"raw moment of order {order} not implemented")


@dataclass(frozen=True)
class ConstantRegressor:
    """Column identically one; the conventional intercept regressor."""

    kind = "constant"

    def raw_moment(self, order: int) -> float:
        return 1.0


RegressorSpec = Union[GaussianRegressor, ConstantRegressor]


@dataclass(frozen=True)
class ComponentSpec:
    """One mixture component: regressor laws, error scale, coefficients."""

    regressors: tuple[RegressorSpec, ...]
    error_sd: float
    coefficients: tuple[float, ...]


@dataclass(frozen=True)
class LinearRamp:
    """Two-component design with first-component probability j/N."""

    model = "linear_ramp"

    def matrix(self, n_obs: int) -> ConcentrationMatrix:
        ramp = np.arange(1, n_obs + 1, dtype=float) / n_obs
        return ConcentrationMatrix(np.column_stack([ramp, 1.0 - ramp]))

    @property
    def n_components(self) -> int:
        return 2


@dataclass(frozen=True)
class ExplicitConcentrations:
    """Concentration rows supplied verbatim."""

    values: np.ndarray

    model = "explicit"

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def matrix(self, n_obs: int) -> ConcentrationMatrix:
        if self.values.shape[0] != n_obs:
            raise ConfigError(
                "concentrations.values",
                f"has {self.values.shape[0]} rows but n_obs is {n_obs}",
            )
        return ConcentrationMatrix(self.values)

    @property
    def n_components(self) -> int:
        return self.values.shape[1]


ConcentrationModel = Union[LinearRamp, ExplicitConcentrations]


@dataclass(frozen=True)
class SimulationConfig:
    """Full description of one synthetic dataset.

    ``n_obs`` observations, one ``ComponentSpec`` per mixture component, a
    concentration model, and a 64-bit seed.  All components must declare the
    same number of regressors, and coefficient vectors must match it.
    """

    n_obs: int
    components: tuple[ComponentSpec, ...]
    concentrations: ConcentrationModel = field(default_factory=LinearRamp)
    seed: int = 0

    def __post_init__(self):
        if not isinstance(self.n_obs, int) or self.n_obs < 1:
            raise ConfigError("n_obs", "must be a positive integer")
        if not self.components:
            raise ConfigError("components", "must list at least one component")
        object.__setattr__(self, "components", tuple(self.components))
        d = len(self.components[0].regressors)
        for i, comp in enumerate(self.components):
            if not comp.regressors:
                raise ConfigError(f"components[{i}].regressors", "must not be empty")
            if len(comp.regressors) != d:
                raise ConfigError(
                    f"components[{i}].regressors",
                    f"has {len(comp.regressors)} entries; every component must "
                    f"declare {d} like the first",
                )
            if len(comp.coefficients) != d:
                raise ConfigError(
                    f"components[{i}].coefficients",
                    f"has {len(comp.coefficients)} entries, expected {d}",
                )
            if not comp.error_sd > 0:
                raise ConfigError(f"components[{i}].error_sd", "must be positive")
            for j, reg in enumerate(comp.regressors):
                if isinstance(reg, GaussianRegressor) and not reg.sd > 0:
                    raise ConfigError(
                        f"components[{i}].regressors[{j}].sd", "must be positive"
                    )
        if self.concentrations.n_components != len(self.components):
            raise ConfigError(
                "components",
                f"{len(self.components)} component specs but the concentration "
                f"model has {self.concentrations.n_components} components",
            )
        if isinstance(self.concentrations, LinearRamp) and len(self.components) != 2:
            raise ConfigError(
                "concentrations.model", "linear_ramp requires exactly 2 components"
            )
        if not isinstance(self.seed, int) or not 0 <= self.seed < _MAX_SEED:
            raise ConfigError("seed", "must be an unsigned 64-bit integer")

    @property
    def n_components(self) -> int:
        return len(self.components)

    @property
    def n_regressors(self) -> int:
        return len(self.components[0].regressors)

    @property
    def true_coefficients(self) -> np.ndarray:
        return np.array([c.coefficients for c in self.components], dtype=float)


@dataclass(frozen=True)
class SimulatedDataset:
    """Generated observations plus the truth that produced them.

    ``labels`` records the latent component of each observation for
    diagnostics; the estimator never sees it.
    """

    data: Dataset
    p: ConcentrationMatrix
    labels: np.ndarray

    def __post_init__(self):
        labels = np.array(self.labels, dtype=np.int64)
        labels.flags.writeable = False
        object.__setattr__(self, "labels", labels)


def generate(config: SimulationConfig) -> SimulatedDataset:
    """Draw one dataset from the configured mixture.

    Deterministic in ``config`` (including the seed): the Philox stream is
    consumed in a fixed layout regardless of component specs, so datasets are
    reproducible byte-for-byte.
    """
    n = config.n_obs
    n_comp = config.n_components
    d = config.n_regressors
    p = config.concentrations.matrix(n)

    means = np.zeros((n_comp, d))
    sds = np.zeros((n_comp, d))
    for k, comp in enumerate(config.components):
        for i, reg in enumerate(comp.regressors):
            if isinstance(reg, GaussianRegressor):
                means[k, i] = reg.mean
                sds[k, i] = reg.sd
            else:
                means[k, i] = 1.0
                sds[k, i] = 0.0
    error_sds = np.array([c.error_sd for c in config.components])
    coef = config.true_coefficients

    rng = np.random.Generator(np.random.Philox(config.seed))
    u = rng.random(n)
    z = rng.standard_normal((n, d))
    e = rng.standard_normal(n)

    cum = np.cumsum(p.values, axis=1)
    labels = np.sum(cum[:, :-1] <= u[:, None], axis=1)
    np.clip(labels, 0, n_comp - 1, out=labels)

    x = means[labels] + sds[labels] * z
    y = np.einsum("ji,ji->j", x, coef[labels]) + error_sds[labels] * e
    return SimulatedDataset(data=Dataset(y=y, x=x), p=p, labels=labels)


def derive_seed(base_seed: int, n_obs: int, replication: int) -> int:
    """Stable 64-bit seed for one replication of one grid point."""
    ss = np.random.SeedSequence(entropy=(base_seed, n_obs, replication))
    return int(ss.generate_state(1, np.uint64)[0])


def true_component_moments(config: SimulationConfig) -> list[ComponentMoments]:
    """Closed-form population moments of every component.

    Regressors are independent within a component, so any product moment
    factorizes into per-regressor raw moments (Gaussian up to fourth order,
    constants trivially).
    """
    out = []
    d = config.n_regressors
    for comp in config.components:
        regs = comp.regressors

        def cross(idx: tuple[int, ...]) -> float:
            value = 1.0
            for r, count in Counter(idx).items():
                value *= regs[r].raw_moment(count)
            return value

        d2 = np.array([[cross((i, k)) for k in range(d)] for i in range(d)])
        l4 = np.zeros((d, d, d, d))
        for idx in product(range(d), repeat=4):
            l4[idx] = cross(idx)
        out.append(
            ComponentMoments(
                d2=d2, l4=l4, sigma2=comp.error_sd**2, b=np.array(comp.coefficients)
            )
        )
    return out


def limit_co_moments(config: SimulationConfig, m: int) -> np.ndarray:
    """Limiting weight co-moments ``<(a^m)^2 p^s p^t>`` of the design.

    For the linear ramp the concentration columns converge to functions of
    t = j/N, so the limits are integrals over [0, 1], evaluated by adaptive
    quadrature.  An explicit concentration matrix has no limiting structure;
    its finite-sample co-moments are returned instead.
    """
    if not 0 <= m < config.n_components:
        raise ValueError(f"component index {m} out of range")
    model = config.concentrations
    if isinstance(model, LinearRamp):
        funcs = (lambda t: t, lambda t: 1.0 - t)
        gram = np.array(
            [[quad(lambda t: fl(t) * fm(t), 0.0, 1.0)[0] for fm in funcs] for fl in funcs]
        )
        inv = np.linalg.inv(gram)

        def a_m(t: float) -> float:
            return sum(f(t) * inv[k, m] for k, f in enumerate(funcs))

        co = np.array(
            [
                [
                    quad(lambda t: a_m(t) ** 2 * fs(t) * ft(t), 0.0, 1.0)[0]
                    for ft in funcs
                ]
                for fs in funcs
            ]
        )
        return (co + co.T) / 2.0
    p = model.matrix(config.n_obs)
    weights = compute_weights(p)
    return weight_co_moments(weights, p, m)


# --------------------------------------------------------------------------
# JSON configuration
# --------------------------------------------------------------------------

_TOP_LEVEL_KEYS = {
    "n_obs",
    "n_components",
    "components",
    "concentrations",
    "seed",
    "rep_count",
    "n_grid",
    "rel_tol",
    "mean_tol",
}


@dataclass(frozen=True)
class StudyOptions:
    """Replication-study settings carried alongside a SimulationConfig."""

    rep_count: int | None = None
    n_grid: tuple[int, ...] | None = None
    rel_tol: float | None = None
    mean_tol: float = 0.05

    def __post_init__(self):
        if self.rep_count is not None and self.rep_count < 2:
            raise ConfigError("rep_count", "must be at least 2")
        if self.n_grid is not None:
            if not self.n_grid:
                raise ConfigError("n_grid", "must not be empty")
            for n in self.n_grid:
                if not isinstance(n, int) or n < 2:
                    raise ConfigError("n_grid", "entries must be integers >= 2")
        if self.rel_tol is not None and not self.rel_tol > 0:
            raise ConfigError("rel_tol", "must be positive")
        if not self.mean_tol > 0:
            raise ConfigError("mean_tol", "must be positive")


def _require(mapping: dict, key: str, path: str):
    if key not in mapping:
        raise ConfigError(f"{path}.{key}" if path else key, "is required")
    return mapping[key]


def _as_int(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"must be an integer, got {value!r}")
    return value


def _as_number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"must be a number, got {value!r}")
    return float(value)


def _parse_regressor(entry, path: str) -> RegressorSpec:
    if not isinstance(entry, dict):
        raise ConfigError(path, "must be an object")
    kind = entry.get("kind")
    if kind == "constant":
        extra = set(entry) - {"kind"}
        if extra:
            raise ConfigError(path, f"unknown keys {sorted(extra)} for constant regressor")
        return ConstantRegressor()
    if kind == "gaussian":
        extra = set(entry) - {"kind", "mean", "sd"}
        if extra:
            raise ConfigError(path, f"unknown keys {sorted(extra)} for gaussian regressor")
        mean = _as_number(_require(entry, "mean", path), f"{path}.mean")
        sd = _as_number(_require(entry, "sd", path), f"{path}.sd")
        return GaussianRegressor(mean=mean, sd=sd)
    raise ConfigError(f"{path}.kind", f"must be 'constant' or 'gaussian', got {kind!r}")


def _parse_component(entry, path: str) -> ComponentSpec:
    if not isinstance(entry, dict):
        raise ConfigError(path, "must be an object")
    extra = set(entry) - {"regressors", "error_sd", "coefficients"}
    if extra:
        raise ConfigError(path, f"unknown keys {sorted(extra)}")
    regressors = _require(entry, "regressors", path)
    if not isinstance(regressors, list):
        raise ConfigError(f"{path}.regressors", "must be a list")
    coefficients = _require(entry, "coefficients", path)
    if not isinstance(coefficients, list):
        raise ConfigError(f"{path}.coefficients", "must be a list")
    return ComponentSpec(
        regressors=tuple(
            _parse_regressor(r, f"{path}.regressors[{j}]") for j, r in enumerate(regressors)
        ),
        error_sd=_as_number(_require(entry, "error_sd", path), f"{path}.error_sd"),
        coefficients=tuple(
            _as_number(c, f"{path}.coefficients[{j}]") for j, c in enumerate(coefficients)
        ),
    )


def _parse_concentrations(entry, path: str) -> ConcentrationModel:
    if entry is None:
        return LinearRamp()
    if not isinstance(entry, dict):
        raise ConfigError(path, "must be an object")
    model = entry.get("model")
    if model == "linear_ramp":
        extra = set(entry) - {"model"}
        if extra:
            raise ConfigError(path, f"unknown keys {sorted(extra)} for linear_ramp")
        return LinearRamp()
    if model == "explicit":
        extra = set(entry) - {"model", "values"}
        if extra:
            raise ConfigError(path, f"unknown keys {sorted(extra)} for explicit model")
        values = _require(entry, "values", path)
        try:
            arr = np.array(values, dtype=float)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{path}.values", f"not a numeric matrix: {exc}") from None
        if arr.ndim != 2:
            raise ConfigError(f"{path}.values", "must be a matrix (list of equal-length rows)")
        return ExplicitConcentrations(values=arr)
    raise ConfigError(f"{path}.model", f"must be 'linear_ramp' or 'explicit', got {model!r}")


def simulation_config_from_dict(raw: dict) -> SimulationConfig:
    """Build a validated SimulationConfig from parsed JSON.

    Raises
    ------
    ConfigError
        Naming the offending field path, e.g. ``components[1].error_sd``.
    """
    if not isinstance(raw, dict):
        raise ConfigError("config", "top level must be an object")
    extra = set(raw) - _TOP_LEVEL_KEYS
    if extra:
        raise ConfigError(sorted(extra)[0], "unknown configuration key")
    n_obs = _as_int(_require(raw, "n_obs", ""), "n_obs")
    components_raw = _require(raw, "components", "")
    if not isinstance(components_raw, list) or not components_raw:
        raise ConfigError("components", "must be a non-empty list")
    components = tuple(
        _parse_component(c, f"components[{i}]") for i, c in enumerate(components_raw)
    )
    if "n_components" in raw:
        declared = _as_int(raw["n_components"], "n_components")
        if declared != len(components):
            raise ConfigError(
                "components",
                f"n_components says {declared} but {len(components)} specs given",
            )
    concentrations = _parse_concentrations(raw.get("concentrations"), "concentrations")
    seed = _as_int(raw.get("seed", 0), "seed")
    return SimulationConfig(
        n_obs=n_obs, components=components, concentrations=concentrations, seed=seed
    )


def study_options_from_dict(raw: dict) -> StudyOptions:
    """Extract replication-study settings from the same JSON object."""
    rep_count = raw.get("rep_count")
    if rep_count is not None:
        rep_count = _as_int(rep_count, "rep_count")
    n_grid = raw.get("n_grid")
    if n_grid is not None:
        if not isinstance(n_grid, list):
            raise ConfigError("n_grid", "must be a list of integers")
        n_grid = tuple(_as_int(n, f"n_grid[{i}]") for i, n in enumerate(n_grid))
    rel_tol = raw.get("rel_tol")
    if rel_tol is not None:
        rel_tol = _as_number(rel_tol, "rel_tol")
    mean_tol = _as_number(raw.get("mean_tol", 0.05), "mean_tol")
    return StudyOptions(rep_count=rep_count, n_grid=n_grid, rel_tol=rel_tol, mean_tol=mean_tol)


def load_config_file(path) -> tuple[SimulationConfig, StudyOptions]:
    """Read a JSON config file into simulation and study settings."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read config: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(str(path), f"invalid JSON: {exc}") from None
    return simulation_config_from_dict(raw), study_options_from_dict(raw)


def reference_study_config() -> tuple[SimulationConfig, StudyOptions]:
    """The bundled two-component benchmark study.

    Linear-ramp concentrations with Gaussian regressors whose asymptotic
    covariance is known in closed form; the default study grid and
    replication count match the published reference table for this design.
    """
    ref = resources.files("mvcreg").joinpath("configs/reference_study.json")
    raw = json.loads(ref.read_text(encoding="utf-8"))
    return simulation_config_from_dict(raw), study_options_from_dict(raw)


def with_seed(config: SimulationConfig, seed: int) -> SimulationConfig:
    return replace(config, seed=seed)


def with_n_obs(config: SimulationConfig, n_obs: int) -> SimulationConfig:
    if n_obs == config.n_obs:
        return config
    if isinstance(config.concentrations, ExplicitConcentrations):
        raise ConfigError(
            "n_grid", "explicit concentration matrices cannot be resized across a grid"
        )
    return replace(config, n_obs=n_obs)
