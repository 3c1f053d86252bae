"""Reading and writing datasets, fit results, and study reports.

The CSV layout is one observation per row with header
``y,x1,...,xd,p1,...,pM``: response first, then the regressor columns, then
the concentration columns.  Floats are written with ``repr`` so a write/read
round trip reproduces the array bytes exactly.

JSON output is rendered by a small deterministic writer (insertion-ordered
keys, floats at 17 significant digits) so that byte-identical inputs yield
byte-identical reports.
"""

from __future__ import annotations

import csv
import io
import json
import math
import re

import numpy as np

from .concentrations import ConcentrationMatrix
from .errors import DataFormatError
from .estimator import FitResult
from .moments import Dataset
from .montecarlo import ComparisonReport, MonteCarloReport

_HEADER_RE = re.compile(r"^y(,x\d+)+(,p\d+)+$")


# --------------------------------------------------------------------------
# CSV
# --------------------------------------------------------------------------


def render_csv(data: Dataset, p: ConcentrationMatrix) -> str:
    """Serialize a dataset and its concentration rows to CSV text."""
    if p.values.shape[0] != data.n_obs:
        raise ValueError(
            f"dataset has {data.n_obs} rows but concentration matrix has "
            f"{p.values.shape[0]}"
        )
    d = data.n_regressors
    n_comp = p.values.shape[1]
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(
        ["y"] + [f"x{i + 1}" for i in range(d)] + [f"p{k + 1}" for k in range(n_comp)]
    )
    for j in range(data.n_obs):
        row = [repr(float(data.y[j]))]
        row += [repr(float(v)) for v in data.x[j]]
        row += [repr(float(v)) for v in p.values[j]]
        writer.writerow(row)
    return out.getvalue()


def write_csv(path, data: Dataset, p: ConcentrationMatrix) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(render_csv(data, p))


def parse_csv_text(
    text: str, row_sum_tol: float = 1e-6, source: str = "<string>"
) -> tuple[Dataset, ConcentrationMatrix]:
    """Parse CSV text into a dataset plus concentration matrix.

    The header fixes the column split: ``x`` columns must be numbered
    1..d and ``p`` columns 1..M, in order.  Any malformed cell raises
    DataFormatError naming the line.
    """
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise DataFormatError(f"{source}: empty file") from None
    joined = ",".join(h.strip() for h in header)
    if not _HEADER_RE.match(joined):
        raise DataFormatError(
            f"{source}: header must be y,x1,...,xd,p1,...,pM, got {joined!r}"
        )
    names = joined.split(",")
    d = sum(1 for h in names if h.startswith("x"))
    n_comp = len(names) - 1 - d
    expected = ["y"] + [f"x{i + 1}" for i in range(d)] + [f"p{k + 1}" for k in range(n_comp)]
    if names != expected:
        raise DataFormatError(
            f"{source}: columns out of order; expected {','.join(expected)}, got {joined!r}"
        )

    rows = []
    for lineno, cells in enumerate(reader, start=2):
        if not cells:
            continue
        if len(cells) != len(names):
            raise DataFormatError(
                f"{source}: line {lineno}: expected {len(names)} fields, got {len(cells)}"
            )
        try:
            rows.append([float(c) for c in cells])
        except ValueError:
            bad = next(c for c in cells if not _is_float(c))
            raise DataFormatError(
                f"{source}: line {lineno}: not a number: {bad!r}"
            ) from None
    if not rows:
        raise DataFormatError(f"{source}: no data rows")
    arr = np.array(rows)
    try:
        data = Dataset(y=arr[:, 0], x=arr[:, 1 : 1 + d])
        p = ConcentrationMatrix(arr[:, 1 + d :], row_sum_tol=row_sum_tol)
    except ValueError as exc:
        raise DataFormatError(f"{source}: {exc}") from None
    return data, p


def read_csv(path, row_sum_tol: float = 1e-6) -> tuple[Dataset, ConcentrationMatrix]:
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            text = fh.read()
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc.strerror or exc}") from None
    return parse_csv_text(text, row_sum_tol=row_sum_tol, source=str(path))


def _is_float(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


# --------------------------------------------------------------------------
# deterministic JSON
# --------------------------------------------------------------------------


def _write_json(obj, out: list[str]) -> None:
    if isinstance(obj, dict):
        out.append("{")
        for i, (key, value) in enumerate(obj.items()):
            if i:
                out.append(", ")
            out.append(json.dumps(str(key)))
            out.append(": ")
            _write_json(value, out)
        out.append("}")
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, value in enumerate(obj):
            if i:
                out.append(", ")
            _write_json(value, out)
        out.append("]")
    elif isinstance(obj, bool):
        out.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        value = float(obj)
        if math.isnan(value):
            out.append("NaN")
        elif math.isinf(value):
            out.append("Infinity" if value > 0 else "-Infinity")
        else:
            out.append(format(value, ".17g"))
    elif obj is None:
        out.append("null")
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, np.ndarray):
        _write_json(obj.tolist(), out)
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj) -> str:
    """Deterministic JSON text: ordered keys, 17-significant-digit floats."""
    out: list[str] = []
    _write_json(obj, out)
    out.append("\n")
    return "".join(out)


# --------------------------------------------------------------------------
# result -> dict
# --------------------------------------------------------------------------


def fit_result_to_dict(fit: FitResult) -> dict:
    doc = {
        "n_obs": fit.n_obs,
        "n_components": fit.n_components,
        "det_gamma": fit.det_gamma,
        "coefficients": fit.coefficients,
        "xtx_condition": fit.xtx_condition,
        "negative_eigenvalues": list(fit.negative_eigenvalues),
        "errors": {
            str(m): {"code": err.code, "message": str(err)}
            for m, err in sorted(fit.errors.items())
        },
    }
    if fit.plug_in_cov is not None:
        doc["plug_in_cov"] = [cov for cov in fit.plug_in_cov]
        doc["std_errors"] = [
            np.sqrt(np.maximum(np.diag(cov), 0.0) / fit.n_obs) for cov in fit.plug_in_cov
        ]
    return doc


def weights_to_dict(gramian, weights, p: ConcentrationMatrix) -> dict:
    a = weights.values
    n = a.shape[0]
    # (1/N) a' p should be the identity; report it so drift is visible
    cross = np.einsum("jm,jk->mk", a, p.values) / n
    return {
        "n_obs": n,
        "det_gamma": gramian.det_gamma,
        "gamma": gramian.gamma,
        "weights": a,
        "biorthogonality": cross,
    }


def report_to_dict(report: MonteCarloReport) -> dict:
    return {
        "seed": report.seed,
        "true_b": report.true_b,
        "analytic_v": report.analytic_v,
        "points": [
            {
                "n_obs": pt.n_obs,
                "rep_count": pt.rep_count,
                "failures": pt.failures,
                "mean_b": pt.mean_b,
                "scaled_cov": pt.scaled_cov,
            }
            for pt in report.points
        ],
    }


def comparison_to_dict(cmp: ComparisonReport) -> dict:
    return {
        "n_obs": cmp.n_obs,
        "rel_tol": cmp.rel_tol,
        "mean_abs_tol": cmp.mean_abs_tol,
        "ok": cmp.ok,
        "worst_cov_rel": cmp.worst_cov_rel,
        "worst_mean_abs": cmp.worst_mean_abs,
        "cov_failures": list(cmp.cov_failures),
        "mean_failures": list(cmp.mean_failures),
    }


# --------------------------------------------------------------------------
# text table
# --------------------------------------------------------------------------


def format_fit_table(fit: FitResult) -> str:
    """Aligned coefficient table, one row per component.

    Standard errors appear on a following ``se`` row when the plug-in
    covariance was computed; failed components render as ``nan`` with the
    error code appended.
    """
    d = fit.coefficients.shape[1]
    width = 12
    lines = [
        f"{'component':>10}" + "".join(f"{f'b[{i + 1}]':>{width}}" for i in range(d))
    ]
    for m in range(fit.n_components):
        row = f"{m + 1:>10}" + "".join(
            f"{fit.coefficients[m, i]:>{width}.4f}" for i in range(d)
        )
        if m in fit.errors:
            row += f"  [{fit.errors[m].code}]"
        lines.append(row)
        if fit.plug_in_cov is not None and m not in fit.errors:
            se = np.sqrt(np.maximum(np.diag(fit.plug_in_cov[m]), 0.0) / fit.n_obs)
            lines.append(
                f"{'se':>10}" + "".join(f"{se[i]:>{width}.4f}" for i in range(d))
            )
    lines.append(f"det(Gamma) = {fit.det_gamma:.6g}")
    return "\n".join(lines) + "\n"


def format_report_table(report: MonteCarloReport) -> str:
    """Aligned per-component table of scaled covariances over the grid.

    One block per component.  Columns are the variances in order, then the
    upper-triangle covariances; the final ``inf`` row is the analytic limit.
    """
    n_comp, d = report.true_b.shape
    pairs = [(i, i) for i in range(d)] + [
        (i, k) for i in range(d) for k in range(i + 1, d)
    ]
    width = 12
    lines = []
    for m in range(n_comp):
        lines.append(f"component {m + 1}")
        head = f"{'n':>8}" + "".join(
            f"{f'V[{i + 1},{k + 1}]':>{width}}" for i, k in pairs
        )
        head += f"{'failures':>{width}}"
        lines.append(head)
        for pt in report.points:
            row = f"{pt.n_obs:>8}"
            for i, k in pairs:
                row += f"{pt.scaled_cov[m, i, k]:>{width}.4f}"
            row += f"{pt.failures:>{width}}"
            lines.append(row)
        row = f"{'inf':>8}"
        for i, k in pairs:
            row += f"{report.analytic_v[m, i, k]:>{width}.4f}"
        lines.append(row)
        if m < n_comp - 1:
            lines.append("")
    return "\n".join(lines) + "\n"
