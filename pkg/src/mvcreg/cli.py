"""Command-line interface.

Subcommands
-----------
fit        estimate per-component coefficients from a CSV dataset
weights    emit the minimax weight matrix and its consistency checks
simulate   draw a synthetic dataset from a JSON config
study      run a seeded replication study and compare to the analytic limit

Diagnostics go to stderr as one line ``mvcreg: <code>: <message>``.  Exit
codes: 0 success, 2 bad input or config, 3 singular concentration Gramian,
4 estimation failure, 5 study comparison outside tolerance.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import dataio
from .concentrations import DEFAULT_DET_TOL, build_gramian, compute_weights
from .covariance import plug_in_covariance
from .errors import ConfigError, DataFormatError, MvcregError, SingularGramian
from .estimator import DEFAULT_XTX_TOL, fit_all
from .moments import Dataset
from .montecarlo import compare_report, study_from_options
from .simgen import generate, load_config_file, reference_study_config, with_seed

#: CSV rows only need to be stochastic to rounding precision, not exactly
_CSV_ROW_SUM_TOL = 1e-6


def _diag(exc: MvcregError) -> None:
    print(f"mvcreg: {exc.code}: {exc}", file=sys.stderr)


def _write_output(args, text: str) -> None:
    if args.output is None or args.output == "-":
        sys.stdout.write(text)
    else:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)


def _with_intercept(data: Dataset) -> Dataset:
    ones = np.ones((data.n_obs, 1))
    return Dataset(y=data.y, x=np.hstack([ones, data.x]))


def cmd_fit(args) -> int:
    data, p = dataio.read_csv(args.input, row_sum_tol=_CSV_ROW_SUM_TOL)
    if args.intercept:
        data = _with_intercept(data)
    fit = fit_all(data, p, det_tol=args.det_tol, xtx_tol=args.xtx_tol)
    warnings: list[str] = []
    if not fit.errors:
        covs = [
            plug_in_covariance(data, p, fit, m, det_tol=args.det_tol)
            for m in range(fit.n_components)
        ]
        fit = fit.with_plug_in_cov(tuple(c.v for c in covs))
        for cov in covs:
            warnings.extend(cov.warnings)
    if args.format == "table":
        text = dataio.format_fit_table(fit)
    else:
        doc = dataio.fit_result_to_dict(fit)
        if warnings:
            doc["warnings"] = warnings
        text = dataio.dumps(doc)
    _write_output(args, text)
    for note in warnings:
        print(f"mvcreg: warning: {note}", file=sys.stderr)
    if fit.errors:
        for err in fit.errors.values():
            _diag(err)
        return 4
    return 0


def cmd_weights(args) -> int:
    data, p = dataio.read_csv(args.input, row_sum_tol=_CSV_ROW_SUM_TOL)
    gramian = build_gramian(p)
    weights = compute_weights(p, gramian, det_tol=args.det_tol)
    if args.format == "csv":
        import csv as _csv
        import io as _io

        buf = _io.StringIO()
        writer = _csv.writer(buf, lineterminator="\n")
        n_comp = weights.values.shape[1]
        writer.writerow([f"a{m + 1}" for m in range(n_comp)])
        for row in weights.values:
            writer.writerow([repr(float(v)) for v in row])
        text = buf.getvalue()
    else:
        text = dataio.dumps(dataio.weights_to_dict(gramian, weights, p))
    _write_output(args, text)
    return 0


def cmd_simulate(args) -> int:
    config, _ = load_configuration(args)
    if args.seed is not None:
        config = with_seed(config, args.seed)
    sim = generate(config)
    _write_output(args, dataio.render_csv(sim.data, sim.p))
    return 0


def cmd_study(args) -> int:
    config, options = load_configuration(args)
    if args.seed is not None:
        config = with_seed(config, args.seed)
    threads = 1 if args.deterministic else None
    report = study_from_options(
        config, options, rep_count=args.reps, threads=threads
    )
    rel_tol = args.rel_tol if args.rel_tol is not None else options.rel_tol
    comparison = None
    if rel_tol is not None:
        comparison = compare_report(report, rel_tol, options.mean_tol)
    if args.format == "table":
        text = dataio.format_report_table(report)
        if comparison is not None:
            state = "ok" if comparison.ok else "FAILED"
            text += (
                f"comparison at n={comparison.n_obs}: {state} "
                f"(worst cov rel err {comparison.worst_cov_rel:.3f}, "
                f"tol {comparison.rel_tol})\n"
            )
    else:
        doc = dataio.report_to_dict(report)
        if comparison is not None:
            doc["comparison"] = dataio.comparison_to_dict(comparison)
        text = dataio.dumps(doc)
    _write_output(args, text)
    if comparison is not None and not comparison.ok:
        for line in comparison.cov_failures + comparison.mean_failures:
            print(f"mvcreg: comparison-failure: {line}", file=sys.stderr)
        return 5
    return 0


def load_configuration(args):
    if args.input is None:
        return reference_study_config()
    return load_config_file(args.input)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mvcreg",
        description=(
            "Per-component linear regression for mixtures with known, "
            "observation-dependent mixing probabilities."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, formats, default_format):
        p.add_argument("--output", "-o", default=None, help="output path (default stdout)")
        p.add_argument(
            "--format", choices=formats, default=default_format,
            help=f"output format (default {default_format})",
        )

    p_fit = sub.add_parser("fit", help="fit per-component coefficients from CSV data")
    p_fit.add_argument("--input", "-i", required=True, help="CSV dataset path")
    common(p_fit, formats=("json", "table"), default_format="json")
    p_fit.add_argument(
        "--intercept", action="store_true",
        help="prepend a constant regressor column before fitting",
    )
    p_fit.add_argument("--det-tol", type=float, default=DEFAULT_DET_TOL)
    p_fit.add_argument("--xtx-tol", type=float, default=DEFAULT_XTX_TOL)
    p_fit.set_defaults(func=cmd_fit)

    p_w = sub.add_parser("weights", help="emit the minimax weight matrix")
    p_w.add_argument("--input", "-i", required=True, help="CSV dataset path")
    common(p_w, formats=("json", "csv"), default_format="json")
    p_w.add_argument("--det-tol", type=float, default=DEFAULT_DET_TOL)
    p_w.set_defaults(func=cmd_weights)

    p_sim = sub.add_parser("simulate", help="draw a synthetic dataset from a config")
    p_sim.add_argument(
        "--input", "-i", default=None,
        help="JSON config path (default: bundled reference design)",
    )
    common(p_sim, formats=("csv",), default_format="csv")
    p_sim.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_sim.set_defaults(func=cmd_simulate)

    p_st = sub.add_parser("study", help="run a seeded replication study")
    p_st.add_argument(
        "--input", "-i", default=None,
        help="JSON config path (default: bundled reference design)",
    )
    common(p_st, formats=("json", "table"), default_format="json")
    p_st.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_st.add_argument("--reps", type=int, default=None, help="override rep_count")
    p_st.add_argument(
        "--rel-tol", type=float, default=None,
        help="enforce this relative tolerance against the analytic limit",
    )
    p_st.add_argument(
        "--deterministic", action="store_true",
        help="force single-threaded execution",
    )
    p_st.set_defaults(func=cmd_study)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DataFormatError, ConfigError) as exc:
        _diag(exc)
        return 2
    except SingularGramian as exc:
        _diag(exc)
        return 3
    except MvcregError as exc:
        _diag(exc)
        return 4
    except BrokenPipeError:
        # downstream consumer (head, less) closed the pipe; not our error
        try:
            sys.stdout.close()
        except OSError:
            pass
        return 0


if __name__ == "__main__":
    sys.exit(main())
