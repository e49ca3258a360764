"""Command line interface: ``saefh <subcommand> ...``.

Every failure exits with status 1 and prints one JSON object on stderr,
``{"error": <kind>, "message": <text>}``, so scripts can parse it.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import SaeError, SolverFailureError
from .fh_model import predict
from .io import (
    FIT_COLUMNS,
    MSPE_COLUMNS,
    STUDY_COLUMNS,
    UNIT_MOMENT_COLUMNS,
    read_area_csv,
    read_unit_csv,
    write_rows,
)
from .kurtosis import kappa_v_details
from .mspe import estimate_mspe
from .survey_moments import area_moments
from .variance_components import Method, estimate_psi

KURTOSIS_COLUMNS = ("kappa_v", "kappa_v_unclamped", "v_wj", "psi_fh", "unstable")


class UsageError(Exception):
    """Invalid flag combination detected after argparse."""


def _kappa_v_arg(text: str):
    if text.strip().lower() == "auto":
        return "auto"
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'auto' or a number, got {text!r}") from None
    if not value >= -2:
        raise argparse.ArgumentTypeError(f"kappa_v must be >= -2, got {value}")
    return value


def _method_arg(text: str) -> Method:
    try:
        return Method.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="saefh", description="EBLUP and robust MSPE estimation under the Fay-Herriot model.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="EBLUP for every area")
    f.add_argument("input", type=Path, help="CSV with columns id,y,D,kappa_e,x1,...,xp")
    f.add_argument("-o", "--output", type=Path, required=True)
    f.add_argument("--method", type=_method_arg, default=Method.PR, help="pr or fh (default pr)")

    s = sub.add_parser("mspe", help="EBLUP with naive, normal and robust MSPE estimates")
    s.add_argument("input", type=Path)
    s.add_argument("-o", "--output", type=Path, required=True)
    s.add_argument("--method", type=_method_arg, default=Method.PR)
    s.add_argument("--kappa-v", type=_kappa_v_arg, default=None,
                   help="'auto' (jackknife) or a value; FH only (default auto)")

    k = sub.add_parser("kurtosis", help="jackknife estimate of the random-effect kurtosis")
    k.add_argument("input", type=Path)
    k.add_argument("-o", "--output", type=Path, required=True)

    u = sub.add_parser("unit-kurtosis", help="per-area sampling kurtosis from unit-level data")
    u.add_argument("input", type=Path, help="CSV with columns area_id,y,pi")
    u.add_argument("-o", "--output", type=Path, required=True)

    m = sub.add_parser("simulate", help="Monte Carlo study of the MSPE estimators")
    m.add_argument("--m", type=int, required=True, help="number of areas")
    m.add_argument("--design", default="balanced:1", help="balanced:<D> or type2")
    m.add_argument("--psi", type=float, default=1.0)
    m.add_argument("--dist-v", default="normal")
    m.add_argument("--dist-e", default="normal")
    m.add_argument("--reps", type=int, default=10_000)
    m.add_argument("--method", type=_method_arg, default=Method.PR)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--threads", type=int, default=None, help="worker threads (default: SAE_THREADS or CPU count)")
    m.add_argument("-o", "--output", type=Path, required=True, help="summary CSV")
    m.add_argument("--table", type=Path, default=None, help="write the text table here instead of stdout")
    return p


def _fit(args) -> str | None:
    data = read_area_csv(args.input)
    est = estimate_psi(data, args.method)
    pred = predict(data, est.value)
    rows = (
        {"id": area, "theta_hat": float(pred.theta_hat[i]), "B": float(pred.shrinkage[i]),
         "psi_hat": est.value}
        for i, area in enumerate(data.ids)
    )
    write_rows(args.output, FIT_COLUMNS, rows)
    return None


def _mspe(args) -> str | None:
    if args.method is Method.PR and args.kappa_v is not None:
        raise UsageError("--kappa-v is not used by --method pr (the PR estimator does not depend on kappa_v)")
    data = read_area_csv(args.input)
    report = estimate_mspe(data, args.method, args.kappa_v if args.method is Method.FH else None)
    write_rows(args.output, MSPE_COLUMNS, report.rows())
    return None


def _kurtosis(args) -> str | None:
    data = read_area_csv(args.input)
    sol, jk = kappa_v_details(data)
    write_rows(args.output, KURTOSIS_COLUMNS, [{
        "kappa_v": sol.value, "kappa_v_unclamped": sol.unclamped, "v_wj": jk.v_wj,
        "psi_fh": jk.psi_full, "unstable": int(sol.unstable),
    }])
    return None


def _unit_kurtosis(args) -> str | None:
    rows = []
    for sample in read_unit_csv(args.input):
        mom = area_moments(sample)
        rows.append({
            "area_id": sample.area_id, "y_bar": mom.y_bar, "n_hat": mom.n_hat,
            "v": mom.v, "mu4": mom.mu4, "kappa_e": mom.kappa_e,
        })
    write_rows(args.output, UNIT_MOMENT_COLUMNS, rows)
    return None


def _simulate(args) -> str | None:
    from .simulation import StudyConfig, run_study

    try:
        cfg = StudyConfig(
            m=args.m, design=args.design, psi_true=args.psi, dist_v=args.dist_v,
            dist_e=args.dist_e, replicates=args.reps, method=args.method,
            master_seed=args.seed,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    result = run_study(cfg, threads=args.threads)
    write_rows(args.output, STUDY_COLUMNS, result.csv_rows())
    table = result.text_table()
    if args.table is not None:
        args.table.write_text(table, encoding="utf-8")
        return None
    return table


_HANDLERS = {
    "fit": _fit,
    "mspe": _mspe,
    "kurtosis": _kurtosis,
    "unit-kurtosis": _unit_kurtosis,
    "simulate": _simulate,
}


def _fail(kind: str, message: str, **extra) -> int:
    payload = {"error": kind, "message": message, **extra}
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return 1


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse already printed usage; keep --help at status 0
        if exc.code in (0, None):
            return 0
        return _fail("usage", "invalid command line")
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)
    try:
        out = _HANDLERS[args.command](args)
    except UsageError as exc:
        return _fail("usage", str(exc))
    except FileNotFoundError as exc:
        return _fail("io", f"file not found: {exc.filename}")
    except SolverFailureError as exc:
        extra = {}
        if exc.area is not None:
            extra["area"] = exc.area
        return _fail(type(exc).__name__, str(exc), **extra)
    except (SaeError, ValueError) as exc:
        return _fail(type(exc).__name__, str(exc))
    if out:
        sys.stdout.write(out)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
