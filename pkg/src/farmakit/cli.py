"""Command-line interface: ``farmakit <subcommand> ...``.

Every subcommand exits with status 0 on success. Failures print one line
``farmakit: error: ...`` to stderr and exit with status 1 (bad input or a
numerical failure) or 2 (bad usage).
"""

from __future__ import annotations

import argparse
import csv
import logging
import re
import sys

import numpy as np

from . import __version__
from .exceptions import FarmakitError
from .farma import load_model, simulate, true_eigensystem
from .fnspace import FunctionSeries, fourier_design
from .forecast import (
    TABLE1_ORDERS,
    ErrorTable,
    ForecastConfig,
    algorithm1,
    baseline_errors,
    bound_experiment,
    holdout_forecast,
    rolling_cv,
    write_bounds_csv,
)
from .fpca import compute_scores, fpca
from .ingest import ingest, preprocess
from .io import read_fitted_csv, read_series_csv, write_fitted_csv, write_series_csv
from .svgplot import line_plot, save_svg
from .varma import fit_varma

log = logging.getLogger("farmakit")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # one-line diagnostics instead of argparse's usage dump
    def error(self, message):
        raise _UsageError(message)


# ---------------------------------------------------------------- parsing helpers

def parse_int_range(text: str, upper: int | None = None) -> list[int]:
    """``"2..6"`` -> ``[2, 3, 4, 5, 6]``; ``"1,3,5"`` -> ``[1, 3, 5]``.

    The token ``K`` stands for ``upper`` when it is given.
    """
    text = text.strip()

    def num(tok):
        tok = tok.strip()
        if tok.upper() == "K":
            if upper is None:
                raise ValueError("'K' is not allowed in this range")
            return upper
        try:
            return int(tok)
        except ValueError:
            raise ValueError(f"bad integer {tok!r} in range {text!r}") from None

    if ".." in text:
        a, b = text.split("..", 1)
        lo, hi = num(a), num(b)
        if hi < lo:
            raise ValueError(f"empty range {text!r}")
        return list(range(lo, hi + 1))
    vals = [num(t) for t in text.split(",") if t.strip()]
    if not vals:
        raise ValueError(f"empty range {text!r}")
    return vals


_PAIR = re.compile(r"\(\s*(\d+)\s*,\s*(\d+)\s*\)")


def parse_orders(text: str) -> list[tuple[int, int]]:
    """``"(1,0),(0,1)"`` -> ``[(1, 0), (0, 1)]``."""
    pairs = [(int(a), int(b)) for a, b in _PAIR.findall(text)]
    leftover = _PAIR.sub("", text).replace(",", "").strip()
    if not pairs or leftover:
        raise ValueError(f"bad order list {text!r}; expected e.g. \"(1,0),(0,1)\"")
    return pairs


# ---------------------------------------------------------------- subcommands

def _center_fpca(series: FunctionSeries):
    mean = series.mean()
    centered = series.centered()
    eig, _ = fpca(centered)
    return centered, mean, eig


def cmd_ingest(args):
    result = ingest(args.csv, minutes=args.minutes, max_missing=args.max_missing)
    for date, frac in result.dropped:
        print(f"dropped {date.isoformat()}: {100 * frac:.1f}% missing")
    series, report = preprocess(result, weekday_mean=not args.no_weekday_mean,
                                weekdays_only=not args.all_days, K=args.K)
    write_series_csv(series, args.out)
    print(report.summary())


def cmd_simulate(args):
    model = load_model(args.model)
    series, _ = simulate(model, args.n, burn_in=args.burn_in, seed=args.seed)
    write_series_csv(series, args.out)
    print(f"wrote {len(series)} curves (K={model.K}) to {args.out}")


def cmd_fit(args):
    series = read_series_csv(args.series)
    centered, mean, eig = _center_fpca(series)
    if not 1 <= args.d <= eig.K:
        raise ValueError(f"--d must lie in 1..{eig.K}")
    scores = compute_scores(centered, eig, args.d).scores
    model = fit_varma(scores, args.p, args.q)
    write_fitted_csv(model, eig, mean.coeffs, args.out)
    state = "stationary" if model.stationary else "NOT stationary"
    print(f"VARMA({args.p},{args.q}) on d={args.d} scores: {state}, "
          f"spectral radius {model.spectral_radius:.4f}")


def cmd_predict(args):
    series = read_series_csv(args.series)
    centered, mean, eig = _center_fpca(series)
    if not 1 <= args.d <= eig.K:
        raise ValueError(f"--d must lie in 1..{eig.K}")
    preds = []
    for step in range(1, args.h + 1):
        f = algorithm1(centered, eig, args.d, args.p, args.q, step, autocov=args.autocov)
        preds.append(f.coeffs + mean.coeffs)
    N = series.start + len(series)
    write_series_csv(FunctionSeries(np.array(preds), series.basis, N), args.out)
    print(f"wrote forecasts for days {N}..{N + args.h - 1} to {args.out}")
    if args.holdout:
        rmse, mae = holdout_forecast(series, args.d, args.p, args.q, args.holdout, 1, args.autocov)
        base = baseline_errors(series, args.holdout, 1)
        rows = [("model", rmse, mae)] + [(k, *v) for k, v in base.items()]
        for name, r, m in rows:
            print(f"{name:>10s}  rmse={r:.6g}  mae={m:.6g}")
        if args.errors_out:
            with open(args.errors_out, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh)
                w.writerow(["method", "rmse", "mae"])
                for name, r, m in rows:
                    w.writerow([name, repr(float(r)), repr(float(m))])


def cmd_cv(args):
    series = read_series_csv(args.series)
    config = ForecastConfig(
        d_grid=tuple(parse_int_range(args.d, series.basis.K)),
        order_grid=tuple(parse_orders(args.orders)),
        horizon=args.h,
        holdout=args.holdout,
        autocov=args.autocov,
        mae=args.mae,
    )
    table = rolling_cv(series, config, threads=args.threads)
    table.to_csv(args.out)
    ds, orders, M = table.grid("rmse")
    print("RMSE  d \\ (p,q): " + "  ".join(f"({p},{q})" for p, q in orders))
    for d, row in zip(ds, M):
        print(f"  d={d}: " + "  ".join(f"{v:.4g}" for v in row))
    for cell, why in table.failed.items():
        print(f"failed {cell}: {why}")
    if table.rows:
        print("best (d,p,q) by RMSE: {} ".format(table.argmin("rmse")))


def cmd_bounds(args):
    model = load_model(args.model)
    d_values = parse_int_range(args.d_range, model.K)
    if min(d_values) < 0 or max(d_values) > model.K:
        raise ValueError(f"--d-range must lie within 0..{model.K}")
    reports = bound_experiment(model, d_values, n=args.n, reps=args.reps, seed=args.seed,
                               burn_in=args.burn_in, squared=args.squared)
    write_bounds_csv(reports, args.out)
    for r in reports:
        flag = "ok" if r.holds() else "VIOLATED"
        print(f"d={r.d}: empirical {r.empirical_mse:.5g} (se {r.empirical_se:.2g}) "
              f"<= sigma2 + gamma = {r.bound:.5g}  {flag}")


def _sniff(path) -> str:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().strip()
    if first.startswith("# farmakit-series"):
        return "series"
    if first.replace(" ", "").startswith("matrix,lag,row,col,value"):
        return "fitted"
    if first.replace(" ", "").startswith("d,p,q,rmse,mae"):
        return "table"
    raise ValueError(f"{path}: unrecognised file format")


def cmd_plotdata(args):
    kind = _sniff(args.inp)
    t = np.linspace(0.0, 1.0, 289)
    if args.kind == "eigenfunctions":
        if kind == "series":
            series = read_series_csv(args.inp)
            _, _, eig = _center_fpca(series)
            V, lam = eig.vectors, eig.eigenvalues
        elif kind == "fitted":
            parts = read_fitted_csv(args.inp)
            V, lam = parts["nu"][0], parts["lambda"][0][0]
        else:
            raise ValueError("eigenfunctions plot needs a series or fitted-model file")
        m = min(args.count, V.shape[1])
        B = fourier_design(t, V.shape[0])
        lines = [(f"nu_{j + 1} ({lam[j]:.3g})", t, B @ V[:, j]) for j in range(m)]
        svg = line_plot(lines, "Leading eigenfunctions", "time of day", "value")
    elif args.kind == "forecast":
        if kind != "series":
            raise ValueError("forecast plot needs a series file")
        series = read_series_csv(args.inp)
        B = fourier_design(t, series.basis.K)
        lines = [(f"day {series.start + i}", t, B @ c) for i, c in enumerate(series.coeffs[: args.count])]
        svg = line_plot(lines, "Curves", "time of day", "value")
    else:
        if kind != "table":
            raise ValueError("cv plot needs an error table file")
        table = ErrorTable.from_csv(args.inp)
        ds, orders, M = table.grid("rmse")
        lines = [(f"ARMA({p},{q})", ds, M[:, j]) for j, (p, q) in enumerate(orders)]
        svg = line_plot(lines, "Cross-validated RMSE", "d", "RMSE")
    save_svg(svg, args.out)
    print(f"wrote {args.out}")


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="farmakit", description="Functional ARMA forecasting toolkit.")
    ap.add_argument("--version", action="version", version=f"farmakit {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("ingest", help="per-minute CSV -> smoothed, weekday-centred series")
    p.add_argument("--csv", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--K", type=int, default=31, help="number of Fourier basis functions")
    p.add_argument("--minutes", type=int, default=1440)
    p.add_argument("--max-missing", type=float, default=0.2)
    p.add_argument("--all-days", action="store_true", help="keep weekends")
    p.add_argument("--no-weekday-mean", action="store_true")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("simulate", help="simulate a functional ARMA model")
    p.add_argument("--model", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--burn-in", type=int, default=200)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit a VARMA(p,q) to the first d FPC scores")
    p.add_argument("--series", required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="forecast the next curves")
    p.add_argument("--series", required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--h", type=int, default=1)
    p.add_argument("--autocov", choices=("model", "sample"), default="model")
    p.add_argument("--holdout", type=int, default=0,
                   help="also score 1-step forecasts of the last HOLDOUT days against baselines")
    p.add_argument("--errors-out", default=None, help="CSV for the holdout comparison")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("cv", help="rolling-origin cross-validation over d and (p,q)")
    p.add_argument("--series", required=True)
    p.add_argument("--d", default="2..6")
    p.add_argument("--orders", default=",".join(f"({a},{b})" for a, b in TABLE1_ORDERS))
    p.add_argument("--holdout", type=int, default=10)
    p.add_argument("--h", type=int, default=1)
    p.add_argument("--autocov", choices=("model", "sample"), default="model")
    p.add_argument("--mae", choices=("integrated", "pointwise"), default="integrated")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("bounds", help="Monte Carlo check of the prediction error bound")
    p.add_argument("--model", required=True)
    p.add_argument("--d-range", default="1..K")
    p.add_argument("--reps", type=int, default=2000)
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--burn-in", type=int, default=200)
    p.add_argument("--squared", action="store_true", help="use the 4 g^2 form of gamma")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("plotdata", help="static SVG line plots")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--kind", choices=("eigenfunctions", "forecast", "cv"), required=True)
    p.add_argument("--count", type=int, default=4, help="number of curves to draw")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plotdata)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"farmakit: error: {exc}", file=sys.stderr)
        return 2
    if args.verbose:
        logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s")
    try:
        args.func(args)
    except (FarmakitError, ValueError, OSError, KeyError, np.linalg.LinAlgError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"farmakit: error: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
