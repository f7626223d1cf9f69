"""CSV formats for coefficient series and fitted score models.

Series file::

    # farmakit-series basis=fourier K=31 grid=1440 start=0
    day,coeff_index,value
    0,0,1.25
    ...

Values are written with ``repr`` so a write/read cycle is bit-exact. The
grid is recorded by its size and rebuilt as the minute grid ``m / size``.
"""

from __future__ import annotations

import csv

import numpy as np

from .fnspace import BasisSpec, FunctionSeries, minute_grid
from .fpca import EigenSystem
from .varma import VarmaModel

__all__ = [
    "write_series_csv",
    "read_series_csv",
    "write_fitted_csv",
    "read_fitted_csv",
]

_MAGIC = "# farmakit-series"


def write_series_csv(series: FunctionSeries, path) -> None:
    b = series.basis
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"{_MAGIC} basis={b.kind} K={b.size} grid={b.grid.size} start={series.start}\n")
        w = csv.writer(fh)
        w.writerow(["day", "coeff_index", "value"])
        for i, row in enumerate(series.coeffs):
            day = series.start + i
            for k, v in enumerate(row):
                w.writerow([day, k, repr(float(v))])


def _parse_meta(line: str, path) -> dict:
    if not line.startswith(_MAGIC):
        raise ValueError(f"{path}: line 1: missing '{_MAGIC}' metadata line")
    meta = {}
    for tok in line[len(_MAGIC):].split():
        if "=" not in tok:
            raise ValueError(f"{path}: line 1: bad metadata token {tok!r}")
        k, v = tok.split("=", 1)
        meta[k] = v
    for key in ("K", "grid"):
        if key not in meta:
            raise ValueError(f"{path}: line 1: metadata lacks {key}=")
    return meta


def read_series_csv(path) -> FunctionSeries:
    """Read a series file written by :func:`write_series_csv`."""
    with open(path, newline="", encoding="utf-8") as fh:
        first = fh.readline()
        if not first:
            raise ValueError(f"{path}: file is empty")
        meta = _parse_meta(first.strip(), path)
        try:
            K, n_grid = int(meta["K"]), int(meta["grid"])
            start = int(meta.get("start", 0))
        except ValueError:
            raise ValueError(f"{path}: line 1: K, grid and start must be integers") from None
        basis = BasisSpec(K, minute_grid(n_grid), meta.get("basis", "fourier"))
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["day", "coeff_index", "value"]:
            raise ValueError(f"{path}: line 2: expected header day,coeff_index,value")
        cells = {}
        for lineno, row in enumerate(reader, start=3):
            if not row:
                continue
            if len(row) != 3:
                raise ValueError(f"{path}: line {lineno}: expected 3 fields, got {len(row)}")
            try:
                day, k, v = int(row[0]), int(row[1]), float(row[2])
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: malformed row {','.join(row)}") from None
            if not 0 <= k < K:
                raise ValueError(f"{path}: line {lineno}: coeff_index {k} outside 0..{K - 1}")
            if (day, k) in cells:
                raise ValueError(f"{path}: line {lineno}: duplicate entry for day {day}, coefficient {k}")
            cells[(day, k)] = v
    if not cells:
        raise ValueError(f"{path}: no data rows")
    days = sorted({d for d, _ in cells})
    if days[0] != start or days != list(range(days[0], days[0] + len(days))):
        raise ValueError(f"{path}: day labels must be contiguous from start={start}")
    coeffs = np.empty((len(days), K))
    for i, d in enumerate(days):
        for k in range(K):
            if (d, k) not in cells:
                raise ValueError(f"{path}: day {d} lacks coefficient {k}")
            coeffs[i, k] = cells[(d, k)]
    return FunctionSeries(coeffs, basis, start)


def write_fitted_csv(model: VarmaModel, eig: EigenSystem, mean, path) -> None:
    """Fitted score model as ``matrix,lag,row,col,value`` rows.

    ``Phi`` and ``Theta`` carry their lag (1-based); ``Sigma`` has lag 0.
    ``nu`` holds the ``d`` eigenvectors used (column j is ``nu_{j+1}``) and
    ``mean`` the mean function coefficients as a column.
    """
    d = model.d
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["matrix", "lag", "row", "col", "value"])

        def emit(name, lag, M):
            for r in range(M.shape[0]):
                for c in range(M.shape[1]):
                    w.writerow([name, lag, r, c, repr(float(M[r, c]))])

        for i, M in enumerate(model.Phi, start=1):
            emit("Phi", i, M)
        for j, M in enumerate(model.Theta, start=1):
            emit("Theta", j, M)
        emit("Sigma", 0, model.Sigma)
        emit("nu", 0, eig.vectors[:, :d])
        emit("lambda", 0, eig.eigenvalues[None, :])
        emit("mean", 0, np.asarray(mean, dtype=float)[:, None])


def read_fitted_csv(path) -> dict:
    """Read :func:`write_fitted_csv` output into ``{name: {lag: matrix}}``."""
    entries: dict = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["matrix", "lag", "row", "col", "value"]:
            raise ValueError(f"{path}: line 1: expected header matrix,lag,row,col,value")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 5:
                raise ValueError(f"{path}: line {lineno}: expected 5 fields")
            try:
                name, lag, r, c, v = row[0], int(row[1]), int(row[2]), int(row[3]), float(row[4])
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: malformed row") from None
            entries.setdefault(name, {}).setdefault(lag, {})[(r, c)] = v
    out = {}
    for name, lags in entries.items():
        out[name] = {}
        for lag, cells in lags.items():
            R = 1 + max(r for r, _ in cells)
            C = 1 + max(c for _, c in cells)
            M = np.zeros((R, C))
            for (r, c), v in cells.items():
                M[r, c] = v
            out[name][lag] = M
    return out
