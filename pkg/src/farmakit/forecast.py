"""Forecasting pipeline, error metrics, rolling cross-validation and error bounds.

The forecasting procedure works in three steps. First the curves are
projected on ``d`` eigenfunctions. Next the vector best linear predictor of
the next score vector is computed with the Innovations algorithm. Finally
that score prediction is mapped back to a function through the truncated
Karhunen-Loeve expansion.
"""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._accel import max_threads
from .exceptions import FarmakitError, NonStationaryError
from .farma import FarmaModel, autocovariance, simulate_replications, true_eigensystem
from .fnspace import FunctionSample, FunctionSeries, check_same_basis, fourier_design
from .fpca import EigenSystem, compute_scores, fpca
from .hsop import op_norm
from .varma import _extend_autocov, fit_varma, innovations_predict, sample_autocov

__all__ = [
    "ForecastConfig",
    "ErrorTable",
    "BoundReport",
    "TABLE1_ORDERS",
    "algorithm1",
    "functional_blp_far",
    "gamma_bound",
    "gamma_bound_operator",
    "error_metrics",
    "rolling_cv",
    "baseline_errors",
    "bound_experiment",
]

log = logging.getLogger(__name__)

# the seven (p, q) columns of the traffic study's error table
TABLE1_ORDERS = ((1, 0), (2, 0), (0, 1), (0, 2), (1, 1), (2, 1), (1, 2))

_MAE_POINTS = 1441


@dataclass(frozen=True)
class ForecastConfig:
    """Grid and evaluation window for :func:`rolling_cv`.

    ``autocov`` chooses the second moments fed to the predictor: ``"model"``
    uses those of the fitted VARMA(p, q), ``"sample"`` uses the empirical
    score autocovariances (then ``p, q`` do not affect the prediction).
    """

    d_grid: tuple = (2, 3, 4, 5, 6)
    order_grid: tuple = TABLE1_ORDERS
    horizon: int = 1
    holdout: int = 10
    cpv_threshold: float = 0.8
    autocov: str = "model"
    mae: str = "integrated"

    def __post_init__(self):
        object.__setattr__(self, "d_grid", tuple(int(d) for d in self.d_grid))
        object.__setattr__(self, "order_grid", tuple((int(p), int(q)) for p, q in self.order_grid))
        if not self.d_grid or not self.order_grid:
            raise ValueError("d_grid and order_grid must be nonempty")
        if min(self.d_grid) < 1:
            raise ValueError("d values must be positive")
        if any(p < 0 or q < 0 for p, q in self.order_grid):
            raise ValueError("orders must be nonnegative")
        if self.horizon < 1 or self.holdout < 1:
            raise ValueError("horizon and holdout must be positive")
        if self.autocov not in ("model", "sample"):
            raise ValueError(f"autocov must be 'model' or 'sample', got {self.autocov!r}")
        if self.mae not in ("integrated", "pointwise"):
            raise ValueError(f"mae must be 'integrated' or 'pointwise', got {self.mae!r}")

    @property
    def cells(self) -> list[tuple[int, int, int]]:
        return [(d, p, q) for d in self.d_grid for p, q in self.order_grid]


@dataclass
class ErrorTable:
    """Cross-validated errors, one row per ``(d, p, q)`` cell in grid order."""

    rows: list = field(default_factory=list)
    failed: dict = field(default_factory=dict)
    holdout: int = 0

    def add(self, d, p, q, rmse, mae):
        self.rows.append((int(d), int(p), int(q), float(rmse), float(mae)))

    def __len__(self):
        return len(self.rows)

    def lookup(self, d, p, q) -> tuple[float, float]:
        for row in self.rows:
            if row[:3] == (d, p, q):
                return row[3], row[4]
        raise KeyError((d, p, q))

    def argmin(self, metric: str = "rmse") -> tuple[int, int, int]:
        """Best cell; ties go to smaller ``p + q``, then smaller ``d``."""
        if not self.rows:
            raise ValueError("error table is empty")
        col = {"rmse": 3, "mae": 4}[metric]
        best = min(self.rows, key=lambda r: (r[col], r[1] + r[2], r[0]))
        return best[:3]

    def grid(self, metric: str = "rmse"):
        """``(d_values, orders, matrix)`` laid out with ``d`` down and orders across."""
        col = {"rmse": 3, "mae": 4}[metric]
        ds = sorted({r[0] for r in self.rows} | {k[0] for k in self.failed})
        orders = []
        for r in list(self.rows) + [(k[0], k[1], k[2]) for k in self.failed]:
            if (r[1], r[2]) not in orders:
                orders.append((r[1], r[2]))
        M = np.full((len(ds), len(orders)), np.nan)
        for r in self.rows:
            M[ds.index(r[0]), orders.index((r[1], r[2]))] = r[col]
        return ds, orders, M

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["d", "p", "q", "rmse", "mae"])
            for d, p, q, rmse, mae in self.rows:
                w.writerow([d, p, q, repr(rmse), repr(mae)])

    @classmethod
    def from_csv(cls, path) -> ErrorTable:
        table = cls()
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {"d", "p", "q", "rmse", "mae"} <= set(reader.fieldnames):
                raise ValueError(f"{path}: expected columns d,p,q,rmse,mae")
            for row in reader:
                table.add(int(row["d"]), int(row["p"]), int(row["q"]), float(row["rmse"]), float(row["mae"]))
        return table


@dataclass(frozen=True)
class BoundReport:
    """One row of the prediction-error bound experiment."""

    d: int
    sigma2: float
    gamma: float
    empirical_mse: float
    empirical_se: float
    tail_eigen_sum: float
    g_norms: tuple
    gap_mse: float = float("nan")

    @property
    def bound(self) -> float:
        return self.sigma2 + self.gamma

    def holds(self, n_se: float = 3.0) -> bool:
        return self.empirical_mse <= self.bound + n_se * self.empirical_se


def write_bounds_csv(reports, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["d", "sigma2", "gamma", "empirical_mse", "empirical_se"])
        for r in reports:
            w.writerow([r.d, repr(r.sigma2), repr(r.gamma), repr(r.empirical_mse), repr(r.empirical_se)])


# ---------------------------------------------------------------- algorithm

def _model_autocov(scores: np.ndarray, p: int, q: int, lags: int) -> np.ndarray:
    model = fit_varma(scores, p, q)
    if not model.stationary:
        raise NonStationaryError(
            f"fitted VARMA({p},{q}) is not stationary (spectral radius {model.spectral_radius:.4f})"
        )
    return model.autocovariance(lags)


def predict_scores(scores: np.ndarray, p: int, q: int, h: int = 1, autocov: str = "model", autocovs=None):
    """Vector best linear predictor of ``X_{n+h}`` from all rows of ``scores``."""
    S = np.asarray(scores, dtype=float)
    n = S.shape[0]
    if autocov not in ("model", "sample"):
        raise ValueError(f"autocov must be 'model' or 'sample', got {autocov!r}")
    if autocovs is None and not np.any(S):
        # a degenerate all-zero history: the only linear predictor is zero
        return np.zeros(S.shape[1])
    if autocovs is not None:
        g = autocovs
    elif autocov == "sample":
        # the block Toeplitz matrix of sample autocovariances built from N
        # d-vectors has rank at most N + m - 1 on m lags, so condition only
        # on the most recent (N - 1) // d observations
        g = sample_autocov(S, n - 1)
        m = max(1, min(n, (n - 1) // max(S.shape[1], 1)))
        S = S[n - m:]
        g = _extend_autocov(g, m + h - 1)
    else:
        g = _model_autocov(S, p, q, n + h - 1)
    pred, _ = innovations_predict(g, S, h, weights=False)
    return pred


def algorithm1(
    series: FunctionSeries,
    eig: EigenSystem,
    d: int,
    p: int,
    q: int,
    h: int = 1,
    autocov: str = "model",
    autocovs=None,
) -> FunctionSample:
    """Functional h-step forecast through a d-dimensional vector predictor.

    Parameters
    ----------
    series : FunctionSeries
        Mean-corrected observations ``X_1..X_n``.
    eig : EigenSystem
        Eigenpairs whose first ``d`` functions define the scores.
    d, p, q : int
        Truncation level and VARMA orders.
    h : int
        Forecast horizon.
    autocov : {"model", "sample"}
        Second moments of the scores: those of the fitted VARMA(p, q), or the
        sample autocovariances. In the sample case only the last
        ``(n - 1) // d`` observations are conditioned on, which keeps the
        block Toeplitz system nonsingular.
    autocovs : array, optional
        Explicit score autocovariances; overrides ``autocov``.

    Returns
    -------
    FunctionSample
        ``sum_{j<=d} (X_hat_{n+h})_j nu_j``.
    """
    check_same_basis(series.basis, eig.basis)
    scores = compute_scores(series, eig, d).scores
    pred = predict_scores(scores, p, q, h, autocov, autocovs)
    return FunctionSample(eig.vectors[:, :d] @ pred, series.basis)


def functional_blp_far(model: FarmaModel, series: FunctionSeries, h: int = 1) -> FunctionSample:
    """Exact functional best linear predictor ``sum_j phi_j X_{n+1-j}`` of a FAR(p)."""
    if model.q > 0:
        raise ValueError("functional_blp_far needs q = 0; no closed form is available for q > 0")
    if h != 1:
        raise ValueError("functional_blp_far only supports h = 1")
    check_same_basis(model.basis, series.basis)
    n = len(series)
    if n < model.p:
        raise ValueError(f"need at least p={model.p} observations, got {n}")
    out = np.zeros(model.K)
    for j, phi in enumerate(model.phis, start=1):
        out += phi.mat @ series.coeffs[n - j]
    return FunctionSample(out, model.basis)


# ---------------------------------------------------------------- bounds

def _far_check(model: FarmaModel, h: int):
    if model.q > 0:
        raise ValueError("error bounds are implemented for FAR(p) models (q = 0) only")
    if h != 1:
        raise ValueError("error bounds are implemented for h = 1 only")


def g_norms(model: FarmaModel, eig: EigenSystem, d: int) -> tuple:
    """``(sum_{l>d} ||g_i nu_l||^2)^(1/2)`` with ``g_i = phi_i`` for a FAR(p) at h = 1."""
    Vt = eig.vectors[:, d:]
    return tuple(float(np.linalg.norm(op.mat @ Vt)) for op in model.phis)


def gamma_bound(model: FarmaModel, eig: EigenSystem, d: int, n: int | None = None, h: int = 1,
                squared: bool = False) -> float:
    """Excess-error term for Hilbert-Schmidt predictor operators.

    ``sum_{l>d} lambda_l * (4 g + 1)`` with
    ``g = sum_i (sum_{l>d} ||g_i nu_l||^2)^(1/2)``. The Cauchy-Schwarz chain
    behind it yields ``4 g**2``; ``squared=True`` uses that form instead.
    ``eig`` should hold the true eigenpairs of ``C_X``.
    """
    _far_check(model, h)
    check_same_basis(model.basis, eig.basis)
    if n is not None and n < model.p:
        raise ValueError(f"n must be at least p={model.p}")
    tail = float(eig.eigenvalues[d:].sum())
    g = sum(g_norms(model, eig, d))
    return tail * (4 * (g * g if squared else g) + 1)


def gamma_bound_operator(model: FarmaModel, eig: EigenSystem, d: int, n: int | None = None, h: int = 1) -> float:
    """Excess-error term for bounded predictor operators.

    ``4 (sum_i ||g_i||)^2 (sum_{l>d} sqrt(lambda_l))^2 + sum_{l>d} lambda_l``.
    """
    _far_check(model, h)
    lam = eig.eigenvalues[d:]
    s = sum(op_norm(op) for op in model.phis)
    return float(4 * s ** 2 * np.sqrt(lam).sum() ** 2 + lam.sum())


def bound_experiment(
    model: FarmaModel,
    d_values,
    n: int = 50,
    reps: int = 2000,
    seed=None,
    h: int = 1,
    burn_in: int = 200,
    squared: bool = False,
) -> list[BoundReport]:
    """Monte Carlo check of ``E||X_{n+1} - X_hat_{n+1}||^2 <= sigma^2 + gamma``.

    The predictor uses the true eigenpairs and the true score
    autocovariances, so the only approximation is the truncation at ``d``.
    All values of ``d`` share the same simulated paths.
    """
    _far_check(model, h)
    eig = true_eigensystem(model)
    C = autocovariance(model, n)
    X, _ = simulate_replications(model, reps, n + 1, burn_in, seed)
    past, future = X[:, :n], X[:, n]
    blp = past[:, -model.p:][:, ::-1] if model.p else None
    oracle = np.zeros_like(future)
    for j, phi in enumerate(model.phis):
        oracle += blp[:, j] @ phi.mat.T
    sigma2 = model.sigma2
    out = []
    for d in d_values:
        Vd = eig.vectors[:, :d]
        g = np.einsum("ka,hkl,lb->hab", Vd, C, Vd)
        _, w = innovations_predict(g, np.zeros((n, d)), h)
        pred = np.einsum("iab,rib->ra", w.coefs, past @ Vd)
        err = future - pred @ Vd.T
        sq = (err ** 2).sum(axis=1)
        gap = ((pred - oracle @ Vd) ** 2).sum(axis=1)
        out.append(BoundReport(
            d=int(d),
            sigma2=sigma2,
            gamma=gamma_bound(model, eig, d, n, h, squared),
            empirical_mse=float(sq.mean()),
            empirical_se=float(sq.std(ddof=1) / np.sqrt(reps)),
            tail_eigen_sum=float(eig.eigenvalues[d:].sum()),
            g_norms=g_norms(model, eig, d),
            gap_mse=float(gap.mean()),
        ))
    return out


# ---------------------------------------------------------------- evaluation

def _mae_design(basis, mode):
    if mode == "integrated":
        t = np.linspace(0.0, 1.0, _MAE_POINTS)
    else:
        t = basis.grid
    return t, fourier_design(t, basis.size)


def error_metrics(actual: FunctionSeries, predicted: FunctionSeries, mae: str = "integrated") -> tuple[float, float]:
    """``(RMSE, MAE)`` of functional forecast errors.

    RMSE is ``sqrt(mean ||X - X_hat||^2)`` (exact in coordinates). MAE is the
    mean over days of ``int_0^1 |X - X_hat|`` by the trapezoid rule on 1441
    points, or with ``mae="pointwise"`` the mean absolute error over the
    basis grid.
    """
    check_same_basis(actual.basis, predicted.basis)
    if len(actual) != len(predicted):
        raise ValueError(f"length mismatch: {len(actual)} actual vs {len(predicted)} predicted")
    if len(actual) == 0:
        raise ValueError("need at least one forecast")
    if mae not in ("integrated", "pointwise"):
        raise ValueError(f"mae must be 'integrated' or 'pointwise', got {mae!r}")
    E = actual.coeffs - predicted.coeffs
    rmse = float(np.sqrt((E ** 2).sum(axis=1).mean()))
    t, B = _mae_design(actual.basis, mae)
    vals = np.abs(E @ B.T)
    if mae == "integrated":
        per_day = np.trapezoid(vals, t, axis=1) if hasattr(np, "trapezoid") else np.trapz(vals, t, axis=1)
    else:
        per_day = vals.mean(axis=1)
    return rmse, float(per_day.mean())


def _cell_forecast(centered_scores, eigvecs, d, p, q, h, autocov):
    pred = predict_scores(centered_scores[:, :d], p, q, h, autocov)
    return eigvecs[:, :d] @ pred


def rolling_cv(series: FunctionSeries, config: ForecastConfig, eig: EigenSystem | None = None,
               threads: int | None = None) -> ErrorTable:
    """Rolling-origin evaluation of every ``(d, p, q)`` cell.

    For each of the last ``config.holdout`` positions ``n`` the mean and the
    eigenpairs are estimated from ``X_1..X_{n-h}`` (unless ``eig`` is given,
    which freezes the eigenbasis) and ``X_n`` is forecast ``h`` steps ahead.
    A cell that fails in any window is listed in ``failed`` instead of rows.
    """
    N = len(series)
    h = config.horizon
    if config.holdout >= N:
        raise ValueError(f"holdout {config.holdout} must be smaller than the series length {N}")
    first = N - config.holdout
    if first - h + 1 < 3:
        raise ValueError("training window is too short")
    cells = config.cells
    K = series.basis.size
    if max(config.d_grid) > K:
        raise ValueError(f"d values must not exceed K={K}")
    targets = np.empty((config.holdout, K))
    preds = {c: np.empty((config.holdout, K)) for c in set(cells)}
    failed: dict = {}
    cap = max_threads() if threads is None else min(int(threads), max_threads())
    workers = max(1, min(cap, len(cells)))

    for t_i, target in enumerate(range(first, N)):
        train = series[: target - h + 1]
        mean = train.mean().coeffs
        centered = FunctionSeries(train.coeffs - mean, series.basis, train.start)
        window_eig = eig if eig is not None else fpca(centered)[0]
        scores = centered.coeffs @ window_eig.vectors
        targets[t_i] = series.coeffs[target]

        def run(cell, scores=scores, V=window_eig.vectors):
            d, p, q = cell
            return _cell_forecast(scores, V, d, p, q, h, config.autocov)

        todo = [c for c in dict.fromkeys(cells) if c not in failed]
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                futures = {c: pool.submit(run, c) for c in todo}
                results = {}
                for c in todo:
                    try:
                        results[c] = futures[c].result()
                    except (FarmakitError, ValueError, np.linalg.LinAlgError) as exc:
                        results[c] = exc
        else:
            results = {}
            for c in todo:
                try:
                    results[c] = run(c)
                except (FarmakitError, ValueError, np.linalg.LinAlgError) as exc:
                    results[c] = exc
        for c in todo:
            r = results[c]
            if isinstance(r, Exception):
                failed[c] = f"window ending {train.index[-1]}: {r}"
                log.info("cell %s failed: %s", c, r)
            else:
                preds[c][t_i] = mean + r

    table = ErrorTable(holdout=config.holdout)
    actual = FunctionSeries(targets, series.basis)
    for c in cells:
        if c in failed:
            continue
        rmse, mae = error_metrics(actual, FunctionSeries(preds[c], series.basis), config.mae)
        table.add(*c, rmse, mae)
    table.failed = {c: failed[c] for c in dict.fromkeys(cells) if c in failed}
    return table


def baseline_errors(series: FunctionSeries, holdout: int, h: int = 1, mae: str = "integrated") -> dict:
    """RMSE/MAE of the last-value and training-mean forecasts over the same holdout."""
    N = len(series)
    if not 1 <= holdout < N - h + 1:
        raise ValueError("invalid holdout")
    targets, last, avg = [], [], []
    for target in range(N - holdout, N):
        train = series.coeffs[: target - h + 1]
        targets.append(series.coeffs[target])
        last.append(train[-1])
        avg.append(train.mean(axis=0))
    actual = FunctionSeries(np.array(targets), series.basis)
    return {
        "last_value": error_metrics(actual, FunctionSeries(np.array(last), series.basis), mae),
        "mean": error_metrics(actual, FunctionSeries(np.array(avg), series.basis), mae),
    }


def holdout_forecast(series: FunctionSeries, d: int, p: int, q: int, holdout: int, h: int = 1,
                     autocov: str = "model", mae: str = "integrated") -> tuple[float, float]:
    """RMSE/MAE of one ``(d, p, q)`` cell over the holdout, with per-window re-estimation."""
    cfg = ForecastConfig((d,), ((p, q),), h, holdout, autocov=autocov, mae=mae)
    table = rolling_cv(series, cfg, threads=1)
    if table.failed:
        raise FarmakitError(next(iter(table.failed.values())))
    return table.lookup(d, p, q)
