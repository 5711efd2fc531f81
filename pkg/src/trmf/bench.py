"""Grid-search benchmark harness behind the ``bench`` CLI subcommand.

Two tasks are supported. ``forecast`` rolls trailing windows over the
series, refits every method at every grid point inside each window, and
pools the test entries of all windows before computing metrics. ``impute``
hides random blocks of entries, fits on the remainder, and scores the
reconstruction of the hidden entries. Either way the report carries one
row per (method, grid point, window), one pooled row per (method, grid
point), and per-method best rows, mirroring a grid search that reports the
best normalized deviation and best normalized RMSE.

Grid points and windows run in a worker pool capped by TRMF_THREADS;
results are merged by task key, so reports are byte-stable regardless of
worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .baselines import (
    fit_ar1_full,
    fit_mean,
    fit_svd_ar1,
    fit_tcf,
    forecast_baseline,
    impute_baseline,
)
from .data import SplitSpec, occlude_blocks, rolling_splits
from .exceptions import MissingValuesUnsupported, TrmfError
from .forecast import forecast_series, impute
from .metrics import nd as nd_metric
from .metrics import nrmse as nrmse_metric
from .model import ARWeights, Hyperparams, ObservedSeries, fit
from .temporal import LagSet

CHAIN_LAGS = LagSet((1,))

FORECAST_METHODS = ("trmf", "svd_ar1", "tcf", "ar1", "dlm", "mean")
IMPUTE_METHODS = ("trmf", "tcf", "mf", "dlm", "mean")


@dataclass(frozen=True)
class GridPoint:
    k: int | None = None
    lam_f: float | None = None
    lam_x: float | None = None
    lam_w: float | None = None


@dataclass(frozen=True)
class BenchConfig:
    task: str  # forecast | impute
    lag_set: LagSet
    methods: tuple[str, ...]
    grid_k: tuple[int, ...] = (2, 4, 8)
    grid_lambda: tuple[float, ...] = (50.0, 5.0, 0.5, 0.05)
    grid_lambda_f: tuple[float, ...] | None = None  # None means tied to grid_lambda
    grid_lambda_x: tuple[float, ...] | None = None
    grid_lambda_w: tuple[float, ...] | None = None
    horizon: int = 1
    n_windows: int = 10
    observed_fraction: float = 0.5
    block_len: int = 2
    eta: float = 1.0
    max_outer_iters: int = 25
    rel_tol: float = 1e-3
    cg_tol: float = 1e-6
    cg_max_iter: int = 200
    seed: int = 0


@dataclass(frozen=True)
class ReportRow:
    task: str
    row: str  # window | grid | best
    method: str
    point: GridPoint
    split_id: str
    nd: float | None
    nrmse: float | None
    n_test: int


@dataclass
class BenchResult:
    rows: list[ReportRow] = field(default_factory=list)

    def best(self, method: str, metric: str = "nd") -> float | None:
        for row in self.rows:
            if row.row == "best" and row.method == method:
                return getattr(row, metric)
        return None


def worker_count() -> int:
    raw = os.environ.get("TRMF_THREADS", "")
    if raw.strip():
        return max(1, int(raw))
    return os.cpu_count() or 1


def method_grid(method: str, cfg: BenchConfig) -> list[GridPoint]:
    lams_f = cfg.grid_lambda_f or cfg.grid_lambda
    lams_x = cfg.grid_lambda_x or cfg.grid_lambda
    lams_w = cfg.grid_lambda_w or cfg.grid_lambda
    tied = (
        cfg.grid_lambda_f is None
        and cfg.grid_lambda_x is None
        and cfg.grid_lambda_w is None
    )
    if method in ("mean", "dlm"):
        return [GridPoint()]
    if method == "ar1":
        return [GridPoint(lam_f=lam) for lam in cfg.grid_lambda]
    if method == "svd_ar1":
        return [GridPoint(k=k, lam_f=lam) for k in cfg.grid_k for lam in cfg.grid_lambda]
    if method in ("trmf", "tcf", "mf"):
        if tied:
            return [
                GridPoint(k=k, lam_f=lam, lam_x=lam, lam_w=lam)
                for k in cfg.grid_k
                for lam in cfg.grid_lambda
            ]
        return [
            GridPoint(k=k, lam_f=lf, lam_x=lx, lam_w=lw)
            for k in cfg.grid_k
            for lf in lams_f
            for lx in lams_x
            for lw in lams_w
        ]
    raise TrmfError(f"unknown method {method!r}")


def _hyper(cfg: BenchConfig, point: GridPoint) -> Hyperparams:
    return Hyperparams(
        k=point.k,
        lambda_f=point.lam_f,
        lambda_x=point.lam_x,
        lambda_w=point.lam_w,
        eta=cfg.eta,
        max_outer_iters=cfg.max_outer_iters,
        rel_tol=cfg.rel_tol,
        cg_tol=cfg.cg_tol,
        cg_max_iter=cfg.cg_max_iter,
        seed=cfg.seed,
    )


def slice_series(data: ObservedSeries, stop: int) -> ObservedSeries:
    return ObservedSeries(
        values=data.values[:, :stop], mask=data.mask[:, :stop], ids=data.ids
    )


def _forecast_window(
    method: str, point: GridPoint, cfg: BenchConfig, train: ObservedSeries, horizon: int
) -> np.ndarray:
    if method == "trmf":
        model = fit(train, _hyper(cfg, point), cfg.lag_set)
        return forecast_series(model, horizon).y_new
    if method == "tcf":
        return forecast_baseline(fit_tcf(train, _hyper(cfg, point)), horizon)
    if method == "mf":
        pinned = ARWeights.zeros(point.k, CHAIN_LAGS)
        model = fit(
            train,
            _hyper(cfg, replace(point, lam_w=0.0)),
            CHAIN_LAGS,
            fixed_weights=pinned,
        )
        return forecast_series(model, horizon).y_new
    if method == "ar1":
        return forecast_baseline(fit_ar1_full(train, point.lam_f), horizon)
    if method == "svd_ar1":
        return forecast_baseline(fit_svd_ar1(train, point.k, point.lam_f), horizon)
    if method == "mean":
        return forecast_baseline(fit_mean(train), horizon)
    raise MissingValuesUnsupported(f"method {method!r} is not runnable here")


def _run_forecast_point(
    data: ObservedSeries, cfg: BenchConfig, splits: SplitSpec, method: str, point: GridPoint
) -> list[ReportRow]:
    rows: list[ReportRow] = []
    pooled_pred: list[np.ndarray] = []
    pooled_truth: list[np.ndarray] = []
    for train_end, horizon in splits.windows:
        train = slice_series(data, train_end)
        test_mask = data.mask[:, train_end : train_end + horizon]
        truth = data.values[:, train_end : train_end + horizon][test_mask]
        pred_mat = _forecast_window(method, point, cfg, train, horizon)
        pred = pred_mat[test_mask]
        rows.append(
            ReportRow(
                cfg.task,
                "window",
                method,
                point,
                split_id=str(train_end),
                nd=nd_metric(pred, truth),
                nrmse=nrmse_metric(pred, truth),
                n_test=truth.size,
            )
        )
        pooled_pred.append(pred)
        pooled_truth.append(truth)
    pred = np.concatenate(pooled_pred)
    truth = np.concatenate(pooled_truth)
    rows.append(
        ReportRow(
            cfg.task,
            "grid",
            method,
            point,
            split_id="pooled",
            nd=nd_metric(pred, truth),
            nrmse=nrmse_metric(pred, truth),
            n_test=truth.size,
        )
    )
    return rows


def _impute_predictions(
    method: str,
    point: GridPoint,
    cfg: BenchConfig,
    occluded: ObservedSeries,
    targets: list[tuple[int, int]],
) -> list[tuple[int, int, float]]:
    if method == "trmf":
        model = fit(occluded, _hyper(cfg, point), cfg.lag_set)
        return impute(model, targets)
    if method == "tcf":
        return impute_baseline(fit_tcf(occluded, _hyper(cfg, point)), targets)
    if method == "mf":
        pinned = ARWeights.zeros(point.k, CHAIN_LAGS)
        model = fit(
            occluded,
            _hyper(cfg, replace(point, lam_w=0.0)),
            CHAIN_LAGS,
            fixed_weights=pinned,
        )
        return impute(model, targets)
    if method == "mean":
        return impute_baseline(fit_mean(occluded), targets)
    raise MissingValuesUnsupported(f"method {method!r} cannot impute")


def _run_impute_point(
    data: ObservedSeries,
    cfg: BenchConfig,
    occluded: ObservedSeries,
    targets: list[tuple[int, int]],
    truth: np.ndarray,
    method: str,
    point: GridPoint,
) -> list[ReportRow]:
    triples = _impute_predictions(method, point, cfg, occluded, targets)
    pred = np.array([v for _, _, v in triples])
    return [
        ReportRow(
            cfg.task,
            "grid",
            method,
            point,
            split_id="occluded",
            nd=nd_metric(pred, truth),
            nrmse=nrmse_metric(pred, truth),
            n_test=truth.size,
        )
    ]


def _unsupported_rows(task: str, method: str) -> list[ReportRow]:
    return [
        ReportRow(task, "grid", method, GridPoint(), "-", None, None, 0),
        ReportRow(task, "best", method, GridPoint(), "-", None, None, 0),
    ]


def _best_rows(task: str, method: str, rows: list[ReportRow]) -> list[ReportRow]:
    pooled = [r for r in rows if r.row == "grid" and r.nd is not None]
    if not pooled:
        return [ReportRow(task, "best", method, GridPoint(), "-", None, None, 0)]
    best_nd = min(r.nd for r in pooled)
    best_nrmse = min(r.nrmse for r in pooled)
    return [
        ReportRow(
            task,
            "best",
            method,
            GridPoint(),
            split_id="grid",
            nd=best_nd,
            nrmse=best_nrmse,
            n_test=pooled[0].n_test,
        )
    ]


def run_bench(data: ObservedSeries, cfg: BenchConfig) -> BenchResult:
    """Execute the configured protocol over every method and grid point."""
    if cfg.task == "forecast":
        splits = rolling_splits(data.t_count, cfg.horizon, cfg.n_windows)

        def runner(method: str, point: GridPoint) -> list[ReportRow]:
            return _run_forecast_point(data, cfg, splits, method, point)

    elif cfg.task == "impute":
        occluded = occlude_blocks(
            data, cfg.observed_fraction, cfg.block_len, cfg.seed
        )
        hidden = data.mask & ~occluded.mask
        targets = [(int(i), int(t)) for i, t in zip(*np.nonzero(hidden))]
        truth = data.values[hidden]

        def runner(method: str, point: GridPoint) -> list[ReportRow]:
            return _run_impute_point(data, cfg, occluded, targets, truth, method, point)

    else:
        raise TrmfError(f"unknown task {cfg.task!r}")

    tasks: list[tuple[str, GridPoint]] = []
    for method in cfg.methods:
        for point in method_grid(method, cfg):
            tasks.append((method, point))

    def safe_runner(item: tuple[str, GridPoint]) -> list[ReportRow] | None:
        method, point = item
        try:
            return runner(method, point)
        except MissingValuesUnsupported:
            return None

    workers = worker_count()
    if workers > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(safe_runner, tasks))
    else:
        outcomes = [safe_runner(item) for item in tasks]

    result = BenchResult()
    for method in cfg.methods:
        method_rows: list[ReportRow] = []
        supported = True
        for (m, _), rows in zip(tasks, outcomes):
            if m != method:
                continue
            if rows is None:
                supported = False
                break
            method_rows.extend(rows)
        if not supported or not method_rows:
            result.rows.extend(_unsupported_rows(cfg.task, method))
            continue
        result.rows.extend(method_rows)
        result.rows.extend(_best_rows(cfg.task, method, method_rows))
    return result


REPORT_HEADER = (
    "task,row,method,k,lambda_f,lambda_x,lambda_w,split_id,nd,nrmse,n_test"
)


def report_csv(result: BenchResult) -> str:
    """Render rows as deterministic CSV ('-' marks not-applicable cells)."""

    def cell(value) -> str:
        if value is None:
            return "-"
        if isinstance(value, float):
            return repr(value)
        return str(value)

    lines = [REPORT_HEADER]
    for r in result.rows:
        lines.append(
            ",".join(
                [
                    r.task,
                    r.row,
                    r.method,
                    cell(r.point.k),
                    cell(r.point.lam_f),
                    cell(r.point.lam_x),
                    cell(r.point.lam_w),
                    r.split_id,
                    cell(r.nd),
                    cell(r.nrmse),
                    str(r.n_test),
                ]
            )
        )
    return "\n".join(lines) + "\n"
