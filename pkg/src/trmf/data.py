"""Synthetic data generation, CSV ingestion, occlusion masks, rolling
splits, and model (de)serialization."""

from __future__ import annotations

import csv
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import (
    CorruptFile,
    ParseError,
    RaggedRows,
    TooManyWindows,
    VersionMismatch,
)
from .model import ARWeights, Hyperparams, ObservedSeries, TrmfModel
from .temporal import LagSet

MODEL_MAGIC = "TRMF1"


@dataclass(eq=False)
class SyntheticTruth:
    """Fully observed synthetic data plus everything that generated it."""

    y: ObservedSeries
    f_true: np.ndarray
    x_true: np.ndarray
    w_true: ARWeights
    sigma: float


@dataclass(frozen=True)
class SplitSpec:
    """Rolling evaluation windows as (train_end, horizon) pairs; the test
    range of a window is columns [train_end, train_end + horizon)."""

    windows: tuple[tuple[int, int], ...]


def companion_spectral_radius(lag_set: LagSet, wbar: np.ndarray) -> float:
    """Spectral radius of the one-row-of-lags companion matrix."""
    l_max = lag_set.l_max
    comp = np.zeros((l_max, l_max))
    for l, w in zip(lag_set.lags, wbar):
        comp[0, l - 1] = w
    if l_max > 1:
        comp[np.arange(1, l_max), np.arange(l_max - 1)] = 1.0
    return float(np.max(np.abs(np.linalg.eigvals(comp))))


def gen_synthetic(
    seed: int,
    n: int = 16,
    t_count: int = 128,
    k: int = 4,
    lags: tuple[int, ...] = (1, 8),
    sigma: float = 0.1,
) -> SyntheticTruth:
    """Latent AR process with diagonal lag weights, mapped up by a random
    loading matrix, plus white observation noise.

    Weights are drawn uniformly in [-0.8, 0.8] per latent dimension and
    redrawn until the companion matrix is stable, so the burn-in (4 * l_max
    discarded steps) leaves a near-stationary series.
    """
    lag_set = LagSet(tuple(sorted(int(l) for l in lags)))
    if t_count <= lag_set.l_max:
        raise ValueError("t_count must exceed the largest lag")
    rng = np.random.default_rng(seed)

    w = np.zeros((k, len(lag_set)))
    for r in range(k):
        while True:
            cand = rng.uniform(-0.8, 0.8, size=len(lag_set))
            if companion_spectral_radius(lag_set, cand) < 1.0:
                w[r] = cand
                break

    l_max = lag_set.l_max
    burn = 4 * l_max
    x = np.zeros((k, burn + t_count))
    x[:, :l_max] = rng.standard_normal((k, l_max))
    for t in range(l_max, burn + t_count):
        step = sigma * rng.standard_normal(k)
        for a, l in enumerate(lag_set.lags):
            step += w[:, a] * x[:, t - l]
        x[:, t] = step
    x_true = x[:, burn:].copy()

    f_true = rng.standard_normal((n, k))
    y_values = f_true @ x_true + sigma * rng.standard_normal((n, t_count))
    y = ObservedSeries(values=y_values, mask=np.ones((n, t_count), dtype=bool))
    return SyntheticTruth(
        y=y, f_true=f_true, x_true=x_true, w_true=ARWeights(lag_set, w), sigma=sigma
    )


def _parse_cell(cell: str, row: int, col: int) -> float:
    text = cell.strip()
    if text == "" or text.lower() == "nan":
        return np.nan
    try:
        value = float(text)
    except ValueError as exc:
        raise ParseError(f"cannot parse {cell!r} as a number", row, col) from exc
    if not np.isfinite(value):
        raise ParseError(f"non-finite value {cell!r}", row, col)
    return value


def load_csv(
    path: str | Path,
    aggregate_block: int | None = None,
    aggregate: str = "mean",
) -> ObservedSeries:
    """Read a series matrix: rows are series, columns are time points.

    Empty cells and the literal "NaN" mark unobserved entries. A header row
    whose first cell is "id" makes the first column a series id. With
    ``aggregate_block`` = b, consecutive blocks of b columns are collapsed by
    sum or mean (a block counts as observed only when all its cells are);
    a trailing partial block is dropped.
    """
    with open(path, newline="", encoding="utf-8") as handle:
        rows = list(csv.reader(handle))
    if not rows:
        raise ParseError("empty file")
    ids = None
    data_rows = rows
    has_ids = rows[0] and rows[0][0].strip() == "id"
    if has_ids:
        data_rows = rows[1:]
        ids = [row[0] for row in data_rows]
        if not data_rows:
            raise ParseError("header without data rows")
    width = len(data_rows[0])
    values = []
    for r, row in enumerate(data_rows):
        if len(row) != width:
            raise RaggedRows(
                f"row has {len(row)} cells, expected {width}", r + 1 + int(has_ids)
            )
        start = 1 if has_ids else 0
        values.append(
            [
                _parse_cell(cell, r + 1 + int(has_ids), c + 1 + start)
                for c, cell in enumerate(row[start:])
            ]
        )
    dense = np.array(values, dtype=float)
    if dense.shape[1] == 0:
        raise ParseError("no value columns")

    if aggregate_block is not None:
        if aggregate_block < 1:
            raise ValueError("aggregate_block must be >= 1")
        if aggregate not in ("sum", "mean"):
            raise ValueError("aggregate must be 'sum' or 'mean'")
        n_blocks = dense.shape[1] // aggregate_block
        trimmed = dense[:, : n_blocks * aggregate_block]
        grouped = trimmed.reshape(dense.shape[0], n_blocks, aggregate_block)
        agg = grouped.sum(axis=2) if aggregate == "sum" else grouped.mean(axis=2)
        dense = np.where(np.isnan(grouped).any(axis=2), np.nan, agg)
    return ObservedSeries.from_dense(dense, ids=ids)


def save_csv(data: ObservedSeries, path: str | Path) -> None:
    """Inverse of load_csv: empty cells for unobserved entries, full-precision
    floats elsewhere."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        if data.ids is not None:
            writer.writerow(["id"] + [str(t) for t in range(data.t_count)])
        for i in range(data.n):
            cells = [
                repr(data.values[i, t]) if data.mask[i, t] else ""
                for t in range(data.t_count)
            ]
            if data.ids is not None:
                cells = [data.ids[i]] + cells
            writer.writerow(cells)


def occlude_blocks(
    data: ObservedSeries, observed_fraction: float, block_len: int, seed: int
) -> ObservedSeries:
    """Hide random non-overlapping within-row runs of ``block_len`` entries
    until at most ``observed_fraction`` of the matrix remains observed.

    Blocks truncate at row ends; a sampled block overlapping an existing
    hole is rejected and resampled, so nothing is removed twice. The final
    observed count lands within one block of the target.
    """
    if not 0.0 < observed_fraction < 1.0:
        raise ValueError("observed_fraction must be strictly between 0 and 1")
    if block_len < 1:
        raise ValueError("block_len must be >= 1")
    rng = np.random.default_rng(seed)
    mask = data.mask.copy()
    n, t_count = mask.shape
    target = int(np.floor(observed_fraction * n * t_count))
    misses = 0
    while mask.sum() > target:
        i = int(rng.integers(n))
        s = int(rng.integers(t_count))
        stop = min(s + block_len, t_count)
        if mask[i, s:stop].all():
            mask[i, s:stop] = False
            misses = 0
            continue
        misses += 1
        if misses >= 10_000:
            # occupancy too fragmented for rejection sampling: take the first
            # still-observed run, clipped to block_len
            hit = False
            for row in range(n):
                observed = np.flatnonzero(mask[row])
                if observed.size:
                    s = int(observed[0])
                    mask[row, s : min(s + block_len, t_count)] = False
                    hit = True
                    break
            if not hit:
                break
            misses = 0
    return ObservedSeries(values=data.values, mask=mask, ids=data.ids)


def rolling_splits(t_count: int, horizon: int, n_windows: int) -> SplitSpec:
    """Trailing evaluation windows: the last ``n_windows * horizon`` steps,
    each window forecasting ``horizon`` steps past its train_end."""
    if horizon < 1 or n_windows < 1:
        raise ValueError("horizon and n_windows must be >= 1")
    first_train_end = t_count - n_windows * horizon
    if first_train_end < 1:
        raise TooManyWindows(
            f"{n_windows} windows of horizon {horizon} do not fit in {t_count} steps"
        )
    windows = tuple(
        (first_train_end + j * horizon, horizon) for j in range(n_windows)
    )
    return SplitSpec(windows=windows)


def _model_to_bytes(model: TrmfModel) -> bytes:
    h = model.hyper
    header_lines = [
        MODEL_MAGIC,
        f"dims {model.n} {model.k} {model.t_count}",
        "lags " + " ".join(str(l) for l in model.ar.lag_set.lags),
        "hyper "
        + " ".join(
            [
                str(h.k),
                repr(h.lambda_f),
                repr(h.lambda_x),
                repr(h.lambda_w),
                repr(h.eta),
                str(h.max_outer_iters),
                repr(h.rel_tol),
                repr(h.cg_tol),
                str(h.cg_max_iter),
                str(h.seed),
            ]
        ),
        f"trace {len(model.fit_trace)}",
        "end",
        "",
    ]
    blob = "\n".join(header_lines).encode("utf-8")
    for arr in (model.f_mat, model.x_mat, model.ar.w):
        blob += np.ascontiguousarray(arr, dtype="<f8").tobytes()
    trace = np.array(
        [[float(it), obj] for it, obj in model.fit_trace], dtype="<f8"
    ).reshape(-1, 2)
    blob += trace.tobytes()
    return blob + struct.pack("<I", zlib.crc32(blob))


def save_model(model: TrmfModel, path: str | Path) -> None:
    Path(path).write_bytes(_model_to_bytes(model))


def _model_from_bytes(blob: bytes) -> TrmfModel:
    if len(blob) < 4:
        raise CorruptFile("file too short")
    body, crc_bytes = blob[:-4], blob[-4:]
    if struct.unpack("<I", crc_bytes)[0] != zlib.crc32(body):
        raise CorruptFile("checksum mismatch")
    try:
        header_end = body.index(b"\nend\n") + len(b"\nend\n")
    except ValueError as exc:
        raise CorruptFile("missing header terminator") from exc
    lines = body[:header_end].decode("utf-8").splitlines()
    if lines[0] != MODEL_MAGIC:
        raise VersionMismatch(f"unknown format {lines[0]!r}")
    fields = {}
    for line in lines[1:-1]:
        key, _, rest = line.partition(" ")
        fields[key] = rest.split()
    try:
        n, k, t_count = (int(v) for v in fields["dims"])
        lag_set = LagSet(tuple(int(l) for l in fields["lags"]))
        hv = fields["hyper"]
        hyper = Hyperparams(
            k=int(hv[0]),
            lambda_f=float(hv[1]),
            lambda_x=float(hv[2]),
            lambda_w=float(hv[3]),
            eta=float(hv[4]),
            max_outer_iters=int(hv[5]),
            rel_tol=float(hv[6]),
            cg_tol=float(hv[7]),
            cg_max_iter=int(hv[8]),
            seed=int(hv[9]),
        )
        trace_len = int(fields["trace"][0])
    except (KeyError, ValueError, IndexError) as exc:
        raise CorruptFile(f"malformed header: {exc}") from exc

    counts = [n * k, k * t_count, k * len(lag_set), 2 * trace_len]
    payload = body[header_end:]
    if len(payload) != 8 * sum(counts):
        raise CorruptFile(
            f"payload is {len(payload)} bytes, expected {8 * sum(counts)}"
        )
    arrays = []
    offset = 0
    for count in counts:
        arrays.append(np.frombuffer(payload, dtype="<f8", count=count, offset=offset))
        offset += 8 * count
    f_mat = arrays[0].reshape(n, k).copy()
    x_mat = arrays[1].reshape(k, t_count).copy()
    w = arrays[2].reshape(k, len(lag_set)).copy()
    trace_pairs = arrays[3].reshape(trace_len, 2)
    trace = [(int(it), float(obj)) for it, obj in trace_pairs]
    return TrmfModel(f_mat, x_mat, ARWeights(lag_set, w), hyper, fit_trace=trace)


def load_model(path: str | Path) -> TrmfModel:
    return _model_from_bytes(Path(path).read_bytes())
