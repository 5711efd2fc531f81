"""Autoregressive temporal regularization and its signed-graph form.

The regularizer on one latent series x (length T, 0-based here) is

    TR(x) = 1/2 * sum_{t >= l_max} (x[t] - sum_l w_l x[t-l])^2
            + eta/2 * ||x||^2,

with l ranging over a lag set of positive offsets.  Absorbing the target
into the lag set (offset 0 with weight -1) turns each squared residual into
a quadratic form whose cross terms define a weighted *signed* graph over
time points: every pair of lags at distance d contributes an edge of weight
-w_l * w_{l-d} between times t and t+d, and the leftover squares collect
into a diagonal correction.  Near the ends of the series some residuals do
not exist, so edge and diagonal values carry boundary indicators; away from
the boundary the diagonal is the constant (sum of augmented weights)^2.

This module builds that graph, evaluates both sides of the identity

    TR(x) = [graph quadratic + ridge] + 1/2 * x' D x,

and exposes a matrix-free product with the (constant) Hessian of TR, which
is what the latent-series update of the factorization model feeds to CG.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionMismatch, SeriesTooShort

# graph weights with magnitude below this are structural zeros
PATTERN_TOL = 1e-12


@dataclass(frozen=True)
class LagSet:
    """Sorted distinct positive lag offsets."""

    lags: tuple[int, ...]

    def __post_init__(self):
        if len(self.lags) == 0:
            raise ValueError("lag set must be nonempty")
        if any(int(l) != l or l < 1 for l in self.lags):
            raise ValueError("lags must be positive integers")
        if any(b <= a for a, b in zip(self.lags, self.lags[1:])):
            raise ValueError("lags must be strictly increasing")

    @property
    def l_max(self) -> int:
        return self.lags[-1]

    @property
    def m(self) -> int:
        """First (1-based) time index with a full set of predecessors."""
        return 1 + self.l_max

    def __len__(self) -> int:
        return len(self.lags)


@dataclass(eq=False)
class LagWeights:
    """Weights for one latent series, aligned with its lag set."""

    lag_set: LagSet
    wbar: np.ndarray

    def __post_init__(self):
        self.wbar = np.asarray(self.wbar, dtype=float)
        if self.wbar.shape != (len(self.lag_set),):
            raise DimensionMismatch(
                f"expected {len(self.lag_set)} weights, got shape {self.wbar.shape}"
            )

    def augmented(self) -> tuple[np.ndarray, np.ndarray]:
        """Lags and weights extended with offset 0 at weight -1."""
        lags = np.concatenate(([0], np.asarray(self.lag_set.lags)))
        weights = np.concatenate(([-1.0], self.wbar))
        return lags, weights


@dataclass(eq=False)
class TemporalGraph:
    """Signed weighted graph over time points plus its diagonal correction.

    ``edges`` maps (t, d) with 0-based t and distance d >= 1 to the weight of
    the edge between times t and t+d. Immutable by convention once built.
    """

    t_count: int
    edges: dict[tuple[int, int], float]
    diag: np.ndarray


def delta_set(lag_set: LagSet, d: int) -> set[int]:
    """Augmented lags l such that l - d is also an augmented lag.

    Nonempty exactly when the induced graph has edges at distance d.
    """
    if d < 1:
        raise ValueError("distance must be >= 1")
    augmented = {0, *lag_set.lags}
    return {l for l in augmented if l - d in augmented}


def build_ar_graph(lag_set: LagSet, weights: LagWeights, t_count: int) -> TemporalGraph:
    """Materialize the signed graph and diagonal induced by the AR penalty.

    Edge (t, t+d) gets the sum of -w_l * w_{l-d} over lags l at distance d,
    each term gated by the boundary indicator that the residual anchored at
    t + l actually exists. The diagonal collects the leftover squares the
    same way: summing w_l * w_{l'} over all ordered augmented-lag pairs with
    the indicator evaluated at the first index. For interior t this
    telescopes to (sum of augmented weights)^2.
    """
    l_max = lag_set.l_max
    if t_count < lag_set.m:
        raise SeriesTooShort(f"need at least {lag_set.m} time points, got {t_count}")
    aug_lags, aug_w = weights.augmented()
    w_of = dict(zip(aug_lags.tolist(), aug_w.tolist()))

    # residual anchored at 1-based t+l exists iff l_max <= (t0 + l) <= t_count - 1
    # in 0-based time t0; precompute indicator bounds once
    def anchored(t0: int, l: int) -> bool:
        return l_max <= t0 + l <= t_count - 1

    edges: dict[tuple[int, int], float] = {}
    for d in range(1, l_max + 1):
        members = sorted(delta_set(lag_set, d))
        if not members:
            continue
        for t0 in range(t_count - d):
            value = 0.0
            for l in members:
                if anchored(t0, l):
                    value -= w_of[l] * w_of[l - d]
            edges[(t0, d)] = value

    # ordered-pair sum over l, l' with the indicator on the first index;
    # the second index is free, so it factors into sum(aug_w)
    total_w = float(np.sum(aug_w))
    diag = np.zeros(t_count)
    for t0 in range(t_count):
        anchored_w = sum(
            float(wl) for l, wl in zip(aug_lags, aug_w) if anchored(t0, int(l))
        )
        diag[t0] = anchored_w * total_w
    return TemporalGraph(t_count=t_count, edges=edges, diag=diag)


def ar_reg_value(
    xbar: np.ndarray, lag_set: LagSet, weights: LagWeights, eta: float
) -> float:
    """Evaluate the AR penalty on one series (see module docstring)."""
    if eta < 0:
        raise ValueError("eta must be nonnegative")
    xbar = np.asarray(xbar, dtype=float)
    t_count = xbar.shape[0]
    l_max = lag_set.l_max
    if t_count < lag_set.m:
        raise SeriesTooShort(f"need at least {lag_set.m} time points, got {t_count}")
    resid = xbar[l_max:].copy()
    for l, w in zip(lag_set.lags, weights.wbar):
        resid -= w * xbar[l_max - l : t_count - l]
    return 0.5 * float(resid @ resid) + 0.5 * eta * float(xbar @ xbar)


def laplacian_quadratic(graph: TemporalGraph, xbar: np.ndarray, eta: float) -> float:
    """Graph form of the penalty: 1/2 sum_e w_e (x_t - x_s)^2 + eta/2 ||x||^2."""
    xbar = np.asarray(xbar, dtype=float)
    if xbar.shape != (graph.t_count,):
        raise DimensionMismatch(
            f"series length {xbar.shape} does not match graph size {graph.t_count}"
        )
    total = 0.0
    for (t, d), w in graph.edges.items():
        diff = xbar[t] - xbar[t + d]
        total += w * diff * diff
    return 0.5 * total + 0.5 * eta * float(xbar @ xbar)


def ar_hessian_matvec(
    lag_set: LagSet, weights: LagWeights, eta: float, v: np.ndarray
) -> np.ndarray:
    """Product of the constant Hessian of the AR penalty with ``v``.

    The penalty being a homogeneous quadratic, its Hessian is A'A + eta*I
    where row t of A holds the residual stencil (+1 at t, -w_l at t-l); the
    product costs O(T * |lags|) without forming A.
    """
    v = np.asarray(v, dtype=float)
    t_count = v.shape[0]
    l_max = lag_set.l_max
    if t_count < lag_set.m:
        raise SeriesTooShort(f"need at least {lag_set.m} time points, got {t_count}")
    resid = v[l_max:].copy()
    for l, w in zip(lag_set.lags, weights.wbar):
        resid -= w * v[l_max - l : t_count - l]
    out = eta * v
    out[l_max:] += resid
    for l, w in zip(lag_set.lags, weights.wbar):
        out[l_max - l : t_count - l] -= w * resid
    return out


def hessian_sparsity_pattern(
    lag_set: LagSet, weights: LagWeights, t_count: int
) -> np.ndarray:
    """Boolean T x T pattern of the AR-penalty Hessian.

    Off-diagonal (s, t) is set exactly where the signed graph carries a
    nonzero edge. Assumes generic nonzero weights; a zero weight can cancel
    entries that would otherwise be present.
    """
    graph = build_ar_graph(lag_set, weights, t_count)
    pattern = np.eye(t_count, dtype=bool)
    for (t, d), w in graph.edges.items():
        if abs(w) > PATTERN_TOL:
            pattern[t, t + d] = True
            pattern[t + d, t] = True
    return pattern
