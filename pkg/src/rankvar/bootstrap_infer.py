"""Bootstrap prediction intervals for ranks.

Items are resampled independently, conditional on the data: replicate
samples with replacement, binomial counts from Binomial(trials, p_hat), and
two-class data by stratified row resampling.  Replicate ``b`` always draws
from the substream keyed by ``(seed, b)``, with items visited in a fixed
order inside the replicate, so results do not depend on the worker count.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
from scipy import stats as sps

from ._streams import chunk_ranges, resolve_workers, run_chunks, substream
from .errors import DataError, DomainError, ResourceError
from .sim_engine import order_items

KINDS = ("mean", "median", "proportion", "mann_whitney")
MAX_RESAMPLE = 10**7
MAX_ENUMERATION = 10**6


def _check_ids(item_ids):
    ids = [str(i) for i in item_ids]
    if len(set(ids)) != len(ids):
        seen = set()
        dup = next(i for i in ids if i in seen or seen.add(i))
        raise DataError(f"duplicate item id {dup!r}")
    return ids


@dataclass
class Replicates:
    """Per-item observations; sample sizes may differ between items."""

    item_ids: list
    samples: list

    def __post_init__(self):
        self.item_ids = _check_ids(self.item_ids)
        self.samples = [np.asarray(s, dtype=float).ravel() for s in self.samples]
        if len(self.samples) != len(self.item_ids):
            raise DataError("one sample is required per item")
        if not self.samples:
            raise DataError("dataset has no items")
        for iid, s in zip(self.item_ids, self.samples):
            if s.size == 0:
                raise DataError(f"item {iid!r} has no observations")
            if not np.all(np.isfinite(s)):
                raise DataError(f"item {iid!r} has non-finite observations")

    @property
    def p(self):
        return len(self.item_ids)

    @property
    def sizes(self) -> np.ndarray:
        return np.array([s.size for s in self.samples])

    @property
    def n_ratio(self) -> float:
        """max(n_j) / min(n_j), the balance diagnostic for ragged sizes."""
        sizes = self.sizes
        return float(sizes.max() / sizes.min())


@dataclass
class TwoClass:
    """``m`` labelled observations of ``p`` items (e.g. genes)."""

    labels: np.ndarray
    matrix: np.ndarray
    item_ids: list

    def __post_init__(self):
        self.item_ids = _check_ids(self.item_ids)
        self.labels = np.asarray(self.labels).astype(int).ravel()
        self.matrix = np.asarray(self.matrix, dtype=float)
        if self.matrix.ndim != 2 or self.matrix.shape != (self.labels.size, len(self.item_ids)):
            raise DataError(f"matrix shape {self.matrix.shape} does not match {self.labels.size} labels x {len(self.item_ids)} items")
        if not np.isin(self.labels, (0, 1)).all():
            raise DataError("labels must be 0 or 1")
        if not (self.labels == 0).any() or not (self.labels == 1).any():
            raise DataError("both classes (0 and 1) must be present")
        if not np.all(np.isfinite(self.matrix)):
            raise DataError("matrix has non-finite entries")

    @property
    def p(self):
        return len(self.item_ids)

    def subset(self, columns) -> "TwoClass":
        columns = np.asarray(columns, dtype=int)
        return TwoClass(self.labels, self.matrix[:, columns], [self.item_ids[c] for c in columns])


@dataclass
class Binomial:
    item_ids: list
    successes: np.ndarray
    trials: np.ndarray

    def __post_init__(self):
        self.item_ids = _check_ids(self.item_ids)
        self.successes = np.asarray(self.successes, dtype=np.int64)
        self.trials = np.asarray(self.trials, dtype=np.int64)
        if not (self.successes.shape == self.trials.shape == (len(self.item_ids),)):
            raise DataError("successes and trials need one entry per item")
        if not self.item_ids:
            raise DataError("dataset has no items")
        if (self.trials < 1).any():
            raise DataError("trials must be >= 1")
        if (self.successes < 0).any() or (self.successes > self.trials).any():
            raise DataError("successes must lie in [0, trials]")

    @property
    def p(self):
        return len(self.item_ids)


ItemDataset = Replicates | TwoClass | Binomial


@dataclass
class RankPredictionInterval:
    item_id: str
    point_rank: int
    lower: int
    upper: int
    level: float
    B: int
    m: int

    def to_dict(self):
        return asdict(self)


# --------------------------------------------------------------------------
# statistics


def mann_whitney(x, y) -> float:
    """max{#(x_i < y_j), #(x_i > y_j)}; tied pairs count toward neither."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size == 0 or y.size == 0:
        raise DomainError("mann_whitney needs two nonempty samples")
    ys = np.sort(y)
    below = np.searchsorted(ys, x, side="left")  # y_j < x_i
    above = y.size - np.searchsorted(ys, x, side="right")  # y_j > x_i
    return float(max(above.sum(), below.sum()))


def mann_whitney_columns(matrix, labels) -> np.ndarray:
    """:func:`mann_whitney` for every column of ``matrix``, class 0 vs class 1."""
    matrix = np.asarray(matrix, dtype=float)
    labels = np.asarray(labels)
    x = matrix[labels == 0]
    y = matrix[labels == 1]
    if x.shape[0] == 0 or y.shape[0] == 0:
        raise DomainError("both classes need at least one observation")
    pooled = sps.rankdata(matrix, method="min", axis=0) - 1  # count strictly below, pooled
    below_x = pooled[labels == 0].sum(axis=0) - (sps.rankdata(x, method="min", axis=0) - 1).sum(axis=0)
    below_y = pooled[labels == 1].sum(axis=0) - (sps.rankdata(y, method="min", axis=0) - 1).sum(axis=0)
    # below_y counts pairs x_i < y_j, below_x counts pairs y_j < x_i
    return np.maximum(below_x, below_y).astype(float)


def lower_median(values, axis=-1):
    """Median with the lower-middle convention for even sizes."""
    values = np.asarray(values, dtype=float)
    k = (values.shape[axis] - 1) // 2
    return np.take(np.partition(values, k, axis=axis), k, axis=axis)


def location_stat(kind: str, data) -> float:
    """One item's location statistic.

    ``data`` is a 1-D sample for ``mean``/``median``, a ``(successes, trials)``
    pair for ``proportion`` and an ``(x, y)`` pair of samples for
    ``mann_whitney``.
    """
    if kind in ("mean", "median"):
        values = np.asarray(data, dtype=float).ravel()
        if values.size == 0:
            raise DomainError(f"{kind} of an empty sample")
        return float(values.mean()) if kind == "mean" else float(lower_median(values))
    if kind == "proportion":
        try:
            successes, trials = data
        except (TypeError, ValueError):
            raise DomainError("proportion needs a (successes, trials) pair") from None
        if trials < 1 or not 0 <= successes <= trials:
            raise DomainError(f"invalid binomial count {successes}/{trials}")
        return successes / trials
    if kind == "mann_whitney":
        x, y = data
        return mann_whitney(x, y)
    raise DomainError(f"unknown statistic {kind!r}; expected one of {KINDS}")


def _check_kind(ds, kind):
    allowed = {Replicates: ("mean", "median"), Binomial: ("proportion",), TwoClass: ("mann_whitney",)}.get(type(ds))
    if allowed is None:
        raise DomainError(f"unsupported dataset type {type(ds).__name__}")
    if kind not in allowed:
        raise DomainError(f"statistic {kind!r} does not apply to {type(ds).__name__} data; use one of {allowed}")


def item_statistics(ds, kind: str) -> np.ndarray:
    """Statistic of every item on the original data."""
    _check_kind(ds, kind)
    if isinstance(ds, Replicates):
        return np.array([location_stat(kind, s) for s in ds.samples])
    if isinstance(ds, Binomial):
        return ds.successes / ds.trials
    return mann_whitney_columns(ds.matrix, ds.labels)


def rank_items(stats, direction: str = "ascending"):
    """Return ``(order, ranks)``: item indices best-first, and 1-based ranks.

    Ties are broken by ascending item index.
    """
    stats = np.asarray(stats, dtype=float)
    if stats.size == 0:
        raise DomainError("nothing to rank")
    if direction not in ("ascending", "descending"):
        raise DomainError(f"direction must be ascending or descending, got {direction!r}")
    order = order_items(stats, direction)
    ranks = np.empty(stats.size, dtype=np.int64)
    ranks[order] = np.arange(1, stats.size + 1)
    return order, ranks


def _ranks_rows(stat_rows, direction):
    """Row-wise 1-based ranks of a (B, p) statistics matrix."""
    key = stat_rows if direction == "ascending" else -stat_rows
    order = np.argsort(key, axis=1, kind="stable")
    ranks = np.empty_like(order)
    np.put_along_axis(ranks, order, np.arange(1, stat_rows.shape[1] + 1)[None, :], axis=1)
    return ranks


# --------------------------------------------------------------------------
# resampling


def allocate_classes(labels, total: int) -> tuple[int, int]:
    """Split ``total`` draws between classes 0 and 1 in proportion to ``labels``.

    Largest-remainder rounding; each class gets at least one draw.
    """
    if total < 2:
        raise DomainError(f"need at least 2 draws to keep both classes, got {total}")
    counts = np.array([(labels == 0).sum(), (labels == 1).sum()], dtype=float)
    quota = total * counts / counts.sum()
    alloc = np.floor(quota).astype(int)
    remainder = total - alloc.sum()
    for idx in np.argsort(-(quota - alloc), kind="stable")[:remainder]:
        alloc[idx] += 1
    for c in (0, 1):
        if alloc[c] < 1:
            alloc[c] += 1
            alloc[1 - c] -= 1
    return int(alloc[0]), int(alloc[1])


class _ReplicateResampler:
    def __init__(self, ds: Replicates, kind: str, m):
        self.kind = kind
        sizes = ds.sizes
        self.draws = sizes.copy() if m is None else np.full(ds.p, int(m))
        width = int(sizes.max())
        self.padded = np.zeros((ds.p, width))
        for i, s in enumerate(ds.samples):
            self.padded[i, : s.size] = s
        self.sizes = sizes
        # items grouped by resample size, visited in a fixed order
        self.groups = [np.flatnonzero(self.draws == d) for d in np.unique(self.draws)]

    def statistic_rows(self, seed, lo, hi):
        out = np.empty((hi - lo, self.padded.shape[0]))
        for r, b in enumerate(range(lo, hi)):
            rng = substream(seed, b)
            for items in self.groups:
                d = int(self.draws[items[0]])
                idx = rng.integers(0, self.sizes[items][:, None], size=(items.size, d))
                vals = np.take_along_axis(self.padded[items], idx, axis=1)
                out[r, items] = vals.mean(axis=1) if self.kind == "mean" else lower_median(vals, axis=1)
        return out


class _BinomialResampler:
    def __init__(self, ds: Binomial, m):
        self.phat = ds.successes / ds.trials
        self.draws = ds.trials.copy() if m is None else np.full(ds.p, int(m), dtype=np.int64)

    def statistic_rows(self, seed, lo, hi):
        out = np.empty((hi - lo, self.phat.size))
        for r, b in enumerate(range(lo, hi)):
            out[r] = substream(seed, b).binomial(self.draws, self.phat) / self.draws
        return out


class MannWhitneyIndex:
    """Mann-Whitney statistics of every column under row multiplicities.

    A bootstrap replicate of two-class data only repeats original rows, so
    each column is sorted once and a replicate reduces to weighted pair
    counts: #(x_i < y_j) = sum_j w_j * (class-0 weight strictly below y_j).
    """

    def __init__(self, matrix, labels):
        # work on (items, rows) so each column's cumulative sums are contiguous
        cols = np.ascontiguousarray(np.asarray(matrix, dtype=float).T)
        self.order = np.argsort(cols, axis=1, kind="stable")
        srt = np.take_along_axis(cols, self.order, axis=1)
        m = cols.shape[1]
        # index of the first row of each run of tied values
        new_group = np.ones_like(srt, dtype=bool)
        new_group[:, 1:] = srt[:, 1:] != srt[:, :-1]
        self.group_start = np.maximum.accumulate(np.where(new_group, np.arange(m)[None, :], 0), axis=1)
        self.has_ties = not new_group.all()
        self.is_one = np.asarray(labels)[self.order] == 1

    def statistics(self, weights) -> np.ndarray:
        w = np.asarray(weights, dtype=float)[self.order]
        w1 = np.where(self.is_one, w, 0.0)
        w0 = w - w1
        below0 = np.cumsum(w0, axis=1) - w0
        below1 = np.cumsum(w1, axis=1) - w1
        if self.has_ties:
            below0 = np.take_along_axis(below0, self.group_start, axis=1)
            below1 = np.take_along_axis(below1, self.group_start, axis=1)
        x_lt_y = np.einsum("ij,ij->i", w1, below0)
        y_lt_x = np.einsum("ij,ij->i", w0, below1)
        return np.maximum(x_lt_y, y_lt_x)


class _TwoClassResampler:
    def __init__(self, ds: TwoClass, m):
        self.ds = ds
        total = ds.labels.size if m is None else int(m)
        self.alloc = allocate_classes(ds.labels, total)
        self.rows = [np.flatnonzero(ds.labels == c) for c in (0, 1)]
        self.draws = np.full(ds.p, total)
        self.index = MannWhitneyIndex(ds.matrix, ds.labels)

    def row_weights(self, rng) -> np.ndarray:
        """Multiplicity of each original row in one stratified resample."""
        picks = np.concatenate([rng.choice(rows, size=k, replace=True) for rows, k in zip(self.rows, self.alloc)])
        return np.bincount(picks, minlength=self.ds.labels.size)

    def statistic_rows(self, seed, lo, hi):
        out = np.empty((hi - lo, self.ds.p))
        for r, b in enumerate(range(lo, hi)):
            out[r] = self.index.statistics(self.row_weights(substream(seed, b)))
        return out


def _resampler(ds, kind, m):
    if m is not None:
        if int(m) != m or m < 1:
            raise DomainError(f"--m must be a positive integer, got {m}")
        if m > MAX_RESAMPLE:
            raise ResourceError(f"--m {m} exceeds the resample cap {MAX_RESAMPLE}")
    if isinstance(ds, Replicates):
        return _ReplicateResampler(ds, kind, m)
    if isinstance(ds, Binomial):
        return _BinomialResampler(ds, m)
    return _TwoClassResampler(ds, m)


def _enumerated_stat_rows(ds: Replicates, kind: str) -> np.ndarray:
    """Statistics under every equally likely same-size resample of every item."""
    per_item = []
    total = 1
    for s in ds.samples:
        total *= s.size**s.size
        if total > MAX_ENUMERATION:
            raise ResourceError(f"exhaustive enumeration needs more than {MAX_ENUMERATION} resamples")
        combos = np.array(list(itertools.product(s, repeat=s.size)))
        per_item.append(np.array([location_stat(kind, c) for c in combos]))
    return np.array(list(itertools.product(*per_item)), dtype=float)


def _order_stat_index(q: float, B: int) -> int:
    # guard against q*B landing a hair above an integer through rounding
    return min(B, max(1, math.ceil(q * B - 1e-9)))


def percentile_bounds(rank_samples: np.ndarray, level: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-column [ceil(a/2 B)-th, ceil((1-a/2) B)-th] order statistics, a = 1 - level."""
    if not 0 < level < 1:
        raise DomainError(f"level must lie in (0, 1), got {level}")
    B = rank_samples.shape[0]
    alpha = 1.0 - level
    lo_i = _order_stat_index(alpha / 2, B)
    hi_i = _order_stat_index(1 - alpha / 2, B)
    srt = np.sort(rank_samples, axis=0)
    return srt[lo_i - 1], srt[hi_i - 1]


def bootstrap_rank_samples(ds, kind, B, m=None, direction="ascending", seed=0, workers=None, exhaustive=False):
    """(B, p) matrix of bootstrap ranks."""
    _check_kind(ds, kind)
    if exhaustive:
        if not isinstance(ds, Replicates) or m is not None:
            raise DomainError("exhaustive mode supports replicate data at the original sample sizes only")
        return _ranks_rows(_enumerated_stat_rows(ds, kind), direction)
    if B < 1:
        raise DomainError(f"B must be >= 1, got {B}")
    if B < 100:
        warnings.warn(f"B={B} bootstrap replicates is small; percentile endpoints will be coarse", stacklevel=3)
    sampler = _resampler(ds, kind, m)
    ranges = chunk_ranges(B, max(1, (1 << 18) // max(ds.p, 1)))
    parts = run_chunks(lambda lo, hi: _ranks_rows(sampler.statistic_rows(seed, lo, hi), direction), ranges, resolve_workers(workers))
    return np.concatenate(parts, axis=0)


def bootstrap_rank_intervals(
    ds,
    kind: str,
    B: int = 1000,
    level: float = 0.9,
    m: int | None = None,
    direction: str = "ascending",
    seed: int = 0,
    workers: int | None = None,
    exhaustive: bool = False,
) -> list[RankPredictionInterval]:
    """Percentile prediction intervals for every item's rank.

    Parameters
    ----------
    ds : Replicates, TwoClass or Binomial
    kind : str
        Location statistic: ``mean``/``median`` for replicates, ``proportion``
        for binomial counts, ``mann_whitney`` for two-class data.
    B : int
        Bootstrap replicates.  Ignored with ``exhaustive=True``, where every
        equally likely resample is enumerated instead.
    m : int, optional
        Resample size per item (total observations for two-class data).
        Defaults to each item's own sample size.
    """
    if not 0 < level < 1:
        raise DomainError(f"level must lie in (0, 1), got {level}")
    _, point = rank_items(item_statistics(ds, kind), direction)
    samples = bootstrap_rank_samples(ds, kind, B, m, direction, seed, workers, exhaustive)
    lower, upper = percentile_bounds(samples, level)
    if exhaustive:
        draws = ds.sizes
    else:
        draws = _resampler(ds, kind, m).draws
    B_used = samples.shape[0]
    return [
        RankPredictionInterval(iid, int(point[i]), int(lower[i]), int(upper[i]), float(level), int(B_used), int(draws[i]))
        for i, iid in enumerate(ds.item_ids)
    ]


def sort_intervals(intervals: Sequence[RankPredictionInterval], by: str = "point") -> list[RankPredictionInterval]:
    """Order intervals by point rank, or by lower endpoint (point rank breaks ties)."""
    if by == "point":
        return sorted(intervals, key=lambda iv: iv.point_rank)
    if by == "lower":
        return sorted(intervals, key=lambda iv: (iv.lower, iv.point_rank))
    raise DomainError(f"sort key must be 'point' or 'lower', got {by!r}")


def top_set_probability(
    ds: TwoClass,
    kind: str = "mann_whitney",
    j_list: Sequence[int] = (1,),
    B: int = 1000,
    n_prime: int | None = None,
    seed: int = 0,
    direction: str = "descending",
    p_subsample: int | None = None,
    workers: int | None = None,
) -> dict[int, float]:
    """Probability that the top-j set of a resampled dataset equals the reference top-j set.

    The reference is the ranking on the full original data.  Each replicate
    draws ``n_prime`` observations with replacement, stratified by class.
    With ``p_subsample`` each replicate also keeps only a random subset of
    items of that size, always including the reference top ``max(j_list)``.
    """
    if not isinstance(ds, TwoClass):
        raise DomainError("top_set_probability needs two-class data")
    _check_kind(ds, kind)
    j_list = [int(j) for j in j_list]
    if not j_list:
        raise DomainError("need at least one j")
    jmax = max(j_list)
    limit = ds.p if p_subsample is None else p_subsample
    if min(j_list) < 1 or jmax > limit:
        raise DomainError(f"every j must lie in [1, {limit}]")
    if p_subsample is not None and not jmax <= p_subsample <= ds.p:
        raise DomainError(f"p_subsample must lie in [{jmax}, {ds.p}]")
    if B < 1:
        raise DomainError(f"B must be >= 1, got {B}")
    n_prime = ds.labels.size if n_prime is None else int(n_prime)
    if n_prime > MAX_RESAMPLE:
        raise ResourceError(f"n_prime {n_prime} exceeds the resample cap {MAX_RESAMPLE}")
    ref_order, _ = rank_items(item_statistics(ds, kind), direction)
    ref_top = ref_order[:jmax]
    others = ref_order[jmax:]
    sampler = _TwoClassResampler(ds, n_prime)
    sign = 1.0 if direction == "ascending" else -1.0
    js = np.array(j_list)

    def work(lo, hi):
        hits = np.zeros(js.size, dtype=np.int64)
        for b in range(lo, hi):
            rng = substream(seed, b)
            stat = sampler.index.statistics(sampler.row_weights(rng))
            if p_subsample is None:
                cols = np.arange(ds.p)
            else:
                extra = rng.choice(others, size=p_subsample - jmax, replace=False)
                cols = np.sort(np.concatenate([ref_top, extra]))
            order = cols[np.argsort(sign * stat[cols], kind="stable")]
            # position of each replicate-top item in the reference order
            pos = np.full(ds.p, jmax)
            pos[ref_top] = np.arange(jmax)
            worst = np.maximum.accumulate(pos[order[:jmax]])
            hits += worst[js - 1] < js
        return hits

    parts = run_chunks(work, chunk_ranges(B, 16), resolve_workers(workers))
    hits = sum(parts, np.zeros(js.size, dtype=np.int64))
    return {j: float(h / B) for j, h in zip(j_list, hits)}
