"""Monte Carlo estimation of rank-correctness probabilities.

Each replication draws latent attributes ``theta`` from a tail model, adds
averaged noise to get ``xbar``, and compares the ordering of ``xbar`` with
the ordering of ``theta``:

* prefix correctness at depth ``j0``: the first ``j0`` positions of both
  orderings agree exactly;
* set correctness at ``j``: the first ``j`` positions hold the same items,
  in any order.

Replication ``r`` always uses the random substream keyed by ``(seed, r)``, so
estimates are bit-identical for any worker count.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Literal, Sequence

import numpy as np
from scipy import special

from . import tail_models
from ._expr import ROUNDING_RULES, Expr, round_count
from ._streams import chunk_ranges, resolve_workers, run_chunks, substream
from .errors import CalibrationError, ConfigError, DomainError
from .tail_models import TailModel

Direction = Literal["ascending", "descending"]
MODES = ("prefix", "set")
NOISE_FAMILIES = ("normal", "normal_raw", "laplace_raw", "uniform_raw")

# rows of (reps x p) evaluated at once
_BLOCK_ELEMENTS = 1 << 21
# above this p, and for shallow depths, select the top of each row instead of sorting it
_PARTIAL_MIN_P = 4096


@dataclass(frozen=True)
class ExperimentConfig:
    """One Monte Carlo experiment.

    ``p`` is either fixed or given by ``p_rule`` (an expression in ``n`` such as
    ``0.0005*n^2``).  Entries of ``j0_list`` are integers or expressions in
    ``n`` and ``p``; fractional values are rounded by ``rounding`` (minimum 1).
    ``fixed_theta`` replaces the tail draw by a fixed attribute vector, which
    is how degenerate test configurations are expressed.
    """

    tail: TailModel | None
    n: int
    p: int | None = None
    p_rule: str | None = None
    noise_sd: float = 1.0
    reps: int = 1000
    j0_list: tuple = (1,)
    mode: str = "prefix"
    direction: str = "ascending"
    seed: int = 0
    n_j_overrides: tuple | None = None
    rounding: str = "floor"
    fixed_theta: tuple | None = None
    noise: str = "normal"

    def __post_init__(self):
        if not isinstance(self.j0_list, tuple):
            object.__setattr__(self, "j0_list", tuple(self.j0_list))
        for name in ("n_j_overrides", "fixed_theta"):
            value = getattr(self, name)
            if value is not None and not isinstance(value, tuple):
                object.__setattr__(self, name, tuple(value))

    def validate(self) -> None:
        if self.tail is None and self.fixed_theta is None:
            raise ConfigError("a tail model is required unless fixed_theta is given")
        if int(self.n) != self.n or self.n < 1:
            raise ConfigError(f"--n must be a positive integer, got {self.n!r}")
        if self.reps < 1:
            raise ConfigError(f"--reps must be >= 1, got {self.reps}")
        if not (np.isfinite(self.noise_sd) and self.noise_sd >= 0):
            raise ConfigError(f"--noise-sd must be a nonnegative number, got {self.noise_sd!r}")
        if self.mode not in (*MODES, "both"):
            raise ConfigError(f"--mode must be prefix, set or both, got {self.mode!r}")
        if self.direction not in ("ascending", "descending"):
            raise ConfigError(f"--direction must be ascending or descending, got {self.direction!r}")
        if self.rounding not in ROUNDING_RULES:
            raise ConfigError(f"rounding must be one of {ROUNDING_RULES}, got {self.rounding!r}")
        if self.noise not in NOISE_FAMILIES:
            raise ConfigError(f"noise must be one of {NOISE_FAMILIES}, got {self.noise!r}")
        if not self.j0_list:
            raise ConfigError("at least one --j0 is required")
        p = self.resolve_p()
        if self.n_j_overrides is not None:
            if len(self.n_j_overrides) != p:
                raise ConfigError(f"n_j_overrides has {len(self.n_j_overrides)} entries but p={p}")
            if min(self.n_j_overrides) < 1:
                raise ConfigError("every per-item sample size must be >= 1")
        for spec, j0 in self.resolve_j0():
            if j0 > p:
                raise ConfigError(f"--j0 {spec} resolves to {j0} which exceeds p={p}")

    def resolve_p(self) -> int:
        if self.fixed_theta is not None:
            p = len(self.fixed_theta)
            if self.p is not None and self.p != p:
                raise ConfigError(f"p={self.p} disagrees with len(fixed_theta)={p}")
            return p
        if (self.p is None) == (self.p_rule is None):
            raise ConfigError("exactly one of --p and --p-rule must be given")
        if self.p is not None:
            if int(self.p) != self.p or self.p < 1:
                raise ConfigError(f"--p must be a positive integer, got {self.p!r}")
            return int(self.p)
        return round_count(Expr(self.p_rule)(n=self.n), self.rounding)

    def resolve_j0(self) -> list[tuple[str, int]]:
        p = self.resolve_p()
        out = []
        for spec in self.j0_list:
            if isinstance(spec, (int, np.integer)):
                if spec < 1:
                    raise ConfigError(f"--j0 must be >= 1, got {spec}")
                out.append((str(int(spec)), int(spec)))
            else:
                out.append((str(spec), round_count(Expr(spec)(n=self.n, p=p), self.rounding)))
        return out

    def modes(self) -> tuple[str, ...]:
        return MODES if self.mode == "both" else (self.mode,)

    def sample_sizes(self) -> np.ndarray:
        p = self.resolve_p()
        if self.n_j_overrides is None:
            return np.full(p, float(self.n))
        return np.asarray(self.n_j_overrides, dtype=float)

    def with_n(self, n: int) -> "ExperimentConfig":
        return replace(self, n=int(n))

    def with_noise_sd(self, sd: float) -> "ExperimentConfig":
        return replace(self, noise_sd=float(sd))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["tail"] = None if self.tail is None else self.tail.to_dict()
        d["j0_list"] = [j if isinstance(j, (int, np.integer)) else str(j) for j in self.j0_list]
        for name in ("n_j_overrides", "fixed_theta"):
            if d[name] is not None:
                d[name] = list(d[name])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        if d.get("tail") is not None:
            d["tail"] = tail_models.from_dict(d["tail"])
        return cls(**d)


@dataclass
class RankRealization:
    """One draw of attributes and observed scores, with both orderings.

    Orders are 0-based item indices; ``true_order[0]`` is the item ranked
    first under ``direction``.
    """

    theta: np.ndarray
    xbar: np.ndarray
    true_order: np.ndarray
    observed_order: np.ndarray
    direction: str = "ascending"

    @classmethod
    def from_values(cls, theta, xbar, direction: Direction = "ascending") -> "RankRealization":
        theta = np.asarray(theta, dtype=float)
        xbar = np.asarray(xbar, dtype=float)
        if theta.shape != xbar.shape or theta.ndim != 1:
            raise ConfigError("theta and xbar must be 1-D arrays of equal length")
        return cls(theta, xbar, order_items(theta, direction), order_items(xbar, direction), direction)


def order_items(values, direction: Direction = "ascending") -> np.ndarray:
    """Item indices sorted by value; ties go to the lower index."""
    values = np.asarray(values, dtype=float)
    key = values if direction == "ascending" else -values
    return np.argsort(key, kind="stable")


def prefix_correct_depth(real: RankRealization) -> int:
    mismatch = real.true_order != real.observed_order
    if not mismatch.any():
        return len(real.true_order)
    return int(np.argmax(mismatch))


def set_correct_flags(real: RankRealization, j_list: Sequence[int]) -> np.ndarray:
    p = len(real.true_order)
    j = np.asarray(j_list, dtype=int)
    if j.size and (j.min() < 1 or j.max() > p):
        raise DomainError(f"every j must lie in [1, {p}]")
    pos = np.empty(p, dtype=int)
    pos[real.true_order] = np.arange(p)
    worst = np.maximum.accumulate(pos[real.observed_order])
    return worst[j - 1] < j


def two_item_oracle(delta: float, sigma: float, n: int) -> float:
    """P(two noisy means keep their true order), for normal noise.

    Items sit at 0 and ``delta``; each mean has variance ``sigma**2 / n``.
    """
    if not delta > 0 or not sigma > 0 or n < 1:
        raise DomainError("two_item_oracle needs delta > 0, sigma > 0, n >= 1")
    return float(special.ndtr(delta * math.sqrt(n) / (sigma * math.sqrt(2.0))))


@dataclass
class CorrectnessRow:
    j0_spec: str
    j0: int
    mode: str
    probability: float
    se: float
    successes: int
    reps: int


@dataclass
class RankCorrectnessReport:
    config: ExperimentConfig
    p: int
    rows: list[CorrectnessRow]
    wall_seconds: float = 0.0
    n_ratio: float | None = None
    notes: list[str] = field(default_factory=list)

    def probability(self, j0, mode: str = "prefix") -> float:
        return self._row(j0, mode).probability

    def se(self, j0, mode: str = "prefix") -> float:
        return self._row(j0, mode).se

    def _row(self, j0, mode):
        for row in self.rows:
            if row.mode == mode and (row.j0_spec == str(j0) or (isinstance(j0, int) and row.j0 == j0)):
                return row
        raise KeyError((j0, mode))

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "p": self.p,
            "rounding": self.config.rounding,
            "n_ratio": self.n_ratio,
            "rows": [asdict(r) for r in self.rows],
            "notes": list(self.notes),
        }


def _unit_noise(cfg: ExperimentConfig, p: int, n_j: np.ndarray, rng) -> np.ndarray:
    """Noise mean for unit per-observation sd; scaled by ``noise_sd`` later."""
    if cfg.noise == "normal":
        return rng.standard_normal(p) / np.sqrt(n_j)
    out = np.empty(p)
    for size in np.unique(n_j):
        idx = np.flatnonzero(n_j == size)
        shape = (int(size), idx.size)
        if cfg.noise == "normal_raw":
            raw = rng.standard_normal(shape)
        elif cfg.noise == "laplace_raw":
            raw = rng.laplace(0.0, 1.0 / math.sqrt(2.0), shape)
        else:
            raw = rng.uniform(-math.sqrt(3.0), math.sqrt(3.0), shape)
        out[idx] = raw.mean(axis=0)
    return out


def _draw_block(cfg: ExperimentConfig, p: int, lo: int, hi: int):
    n_j = cfg.sample_sizes()
    theta = np.empty((hi - lo, p))
    noise = np.empty((hi - lo, p))
    fixed = None if cfg.fixed_theta is None else np.asarray(cfg.fixed_theta, dtype=float)
    for i, rep in enumerate(range(lo, hi)):
        rng = substream(cfg.seed, rep)
        theta[i] = fixed if fixed is not None else tail_models.sample_iid(cfg.tail, p, rng)
        noise[i] = _unit_noise(cfg, p, n_j, rng)
    return theta, noise


def _top_orders(key: np.ndarray, k: int) -> np.ndarray:
    """First ``k`` entries of the stable ascending order of each row of ``key``."""
    rows, p = key.shape
    if k >= p or p < _PARTIAL_MIN_P or 4 * k > p:
        return np.argsort(key, axis=1, kind="stable")[:, :k]
    kth = np.partition(key, k - 1, axis=1)[:, k - 1]
    out = np.empty((rows, k), dtype=np.intp)
    for r in range(rows):
        cand = np.flatnonzero(key[r] <= kth[r])
        out[r] = cand[np.argsort(key[r, cand], kind="stable")[:k]]
    return out


def _evaluate_block(theta, xbar, k, direction, j_values):
    """Depth (capped at ``k``) and set flags at ``j_values`` for each row."""
    sign = 1.0 if direction == "ascending" else -1.0
    true_top = _top_orders(sign * theta, k)
    obs_top = _top_orders(sign * xbar, k)
    rows, p = theta.shape
    mismatch = true_top != obs_top
    depth = np.where(mismatch.any(axis=1), mismatch.argmax(axis=1), k)
    # position of each item in the true order; items outside the true top k get k
    pos = np.full((rows, p), k, dtype=np.intp)
    np.put_along_axis(pos, true_top, np.arange(k), axis=1)
    worst = np.maximum.accumulate(np.take_along_axis(pos, obs_top, axis=1), axis=1)
    flags = worst[:, j_values - 1] < j_values
    return depth, flags


def _count_block(cfg, p, k, j_values, theta, noise, sd):
    xbar = theta + sd * noise if sd > 0 else theta
    depth, flags = _evaluate_block(theta, xbar, k, cfg.direction, j_values)
    prefix = (depth[:, None] >= j_values[None, :]).sum(axis=0)
    return prefix.astype(np.int64), flags.sum(axis=0).astype(np.int64)


def _block_ranges(cfg, p):
    return chunk_ranges(cfg.reps, max(1, _BLOCK_ELEMENTS // max(p, 1)))


def _tally(cfg, p, k, j_values, sd, workers, cache=None):
    ranges = _block_ranges(cfg, p)

    def work(lo, hi):
        if cache is not None:
            theta, noise = cache[(lo, hi)]
        else:
            theta, noise = _draw_block(cfg, p, lo, hi)
        return _count_block(cfg, p, k, j_values, theta, noise, sd)

    parts = run_chunks(work, ranges, workers)
    prefix = sum((a for a, _ in parts), np.zeros(len(j_values), dtype=np.int64))
    sets = sum((b for _, b in parts), np.zeros(len(j_values), dtype=np.int64))
    return prefix, sets


def _rows(cfg, resolved, prefix, sets):
    rows = []
    for mode in cfg.modes():
        counts = prefix if mode == "prefix" else sets
        for (spec, j0), c in zip(resolved, counts):
            phat = c / cfg.reps
            rows.append(CorrectnessRow(spec, j0, mode, float(phat), math.sqrt(phat * (1 - phat) / cfg.reps), int(c), cfg.reps))
    return rows


def _n_ratio(cfg):
    if cfg.n_j_overrides is None:
        return None
    return float(max(cfg.n_j_overrides) / min(cfg.n_j_overrides))


def run_rank_experiment(cfg: ExperimentConfig, workers: int | None = None, _cache=None) -> RankCorrectnessReport:
    """Estimate P(top-j0 correct) for every configured depth and mode."""
    start = time.perf_counter()
    cfg.validate()
    p = cfg.resolve_p()
    resolved = cfg.resolve_j0()
    j_values = np.array([j for _, j in resolved], dtype=np.intp)
    k = int(j_values.max())
    prefix, sets = _tally(cfg, p, k, j_values, cfg.noise_sd, resolve_workers(workers), _cache)
    notes = [f"fractional depths rounded by rule '{cfg.rounding}' (minimum 1)"]
    return RankCorrectnessReport(cfg, p, _rows(cfg, resolved, prefix, sets), time.perf_counter() - start, _n_ratio(cfg), notes)


@dataclass
class CalibrationResult:
    noise_sd: float
    probability: float
    iterations: int
    converged: bool
    history: list[tuple[float, float]]

    def to_dict(self):
        return asdict(self)


# cached draws for calibration are kept in memory only below this many values
_CACHE_LIMIT = 1 << 25


def calibrate_noise(
    cfg: ExperimentConfig,
    target: float,
    tol: float = 0.01,
    sd_bounds: tuple[float, float] = (0.0, 100.0),
    max_iter: int = 40,
    workers: int | None = None,
) -> CalibrationResult:
    """Find the noise sd at which the first configured depth/mode hits ``target``.

    Bisection (geometric when the lower bound is positive) over ``sd_bounds``.
    All evaluations reuse the draws of ``cfg.seed``, so the estimated
    probability is a deterministic function of sd.

    Raises
    ------
    CalibrationError
        If the target is not bracketed by the probabilities at the bounds.
    """
    if not 0 < target <= 1:
        raise DomainError(f"target must lie in (0, 1], got {target}")
    lo, hi = map(float, sd_bounds)
    if not 0 <= lo < hi:
        raise DomainError(f"sd bounds must satisfy 0 <= lo < hi, got {sd_bounds}")
    cfg = cfg.with_noise_sd(lo)
    cfg.validate()
    p = cfg.resolve_p()
    resolved = cfg.resolve_j0()[:1]
    j_values = np.array([resolved[0][1]], dtype=np.intp)
    mode = cfg.modes()[0]
    workers = resolve_workers(workers)
    cache = None
    if cfg.reps * p * 2 <= _CACHE_LIMIT:
        cache = {r: _draw_block(cfg, p, *r) for r in _block_ranges(cfg, p)}
    history = []

    def estimate(sd):
        prefix, sets = _tally(cfg, p, int(j_values[0]), j_values, sd, workers, cache)
        phat = float((prefix if mode == "prefix" else sets)[0] / cfg.reps)
        history.append((sd, phat))
        return phat

    p_lo = estimate(lo)
    if abs(p_lo - target) <= tol:
        return CalibrationResult(lo, p_lo, 0, True, history)
    p_hi = estimate(hi)
    if abs(p_hi - target) <= tol:
        return CalibrationResult(hi, p_hi, 0, True, history)
    if p_lo < target or p_hi > target:
        raise CalibrationError(
            f"target {target} not bracketed: p({lo})={p_lo:.4f}, p({hi})={p_hi:.4f}",
            bracket=((lo, p_lo), (hi, p_hi)),
        )
    best = min(history, key=lambda h: abs(h[1] - target))
    for it in range(1, max_iter + 1):
        mid = math.sqrt(lo * hi) if lo > 0 else 0.5 * (lo + hi)
        pm = estimate(mid)
        if abs(pm - target) < abs(best[1] - target):
            best = (mid, pm)
        if abs(pm - target) <= tol:
            return CalibrationResult(mid, pm, it, True, history)
        if pm > target:
            lo = mid
        else:
            hi = mid
    return CalibrationResult(best[0], best[1], max_iter, False, history)


@dataclass
class RequiredNResult:
    j0: int | str
    target: float
    n: int | None
    grid: list[tuple[int, float]]

    def to_dict(self):
        return asdict(self)


def required_n(
    cfg: ExperimentConfig,
    j0,
    target: float,
    n_grid: Sequence[int],
    mode: str = "prefix",
    workers: int | None = None,
) -> RequiredNResult:
    """Smallest ``n`` in ``n_grid`` whose estimated correctness at ``j0`` reaches ``target``."""
    if len(n_grid) == 0:
        raise ConfigError("--n-grid must not be empty")
    if any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise ConfigError("--n-grid must be strictly increasing")
    grid = []
    for n in n_grid:
        run = replace(cfg, n=int(n), j0_list=(j0,), mode=mode)
        prob = run_rank_experiment(run, workers=workers).rows[0].probability
        grid.append((int(n), prob))
        if prob >= target:
            return RequiredNResult(j0, target, int(n), grid)
    return RequiredNResult(j0, target, None, grid)


def exp_rate_axis(n) -> float:
    """n^{1/4} (log n)^{1/2}: the abscissa for required-n plots under an exponential-type tail with shape 1/2."""
    return float(n) ** 0.25 * math.sqrt(math.log(n))
