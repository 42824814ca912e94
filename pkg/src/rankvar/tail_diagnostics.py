"""Tail-shape diagnostics: Hill estimator, stretched-exponential fit, QQ pairs."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, FitError
from .tail_models import TailModel


@dataclass
class TailFit:
    method: str
    params: dict
    k: int | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def alpha_hat(self) -> float:
        return self.params["alpha_hat"]

    @property
    def stability(self) -> np.ndarray:
        """Hill estimates for k' = 1..k (hill fits only)."""
        return np.asarray(self.diagnostics["stability"])

    def to_dict(self):
        diag = {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in self.diagnostics.items()}
        return {"method": self.method, "params": dict(self.params), "k": self.k, "diagnostics": diag}


def hill_estimator(data, k: int) -> TailFit:
    """Hill estimate of the upper tail index from the top ``k`` order statistics.

    1/alpha_hat = (1/k) sum_{i=1}^{k} log(X_(n-i+1) / X_(n-k)).  The fit also
    carries the stability sequence alpha_hat(k') for k' = 1..k.
    """
    x = np.sort(np.asarray(data, dtype=float).ravel())
    n = x.size
    if k < 1:
        raise DomainError(f"k must be >= 1, got {k}")
    if n < k + 1:
        raise DomainError(f"Hill estimator with k={k} needs at least {k + 1} observations, got {n}")
    top = x[::-1][: k + 1]  # X_(n), X_(n-1), ..., X_(n-k)
    if top[-1] <= 0:
        raise DomainError(f"threshold X_(n-k) = {top[-1]} must be positive")
    logs = np.log(top)
    # for k' the threshold is X_(n-k'), i.e. top[k']
    ks = np.arange(1, k + 1)
    mean_log_excess = np.cumsum(logs[:-1]) / ks - logs[1:]
    with np.errstate(divide="ignore"):
        stability = 1.0 / mean_log_excess
    stability[mean_log_excess <= 0] = np.nan
    if not mean_log_excess[-1] > 0:
        raise FitError("all top-k values equal the threshold; the Hill estimate is undefined")
    return TailFit("hill", {"alpha_hat": float(stability[-1])}, k, {"stability": stability})


def plotting_positions(n: int) -> np.ndarray:
    return np.arange(1, n + 1) / (n + 1.0)


def fit_stretched_exp(data, shift: float = 0.0) -> TailFit:
    """Least-squares fit of survival exp(-lam (x - shift)^gamma).

    Regresses log(-log S) on log(x - shift) with S(x_(i)) = 1 - i/(n+1);
    the slope is gamma and the intercept log(lam).
    """
    x = np.sort(np.asarray(data, dtype=float).ravel())
    if x.size < 10:
        raise DomainError(f"need at least 10 points, got {x.size}")
    if not x[0] > shift:
        raise DomainError(f"all data must exceed shift={shift}; minimum is {x[0]}")
    if x[0] == x[-1]:
        raise FitError("all data are equal; nothing to fit")
    s = 1.0 - plotting_positions(x.size)
    u = np.log(x - shift)
    v = np.log(-np.log(s))
    gamma, log_lam = np.polyfit(u, v, 1)
    resid = v - (gamma * u + log_lam)
    if not gamma > 0:
        raise FitError(f"fitted shape {gamma} is not positive; the model does not describe these data")
    return TailFit(
        "stretched_exp",
        {"lam": float(np.exp(log_lam)), "gamma": float(gamma), "shift": float(shift)},
        None,
        {"rss": float(resid @ resid)},
    )


def qq_points(data, model: TailModel) -> np.ndarray:
    """(empirical, theoretical) pairs at plotting positions i/(n+1), shape (n, 2)."""
    x = np.sort(np.asarray(data, dtype=float).ravel())
    if x.size == 0:
        raise DomainError("qq_points needs at least one observation")
    q = np.asarray(model.quantile(plotting_positions(x.size)), dtype=float).reshape(x.size)
    return np.column_stack([x, q])


def qq_deviation(pairs) -> float:
    """Sum of squared distances from the diagonal."""
    pairs = np.asarray(pairs)
    d = pairs[:, 0] - pairs[:, 1]
    return float(d @ d)
