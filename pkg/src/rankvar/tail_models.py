"""Parametric families for the latent item attributes.

Each family exposes its CDF, survival function, quantile and inverse
survival function.  Sampling is inverse-CDF on uniforms, and the extreme
order statistics of a large virtual sample can be drawn directly through
exponential spacings without generating the whole sample.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import ClassVar, Literal

import numpy as np
from scipy import special

from .errors import DomainError

Side = Literal["lower", "upper"]

_TINY = np.nextafter(0.0, 1.0)


def _positive(name, value):
    if not (np.isfinite(value) and value > 0):
        raise DomainError(f"{name} must be a positive finite number, got {value!r}")


def _check_prob(u):
    u = np.asarray(u, dtype=float)
    if not np.all((u > 0) & (u < 1)):
        raise DomainError("probabilities must lie strictly inside (0, 1)")
    return u


class TailModel:
    """Base class; subclasses are frozen dataclasses holding the parameters."""

    family: ClassVar[str] = ""

    def cdf(self, x):
        raise NotImplementedError

    def sf(self, x):
        return 1.0 - self.cdf(x)

    def _ppf(self, u):
        raise NotImplementedError

    def _isf(self, s):
        return self._ppf(1.0 - s)

    def quantile(self, u):
        u = _check_prob(u)
        out = self._ppf(u)
        return float(out) if out.ndim == 0 else out

    def isf(self, s):
        """Inverse survival function; accurate far into the upper tail."""
        s = _check_prob(s)
        out = self._isf(s)
        return float(out) if out.ndim == 0 else out

    def params(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    def to_dict(self) -> dict:
        return {"family": self.family, **self.params()}


@dataclass(frozen=True)
class Exponential(TailModel):
    rate: float = 1.0
    family: ClassVar[str] = "exponential"

    def __post_init__(self):
        _positive("rate", self.rate)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x > 0, -np.expm1(-self.rate * np.maximum(x, 0.0)), 0.0)

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(-self.rate * np.maximum(x, 0.0))

    def _ppf(self, u):
        return -np.log1p(-u) / self.rate

    def _isf(self, s):
        return -np.log(s) / self.rate


@dataclass(frozen=True)
class Pareto(TailModel):
    """F(x) = 1 - x**-alpha on x >= 1."""

    alpha: float = 1.0
    family: ClassVar[str] = "pareto"

    def __post_init__(self):
        _positive("alpha", self.alpha)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x > 1, 1.0 - np.maximum(x, 1.0) ** -self.alpha, 0.0)

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        return np.maximum(x, 1.0) ** -self.alpha

    def _ppf(self, u):
        return (1.0 - u) ** (-1.0 / self.alpha)

    def _isf(self, s):
        return s ** (-1.0 / self.alpha)


@dataclass(frozen=True)
class BoundedPower(TailModel):
    """F(x) = x**alpha on [0, 1]; alpha = 1 is the uniform law."""

    alpha: float = 1.0
    family: ClassVar[str] = "bounded_power"

    def __post_init__(self):
        _positive("alpha", self.alpha)

    def cdf(self, x):
        return np.clip(np.asarray(x, dtype=float), 0.0, 1.0) ** self.alpha

    def _ppf(self, u):
        return u ** (1.0 / self.alpha)

    def _isf(self, s):
        return np.exp(np.log1p(-s) / self.alpha)


@dataclass(frozen=True)
class Normal(TailModel):
    mu: float = 0.0
    sigma: float = 1.0
    family: ClassVar[str] = "normal"

    def __post_init__(self):
        if not np.isfinite(self.mu):
            raise DomainError(f"mu must be finite, got {self.mu!r}")
        _positive("sigma", self.sigma)

    def cdf(self, x):
        return special.ndtr((np.asarray(x, dtype=float) - self.mu) / self.sigma)

    def sf(self, x):
        return special.ndtr((self.mu - np.asarray(x, dtype=float)) / self.sigma)

    def _ppf(self, u):
        return self.mu + self.sigma * special.ndtri(u)

    def _isf(self, s):
        return self.mu - self.sigma * special.ndtri(s)


@dataclass(frozen=True)
class StretchedExp(TailModel):
    """Survival exp(-lam * (x - shift)**gamma) for x >= shift."""

    lam: float = 1.0
    gamma: float = 1.0
    shift: float = 0.0
    family: ClassVar[str] = "stretched_exp"

    def __post_init__(self):
        _positive("lam", self.lam)
        _positive("gamma", self.gamma)
        if not np.isfinite(self.shift):
            raise DomainError(f"shift must be finite, got {self.shift!r}")

    def _hazard(self, x):
        return self.lam * np.maximum(np.asarray(x, dtype=float) - self.shift, 0.0) ** self.gamma

    def cdf(self, x):
        return -np.expm1(-self._hazard(x))

    def sf(self, x):
        return np.exp(-self._hazard(x))

    def _ppf(self, u):
        return self.shift + (-np.log1p(-u) / self.lam) ** (1.0 / self.gamma)

    def _isf(self, s):
        return self.shift + (-np.log(s) / self.lam) ** (1.0 / self.gamma)


FAMILIES = {cls.family: cls for cls in (Exponential, Pareto, BoundedPower, Normal, StretchedExp)}


def from_dict(d: dict) -> TailModel:
    d = dict(d)
    family = d.pop("family")
    try:
        cls = FAMILIES[family]
    except KeyError:
        raise DomainError(f"unknown tail family {family!r}") from None
    return cls(**d)


def quantile(model: TailModel, u):
    return model.quantile(u)


def sample_iid(model: TailModel, p: int, rng) -> np.ndarray:
    """Draw ``p`` independent values by inverse-CDF sampling."""
    if p < 0:
        raise DomainError(f"p must be >= 0, got {p}")
    if p == 0:
        return np.empty(0)
    u = np.asarray(rng.random(p), dtype=float)
    # Generator.random is [0, 1); a 0 has probability 2**-53 but would break the quantile.
    u = np.where(u > 0, u, _TINY)
    return np.asarray(model.quantile(u), dtype=float).reshape(p)


def uniform_extreme_order_stats(p: int, k: int, rng) -> np.ndarray:
    """Smallest ``k`` of ``p`` uniform order statistics, ascending.

    Uses U_(j) = 1 - exp(-V_j) with V_j = sum_{i<=j} Z_i / (p - i + 1), Z_i
    standard exponential.
    """
    if k < 0 or p < 0:
        raise DomainError("p and k must be nonnegative")
    if k > p:
        raise DomainError(f"k={k} exceeds p={p}")
    if k == 0:
        return np.empty(0)
    z = np.asarray(rng.standard_exponential(k), dtype=float)
    v = np.cumsum(z / (p - np.arange(k, dtype=float)))
    u = -np.expm1(-v)
    return np.where(u > 0, u, _TINY)


def sample_extreme_order_stats(model: TailModel, p: int, k: int, side: Side, rng) -> np.ndarray:
    """The ``k`` most extreme values of a virtual i.i.d. sample of size ``p``.

    Runs in O(k) regardless of ``p``.  ``side="upper"`` reflects the lower
    construction through the inverse survival function.  The result is always
    sorted ascending.
    """
    if side not in ("lower", "upper"):
        raise DomainError(f"side must be 'lower' or 'upper', got {side!r}")
    u = uniform_extreme_order_stats(p, k, rng)
    if k == 0:
        return u
    if side == "lower":
        return np.asarray(model.quantile(u), dtype=float).reshape(k)
    # u[j] is the survival probability of the (j+1)-th largest value.
    vals = np.asarray(model.isf(u), dtype=float).reshape(k)
    return vals[::-1].copy()
