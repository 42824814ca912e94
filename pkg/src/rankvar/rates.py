"""Critical growth rates for the depth of reliable ranking.

All quantities are raw formula values without constants; asymptotic
conditions are exposed as finite diagnostics, never as verdicts.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

from .errors import DomainError

FAMILIES = ("exponential", "polynomial", "bounded")


def nu_exp(n: float, alpha: float) -> float:
    """n^{1/4} (log n)^{(1/alpha - 1)/2} for a lower tail like exp(-C x^alpha)."""
    if not n >= 2:
        raise DomainError(f"nu_exp needs n >= 2 so that log n > 0, got {n}")
    if not alpha > 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    return n**0.25 * math.log(n) ** ((1.0 / alpha - 1.0) / 2.0)


def nu_pol(n: float, p: float, alpha: float) -> float:
    """(n^{alpha/2} p)^{1/(2 alpha + 1)} for a lower tail like x^{-alpha}.

    Evaluated in log space so very large ``alpha`` does not overflow.
    """
    if not (n >= 1 and p >= 1):
        raise DomainError(f"nu_pol needs n >= 1 and p >= 1, got n={n}, p={p}")
    if not alpha > 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    return math.exp((alpha / 2.0 * math.log(n) + math.log(p)) / (2.0 * alpha + 1.0))


def bounded_threshold(n: float, p: float, alpha: float) -> float:
    """(n^{alpha/2} / p)^{1/(2 alpha - 1)}; only meaningful for alpha > 1/2."""
    if not alpha > 0.5:
        raise DomainError(f"the bounded-support depth threshold needs alpha > 1/2, got {alpha}")
    return math.exp((alpha / 2.0 * math.log(n) - math.log(p)) / (2.0 * alpha - 1.0))


@dataclass
class RegimeReport:
    n: float
    p: float
    alpha: float
    family: str
    nu: float
    diagnostics: dict = field(default_factory=dict)
    notes: str = ""
    j0: int | None = None

    def to_dict(self):
        return asdict(self)


def classify_bounded(n: float, p: float, alpha: float, j0: int | None = None) -> RegimeReport:
    """Regime diagnostics for attributes with F(x) ~ x^alpha near the left endpoint.

    ``nu`` is the depth scale for the report: the threshold
    (n^{alpha/2}/p)^{1/(2 alpha - 1)} when alpha > 1/2, and ``p`` otherwise
    (for alpha < 1/2 every rank is attainable once p^2/n^alpha is small; at
    alpha = 1/2 the depth is limited through (log j0)^{2 alpha} p^2/n^alpha,
    reported under ``log_term``).
    """
    if not alpha > 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    if not (n >= 1 and p >= 1):
        raise DomainError(f"n and p must be >= 1, got n={n}, p={p}")
    ratio = math.exp(2.0 * math.log(p) - alpha * math.log(n))
    diagnostics = {"ratio": ratio, "bounded_threshold": None, "log_term": None}
    notes = []
    if alpha < 0.5:
        nu = float(p)
        notes.append("alpha < 1/2: all ranks attainable when the ratio p^2/n^alpha is small")
    elif alpha == 0.5:
        nu = float(p)
        if j0 is not None:
            if j0 < 1:
                raise DomainError(f"j0 must be >= 1, got {j0}")
            diagnostics["log_term"] = math.log(j0) ** (2 * alpha) * ratio
            notes.append("alpha = 1/2: correctness to depth j0 needs log_term small")
        else:
            notes.append("alpha = 1/2: supply j0 to evaluate log_term")
    else:
        nu = bounded_threshold(n, p, alpha)
        diagnostics["bounded_threshold"] = nu
        notes.append("alpha > 1/2: correctness needs j0 small relative to bounded_threshold")
    if ratio >= 1:
        notes.append("ratio p^2/n^alpha >= 1: degenerate regime, even the top rank is unreliable")
    diagnostics["degenerate"] = ratio >= 1
    return RegimeReport(n, p, alpha, "bounded", nu, diagnostics, "; ".join(notes), j0)


def regime_report(family: str, n: float, p: float | None, alpha: float, j0: int | None = None) -> RegimeReport:
    """Dispatch on tail family and return a :class:`RegimeReport`."""
    if family == "exponential":
        nu = nu_exp(n, alpha)
        diagnostics = {"ratio": None if p is None else p**2 / n**alpha, "bounded_threshold": None, "log_term": None}
        return RegimeReport(n, p, alpha, family, nu, diagnostics, "exponential-type tail: depth scale does not depend on p", j0)
    if p is None:
        raise DomainError(f"--p is required for family {family}")
    if family == "polynomial":
        nu = nu_pol(n, p, alpha)
        diagnostics = {"ratio": p**2 / n**alpha, "bounded_threshold": None, "log_term": None}
        return RegimeReport(n, p, alpha, family, nu, diagnostics, "polynomial tail: depth scale grows with p", j0)
    if family == "bounded":
        return classify_bounded(n, p, alpha, j0)
    raise DomainError(f"unknown family {family!r}; expected one of {FAMILIES}")
