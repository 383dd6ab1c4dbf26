"""Deterministic equilibrium of the drift flow and its variance parameter."""

import math
from dataclasses import dataclass

from ._roots import bisect, unique_bracket
from .errors import NoSignChange, PopeqError, UnstableEquilibrium
from .model import BdiGroupBirths, eval_drift, eval_drift_prime, eval_variance_rate

__all__ = [
    "EquilibriumInfo",
    "find_equilibrium",
    "closed_form_bdi",
    "default_bracket",
]


@dataclass(frozen=True)
class EquilibriumInfo:
    """The attracting drift root and the induced variance parameter.

    ``v_c = sigma2_c / (-2 f_prime_c)`` is the variance per unit of the
    scale parameter of the equilibrium distribution around ``n c``.
    """

    c: float
    f_prime_c: float
    sigma2_c: float
    v_c: float
    solver_residual: float

    def to_dict(self):
        return {
            "c": self.c,
            "f_prime_c": self.f_prime_c,
            "sigma2_c": self.sigma2_c,
            "v_c": self.v_c,
            "solver_residual": self.solver_residual,
        }


def default_bracket(model):
    """A root bracket for the built-in families; a doubling scan otherwise."""
    if isinstance(model, BdiGroupBirths):
        gap = model.d - model.b * model.m1
        hi = 10.0 * model.a / gap if gap > 0 else 10.0 * max(1.0, model.a / model.d)
        return (1e-6, hi)
    lo, hi = 1e-6, 1.0
    flo = float(eval_drift(model, lo))
    while hi < 1e9:
        if flo * float(eval_drift(model, hi)) <= 0.0:
            return (lo, hi)
        hi *= 2.0
    return (lo, hi)


def find_equilibrium(model, bracket=None):
    """Locate the unique attracting root ``c`` of the drift.

    Scans the bracket on a 64-point grid, bisects the unique sign change to
    width 1e-14 and polishes once by Newton when an analytic drift
    derivative is available.  Raises ``NoSignChange`` or ``MultipleRoots``
    when the scan does not isolate exactly one root and
    ``UnstableEquilibrium`` when the root fails to attract.
    """
    if isinstance(model, BdiGroupBirths) and model.d <= model.b * model.m1:
        raise UnstableEquilibrium(
            "per-capita growth dominates death (d <= b m1); the drift has "
            "no attracting root"
        )
    if bracket is None:
        bracket = default_bracket(model)
    lo, hi = float(bracket[0]), float(bracket[1])

    def drift(z):
        return float(eval_drift(model, z))

    blo, bhi = unique_bracket(drift, lo, hi)
    c = bisect(drift, blo, bhi)

    dfp = eval_drift_prime(model, c)
    if dfp is not None and dfp != 0.0:
        c = c - drift(c) / dfp
        dfp = eval_drift_prime(model, c)
    if dfp is None:
        step = 1e-5 * max(1.0, abs(c))
        dfp = (drift(c + step) - drift(c - step)) / (2.0 * step)
    f_prime_c = float(dfp)

    residual = abs(drift(c))
    scale = max(1.0, abs(drift(lo)), abs(drift(hi)))
    if residual > 1e-12 * scale:
        raise PopeqError(
            f"root refinement stalled: |F(c)| = {residual!r} at c = {c!r}"
        )
    if f_prime_c >= 0.0:
        raise UnstableEquilibrium(
            f"drift root c = {c!r} has nonnegative slope {f_prime_c!r}"
        )

    sigma2_c = float(eval_variance_rate(model, c))
    return EquilibriumInfo(
        c=float(c),
        f_prime_c=f_prime_c,
        sigma2_c=sigma2_c,
        v_c=sigma2_c / (-2.0 * f_prime_c),
        solver_residual=residual,
    )


def closed_form_bdi(a, b, d, q=((1, 1.0),)):
    """Closed-form equilibrium of the immigration-birth-death family.

    With offspring moments ``m1`` and ``m2``: ``c = a / (d - b m1)``,
    ``F'(c) = -(d - b m1)``, ``sigma2(c) = a + c (b m2 + d)`` and
    ``v_c = a (2 d + b (m2 - m1)) / (2 (d - b m1)^2)``.  Serves as an
    independent oracle for ``find_equilibrium``.
    """
    model = BdiGroupBirths(a=a, b=b, d=d, q=q)
    m1, m2 = model.m1, model.m2
    gap = d - b * m1
    if gap <= 0:
        raise UnstableEquilibrium(
            "per-capita growth dominates death (d <= b m1); the drift has "
            "no attracting root"
        )
    c = a / gap
    sigma2_c = a + c * (b * m2 + d)
    v_c = a * (2.0 * d + b * (m2 - m1)) / (2.0 * gap * gap)
    return EquilibriumInfo(
        c=c,
        f_prime_c=-gap,
        sigma2_c=sigma2_c,
        v_c=v_c,
        solver_residual=0.0,
    )
