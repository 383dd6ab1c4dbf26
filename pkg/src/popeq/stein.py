"""Centred Poisson target law, its Stein equation and total-variation bounds.

The centred Poisson distribution with parameter ``v`` is the Poisson(v) law
translated left by ``floor(v)``, so it lives on ``{l >= -floor(v)}`` with
mean equal to the fractional part of ``v`` and variance ``v``.  For a set
``B`` in that support, the Stein equation

    v [g(l+1) - g(l)] - l g(l) + <v> g(l)  =  1_B(l) - mass(B)

has a solution ``g`` that vanishes at and below ``-floor(v)`` and satisfies
uniform bounds; expectations of the left-hand side under any integer random
variable then bound ``|P[W in B] - mass(B)|``.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import stats

from .errors import WindowTooSmall
from .lattice import LatticeDist

__all__ = [
    "CentredPoisson",
    "HalfLine",
    "SteinSolution",
    "BoundReport",
    "centred_poisson_pmf",
    "stein_solve",
    "stein_set_bound",
    "stein_tv_bound",
]


@dataclass(frozen=True)
class HalfLine:
    """The set ``{l : l >= threshold}``, intersected with the target support."""

    threshold: int


@dataclass(frozen=True)
class CentredPoisson:
    """Poisson(v) translated left by ``floor(v)``."""

    v: float

    def __post_init__(self):
        if not (self.v > 0):
            raise ValueError("the parameter v must be positive")
        object.__setattr__(self, "v", float(self.v))

    @property
    def shift(self):
        return int(math.floor(self.v))

    @property
    def support_lo(self):
        return -self.shift

    @property
    def frac(self):
        return self.v - self.shift

    def pmf(self, l):
        """Mass at ``l`` (vectorized), evaluated in log space."""
        k = np.asarray(l) + self.shift
        return stats.poisson.pmf(k, self.v)

    def set_mass(self, B):
        """Total mass of a subset of the support."""
        if isinstance(B, HalfLine):
            t = max(B.threshold, self.support_lo)
            return float(stats.poisson.sf(t + self.shift - 1, self.v))
        bs = [int(b) for b in B]
        if any(b < self.support_lo for b in bs):
            raise ValueError("set contains points below the support")
        if not bs:
            return 0.0
        return float(np.sum(self.pmf(np.array(bs))))

    def to_lattice(self, lo=None, hi=None, sd_span=16.0):
        """Materialize the law on a finite window as a LatticeDist.

        The default window spans ``sd_span`` standard deviations; the
        distribution is renormalized on it, so keep the window wide enough
        that the missing tail is negligible for the use at hand.
        """
        spread = int(math.ceil(sd_span * math.sqrt(self.v)))
        if lo is None:
            lo = self.support_lo
        if hi is None:
            hi = self.shift + spread
        lo = max(int(lo), self.support_lo)
        hi = int(hi)
        if hi < lo:
            raise ValueError("empty window")
        w = self.pmf(np.arange(lo, hi + 1))
        missing = 1.0 - float(w.sum())
        return LatticeDist(lo, w, tol=max(1e-9, 2.0 * abs(missing)))


def centred_poisson_pmf(v, l):
    """Mass of the centred Poisson law with parameter ``v`` at ``l``."""
    return float(CentredPoisson(v).pmf(l))


@dataclass(frozen=True)
class BoundReport:
    sup_abs_g: float
    sup_abs_dg: float
    sup_abs_lg: float
    max_residual: float

    def to_dict(self):
        return {
            "sup_abs_g": self.sup_abs_g,
            "sup_abs_dg": self.sup_abs_dg,
            "sup_abs_lg": self.sup_abs_lg,
            "max_residual": self.max_residual,
        }


@dataclass(frozen=True)
class SteinSolution:
    """Solution of the Stein equation for one target set on one window.

    ``f`` holds the values in shifted coordinates ``m = l + floor(v)`` for
    ``m = 0 .. hi + floor(v) + 1``; the solution is identically zero at and
    below the bottom of the support.
    """

    v: float
    B: object
    window: tuple
    set_mass: float
    f: np.ndarray
    bound_report: BoundReport

    @property
    def shift(self):
        return int(math.floor(self.v))

    @property
    def frac(self):
        return self.v - self.shift

    def g(self, l):
        m = int(l) + self.shift
        if m <= 0:
            return 0.0
        if m < len(self.f):
            return float(self.f[m])
        raise WindowTooSmall(f"solution window {self.window} does not reach {l}")

    def g_array(self, lo, hi):
        """Values ``g(lo) .. g(hi)`` as a vector."""
        ms = np.arange(int(lo), int(hi) + 1) + self.shift
        if ms.size and ms.max() >= len(self.f):
            raise WindowTooSmall(
                f"solution window {self.window} does not reach {int(hi)}"
            )
        out = np.zeros(ms.size)
        ok = ms > 0
        out[ok] = self.f[ms[ok]]
        return out


@lru_cache(maxsize=16)
def _poisson_tables(v, K):
    ks = np.arange(K + 1)
    logp = stats.poisson.logpmf(ks, v)
    mode = int(math.floor(v))
    q = np.exp(logp - logp[mode])
    p = np.exp(logp)
    for arr in (logp, q, p):
        arr.setflags(write=False)
    return logp, q, p


def _canonical_set(B, floor_v):
    if isinstance(B, HalfLine):
        return HalfLine(max(int(B.threshold), -floor_v))
    bs = frozenset(int(b) for b in B)
    if any(b < -floor_v for b in bs):
        raise ValueError("set contains points below the support of the target")
    return bs


def _f_single(m, v, logp, coef, tail_coef, K, split):
    # scalar fallback for states where the scaled weights underflow
    acc = 0.0
    if m <= split:
        for k in range(m - 1, -1, -1):
            w = math.exp(logp[k] - logp[m])
            acc += coef[k] * w
            if w < 1e-32:
                break
        return acc / m
    hit_end = True
    for k in range(m, K + 1):
        w = math.exp(logp[k] - logp[m])
        acc += coef[k] * w
        if w < 1e-32 and k > m + 4:
            hit_end = False
            break
    if hit_end:
        acc += tail_coef * math.exp(stats.poisson.logsf(K, v) - logp[m])
    return -acc / m


def stein_solve(v, B, window, cover_k=4.0):
    """Solve the Stein equation for target parameter ``v`` and set ``B``.

    ``B`` is either a finite collection of integers inside the window or a
    ``HalfLine``.  The window must cover ``[-floor(v), floor(v) +
    cover_k*sqrt(v)]``.  In shifted coordinates ``m = l + floor(v)`` the
    equation becomes the classical Poisson Stein recursion
    ``v f(m+1) - m f(m) = 1_A(m) - Po(v){A}``, solved by the explicit
    two-sided sums with log-space Poisson weights: the partial sum from
    below is used for ``m <= ceil(v)`` and the complementary sum from above
    beyond that, which avoids the catastrophic cancellation of the forward
    recursion.
    """
    v = float(v)
    if not v > 0:
        raise ValueError("the parameter v must be positive")
    floor_v = int(math.floor(v))
    frac = v - floor_v
    lo, hi = int(window[0]), int(window[1])
    need_hi = floor_v + int(math.ceil(cover_k * math.sqrt(v)))
    if lo > -floor_v or hi < need_hi:
        raise WindowTooSmall(
            f"window [{lo}, {hi}] must cover [{-floor_v}, {need_hi}]"
        )

    B = _canonical_set(B, floor_v)
    M = hi + floor_v + 1
    if isinstance(B, frozenset) and B:
        if max(B) > hi:
            raise WindowTooSmall("target set extends past the window")
    K = max(M, int(math.ceil(v + 40.0 * math.sqrt(v) + 40.0)))
    logp, q, p = _poisson_tables(v, K)

    ind = np.zeros(K + 1)
    if isinstance(B, HalfLine):
        t = B.threshold + floor_v
        ind[max(t, 0) :] = 1.0
        tail_in_B = True
        set_mass = float(stats.poisson.sf(t - 1, v))
    else:
        if B:
            ind[np.array(sorted(B)) + floor_v] = 1.0
        tail_in_B = False
        set_mass = float(ind @ p)

    coef = ind - set_mass
    tail_coef = (1.0 if tail_in_B else 0.0) - set_mass

    cq = coef * q
    left = np.concatenate(([0.0], np.cumsum(cq)))
    tail_q = tail_coef * math.exp(stats.poisson.logsf(K, v) - logp[floor_v])
    right = np.concatenate((np.cumsum(cq[::-1])[::-1], [0.0])) + tail_q

    split = int(math.ceil(v))
    ms = np.arange(1, M + 1)
    qm = q[1 : M + 1]
    numer = np.where(ms <= split, left[1 : M + 1], -right[1 : M + 1])
    f = np.zeros(M + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        f[1:] = numer / (ms * qm)
    bad = ~np.isfinite(f[1:]) | (qm < 1e-250)
    for m in ms[bad]:
        f[m] = _f_single(int(m), v, logp, coef, tail_coef, K, split)
    f.setflags(write=False)

    report = _bound_report(v, floor_v, frac, f, coef, lo, hi)
    return SteinSolution(
        v=v,
        B=B,
        window=(lo, hi),
        set_mass=set_mass,
        f=f,
        bound_report=report,
    )


def _bound_report(v, floor_v, frac, f, coef, lo, hi):
    M = len(f) - 1
    sup_g = float(np.max(np.abs(f[1:]))) if M >= 1 else 0.0
    sup_dg = float(np.max(np.abs(np.diff(f)))) if M >= 1 else 0.0
    ls = np.arange(-floor_v, M + 1 - floor_v)
    sup_lg = float(np.max(np.abs(ls * f)))
    m_lo = max(0, lo + floor_v)
    m_hi = hi + floor_v
    m = np.arange(m_lo, m_hi + 1)
    lhs = v * (f[m + 1] - f[m]) - (m - floor_v) * f[m] + frac * f[m]
    max_res = float(np.max(np.abs(lhs - coef[m]))) if m.size else 0.0
    return BoundReport(
        sup_abs_g=sup_g,
        sup_abs_dg=sup_dg,
        sup_abs_lg=sup_lg,
        max_residual=max_res,
    )


def stein_set_bound(dist: LatticeDist, v, B, cover_k=4.0):
    """|E[ v grad g(W+1) - W g(W) + <v> g(W) ]| for ``W ~ dist``."""
    v = float(v)
    floor_v = int(math.floor(v))
    frac = v - floor_v
    hi = max(dist.hi, floor_v + int(math.ceil(cover_k * math.sqrt(v))))
    sol = stein_solve(v, B, (-floor_v, hi), cover_k)
    ls = dist.states()
    g0 = sol.g_array(dist.lo, dist.hi)
    g1 = sol.g_array(dist.lo + 1, dist.hi + 1)
    terms = v * (g1 - g0) - ls * g0 + frac * g0
    return abs(float(terms @ dist.weights))


def stein_tv_bound(dist: LatticeDist, v, B_family, cover_k=4.0):
    """Stein upper bound on ``max_B |P[W in B] - mass(B)|`` over a family.

    Returns the largest per-set expectation bound plus the mass of ``dist``
    below the support of the target, which the Stein operator cannot see.
    """
    v = float(v)
    floor_v = int(math.floor(v))
    states = dist.states()
    below = float(dist.weights[states < -floor_v].sum())
    best = 0.0
    for B in B_family:
        best = max(best, stein_set_bound(dist, v, B, cover_k))
    return best + below
