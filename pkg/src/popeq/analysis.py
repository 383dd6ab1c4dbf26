"""Distances between lattice laws, stationarity diagnostics and rate studies."""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .equilibrium import find_equilibrium
from .lattice import LatticeDist, aligned_weights
from .model import generator_apply
from .stationary import TruncationPolicy, centre, stationary_exact
from .stein import CentredPoisson, stein_solve

__all__ = [
    "tv_distance",
    "kolmogorov_distance",
    "shift_tv",
    "dynkin_residual",
    "concentration_stats",
    "ConcentrationStats",
    "FitResult",
    "ConvergenceRow",
    "ConvergenceReport",
    "fit_loglog",
    "convergence_study",
    "FITTED_METRICS",
]

FIT_FLOOR = 1e-10
FITTED_METRICS = (
    "tv_to_centred_poisson",
    "shift_tv",
    "mean_abs_dev",
    "second_moment_in",
    "tail_mass",
)


def tv_distance(p: LatticeDist, q: LatticeDist):
    """Total variation distance: half the l1 distance between the masses."""
    pa, qa = aligned_weights(p, q)
    return 0.5 * float(np.abs(pa - qa).sum())


def kolmogorov_distance(p: LatticeDist, q: LatticeDist):
    """Largest absolute difference between the two distribution functions."""
    pa, qa = aligned_weights(p, q)
    return float(np.max(np.abs(np.cumsum(pa - qa))))


def shift_tv(p: LatticeDist):
    """Total variation distance between ``p`` and its unit translation."""
    return tv_distance(p, p.shifted(1))


def dynkin_residual(model, n, dist: LatticeDist, h):
    """|E[(generator h)(Z)]| under ``dist``; zero in exact equilibrium.

    ``h`` must be defined (or compactly supported) with a margin of the
    largest jump inside the window of ``dist``.
    """
    total = 0.0
    for idx, i in enumerate(range(dist.lo, dist.hi + 1)):
        w = dist.weights[idx]
        if w != 0.0:
            total += w * generator_apply(model, n, h, i)
    return abs(total)


@dataclass(frozen=True)
class ConcentrationStats:
    """Moments of the density deviation ``z - c`` under a lattice law."""

    mean_abs_dev: float
    second_moment_in: float
    tail_mass: float
    first_moment_out: float

    def to_dict(self):
        return {
            "mean_abs_dev": self.mean_abs_dev,
            "second_moment_in": self.second_moment_in,
            "tail_mass": self.tail_mass,
            "first_moment_out": self.first_moment_out,
        }


def concentration_stats(dist: LatticeDist, n, c, delta, delta_prime=None):
    """Deviation moments of ``z = i/n`` around ``c`` under ``dist``.

    Reports E|z-c|, the second moment restricted to ``|z-c| <= delta``, the
    tail probability ``P[|z-c| > delta_prime]`` and the first moment on the
    complementary event ``|z-c| > delta``.
    """
    if delta_prime is None:
        delta_prime = delta
    if not (0.0 < delta_prime <= delta):
        raise ValueError("need 0 < delta_prime <= delta")
    dev = np.abs(dist.states() / n - c)
    w = dist.weights
    inside = dev <= delta
    return ConcentrationStats(
        mean_abs_dev=float(w @ dev),
        second_moment_in=float(w[inside] @ (dev[inside] ** 2)),
        tail_mass=float(w[dev > delta_prime].sum()),
        first_moment_out=float(w[~inside] @ dev[~inside]),
    )


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    r2: float

    def to_dict(self):
        return {"slope": self.slope, "intercept": self.intercept, "r2": self.r2}


def fit_loglog(ns, values, floor=FIT_FLOOR):
    """Least-squares slope of log(value) against log(n).

    Rows with values below ``floor`` are excluded (they are exact up to
    rounding, not rate-limited); returns None when fewer than two rows
    remain.
    """
    pts = [
        (math.log(n), math.log(v))
        for n, v in zip(ns, values)
        if v >= floor
    ]
    if len(pts) < 2:
        return None
    x = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    return FitResult(float(slope), float(intercept), float(r2))


@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    c: float
    v_c: float
    tv_to_centred_poisson: float
    kolmogorov: float
    shift_tv: float
    mean_abs_dev: float
    second_moment_in: float
    tail_mass: float
    first_moment_out: float
    second_diff_diag: float
    boundary_mass: float
    residual_norm: float

    def to_dict(self):
        return {
            "n": self.n,
            "c": self.c,
            "v_c": self.v_c,
            "tv_to_centred_poisson": self.tv_to_centred_poisson,
            "kolmogorov": self.kolmogorov,
            "shift_tv": self.shift_tv,
            "mean_abs_dev": self.mean_abs_dev,
            "second_moment_in": self.second_moment_in,
            "tail_mass": self.tail_mass,
            "first_moment_out": self.first_moment_out,
            "second_diff_diag": self.second_diff_diag,
            "boundary_mass": self.boundary_mass,
            "residual_norm": self.residual_norm,
        }


@dataclass(frozen=True)
class ConvergenceReport:
    rows: tuple
    fitted: dict

    def metric(self, name):
        return [getattr(row, name) for row in self.rows]

    def to_dict(self):
        return {
            "rows": [row.to_dict() for row in self.rows],
            "fitted": {
                k: (fit.to_dict() if fit is not None else None)
                for k, fit in self.fitted.items()
            },
        }


def _second_diff_diag(centered: LatticeDist, v):
    """|E[ g(W+1) - 2 g(W) + g(W-1) ]| for the Stein solution at B = {0}.

    A reported diagnostic only; no threshold is attached to it.
    """
    floor_v = int(math.floor(v))
    hi = max(centered.hi + 1, floor_v + int(math.ceil(4.0 * math.sqrt(v))))
    sol = stein_solve(v, frozenset({0}), (-floor_v, hi))
    g_lo = sol.g_array(centered.lo - 1, centered.hi - 1)
    g_mid = sol.g_array(centered.lo, centered.hi)
    g_hi = sol.g_array(centered.lo + 1, centered.hi + 1)
    return abs(float((g_hi - 2.0 * g_mid + g_lo) @ centered.weights))


def convergence_study(
    model,
    n_grid,
    policy=None,
    delta=None,
    delta_prime=None,
    jobs=1,
    bracket=None,
):
    """Exact-solve metrics against the centred Poisson target over a grid of n.

    For each n the stationary law is solved on a truncated window, centred
    by ``floor(n c)`` and compared with the centred Poisson law of parameter
    ``n v_c``; deviation moments use ``delta`` (default ``c/2``) and
    ``delta_prime`` (default ``delta``).  Log-log slopes are fitted per
    metric; a failed solve for any row aborts the study.
    """
    ns = [int(n) for n in n_grid]
    if not ns or sorted(set(ns)) != ns:
        raise ValueError("n_grid must be strictly increasing and nonempty")
    if any(n < 1 for n in ns):
        raise ValueError("n_grid entries must be positive")

    eq = find_equilibrium(model, bracket)
    if policy is None:
        policy = TruncationPolicy()
    d = delta if delta is not None else eq.c / 2.0
    d_prime = delta_prime if delta_prime is not None else d

    def one(n):
        dist, diag = stationary_exact(model, n, policy, eq=eq)
        centered = centre(dist, int(math.floor(n * eq.c)))
        v = n * eq.v_c
        target = CentredPoisson(v)
        t_hi = max(centered.hi, target.shift + int(math.ceil(16.0 * math.sqrt(v))))
        t_lat = target.to_lattice(hi=t_hi)
        stats = concentration_stats(dist, n, eq.c, d, d_prime)
        return ConvergenceRow(
            n=n,
            c=eq.c,
            v_c=eq.v_c,
            tv_to_centred_poisson=tv_distance(centered, t_lat),
            kolmogorov=kolmogorov_distance(centered, t_lat),
            shift_tv=shift_tv(centered),
            mean_abs_dev=stats.mean_abs_dev,
            second_moment_in=stats.second_moment_in,
            tail_mass=stats.tail_mass,
            first_moment_out=stats.first_moment_out,
            second_diff_diag=_second_diff_diag(centered, v),
            boundary_mass=diag["boundary_mass"],
            residual_norm=diag["residual_norm"],
        )

    if jobs and jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            rows = tuple(ex.map(one, ns))
    else:
        rows = tuple(one(n) for n in ns)

    fitted = {
        name: fit_loglog(ns, [getattr(row, name) for row in rows])
        for name in FITTED_METRICS
    }
    return ConvergenceReport(rows=rows, fitted=fitted)
