"""Exact stationary distributions on a truncated window of the integers."""

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csc_matrix, csr_matrix, identity
from scipy.sparse.linalg import spsolve

from .equilibrium import find_equilibrium
from .errors import SingularSystem, WindowTooSmall
from .lattice import LatticeDist
from .model import eval_rate

__all__ = ["TruncationPolicy", "stationary_exact", "centre"]

DIRECT_SOLVER_MAX_STATES = 200_000
BOUNDARY_MASS_LIMIT = 1e-6


@dataclass(frozen=True)
class TruncationPolicy:
    """Where to truncate the integer state space.

    The window is ``center +/- half_width`` with jumps that leave it
    redirected to the nearest boundary state, which preserves total rate and
    keeps the truncated matrix a proper generator.  Defaults place the
    center at ``floor(n c)`` with half width ``ceil(k sqrt(n v_c))``.
    """

    k: float = 12.0
    center: int = None
    half_width: int = None
    max_states: int = DIRECT_SOLVER_MAX_STATES

    def resolve(self, eq, n):
        center = self.center
        if center is None:
            center = int(math.floor(n * eq.c))
        spread = math.sqrt(n * eq.v_c)
        half_width = self.half_width
        if half_width is None:
            half_width = int(math.ceil(self.k * spread))
        if half_width < 3.0 * spread:
            raise ValueError(
                f"half_width {half_width} is below 3 standard deviations "
                f"({3.0 * spread:.1f}) of the equilibrium spread"
            )
        return int(center), int(half_width)


def _build_generator(model, n, lo, hi):
    """Truncated generator with reflecting redirection, as a CSR matrix."""
    size = hi - lo + 1
    states = np.arange(lo, hi + 1)
    zs = states / n
    rows = []
    cols = []
    data = []
    diag = np.zeros(size)
    for j in model.jump_support:
        try:
            lam = n * np.asarray(eval_rate(model, j, zs), dtype=float)
            if lam.shape != zs.shape:
                raise TypeError
        except (TypeError, ValueError):
            lam = n * np.array([float(eval_rate(model, j, z)) for z in zs])
        targets = np.clip(states + j, lo, hi)
        active = (lam > 0.0) & (targets != states)
        if not np.any(active):
            continue
        rows.append(np.nonzero(active)[0])
        cols.append(targets[active] - lo)
        data.append(lam[active])
        np.add.at(diag, np.nonzero(active)[0], -lam[active])
    if not rows:
        raise SingularSystem("all rates vanish on the window")
    rows = np.concatenate(rows + [np.arange(size)])
    cols = np.concatenate(cols + [np.arange(size)])
    data = np.concatenate(data + [diag])
    return csr_matrix((data, (rows, cols)), shape=(size, size))


def _solve_direct(Q, anchor):
    size = Q.shape[0]
    A = Q.T.tolil()
    A[anchor, :] = 1.0
    b = np.zeros(size)
    b[anchor] = 1.0
    with np.errstate(all="ignore"):
        try:
            pi = spsolve(csc_matrix(A), b)
        except RuntimeError as exc:
            raise SingularSystem(str(exc)) from exc
    if not np.all(np.isfinite(pi)):
        raise SingularSystem("factorization produced non-finite probabilities")
    return pi


def _solve_power(Q, anchor, tol=1e-10, max_sweeps=2000, inner=1000):
    """Uniformized power iteration; fallback for very large windows."""
    size = Q.shape[0]
    rate_scale = float(np.max(-Q.diagonal()))
    if rate_scale <= 0:
        raise SingularSystem("generator has an empty diagonal")
    P = identity(size, format="csr") + Q.multiply(1.0 / (1.05 * rate_scale))
    pi = np.zeros(size)
    pi[anchor] = 1.0
    last = math.inf
    for _ in range(max_sweeps):
        for _ in range(inner):
            pi = pi @ P
        pi = np.maximum(pi, 0.0)
        pi /= pi.sum()
        res = float(np.abs(pi @ Q).sum())
        if res <= tol:
            return pi
        if res > 0.999 * last and res < 1e-8:
            # fixed point of the iteration at rounding level
            return pi
        last = res
    raise SingularSystem(
        f"power iteration stalled at residual {last!r} (tolerance {tol!r})"
    )


def _solve_window(model, n, lo, hi, method):
    Q = _build_generator(model, n, lo, hi)
    anchor = min(max(0, -lo), Q.shape[0] - 1)
    size = Q.shape[0]
    if method == "direct" or (method == "auto" and size <= DIRECT_SOLVER_MAX_STATES):
        pi = _solve_direct(Q, anchor)
        used = "direct"
    else:
        pi = _solve_power(Q, anchor)
        used = "power"
    residual = float(np.abs(pi @ Q).sum())
    if pi.min() < -1e-9:
        raise SingularSystem(
            f"solution has a negative probability {pi.min()!r}; the window "
            "is likely not irreducible"
        )
    pi = np.maximum(pi, 0.0)
    total = pi.sum()
    if not (total > 0.0) or not math.isfinite(total):
        raise SingularSystem("solution mass is degenerate")
    pi /= total
    boundary = float(pi[:2].sum() + pi[-2:].sum())
    return pi, {"boundary_mass": boundary, "residual_norm": residual, "method": used}


def stationary_exact(model, n, policy=None, eq=None, method="auto"):
    """Stationary distribution of the scale-``n`` chain on a truncated window.

    Builds the truncated generator (reflecting redirection at the edges) and
    solves the global balance equations by sparse LU, or by uniformized
    power iteration for very large windows.  Returns the distribution and a
    diagnostics dict with ``boundary_mass`` (mass on the two outermost
    states each side) and ``residual_norm`` (l1 norm of pi Q).  If the
    boundary mass exceeds 1e-6 the window is doubled once; a second failure
    raises ``WindowTooSmall``.
    """
    gcd = 0
    for j in model.jump_support:
        gcd = math.gcd(gcd, abs(j))
    if gcd > 1:
        raise SingularSystem(
            f"jump sizes share the factor {gcd}; the window splits into "
            "disconnected residue classes"
        )
    if eq is None:
        eq = find_equilibrium(model)
    if policy is None:
        policy = TruncationPolicy()
    center, half_width = policy.resolve(eq, n)

    retried = False
    for attempt in (0, 1):
        lo, hi = center - half_width, center + half_width
        pi, diag = _solve_window(model, n, lo, hi, method)
        diag["window"] = (lo, hi)
        diag["states"] = hi - lo + 1
        diag["retried"] = retried
        if diag["boundary_mass"] <= BOUNDARY_MASS_LIMIT:
            dist = LatticeDist(lo, pi, tol=1e-9)
            return dist, diag
        retried = True
        half_width *= 2
    raise WindowTooSmall(
        f"boundary mass {diag['boundary_mass']!r} still above "
        f"{BOUNDARY_MASS_LIMIT} after doubling the window to "
        f"[{lo}, {hi}]"
    )


def centre(dist: LatticeDist, by):
    """Translate the distribution down by ``by`` states."""
    return dist.shifted(-int(by))
