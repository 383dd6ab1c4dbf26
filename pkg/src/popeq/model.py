"""Density dependent jump models on the integers.

A model prescribes a family of jump rates ``{lambda_j}``: with scale
parameter ``n``, the process jumps from state ``i`` to ``i + j`` at rate
``n * lambda_j(i / n)``.  This module evaluates the induced drift and
variance-rate functions, applies the infinitesimal generator, splits the
generator into its leading diffusion/drift part plus a curvature
remainder, and checks the standing regularity assumptions numerically.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._roots import bisect, unique_bracket
from .errors import MultipleRoots, NoSignChange, WindowTooSmall

__all__ = [
    "BdiGroupBirths",
    "AffineRates",
    "TabulatedRates",
    "ModelSpec",
    "WindowedFn",
    "AssumptionReport",
    "eval_rate",
    "eval_drift",
    "eval_drift_prime",
    "eval_variance_rate",
    "generator_apply",
    "generator_decompose",
    "up_remainder_coeff",
    "down_remainder_coeff",
    "check_assumptions",
]


def _as_pairs(q):
    if hasattr(q, "items"):
        items = q.items()
    else:
        items = q
    return tuple(sorted((int(j), float(w)) for j, w in items))


@dataclass(frozen=True)
class BdiGroupBirths:
    """Immigration rate ``a``, birth-event rate ``b`` with offspring law
    ``q``, and per-capita death rate ``d``.

    The jump rates are ``lambda_{-1}(z) = d z``, ``lambda_1(z) = a + b q_1 z``
    and ``lambda_j(z) = b q_j z`` for ``j >= 2``; population-driven terms are
    evaluated at ``max(z, 0)`` so the rates stay nonnegative on all of R.
    """

    a: float
    b: float
    d: float
    q: tuple = ((1, 1.0),)

    family = "bdi"

    def __post_init__(self):
        pairs = _as_pairs(self.q)
        if any(j < 1 for j, _ in pairs):
            raise ValueError("offspring sizes must be >= 1")
        if any(w < 0 for _, w in pairs):
            raise ValueError("offspring probabilities must be >= 0")
        pairs = tuple((j, w) for j, w in pairs if w > 0.0)
        total = sum(w for _, w in pairs)
        if self.b > 0 and abs(total - 1.0) > 1e-12:
            raise ValueError(f"offspring probabilities sum to {total!r}")
        if not (self.a > 0):
            raise ValueError("immigration rate a must be positive")
        if self.b < 0:
            raise ValueError("birth-event rate b must be nonnegative")
        if not (self.d > 0):
            raise ValueError("death rate d must be positive")
        object.__setattr__(self, "q", pairs)
        support = {-1, 1}
        if self.b > 0:
            support.update(j for j, _ in pairs)
        object.__setattr__(self, "_support", tuple(sorted(support)))
        object.__setattr__(self, "_qmap", dict(pairs))

    @property
    def jump_support(self):
        return self._support

    @property
    def m1(self):
        return sum(j * w for j, w in self.q)

    @property
    def m2(self):
        return sum(j * j * w for j, w in self.q)

    def rate(self, j, z):
        zp = np.maximum(z, 0.0)
        if j == -1:
            return self.d * zp
        if j == 1:
            return self.a + self.b * self._qmap.get(1, 0.0) * zp
        if j >= 2 and self.b > 0:
            return self.b * self._qmap.get(j, 0.0) * zp
        return 0.0 * zp

    def rate_prime(self, j, z):
        if z < 0:
            return 0.0
        if j == -1:
            return self.d
        if j == 1:
            return self.b * self._qmap.get(1, 0.0)
        if j >= 2 and self.b > 0:
            return self.b * self._qmap.get(j, 0.0)
        return 0.0

    def rate_second(self, j, z):
        return 0.0

    def to_dict(self):
        return {
            "family": self.family,
            "a": self.a,
            "b": self.b,
            "d": self.d,
            "q": [[j, w] for j, w in self.q],
        }


@dataclass(frozen=True)
class AffineRates:
    """Rates ``lambda_j(z) = max(0, u_j + v_j * max(z, 0))``.

    ``coeffs`` maps each jump size to its ``(u, v)`` pair.
    """

    coeffs: tuple

    family = "affine"

    def __post_init__(self):
        if hasattr(self.coeffs, "items"):
            items = [(j, uv) for j, uv in self.coeffs.items()]
        else:
            items = [(row[0], (row[1], row[2])) for row in self.coeffs]
        pairs = tuple(
            sorted((int(j), float(u), float(v)) for j, (u, v) in items)
        )
        if any(j == 0 for j, _, _ in pairs):
            raise ValueError("jump size 0 is not a transition")
        pairs = tuple(p for p in pairs if p[1] != 0.0 or p[2] != 0.0)
        if not pairs:
            raise ValueError("at least one jump must have a nonzero rate")
        object.__setattr__(self, "coeffs", pairs)
        object.__setattr__(self, "_cmap", {j: (u, v) for j, u, v in pairs})
        object.__setattr__(self, "_support", tuple(j for j, _, _ in pairs))

    @property
    def jump_support(self):
        return self._support

    def rate(self, j, z):
        uv = self._cmap.get(j)
        zp = np.maximum(z, 0.0)
        if uv is None:
            return 0.0 * zp
        u, v = uv
        return np.maximum(u + v * zp, 0.0)

    def rate_prime(self, j, z):
        uv = self._cmap.get(j)
        if uv is None or z < 0:
            return 0.0
        u, v = uv
        return v if u + v * max(z, 0.0) > 0 else 0.0

    def rate_second(self, j, z):
        return 0.0

    def to_dict(self):
        return {
            "family": self.family,
            "rates": [[j, u, v] for j, u, v in self.coeffs],
        }


@dataclass(frozen=True)
class TabulatedRates:
    """Host-registered rate callables, one per jump size.

    ``rates`` maps jump sizes to callables ``z -> lambda_j(z)``; the host
    guarantees nonnegativity.  ``derivs``, when given, maps jump sizes to
    analytic derivatives ``z -> lambda_j'(z)``.
    """

    rates: tuple
    derivs: tuple = None

    family = "tabulated"

    def __post_init__(self):
        pairs = _pairs_of_callables(self.rates)
        if any(j == 0 for j, _ in pairs):
            raise ValueError("jump size 0 is not a transition")
        if not pairs:
            raise ValueError("at least one jump rate is required")
        object.__setattr__(self, "rates", pairs)
        object.__setattr__(self, "_rmap", dict(pairs))
        object.__setattr__(self, "_support", tuple(j for j, _ in pairs))
        if self.derivs is not None:
            dpairs = _pairs_of_callables(self.derivs)
            object.__setattr__(self, "derivs", dpairs)
            object.__setattr__(self, "_dmap", dict(dpairs))
        else:
            object.__setattr__(self, "_dmap", {})

    @property
    def jump_support(self):
        return self._support

    def rate(self, j, z):
        fn = self._rmap.get(j)
        if fn is None:
            return 0.0 * np.maximum(z, 0.0)
        return fn(z)

    def rate_prime(self, j, z):
        fn = self._dmap.get(j)
        return fn(z) if fn is not None else None

    def rate_second(self, j, z):
        return None

    def to_dict(self):
        return {"family": self.family, "jumps": list(self._support)}


def _pairs_of_callables(obj):
    items = obj.items() if hasattr(obj, "items") else obj
    return tuple(sorted(((int(j), fn) for j, fn in items), key=lambda p: p[0]))


ModelSpec = BdiGroupBirths | AffineRates | TabulatedRates


@dataclass(frozen=True)
class WindowedFn:
    """A real function on a finite integer window.

    Outside the window the function either raises ``WindowTooSmall`` or, for
    compactly supported functions (``zero_outside=True``), evaluates to 0.
    """

    lo: int
    values: np.ndarray
    zero_outside: bool = False

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "lo", int(self.lo))

    @classmethod
    def from_callable(cls, fn, lo, hi, zero_outside=False):
        return cls(lo, [fn(k) for k in range(lo, hi + 1)], zero_outside)

    @property
    def hi(self):
        return self.lo + len(self.values) - 1

    def __call__(self, k):
        k = int(k)
        if self.lo <= k <= self.hi:
            return float(self.values[k - self.lo])
        if self.zero_outside:
            return 0.0
        raise WindowTooSmall(
            f"function window [{self.lo}, {self.hi}] does not contain {k}"
        )


def eval_rate(model, j, z):
    """The jump rate ``lambda_j(z)``; zero for jumps outside the support."""
    j = int(j)
    if j == 0:
        raise ValueError("jump size 0 is not a transition")
    if j not in model.jump_support:
        return 0.0
    r = model.rate(j, z)
    if np.any(np.asarray(r) < 0.0):
        raise ValueError(f"rate function for jump {j} returned a negative value")
    return r


def eval_drift(model, z):
    """Mean growth rate of the density: ``sum_j j * lambda_j(z)``."""
    return sum(j * model.rate(j, z) for j in model.jump_support)


def eval_variance_rate(model, z):
    """Instantaneous variance rate: ``sum_j j^2 * lambda_j(z)``."""
    return sum(j * j * model.rate(j, z) for j in model.jump_support)


def eval_drift_prime(model, z):
    """Analytic derivative of the drift, or None when unavailable."""
    total = 0.0
    for j in model.jump_support:
        rp = model.rate_prime(j, z)
        if rp is None:
            return None
        total += j * rp
    return total


def generator_apply(model, n, h, i):
    """Apply the generator at state ``i``: ``sum_j n lambda_j(i/n) [h(i+j) - h(i)]``."""
    z = i / n
    base = h(i)
    acc = 0.0
    for j in model.jump_support:
        lam = float(model.rate(j, z))
        if lam > 0.0:
            acc += lam * (h(i + j) - base)
    return n * acc


def up_remainder_coeff(g, i, j, via="first_diff"):
    """Curvature weight on the rate of an upward jump of size ``j >= 2``.

    Appears in the generator split; the two evaluation routes (a telescoped
    first-difference sum and a binomially weighted second-difference sum)
    are algebraically identical.
    """
    if j < 2:
        raise ValueError("remainder coefficients exist for |j| >= 2 only")
    if via == "first_diff":
        acc = -j * (j - 1) * (g(i) - g(i - 1))
        for k in range(1, j):
            acc += 2 * k * (g(i + j - k) - g(i + j - k - 1))
        return acc / 2.0
    if via == "second_diff":
        acc = 0.0
        for k in range(2, j + 1):
            l = i + j - k + 1
            acc += (k * (k - 1) // 2) * (g(l) - 2 * g(l - 1) + g(l - 2))
        return acc
    raise ValueError(f"unknown route {via!r}")


def down_remainder_coeff(g, i, j, via="first_diff"):
    """Curvature weight on the rate of a downward jump of size ``j >= 2``."""
    if j < 2:
        raise ValueError("remainder coefficients exist for |j| >= 2 only")
    if via == "first_diff":
        acc = j * (j - 1) * (g(i) - g(i - 1))
        for k in range(1, j):
            acc -= 2 * k * (g(i - j + k) - g(i - j + k - 1))
        return acc / 2.0
    if via == "second_diff":
        acc = 0.0
        for k in range(2, j + 1):
            l = i - j + k
            acc += (k * (k - 1) // 2) * (g(l) - 2 * g(l - 1) + g(l - 2))
        return acc
    raise ValueError(f"unknown route {via!r}")


def generator_decompose(model, n, h, i, coeff_via="first_diff"):
    """Split the generator applied to ``h`` at ``i`` into three exact parts.

    Returns ``(main_sigma_term, main_drift_term, remainder)`` where, with
    ``g(l) = h(l+1) - h(l)``, the first part is
    ``(n/2) * sigma2(i/n) * [g(i) - g(i-1)]``, the second is
    ``n * F(i/n) * g(i)``, and the remainder collects the drift correction
    ``-(n/2) F(i/n) [g(i) - g(i-1)]`` plus curvature terms for jumps of size
    two or more.  The three parts sum to ``generator_apply(model, n, h, i)``.
    """
    z = i / n
    drift = float(eval_drift(model, z))
    var_rate = float(eval_variance_rate(model, z))

    def g(l):
        return h(l + 1) - h(l)

    dg = g(i) - g(i - 1)
    main_sigma = 0.5 * n * var_rate * dg
    main_drift = n * drift * g(i)
    remainder = -0.5 * n * drift * dg
    for j in model.jump_support:
        if abs(j) < 2:
            continue
        lam = float(model.rate(j, z))
        if lam == 0.0:
            continue
        if j > 0:
            remainder += n * lam * up_remainder_coeff(g, i, j, coeff_via)
        else:
            remainder -= n * lam * down_remainder_coeff(g, i, -j, coeff_via)
    return main_sigma, main_drift, remainder


@dataclass(frozen=True)
class AssumptionReport:
    """Numeric verdicts for the standing regularity assumptions."""

    a1_ok: bool
    a2a_ok: bool
    a2b_ok: bool
    a3_ok: bool
    c: float
    f_prime_c: float
    mu_eta: dict
    gcd_of_support: int
    alpha_max: float
    lambda0: float
    l1: float
    l2: float
    notes: tuple

    def to_dict(self):
        return {
            "a1_ok": self.a1_ok,
            "a2a_ok": self.a2a_ok,
            "a2b_ok": self.a2b_ok,
            "a3_ok": self.a3_ok,
            "c": self.c,
            "f_prime_c": self.f_prime_c,
            "mu_eta": {repr(k): v for k, v in self.mu_eta.items()},
            "gcd_of_support": self.gcd_of_support,
            "alpha_max": self.alpha_max,
            "lambda0": self.lambda0,
            "l1": self.l1,
            "l2": self.l2,
            "notes": list(self.notes),
        }


def _derivative(model, j, z, step, order=1):
    if order == 1:
        rp = model.rate_prime(j, z)
        if rp is not None:
            return float(rp)
        return (float(model.rate(j, z + step)) - float(model.rate(j, z - step))) / (
            2.0 * step
        )
    rs = model.rate_second(j, z)
    if rs is not None:
        return float(rs)
    return (
        float(model.rate(j, z + step))
        - 2.0 * float(model.rate(j, z))
        + float(model.rate(j, z - step))
    ) / (step * step)


def check_assumptions(model, window, eta_grid=(0.05, 0.1, 0.2), grid_points=257, delta=None):
    """Check the regularity assumptions on a window, reporting flags not errors.

    A1 looks for a unique attracting drift root on the window and estimates
    the away-from-root drift infima on the scan grid; A2(b) reports half the
    window infimum of the unit up-jump rate; A2(a) fits growth-envelope
    constants on the window (finite jump support makes the moment sums
    finite, so the reported moment exponent is always 1); A3(a) requires
    every supported rate to be positive at the root.  The derivative-ratio
    suprema for A4/A5 are estimated on ``|z - c| <= delta`` with analytic
    derivatives when the family provides them and central differences
    otherwise.
    """
    lo, hi = float(window[0]), float(window[1])
    notes = []
    zs = np.linspace(lo, hi, grid_points)

    def drift(z):
        return float(eval_drift(model, z))

    c = math.nan
    f_prime_c = math.nan
    root_unique = False
    try:
        blo, bhi = unique_bracket(drift, lo, hi, grid_points)
        c = bisect(drift, blo, bhi)
        root_unique = True
    except NoSignChange:
        notes.append("A1: no drift root bracketed on the window")
    except MultipleRoots as exc:
        notes.append(f"A1: {exc}")

    step = 1e-5 * max(1.0, abs(c) if math.isfinite(c) else 1.0)
    if root_unique:
        dfp = eval_drift_prime(model, c)
        if dfp is None:
            dfp = (drift(c + step) - drift(c - step)) / (2.0 * step)
        f_prime_c = float(dfp)

    mu_eta = {}
    if root_unique:
        for eta in eta_grid:
            away = np.abs(zs - c) >= eta
            if not np.any(away):
                continue
            mu_eta[float(eta)] = float(min(abs(drift(z)) for z in zs[away]))
    a1_ok = (
        root_unique
        and f_prime_c < 0.0
        and all(v > 0.0 for v in mu_eta.values())
    )

    lam1 = np.array([float(eval_rate(model, 1, z)) for z in zs])
    inf_lam1 = float(lam1.min()) if 1 in model.jump_support else 0.0
    lambda0 = 0.5 * inf_lam1
    a2b_ok = inf_lam1 > 0.0

    support = model.jump_support
    gcd_of_support = 0
    for j in support:
        gcd_of_support = math.gcd(gcd_of_support, abs(j))
    if gcd_of_support != 1:
        notes.append(
            f"jump sizes share the factor {gcd_of_support}; total-variation "
            "approximation on the integer lattice is not meaningful"
        )

    c_ref = c if math.isfinite(c) else 0.5 * (lo + hi)
    env = {}
    finite = True
    for j in support:
        vals = np.array([float(model.rate(j, z)) for z in zs])
        if not np.all(np.isfinite(vals)):
            finite = False
            notes.append(f"A2(a): rate for jump {j} is not finite on the window")
            continue
        env[j] = float(np.max(vals / (1.0 + np.abs(zs - c_ref))))
    a2a_ok = finite
    alpha_max = 1.0
    if finite:
        moment = sum(abs(j) ** 3 * cj for j, cj in env.items())
        notes.append(
            f"A2(a): finite jump support; envelope moment sum "
            f"sum |j|^(2+1) c_j = {moment:.6g}"
        )

    a3_ok = root_unique and all(float(model.rate(j, c)) > 0.0 for j in support)

    l1 = math.nan
    l2 = math.nan
    if root_unique:
        if delta is None:
            delta = abs(c) / 2.0 if c != 0 else 0.5
        local = zs[np.abs(zs - c) <= delta]
        if local.size == 0:
            local = np.array([c])
        l1 = 0.0
        l2 = 0.0
        for j in support:
            lam_c = float(model.rate(j, c))
            if lam_c <= 0.0:
                continue
            d1 = max(abs(_derivative(model, j, z, step, 1)) for z in local)
            d2 = max(abs(_derivative(model, j, z, step, 2)) for z in local)
            l1 = max(l1, d1 / lam_c)
            l2 = max(l2, d2 / (abs(j) * lam_c))

    return AssumptionReport(
        a1_ok=bool(a1_ok),
        a2a_ok=bool(a2a_ok),
        a2b_ok=bool(a2b_ok),
        a3_ok=bool(a3_ok),
        c=float(c),
        f_prime_c=float(f_prime_c),
        mu_eta=mu_eta,
        gcd_of_support=int(gcd_of_support),
        alpha_max=float(alpha_max),
        lambda0=float(lambda0),
        l1=float(l1),
        l2=float(l2),
        notes=tuple(notes),
    )
