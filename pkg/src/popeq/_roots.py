"""Scalar root bracketing and bisection used by the drift analyses."""

import numpy as np

from .errors import MultipleRoots, NoSignChange

SCAN_POINTS = 64


def scan_brackets(f, lo, hi, num=SCAN_POINTS):
    """Return the sub-intervals of [lo, hi] on which f changes sign.

    A grid point where f is exactly zero counts as its own (degenerate)
    bracket.  Consecutive grid intervals sharing a zero endpoint are not
    double counted.
    """
    zs = np.linspace(lo, hi, num)
    vals = np.array([float(f(z)) for z in zs])
    brackets = []
    for i in range(num - 1):
        a, b = vals[i], vals[i + 1]
        if a == 0.0:
            if not brackets or brackets[-1][1] < zs[i]:
                brackets.append((zs[i], zs[i]))
        elif a * b < 0.0:
            brackets.append((zs[i], zs[i + 1]))
    if vals[-1] == 0.0:
        brackets.append((zs[-1], zs[-1]))
    return brackets


def unique_bracket(f, lo, hi, num=SCAN_POINTS):
    """Bracket the single sign change of f on [lo, hi].

    Raises NoSignChange when the scan finds none and MultipleRoots when it
    finds more than one.
    """
    brackets = scan_brackets(f, lo, hi, num)
    if not brackets:
        raise NoSignChange(f"no sign change of the drift on [{lo}, {hi}]")
    if len(brackets) > 1:
        raise MultipleRoots(
            f"{len(brackets)} sign changes of the drift on [{lo}, {hi}]"
        )
    return brackets[0]


def bisect(f, lo, hi, width=1e-14):
    """Bisect a sign-change bracket down to the requested width."""
    if lo == hi:
        return lo
    flo = float(f(lo))
    if flo == 0.0:
        return lo
    fhi = float(f(hi))
    if fhi == 0.0:
        return hi
    if flo * fhi > 0.0:
        raise NoSignChange(f"[{lo}, {hi}] does not bracket a root")
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fmid = float(f(mid))
        if fmid == 0.0:
            return mid
        if flo * fmid < 0.0:
            hi = mid
        else:
            lo, flo = mid, fmid
    return 0.5 * (lo + hi)
