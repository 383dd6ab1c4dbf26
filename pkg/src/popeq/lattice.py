"""Finitely supported probability distributions on the integers."""

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class LatticeDist:
    """A probability distribution on consecutive integers.

    ``weights[k]`` is the mass at state ``offset + k``.  The raw weights may
    sum to anything in ``[1 - tol, 1 + tol]``; the stored vector is
    renormalized so that it sums to one exactly.
    """

    offset: int
    weights: np.ndarray
    tol: float = 1e-9

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("weights must be a nonempty 1-d vector")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        if w.min() < 0.0:
            raise ValueError(f"negative weight {w.min()!r}")
        total = w.sum()
        if abs(total - 1.0) > self.tol:
            raise ValueError(f"weights sum to {total!r}, outside 1 +/- {self.tol}")
        w /= total
        # absorb the trailing rounding error into the heaviest state
        w[int(np.argmax(w))] += 1.0 - w.sum()
        w.setflags(write=False)
        object.__setattr__(self, "offset", int(self.offset))
        object.__setattr__(self, "weights", w)

    @classmethod
    def delta(cls, k):
        return cls(offset=int(k), weights=np.ones(1))

    @property
    def lo(self):
        return self.offset

    @property
    def hi(self):
        return self.offset + len(self.weights) - 1

    def states(self):
        return np.arange(self.lo, self.hi + 1)

    def pmf(self, k):
        k = int(k)
        if self.lo <= k <= self.hi:
            return float(self.weights[k - self.offset])
        return 0.0

    def mean(self):
        return float(self.states() @ self.weights)

    def var(self):
        mu = self.mean()
        return float(((self.states() - mu) ** 2) @ self.weights)

    def shifted(self, by):
        """The same distribution translated by ``by`` states."""
        return LatticeDist(self.offset + int(by), self.weights, self.tol)

    def trimmed(self, eps=0.0):
        """Drop zero (or ``<= eps``) tails from both ends of the support."""
        idx = np.nonzero(self.weights > eps)[0]
        if idx.size == 0:
            raise ValueError("cannot trim all mass away")
        lo, hi = int(idx[0]), int(idx[-1])
        return LatticeDist(self.offset + lo, self.weights[lo : hi + 1], self.tol)


def aligned_weights(p: LatticeDist, q: LatticeDist):
    """Weight vectors of p and q padded onto their common support range."""
    lo = min(p.lo, q.lo)
    hi = max(p.hi, q.hi)
    pa = np.zeros(hi - lo + 1)
    qa = np.zeros(hi - lo + 1)
    pa[p.lo - lo : p.hi - lo + 1] = p.weights
    qa[q.lo - lo : q.hi - lo + 1] = q.weights
    return pa, qa
