"""Exact stochastic simulation of the jump chain and occupation estimates.

The long-run occupation measure (time-weighted empirical distribution) of a
single trajectory estimates the stationary law; this is the Monte Carlo
cross-check for the exact truncated solves.
"""

import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .equilibrium import find_equilibrium
from .errors import PopeqError, RateOverflow, StuckState
from .lattice import LatticeDist

__all__ = ["SimConfig", "OccupationEstimate", "ssa_run"]

_BLOCK = 1 << 16
_SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class SimConfig:
    """Simulation knobs.

    Defaults resolved at run time: ``t_burn`` is five relaxation times
    ``5 / |F'(c)|``, ``t_sample`` is ``1e4 * v_c``, and the initial state
    is ``floor(n c)``.  Replica ``r`` draws from an independent stream
    seeded by the pair ``(seed, r)``, so results are deterministic given
    ``(seed, replicas)``.
    """

    n: int
    t_sample: float = None
    t_burn: float = None
    replicas: int = 1
    seed: int = 0
    initial_state: int = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be a positive integer")
        if self.replicas < 1:
            raise ValueError("replicas must be >= 1")
        if self.t_sample is not None and not (self.t_sample > 0):
            raise ValueError("t_sample must be positive")


@dataclass(frozen=True)
class OccupationEstimate:
    """Pooled time-in-state distribution over the sampling horizon."""

    dist: LatticeDist
    total_jumps: int
    max_excursion: float


def _run_replica(model, n, init, t_burn, horizon, rng, c_ref):
    support = model.jump_support
    inv_n = 1.0 / n
    cache = {}
    occ = defaultdict(float)
    exp_block = rng.standard_exponential(_BLOCK).tolist()
    uni_block = rng.random(_BLOCK).tolist()
    ei = ui = 0
    i = init
    t = 0.0
    jumps = 0
    exc = abs(i * inv_n - c_ref)
    while True:
        entry = cache.get(i)
        if entry is None:
            z = i * inv_n
            acc = 0.0
            cum = []
            js = []
            for j in support:
                lam = float(model.rate(j, z))
                if lam < 0.0:
                    raise ValueError(
                        f"rate function for jump {j} returned a negative value"
                    )
                if lam != 0.0:
                    acc += n * lam
                    cum.append(acc)
                    js.append(j)
            if not math.isfinite(acc):
                raise RateOverflow(f"total rate at state {i} is not finite")
            entry = (acc, cum, js)
            cache[i] = entry
        total, cum, js = entry
        if total <= 0.0:
            raise StuckState(f"all jump rates vanish at state {i}")
        if ei == _BLOCK:
            exp_block = rng.standard_exponential(_BLOCK).tolist()
            ei = 0
        dt = exp_block[ei] / total
        ei += 1
        t_next = t + dt
        lo_t = t if t > t_burn else t_burn
        if t_next >= horizon:
            if horizon > lo_t:
                occ[i] += horizon - lo_t
            break
        if t_next > lo_t:
            occ[i] += t_next - lo_t
        if ui == _BLOCK:
            uni_block = rng.random(_BLOCK).tolist()
            ui = 0
        u = uni_block[ui] * total
        ui += 1
        k = 0
        last = len(cum) - 1
        while u > cum[k] and k < last:
            k += 1
        i += js[k]
        jumps += 1
        e = i * inv_n - c_ref
        if e < 0.0:
            e = -e
        if e > exc:
            exc = e
        t = t_next
    return occ, jumps, exc


def ssa_run(model, cfg: SimConfig):
    """Simulate the chain exactly and pool occupation times over replicas.

    Each replica draws exponential holding times with the total rate at the
    current state, picks the executed jump in proportion to its rate,
    discards the burn-in interval and accumulates time in state over the
    sampling horizon.  Replicas are pooled in index order, so the estimate
    is reproducible bit for bit.
    """
    needs_eq = (
        cfg.t_sample is None or cfg.t_burn is None or cfg.initial_state is None
    )
    eq = None
    try:
        eq = find_equilibrium(model)
    except PopeqError:
        if needs_eq:
            raise
    t_burn = cfg.t_burn if cfg.t_burn is not None else 5.0 / abs(eq.f_prime_c)
    t_sample = cfg.t_sample if cfg.t_sample is not None else 1e4 * eq.v_c
    init = (
        cfg.initial_state
        if cfg.initial_state is not None
        else int(math.floor(cfg.n * eq.c))
    )
    if not (t_sample > 0):
        raise ValueError("t_sample must be positive")
    if t_burn < 0:
        raise ValueError("t_burn must be nonnegative")
    c_ref = eq.c if eq is not None else init / cfg.n

    pooled = defaultdict(float)
    total_jumps = 0
    max_exc = 0.0
    horizon = t_burn + t_sample
    for r in range(cfg.replicas):
        seq = np.random.SeedSequence((cfg.seed & _SEED_MASK, r))
        rng = np.random.default_rng(seq)
        occ, jumps, exc = _run_replica(
            model, cfg.n, int(init), t_burn, horizon, rng, c_ref
        )
        for state, held in occ.items():
            pooled[state] += held
        total_jumps += jumps
        if exc > max_exc:
            max_exc = exc

    lo = min(pooled)
    hi = max(pooled)
    weights = np.zeros(hi - lo + 1)
    for state, held in pooled.items():
        weights[state - lo] = held
    weights /= weights.sum()
    return OccupationEstimate(
        dist=LatticeDist(lo, weights),
        total_jumps=int(total_jumps),
        max_excursion=float(max_exc),
    )
