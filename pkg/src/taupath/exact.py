"""Exact simulation: Gillespie's direct method and exactly simulated pairs.

The jitted ``_``-prefixed functions work on raw arrays and are shared with
the estimators.  They all take a ``ctr`` array of diagnostic counters that
they update in place (see ``CTR_*``).  The public functions wrap them for
single calls from Python.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from .model import ReactionNetwork
from .rng import RngStream, derive, exponential, uniform
from .vm import apply_into, observe, rates_into, states_equal

# diagnostic counter slots
CTR_STEPS, CTR_CLAMPS, CTR_RHO, CTR_P_SATURATED, CTR_P_DRAWN, CTR_DIVERGED = range(6)
N_COUNTERS = 6


def new_counters() -> np.ndarray:
    return np.zeros(N_COUNTERS, dtype=np.int64)


def scratch(net: ReactionNetwork, extra_depth: int = 0):
    """Stack and rate buffers sized for ``net``."""
    depth = max(net.compiled.depth, extra_depth) + 2
    k = net.n_reactions
    return np.empty(depth), np.empty(k), np.empty(k)


@njit(cache=True)
def _choose(rates, total, u):
    target = u * total
    acc = 0.0
    last = -1
    for k in range(rates.shape[0]):
        if rates[k] > 0.0:
            last = k
            acc += rates[k]
            if target < acc:
                return k
    return last


@njit(cache=True)
def _ssa_step(stoich, prop, params, x, t, T, st, stack, rates, ctr):
    """One direct-method step from ``(x, t)``; returns ``(t_next, k)``.

    ``k == -1`` means no reaction fired before ``T`` and ``t_next == T``.
    ``x`` is updated in place.
    """
    total = rates_into(prop, x, params, stack, rates)
    if total <= 0.0:
        return T, -1
    wait = exponential(st, total)
    if t + wait > T:
        return T, -1
    k = _choose(rates, total, uniform(st))
    if apply_into(x, stoich, k, 1) > 0:
        ctr[CTR_CLAMPS] += 1
    ctr[CTR_STEPS] += 1
    return t + wait, k


@njit(cache=True)
def _simulate_ssa(stoich, prop, params, x, t, T, st, stack, rates, ctr):
    while t < T:
        t, k = _ssa_step(stoich, prop, params, x, t, T, st, stack, rates, ctr)
        if k < 0:
            break


@njit(cache=True)
def _split_pair(stoich, prop, p1, p2, x1, x2, t, T, st, stack, r1, r2, ctr,
                stop_when_absorbed, params_equal, audit):
    """Split coupling of two exact paths as one chain with 3K channels.

    Channel k fires on both paths at rate min(r1_k, r2_k) and on one path
    only at the residual rate.  When the parameters coincide, equal states
    stay equal, so the loop may stop there.  With ``audit`` set the loop
    keeps going after coincidence and counts any later divergence in
    ``ctr[CTR_DIVERGED]``.
    """
    K = r1.shape[0]
    coincided = False
    while t < T:
        same = states_equal(x1, x2)
        if same and params_equal:
            if stop_when_absorbed and not audit:
                return
            coincided = True
        elif coincided:
            ctr[CTR_DIVERGED] += 1
            coincided = False
        rates_into(prop, x1, p1, stack, r1)
        rates_into(prop, x2, p2, stack, r2)
        total = 0.0
        for k in range(K):
            total += max(r1[k], r2[k])
        if total <= 0.0:
            return
        wait = exponential(st, total)
        if t + wait > T:
            return
        t += wait
        target = uniform(st) * total
        acc = 0.0
        chosen = -1
        mode = 0
        for k in range(K):
            common = min(r1[k], r2[k])
            acc += common
            if target < acc:
                chosen, mode = k, 0
                break
            acc += r1[k] - common
            if target < acc:
                chosen, mode = k, 1
                break
            acc += r2[k] - common
            if target < acc:
                chosen, mode = k, 2
                break
        if chosen < 0:
            # rounding left target at the very top; take the last live channel
            for k in range(K - 1, -1, -1):
                if r1[k] > 0.0 or r2[k] > 0.0:
                    chosen = k
                    mode = 0 if min(r1[k], r2[k]) > 0.0 else (1 if r1[k] > 0.0 else 2)
                    break
        c = 0
        if mode != 2:
            c += apply_into(x1, stoich, chosen, 1)
        if mode != 1:
            c += apply_into(x2, stoich, chosen, 1)
        if c > 0:
            ctr[CTR_CLAMPS] += 1
        ctr[CTR_STEPS] += 1


@njit(cache=True)
def _coupled_difference_exact(stoich, prop, obs, params, z1, z2, t, T, st, stack, r1, r2, ctr):
    """f(z2) - f(z1) at ``T`` for split-coupled paths started at ``t``."""
    a = z1.copy()
    b = z2.copy()
    _split_pair(stoich, prop, params, params, a, b, t, T, st, stack, r1, r2, ctr,
                True, True, False)
    return observe(obs, b, params, stack) - observe(obs, a, params, stack)


@njit(cache=True)
def _mnrm_path(stoich, prop, params, x, T, streams, stack, rates, internal, nxt, ctr):
    """Modified next reaction method driven by per-channel unit-rate streams.

    ``streams[k]`` is channel k's stream state; it is consumed in place.
    """
    K = rates.shape[0]
    for k in range(K):
        internal[k] = 0.0
        nxt[k] = exponential(streams[k], 1.0)
    t = 0.0
    while True:
        rates_into(prop, x, params, stack, rates)
        best = math.inf
        mu = -1
        for k in range(K):
            if rates[k] > 0.0:
                dt = (nxt[k] - internal[k]) / rates[k]
                if dt < best:
                    best = dt
                    mu = k
        if mu < 0 or t + best > T:
            return
        t += best
        for k in range(K):
            internal[k] += rates[k] * best
        # guard against rounding leaving the fired channel a hair short
        internal[mu] = nxt[mu]
        nxt[mu] += exponential(streams[mu], 1.0)
        if apply_into(x, stoich, mu, 1) > 0:
            ctr[CTR_CLAMPS] += 1
        ctr[CTR_STEPS] += 1


@njit(cache=True)
def _crp_pair_exact(stoich, prop, p1, p2, x1, x2, T, sample_state, stack, rates, ctr):
    K = rates.shape[0]
    streams = np.empty((K, 3), dtype=np.uint64)
    internal = np.empty(K)
    nxt = np.empty(K)
    for k in range(K):
        streams[k] = derive(sample_state, k)
    _mnrm_path(stoich, prop, p1, x1, T, streams, stack, rates, internal, nxt, ctr)
    for k in range(K):
        streams[k] = derive(sample_state, k)
    _mnrm_path(stoich, prop, p2, x2, T, streams, stack, rates, internal, nxt, ctr)


@njit(cache=True)
def _independent_pair_exact(stoich, prop, p1, p2, x1, x2, T, sample_state, stack, rates, ctr):
    _simulate_ssa(stoich, prop, p1, x1, 0.0, T, derive(sample_state, 0), stack, rates, ctr)
    _simulate_ssa(stoich, prop, p2, x2, 0.0, T, derive(sample_state, 1), stack, rates, ctr)


# -- Python entry points ------------------------------------------------------

def _check_horizon(t: float, T: float):
    if not (math.isfinite(T) and T >= 0):
        raise ValueError(f"horizon must be finite and non-negative, got {T}")
    if t > T:
        raise ValueError(f"start time {t} is past the horizon {T}")


def ssa_step(x, t: float, T: float, net: ReactionNetwork, p, s: RngStream):
    """Advance one event.  Returns ``(state, time, k)`` with ``k`` None if nothing fired."""
    _check_horizon(t, T)
    x = net.state_vector(x)
    stack, rates, _ = scratch(net)
    t_next, k = _ssa_step(net.stoichiometry, net.compiled.prop, net.param_vector(p), x,
                          float(t), float(T), s.state, stack, rates, new_counters())
    return x, t_next, (None if k < 0 else int(k))


def simulate_ssa(net: ReactionNetwork, x0, T: float, p, s: RngStream, counters=None) -> np.ndarray:
    _check_horizon(0.0, T)
    x = net.state_vector(x0)
    stack, rates, _ = scratch(net)
    ctr = new_counters() if counters is None else counters
    _simulate_ssa(net.stoichiometry, net.compiled.prop, net.param_vector(p), x, 0.0, float(T),
                  s.state, stack, rates, ctr)
    return x


def coupled_difference_exact(z1, z2, t: float, T: float, net: ReactionNetwork, p,
                             s: RngStream) -> float:
    """Exact split-coupled estimate of E f(Z2(T)) - E f(Z1(T)) started at time ``t``."""
    _check_horizon(t, T)
    c = net.compiled
    stack, r1, r2 = scratch(net)
    return _coupled_difference_exact(c.stoich, c.prop, c.obs, net.param_vector(p),
                                     net.state_vector(z1), net.state_vector(z2), float(t),
                                     float(T), s.state, stack, r1, r2, new_counters())


def simulate_cfd_pair_exact(net: ReactionNetwork, x0, T: float, p_minus, p_plus, s: RngStream,
                            early_exit: bool = True, audit: bool = False, counters=None):
    """Split-coupled exact paths at two parameter sets; returns final states."""
    _check_horizon(0.0, T)
    pm, pp = net.param_vector(p_minus), net.param_vector(p_plus)
    x1, x2 = net.state_vector(x0), net.state_vector(x0)
    stack, r1, r2 = scratch(net)
    ctr = new_counters() if counters is None else counters
    _split_pair(net.stoichiometry, net.compiled.prop, pm, pp, x1, x2, 0.0, float(T), s.state,
                stack, r1, r2, ctr, early_exit, bool(np.array_equal(pm, pp)), audit)
    return x1, x2


def simulate_crp_pair_exact(net: ReactionNetwork, x0, T: float, p_minus, p_plus, s: RngStream,
                            counters=None):
    """Exact paths at two parameter sets sharing one unit-rate stream per channel."""
    _check_horizon(0.0, T)
    x1, x2 = net.state_vector(x0), net.state_vector(x0)
    stack, rates, _ = scratch(net)
    ctr = new_counters() if counters is None else counters
    _crp_pair_exact(net.stoichiometry, net.compiled.prop, net.param_vector(p_minus),
                    net.param_vector(p_plus), x1, x2, float(T), s.state, stack, rates, ctr)
    return x1, x2
