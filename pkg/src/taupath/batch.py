"""Many independent runs of the kernels in one call.

Run ``i`` uses the stream ``derive(root, i)`` where ``root`` comes from
``seed``, the same layout the estimators use for their samples.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .exact import (_coupled_difference_exact, _crp_pair_exact, _simulate_ssa, _split_pair,
                    new_counters)
from .model import ReactionNetwork
from .rng import derive
from .sampling import SAMPLES, stream_root
from .tauleap import (_coupled_difference_tau, _crp_pair_tau, _simulate_tauleap, _split_pair_tau)


@njit(cache=True)
def _paths(stoich, prop, params, x0, T, tau_max, root, out, ctr, depth):
    K = stoich.shape[0]
    stack = np.empty(depth)
    rates = np.empty(K)
    for i in range(out.shape[0]):
        st = derive(root, i)
        x = x0.copy()
        if tau_max > 0.0:
            _simulate_tauleap(stoich, prop, params, x, 0.0, T, tau_max, st, stack, rates, ctr)
        else:
            _simulate_ssa(stoich, prop, params, x, 0.0, T, st, stack, rates, ctr)
        out[i] = x


@njit(cache=True)
def _differences(stoich, prop, obs, params, z1, z2, t, T, tau_max, root, out, ctr, depth):
    K = stoich.shape[0]
    stack = np.empty(depth)
    r1 = np.empty(K)
    r2 = np.empty(K)
    for i in range(out.shape[0]):
        st = derive(root, i)
        if tau_max > 0.0:
            out[i] = _coupled_difference_tau(stoich, prop, obs, params, z1, z2, t, T, tau_max, st,
                                             stack, r1, r2, ctr)
        else:
            out[i] = _coupled_difference_exact(stoich, prop, obs, params, z1, z2, t, T, st,
                                               stack, r1, r2, ctr)


@njit(cache=True)
def _pairs(code, stoich, prop, p1, p2, x0, T, tau_max, early_exit, audit, root, out1, out2,
           ctr, depth):
    K = stoich.shape[0]
    stack = np.empty(depth)
    r1 = np.empty(K)
    r2 = np.empty(K)
    equal = True
    for j in range(p1.shape[0]):
        if p1[j] != p2[j]:
            equal = False
    for i in range(out1.shape[0]):
        st = derive(root, i)
        x1 = x0.copy()
        x2 = x0.copy()
        if code == 0 and tau_max > 0.0:
            _split_pair_tau(stoich, prop, p1, p2, x1, x2, 0.0, T, tau_max, derive(st, 0), stack,
                            r1, r2, ctr, early_exit and equal)
        elif code == 0:
            _split_pair(stoich, prop, p1, p2, x1, x2, 0.0, T, derive(st, 0), stack, r1, r2, ctr,
                        early_exit, equal, audit)
        elif tau_max > 0.0:
            _crp_pair_tau(stoich, prop, p1, p2, x1, x2, T, tau_max, st, stack, r1, r2, ctr)
        else:
            _crp_pair_exact(stoich, prop, p1, p2, x1, x2, T, st, stack, r1, ctr)
        out1[i] = x1
        out2[i] = x2


def simulate_many(net: ReactionNetwork, x0, T: float, n: int, seed: int = 0, p=None,
                  tau_max: float | None = None, counters=None) -> np.ndarray:
    """Final states of ``n`` independent paths, shape ``(n, d)``."""
    out = np.empty((int(n), net.n_species), dtype=np.int64)
    ctr = new_counters() if counters is None else counters
    _paths(net.stoichiometry, net.compiled.prop, net.param_vector(p), net.state_vector(x0),
           float(T), -1.0 if tau_max is None else float(tau_max), stream_root(seed, SAMPLES),
           out, ctr, net.compiled.depth + 2)
    return out


def coupled_differences(net: ReactionNetwork, z1, z2, t: float, T: float, n: int, seed: int = 0,
                        p=None, tau_max: float | None = None, counters=None) -> np.ndarray:
    """``n`` independent split-coupled differences f(Z2(T)) - f(Z1(T))."""
    c = net.compiled
    out = np.empty(int(n))
    ctr = new_counters() if counters is None else counters
    _differences(c.stoich, c.prop, c.obs, net.param_vector(p), net.state_vector(z1),
                 net.state_vector(z2), float(t), float(T),
                 -1.0 if tau_max is None else float(tau_max), stream_root(seed, SAMPLES), out,
                 ctr, c.depth + 2)
    return out


def coupled_pairs(net: ReactionNetwork, x0, T: float, p_minus, p_plus, n: int, coupling="cfd",
                  seed: int = 0, tau_max: float | None = None, early_exit: bool = True,
                  audit: bool = False, counters=None):
    """Final states of ``n`` coupled pairs; returns two ``(n, d)`` arrays."""
    if coupling not in ("cfd", "crp"):
        raise ValueError("coupling must be 'cfd' or 'crp'")
    out1 = np.empty((int(n), net.n_species), dtype=np.int64)
    out2 = np.empty_like(out1)
    ctr = new_counters() if counters is None else counters
    _pairs(0 if coupling == "cfd" else 1, net.stoichiometry, net.compiled.prop,
           net.param_vector(p_minus), net.param_vector(p_plus), net.state_vector(x0), float(T),
           -1.0 if tau_max is None else float(tau_max), bool(early_exit), bool(audit),
           stream_root(seed, SAMPLES), out1, out2, ctr, net.compiled.depth + 2)
    return out1, out2
