"""Integral-path sensitivity estimators on exact and tau-leap kernels.

Each sample follows one main path.  Along it, the sensitivity mass
``sum_k |d lambda_k| dt`` is split into ``eta`` random sub-times per leap (or
per exact sojourn); at each sub-time every channel with nonzero derivative
flips a coin, and on success an auxiliary split-coupled pair estimates the
effect of one extra firing.  The normalizing constant ``C`` is chosen from
pilot runs so that a sample launches about ``M0`` auxiliary pairs.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

import numpy as np
from numba import njit

from .errors import ConfigError, EvaluationError
from .exact import (CTR_CLAMPS, CTR_P_DRAWN, CTR_P_SATURATED, CTR_RHO, CTR_STEPS, _choose,
                    _coupled_difference_exact, new_counters)
from .model import ReactionNetwork
from .rng import RngStream, bernoulli, derive, exponential, uniform
from .sampling import PILOTS, SAMPLES, run_samples, stream_root
from .stats import SensitivityEstimate, aggregate, finish_estimate
from .tauleap import (_advance, _bridge_segment, _coupled_difference_tau, _draw_sorted_times,
                      _get_tau, _leap)
from .vm import apply_into, derivs_into, rates_into

KERNELS = ("exact", "tau")


@dataclass(frozen=True)
class IpaConfig:
    m0: int = 10
    n0: int = 1000
    kernel: str = "exact"
    tau_max: float | None = None
    c: float | None = None

    def __post_init__(self):
        if self.kernel not in KERNELS:
            raise ConfigError(f"kernel must be one of {KERNELS}, got {self.kernel!r}")
        if int(self.m0) != self.m0 or self.m0 < 1:
            raise ConfigError("m0 must be a positive integer")
        if int(self.n0) != self.n0 or self.n0 < 1:
            raise ConfigError("n0 must be a positive integer")
        if self.kernel == "tau":
            if self.tau_max is None or not (self.tau_max > 0 and math.isfinite(self.tau_max)):
                raise ConfigError("the tau kernel needs a positive tau_max")
        elif self.tau_max is not None:
            raise ConfigError("tau_max only applies to the tau kernel")
        if self.c is not None and not self.c > 0:
            raise ConfigError("normalizing constant must be positive")

    @property
    def tau_flag(self) -> float:
        return -1.0 if self.kernel == "exact" else float(self.tau_max)


@dataclass(frozen=True)
class IpaSampleTrace:
    value: float
    rho_tot: int
    clamp_events: int
    wall_seconds: float


@njit(cache=True)
def _eta(mass, C):
    q = math.ceil(mass / C)
    return max(int(q), 1)


@njit(cache=True)
def _kahan_add(acc, comp, v):
    # Neumaier compensated summation
    s = acc + v
    if abs(acc) >= abs(v):
        comp += (acc - s) + v
    else:
        comp += (v - s) + acc
    return s, comp


@njit(cache=True)
def _aux_contributions(stoich, prop, obs, dprog, params, z, sig, T, tau_max, weight_dt, eta, C,
                       main, aux_parent, aux_count, stack, dr, r1, r2, shifted, acc, comp, ctr):
    """Coin flips and auxiliary pairs for one sub-time ``sig`` at state ``z``."""
    derivs_into(dprog, z, params, stack, dr)
    K = dr.shape[0]
    for k in range(K):
        R = dr[k] * weight_dt
        if R == 0.0:
            continue
        P = min(abs(R) / (C * eta), 1.0)
        ctr[CTR_P_DRAWN] += 1
        if P >= 1.0:
            ctr[CTR_P_SATURATED] += 1
        if bernoulli(main, P) == 0:
            continue
        ctr[CTR_RHO] += 1
        shifted[:] = z
        apply_into(shifted, stoich, k, 1)
        aux = derive(aux_parent, aux_count)
        aux_count += 1
        if tau_max > 0.0:
            D = _coupled_difference_tau(stoich, prop, obs, params, z, shifted, sig, T, tau_max,
                                        aux, stack, r1, r2, ctr)
        else:
            D = _coupled_difference_exact(stoich, prop, obs, params, z, shifted, sig, T, aux,
                                          stack, r1, r2, ctr)
        contrib = R / (P * eta) * D
        if not math.isfinite(contrib):
            raise EvaluationError("non-finite contribution to a sensitivity sample")
        acc, comp = _kahan_add(acc, comp, contrib)
    return acc, comp, aux_count


@njit(cache=True)
def _ipa_sample_tau(stoich, prop, obs, dprog, params, x0, T, tau_max, C, sample_state,
                    stack, rates, dr, r1, r2, ctr):
    main = derive(sample_state, 0)
    aux_parent = derive(sample_state, 1)
    aux_count = 0
    z = x0.copy()
    cur = x0.copy()
    shifted = x0.copy()
    acc = 0.0
    comp = 0.0
    t = 0.0
    while t < T:
        tau = _get_tau(t, T, tau_max)
        mass = derivs_into(dprog, z, params, stack, dr) * tau
        eta = _eta(mass, C)
        sigma = np.empty(eta)
        _draw_sorted_times(main, t, tau, sigma)
        rates_into(prop, z, params, stack, rates)
        cur[:] = z
        prev = t
        for j in range(eta):
            _bridge_segment(stoich, rates, prev, sigma[j], main, cur, ctr)
            prev = sigma[j]
            acc, comp, aux_count = _aux_contributions(
                stoich, prop, obs, dprog, params, cur, sigma[j], T, tau_max, tau, eta, C,
                main, aux_parent, aux_count, stack, dr, r1, r2, shifted, acc, comp, ctr)
        _bridge_segment(stoich, rates, prev, t + tau, main, cur, ctr)
        z[:] = cur
        ctr[CTR_STEPS] += 1
        t = _advance(t, tau, T)
    return acc + comp


@njit(cache=True)
def _ipa_sample_exact(stoich, prop, obs, dprog, params, x0, T, C, sample_state,
                      stack, rates, dr, r1, r2, ctr):
    main = derive(sample_state, 0)
    aux_parent = derive(sample_state, 1)
    aux_count = 0
    z = x0.copy()
    shifted = x0.copy()
    acc = 0.0
    comp = 0.0
    t = 0.0
    while t < T:
        total = rates_into(prop, z, params, stack, rates)
        wait = exponential(main, total) if total > 0.0 else math.inf
        end = T if t + wait >= T else t + wait
        soj = end - t
        mass = derivs_into(dprog, z, params, stack, dr) * soj
        if mass > 0.0:
            eta = _eta(mass, C)
            for j in range(eta):
                sig = t + uniform(main) * soj
                acc, comp, aux_count = _aux_contributions(
                    stoich, prop, obs, dprog, params, z, sig, T, -1.0, soj, eta, C,
                    main, aux_parent, aux_count, stack, dr, r1, r2, shifted, acc, comp, ctr)
        if end >= T:
            break
        # auxiliary pairs only touch r1/r2, so ``rates`` still belongs to z
        k = _choose(rates, total, uniform(main))
        if apply_into(z, stoich, k, 1) > 0:
            ctr[CTR_CLAMPS] += 1
        ctr[CTR_STEPS] += 1
        t = end
    return acc + comp


@njit(cache=True)
def _ipa_batch(stoich, prop, obs, dprog, params, x0, T, tau_max, C, depth,
               root, start, stop, out, ctr):
    K = stoich.shape[0]
    stack = np.empty(depth)
    rates = np.empty(K)
    dr = np.empty(K)
    r1 = np.empty(K)
    r2 = np.empty(K)
    for i in range(start, stop):
        st = derive(root, i)
        if tau_max > 0.0:
            out[i - start] = _ipa_sample_tau(stoich, prop, obs, dprog, params, x0, T, tau_max,
                                             C, st, stack, rates, dr, r1, r2, ctr)
        else:
            out[i - start] = _ipa_sample_exact(stoich, prop, obs, dprog, params, x0, T, C, st,
                                               stack, rates, dr, r1, r2, ctr)


@njit(cache=True)
def _pilot_mass(stoich, prop, dprog, params, x0, T, tau_max, st, stack, rates, dr, ctr):
    """Sensitivity mass sum_k |d lambda_k| dt along one plain path."""
    x = x0.copy()
    t = 0.0
    acc = 0.0
    while t < T:
        if tau_max > 0.0:
            tau = _get_tau(t, T, tau_max)
            acc += derivs_into(dprog, x, params, stack, dr) * tau
            _leap(stoich, prop, params, x, tau, st, stack, rates, ctr)
            t = _advance(t, tau, T)
        else:
            total = rates_into(prop, x, params, stack, rates)
            wait = exponential(st, total) if total > 0.0 else math.inf
            end = T if t + wait >= T else t + wait
            acc += derivs_into(dprog, x, params, stack, dr) * (end - t)
            if end >= T:
                break
            k = _choose(rates, total, uniform(st))
            if apply_into(x, stoich, k, 1) > 0:
                ctr[CTR_CLAMPS] += 1
            ctr[CTR_STEPS] += 1
            t = end
    return acc


@njit(cache=True)
def _pilot_batch(stoich, prop, dprog, params, x0, T, tau_max, depth, root, start, stop, out, ctr):
    K = stoich.shape[0]
    stack = np.empty(depth)
    rates = np.empty(K)
    dr = np.empty(K)
    for i in range(start, stop):
        out[i - start] = _pilot_mass(stoich, prop, dprog, params, x0, T, tau_max,
                                     derive(root, i), stack, rates, dr, ctr)


# -- Python entry points ------------------------------------------------------

def _setup(net: ReactionNetwork, theta: str, p):
    if theta not in net.parameters:
        raise ConfigError(f"unknown parameter {theta!r}")
    dprog, ddepth = net.derivative_program(theta)
    depth = max(net.compiled.depth, ddepth) + 2
    return dprog, depth, net.param_vector(p)


def select_normalizing_constant(net: ReactionNetwork, x0, T: float, theta: str, cfg: IpaConfig,
                                s: RngStream | int, p=None, workers: int = 1) -> float:
    """Average pilot sensitivity mass divided by ``M0``.

    ``s`` is either a stream (pilot ``i`` uses ``s.derive(i)``) or a seed.
    """
    dprog, depth, params = _setup(net, theta, p)
    root = stream_root(s, PILOTS) if isinstance(s, (int, np.integer)) else s.state
    c = net.compiled
    args = (c.stoich, c.prop, dprog, params, net.state_vector(x0), float(T), cfg.tau_flag, depth)
    masses, _, _ = run_samples(_pilot_batch, args, int(cfg.n0), root, workers)
    total = float(np.sum(masses))
    if not total > 0:
        raise EvaluationError(
            f"no sensitivity mass with respect to {theta!r} along the pilot paths")
    return total / (cfg.n0 * cfg.m0)


def compute_eta(z, tau: float, C: float, net: ReactionNetwork, p, theta: str) -> int:
    if not C > 0 or not tau > 0:
        raise ValueError("C and tau must be positive")
    dprog, depth, params = _setup(net, theta, p)
    stack = np.empty(depth)
    dr = np.empty(net.n_reactions)
    mass = derivs_into(dprog, net.state_vector(z), params, stack, dr) * tau
    return int(_eta(mass, float(C)))


def generate_sample_ipa(net: ReactionNetwork, x0, T: float, theta: str, cfg: IpaConfig,
                        s: RngStream, p=None) -> IpaSampleTrace:
    """One sample; ``cfg.c`` must already be set."""
    if cfg.c is None:
        raise ConfigError("select the normalizing constant first")
    dprog, depth, params = _setup(net, theta, p)
    c = net.compiled
    K = net.n_reactions
    stack, rates, dr, r1, r2 = np.empty(depth), *(np.empty(K) for _ in range(4))
    ctr = new_counters()
    x = net.state_vector(x0)
    t0 = time.perf_counter()
    if cfg.kernel == "tau":
        v = _ipa_sample_tau(c.stoich, c.prop, c.obs, dprog, params, x, float(T),
                            float(cfg.tau_max), float(cfg.c), s.state, stack, rates, dr, r1, r2,
                            ctr)
    else:
        v = _ipa_sample_exact(c.stoich, c.prop, c.obs, dprog, params, x, float(T), float(cfg.c),
                              s.state, stack, rates, dr, r1, r2, ctr)
    return IpaSampleTrace(float(v), int(ctr[CTR_RHO]), int(ctr[CTR_CLAMPS]), time.perf_counter() - t0)


def estimate_sensitivity_ipa(net: ReactionNetwork, x0, T: float, theta: str, cfg: IpaConfig,
                             N: int, workers: int = 1, seed: int = 0, p=None,
                             reference: float | None = None,
                             keep_samples: bool = False) -> SensitivityEstimate:
    if N < 2:
        raise ConfigError("N must be at least 2")
    if T < 0:
        raise ConfigError("T must be non-negative")
    if cfg.c is None:
        cfg = replace(cfg, c=select_normalizing_constant(net, x0, T, theta, cfg, seed, p, workers))
    dprog, depth, params = _setup(net, theta, p)
    c = net.compiled
    args = (c.stoich, c.prop, c.obs, dprog, params, net.state_vector(x0), float(T),
            cfg.tau_flag, float(cfg.c), depth)
    values, ctr, wall = run_samples(_ipa_batch, args, int(N), stream_root(seed, SAMPLES), workers)
    est = aggregate(values)
    est = est.with_fields(
        method="eipa" if cfg.kernel == "exact" else "tauipa", param=theta, T=float(T),
        seed=int(seed), tau_max=cfg.tau_max, m0=int(cfg.m0), c_constant=float(cfg.c),
        mean_rho_tot=float(ctr[CTR_RHO]) / N,
        clamp_rate=float(ctr[CTR_CLAMPS]) / max(int(ctr[CTR_STEPS]), 1),
        p_saturated_fraction=float(ctr[CTR_P_SATURATED]) / max(int(ctr[CTR_P_DRAWN]), 1),
        samples=values if keep_samples else None)
    return finish_estimate(est, reference, wall / N)
