"""Explicit Poisson tau-leaping, Poisson-bridge interpolation and coupled leaps.

Steps are ``min(tau_max, T - t)``; the last step lands exactly on ``T``.
All firings of a leap are applied together and negative components are
then clamped to zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ConfigError, EvaluationError
from .exact import (CTR_CLAMPS, CTR_STEPS, _check_horizon, new_counters, scratch)
from .model import ReactionNetwork
from .rng import RngStream, derive, poisson, poisson_from_uniform, uniform
from .vm import clamp_into, observe, rates_into, states_equal


@dataclass(frozen=True)
class TauLeapConfig:
    tau_max: float

    def __post_init__(self):
        if not (self.tau_max > 0 and math.isfinite(self.tau_max)):
            raise ConfigError(f"tau_max must be positive and finite, got {self.tau_max}")


@dataclass(frozen=True)
class LeapFrame:
    t: float
    tau: float
    z: np.ndarray
    sigma: np.ndarray      # sorted intermediate times, shape (eta,)
    z_hat: np.ndarray      # interpolated states, shape (eta, d)


@njit(cache=True)
def _get_tau(t, T, tau_max):
    return min(tau_max, T - t)


@njit(cache=True)
def _advance(t, tau, T):
    # land exactly on T when the step was clipped to the horizon
    if tau >= T - t:
        return T
    return t + tau


@njit(cache=True)
def _poisson_mean(rate, dt):
    m = rate * dt
    if not math.isfinite(m):
        raise EvaluationError("Poisson mean is not finite")
    return m


@njit(cache=True)
def _fire_into(stoich, rates, dt, st, x):
    """Add Poisson(rates*dt) firings of every channel to ``x`` (unclamped)."""
    K, d = stoich.shape
    for k in range(K):
        if rates[k] > 0.0:
            n = poisson(st, _poisson_mean(rates[k], dt))
            if n > 0:
                for i in range(d):
                    x[i] += n * stoich[k, i]


@njit(cache=True)
def _firings(rates, dt, st, out):
    for k in range(rates.shape[0]):
        out[k] = poisson(st, _poisson_mean(rates[k], dt)) if rates[k] > 0.0 else 0


@njit(cache=True)
def _leap(stoich, prop, params, x, tau, st, stack, rates, ctr):
    rates_into(prop, x, params, stack, rates)
    _fire_into(stoich, rates, tau, st, x)
    if clamp_into(x) > 0:
        ctr[CTR_CLAMPS] += 1
    ctr[CTR_STEPS] += 1


@njit(cache=True)
def _simulate_tauleap(stoich, prop, params, x, t, T, tau_max, st, stack, rates, ctr):
    while t < T:
        tau = _get_tau(t, T, tau_max)
        _leap(stoich, prop, params, x, tau, st, stack, rates, ctr)
        t = _advance(t, tau, T)


@njit(cache=True)
def _draw_sorted_times(st, t, tau, sigma):
    for j in range(sigma.shape[0]):
        sigma[j] = t + uniform(st) * tau
    sigma.sort()


@njit(cache=True)
def _bridge_segment(stoich, rates, t0, t1, st, x, ctr):
    """Move ``x`` over (t0, t1] with the leap-start ``rates``; clamps at the end."""
    _fire_into(stoich, rates, t1 - t0, st, x)
    if clamp_into(x) > 0:
        ctr[CTR_CLAMPS] += 1


@njit(cache=True)
def _leap_with_interpolation(stoich, prop, params, z, t, tau, sigma, st, stack, rates,
                             z_hat, end, ctr):
    """Bridge a leap through the sorted times ``sigma``.

    Fills ``z_hat[j]`` with the state at ``sigma[j]`` and ``end`` with the
    state at ``t + tau``.  All segments use the propensities at ``z``.
    """
    rates_into(prop, z, params, stack, rates)
    cur = z.copy()
    prev = t
    for j in range(sigma.shape[0]):
        _bridge_segment(stoich, rates, prev, sigma[j], st, cur, ctr)
        z_hat[j] = cur
        prev = sigma[j]
    _bridge_segment(stoich, rates, prev, t + tau, st, cur, ctr)
    end[:] = cur
    ctr[CTR_STEPS] += 1


@njit(cache=True)
def _split_pair_tau(stoich, prop, p1, p2, x1, x2, t, T, tau_max, st, stack, r1, r2, ctr,
                    stop_when_absorbed):
    """Split-coupled leaps: one common and two residual Poisson draws per channel."""
    K, d = stoich.shape
    while t < T:
        if stop_when_absorbed and states_equal(x1, x2):
            return
        tau = _get_tau(t, T, tau_max)
        rates_into(prop, x1, p1, stack, r1)
        rates_into(prop, x2, p2, stack, r2)
        for k in range(K):
            common = min(r1[k], r2[k])
            n_common = poisson(st, _poisson_mean(common, tau)) if common > 0.0 else 0
            own1 = r1[k] - common
            own2 = r2[k] - common
            n1 = n_common + (poisson(st, _poisson_mean(own1, tau)) if own1 > 0.0 else 0)
            n2 = n_common + (poisson(st, _poisson_mean(own2, tau)) if own2 > 0.0 else 0)
            for i in range(d):
                x1[i] += n1 * stoich[k, i]
                x2[i] += n2 * stoich[k, i]
        if clamp_into(x1) + clamp_into(x2) > 0:
            ctr[CTR_CLAMPS] += 1
        ctr[CTR_STEPS] += 1
        t = _advance(t, tau, T)


@njit(cache=True)
def _coupled_difference_tau(stoich, prop, obs, params, z1, z2, t, T, tau_max, st, stack,
                            r1, r2, ctr):
    a = z1.copy()
    b = z2.copy()
    _split_pair_tau(stoich, prop, params, params, a, b, t, T, tau_max, st, stack, r1, r2, ctr,
                    True)
    return observe(obs, b, params, stack) - observe(obs, a, params, stack)


@njit(cache=True)
def _crp_pair_tau(stoich, prop, p1, p2, x1, x2, T, tau_max, sample_state, stack, r1, r2, ctr):
    """Leaps driven by one uniform per channel per step, shared by both paths."""
    K, d = stoich.shape
    streams = np.empty((K, 3), dtype=np.uint64)
    for k in range(K):
        streams[k] = derive(sample_state, k)
    t = 0.0
    while t < T:
        tau = _get_tau(t, T, tau_max)
        rates_into(prop, x1, p1, stack, r1)
        rates_into(prop, x2, p2, stack, r2)
        for k in range(K):
            u = uniform(streams[k])
            n1 = poisson_from_uniform(u, _poisson_mean(r1[k], tau))
            n2 = poisson_from_uniform(u, _poisson_mean(r2[k], tau))
            for i in range(d):
                x1[i] += n1 * stoich[k, i]
                x2[i] += n2 * stoich[k, i]
        if clamp_into(x1) + clamp_into(x2) > 0:
            ctr[CTR_CLAMPS] += 1
        ctr[CTR_STEPS] += 1
        t = _advance(t, tau, T)


@njit(cache=True)
def _independent_pair_tau(stoich, prop, p1, p2, x1, x2, T, tau_max, sample_state, stack,
                          rates, ctr):
    _simulate_tauleap(stoich, prop, p1, x1, 0.0, T, tau_max, derive(sample_state, 0), stack,
                      rates, ctr)
    _simulate_tauleap(stoich, prop, p2, x2, 0.0, T, tau_max, derive(sample_state, 1), stack,
                      rates, ctr)


# -- Python entry points ------------------------------------------------------

def _cfg(cfg) -> TauLeapConfig:
    if isinstance(cfg, TauLeapConfig):
        return cfg
    return TauLeapConfig(float(cfg))


def get_tau(z, t: float, T: float, cfg) -> float:
    if t >= T:
        raise ValueError(f"no step left: t={t} is not before T={T}")
    return float(_get_tau(float(t), float(T), _cfg(cfg).tau_max))


def get_reaction_firings(z, tau: float, net: ReactionNetwork, p, s: RngStream) -> np.ndarray:
    if tau < 0:
        raise ValueError("tau must be non-negative")
    stack, rates, _ = scratch(net)
    rates_into(net.compiled.prop, net.state_vector(z), net.param_vector(p), stack, rates)
    out = np.zeros(net.n_reactions, dtype=np.int64)
    _firings(rates, float(tau), s.state, out)
    return out


def leap_with_interpolation(z, t: float, tau: float, eta: int, net: ReactionNetwork, p,
                            s: RngStream, forced_uniforms=None, counters=None):
    """One leap bridged at ``eta`` random times; returns ``(LeapFrame, end_state)``.

    ``forced_uniforms`` replaces the random positions within the leap (a
    testing hook); it must hold ``eta`` values in [0, 1).
    """
    if eta < 1:
        raise ValueError("eta must be at least 1")
    z = net.state_vector(z)
    sigma = np.empty(int(eta))
    if forced_uniforms is None:
        _draw_sorted_times(s.state, float(t), float(tau), sigma)
    else:
        u = np.asarray(forced_uniforms, dtype=np.float64)
        if u.shape != (eta,) or (u < 0).any() or (u >= 1).any():
            raise ValueError("forced_uniforms must be eta values in [0, 1)")
        sigma = np.sort(t + u * tau, kind="stable")
    z_hat = np.empty((int(eta), net.n_species), dtype=np.int64)
    end = np.empty(net.n_species, dtype=np.int64)
    stack, rates, _ = scratch(net)
    ctr = new_counters() if counters is None else counters
    _leap_with_interpolation(net.stoichiometry, net.compiled.prop, net.param_vector(p), z,
                             float(t), float(tau), sigma, s.state, stack, rates, z_hat, end, ctr)
    return LeapFrame(float(t), float(tau), z, sigma, z_hat), end


def simulate_tauleap(net: ReactionNetwork, x0, T: float, p, cfg, s: RngStream,
                     counters=None) -> np.ndarray:
    _check_horizon(0.0, T)
    x = net.state_vector(x0)
    stack, rates, _ = scratch(net)
    ctr = new_counters() if counters is None else counters
    _simulate_tauleap(net.stoichiometry, net.compiled.prop, net.param_vector(p), x, 0.0,
                      float(T), _cfg(cfg).tau_max, s.state, stack, rates, ctr)
    return x


def coupled_difference_tau(z1, z2, t: float, T: float, net: ReactionNetwork, p, cfg,
                           s: RngStream) -> float:
    _check_horizon(t, T)
    c = net.compiled
    stack, r1, r2 = scratch(net)
    return _coupled_difference_tau(c.stoich, c.prop, c.obs, net.param_vector(p),
                                   net.state_vector(z1), net.state_vector(z2), float(t),
                                   float(T), _cfg(cfg).tau_max, s.state, stack, r1, r2,
                                   new_counters())


def simulate_cfd_pair_tau(net: ReactionNetwork, x0, T: float, p_minus, p_plus, cfg,
                          s: RngStream, counters=None):
    _check_horizon(0.0, T)
    pm, pp = net.param_vector(p_minus), net.param_vector(p_plus)
    x1, x2 = net.state_vector(x0), net.state_vector(x0)
    stack, r1, r2 = scratch(net)
    ctr = new_counters() if counters is None else counters
    _split_pair_tau(net.stoichiometry, net.compiled.prop, pm, pp, x1, x2, 0.0, float(T),
                    _cfg(cfg).tau_max, s.state, stack, r1, r2, ctr,
                    bool(np.array_equal(pm, pp)))
    return x1, x2


def simulate_crp_pair_tau(net: ReactionNetwork, x0, T: float, p_minus, p_plus, cfg,
                          s: RngStream, counters=None):
    _check_horizon(0.0, T)
    x1, x2 = net.state_vector(x0), net.state_vector(x0)
    stack, r1, r2 = scratch(net)
    ctr = new_counters() if counters is None else counters
    _crp_pair_tau(net.stoichiometry, net.compiled.prop, net.param_vector(p_minus),
                  net.param_vector(p_plus), x1, x2, float(T), _cfg(cfg).tau_max, s.state,
                  stack, r1, r2, ctr)
    return x1, x2
