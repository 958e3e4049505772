"""Centered finite-difference estimators over coupled path pairs."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ConfigError
from .exact import (CTR_CLAMPS, CTR_STEPS, _crp_pair_exact, _independent_pair_exact,
                    _split_pair, new_counters)
from .model import ReactionNetwork
from .rng import RngStream, derive
from .sampling import SAMPLES, run_samples, stream_root
from .stats import SensitivityEstimate, aggregate, finish_estimate
from .tauleap import _crp_pair_tau, _independent_pair_tau, _split_pair_tau
from .vm import observe

COUPLINGS = ("cfd", "crp")
# uncoupled pairs exist only to demonstrate what coupling buys
_HIDDEN_COUPLINGS = ("independent",)
_CODES = {"cfd": 0, "crp": 1, "independent": 2}


@dataclass(frozen=True)
class FdConfig:
    h: float = 0.1
    coupling: str = "cfd"
    kernel: str = "exact"
    tau_max: float | None = None

    def __post_init__(self):
        if not (self.h > 0 and math.isfinite(self.h)):
            raise ConfigError(f"h must be positive, got {self.h}")
        if self.coupling not in COUPLINGS + _HIDDEN_COUPLINGS:
            raise ConfigError(f"coupling must be one of {COUPLINGS}, got {self.coupling!r}")
        if self.kernel not in ("exact", "tau"):
            raise ConfigError(f"kernel must be 'exact' or 'tau', got {self.kernel!r}")
        if self.kernel == "tau":
            if self.tau_max is None or not (self.tau_max > 0 and math.isfinite(self.tau_max)):
                raise ConfigError("the tau kernel needs a positive tau_max")
        elif self.tau_max is not None:
            raise ConfigError("tau_max only applies to the tau kernel")

    @property
    def method(self) -> str:
        return ("e" if self.kernel == "exact" else "t") + self.coupling


@njit(cache=True)
def _fd_pair(code, stoich, prop, pm, pp, x1, x2, T, tau_max, st, stack, r1, r2, ctr):
    equal = True
    for i in range(pm.shape[0]):
        if pm[i] != pp[i]:
            equal = False
    if tau_max > 0.0:
        if code == 0:
            _split_pair_tau(stoich, prop, pm, pp, x1, x2, 0.0, T, tau_max, derive(st, 0), stack,
                            r1, r2, ctr, equal)
        elif code == 1:
            _crp_pair_tau(stoich, prop, pm, pp, x1, x2, T, tau_max, st, stack, r1, r2, ctr)
        else:
            _independent_pair_tau(stoich, prop, pm, pp, x1, x2, T, tau_max, st, stack, r1, ctr)
    else:
        if code == 0:
            _split_pair(stoich, prop, pm, pp, x1, x2, 0.0, T, derive(st, 0), stack, r1, r2, ctr,
                        True, equal, False)
        elif code == 1:
            _crp_pair_exact(stoich, prop, pm, pp, x1, x2, T, st, stack, r1, ctr)
        else:
            _independent_pair_exact(stoich, prop, pm, pp, x1, x2, T, st, stack, r1, ctr)


@njit(cache=True)
def _fd_batch(code, stoich, prop, obs, pm, pp, x0, T, tau_max, h, depth,
              root, start, stop, out, ctr):
    K = stoich.shape[0]
    stack = np.empty(depth)
    r1 = np.empty(K)
    r2 = np.empty(K)
    x1 = x0.copy()
    x2 = x0.copy()
    for i in range(start, stop):
        x1[:] = x0
        x2[:] = x0
        _fd_pair(code, stoich, prop, pm, pp, x1, x2, T, tau_max, derive(root, i), stack, r1, r2,
                 ctr)
        out[i - start] = (observe(obs, x2, pp, stack) - observe(obs, x1, pm, stack)) / h


def perturbed(net: ReactionNetwork, theta: str, h: float, p=None):
    """Parameter vectors at theta - h/2 and theta + h/2."""
    if theta not in net.parameters:
        raise ConfigError(f"unknown parameter {theta!r}")
    base = net.param_vector(p)
    i = net.param_names.index(theta)
    pm, pp = base.copy(), base.copy()
    pm[i] -= h / 2
    pp[i] += h / 2
    return pm, pp


def _args(net, x0, T, theta, cfg: FdConfig, p):
    pm, pp = perturbed(net, theta, cfg.h, p)
    c = net.compiled
    tau = -1.0 if cfg.kernel == "exact" else float(cfg.tau_max)
    return (_CODES[cfg.coupling], c.stoich, c.prop, c.obs, pm, pp, net.state_vector(x0),
            float(T), tau, float(cfg.h), c.depth + 2)


def generate_sample_fd(net: ReactionNetwork, x0, T: float, theta: str, cfg: FdConfig,
                       s: RngStream, p=None) -> float:
    """(f(X at theta + h/2) - f(X at theta - h/2)) / h from one coupled pair."""
    if T < 0:
        raise ConfigError("T must be non-negative")
    out = np.empty(1)
    args = _args(net, x0, T, theta, cfg, p)
    _fd_single(*args, s.state, out, new_counters())
    return float(out[0])


@njit(cache=True)
def _fd_single(code, stoich, prop, obs, pm, pp, x0, T, tau_max, h, depth, st, out, ctr):
    K = stoich.shape[0]
    stack = np.empty(depth)
    r1 = np.empty(K)
    r2 = np.empty(K)
    x1 = x0.copy()
    x2 = x0.copy()
    _fd_pair(code, stoich, prop, pm, pp, x1, x2, T, tau_max, st, stack, r1, r2, ctr)
    out[0] = (observe(obs, x2, pp, stack) - observe(obs, x1, pm, stack)) / h


def estimate_sensitivity_fd(net: ReactionNetwork, x0, T: float, theta: str, cfg: FdConfig,
                            N: int, workers: int = 1, seed: int = 0, p=None,
                            reference: float | None = None,
                            keep_samples: bool = False) -> SensitivityEstimate:
    if N < 2:
        raise ConfigError("N must be at least 2")
    if T < 0:
        raise ConfigError("T must be non-negative")
    args = _args(net, x0, T, theta, cfg, p)
    values, ctr, wall = run_samples(_fd_batch, args, int(N), stream_root(seed, SAMPLES), workers)
    est = aggregate(values).with_fields(
        method=cfg.method, param=theta, T=float(T), seed=int(seed), tau_max=cfg.tau_max,
        h=float(cfg.h), clamp_rate=float(ctr[CTR_CLAMPS]) / max(int(ctr[CTR_STEPS]), 1),
        samples=values if keep_samples else None)
    return finish_estimate(est, reference, wall / N)
