"""Scenarios, sweeps and the method-comparison grids for the bundled models."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import ConfigError
from .fd import FdConfig, estimate_sensitivity_fd
from .ipa import IpaConfig, estimate_sensitivity_ipa
from .model import ReactionNetwork, load_model
from .stats import SensitivityEstimate

METHODS = ("eipa", "tauipa", "ecfd", "ecrp", "tcfd", "tcrp")
TAU_METHODS = ("tauipa", "tcfd", "tcrp")
SWEEP_AXES = ("tau_max", "m0", "volume")


@dataclass(frozen=True)
class Scenario:
    model: str
    method: str
    param: str
    T: float
    N: int
    tau_max: float | None = None
    m0: int = 10
    n0: int = 1000
    h: float = 0.1
    seed: int = 0
    workers: int = 1
    reference: float | None = None
    overrides: dict = field(default_factory=dict, hash=False)

    def validate(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {', '.join(METHODS)}")
        if self.method in TAU_METHODS and self.tau_max is None:
            raise ConfigError(f"method {self.method} needs --tau-max")
        if self.method not in TAU_METHODS and self.tau_max is not None:
            raise ConfigError(f"method {self.method} does not use --tau-max")
        if self.N < 2:
            raise ConfigError("N must be at least 2")
        if not (self.T >= 0 and math.isfinite(self.T)):
            raise ConfigError("T must be finite and non-negative")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must fit in an unsigned 64-bit integer")


def _load(sc: Scenario) -> ReactionNetwork:
    try:
        net = load_model(sc.model)
    except FileNotFoundError as exc:
        raise ConfigError(str(exc)) from None
    if sc.param not in net.parameters:
        raise ConfigError(f"model has no parameter {sc.param!r}; it declares "
                          f"{', '.join(net.param_names)}")
    if sc.overrides:
        net = net.with_parameters(**sc.overrides)
    return net


def run_scenario(sc: Scenario) -> SensitivityEstimate:
    sc.validate()
    net = _load(sc)
    common = dict(N=sc.N, workers=sc.workers, seed=sc.seed, reference=sc.reference)
    if sc.method in ("eipa", "tauipa"):
        cfg = IpaConfig(m0=sc.m0, n0=sc.n0, kernel="exact" if sc.method == "eipa" else "tau",
                        tau_max=sc.tau_max)
        return estimate_sensitivity_ipa(net, None, sc.T, sc.param, cfg, **common)
    cfg = FdConfig(h=sc.h, coupling=sc.method[1:], tau_max=sc.tau_max,
                   kernel="exact" if sc.method[0] == "e" else "tau")
    return estimate_sensitivity_fd(net, None, sc.T, sc.param, cfg, **common)


def run_sweep(base: Scenario, axis: str, values) -> list[SensitivityEstimate]:
    """One estimate per value; every row reuses the base seed."""
    if axis not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; choose from {', '.join(SWEEP_AXES)}")
    rows = []
    for v in values:
        if axis == "tau_max":
            if base.method not in TAU_METHODS:
                raise ConfigError("a tau_max sweep needs a tau-leap method")
            sc = replace(base, tau_max=float(v))
        elif axis == "m0":
            if base.method not in ("eipa", "tauipa"):
                raise ConfigError("an m0 sweep needs eipa or tauipa")
            if int(v) != float(v) or int(v) < 1:
                raise ConfigError("m0 values must be positive integers")
            sc = replace(base, m0=int(v))
        else:
            net = load_model(base.model)
            if "V" not in net.parameters:
                raise ConfigError("a volume sweep needs a model that declares parameter V")
            overrides = dict(base.overrides, V=float(v))
            # the auxiliary budget follows the system size
            m0 = max(1, int(round(float(v)))) if base.method in ("eipa", "tauipa") else base.m0
            sc = replace(base, overrides=overrides, m0=m0)
        rows.append(run_scenario(sc))
    return rows


# Published-scale settings and reference sensitivities for the bundled models.
PRESETS = {
    "birth_death": dict(
        model="birth_death", T=(5.0, 10.0), tau_max=0.5, params=("theta2",),
        reference={("theta2", 5.0): -90.204, ("theta2", 10.0): -264.241}),
    "toggle_switch": dict(
        model="toggle_switch", T=(10.0,), tau_max=0.1, params=("alpha1", "alpha2", "beta", "gamma"),
        reference={("alpha1", 10.0): 1.195, ("alpha2", 10.0): -2.1194,
                   ("beta", 10.0): -5.9929, ("gamma", 10.0): 54.5721}),
    "repressilator": dict(
        model="repressilator", T=(10.0,), tau_max=0.01,
        params=("alpha1", "alpha2", "alpha3", "gamma1", "gamma2", "gamma3"),
        reference={("alpha1", 10.0): -68.6271, ("alpha2", 10.0): -2979.88,
                   ("alpha3", 10.0): 145.041, ("gamma1", 10.0): 257.091,
                   ("gamma2", 10.0): -119.526, ("gamma3", 10.0): -27.8796}),
}


def bench_scenarios(preset: str, N: int, seed: int = 0, workers: int = 1,
                    methods=METHODS, params=None, m0: int = 10, n0: int = 1000,
                    h: float = 0.1) -> list[Scenario]:
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}")
    spec = PRESETS[preset]
    params = spec["params"] if params is None else tuple(params)
    out = []
    for T in spec["T"]:
        for p in params:
            for m in methods:
                out.append(Scenario(
                    model=spec["model"], method=m, param=p, T=T, N=N,
                    tau_max=spec["tau_max"] if m in TAU_METHODS else None, m0=m0, n0=n0, h=h,
                    seed=seed, workers=workers, reference=spec["reference"].get((p, T))))
    return out


def output_paths(out: str | Path) -> tuple[Path, Path]:
    """The data file and the figure written next to it."""
    out = Path(out)
    return out, out.with_suffix(".png")
