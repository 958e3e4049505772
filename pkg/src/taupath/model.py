"""Reaction networks and the line-oriented model file format.

A model file looks like::

    species: M1 P1
    param gamma1 = 0.1
    reaction:  -> M1        @ 1 + 100/(1 + P1^2)
    reaction: M1 -> M1 + P1 @ 50*M1
    reaction: P1 ->         @ gamma1*P1
    observable: P1
    init: 0 0

``#`` starts a comment.  Reaction sides are ``+``-separated species with
optional integer multiplicities (``2 A``, ``2A`` or ``2*A``); an empty side
is the empty complex.  The expression after ``@`` is the propensity.
"""

from __future__ import annotations

import re
from collections import namedtuple
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import EvaluationError, ModelError, ModelSyntaxError
from .expr import Expr, parse_expression
from .vm import Program, compile_program

CompiledNetwork = namedtuple("CompiledNetwork", ["stoich", "prop", "obs", "depth"])


@dataclass(frozen=True)
class Reaction:
    reactants: tuple[tuple[str, int], ...]
    products: tuple[tuple[str, int], ...]
    propensity: Expr
    stoichiometry: tuple[int, ...]


@dataclass(frozen=True)
class ReactionNetwork:
    species: tuple[str, ...]
    reactions: tuple[Reaction, ...]
    parameters: dict = field(hash=False)   # name -> default value, declaration order
    observable: Expr
    initial_state: tuple[int, ...]

    def __post_init__(self):
        if not self.species:
            raise ModelError("network declares no species")
        if not self.reactions:
            raise ModelError("network declares no reactions")
        if len(set(self.species)) != len(self.species):
            raise ModelError("duplicate species names")
        clash = set(self.species) & set(self.parameters)
        if clash:
            raise ModelError(f"names used both as species and parameter: {sorted(clash)}")
        known = set(self.species) | set(self.parameters)
        for k, r in enumerate(self.reactions):
            bad = r.propensity.names() - known
            if bad:
                raise ModelError(f"reaction {k + 1}: undeclared identifier(s) {sorted(bad)}")
        bad = self.observable.names() - set(self.species)
        if bad:
            raise ModelError(f"observable references non-species name(s) {sorted(bad)}")
        if len(self.initial_state) != len(self.species):
            raise ModelError("initial state has wrong length")

    @property
    def n_species(self) -> int:
        return len(self.species)

    @property
    def n_reactions(self) -> int:
        return len(self.reactions)

    @property
    def param_names(self) -> tuple[str, ...]:
        return tuple(self.parameters)

    @cached_property
    def stoichiometry(self) -> np.ndarray:
        return np.array([r.stoichiometry for r in self.reactions], dtype=np.int64)

    @cached_property
    def _species_index(self) -> dict:
        return {s: i for i, s in enumerate(self.species)}

    @cached_property
    def _param_index(self) -> dict:
        return {p: i for i, p in enumerate(self.parameters)}

    @cached_property
    def compiled(self) -> CompiledNetwork:
        prop, d1 = compile_program([r.propensity for r in self.reactions],
                                   self._species_index, self._param_index)
        obs, d2 = compile_program([self.observable], self._species_index, self._param_index)
        return CompiledNetwork(self.stoichiometry, prop, obs, max(d1, d2))

    @cached_property
    def _derivative_cache(self) -> dict:
        return {}

    def derivative(self, k: int, theta: str) -> Expr:
        """Symbolic d(propensity k)/d(theta), cached per (k, theta)."""
        if theta not in self.parameters:
            raise ModelError(f"unknown parameter {theta!r}")
        key = (k, theta)
        cache = self._derivative_cache
        if key not in cache:
            cache[key] = self.reactions[k].propensity.diff(theta)
        return cache[key]

    def derivative_program(self, theta: str) -> tuple[Program, int]:
        key = ("program", theta)
        cache = self._derivative_cache
        if key not in cache:
            exprs = [self.derivative(k, theta) for k in range(self.n_reactions)]
            cache[key] = compile_program(exprs, self._species_index, self._param_index)
        return cache[key]

    def param_vector(self, p: Mapping[str, float] | None = None) -> np.ndarray:
        """Parameter values in declaration order; ``p`` overrides the defaults."""
        values = dict(self.parameters)
        if p:
            unknown = set(p) - set(values)
            if unknown:
                raise ModelError(f"unknown parameter(s) {sorted(unknown)}")
            values.update(p)
        return np.array([float(values[n]) for n in self.parameters], dtype=np.float64)

    def state_vector(self, x=None) -> np.ndarray:
        if x is None:
            x = self.initial_state
        arr = np.asarray(x, dtype=np.int64).reshape(-1).copy()
        if arr.shape[0] != self.n_species:
            raise ModelError(f"state must have {self.n_species} components")
        if (arr < 0).any():
            raise ModelError("state components must be non-negative")
        return arr

    def env(self, x, p: Mapping[str, float] | None = None) -> dict:
        env = dict(self.parameters)
        if p:
            env.update(p)
        env.update({s: float(v) for s, v in zip(self.species, np.asarray(x).reshape(-1))})
        return env

    def with_parameters(self, **values: float) -> "ReactionNetwork":
        params = dict(self.parameters)
        unknown = set(values) - set(params)
        if unknown:
            raise ModelError(f"unknown parameter(s) {sorted(unknown)}")
        params.update({k: float(v) for k, v in values.items()})
        return ReactionNetwork(self.species, self.reactions, params, self.observable,
                               self.initial_state)

    def to_text(self) -> str:
        """Serialize back to the model file format."""
        lines = ["species: " + " ".join(self.species)]
        for name, value in self.parameters.items():
            lines.append(f"param {name} = {value!r}")
        for r in self.reactions:
            lines.append(f"reaction: {_side(r.reactants)} -> {_side(r.products)} @ {r.propensity}")
        lines.append(f"observable: {self.observable}")
        lines.append("init: " + " ".join(str(v) for v in self.initial_state))
        return "\n".join(lines) + "\n"


def _side(terms) -> str:
    return " + ".join(name if n == 1 else f"{n} {name}" for name, n in terms)


# -- parsing -----------------------------------------------------------------

_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*$")
_TERM = re.compile(r"\s*(?:(\d+)\s*\*?\s*)?([A-Za-z_][A-Za-z0-9_]*)\s*$")
_PARAM = re.compile(r"param\s+([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.+)$")


def _parse_side(text: str, line: int, col: int, species: dict) -> tuple[tuple[str, int], ...]:
    if text.strip() == "":
        return ()
    terms: dict[str, int] = {}
    offset = 0
    for part in text.split("+"):
        m = _TERM.match(part)
        if m is None:
            raise ModelSyntaxError(f"bad reaction term {part.strip()!r}", line, col + offset + 1)
        mult = int(m.group(1)) if m.group(1) else 1
        name = m.group(2)
        if name not in species:
            raise ModelError(f"line {line}: undeclared species {name!r}")
        terms[name] = terms.get(name, 0) + mult
        offset += len(part) + 1
    return tuple(terms.items())


def parse_model(text: str) -> ReactionNetwork:
    """Parse model-file text into a validated :class:`ReactionNetwork`."""
    species: dict[str, int] = {}
    params: dict[str, float] = {}
    raw_reactions = []
    observable = None
    init = None
    seen_species = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        indent = len(line) - len(line.lstrip())
        body = line.strip()
        if body.startswith("species:"):
            if seen_species:
                raise ModelSyntaxError("species declared twice", lineno, indent + 1)
            seen_species = True
            for name in body[len("species:"):].split():
                if not _NAME.match(name):
                    raise ModelSyntaxError(f"invalid species name {name!r}", lineno, indent + 1)
                if name in species:
                    raise ModelError(f"line {lineno}: duplicate species {name!r}")
                species[name] = len(species)
        elif body.startswith("param"):
            m = _PARAM.match(body)
            if m is None:
                raise ModelSyntaxError("expected 'param NAME = VALUE'", lineno, indent + 1)
            name = m.group(1)
            if name in params:
                raise ModelError(f"line {lineno}: duplicate parameter {name!r}")
            col = indent + body.index("=") + 2
            value_expr = parse_expression(m.group(2), lineno, col)
            if value_expr.names():
                raise ModelSyntaxError("parameter values must be numeric constants", lineno, col)
            params[name] = float(value_expr.evaluate({}))
        elif body.startswith("reaction:"):
            raw_reactions.append((lineno, indent, body))
        elif body.startswith("observable:"):
            if observable is not None:
                raise ModelSyntaxError("observable declared twice", lineno, indent + 1)
            col = indent + len("observable:")
            observable = parse_expression(body[len("observable:"):], lineno, col)
        elif body.startswith("init:"):
            fields = body[len("init:"):].split()
            try:
                init = tuple(int(v) for v in fields)
            except ValueError:
                raise ModelSyntaxError("init values must be integers", lineno, indent + 1) from None
        else:
            raise ModelSyntaxError(f"unrecognized statement {body.split()[0]!r}", lineno, indent + 1)

    if not species:
        raise ModelError("empty network: no species declared")
    if not raw_reactions:
        raise ModelError("empty network: no reactions declared")
    reactions = []
    for lineno, indent, body in raw_reactions:
        rest = body[len("reaction:"):]
        base = indent + len("reaction:")
        if "@" not in rest:
            raise ModelSyntaxError("reaction needs '@ propensity'", lineno, base + len(rest) + 1)
        scheme, prop_text = rest.split("@", 1)
        prop_col = base + len(scheme) + 1
        if "->" not in scheme:
            raise ModelSyntaxError("reaction needs '->'", lineno, base + 1)
        lhs, rhs = scheme.split("->", 1)
        reactants = _parse_side(lhs, lineno, base, species)
        products = _parse_side(rhs, lineno, base + len(lhs) + 2, species)
        propensity = parse_expression(prop_text, lineno, prop_col)
        unknown = propensity.names() - set(species) - set(params)
        if unknown:
            raise ModelError(f"line {lineno}: undeclared identifier(s) {sorted(unknown)}")
        zeta = [0] * len(species)
        for name, n in reactants:
            zeta[species[name]] -= n
        for name, n in products:
            zeta[species[name]] += n
        reactions.append(Reaction(reactants, products, propensity, tuple(zeta)))
    if observable is None:
        raise ModelError("model declares no observable")
    if init is None:
        init = (0,) * len(species)
    if len(init) != len(species):
        raise ModelError(f"init lists {len(init)} values for {len(species)} species")
    if any(v < 0 for v in init):
        raise ModelError("init values must be non-negative")
    return ReactionNetwork(tuple(species), tuple(reactions), params, observable, init)


BUNDLED_MODELS = ("birth_death", "birth_death_volume", "repressilator", "toggle_switch")


def load_model(path_or_name: str | Path) -> ReactionNetwork:
    """Load a model file, or a bundled model by name (e.g. ``"birth_death"``)."""
    p = Path(path_or_name)
    if p.exists():
        return parse_model(p.read_text(encoding="utf-8"))
    name = str(path_or_name)
    if name.endswith(".model"):
        name = name[:-len(".model")]
    if name in BUNDLED_MODELS:
        text = resources.files("taupath.models").joinpath(f"{name}.model").read_text(encoding="utf-8")
        return parse_model(text)
    raise FileNotFoundError(f"no model file or bundled model named {path_or_name!r}")


# -- operations on single states ---------------------------------------------

def evaluate_propensity(net: ReactionNetwork, k: int, x: Sequence[int],
                        p: Mapping[str, float] | None = None) -> float:
    """Rate of reaction ``k`` (0-based) at state ``x`` with parameters ``p``."""
    value = net.reactions[k].propensity.evaluate(net.env(x, p))
    if not np.isfinite(value):
        raise EvaluationError(f"propensity of reaction {k + 1} is not finite")
    if value < 0:
        raise EvaluationError(f"propensity of reaction {k + 1} is negative ({value})")
    return value


def differentiate_propensity(net: ReactionNetwork, k: int, theta: str) -> Expr:
    return net.derivative(k, theta)


def apply_stoichiometry(x: Sequence[int], zeta: Sequence[int], count: int = 1) -> tuple[np.ndarray, bool]:
    """Return ``x + count*zeta`` with negatives clamped to 0, and whether a clamp happened."""
    if count < 0:
        raise ValueError("firing count must be non-negative")
    y = np.asarray(x, dtype=np.int64) + int(count) * np.asarray(zeta, dtype=np.int64)
    clamped = bool((y < 0).any())
    return np.maximum(y, 0), clamped
