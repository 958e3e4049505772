"""Jitted stack machine that evaluates compiled expressions inside kernels.

A :class:`Program` packs several expressions: expression ``j`` occupies
rows ``start[j]:end[j]`` of ``code`` (opcode, argument) and reads
constants from ``consts``.  Species counts are promoted to float.
"""

from __future__ import annotations

import math
from collections import namedtuple

import numpy as np
from numba import njit

from .errors import EvaluationError
from .expr import (OP_ADD, OP_CONST, OP_DIV, OP_MUL, OP_NEG, OP_PARAM, OP_POW,
                   OP_POWLOG, OP_SPECIES, OP_SUB, emit)

Program = namedtuple("Program", ["code", "consts", "start", "end"])


def compile_program(exprs, species: dict, params: dict) -> tuple[Program, int]:
    """Compile a list of expressions; returns the program and its stack depth."""
    code: list = []
    consts: list = []
    start, end = [], []
    depth = 1
    for e in exprs:
        start.append(len(code))
        depth = max(depth, emit(e, species, params, code, consts))
        end.append(len(code))
    code_arr = np.array(code, dtype=np.int64).reshape(-1, 2)
    if not consts:
        consts = [0.0]
    return Program(code_arr, np.array(consts, dtype=np.float64),
                   np.array(start, dtype=np.int64), np.array(end, dtype=np.int64)), depth


@njit(cache=True)
def _pow(a, b):
    if a == 0.0:
        if b > 0.0:
            return 0.0
        raise EvaluationError("0 raised to a non-positive power")
    if a < 0.0 and b != math.floor(b):
        raise EvaluationError("negative base raised to a non-integer power")
    return a ** b


@njit(cache=True)
def _powlog(a, b):
    if a == 0.0:
        if b > 0.0:
            return 0.0
        raise EvaluationError("0 raised to a non-positive power")
    if a < 0.0:
        raise EvaluationError("logarithm of a negative base")
    return (a ** b) * math.log(a)


@njit(cache=True)
def eval_one(prog, j, x, params, stack):
    code = prog.code
    sp = 0
    for i in range(prog.start[j], prog.end[j]):
        op = code[i, 0]
        if op == OP_SPECIES:
            stack[sp] = np.float64(x[code[i, 1]])
            sp += 1
        elif op == OP_PARAM:
            stack[sp] = params[code[i, 1]]
            sp += 1
        elif op == OP_CONST:
            stack[sp] = prog.consts[code[i, 1]]
            sp += 1
        elif op == OP_MUL:
            sp -= 1
            stack[sp - 1] *= stack[sp]
        elif op == OP_ADD:
            sp -= 1
            stack[sp - 1] += stack[sp]
        elif op == OP_SUB:
            sp -= 1
            stack[sp - 1] -= stack[sp]
        elif op == OP_DIV:
            sp -= 1
            if stack[sp] == 0.0:
                raise EvaluationError("division by zero in expression")
            stack[sp - 1] /= stack[sp]
        elif op == OP_POW:
            sp -= 1
            stack[sp - 1] = _pow(stack[sp - 1], stack[sp])
        elif op == OP_NEG:
            stack[sp - 1] = -stack[sp - 1]
        elif op == OP_POWLOG:
            sp -= 1
            stack[sp - 1] = _powlog(stack[sp - 1], stack[sp])
    return stack[0]


@njit(cache=True)
def rates_into(prog, x, params, stack, out):
    """Evaluate all propensities at ``x``; returns their sum.

    Raises on negative or non-finite values.
    """
    total = 0.0
    for k in range(out.shape[0]):
        v = eval_one(prog, k, x, params, stack)
        if not (v >= 0.0) or v == np.inf:
            raise EvaluationError("propensity evaluated to a negative or non-finite value")
        out[k] = v
        total += v
    if total == np.inf:
        raise EvaluationError("total propensity overflowed")
    return total


@njit(cache=True)
def derivs_into(prog, x, params, stack, out):
    """Evaluate all propensity derivatives at ``x``; returns sum of magnitudes."""
    total = 0.0
    for k in range(out.shape[0]):
        v = eval_one(prog, k, x, params, stack)
        if not math.isfinite(v):
            raise EvaluationError("propensity derivative is not finite")
        out[k] = v
        total += abs(v)
    return total


@njit(cache=True)
def observe(prog, x, params, stack):
    v = eval_one(prog, 0, x, params, stack)
    if not math.isfinite(v):
        raise EvaluationError("observable is not finite")
    return v


@njit(cache=True)
def apply_into(x, stoich, k, count):
    """``x += count * stoich[k]`` clamping negatives to 0; returns clamp count."""
    clamped = 0
    for i in range(x.shape[0]):
        v = x[i] + count * stoich[k, i]
        if v < 0:
            v = 0
            clamped += 1
        x[i] = v
    return clamped


@njit(cache=True)
def clamp_into(x):
    clamped = 0
    for i in range(x.shape[0]):
        if x[i] < 0:
            x[i] = 0
            clamped += 1
    return clamped


@njit(cache=True)
def states_equal(a, b):
    for i in range(a.shape[0]):
        if a[i] != b[i]:
            return False
    return True
