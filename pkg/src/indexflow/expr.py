"""A small arithmetic expression language for problem files.

Grammar (Python syntax subset)::

    expr   := expr ('+' | '-' | '*' | '/' | '**') expr
            | ('-' | '+') expr
            | func '(' expr ')'
            | name | number
    func   := sin | cos | exp | sqrt | tanh
    name   := x1 | x2 | pi | e | u1 .. u9   (u-names only where allowed)

Expressions compile to numpy-vectorised closures.  Anything outside the
grammar (attribute access, subscripts, comprehensions, other calls) is
rejected before evaluation.
"""
from __future__ import annotations

import ast
import math
import re
from typing import Callable, Mapping, Sequence

import numpy as np

from .core import ConfigurationError, MatrixField

FUNCTIONS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "sqrt": np.sqrt, "tanh": np.tanh}
CONSTANTS = {"pi": math.pi, "e": math.e}

_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}

_IMPLICIT_PI = re.compile(r"(?<![\w.])(\d+(?:\.\d*)?|\.\d+)\s*pi\b")


class ExpressionError(ConfigurationError):
    pass


def normalize(text: str) -> str:
    """Accept the shorthand ``1.5pi`` for ``1.5*pi``."""
    return _IMPLICIT_PI.sub(r"\1*pi", text.strip())


def compile_expr(text: str, variables: Sequence[str]) -> Callable[[Mapping[str, np.ndarray]], np.ndarray]:
    """Compile ``text`` into ``f(env) -> array`` over the given variable names."""
    allowed = set(variables)
    try:
        tree = ast.parse(normalize(str(text)), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse expression {text!r}: {exc.msg}") from None

    def build(node):
        if isinstance(node, ast.Expression):
            return build(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
                and not isinstance(node.value, bool):
            val = float(node.value)
            return lambda env: val
        if isinstance(node, ast.Name):
            if node.id in allowed:
                name = node.id
                return lambda env: env[name]
            if node.id in CONSTANTS:
                val = CONSTANTS[node.id]
                return lambda env: val
            raise ExpressionError(f"unknown name {node.id!r} in {text!r}")
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            op = _BINOPS[type(node.op)]
            left, right = build(node.left), build(node.right)
            return lambda env: op(left(env), right(env))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            inner = build(node.operand)
            if isinstance(node.op, ast.USub):
                return lambda env: np.negative(inner(env))
            return inner
        if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
                and node.func.id in FUNCTIONS and len(node.args) == 1 and not node.keywords):
            fn = FUNCTIONS[node.func.id]
            arg = build(node.args[0])
            return lambda env: fn(arg(env))
        raise ExpressionError(f"unsupported construct {type(node).__name__} in {text!r}")

    return build(tree)


def evaluate_number(text) -> float:
    """Evaluate a constant expression such as ``"1.5pi"`` or ``"(2.5*pi)**2"``."""
    if isinstance(text, (int, float)):
        return float(text)
    return float(compile_expr(text, ())({}))


class ExprField(MatrixField):
    """Matrix field whose entries are expressions in ``x1`` (and ``x2``)."""

    def __init__(self, entries, n: int = 1):
        rows = [list(r) for r in entries]
        k = len(rows)
        if any(len(r) != k for r in rows):
            raise ConfigurationError("expression matrix must be square")
        self.k = k
        self.n = n
        self.entries = [[str(e) for e in r] for r in rows]
        names = [f"x{i + 1}" for i in range(n)]
        self._fns = [[compile_expr(e, names) for e in r] for r in self.entries]

    def __call__(self, x) -> np.ndarray:
        pts = np.asarray(x, dtype=float)
        if self.n == 1 and (pts.ndim == 0 or pts.shape[-1] != 1):
            pts = pts[..., None]
        env = {f"x{i + 1}": pts[..., i] for i in range(self.n)}
        lead = pts.shape[:-1]
        out = np.empty(lead + (self.k, self.k))
        for i in range(self.k):
            for j in range(self.k):
                out[..., i, j] = np.broadcast_to(self._fns[i][j](env), lead)
        return out

    def __repr__(self) -> str:
        return f"ExprField({self.entries})"


class ExprVector:
    """Vector of expressions in ``x1.., u1..``; used for nonlinear blocks."""

    def __init__(self, entries, k: int, n: int = 1):
        self.k, self.n = k, n
        names = [f"x{i + 1}" for i in range(n)] + [f"u{j + 1}" for j in range(k)]
        self.entries = [str(e) for e in entries]
        if len(self.entries) != k:
            raise ConfigurationError(f"expected {k} expressions, got {len(self.entries)}")
        self._fns = [compile_expr(e, names) for e in self.entries]

    def env(self, x, u):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        if self.n == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        env = {f"x{i + 1}": x[..., i] for i in range(self.n)}
        env.update({f"u{j + 1}": u[..., j] for j in range(self.k)})
        lead = np.broadcast_shapes(x.shape[:-1], u.shape[:-1])
        return env, lead

    def __call__(self, x, u) -> np.ndarray:
        env, lead = self.env(x, u)
        return np.stack([np.broadcast_to(f(env), lead) for f in self._fns], -1)


class ExprMatrix(ExprVector):
    """k x k matrix of expressions in ``x1.., u1..``."""

    def __init__(self, entries, k: int, n: int = 1):
        rows = [list(r) for r in entries]
        if len(rows) != k or any(len(r) != k for r in rows):
            raise ConfigurationError("Jacobian expression matrix must be k x k")
        self.k, self.n = k, n
        names = [f"x{i + 1}" for i in range(n)] + [f"u{j + 1}" for j in range(k)]
        self.entries = [[str(e) for e in r] for r in rows]
        self._fns = [[compile_expr(e, names) for e in r] for r in self.entries]

    def __call__(self, x, u) -> np.ndarray:
        env, lead = self.env(x, u)
        out = np.empty(lead + (self.k, self.k))
        for i in range(self.k):
            for j in range(self.k):
                out[..., i, j] = np.broadcast_to(self._fns[i][j](env), lead)
        return out


def fd_jacobian(V: Callable, k: int, h: float = 1e-6) -> Callable:
    """Central-difference Jacobian in ``u`` for a vectorised ``V(x, u)``."""

    def DV(x, u):
        u = np.asarray(u, dtype=float)
        cols = []
        for j in range(k):
            e = np.zeros(k)
            e[j] = h
            cols.append((V(x, u + e) - V(x, u - e)) / (2 * h))
        return np.stack(cols, -1)

    return DV
