"""JSON problem files.

Layout::

    {
      "name": "scalar",                      # optional
      "k": 1, "n": 1, "nu": 0,
      "domain": "UnitInterval",              # optional, inferred from n
      "r_max": 1.0,
      "S": {"kind": "constant", "matrix": [["-(3.5*pi)**2"]]},
      "nonlinear": {                         # optional
        "V": ["-(2.5pi)**2*u1 + u1**3"],
        "DV": [["-(2.5pi)**2 + 3*u1**2"]],   # optional, else central differences
        "gradient": true
      }
    }

``S.kind`` is ``constant`` (numbers or constant expressions), ``expr``
(entries in ``x1``, ``x2``) or ``grid`` (``axes`` plus ``values`` with
shape ``(len(ax_1), ..., k, k)``, linearly interpolated).  Expressions
use ``+ - * / **``, parentheses, ``sin cos exp sqrt tanh`` and the
constants ``pi`` and ``e``; ``1.5pi`` is read as ``1.5*pi``.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .core import ConfigurationError, ConstantField, GridField, NonlinearSpec, ProblemSpec
from .expr import ExprField, ExprMatrix, ExprVector, evaluate_number, fd_jacobian


def _field(block: dict, k: int, n: int):
    if not isinstance(block, dict) or "kind" not in block:
        raise ConfigurationError("S must be an object with a 'kind'")
    kind = block["kind"]
    if kind == "constant":
        M = np.array([[evaluate_number(v) for v in row] for row in block["matrix"]], dtype=float)
        if M.shape != (k, k):
            raise ConfigurationError(f"constant S has shape {M.shape}, expected {(k, k)}")
        return ConstantField(M, n=n)
    if kind == "expr":
        f = ExprField(block["entries"], n=n)
        if f.k != k:
            raise ConfigurationError(f"expression S is {f.k} x {f.k}, expected {k} x {k}")
        return f
    if kind == "grid":
        return GridField(block["axes"], block["values"])
    raise ConfigurationError(f"unknown S kind {kind!r}")


def problem_from_dict(data: dict):
    """``(ProblemSpec, NonlinearSpec or None)`` from a parsed problem file."""
    try:
        k, nu = int(data["k"]), int(data["nu"])
    except KeyError as exc:
        raise ConfigurationError(f"problem file lacks field {exc.args[0]!r}") from None
    n = int(data.get("n", 1))
    spec = ProblemSpec(
        k=k, nu=nu, S=_field(data["S"], k, n), n=n, domain=data.get("domain"),
        r_max=float(evaluate_number(data.get("r_max", 1.0))), name=str(data.get("name", "")),
    )
    nl = data.get("nonlinear")
    nspec = None
    if nl is not None:
        V = ExprVector(nl["V"], k, n)
        DV = ExprMatrix(nl["DV"], k, n) if "DV" in nl else fd_jacobian(V, k)
        nspec = NonlinearSpec(V=V, DV=DV, k=k, is_gradient=bool(nl.get("gradient", True)), n=n,
                              name=spec.name)
    return spec, nspec


def load_problem(path):
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: invalid JSON ({exc})") from None
    return problem_from_dict(data)


def problem_to_dict(spec: ProblemSpec, nspec: NonlinearSpec | None = None) -> dict:
    """Inverse of :func:`problem_from_dict` for constant, expression and grid fields."""
    S = spec.S
    if isinstance(S, ConstantField):
        block = {"kind": "constant", "matrix": np.asarray(S.matrix).tolist()}
    elif isinstance(S, ExprField):
        block = {"kind": "expr", "entries": S.entries}
    elif isinstance(S, GridField):
        block = {"kind": "grid", "axes": [a.tolist() for a in S.axes], "values": S.values.tolist()}
    elif hasattr(S, "expressions"):
        block = {"kind": "expr", "entries": S.expressions()}
    else:
        raise ConfigurationError(f"cannot serialise field of type {type(S).__name__}")
    out = {"name": spec.name, "k": spec.k, "n": spec.n, "nu": spec.nu, "domain": spec.domain.value,
           "r_max": spec.r_max, "S": block}
    if nspec is not None:
        if not isinstance(nspec.V, ExprVector):
            raise ConfigurationError("only expression-based nonlinear blocks can be written")
        nl = {"V": nspec.V.entries, "gradient": nspec.is_gradient}
        if isinstance(nspec.DV, ExprMatrix):
            nl["DV"] = nspec.DV.entries
        out["nonlinear"] = nl
    return out


def save_problem(path, spec: ProblemSpec, nspec: NonlinearSpec | None = None) -> None:
    Path(path).write_text(json.dumps(problem_to_dict(spec, nspec), indent=2, sort_keys=True) + "\n")
