"""Tiny closed expression language for problem coefficients.

Coefficients are data, not code: each one is a string over ``t``, the state
components ``x1..xd``, and the control components ``u1..``, ``v1..``, using
arithmetic (+, -, *, /, **), numeric literals and the functions
sin, cos, exp, abs, min, max, clamp.  Expressions compile once into closures
that evaluate on numpy arrays with normal broadcasting.
"""

from __future__ import annotations

import ast

import numpy as np

from .errors import ValidationError

_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.true_divide,
    ast.Pow: np.power,
}

_UNARY = {
    ast.USub: np.negative,
    ast.UAdd: lambda a: a,
}


def _clamp(value, lo, hi):
    return np.minimum(np.maximum(value, lo), hi)


_FUNCS = {
    "sin": (np.sin, 1, 1),
    "cos": (np.cos, 1, 1),
    "exp": (np.exp, 1, 1),
    "abs": (np.abs, 1, 1),
    "min": (None, 2, None),  # variadic, folded below
    "max": (None, 2, None),
    "clamp": (_clamp, 3, 3),
}


class CompiledExpr:
    """A compiled coefficient expression.

    Calling with an environment dict mapping variable names to scalars or
    broadcastable arrays returns the evaluated value (float64).
    """

    __slots__ = ("src", "names", "_fn")

    def __init__(self, src: str, names: frozenset, fn):
        self.src = src
        self.names = names
        self._fn = fn

    def __call__(self, env: dict):
        return self._fn(env)

    def __repr__(self):  # pragma: no cover
        return f"CompiledExpr({self.src!r})"


def _compile_node(node, allowed, used, src):
    if isinstance(node, ast.Expression):
        return _compile_node(node.body, allowed, used, src)
    if isinstance(node, ast.Constant):
        if not isinstance(node.value, (int, float)):
            raise ValidationError(f"non-numeric literal in expression {src!r}")
        val = float(node.value)
        return lambda env: val
    if isinstance(node, ast.Name):
        if node.id not in allowed:
            raise ValidationError(
                f"unknown variable {node.id!r} in expression {src!r} "
                f"(allowed: {sorted(allowed)})"
            )
        used.add(node.id)
        name = node.id
        return lambda env: env[name]
    if isinstance(node, ast.BinOp):
        op = _BINOPS.get(type(node.op))
        if op is None:
            raise ValidationError(f"operator not allowed in expression {src!r}")
        lhs = _compile_node(node.left, allowed, used, src)
        rhs = _compile_node(node.right, allowed, used, src)
        return lambda env: op(lhs(env), rhs(env))
    if isinstance(node, ast.UnaryOp):
        op = _UNARY.get(type(node.op))
        if op is None:
            raise ValidationError(f"unary operator not allowed in {src!r}")
        inner = _compile_node(node.operand, allowed, used, src)
        return lambda env: op(inner(env))
    if isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.keywords:
            raise ValidationError(f"only plain function calls allowed in {src!r}")
        fname = node.func.id
        if fname not in _FUNCS:
            raise ValidationError(
                f"unknown function {fname!r} in {src!r} (allowed: {sorted(_FUNCS)})"
            )
        fn, lo, hi = _FUNCS[fname]
        nargs = len(node.args)
        if nargs < lo or (hi is not None and nargs > hi):
            raise ValidationError(f"{fname} takes {lo}..{hi} arguments in {src!r}")
        args = [_compile_node(a, allowed, used, src) for a in node.args]
        if fname == "min":
            return lambda env: _fold(np.minimum, args, env)
        if fname == "max":
            return lambda env: _fold(np.maximum, args, env)
        return lambda env: fn(*(a(env) for a in args))
    raise ValidationError(f"syntax element {type(node).__name__} not allowed in {src!r}")


def _fold(op, args, env):
    out = args[0](env)
    for a in args[1:]:
        out = op(out, a(env))
    return out


def variable_names(d: int, du: int = 0, dv: int = 0, with_t: bool = True):
    """Allowed variable names for a coefficient of the given signature."""
    names = set()
    if with_t:
        names.add("t")
    names.update(f"x{j + 1}" for j in range(d))
    names.update(f"u{j + 1}" for j in range(du))
    names.update(f"v{j + 1}" for j in range(dv))
    return frozenset(names)


def compile_expr(src: str, allowed: frozenset) -> CompiledExpr:
    """Compile a coefficient expression string.

    Raises ValidationError on syntax errors, unknown names or disallowed
    constructs.
    """
    if not isinstance(src, str):
        raise ValidationError(f"expression must be a string, got {type(src).__name__}")
    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError as exc:
        raise ValidationError(f"cannot parse expression {src!r}: {exc.msg}") from exc
    used: set = set()
    fn = _compile_node(tree, allowed, used, src)
    return CompiledExpr(src, frozenset(used), fn)
