"""Tiny arithmetic expressions in ``n`` (and ``p``) such as ``0.2*n^(4/9)``.

Expressions are parsed with :mod:`ast` and only arithmetic on numeric
literals, the names ``n``/``p`` and the functions ``floor``/``ceil``/``round``
is accepted.  Non-integer results are rounded by the caller's rule.
"""

from __future__ import annotations

import ast
import math
import operator

from .errors import ConfigError

ROUNDING_RULES = ("nearest", "floor", "ceil")

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_FUNCS = {
    "floor": math.floor,
    "ceil": math.ceil,
    "round": lambda x: math.floor(x + 0.5),
}


class Expr:
    """A parsed expression; ``Expr("n^0.25")(n=500)`` -> 4.728..."""

    def __init__(self, text):
        self.text = str(text).strip()
        if not self.text:
            raise ConfigError("empty expression")
        try:
            tree = ast.parse(self.text.replace("^", "**"), mode="eval")
        except SyntaxError:
            raise ConfigError(f"cannot parse expression {self.text!r}") from None
        self._tree = tree.body
        self.names = set()
        self._check(self._tree)

    def _check(self, node):
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return
        if isinstance(node, ast.Name) and node.id in ("n", "p"):
            self.names.add(node.id)
            return
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            self._check(node.left)
            self._check(node.right)
            return
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            self._check(node.operand)
            return
        if (
            isinstance(node, ast.Call)
            and isinstance(node.func, ast.Name)
            and node.func.id in _FUNCS
            and len(node.args) == 1
            and not node.keywords
        ):
            self._check(node.args[0])
            return
        raise ConfigError(f"unsupported construct in expression {self.text!r}")

    def _eval(self, node, env):
        if isinstance(node, ast.Constant):
            return node.value
        if isinstance(node, ast.Name):
            if env.get(node.id) is None:
                raise ConfigError(f"expression {self.text!r} needs {node.id} but it is not known here")
            return env[node.id]
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](self._eval(node.left, env), self._eval(node.right, env))
        if isinstance(node, ast.UnaryOp):
            v = self._eval(node.operand, env)
            return -v if isinstance(node.op, ast.USub) else v
        return _FUNCS[node.func.id](self._eval(node.args[0], env))

    def __call__(self, n=None, p=None) -> float:
        try:
            value = float(self._eval(self._tree, {"n": n, "p": p}))
        except (ZeroDivisionError, OverflowError) as exc:
            raise ConfigError(f"cannot evaluate {self.text!r}: {exc}") from None
        if not math.isfinite(value):
            raise ConfigError(f"expression {self.text!r} is not finite")
        return value

    def is_constant(self):
        return not self.names

    def __repr__(self):
        return f"Expr({self.text!r})"

    def __str__(self):
        return self.text


def round_count(x: float, rule: str = "nearest") -> int:
    """Round a positive real to an integer count, never below 1."""
    if rule == "nearest":
        k = math.floor(x + 0.5)
    elif rule == "floor":
        k = math.floor(x)
    elif rule == "ceil":
        k = math.ceil(x)
    else:
        raise ConfigError(f"unknown rounding rule {rule!r}; expected one of {ROUNDING_RULES}")
    return max(1, int(k))
