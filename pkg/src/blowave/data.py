"""Named one-dimensional data generators.

Each generator returns a :class:`Datum`: a vectorised function of one
real variable (a radius r for Cauchy data, the null coordinate q for
asymptotic data) that also knows its name, parameters and support.
"""
from __future__ import annotations

import ast
import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Datum:
    name: str
    params: dict = field(default_factory=dict)
    support_radius: float = math.inf
    decay_exponent: float | None = None

    def __call__(self, x):
        return _KERNELS[self.name](np.asarray(x, dtype=float), **self.params)

    def spec(self) -> str:
        args = ", ".join(f"{k}={_fmt(v)}" for k, v in self.params.items())
        return f"{self.name}({args})"

    def scaled(self, c: float) -> "Datum":
        if "a" not in _DEFAULTS[self.name]:
            raise ValueError(f"{self.name} has no amplitude parameter")
        p = dict(self.params)
        p["a"] = c * p["a"]
        return make(self.name, **p)


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, float) else repr(v)


def _bump(x, a=1.0, w=1.0, center=0.0):
    y = (x - center) / w
    out = np.zeros_like(y)
    inside = np.abs(y) < 1.0
    out[inside] = a * np.exp(1.0 - 1.0 / (1.0 - y[inside] ** 2))
    return out


def _gaussian(x, a=1.0, s=1.0):
    return a * np.exp(-((x / s) ** 2))


def _inverse_sqrt(x, a=1.0):
    return a / np.sqrt(1.0 + x**2)


def _powerlaw(x, gamma=2.0, a=1.0):
    return a * (1.0 + x**2) ** (-gamma / 2.0)


def _constant(x, a=1.0):
    return np.full_like(x, a)


def _zero(x):
    return np.zeros_like(x)


_KERNELS = {
    "bump": _bump,
    "gaussian": _gaussian,
    "inverse_sqrt": _inverse_sqrt,
    "powerlaw": _powerlaw,
    "constant": _constant,
    "zero": _zero,
}

_DEFAULTS = {
    "bump": {"a": 1.0, "w": 1.0, "center": 0.0},
    "gaussian": {"a": 1.0, "s": 1.0},
    "inverse_sqrt": {"a": 1.0},
    "powerlaw": {"gamma": 2.0, "a": 1.0},
    "constant": {"a": 1.0},
    "zero": {},
}

GENERATORS = tuple(_KERNELS)


def make(name: str, **params) -> Datum:
    if name not in _KERNELS:
        raise ValueError(f"unknown data generator {name!r}; known: {', '.join(GENERATORS)}")
    unknown = set(params) - set(_DEFAULTS[name])
    if unknown:
        raise ValueError(f"{name}() got unknown parameter(s) {sorted(unknown)}")
    full = {k: float(params.get(k, v)) for k, v in _DEFAULTS[name].items()}
    support, decay = math.inf, None
    if name == "bump":
        if full["w"] <= 0:
            raise ValueError("bump width w must be positive")
        support = abs(full["center"]) + full["w"]
    elif name == "zero" or (name == "constant" and full["a"] == 0.0):
        support = 0.0
    elif name == "powerlaw":
        if full["gamma"] <= 0:
            raise ValueError("powerlaw gamma must be positive")
        decay = full["gamma"]
    elif name == "gaussian":
        if full["s"] <= 0:
            raise ValueError("gaussian width s must be positive")
    elif name == "inverse_sqrt":
        decay = 1.0
    if name in ("bump", "gaussian", "powerlaw", "inverse_sqrt", "constant") and full.get("a") == 0.0:
        support = 0.0
    return Datum(name, full, support, decay)


def parse_datum(text: str) -> Datum:
    """Parse ``name(k=v, ...)`` (or a bare ``name``) into a :class:`Datum`."""
    text = text.strip()
    try:
        node = ast.parse(text if "(" in text else text + "()", mode="eval").body
    except SyntaxError as exc:
        raise ValueError(f"cannot parse data spec {text!r}") from exc
    if not isinstance(node, ast.Call) or not isinstance(node.func, ast.Name) or node.args:
        raise ValueError(f"data spec must look like name(key=value, ...), got {text!r}")
    params = {}
    for kw in node.keywords:
        try:
            params[kw.arg] = float(ast.literal_eval(kw.value))
        except (ValueError, TypeError) as exc:
            raise ValueError(f"parameter {kw.arg} of {text!r} is not a number") from exc
    return make(node.func.id, **params)
