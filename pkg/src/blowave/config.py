"""Sectioned ``key = value`` run configuration.

::

    command = forward          # top level, before any section
    [data]
    u1 = bump(a=0.5, w=6)
    [grid]
    h = 0.05
    [solver]
    t_max = 200
    [output]
    decimate = 10

Every problem found is reported (with its line number), not just the first.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Optional

from .data import parse_datum


class Command(str, Enum):
    ASYMPTOTIC = "asymptotic"
    FORWARD = "forward"
    BACKWARD = "backward"
    SIGNCHECK = "signcheck"
    DIAGNOSE = "diagnose"
    SWEEP = "sweep"


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        super().__init__("\n".join(errors))
        self.errors = list(errors)


@dataclass(frozen=True)
class _Key:
    kind: str  # float, int, bool, str, datum, floats
    default: Any
    check: Optional[Callable[[Any], bool]] = None
    rule: str = ""
    choices: tuple = ()


def _pos(x):
    return x > 0


SCHEMA: dict[str, dict[str, _Key]] = {
    "data": {
        "u0": _Key("datum", "zero"),
        "u1": _Key("datum", "zero"),
        "A": _Key("datum", None),
    },
    "grid": {
        "h": _Key("float", 0.05, _pos, "h > 0"),
        "r_max": _Key("float", None, _pos, "r_max > 0"),
        "s_max": _Key("float", 100.0, _pos, "s_max > 0"),
        "n_s": _Key("int", 11, lambda n: n >= 2, "n_s >= 2"),
        "q_min": _Key("float", -3.0),
        "q_max": _Key("float", 3.0),
        "n_q": _Key("int", 61, lambda n: n >= 2, "n_q >= 2"),
    },
    "solver": {
        "t_max": _Key("float", 50.0, _pos, "t_max > 0"),
        "cfl": _Key("float", None, lambda c: 0 < c <= 1, "CFL bound 0 < cfl = dt/h <= 1"),
        "blowup_threshold": _Key("float", 1e6, _pos, "blowup_threshold > 0"),
        "source": _Key("str", "centered", choices=("centered", "lagged")),
        "domain_of_dependence": _Key("bool", False),
        "epsilon": _Key("float", 0.1, lambda e: 0 < e <= 0.5, "0 < epsilon <= 0.5"),
        "delta": _Key("float", 0.1, lambda d: 0 < d < 1, "0 < delta < 1"),
        "T": _Key("float", 50.0, lambda t: t > 1, "T > 1"),
        "store_dt": _Key("float", 1.0, _pos, "store_dt > 0"),
        "margin": _Key("float", 5.0, lambda m: m >= 0, "margin >= 0"),
        "step": _Key("float", 1e-3, _pos, "step > 0"),
        "sweep_epsilon": _Key("floats", (0.05, 0.1, 0.2),
                              lambda xs: len(xs) > 0 and all(0 < e <= 0.5 for e in xs),
                              "a nonempty list with 0 < epsilon <= 0.5"),
        "search_r_max": _Key("float", 20.0, _pos, "search_r_max > 0"),
        "q_beta": _Key("float", None, lambda q: q < 0, "q_beta < 0"),
    },
    "output": {
        "field_csv": _Key("bool", False),
        "decimate": _Key("int", 10, lambda n: n >= 1, "decimate >= 1"),
        "seed": _Key("int", 0, lambda n: n >= 0, "seed >= 0"),
        "n_random_x0": _Key("int", 0, lambda n: n >= 0, "n_random_x0 >= 0"),
    },
}
ALIASES = {("data", "data"): "A"}
DEFAULT_CFL = {Command.BACKWARD: 1.0, Command.SWEEP: 1.0}


@dataclass
class RunConfig:
    command: Command
    data: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)

    def section(self, name: str) -> dict:
        return getattr(self, name)

    @property
    def cfl(self) -> float:
        c = self.solver.get("cfl")
        return c if c is not None else DEFAULT_CFL.get(self.command, 0.5)

    def to_text(self) -> str:
        """Effective config with defaults resolved; parses back to an equal config."""
        lines = [f"command = {self.command.value}"]
        for sec in SCHEMA:
            lines.append(f"[{sec}]")
            for key, spec in SCHEMA[sec].items():
                val = self.section(sec).get(key)
                if val is None:
                    continue
                lines.append(f"{key} = {_emit(spec.kind, val)}")
        return "\n".join(lines) + "\n"


def _emit(kind: str, val) -> str:
    if kind == "float":
        return repr(float(val))
    if kind == "floats":
        return ", ".join(repr(float(v)) for v in val)
    if kind == "bool":
        return "true" if val else "false"
    if kind == "datum":
        return val.spec()
    return str(val)


def _convert(kind: str, raw: str, choices: tuple):
    if kind == "float":
        v = float(raw)
        if not math.isfinite(v):
            raise ValueError("not a finite number")
        return v
    if kind == "int":
        f = float(raw)
        if f != int(f):
            raise ValueError("not an integer")
        return int(f)
    if kind == "bool":
        low = raw.lower()
        if low in ("true", "yes", "1", "on"):
            return True
        if low in ("false", "no", "0", "off"):
            return False
        raise ValueError("expected true or false")
    if kind == "floats":
        return tuple(_convert("float", p.strip(), ()) for p in raw.split(",") if p.strip())
    if kind == "datum":
        return parse_datum(raw)
    if choices and raw not in choices:
        raise ValueError(f"expected one of {', '.join(choices)}")
    return raw


_KIND_NAMES = {"float": "a number", "int": "an integer", "bool": "a boolean",
               "floats": "a comma-separated list of numbers", "datum": "a data spec",
               "str": "a string"}


def parse_config(text: str, command: Optional[str] = None) -> RunConfig:
    """Parse and validate; raises :class:`ConfigError` listing every problem."""
    errors: list[str] = []
    values: dict[str, dict[str, Any]] = {s: {} for s in SCHEMA}
    seen: dict[tuple, int] = {}
    cmd_text, cmd_line = None, 0
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if body.startswith("["):
            name = body.strip("[]").strip()
            if not body.endswith("]") or name not in SCHEMA:
                errors.append(f"line {lineno}: unknown section {body!r}; "
                              f"expected one of {', '.join('[' + s + ']' for s in SCHEMA)}")
                section = "?"
            else:
                section = name
            continue
        if "=" not in body:
            errors.append(f"line {lineno}: expected 'key = value', got {body!r}")
            continue
        key, raw = (p.strip() for p in body.split("=", 1))
        if section is None:
            if key == "command":
                cmd_text, cmd_line = raw, lineno
            else:
                errors.append(f"line {lineno}: unknown top-level key {key!r} (only 'command' "
                              "may precede the first section)")
            continue
        if section == "?":
            continue
        key = ALIASES.get((section, key), key)
        spec = SCHEMA[section].get(key)
        if spec is None:
            errors.append(f"line {lineno}: unknown key {key!r} in [{section}]; known: "
                          f"{', '.join(SCHEMA[section])}")
            continue
        if (section, key) in seen:
            errors.append(f"line {lineno}: duplicate key {key!r} in [{section}] "
                          f"(first set on line {seen[(section, key)]})")
            continue
        seen[(section, key)] = lineno
        try:
            val = _convert(spec.kind, raw, spec.choices)
        except ValueError as exc:
            errors.append(f"line {lineno}: [{section}] {key} = {raw!r} is not "
                          f"{_KIND_NAMES[spec.kind]} ({exc})")
            continue
        if spec.check is not None and not spec.check(val):
            errors.append(f"line {lineno}: [{section}] {key} = {raw} is out of range; "
                          f"requires {spec.rule}")
            continue
        values[section][key] = val

    cmd = None
    if command is not None and cmd_text is not None and command != cmd_text:
        errors.append(f"line {cmd_line}: command {cmd_text!r} conflicts with the command "
                      f"line ({command!r})")
    chosen = cmd_text if cmd_text is not None else command
    if chosen is None:
        errors.insert(0, "missing command")
    else:
        try:
            cmd = Command(chosen)
        except ValueError:
            errors.append(f"line {cmd_line}: unknown command {chosen!r}; expected one of "
                          f"{', '.join(c.value for c in Command)}")

    for sec, keys in SCHEMA.items():
        for key, spec in keys.items():
            values[sec].setdefault(key, spec.default)
            if spec.kind == "datum" and isinstance(values[sec][key], str):
                values[sec][key] = parse_datum(values[sec][key])

    if cmd in (Command.ASYMPTOTIC, Command.BACKWARD, Command.SWEEP) and values["data"]["A"] is None:
        errors.append(f"{cmd.value} needs asymptotic data: set 'A' (or 'data') in [data]")
    if values["grid"]["q_min"] >= values["grid"]["q_max"]:
        errors.append(f"line {seen.get(('grid', 'q_max'), 0)}: [grid] needs q_min < q_max")
    if errors:
        raise ConfigError(errors)
    return RunConfig(cmd, values["data"], values["grid"], values["solver"], values["output"])
