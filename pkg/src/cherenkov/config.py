"""Run configuration: TOML file plus ``key.path=value`` overrides, validated.

Every validation failure raises ConfigError naming the offending key path
(e.g. ``stack[1].beta``).
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .errors import ConfigError
from .media import MovingSlab, RestFrameMaterial

DEFAULT_TOLERANCES = {
    "hermiticity": 1e-12,
    "quartet": 1e-8,
    "completeness": 1e-8,
    "commutator_kernel": 1e-8,
    "gram": 1e-8,
    "null_product": 1e-8,
    "coupling_ratio": 1e-6,
    "velocity_identity": 1e-6,
    "definiteness_flip": 1e-12,
    "commutators": 1e-12,
    "norm": 1e-9,
    "analytic": 1e-8,
}


@dataclass(frozen=True)
class ModeConfig:
    kx: float = 1.0
    ky: float = 0.0
    polarization: str = "TE"
    branch: int = 0
    kx_min: float = 0.1
    kx_max: float = 5.0
    n_points: int = 50


@dataclass(frozen=True)
class PairConfig:
    gap: float | None = None  # vacuum separation; default: taken from the stack
    gamma0_d: float | None = None  # alternative: separation in units of 1/gamma0
    kx: float | None = None  # force a crossing instead of searching
    lambda_t_max: float = 3.0
    n_t: int = 101
    hybrid: str = "f"


@dataclass(frozen=True)
class QuantumConfig:
    omega_prime: float = 1.0
    lam: float | str = 0.1  # a number or "from-spectrum"
    n_max: int = 256
    t_max: float = 1.0
    n_t: int = 101
    n_coefficients: int = 9
    guard: bool = True


@dataclass(frozen=True)
class RunConfig:
    stack: tuple[MovingSlab, ...] = ()
    L_z: float = 8.0
    N_z: int = 32
    mode: ModeConfig = field(default_factory=ModeConfig)
    pair: PairConfig = field(default_factory=PairConfig)
    quantum: QuantumConfig = field(default_factory=QuantumConfig)
    tolerances: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    out_dir: str = "."
    formats: tuple[str, ...] = ("csv", "json")


# -- overrides ----------------------------------------------------------------------


def _parse_value(text: str) -> Any:
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def _split_path(path: str) -> list[str | int]:
    parts: list[str | int] = []
    for token in path.split("."):
        name, _, rest = token.partition("[")
        if not name:
            raise ConfigError(f"malformed override key {path!r}")
        parts.append(name)
        while rest:
            idx, _, rest = rest.partition("]")
            if not idx.isdigit():
                raise ConfigError(f"malformed index in override key {path!r}")
            parts.append(int(idx))
            rest = rest.lstrip("[")
    return parts


def apply_override(raw: dict, assignment: str) -> None:
    """Set ``a.b[0].c=value`` in place; the value is read as a TOML literal when possible."""
    key, sep, value = assignment.partition("=")
    if not sep:
        raise ConfigError(f"override {assignment!r} is not key=value")
    parts = _split_path(key.strip())
    node: Any = raw
    for here, nxt in zip(parts[:-1], parts[1:]):
        if isinstance(here, int):
            if not isinstance(node, list) or here >= len(node):
                raise ConfigError(f"{key}: index {here} out of range")
            node = node[here]
        else:
            if not isinstance(node, dict):
                raise ConfigError(f"{key}: {here!r} is not a table")
            if here not in node:
                node[here] = [] if isinstance(nxt, int) else {}
            node = node[here]
    last = parts[-1]
    if isinstance(last, int):
        if not isinstance(node, list) or last >= len(node):
            raise ConfigError(f"{key}: index {last} out of range")
        node[last] = _parse_value(value.strip())
    else:
        if not isinstance(node, dict):
            raise ConfigError(f"{key}: {last!r} is not a table")
        node[last] = _parse_value(value.strip())


# -- validation --------------------------------------------------------------------------


class _Section:
    """Typed reads from one table; unknown keys are rejected."""

    def __init__(self, data: Any, path: str):
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a table")
        self.data, self.path, self.used = data, path, set()

    def get(self, key: str, kind, default=None, *, check=None, why: str = ""):
        self.used.add(key)
        where = f"{self.path}.{key}" if self.path else key
        if key not in self.data:
            return default
        v = self.data[key]
        if kind is float:
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ConfigError(f"{where}: expected a finite number, got {v!r}")
            v = float(v)
        elif kind is int:
            if isinstance(v, bool) or not isinstance(v, int):
                raise ConfigError(f"{where}: expected an integer, got {v!r}")
        elif kind is bool:
            if not isinstance(v, bool):
                raise ConfigError(f"{where}: expected true/false, got {v!r}")
        elif kind is str:
            if not isinstance(v, str):
                raise ConfigError(f"{where}: expected a string, got {v!r}")
        if check is not None and not check(v):
            raise ConfigError(f"{where}: {why or 'invalid value'} (got {v!r})")
        return v

    def finish(self):
        extra = sorted(set(self.data) - self.used)
        if extra:
            where = f"{self.path}.{extra[0]}" if self.path else extra[0]
            raise ConfigError(f"{where}: unknown key")


def _slab(data: Any, path: str) -> MovingSlab:
    s = _Section(data, path)
    eps = s.get("epsilon", float, None, check=lambda v: v > 0, why="must be positive")
    mu = s.get("mu", float, 1.0, check=lambda v: v > 0, why="must be positive")
    beta = s.get("beta", float, 0.0, check=lambda v: abs(v) < 1, why="|beta| must be < 1")
    z0 = s.get("z0", float)
    z1 = s.get("z1", float)
    s.finish()
    for k, v in (("epsilon", eps), ("z0", z0), ("z1", z1)):
        if v is None:
            raise ConfigError(f"{path}.{k}: required")
    if not z1 > z0:
        raise ConfigError(f"{path}.z1: must exceed z0 = {z0}")
    if eps * mu < 1:
        raise ConfigError(f"{path}.epsilon: epsilon*mu must be >= 1")
    return MovingSlab(RestFrameMaterial(eps, mu), beta, z0, z1)


def validate(raw: dict) -> RunConfig:
    top = _Section(raw, "")
    top.used.update({"stack", "domain", "mode", "pair", "quantum", "tolerances", "output"})
    top.finish()

    stack_raw = raw.get("stack", [])
    if not isinstance(stack_raw, list):
        raise ConfigError("stack: expected an array of tables")
    stack = tuple(_slab(s, f"stack[{i}]") for i, s in enumerate(stack_raw))
    order = sorted(range(len(stack)), key=lambda i: stack[i].z0)
    for i, j in zip(order, order[1:]):
        if stack[j].z0 < stack[i].z1:
            raise ConfigError(f"stack[{j}].z0: slab overlaps stack[{i}]")

    d = _Section(raw.get("domain", {}), "domain")
    L_z = d.get("L_z", float, 8.0, check=lambda v: v > 0, why="must be positive")
    N_z = d.get("N_z", int, 32, check=lambda v: v >= 8, why="must be at least 8")
    d.finish()
    for i, s in enumerate(stack):
        if s.z0 < 0 or s.z1 > L_z:
            raise ConfigError(f"stack[{i}]: slab must lie inside the periodic cell [0, {L_z}]")

    m = _Section(raw.get("mode", {}), "mode")
    mode = ModeConfig(
        kx=m.get("kx", float, 1.0),
        ky=m.get("ky", float, 0.0),
        polarization=m.get("polarization", str, "TE", check=lambda v: v in ("TE", "TM"), why="TE or TM"),
        branch=m.get("branch", int, 0, check=lambda v: v >= 0, why="must be >= 0"),
        kx_min=m.get("kx_min", float, 0.1, check=lambda v: v > 0, why="must be positive"),
        kx_max=m.get("kx_max", float, 5.0, check=lambda v: v > 0, why="must be positive"),
        n_points=m.get("n_points", int, 50, check=lambda v: v >= 1, why="must be >= 1"),
    )
    m.finish()
    if mode.kx_max < mode.kx_min:
        raise ConfigError("mode.kx_max: must be >= kx_min")

    p = _Section(raw.get("pair", {}), "pair")
    pos = dict(check=lambda v: v > 0, why="must be positive")
    pair = PairConfig(
        gap=p.get("gap", float, None, **pos),
        gamma0_d=p.get("gamma0_d", float, None, **pos),
        kx=p.get("kx", float, None, **pos),
        lambda_t_max=p.get("lambda_t_max", float, 3.0, **pos),
        n_t=p.get("n_t", int, 101, check=lambda v: v >= 2, why="must be >= 2"),
        hybrid=p.get("hybrid", str, "f", check=lambda v: v in ("f", "e"), why='"f" or "e"'),
    )
    p.finish()
    if pair.gap is not None and pair.gamma0_d is not None:
        raise ConfigError("pair.gamma0_d: give either gap or gamma0_d, not both")

    q = _Section(raw.get("quantum", {}), "quantum")
    lam_raw = q.data.get("lambda", 0.1)
    if isinstance(lam_raw, str):
        lam = q.get("lambda", str, check=lambda v: v == "from-spectrum", why='a number or "from-spectrum"')
    else:
        lam = q.get("lambda", float, 0.1, **pos)
    quantum = QuantumConfig(
        omega_prime=q.get("omega_prime", float, 1.0),
        lam=lam,
        n_max=q.get("n_max", int, 256, check=lambda v: v >= 4, why="must be >= 4"),
        t_max=q.get("t_max", float, 1.0, **pos),
        n_t=q.get("n_t", int, 101, check=lambda v: v >= 2, why="must be >= 2"),
        n_coefficients=q.get("n_coefficients", int, 9, check=lambda v: v >= 0, why="must be >= 0"),
        guard=q.get("guard", bool, True),
    )
    q.finish()

    t = _Section(raw.get("tolerances", {}), "tolerances")
    tol = dict(DEFAULT_TOLERANCES)
    for k in DEFAULT_TOLERANCES:
        tol[k] = t.get(k, float, tol[k], check=lambda v: v >= 0, why="must be >= 0")
    t.finish()

    o = _Section(raw.get("output", {}), "output")
    out_dir = o.get("directory", str, ".")
    formats = o.data.get("formats", ["csv", "json"])
    o.used.add("formats")
    if not isinstance(formats, list) or not set(formats) <= {"csv", "json"}:
        raise ConfigError('output.formats: expected a subset of ["csv", "json"]')
    o.finish()

    return RunConfig(stack, L_z, N_z, mode, pair, quantum, tol, out_dir, tuple(formats))


def load_config(path: str | Path | None, overrides: list[str] = ()) -> RunConfig:
    raw: dict = {}
    if path is not None:
        try:
            raw = tomllib.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"{path}: {e}") from None
    for o in overrides:
        apply_override(raw, o)
    return validate(raw)
