"""Experiment manifests (TOML, or JSON as an alternative).

Numeric fields may be given as decimal strings; they are parsed once to
binary floats. The manifest hash is taken over the canonical JSON form of
the raw document, so it is stable across platforms and key order.

Example::

    eps = ["0.2", "0.1"]
    seed = 7
    out = "runs/disk"

    [domain]
    shape = "disk"
    center = ["0", "0"]
    radius = "1"
    T = "1"
    eta = "0.2"

    [family]
    kind = "ball"
    rho = "0.5"
    c = "0.5"

    [payoff]
    expr = "abs(x1) + 0.5*x2"

    [grid]
    h_factor = "0.5"
    dt_factor = "1"
    resolution = 4
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Optional

import numpy as np
import tomli

from . import payoffs as payoff_catalog
from .dpp_core import DomainSpec, GridError, GridSpec, _validate
from .movement_sets import FamilySpec, lattice_ball, load_tabulated_csv
from .payoff_expr import PayoffEvalError, PayoffSyntaxError
from .payoffs import PayoffField


class ManifestError(ValueError):
    """The manifest is malformed or violates a module precondition."""


def _num(value, key: str) -> float:
    if isinstance(value, bool):
        raise ManifestError(f"{key}: expected a number, got a boolean")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(Decimal(value.strip()))
        except InvalidOperation:
            raise ManifestError(f"{key}: {value!r} is not a decimal number") from None
    raise ManifestError(f"{key}: expected a number, got {type(value).__name__}")


def _vec(value, key: str) -> list:
    if not isinstance(value, (list, tuple)):
        raise ManifestError(f"{key}: expected a list")
    return [_num(v, f"{key}[{i}]") for i, v in enumerate(value)]


def _int(value, key: str) -> int:
    v = _num(value, key)
    if v != int(v):
        raise ManifestError(f"{key}: expected an integer")
    return int(v)


@dataclass
class Manifest:
    raw: dict
    source: Optional[Path]
    domain: DomainSpec
    family: FamilySpec
    payoff: PayoffField
    eps: list
    h_factor: float
    dt_factor: float
    resolution: int
    lattice_aligned: bool
    seed: int
    out: Path
    sections: dict = field(default_factory=dict)

    @property
    def hash(self) -> str:
        return manifest_hash(self.raw)

    def grid(self, eps: float) -> GridSpec:
        return GridSpec(self.h_factor * eps, self.dt_factor * self.family.c * eps * eps, self.lattice_aligned)

    def section(self, name: str) -> dict:
        return self.sections.get(name, {})


def manifest_hash(raw: dict) -> str:
    body = json.dumps(raw, sort_keys=True, separators=(",", ":"), ensure_ascii=True)
    return hashlib.sha256(body.encode()).hexdigest()


def _domain(d: dict) -> DomainSpec:
    shape = d.get("shape")
    T, eta = _num(d.get("T", 1), "domain.T"), _num(d.get("eta", 0.2), "domain.eta")
    try:
        if shape == "interval":
            return DomainSpec.interval(_num(d["a"], "domain.a"), _num(d["b"], "domain.b"), T, eta)
        if shape == "disk":
            return DomainSpec.disk(_vec(d.get("center", [0, 0]), "domain.center"),
                                   _num(d.get("radius", 1), "domain.radius"), T, eta)
    except KeyError as exc:
        raise ManifestError(f"domain: missing field {exc}") from None
    except ValueError as exc:
        raise ManifestError(f"domain: {exc}") from None
    raise ManifestError(f"domain.shape must be 'interval' or 'disk', got {shape!r}")


def _family(d: dict, dim: int, base: Path) -> FamilySpec:
    kind = d.get("kind")
    c = _num(d.get("c", 0.5), "family.c")
    try:
        if kind in ("ball", "paraboloid"):
            rho = _num(d.get("rho", 0.5), "family.rho")
            return getattr(FamilySpec, kind)(rho, c, dim)
        if kind == "lattice_ball":
            return lattice_ball(_num(d.get("rho", 1.0), "family.rho"), c, dim, _int(d.get("m", 2), "family.m"),
                                _vec(d.get("s_values", [0]), "family.s_values"))
        if kind == "tabulated":
            if "csv" in d:
                fam = load_tabulated_csv(base / d["csv"], c)
            else:
                fam = FamilySpec.tabulated([_vec(p, "family.points") for p in d["points"]], c, dim)
            if fam.dim != dim:
                raise ManifestError("family dimension does not match the domain")
            return fam
    except (KeyError, ValueError) as exc:
        if isinstance(exc, ManifestError):
            raise
        raise ManifestError(f"family: {exc}") from None
    raise ManifestError(f"family.kind must be ball, paraboloid, lattice_ball or tabulated, got {kind!r}")


def _payoff(d: dict, dim: int) -> PayoffField:
    try:
        if "expr" in d:
            return payoff_catalog.from_expression(d["expr"], dim)
        if "name" in d:
            params = {}
            if "v" in d:
                params["v"] = _vec(d["v"], "payoff.v")
            if "b" in d:
                params["b"] = _num(d["b"], "payoff.b")
            if "value" in d:
                params["value"] = _num(d["value"], "payoff.value")
            if "center" in d:
                params["center"] = _vec(d["center"], "payoff.center")
            return payoff_catalog.named(d["name"], dim, **params)
    except PayoffSyntaxError as exc:
        raise ManifestError(f"payoff: {exc}") from None
    except (KeyError, ValueError) as exc:
        raise ManifestError(f"payoff: {exc}") from None
    raise ManifestError("payoff needs 'expr' or 'name'")


def load_manifest(path, seed: Optional[int] = None, out: Optional[str] = None) -> Manifest:
    """Parse and validate a manifest; every check runs before any compute."""
    path = Path(path)
    try:
        text = path.read_bytes()
    except OSError as exc:
        raise ManifestError(f"cannot read manifest: {exc}") from None
    try:
        raw = json.loads(text) if path.suffix == ".json" else tomli.loads(text.decode())
    except (tomli.TOMLDecodeError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ManifestError(f"cannot parse manifest: {exc}") from None
    return build_manifest(raw, path, seed, out)


def build_manifest(raw: dict, path: Optional[Path] = None, seed: Optional[int] = None,
                   out: Optional[str] = None) -> Manifest:
    for key in ("domain", "family", "payoff", "eps"):
        if key not in raw:
            raise ManifestError(f"missing required entry {key!r}")
    base = path.parent if path is not None else Path(".")
    domain = _domain(raw["domain"])
    family = _family(raw["family"], domain.dim, base)
    payoff = _payoff(raw["payoff"], domain.dim)
    eps = _vec(raw["eps"], "eps")
    if not eps:
        raise ManifestError("eps list is empty")
    g = raw.get("grid", {})
    h_factor = _num(g.get("h_factor", 0.5), "grid.h_factor")
    dt_factor = _num(g.get("dt_factor", 1.0), "grid.dt_factor")
    resolution = _int(g.get("resolution", 4), "grid.resolution")
    aligned = bool(g.get("lattice_aligned", False))
    if resolution < 2:
        raise ManifestError("grid.resolution must be >= 2")
    if seed is None:
        seed = _int(raw.get("seed", 0), "seed")
    if seed < 0 or seed >= 2**64:
        raise ManifestError("seed must be an unsigned 64-bit integer")
    m = Manifest(
        raw, path, domain, family, payoff, eps, h_factor, dt_factor, resolution, aligned, int(seed),
        Path(out if out is not None else raw.get("out", "towgame_out")),
        {k: v for k, v in raw.items() if isinstance(v, dict)},
    )
    for e in eps:
        try:
            _validate(domain, family, e, m.grid(e))
        except GridError as exc:
            raise ManifestError(f"eps={e}: {exc}") from None
    # the payoff must evaluate on the strip
    pts = np.asarray(domain.center) + (domain.radius + max(eps)) * np.linspace(-1, 1, 11)[:, None] * np.eye(domain.dim)[0]
    try:
        payoff(pts)
    except PayoffEvalError as exc:
        raise ManifestError(f"payoff: {exc}") from None
    return m
