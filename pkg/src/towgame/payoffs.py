"""Time-independent payoff functions ``f(x)`` read on the boundary strip."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.stats import qmc

from .payoff_expr import parse_payoff


@dataclass(frozen=True)
class PayoffField:
    """A payoff evaluated on arrays of points (coordinates in the last axis)."""

    func: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    label: str
    dim: int
    lipschitz: Optional[float] = None

    def __call__(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        out = np.asarray(self.func(X), dtype=float)
        return np.broadcast_to(out, X.shape[:-1]).copy()

    def shifted(self, k: float) -> "PayoffField":
        base = self.func
        return replace(self, func=lambda X: base(X) + k, label=f"({self.label}) + {k!r}")

    def with_lipschitz(self, lo, hi, n: int = 10_000, seed: int = 0) -> "PayoffField":
        return replace(self, lipschitz=estimate_lipschitz(self, lo, hi, n, seed))


def estimate_lipschitz(payoff: PayoffField, lo, hi, n: int = 10_000, seed: int = 0, h: float = 1e-6) -> float:
    """Largest central-difference gradient norm over ``n`` Sobol points in a box."""
    lo, hi = np.atleast_1d(lo).astype(float), np.atleast_1d(hi).astype(float)
    dim = lo.size
    m = int(np.ceil(np.log2(max(n, 2))))
    pts = qmc.Sobol(d=dim, scramble=True, seed=seed).random_base2(m)[:n]
    X = qmc.scale(pts, lo, hi)
    grad = np.empty_like(X)
    for d in range(dim):
        e = np.zeros(dim)
        e[d] = h
        grad[:, d] = (payoff(X + e) - payoff(X - e)) / (2 * h)
    return float(np.linalg.norm(grad, axis=1).max())


def from_expression(src: str, dim: int) -> PayoffField:
    expr = parse_payoff(src, dim)
    return PayoffField(expr, src, dim)


def constant(value: float, dim: int) -> PayoffField:
    value = float(value)
    return PayoffField(lambda X: np.full(X.shape[:-1], value), f"constant({value!r})", dim, 0.0)


def linear(v, b: float = 0.0) -> PayoffField:
    v = np.atleast_1d(np.asarray(v, dtype=float))
    b = float(b)
    return PayoffField(lambda X: X @ v + b, f"linear({v.tolist()}, {b!r})", v.size, float(np.linalg.norm(v)))


def norm(dim: int, center=None) -> PayoffField:
    center = np.zeros(dim) if center is None else np.asarray(center, dtype=float)
    return PayoffField(lambda X: np.linalg.norm(X - center, axis=-1), f"norm({center.tolist()})", dim, 1.0)


def norm_squared(dim: int, center=None) -> PayoffField:
    center = np.zeros(dim) if center is None else np.asarray(center, dtype=float)
    return PayoffField(lambda X: ((X - center) ** 2).sum(axis=-1), f"norm_squared({center.tolist()})", dim)


def pointwise_min(f: PayoffField, g: PayoffField) -> PayoffField:
    return PayoffField(lambda X: np.minimum(f(X), g(X)), f"min({f.label}, {g.label})", f.dim)


CATALOG = {
    "constant": constant,
    "linear": linear,
    "norm": norm,
    "norm_squared": norm_squared,
}


def named(name: str, dim: int, **params) -> PayoffField:
    """Look up a catalog payoff; ``linear`` takes ``v`` and ``b``."""
    if name not in CATALOG:
        raise KeyError(f"unknown payoff {name!r}; known: {sorted(CATALOG)}")
    if name == "linear":
        v = params.get("v", [1.0] + [0.0] * (dim - 1))
        if len(v) != dim:
            raise ValueError("linear payoff direction has the wrong dimension")
        return linear(v, params.get("b", 0.0))
    if name == "constant":
        return constant(params.get("value", 0.0), dim)
    return CATALOG[name](dim, params.get("center"))
