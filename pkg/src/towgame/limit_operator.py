"""The limit operator ``G`` of the parabolic equation, its envelopes, and
consistency probes against the discrete game.

    G(M, v, s, x, t) = K(I(v)) s - 1/2 <M J(v), J(v)>      v != 0
    G(M, 0, s, x, t) = K(I_hat(s)) s                       v == 0

with ``K(I) = -(1-c)/c I + (c+1)/2``. At ``v = 0`` the operator jumps; the
upper and lower semicontinuous envelopes there are the max/min over the set
of ``K(r) s - 1/2 <M z, z>``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dpp_core import ValueField
from .movement_sets import (
    FamilySpec,
    extremal_data,
    hat_time,
    k_coefficient,
    refine_extremum,
    sample_set,
)

SYM_TOL = 1e-12


@dataclass(frozen=True)
class OperatorArgs:
    M: np.ndarray
    v: np.ndarray
    s: float
    x: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        M = np.atleast_2d(np.asarray(self.M, dtype=float))
        v = np.atleast_1d(np.asarray(self.v, dtype=float))
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        if M.shape != (v.size, v.size):
            raise ValueError("M must be N x N with N = len(v)")
        if np.abs(M - M.T).max() > SYM_TOL:
            raise ValueError("M must be symmetric")
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "s", float(self.s))
        object.__setattr__(self, "t", float(self.t))

    @classmethod
    def make(cls, M, v, s, x=None, t: float = 0.0) -> "OperatorArgs":
        v = np.atleast_1d(np.asarray(v, dtype=float))
        return cls(M, v, s, np.zeros(v.size) if x is None else x, t)


@dataclass(frozen=True)
class QuadraticProbe:
    """``phi = 1/2 <M d, d> + <g, d> + a (t - t0) + q/2 (t - t0)^2 + b`` with ``d = x - x0``.

    ``q`` is an optional curvature in time; it is zero for the standard probes.
    """

    M: np.ndarray
    g: np.ndarray
    a: float
    b: float
    x0: np.ndarray
    t0: float
    q: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "M", np.atleast_2d(np.asarray(self.M, dtype=float)))
        object.__setattr__(self, "g", np.atleast_1d(np.asarray(self.g, dtype=float)))
        object.__setattr__(self, "x0", np.atleast_1d(np.asarray(self.x0, dtype=float)))

    def __call__(self, X, T) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        d = X - self.x0
        dt = np.asarray(T, dtype=float) - self.t0
        return 0.5 * np.einsum("...i,ij,...j->...", d, self.M, d) + d @ self.g + self.a * dt + 0.5 * self.q * dt**2 + self.b

    def gradient(self, x) -> np.ndarray:
        return self.M @ (np.asarray(x, dtype=float) - self.x0) + self.g

    def time_derivative(self, t: float) -> float:
        return self.a + self.q * (t - self.t0)

    def args_at(self, x, t: float) -> OperatorArgs:
        return OperatorArgs(self.M, self.gradient(x), self.time_derivative(t), x, t)


# -- operator ---------------------------------------------------------------


def g_eval(family: FamilySpec, args: OperatorArgs, resolution: int = 16) -> float:
    c = family.c
    if np.any(args.v):
        ex = extremal_data(family, args.x, args.t, args.v, resolution)
        return float(ex.K * args.s - 0.5 * ex.J @ args.M @ ex.J)
    r = hat_time(family, args.x, args.t, args.s, resolution)
    return float(k_coefficient(r, c) * args.s)


def _envelope_values(family: FamilySpec, args: OperatorArgs, resolution: int) -> np.ndarray:
    pts = sample_set(family, args.x, args.t, resolution).points
    z, r = pts[:, :-1], pts[:, -1]
    return k_coefficient(r, family.c) * args.s - 0.5 * np.einsum("pi,ij,pj->p", z, args.M, z)


def g_upper(family: FamilySpec, args: OperatorArgs, resolution: int = 16) -> float:
    """Upper semicontinuous envelope ``G^*``: equals ``G`` off ``v = 0``."""
    if np.any(args.v):
        return g_eval(family, args, resolution)
    return float(_envelope_values(family, args, resolution).max())


def g_lower(family: FamilySpec, args: OperatorArgs, resolution: int = 16) -> float:
    """Lower semicontinuous envelope ``G_*``: equals ``G`` off ``v = 0``."""
    if np.any(args.v):
        return g_eval(family, args, resolution)
    return float(_envelope_values(family, args, resolution).min())


def ball_closed_form(family: FamilySpec, args: OperatorArgs) -> float:
    """``((c+1)/2) s - rho^2/(2|v|^2) <M v, v>`` for the ball family, ``v != 0``."""
    v = args.v
    return float((family.c + 1) / 2 * args.s - family.rho**2 / (2 * (v @ v)) * (v @ args.M @ v))


# -- consistency ------------------------------------------------------------


@dataclass(frozen=True)
class ConsistencyResult:
    dpp_side: float
    operator_side: float
    gap: float
    bracket: Optional[tuple] = None  # (-eps^2 G^*, -eps^2 G_*) for v = 0
    tol: float = 0.0

    @property
    def in_bracket(self) -> Optional[bool]:
        if self.bracket is None:
            return None
        lo, hi = self.bracket
        return lo - self.tol <= self.dpp_side <= hi + self.tol


def consistency_residual(
    family: FamilySpec,
    probe: QuadraticProbe,
    x,
    t: float,
    eps: float,
    resolution: int = 16,
    refine: bool = True,
) -> ConsistencyResult:
    """Compare the one-step DPP average of ``phi`` with ``-eps^2 G``.

    ``dpp_side`` is ``(sup + inf)/2 - phi(x, t)`` over the scaled set. The
    sampled max/min are polished by :func:`refine_extremum` on the continuum
    set when ``refine`` is set, so the sampling error does not mask the
    ``O(eps^4)`` agreement. For a vanishing gradient the result carries the
    envelope bracket instead of a sharp gap.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    c = family.c
    base = float(probe(x[None, :], t)[0])

    def objective(P):
        P = np.atleast_2d(P)
        dy, dtau = eps * P[:, :-1], eps * eps * ((1 - c) / c * P[:, -1] - (c + 1) / 2)
        return probe(x + dy, t + dtau)

    pts = sample_set(family, x, t, resolution).points
    vals = objective(pts)
    hi, lo = float(vals.max()), float(vals.min())
    if refine:
        hi = refine_extremum(family, objective, pts[int(np.argmax(vals))], resolution, sense=1)[0]
        lo = refine_extremum(family, objective, pts[int(np.argmin(vals))], resolution, sense=-1)[0]
    dpp_side = 0.5 * hi + 0.5 * lo - base
    args = probe.args_at(x, t)
    G = g_eval(family, args, max(resolution, 16))
    operator_side = -eps * eps * G
    bracket = None
    if not np.any(args.v):
        bracket = (-eps * eps * g_upper(family, args, resolution), -eps * eps * g_lower(family, args, resolution))
    return ConsistencyResult(dpp_side, operator_side, abs(dpp_side - operator_side), bracket,
                             eps * eps * 2.0 / resolution)


def standard_probes(dim: int = 2, count: int = 8, seed: int = 0) -> list:
    """Fixed suite of quadratic probes with non-vanishing gradient at ``x0``."""
    rng = np.random.default_rng(seed)
    probes = []
    for _ in range(count):
        A = rng.normal(size=(dim, dim))
        g = rng.normal(size=dim)
        g /= np.linalg.norm(g)
        probes.append(QuadraticProbe(0.5 * (A + A.T), g, float(rng.normal()), 0.0, np.zeros(dim), 0.5))
    return probes


# -- viscosity falsification probe -------------------------------------------


@dataclass(frozen=True)
class ViscosityVerdict:
    kind: str  # "min" or "max"
    point: tuple  # ((x...), t)
    margin: float  # signed; >= -tol means the inequality holds
    holds: Optional[bool]  # None when inconclusive
    conclusive: bool
    reason: str = ""


def viscosity_probe(
    field: ValueField,
    probe: QuadraticProbe,
    window: float = 0.2,
    time_window: Optional[float] = None,
    kind: Optional[str] = None,
    tol: float = 1e-6,
    resolution: int = 16,
) -> ViscosityVerdict:
    """Locate the grid extremum of ``u - phi`` near the probe centre and test
    the viscosity inequality there.

    At a minimum the supersolution test ``G^* >= -tol`` applies, at a maximum
    the subsolution test ``G_* <= tol``. With ``kind=None`` a strict
    extremum inside the window is preferred, then the larger contrast. Extrema on the window
    boundary, or a flat ``u - phi``, are inconclusive.
    """
    lat = field.lattice
    time_window = window if time_window is None else time_window
    sd = lat.sd
    spatial = (np.linalg.norm(lat.coords - probe.x0, axis=-1) <= window) & (sd < 0)
    ks = np.flatnonzero((np.abs(field.times - probe.t0) <= time_window) & (field.times > 0))
    if not spatial.any() or ks.size == 0:
        raise ValueError("probe window contains no interior nodes")
    X = lat.coords[spatial]
    vals = np.stack([field.values[k][spatial] for k in ks])  # (K, M)
    phi = np.stack([probe(X, field.times[k]) for k in ks])
    diff = vals - phi
    if np.ptp(diff) <= 1e-12 * max(1.0, np.abs(diff).max()):
        return ViscosityVerdict(kind or "min", (tuple(probe.x0.tolist()), probe.t0), 0.0, None, False,
                                "u - phi is flat in the window")
    def locate(which):
        flat = int(np.argmin(diff) if which == "min" else np.argmax(diff))
        ki, mi = np.unravel_index(flat, diff.shape)
        k = int(ks[ki])
        on_edge = (
            np.linalg.norm(X[mi] - probe.x0) > window - 1.5 * lat.h
            or k in (ks.min(), ks.max()) and not (k == len(field.times) - 1 and ks.max() == k)
        )
        # strictness: the extremum must be unique within round-off
        val = diff[ki, mi]
        ties = int(np.sum(np.abs(diff - val) <= 1e-12 * max(1.0, abs(val))))
        return k, mi, on_edge, ties

    if kind is None:
        # prefer a strict extremum inside the window, then the larger contrast
        mean = diff.mean()
        found = {w: locate(w) for w in ("min", "max")}
        inside = [w for w in ("min", "max") if not found[w][2] and found[w][3] == 1]
        if len(inside) == 1:
            kind = inside[0]
        else:
            kind = "min" if mean - diff.min() >= diff.max() - mean else "max"
    k, mi, on_edge, ties = locate(kind)
    x = X[mi]
    t = float(field.times[k])
    point = (tuple(float(v) for v in x), t)
    if on_edge or ties > 1:
        return ViscosityVerdict(kind, point, math.nan, None, False,
                                "extremum on the window boundary" if on_edge else "extremum not strict")
    args = probe.args_at(x, t)
    fam = field.family
    if kind == "min":
        margin = g_upper(fam, args, resolution)
        return ViscosityVerdict(kind, point, margin, margin >= -tol, True)
    margin = g_lower(fam, args, resolution)
    return ViscosityVerdict(kind, point, -margin, margin <= tol, True)
