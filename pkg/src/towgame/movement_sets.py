"""Movement-set families for space/time dependent Tug-of-War games.

A family assigns to every state ``(x, t)`` a compact set of unscaled moves
``(y, s)`` with ``|y| <= 1`` and ``|s| <= c/2``. Points are stored as rows
``[y_1, ..., y_N, s]``.

Three kinds are supported:

* ``ball``       -- ``{|y|^2 + s^2 <= rho^2}`` intersected with the box
* ``paraboloid`` -- ``{|y|^2 <= 2 rho s / c, 0 <= s <= c/2}``
* ``tabulated``  -- an explicit point cloud, possibly depending on ``(x, t)``

The paraboloid is implemented exactly as its defining inequality reads. Its
spatial radius at ``s = c/2`` is ``sqrt(rho)``, so ``|J| = sqrt(rho)``; some
references quote ``|J| = rho`` for this family, which only agrees for
``rho -> 1``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.spatial import ConvexHull, cKDTree
from scipy.spatial.distance import directed_hausdorff

BOX_TOL = 1e-12
TIE_TOL = 1e-12

PointGenerator = Callable[[np.ndarray, float], np.ndarray]


class AxiomViolation(ValueError):
    """Raised when a set breaks an axiom an operation depends on."""


@dataclass(frozen=True)
class FamilySpec:
    """Parametric description of a movement-set family.

    Use the :meth:`ball`, :meth:`paraboloid` and :meth:`tabulated`
    constructors rather than filling the fields directly.
    """

    kind: str
    c: float
    dim: int
    rho: float = 0.0
    points: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    generator: Optional[PointGenerator] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in ("ball", "paraboloid", "tabulated"):
            raise ValueError(f"unknown family kind {self.kind!r}")
        if not 0.0 < self.c < 1.0:
            raise ValueError(f"c must lie in (0, 1), got {self.c}")
        if self.dim < 1:
            raise ValueError(f"dimension must be >= 1, got {self.dim}")
        if self.kind in ("ball", "paraboloid") and not 0.0 < self.rho < 1.0:
            raise ValueError(f"rho must lie in (0, 1), got {self.rho}")
        if self.kind == "tabulated" and (self.points is None) == (self.generator is None):
            raise ValueError("tabulated family needs exactly one of points / generator")

    @classmethod
    def ball(cls, rho: float, c: float, dim: int = 2) -> "FamilySpec":
        return cls("ball", float(c), int(dim), rho=float(rho))

    @classmethod
    def paraboloid(cls, rho: float, c: float, dim: int = 2) -> "FamilySpec":
        return cls("paraboloid", float(c), int(dim), rho=float(rho))

    @classmethod
    def tabulated(cls, source, c: float, dim: int) -> "FamilySpec":
        """Family given by a fixed point cloud or by a callable ``(x, t) -> cloud``."""
        if callable(source):
            return cls("tabulated", float(c), int(dim), generator=source)
        pts = np.array(source, dtype=float).reshape(-1, int(dim) + 1)
        pts.setflags(write=False)
        return cls("tabulated", float(c), int(dim), points=pts)

    @property
    def homogeneous(self) -> bool:
        """True when the set does not depend on ``(x, t)``."""
        return self.generator is None

    @property
    def time_radius(self) -> float:
        """Largest ``|s|`` reached by the ball family (the box truncates at c/2)."""
        return min(self.rho, self.c / 2)

    @property
    def in_reference_range(self) -> bool:
        """Whether the parameters lie in the range used for the textbook examples.

        For the ball this is ``rho < min(1, c/2)``; beyond it the box clips the
        time extent and ``hat_time`` saturates at ``c/2``.
        """
        if self.kind == "ball":
            return self.rho < min(1.0, self.c / 2)
        return True

    def describe(self) -> dict:
        out = {"kind": self.kind, "c": self.c, "dim": self.dim}
        if self.kind != "tabulated":
            out["rho"] = self.rho
        elif self.points is not None:
            out["n_points"] = int(self.points.shape[0])
        return out

    def contains(self, y, s: float, tol: float = 1e-9) -> bool:
        """Analytic membership test for ``(y, s)`` in the unscaled set."""
        y = np.atleast_1d(np.asarray(y, dtype=float))
        r2 = float(y @ y)
        in_box = r2 <= 1.0 + tol and abs(s) <= self.c / 2 + tol
        if self.kind == "ball":
            return in_box and r2 + s * s <= self.rho**2 + tol
        if self.kind == "paraboloid":
            return in_box and -tol <= s and r2 <= 2 * self.rho * s / self.c + tol
        raise TypeError("contains() is only analytic for closed-form families")


@dataclass(frozen=True)
class SampledSet:
    """Finite point cloud standing in for the set at one state."""

    points: np.ndarray
    resolution: int
    anchor: tuple

    @property
    def y(self) -> np.ndarray:
        return self.points[:, :-1]

    @property
    def s(self) -> np.ndarray:
        return self.points[:, -1]

    def __len__(self):
        return self.points.shape[0]


@dataclass(frozen=True)
class ExtremalData:
    J: np.ndarray
    I: float
    K: float
    tied: bool = False


@dataclass
class AxiomEntry:
    axiom: str
    probe: int
    passed: bool
    message: str = ""
    witness: Optional[tuple] = None
    warning: bool = False


@dataclass
class AxiomReport:
    tolerance: float
    entries: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    @property
    def failures(self) -> list:
        return [e for e in self.entries if not e.passed]

    @property
    def warnings(self) -> list:
        return [e for e in self.entries if e.warning]

    def by_axiom(self) -> dict:
        out: dict = {}
        for e in self.entries:
            out[e.axiom] = out.get(e.axiom, True) and e.passed
        return out

    def to_dict(self) -> dict:
        return {
            "tolerance": self.tolerance,
            "passed": self.passed,
            "axioms": self.by_axiom(),
            "entries": [
                {
                    "axiom": e.axiom,
                    "probe": e.probe,
                    "passed": e.passed,
                    "warning": e.warning,
                    "message": e.message,
                    "witness": None if e.witness is None else [float(w) for w in e.witness],
                }
                for e in self.entries
            ],
        }


# -- sampling ---------------------------------------------------------------


def _disc(radius: float, dim: int, res: int) -> np.ndarray:
    """Symmetric product grid on the closed disc of given radius (origin included)."""
    if radius <= 0.0:
        return np.zeros((1, dim))
    if dim == 1:
        k = np.arange(1, res + 1)
        half = (radius * k / res)[:, None]
        return np.vstack([np.zeros((1, 1)), half, -half])
    if dim == 2:
        radii = radius * np.arange(1, res + 1) / res
        theta = np.pi * np.arange(2 * res) / (2 * res)
        dirs = np.column_stack([np.cos(theta), np.sin(theta)])
        half = (radii[:, None, None] * dirs[None, :, :]).reshape(-1, 2)
        return np.vstack([np.zeros((1, 2)), half, -half])
    grids = np.meshgrid(*[np.arange(-res, res + 1)] * dim, indexing="ij")
    k = np.stack([g.ravel() for g in grids], axis=1)
    k = k[(k**2).sum(axis=1) <= res * res]
    return radius * k / res


def _ball_points(rho: float, c: float, dim: int, res: int) -> np.ndarray:
    top = min(rho, c / 2)
    j = np.arange(1, res + 1)
    s_pos = top * j / res
    d0 = _disc(rho, dim, res)
    rows = [np.hstack([d0, np.zeros((d0.shape[0], 1))])]
    for s in s_pos:
        a = math.sqrt(max(rho * rho - s * s, 0.0))
        d = _disc(a, dim, res)
        rows.append(np.hstack([d, np.full((d.shape[0], 1), s)]))
        rows.append(np.hstack([d, np.full((d.shape[0], 1), -s)]))
    return np.vstack(rows)


def _paraboloid_points(rho: float, c: float, dim: int, res: int) -> np.ndarray:
    rows = []
    for j in range(res + 1):
        s = (c / 2) * j / res
        a = min(math.sqrt(2 * rho * s / c), 1.0)
        d = _disc(a, dim, res)
        rows.append(np.hstack([d, np.full((d.shape[0], 1), s)]))
    return np.vstack(rows)


def _raw_points(family: FamilySpec, x, t: float, resolution: int) -> np.ndarray:
    if family.kind == "ball":
        return _ball_points(family.rho, family.c, family.dim, resolution)
    if family.kind == "paraboloid":
        return _paraboloid_points(family.rho, family.c, family.dim, resolution)
    if family.points is not None:
        return np.array(family.points, dtype=float)
    pts = np.asarray(family.generator(np.atleast_1d(np.asarray(x, dtype=float)), float(t)), dtype=float)
    return pts.reshape(-1, family.dim + 1)


def _box_violations(points: np.ndarray, c: float) -> np.ndarray:
    y2 = (points[:, :-1] ** 2).sum(axis=1)
    return (y2 > 1.0 + BOX_TOL) | (np.abs(points[:, -1]) > c / 2 + BOX_TOL)


def sample_set(family: FamilySpec, x, t: float, resolution: int = 4) -> SampledSet:
    """Deterministic point cloud covering the set at ``(x, t)``.

    Closed-form families are sampled on product grids in (radius, direction,
    s); every slice is mirror symmetric by construction and ``(0, 0)`` is
    always a sample. Tabulated clouds are returned as given after a box check.
    """
    if int(resolution) != resolution or resolution < 2:
        raise ValueError(f"resolution must be an integer >= 2, got {resolution}")
    pts = _raw_points(family, x, t, int(resolution))
    if pts.shape[0] == 0:
        raise AxiomViolation("empty movement set")
    bad = _box_violations(pts, family.c)
    if bad.any():
        w = pts[np.argmax(bad)]
        raise AxiomViolation(f"point {w.tolist()} lies outside B(0,1) x [-c/2, c/2]")
    pts.setflags(write=False)
    anchor = (tuple(np.atleast_1d(np.asarray(x, dtype=float)).tolist()), float(t))
    return SampledSet(pts, int(resolution), anchor)


def time_offsets(s, eps: float, c: float):
    """Time displacement ``eps^2 ((1-c)/c s - (c+1)/2)`` for unscaled times ``s``."""
    return eps * eps * ((1 - c) / c * np.asarray(s, dtype=float) - (c + 1) / 2)


def scale_move(x, t: float, eps: float, move, c: float):
    """Map an unscaled move ``(y, s)`` to the next state ``(x', t')``."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    move = np.asarray(move, dtype=float)
    y, s = move[:-1], float(move[-1])
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if y.shape != x.shape:
        raise ValueError("move and state dimensions differ")
    if y @ y > 1.0 + BOX_TOL or abs(s) > c / 2 + BOX_TOL:
        raise ValueError(f"move {move.tolist()} is outside B(0,1) x [-c/2, c/2]")
    return x + eps * y, float(t + time_offsets(s, eps, c))


def scale_set(sampled: SampledSet, eps: float, c: float):
    """Spatial and temporal displacements of every sample, as arrays."""
    return eps * sampled.y, time_offsets(sampled.s, eps, c)


# -- extremal data ----------------------------------------------------------


def k_coefficient(I: float, c: float) -> float:
    return -((1 - c) / c) * I + (c + 1) / 2


def _unit(v: np.ndarray) -> np.ndarray:
    return v / math.sqrt(float(v @ v))


def _lex_argmin(values: np.ndarray, points: np.ndarray, tol: float):
    """Index of the minimum with lexicographic (s, y_1, ..., y_N) tie-breaking."""
    lo = values.min()
    cand = np.flatnonzero(values <= lo + tol)
    if cand.size == 1:
        return int(cand[0]), False
    sub = points[cand]
    keys = [sub[:, i] for i in range(sub.shape[1] - 2, -1, -1)] + [sub[:, -1]]
    order = np.lexsort(keys)
    distinct = np.unique(np.round(sub, 12), axis=0).shape[0] > 1
    return int(cand[order[0]]), distinct


def extremal_data(family: FamilySpec, x, t: float, v, resolution: int = 16) -> ExtremalData:
    """Minimiser ``J`` of ``<v, y>`` over the spatial projection, its time ``I`` and ``K``."""
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if v.shape != (family.dim,):
        raise ValueError(f"direction must have shape ({family.dim},)")
    if not np.any(v):
        raise ValueError("extremal data is undefined for v = 0")
    c = family.c
    if family.kind == "ball":
        J, I, tied = -family.rho * _unit(v), 0.0, False
    elif family.kind == "paraboloid":
        J, I, tied = -math.sqrt(family.rho) * _unit(v), c / 2, False
    else:
        pts = sample_set(family, x, t, resolution).points
        idx, tied = _lex_argmin(pts[:, :-1] @ v, pts, TIE_TOL)
        J, I = pts[idx, :-1].copy(), float(pts[idx, -1])
    J.setflags(write=False)
    return ExtremalData(J, float(I), k_coefficient(I, c), tied)


def hat_time(family: FamilySpec, x, t: float, s: float, resolution: int = 16) -> float:
    """Time ``r`` on the fibre ``{(0, r)}`` minimising ``r * s`` (0 when ``s == 0``)."""
    if s == 0:
        return 0.0
    if family.kind == "ball":
        return -math.copysign(family.time_radius, s)
    if family.kind == "paraboloid":
        return 0.0 if s > 0 else family.c / 2
    pts = sample_set(family, x, t, resolution).points
    fibre = pts[np.all(np.abs(pts[:, :-1]) <= BOX_TOL, axis=1), -1]
    if fibre.size == 0:
        raise AxiomViolation("no point of the form (0, r) in the set")
    return float(fibre[np.argmin(fibre * s)])


# -- axiom checker ----------------------------------------------------------


def _mirror_gaps(points: np.ndarray):
    """Distance from each mirrored point ``(-y, s)`` to the nearest sample."""
    mirrored = points.copy()
    mirrored[:, :-1] *= -1
    dist, _ = cKDTree(points).query(mirrored)
    return dist


def _projection_boundary(y: np.ndarray) -> np.ndarray:
    if y.shape[1] == 1:
        return np.array([[y.min()], [y.max()]])
    uniq = np.unique(np.round(y, 12), axis=0)
    if uniq.shape[0] <= y.shape[1]:
        return uniq
    try:
        hull = ConvexHull(uniq)
    except Exception:
        return uniq
    return uniq[hull.vertices]


def _fan(dim: int, n: int) -> np.ndarray:
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        th = 2 * np.pi * np.arange(n) / n
        return np.column_stack([np.cos(th), np.sin(th)])
    rng = np.random.default_rng(0)
    g = rng.standard_normal((n * dim, dim))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def check_axioms(
    family: FamilySpec,
    probes: Sequence,
    resolution: int = 8,
    h: float = 1e-3,
    fan_size: int = 360,
) -> AxiomReport:
    """Check A1-A4 on sampled sets at each probe ``(x, t, v)``.

    Failures are collected in the report, never raised. ``tolerance`` is the
    sampling tolerance ``1/resolution`` used for comparisons against closed
    forms; A3 uses the Hausdorff surrogate ``<= 10 h``.
    """
    if len(probes) == 0:
        raise ValueError("at least one probe is required")
    tol = 1.0 / resolution
    report = AxiomReport(tolerance=tol)
    add = report.entries.append
    c = family.c

    for i, (x, t, v) in enumerate(probes):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        v = np.atleast_1d(np.asarray(v, dtype=float))
        pts = _raw_points(family, x, t, resolution)

        # A1: box containment and the origin
        bad = _box_violations(pts, c)
        if bad.any():
            add(AxiomEntry("A1", i, False, "point outside B(0,1) x [-c/2,c/2]", tuple(pts[np.argmax(bad)])))
        else:
            add(AxiomEntry("A1", i, True, "box containment"))
        has_origin = bool(np.any(np.all(np.abs(pts) <= BOX_TOL, axis=1)))
        add(AxiomEntry("A1", i, has_origin, "(0,0) membership", None if has_origin else (0.0,) * (family.dim + 1)))

        # A2: slice symmetry
        gaps = _mirror_gaps(pts)
        if np.any(gaps > BOX_TOL):
            w = pts[np.argmax(gaps)]
            add(AxiomEntry("A2", i, False, "mirror point (-y, s) missing", tuple(w)))
        else:
            add(AxiomEntry("A2", i, True, "slice symmetry"))

        # A3: continuity surrogate
        worst = 0.0
        for k in range(family.dim + 1):
            dx = np.zeros(family.dim)
            dt = 0.0
            if k < family.dim:
                dx[k] = h
            else:
                dt = h
            other = _raw_points(family, x + dx, t + dt, resolution)
            d = max(directed_hausdorff(pts, other)[0], directed_hausdorff(other, pts)[0])
            worst = max(worst, d)
        add(AxiomEntry("A3", i, worst <= 10 * h, f"Hausdorff distance {worst:.3g} under perturbation {h:g}"))

        # A4: extremal point, homogeneity, mirror clause, surjectivity
        if not np.any(v):
            continue
        try:
            base = extremal_data(family, x, t, v, resolution)
        except AxiomViolation as exc:
            add(AxiomEntry("A4", i, False, str(exc)))
            continue
        proj = pts[:, :-1] @ v
        sign_ok = float(v @ base.J) < 0
        add(AxiomEntry("A4", i, sign_ok, "<v, J> < 0", None if sign_ok else tuple(base.J)))
        if base.tied:
            add(AxiomEntry("A4", i, True, "argmin not unique on the sampled cloud", tuple(base.J), warning=True))
        homog = True
        for lam in (0.5, 1.0, 7.0):
            other = extremal_data(family, x, t, lam * v, resolution)
            if not (np.allclose(other.J, base.J, atol=1e-12, rtol=0) and abs(other.I - base.I) <= 1e-12):
                homog = False
                add(AxiomEntry("A4", i, False, f"J/I not homogeneous under scaling by {lam}", tuple(other.J)))
        if homog:
            add(AxiomEntry("A4", i, True, "homogeneity"))
        scale = float(np.linalg.norm(v))
        top = float(proj.max())
        expect = float(v @ -base.J)
        mirror_ok = top <= expect + 1e-9 * scale and top >= expect - tol * scale
        if family.kind == "tabulated":
            mirror_member = bool(np.any(np.all(np.abs(pts - np.append(-base.J, base.I)) <= BOX_TOL, axis=1)))
        else:
            mirror_member = family.contains(-base.J, base.I)
        add(AxiomEntry("A4", i, mirror_ok and mirror_member, "max <v, y> attained at -J",
                       None if mirror_ok and mirror_member else tuple(np.append(-base.J, base.I))))

        # J onto the boundary of the spatial projection, on a finite fan
        fan = _fan(family.dim, fan_size)
        hits = np.array([extremal_data(family, x, t, w, resolution).J for w in fan])
        bnd = _projection_boundary(pts[:, :-1])
        far, _ = cKDTree(hits).query(bnd)
        surj_ok = bool(np.all(far <= tol))
        add(AxiomEntry("A4", i, surj_ok, "J covers the projection boundary",
                       None if surj_ok else tuple(bnd[np.argmax(far)])))
    return report


def load_tabulated_csv(path, c: float) -> FamilySpec:
    """Read a constant tabulated family from a CSV with header ``y1..yN,s``."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        if not header or header[-1] != "s" or header[:-1] != [f"y{i + 1}" for i in range(len(header) - 1)]:
            raise ValueError(f"expected header y1..yN,s, got {header}")
        rows = [[float(v) for v in row] for row in reader if row]
    return FamilySpec.tabulated(rows, c=c, dim=len(header) - 1)


# -- continuum refinement ---------------------------------------------------


def _to_params(family: FamilySpec, p: np.ndarray) -> np.ndarray:
    y, s = p[:-1], float(p[-1])
    if family.kind == "ball":
        u = s / family.time_radius
        amax = math.sqrt(max(family.rho**2 - s * s, 0.0))
    else:
        u = s / (family.c / 2)
        amax = min(math.sqrt(2 * family.rho * s / family.c), 1.0) if s > 0 else 0.0
    if family.dim == 1:
        w = float(y[0]) / amax if amax > 0 else 0.0
        return np.array([u, w])
    a = math.hypot(y[0], y[1])
    return np.array([u, a / amax if amax > 0 else 0.0, math.atan2(y[1], y[0])])


def _from_params(family: FamilySpec, q: np.ndarray) -> np.ndarray:
    if family.kind == "ball":
        u = np.clip(q[:, 0], -1.0, 1.0)
        s = family.time_radius * u
        amax = np.sqrt(np.maximum(family.rho**2 - s * s, 0.0))
    else:
        u = np.clip(q[:, 0], 0.0, 1.0)
        s = (family.c / 2) * u
        amax = np.minimum(np.sqrt(2 * family.rho * s / family.c), 1.0)
    if family.dim == 1:
        y = (amax * np.clip(q[:, 1], -1.0, 1.0))[:, None]
    else:
        a = amax * np.clip(q[:, 1], 0.0, 1.0)
        y = np.column_stack([a * np.cos(q[:, 2]), a * np.sin(q[:, 2])])
    return np.column_stack([y, s])


def refine_extremum(
    family: FamilySpec,
    objective: Callable[[np.ndarray], np.ndarray],
    start: np.ndarray,
    resolution: int,
    sense: int = 1,
    iterations: int = 40,
) -> tuple:
    """Zoom search for a local max (``sense=1``) or min (``sense=-1``) of
    ``objective`` over the continuum set, starting from a sampled point.

    The search runs in (s, radius fraction, angle) coordinates with a window
    of one sample spacing that halves every iteration. Returns
    ``(value, point)``. Tabulated families and ``dim > 2`` return the start.
    """
    start = np.asarray(start, dtype=float)
    best_val = float(objective(start[None, :])[0])
    if family.kind == "tabulated" or family.dim > 2:
        return best_val, start
    q = _to_params(family, start)
    win = np.full(q.shape, 1.0 / resolution)
    if family.dim == 2:
        win[2] = np.pi / (2 * resolution)
    steps = np.linspace(-1.0, 1.0, 5)
    best_pt = start
    for _ in range(iterations):
        mesh = np.meshgrid(*[q[i] + steps * win[i] for i in range(q.size)], indexing="ij")
        cand_q = np.column_stack([m.ravel() for m in mesh])
        cand = _from_params(family, cand_q)
        vals = objective(cand)
        i = int(np.argmax(vals) if sense > 0 else np.argmin(vals))
        if sense * (vals[i] - best_val) > 0:
            best_val, best_pt = float(vals[i]), cand[i]
            q = _to_params(family, best_pt)
        win /= 2
    return best_val, best_pt


def lattice_ball(rho: float, c: float, dim: int, m: int, s_values: Sequence[float] = (0.0,)) -> FamilySpec:
    """Ball family restricted to the lattice ``(Z/m)^N x s_values``.

    With spatial step ``h = eps/m`` every move maps nodes onto nodes, which
    makes the family usable for exact (lattice-aligned) solves and the
    brute-force oracle. The point set is mirror symmetric and contains the
    origin whenever ``0`` is among ``s_values``.
    """
    k = np.arange(-m, m + 1)
    grids = np.meshgrid(*[k] * dim, indexing="ij")
    y = np.stack([g.ravel() for g in grids], axis=1) / m
    rows = []
    for s in s_values:
        keep = (y**2).sum(axis=1) + s * s <= rho * rho + 1e-12
        rows.append(np.hstack([y[keep], np.full((int(keep.sum()), 1), float(s))]))
    return FamilySpec.tabulated(np.vstack(rows), c=c, dim=dim)
