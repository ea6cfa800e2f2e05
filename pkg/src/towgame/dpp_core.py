"""Discrete game values on the parabolic cylinder.

The value ``u_eps`` solves

    u(x, t) = 1/2 max_{A_eps(x,t)} u + 1/2 min_{A_eps(x,t)} u   in Omega_T,
    u = F                                                     on Gamma_eps.

Every move lowers time by at least ``c eps^2``, so the values at time ``t``
only depend on strictly earlier slices and one ascending sweep over the time
slices solves the system exactly (no fixed-point iteration). Values between
grid nodes are obtained by multilinear interpolation in space and linear
interpolation in time.
"""

from __future__ import annotations

import csv
import hashlib
import io
import itertools
import json
import math
import time as _time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy import sparse

from .movement_sets import FamilySpec, sample_set, scale_set
from .payoffs import PayoffField

SNAP = 1e-9


class GridError(ValueError):
    """Grid or domain incompatible with the requested epsilon."""


class NonAlignedError(GridError):
    """A scaled move does not map grid nodes onto grid nodes."""


class PointClass(IntEnum):
    INTERIOR = 0
    BOUNDARY_STRIP = 1
    OUTSIDE = 2


@dataclass(frozen=True)
class DomainSpec:
    """A ball-shaped spatial domain (interval for N=1, disk for N=2) and horizon.

    ``eta`` is the width of the boundary strip; it bounds every epsilon used.
    """

    center: tuple
    radius: float
    T: float
    eta: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("domain radius must be positive")
        if self.T <= 0:
            raise ValueError("final time T must be positive")
        if self.eta <= 0:
            raise ValueError("strip width eta must be positive")

    @classmethod
    def interval(cls, a: float, b: float, T: float, eta: float) -> "DomainSpec":
        if not b > a:
            raise ValueError("interval needs a < b")
        return cls(((a + b) / 2,), (b - a) / 2, float(T), float(eta))

    @classmethod
    def disk(cls, center, radius: float, T: float, eta: float) -> "DomainSpec":
        center = tuple(float(v) for v in center)
        if len(center) < 2:
            raise ValueError("disk center needs at least two coordinates")
        return cls(center, float(radius), float(T), float(eta))

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def shape(self) -> str:
        return "interval" if self.dim == 1 else "disk"

    @property
    def diameter(self) -> float:
        return 2 * self.radius

    def signed_distance(self, X) -> np.ndarray:
        """Distance to the boundary, negative inside the domain."""
        X = np.asarray(X, dtype=float)
        return np.linalg.norm(X - np.asarray(self.center), axis=-1) - self.radius

    def project_to_boundary(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        c = np.asarray(self.center)
        d = X - c
        n = np.linalg.norm(d, axis=-1, keepdims=True)
        n = np.where(n == 0, 1.0, n)
        d = np.where(n == 0, np.eye(self.dim)[0], d)
        return c + self.radius * d / n

    def describe(self) -> dict:
        out = {"shape": self.shape, "T": self.T, "eta": self.eta}
        if self.dim == 1:
            out.update(a=self.center[0] - self.radius, b=self.center[0] + self.radius)
        else:
            out.update(center=list(self.center), radius=self.radius)
        return out


@dataclass(frozen=True)
class GridSpec:
    h: float
    dt: float
    lattice_aligned: bool = False

    def __post_init__(self):
        if self.h <= 0 or self.dt <= 0:
            raise ValueError("grid steps must be positive")


def classify_points(domain: DomainSpec, eps: float, X, t) -> np.ndarray:
    """Vectorised :func:`classify_point`; returns an int8 array of PointClass codes."""
    sd = domain.signed_distance(X)
    t = np.broadcast_to(np.asarray(t, dtype=float), sd.shape)
    inside = sd < 0
    interior = inside & (t > 0) & (t <= domain.T)
    time_strip = (np.maximum(sd, 0) <= eps) & (t > -eps * eps) & (t <= 0)
    side_strip = (~inside) & (sd <= eps) & (t > 0) & (t <= domain.T)
    out = np.full(sd.shape, int(PointClass.OUTSIDE), dtype=np.int8)
    out[time_strip | side_strip] = PointClass.BOUNDARY_STRIP
    out[interior] = PointClass.INTERIOR
    return out


def classify_point(domain: DomainSpec, eps: float, x, t: float) -> PointClass:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return PointClass(int(classify_points(domain, eps, x[None, :], t)[0]))


# -- lattice ----------------------------------------------------------------


@dataclass
class Lattice:
    axes: tuple
    times: np.ndarray
    h: float
    dt: float
    coords: np.ndarray  # (*shape, N)
    sd: np.ndarray  # signed distance, (*shape)

    @property
    def shape(self) -> tuple:
        return self.sd.shape

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def interior(self) -> np.ndarray:
        return self.sd < 0

    @property
    def origin(self) -> np.ndarray:
        return np.array([a[0] for a in self.axes])

    @property
    def strides(self) -> np.ndarray:
        return np.array([int(np.prod(self.shape[d + 1:])) for d in range(self.dim)], dtype=np.int64)


def build_lattice(domain: DomainSpec, grid: GridSpec) -> Lattice:
    """Cartesian nodes ``center + k h`` covering the domain plus the strip and one cell."""
    K = int(math.ceil((domain.radius + domain.eta) / grid.h)) + 1
    k = np.arange(-K, K + 1)
    axes = tuple(c + grid.h * k for c in domain.center)
    mesh = np.meshgrid(*axes, indexing="ij")
    coords = np.stack(mesh, axis=-1)
    ratio = domain.T / grid.dt
    n = int(round(ratio))
    if abs(ratio - n) > 1e-9 * max(1.0, ratio):
        n = int(math.ceil(ratio))
    dt = domain.T / n
    times = dt * np.arange(n + 1)
    return Lattice(axes, times, grid.h, dt, coords, domain.signed_distance(coords))


def _snap(a):
    a = np.asarray(a, dtype=float)
    r = np.round(a)
    return np.where(np.abs(a - r) <= SNAP, r, a)


# -- value field ------------------------------------------------------------


@dataclass
class ValueField:
    """Values of the epsilon-game on every lattice node and time slice.

    ``values[k]`` is the slice at ``times[k]``. Nodes outside the domain and
    the slice ``t = 0`` carry the payoff.
    """

    values: np.ndarray
    lattice: Lattice
    eps: float
    resolution: int
    domain: DomainSpec
    family: FamilySpec
    payoff: PayoffField
    grid: GridSpec
    strip_range: tuple = (math.nan, math.nan)
    meta: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return self.lattice.times

    @property
    def interior(self) -> np.ndarray:
        return self.lattice.interior

    def interior_nodes(self):
        """Iterate over ``(k, index)`` for every node of Omega_T."""
        idx = np.argwhere(self.interior)
        for k in range(1, len(self.times)):
            for i in idx:
                yield k, tuple(int(v) for v in i)

    def export_mask(self) -> np.ndarray:
        """Spatial nodes belonging to Omega_T or the strip (``dist(x, Omega) <= eps``)."""
        return self.lattice.sd <= self.eps

    def evaluate(self, X, T) -> np.ndarray:
        """Values at arbitrary states with the game rule: strip states read the payoff."""
        return _evaluate(self.values, self.lattice, self.domain, self.payoff, X, T)

    def checksum(self) -> str:
        return hashlib.sha256(np.ascontiguousarray(self.values).tobytes()).hexdigest()

    def csv_body(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        N = self.lattice.dim
        w.writerow([f"x{i + 1}" for i in range(N)] + ["t", "u"])
        mask = self.export_mask()
        pts = self.lattice.coords[mask]
        for k, t in enumerate(self.times):
            vals = self.values[k][mask]
            for p, u in zip(pts, vals):
                w.writerow([format(float(v), ".17g") for v in p] + [format(float(t), ".17g"), format(float(u), ".17g")])
        return buf.getvalue()

    def metadata(self) -> dict:
        return {
            "eps": self.eps,
            "c": self.family.c,
            "resolution": self.resolution,
            "family": self.family.describe(),
            "domain": self.domain.describe(),
            "grid": {"h": self.grid.h, "dt": self.lattice.dt, "lattice_aligned": self.grid.lattice_aligned},
            "payoff": self.payoff.label,
            "strip_range": list(self.strip_range),
            **self.meta,
        }

    def write(self, stem, extra: Optional[dict] = None) -> tuple:
        """Write ``<stem>.csv`` and the ``<stem>.json`` sidecar; returns both paths."""
        stem = Path(stem)
        stem.parent.mkdir(parents=True, exist_ok=True)
        body = self.csv_body()
        csv_path, json_path = stem.parent / (stem.name + ".csv"), stem.parent / (stem.name + ".json")
        csv_path.write_bytes(body.encode())
        meta = self.metadata()
        meta["checksum"] = hashlib.sha256(body.encode()).hexdigest()
        meta["written_at"] = _time.strftime("%Y-%m-%dT%H:%M:%S%z")
        if extra:
            meta.update(extra)
        json_path.write_text(json.dumps(meta, indent=2, sort_keys=True))
        return csv_path, json_path


def read_value_csv(path) -> np.ndarray:
    """Rows of a value CSV as a float array ``[x1..xN, t, u]``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return np.array(rows[1:], dtype=float)


# -- interpolation ----------------------------------------------------------


def _interp(values: np.ndarray, lat: Lattice, X: np.ndarray, T: np.ndarray, strict: bool) -> np.ndarray:
    """Multilinear in space, linear in time. ``X`` is (M, N), ``T`` is (M,)."""
    M, N = X.shape
    frac = _snap((X - lat.origin) / lat.h)
    tfrac = _snap(T / lat.dt)
    shape = np.array(lat.shape)
    nt = len(lat.times) - 1
    if strict:
        bad = np.any(frac < 0, axis=1) | np.any(frac > shape - 1, axis=1) | (tfrac < 0) | (tfrac > nt)
        if bad.any():
            raise GridError(f"point {X[np.argmax(bad)].tolist()}, t={T[np.argmax(bad)]} is outside the grid")
    base = np.clip(np.floor(frac).astype(np.int64), 0, shape - 2)
    w = frac - base
    j = np.clip(np.floor(tfrac).astype(np.int64), 0, max(nt - 1, 0))
    wt = tfrac - j
    flat_vals = values.reshape(len(lat.times), -1)
    base_flat = base @ lat.strides
    offsets = np.array([int(np.dot(corner, lat.strides)) for corner in itertools.product((0, 1), repeat=N)])
    flat = base_flat[:, None] + offsets[None, :]
    out = _reduce_corners(flat_vals[j[:, None], flat], w)
    need1 = wt > 0
    if need1.any():
        nxt = _reduce_corners(flat_vals[j[need1, None] + 1, flat[need1]], w[need1])
        out[need1] = _lerp(out[need1], nxt, wt[need1])
    return out


def _lerp(a: np.ndarray, b: np.ndarray, w: np.ndarray) -> np.ndarray:
    # exact at w = 0 and w = 1, and for a == b; never touches the unused end
    with np.errstate(invalid="ignore"):
        mid = a + w * (b - a)
    return np.where(w == 0, a, np.where(w == 1, b, mid))


def _reduce_corners(vals: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Nested linear interpolation of (M, 2^N) corner values, first axis outermost."""
    M, N = w.shape
    vals = vals.reshape((M,) + (2,) * N)
    for d in range(N):
        wd = w[:, d].reshape((M,) + (1,) * (N - d - 1))
        vals = _lerp(vals[:, 0], vals[:, 1], wd)
    return vals


def interpolate(field: ValueField, x, t: float) -> float:
    """Field value at ``(x, t)`` from the stored nodes; refuses to extrapolate."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return float(_interp(field.values, field.lattice, x[None, :], np.array([float(t)]), strict=True)[0])


def _evaluate(values, lat: Lattice, domain: DomainSpec, payoff: PayoffField, X, T) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    T = np.broadcast_to(np.asarray(T, dtype=float), X.shape[:1])
    strip = (_snap(T / lat.dt) <= 0) | (domain.signed_distance(X) >= 0)
    out = np.empty(X.shape[0])
    if strip.any():
        out[strip] = payoff(X[strip])
    if (~strip).any():
        out[~strip] = _interp(values, lat, X[~strip], T[~strip], strict=True)
    return out


# -- sweep ------------------------------------------------------------------


def _validate(domain: DomainSpec, family: FamilySpec, eps: float, grid: GridSpec):
    if eps <= 0:
        raise GridError("eps must be positive")
    if family.dim != domain.dim:
        raise GridError(f"family dimension {family.dim} != domain dimension {domain.dim}")
    if eps > domain.eta * (1 + 1e-12):
        raise GridError(f"eps={eps} exceeds the strip width eta={domain.eta}")
    if grid.dt > family.c * eps * eps * (1 + 1e-12):
        raise GridError(f"time step {grid.dt} exceeds c eps^2 = {family.c * eps * eps}")
    if grid.h > eps / math.sqrt(domain.dim) * (1 + 1e-12):
        raise GridError(f"space step {grid.h} exceeds eps/sqrt(N) = {eps / math.sqrt(domain.dim)}")
    if domain.diameter < 2 * eps:
        raise GridError("domain diameter is below 2 eps")


class _Block:
    """Interior nodes updated together, with gather tables for homogeneous families.

    Moves are grouped by their time offset so one fancy-indexing pass covers
    every move of a group.
    """

    def __init__(self, nodes, lat, domain, payoff, dy, toff, aligned, ref_node=0):
        self.nodes = nodes
        self.ref_node = ref_node
        self.aligned = aligned
        self.payoff = payoff
        idx = np.array(np.unravel_index(nodes, lat.shape)).T
        self.X = lat.coords.reshape(-1, lat.dim)[nodes]
        shape = np.array(lat.shape)
        off = _snap(dy / lat.h)
        self.strip_lo, self.strip_hi = math.inf, -math.inf
        self.groups = []
        for tg in np.unique(toff):
            sel = np.flatnonzero(toff == tg)
            g = {"toff": float(tg), "dy": dy[sel], "fall": None}
            if aligned:
                if not np.all(off[sel] == np.round(off[sel])) or tg != round(tg):
                    raise NonAlignedError(f"moves {sel.tolist()} are not lattice aligned")
                land = idx[None, :, :] + off[sel].astype(np.int64)[:, None, :]
                if np.any(land < 0) or np.any(land >= shape):
                    raise GridError("a move lands outside the gridded region")
                g["flat"] = land @ lat.strides  # (P, M)
                self.groups.append(g)
                continue
            fl = np.floor(off[sel]).astype(np.int64)
            w = off[sel] - fl
            corners = np.array(list(itertools.product((0, 1), repeat=lat.dim)))  # (C, N)
            cw = np.prod(np.where(corners[None], w[:, None, :], 1 - w[:, None, :]), axis=2)  # (P, C)
            coff = (fl[:, None, :] + corners[None]) @ lat.strides  # (P, C)
            Xl = self.X[None, :, :] + dy[sel][:, None, :]
            out = domain.signed_distance(Xl) >= 0  # (P, M)
            lo = idx[None, :, :] + fl[:, None, :]
            hi = lo + (w > 0)[:, None, :]
            if np.any((lo < 0) & ~out[..., None]) or np.any((hi >= shape) & ~out[..., None]):
                raise GridError("a move lands outside the gridded region")
            fo = np.zeros(out.shape)
            if out.any():
                fo[out] = payoff(Xl[out])
                self.strip_lo = min(self.strip_lo, fo[out].min())
                self.strip_hi = max(self.strip_hi, fo[out].max())
            # interpolation as a sparse operator: row (p, m) holds the corner weights
            P, M, C = len(sel), len(nodes), len(corners)
            cols = np.clip(nodes[None, :, None] + coff[:, None, :], 0, lat.sd.size - 1).reshape(P * M, C)
            data = np.broadcast_to(cw[:, None, :], (P, M, C)).reshape(P * M, C)
            keep = data > 0
            indptr = np.concatenate([[0], np.cumsum(keep.sum(axis=1))])
            op = sparse.csr_matrix((data[keep], cols[keep], indptr), shape=(P * M, lat.sd.size))
            g.update(op=op, shape=(P, M), out=out, fout=fo[out], any_out=bool(out.any()))
            self.groups.append(g)

    def update(self, V: np.ndarray, k: int) -> np.ndarray:
        mx = np.full(len(self.nodes), -np.inf)
        mn = np.full(len(self.nodes), np.inf)
        for g in self.groups:
            tk = k + g["toff"]
            if self.aligned:
                vals = V[max(int(tk), 0)][g["flat"]]
            elif tk <= 0:
                if g["fall"] is None:
                    g["fall"] = self.payoff(self.X[None, :, :] + g["dy"][:, None, :])
                    self.strip_lo = min(self.strip_lo, g["fall"].min())
                    self.strip_hi = max(self.strip_hi, g["fall"].max())
                vals = g["fall"]
            else:
                j = int(math.floor(tk))
                wt = tk - j
                vals = self._cached(V, j, g)
                if wt > 0:
                    vals = vals + wt * (self._cached(V, j + 1, g) - vals)
                else:
                    vals = vals.copy()
                if g["any_out"]:
                    vals[g["out"]] = g["fout"]
            np.maximum(mx, vals.max(axis=0), out=mx)
            np.minimum(mn, vals.min(axis=0), out=mn)
        return 0.5 * mx + 0.5 * mn

    def _cached(self, V, j, g):
        # slice j is final once read, and consecutive sweeps reuse j + 1
        cache = g.setdefault("cache", {})
        if j not in cache:
            for stale in [i for i in cache if i < j - 1]:
                del cache[stale]
            cache[j] = self._gather(V[j], g)
        return cache[j]

    def _gather(self, slab, g):
        # the corner weights sum to 1 only up to round-off; interpolating the
        # offsets from one slab value keeps constant data exact
        ref = float(slab.flat[self.ref_node])
        return (g["op"] @ (slab.ravel() - ref)).reshape(g["shape"]) + ref


def dpp_sweep(
    domain: DomainSpec,
    family: FamilySpec,
    payoff: PayoffField,
    eps: float,
    grid: GridSpec,
    resolution: int = 4,
    threads: int = 1,
    trace: Optional[list] = None,
) -> ValueField:
    """Solve the DPP on the lattice by one ascending sweep over time slices.

    With ``grid.lattice_aligned`` every scaled move must map nodes onto nodes
    (otherwise :class:`NonAlignedError`), and values are read directly from
    the stored slices. Otherwise landing states inside the domain are
    interpolated and strip landings read the payoff at the landing point.

    ``trace``, when given, receives ``(k, latest landing time, latest slice
    read)`` for each slice ``k``.
    """
    _validate(domain, family, eps, grid)
    lat = build_lattice(domain, grid)
    c = family.c
    nt = len(lat.times) - 1
    f_nodes = payoff(lat.coords).ravel()
    V = np.tile(f_nodes, (nt + 1, 1))
    strip_nodes = (lat.sd >= 0).ravel() & (lat.sd.ravel() <= eps)
    vals_strip = np.concatenate([f_nodes[strip_nodes], f_nodes[lat.interior.ravel()]])
    lo, hi = float(vals_strip.min()), float(vals_strip.max())
    nodes = np.flatnonzero(lat.interior.ravel())
    t0 = _time.perf_counter()

    if family.homogeneous:
        S = sample_set(family, np.asarray(domain.center), domain.T, resolution)
        dy, dtau = scale_set(S, eps, c)
        toff = _snap(dtau / lat.dt)
        if grid.lattice_aligned and not np.all(toff == np.round(toff)):
            raise NonAlignedError("time offsets are not multiples of the time step")
        chunks = np.array_split(nodes, max(1, int(threads)))
        blocks = [_Block(ch, lat, domain, payoff, dy, toff, grid.lattice_aligned, int(nodes[0])) for ch in chunks
                  if ch.size]
        pool = ThreadPoolExecutor(len(blocks)) if len(blocks) > 1 else None
        try:
            for k in range(1, nt + 1):
                if pool is None:
                    results = [b.update(V, k) for b in blocks]
                else:
                    results = list(pool.map(lambda b: b.update(V, k), blocks))
                for b, u in zip(blocks, results):
                    V[k, b.nodes] = u
                if trace is not None:
                    latest = k + float(toff.max())
                    read = int(math.ceil(latest)) if not grid.lattice_aligned else max(int(latest), 0)
                    trace.append((k, float(lat.times[0] + latest * lat.dt), max(read, 0)))
        finally:
            if pool is not None:
                pool.shutdown()
        for b in blocks:
            lo, hi = min(lo, b.strip_lo), max(hi, b.strip_hi)
    else:
        X = lat.coords.reshape(-1, lat.dim)[nodes]
        for k in range(1, nt + 1):
            t = lat.times[k]
            latest = -math.inf
            for m, node in enumerate(nodes):
                S = sample_set(family, X[m], t, resolution)
                dy, dtau = scale_set(S, eps, c)
                Xl, Tl = X[m] + dy, t + dtau
                u = _evaluate(V.reshape(nt + 1, *lat.shape), lat, domain, payoff, Xl, Tl)
                strip = (_snap(Tl / lat.dt) <= 0) | (domain.signed_distance(Xl) >= 0)
                if strip.any():
                    lo, hi = min(lo, u[strip].min()), max(hi, u[strip].max())
                V[k, node] = 0.5 * u.max() + 0.5 * u.min()
                latest = max(latest, Tl.max())
            if trace is not None:
                trace.append((k, float(latest), int(math.ceil(_snap(latest / lat.dt)))))

    return ValueField(
        V.reshape(nt + 1, *lat.shape),
        lat,
        float(eps),
        int(resolution),
        domain,
        family,
        payoff,
        grid,
        strip_range=(lo, hi),
        meta={"runtime_s": _time.perf_counter() - t0, "interior_nodes": int(nodes.size), "slices": nt},
    )


def field_from_function(
    domain: DomainSpec,
    family: FamilySpec,
    payoff: PayoffField,
    eps: float,
    grid: GridSpec,
    func: Callable[[np.ndarray, float], np.ndarray],
    resolution: int = 4,
) -> ValueField:
    """Fill the interior nodes with ``func(X, t)`` (strip nodes keep the payoff)."""
    _validate(domain, family, eps, grid)
    lat = build_lattice(domain, grid)
    nt = len(lat.times) - 1
    V = np.tile(payoff(lat.coords)[None], (nt + 1,) + (1,) * lat.dim)
    for k in range(1, nt + 1):
        V[k][lat.interior] = np.asarray(func(lat.coords[lat.interior], lat.times[k]), dtype=float)
    return ValueField(V, lat, float(eps), int(resolution), domain, family, payoff, grid)


def dpp_residual(field: ValueField, node) -> float:
    """``u - (max + min)/2`` over the scaled sampled set at an interior node.

    Negative values mark a strict subsolution there, positive a supersolution.
    """
    k, idx = node
    idx = tuple(idx)
    if k < 1 or not field.interior[idx]:
        raise ValueError(f"node {node} is not interior")
    x = field.lattice.coords[idx]
    t = field.times[k]
    S = sample_set(field.family, x, t, field.resolution)
    dy, dtau = scale_set(S, field.eps, field.family.c)
    vals = field.evaluate(x + dy, t + dtau)
    return float(field.values[(k,) + idx] - (0.5 * vals.max() + 0.5 * vals.min()))


# -- brute-force oracle -----------------------------------------------------


def brute_force_oracle(
    domain: DomainSpec,
    family: FamilySpec,
    payoff: PayoffField,
    eps: float,
    grid: GridSpec,
    resolution: int = 4,
    max_pairs: int = 10_000,
) -> ValueField:
    """Exhaustive memoised backward induction on a lattice-aligned instance.

    Each value is computed on demand from its successors with exact max/min
    over the finite move list; there is no sweep order and no interpolation.
    """
    _validate(domain, family, eps, grid)
    lat = build_lattice(domain, grid)
    nt = len(lat.times) - 1
    S = sample_set(family, np.asarray(domain.center), domain.T, resolution)
    c = family.c
    moves = []
    for y, s in zip(S.y.tolist(), S.s.tolist()):
        di = []
        for comp in y:
            q = eps * comp / lat.h
            if abs(q - round(q)) > SNAP:
                raise NonAlignedError(f"spatial offset {eps * comp} is not a multiple of h")
            di.append(int(round(q)))
        q = eps * eps * ((1 - c) / c * s - (c + 1) / 2) / lat.dt
        if abs(q - round(q)) > SNAP:
            raise NonAlignedError("time offset is not a multiple of dt")
        moves.append((tuple(di), int(round(q))))

    interior = {tuple(int(v) for v in i) for i in np.argwhere(lat.interior)}
    if len(interior) * nt * len(moves) > max_pairs:
        raise ValueError(f"instance too large for the oracle ({len(interior) * nt * len(moves)} node-move pairs)")
    F = payoff(lat.coords)
    memo: dict = {}

    def value(i, k):
        if k <= 0 or i not in interior:
            return F[i]
        key = (i, k)
        if key not in memo:
            succ = []
            for di, dk in moves:
                j = tuple(a + b for a, b in zip(i, di))
                if any(a < 0 or a >= n for a, n in zip(j, lat.shape)):
                    raise GridError("a move lands outside the gridded region")
                succ.append(value(j, k + dk))
            memo[key] = 0.5 * max(succ) + 0.5 * min(succ)
        return memo[key]

    V = np.tile(F[None], (nt + 1,) + (1,) * lat.dim)
    for k in range(1, nt + 1):
        for i in interior:
            V[(k,) + i] = value(i, k)
    return ValueField(V, lat, float(eps), int(resolution), domain, family, payoff, grid,
                      meta={"oracle": True, "moves": len(moves)})
