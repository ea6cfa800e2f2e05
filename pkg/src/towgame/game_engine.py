"""Monte Carlo simulation of space/time Tug-of-War plays.

Runs are simulated in lockstep batches. Every run owns three random streams
(coin tosses, Player I, Player II) spawned from one ``SeedSequence``, so a
strategy change never perturbs the coin and a batch is reproducible from its
seed alone.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .dpp_core import DomainSpec, PointClass, ValueField, classify_points
from .movement_sets import AxiomViolation, FamilySpec, SampledSet, sample_set, scale_set
from .payoffs import PayoffField

TIE_TOL = 1e-12
TIME_SNAP = 1e-12


@dataclass(frozen=True)
class Game:
    domain: DomainSpec
    family: FamilySpec
    payoff: PayoffField
    eps: float
    resolution: int = 4

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.family.dim != self.domain.dim:
            raise ValueError("family and domain dimensions differ")

    @property
    def c(self) -> float:
        return self.family.c

    def sampled(self, x, t: float) -> SampledSet:
        return sample_set(self.family, x, t, self.resolution)

    def displacements(self, x, t: float):
        """``(points, dy, dtau)`` of the scaled sampled set at ``(x, t)``."""
        S = self.sampled(x, t)
        dy, dtau = scale_set(S, self.eps, self.c)
        return S.points, dy, dtau

    def stopping_bound(self, t0: float) -> float:
        return t0 / (self.c * self.eps**2) + 1

    def classify(self, X, T) -> np.ndarray:
        return classify_points(self.domain, self.eps, X, T)


# -- strategies -------------------------------------------------------------


def _tie_rank(points: np.ndarray) -> np.ndarray:
    """Rank of each move under the preference: larger ``s`` first, then lexicographic ``y``."""
    keys = [points[:, i] for i in range(points.shape[1] - 2, -1, -1)] + [-points[:, -1]]
    order = np.lexsort(keys)
    rank = np.empty(len(order), dtype=np.int64)
    rank[order] = np.arange(len(order))
    return rank


def _pick(scores: np.ndarray, rank: np.ndarray) -> np.ndarray:
    """Row-wise argmax of ``scores`` (B, P), ties broken by smallest rank."""
    best = scores.max(axis=1, keepdims=True)
    cand = scores >= best - TIE_TOL * np.maximum(1.0, np.abs(best))
    return np.argmin(np.where(cand, rank[None, :], np.iinfo(np.int64).max), axis=1)


class Strategy:
    """Chooses move indices for a batch of states sharing one sampled set."""

    name = "strategy"

    def choose(self, game: Game, X, T, points, dy, dtau, draws) -> np.ndarray:
        raise NotImplementedError

    def describe(self) -> dict:
        return {"kind": self.name}


@dataclass
class PullToward(Strategy):
    """Move to the sampled landing closest (in space) to ``target``."""

    target: Sequence[float]
    name = "pull_toward"

    def choose(self, game, X, T, points, dy, dtau, draws):
        # |x + dy - target|^2 minus the per-row constant |x - target|^2
        d = X - np.asarray(self.target, dtype=float)
        score = 2.0 * d @ dy.T + np.einsum("pi,pi->p", dy, dy)[None, :]
        return _pick(-score, _tie_rank(points))

    def describe(self):
        return {"kind": self.name, "target": [float(v) for v in np.atleast_1d(self.target)]}


@dataclass
class GreedyOnField(Strategy):
    """Move to the landing with the largest (``sense='max'``) or smallest field value."""

    field: ValueField
    sense: str = "max"
    name = "greedy_on_field"

    def __post_init__(self):
        if self.sense not in ("max", "min"):
            raise ValueError("sense must be 'max' or 'min'")

    def choose(self, game, X, T, points, dy, dtau, draws):
        B, P = X.shape[0], dy.shape[0]
        landing = (X[:, None, :] + dy[None, :, :]).reshape(B * P, -1)
        times = (T[:, None] + dtau[None, :]).ravel()
        vals = self.field.evaluate(landing, times).reshape(B, P)
        return _pick(vals if self.sense == "max" else -vals, _tie_rank(points))

    def describe(self):
        return {"kind": self.name, "sense": self.sense, "field_eps": self.field.eps}


@dataclass
class UniformRandom(Strategy):
    name = "uniform_random"

    def choose(self, game, X, T, points, dy, dtau, draws):
        return np.minimum((draws * dy.shape[0]).astype(np.int64), dy.shape[0] - 1)


# -- transcripts ------------------------------------------------------------


@dataclass
class GameTranscript:
    states: np.ndarray  # (tau + 1, N + 1) rows [x, t]
    tosses: list  # "I" / "II" per round
    tau: int
    payoff: float
    seed: int
    run: int = 0

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "run": self.run,
            "tau": self.tau,
            "payoff": self.payoff,
            "tosses": self.tosses,
            "states": [[float(v) for v in row] for row in self.states],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))


@dataclass
class BatchResult:
    game: Game
    x0: np.ndarray
    t0: float
    seed: int
    payoffs: np.ndarray
    taus: np.ndarray
    tosses: np.ndarray  # (R, L) bool, True when Player I wins
    states: Optional[np.ndarray] = None  # (R, L + 1, N + 1), NaN after stopping

    @property
    def runs(self) -> int:
        return len(self.payoffs)

    def transcript(self, i: int) -> GameTranscript:
        if self.states is None:
            raise ValueError("batch was simulated without recording states")
        tau = int(self.taus[i])
        return GameTranscript(
            self.states[i, : tau + 1].copy(),
            ["I" if w else "II" for w in self.tosses[i, :tau]],
            tau,
            float(self.payoffs[i]),
            self.seed,
            i,
        )

    def transcripts(self) -> list:
        return [self.transcript(i) for i in range(self.runs)]


def _streams(seed, runs: int):
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [[np.random.default_rng(s) for s in child.spawn(3)] for child in root.spawn(runs)]


def simulate_batch(
    game: Game,
    x0,
    t0: float,
    S_I: Strategy,
    S_II: Strategy,
    runs: int,
    seed: int = 0,
    record: bool = True,
) -> BatchResult:
    """Play ``runs`` independent games from ``(x0, t0)`` until the token reaches the strip."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if game.classify(x0[None, :], t0)[0] != PointClass.INTERIOR:
        raise ValueError(f"start state ({x0.tolist()}, {t0}) is not interior")
    if runs < 1:
        raise ValueError("runs must be >= 1")
    L = int(math.floor(game.stopping_bound(t0))) + 1
    streams = _streams(seed, runs)
    toss = np.array([s[0].random(L) for s in streams]) < 0.5
    draws_I = np.array([s[1].random(L) for s in streams])
    draws_II = np.array([s[2].random(L) for s in streams])

    N = x0.size
    X = np.tile(x0, (runs, 1))
    T = np.full(runs, float(t0))
    taus = np.zeros(runs, dtype=np.int64)
    active = np.ones(runs, dtype=bool)
    states = None
    if record:
        states = np.full((runs, L + 1, N + 1), np.nan)
        states[:, 0, :N], states[:, 0, N] = X, T
    fixed = game.displacements(x0, t0) if game.family.homogeneous else None

    for r in range(L):
        live = np.flatnonzero(active)
        if live.size == 0:
            break
        for player, strat, draws, wins in ((1, S_I, draws_I, True), (2, S_II, draws_II, False)):
            sel = live[toss[live, r] == wins]
            if sel.size == 0:
                continue
            if fixed is not None:
                pts, dy, dtau = fixed
                idx = strat.choose(game, X[sel], T[sel], pts, dy, dtau, draws[sel, r])
                X[sel] += dy[idx]
                T[sel] += dtau[idx]
            else:
                for i in sel:
                    pts, dy, dtau = game.displacements(X[i], T[i])
                    if len(pts) == 0:
                        raise AxiomViolation("empty sampled set")
                    j = strat.choose(game, X[i:i + 1], T[i:i + 1], pts, dy, dtau, draws[i:i + 1, r])[0]
                    X[i] += dy[j]
                    T[i] += dtau[j]
        # accumulated offsets that should cancel exactly leave |t| ~ 1e-17
        T[live] = np.where(np.abs(T[live]) <= TIME_SNAP, 0.0, T[live])
        if record:
            states[live, r + 1, :N], states[live, r + 1, N] = X[live], T[live]
        cls = game.classify(X[live], T[live])
        if np.any(cls == PointClass.OUTSIDE):
            raise RuntimeError("a move left Omega_T and the strip; the family violates the box axiom")
        stop = live[cls == PointClass.BOUNDARY_STRIP]
        taus[stop] = r + 1
        active[stop] = False
    if active.any():
        raise RuntimeError("games did not stop within the stopping bound")
    return BatchResult(game, x0, float(t0), int(seed) if not isinstance(seed, np.random.SeedSequence) else -1,
                       game.payoff(X), taus, toss, states)


def simulate_game(game: Game, x0, t0: float, S_I: Strategy, S_II: Strategy, seed: int = 0) -> GameTranscript:
    return simulate_batch(game, x0, t0, S_I, S_II, 1, seed).transcript(0)


def step(game: Game, state, winner: str, strategy: Strategy, rng: np.random.Generator):
    """One round: ``winner`` ('I' or 'II') moves with ``strategy``; returns ``(x', t')``."""
    x, t = np.atleast_1d(np.asarray(state[0], dtype=float)), float(state[1])
    if winner not in ("I", "II"):
        raise ValueError("winner must be 'I' or 'II'")
    if game.classify(x[None, :], t)[0] != PointClass.INTERIOR:
        raise ValueError("step needs an interior state")
    pts, dy, dtau = game.displacements(x, t)
    if len(pts) == 0:
        raise AxiomViolation("empty sampled set")
    j = int(strategy.choose(game, x[None, :], np.array([t]), pts, dy, dtau, np.array([rng.random()]))[0])
    return x + dy[j], t + float(dtau[j])


@dataclass(frozen=True)
class ValueEstimate:
    mean: float
    se: float
    runs: int
    seed: int

    def within(self, target: float, k: float = 3.0) -> bool:
        return abs(self.mean - target) <= k * self.se


def estimate(payoffs: np.ndarray, seed: int) -> ValueEstimate:
    payoffs = np.asarray(payoffs, dtype=float)
    se = float(payoffs.std(ddof=1) / math.sqrt(payoffs.size)) if payoffs.size > 1 else 0.0
    return ValueEstimate(float(payoffs.mean()), se, int(payoffs.size), int(seed))


def mc_value(game: Game, x0, t0: float, S_I: Strategy, S_II: Strategy, runs: int, seed: int = 0) -> ValueEstimate:
    """Mean payoff and standard error (sample stdev / sqrt(runs)) over seeded runs."""
    batch = simulate_batch(game, x0, t0, S_I, S_II, runs, seed, record=False)
    return estimate(batch.payoffs, seed)


# -- checks and statistics --------------------------------------------------


@dataclass
class TranscriptCheck:
    membership_violations: int = 0
    time_violations: int = 0
    bound_violations: int = 0
    final_state_violations: int = 0
    transitions: int = 0
    examples: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (self.membership_violations or self.time_violations
                    or self.bound_violations or self.final_state_violations)


def verify_batch(batch: BatchResult, tol: float = 1e-9) -> TranscriptCheck:
    """Re-check every recorded transition against the sampled move set.

    The unscaled move ``(y, s)`` is recovered from each transition and looked
    up in the sampled set of the state it left from.
    """
    if batch.states is None:
        raise ValueError("batch has no recorded states")
    game = batch.game
    c, eps = game.c, game.eps
    out = TranscriptCheck()
    N = batch.x0.size
    bound = game.stopping_bound(batch.t0)
    out.bound_violations = int(np.sum(batch.taus >= bound))
    R, L1, _ = batch.states.shape
    r = np.arange(L1 - 1)
    valid = r[None, :] < batch.taus[:, None]
    a = batch.states[:, :-1][valid]
    b = batch.states[:, 1:][valid]
    out.transitions = int(valid.sum())
    y = (b[:, :N] - a[:, :N]) / eps
    s = ((b[:, N] - a[:, N]) / eps**2 + (c + 1) / 2) * c / (1 - c)
    out.time_violations = int(np.sum(b[:, N] > a[:, N] - c * eps**2 + tol))
    moves = np.column_stack([y, s])
    if game.family.homogeneous:
        tree = cKDTree(game.sampled(batch.x0, batch.t0).points)
        dist, _ = tree.query(moves)
    else:
        dist = np.array([cKDTree(game.sampled(p[:N], p[N]).points).query(m)[0] for p, m in zip(a, moves)])
    bad = dist > 1e-7
    out.membership_violations = int(bad.sum())
    if bad.any():
        out.examples.append(("membership", moves[np.argmax(bad)].tolist()))
    last = batch.states[np.arange(R), batch.taus]
    cls = game.classify(last[:, :N], last[:, N])
    out.final_state_violations = int(np.sum(cls != PointClass.BOUNDARY_STRIP))
    if valid.any():
        mid_cls = game.classify(a[:, :N], a[:, N])
        out.final_state_violations += int(np.sum(mid_cls != PointClass.INTERIOR))
    return out


def stopping_time_stats(transcripts: Sequence[GameTranscript], c: float, eps: float) -> dict:
    """Stopping-time summary; ``violations`` counts runs with ``tau >= t0/(c eps^2) + 1``."""
    if len(transcripts) == 0:
        raise ValueError("no transcripts")
    taus = np.array([tr.tau for tr in transcripts])
    bounds = np.array([tr.states[0, -1] / (c * eps**2) + 1 for tr in transcripts])
    return {
        "min": int(taus.min()),
        "max": int(taus.max()),
        "mean": float(taus.mean()),
        "bound": float(bounds.max()),
        "violations": int(np.sum(taus >= bounds)),
    }


# -- export -----------------------------------------------------------------


def write_jsonl(transcripts: Sequence[GameTranscript], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for tr in transcripts:
            fh.write(tr.to_json() + "\n")
    return path


def append_ledger(path, experiment_id: str, est: ValueEstimate, extra: Optional[dict] = None) -> Path:
    """Append one estimate row to a CSV results ledger (header written once)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    extra = extra or {}
    cols = ["experiment", "mean", "se", "runs", "seed"] + sorted(extra)
    new = not path.exists()
    with open(path, "a", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        if new:
            w.writerow(cols)
        w.writerow([experiment_id, format(est.mean, ".17g"), format(est.se, ".17g"), est.runs, est.seed]
                   + [extra[k] for k in sorted(extra)])
    return path
