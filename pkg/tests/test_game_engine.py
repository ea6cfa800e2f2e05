import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from towgame import payoffs
from towgame.dpp_core import DomainSpec, GridSpec, dpp_sweep, field_from_function
from towgame.game_engine import (
    Game,
    GreedyOnField,
    PullToward,
    UniformRandom,
    append_ledger,
    estimate,
    mc_value,
    simulate_batch,
    simulate_game,
    step,
    stopping_time_stats,
    verify_batch,
    write_jsonl,
)
from towgame.movement_sets import FamilySpec, extremal_data

# Regression bound for E|x_tau - x0|^2 <= C (t0 + eps^2) under PullToward(x0).
# Fitted once over ball/paraboloid families, eps in {0.2, 0.1, 0.05},
# t0 in {0.05, 0.2, 0.5, 1}: the largest ratio seen was 1.149.
MARTINGALE_C = 1.25


@pytest.fixture
def game(disk, ball, norm2):
    return Game(disk, ball, norm2, 0.1, 4)


def test_pull_toward_self_stays_put(game):
    rng = np.random.default_rng(0)
    x, t = step(game, ((0.2, -0.1), 0.5), "I", PullToward((0.2, -0.1)), rng)
    assert np.allclose(x, (0.2, -0.1), atol=1e-15)
    # staying put with the largest s costs the least time: -c eps^2
    assert t == pytest.approx(0.5 - 0.5 * 0.01, abs=1e-15)


def test_uniform_on_single_point_is_deterministic(disk):
    fam = FamilySpec.tabulated([[0.0, 0.0, 0.0]], 0.5, 2)
    game = Game(disk, fam, payoffs.norm(2), 0.1)
    outs = {step(game, ((0.0, 0.0), 0.5), "II", UniformRandom(), np.random.default_rng(s))[1] for s in range(10)}
    assert len(outs) == 1


@pytest.mark.parametrize("v", [(1.0, 0.0), (0.3, -0.8), (-1.0, -1.0)])
def test_greedy_on_affine_field_follows_gradient(disk, ball, v):
    v = np.asarray(v)
    f = payoffs.linear(v, 0.0)
    fld = field_from_function(disk, ball, f, 0.1, GridSpec(0.05, 0.005), lambda X, t: X @ v)
    game = Game(disk, ball, f, 0.1, 8)
    x, _ = step(game, ((0.0, 0.0), 0.5), "I", GreedyOnField(fld, "max"), np.random.default_rng(0))
    y = x / 0.1
    pts = game.sampled((0.0, 0.0), 0.5).points
    assert y @ v == pytest.approx((pts[:, :2] @ v).max(), abs=1e-12)
    J = extremal_data(ball, (0.0, 0.0), 0.5, v, 8).J
    assert np.linalg.norm(y + J) <= 0.5 * math.pi / 8 + 1e-12


def test_step_preconditions(game):
    with pytest.raises(ValueError):
        step(game, ((0.0, 0.0), 0.0), "I", UniformRandom(), np.random.default_rng(0))
    with pytest.raises(ValueError):
        step(game, ((0.0, 0.0), 0.5), "III", UniformRandom(), np.random.default_rng(0))


def test_stopping_bound(game):
    b = simulate_batch(game, (0.0, 0.0), 1.0, UniformRandom(), PullToward((0.0, 0.0)), 300, seed=3)
    assert b.taus.max() <= 200
    stats = stopping_time_stats(b.transcripts(), 0.5, 0.1)
    assert stats["bound"] == pytest.approx(201) and stats["violations"] == 0


def test_constant_payoff(disk, ball):
    game = Game(disk, ball, payoffs.constant(3.0, 2), 0.2)
    for S in (UniformRandom(), PullToward((1.0, 1.0))):
        est = mc_value(game, (0.1, 0.1), 0.6, S, UniformRandom(), 200, seed=5)
        assert est.mean == 3.0 and est.se == 0.0


def test_rejects_non_interior_start(game):
    with pytest.raises(ValueError):
        simulate_game(game, (0.0, 0.0), 0.0, UniformRandom(), UniformRandom())
    with pytest.raises(ValueError):
        simulate_game(game, (2.0, 0.0), 0.5, UniformRandom(), UniformRandom())


def test_forced_unit_time_loss():
    # s = -c/2 costs exactly eps^2 per round
    dom = DomainSpec.disk((0.0, 0.0), 3.0, 1.0, 0.2)
    fam = FamilySpec.tabulated([[0.5, 0.0, -0.25], [-0.5, 0.0, -0.25], [0.0, 0.5, -0.25]], 0.5, 2)
    eps = 0.125
    game = Game(dom, fam, payoffs.norm(2), eps)
    b = simulate_batch(game, (0.0, 0.0), 0.3, UniformRandom(), UniformRandom(), 50, seed=1)
    assert np.all(b.taus == math.ceil(0.3 / eps**2))


def test_short_horizon_stops_after_one_round(game):
    b = simulate_batch(game, (0.0, 0.0), 0.004, UniformRandom(), UniformRandom(), 100, seed=2)
    assert np.all(b.taus == 1)


def test_determinism(tmp_path, game):
    a = simulate_batch(game, (0.1, 0.0), 0.4, UniformRandom(), PullToward((0.5, 0.5)), 40, seed=11)
    b = simulate_batch(game, (0.1, 0.0), 0.4, UniformRandom(), PullToward((0.5, 0.5)), 40, seed=11)
    pa = write_jsonl(a.transcripts(), tmp_path / "a.jsonl")
    pb = write_jsonl(b.transcripts(), tmp_path / "b.jsonl")
    assert pa.read_bytes() == pb.read_bytes()
    c = simulate_batch(game, (0.1, 0.0), 0.4, UniformRandom(), PullToward((0.5, 0.5)), 40, seed=12)
    assert not np.array_equal(a.payoffs, c.payoffs)


def test_strategy_change_keeps_tosses(game):
    a = simulate_batch(game, (0.0, 0.0), 0.3, UniformRandom(), UniformRandom(), 30, seed=4)
    b = simulate_batch(game, (0.0, 0.0), 0.3, PullToward((1, 0)), UniformRandom(), 30, seed=4)
    n = min(a.tosses.shape[1], b.tosses.shape[1])
    assert np.array_equal(a.tosses[:, :n], b.tosses[:, :n])


def test_single_run_matches_batch_member(game):
    tr = simulate_game(game, (0.0, 0.2), 0.3, UniformRandom(), UniformRandom(), seed=9)
    b = simulate_batch(game, (0.0, 0.2), 0.3, UniformRandom(), UniformRandom(), 1, seed=9)
    assert tr.to_json() == b.transcript(0).to_json()
    d = json.loads(tr.to_json())
    assert d["tau"] == len(d["tosses"]) == len(d["states"]) - 1


@settings(max_examples=15, deadline=None)
@given(
    kind=st.sampled_from(["ball", "paraboloid"]),
    rho=st.floats(0.2, 0.9),
    c=st.floats(0.2, 0.8),
    eps=st.sampled_from([0.2, 0.1]),
    t0=st.floats(0.01, 0.6),
    seed=st.integers(0, 2**32),
)
def test_transcripts_are_valid(kind, rho, c, eps, t0, seed):
    dom = DomainSpec.disk((0.0, 0.0), 1.0, 1.0, 0.2)
    fam = getattr(FamilySpec, kind)(rho, c, 2)
    game = Game(dom, fam, payoffs.norm(2), eps, 3)
    b = simulate_batch(game, (0.3, -0.2), t0, UniformRandom(), PullToward((-1.0, 0.4)), 40, seed)
    check = verify_batch(b)
    assert check.ok, check
    assert check.transitions == int(b.taus.sum())


def test_verify_batch_catches_tampering(game):
    b = simulate_batch(game, (0.0, 0.0), 0.3, UniformRandom(), UniformRandom(), 5, seed=0)
    b.states[0, 1, 0] += 0.013
    assert verify_batch(b).membership_violations >= 1


def test_linear_payoff_mc_matches_dpp(disk, ball):
    v = np.array([0.6, -0.3])
    f = payoffs.linear(v, 0.1)
    fld = dpp_sweep(disk, ball, f, 0.2, GridSpec(0.1, 0.02), resolution=4)
    game = Game(disk, ball, f, 0.2, 4)
    x0 = np.array([0.2, 0.1])
    est = mc_value(game, x0, 0.5, GreedyOnField(fld, "max"), GreedyOnField(fld, "min"), 1000, seed=21)
    assert est.within(float(x0 @ v + 0.1))


def test_suboptimal_opponent_helps(disk, ball, norm2):
    fld = dpp_sweep(disk, ball, norm2, 0.2, GridSpec(0.1, 0.02), resolution=4)
    game = Game(disk, ball, norm2, 0.2, 4)
    x0, t0 = np.array([0.1, 0.0]), 0.5
    u = float(fld.evaluate(x0[None, :], np.array([t0]))[0])
    est = mc_value(game, x0, t0, GreedyOnField(fld, "max"), UniformRandom(), 2000, seed=8)
    assert est.mean >= u - 3 * est.se


@pytest.mark.parametrize("fam", [FamilySpec.ball(0.5, 0.5), FamilySpec.paraboloid(0.5, 0.5)], ids=["ball", "paraboloid"])
@pytest.mark.parametrize("eps,t0", [(0.2, 0.2), (0.1, 0.5)])
def test_martingale_regression_bound(disk, fam, eps, t0):
    game = Game(disk, fam, payoffs.norm(2), eps, 4)
    b = simulate_batch(game, (0.0, 0.0), t0, PullToward((0.0, 0.0)), PullToward((1.0, 0.0)), 500, seed=2,
                       record=False)
    assert np.mean(b.payoffs**2) <= MARTINGALE_C * (t0 + eps**2)


def test_estimate_statistics():
    est = estimate(np.array([1.0, 2.0, 3.0, 4.0]), seed=0)
    assert est.mean == 2.5
    assert est.se == pytest.approx(np.std([1, 2, 3, 4], ddof=1) / 2)
    assert estimate(np.array([7.0]), 0).se == 0.0


def test_exports(tmp_path, game):
    b = simulate_batch(game, (0.0, 0.0), 0.2, UniformRandom(), UniformRandom(), 3, seed=0)
    path = write_jsonl(b.transcripts(), tmp_path / "runs.jsonl")
    lines = path.read_text().splitlines()
    assert len(lines) == 3 and all(json.loads(line)["seed"] == 0 for line in lines)
    est = estimate(b.payoffs, 0)
    ledger = tmp_path / "ledger.csv"
    append_ledger(ledger, "exp-a", est, {"eps": 0.1})
    append_ledger(ledger, "exp-b", est, {"eps": 0.1})
    rows = ledger.read_text().splitlines()
    assert rows[0] == "experiment,mean,se,runs,seed,eps"
    assert [r.split(",")[0] for r in rows[1:]] == ["exp-a", "exp-b"]
