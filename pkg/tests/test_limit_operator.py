import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from towgame import payoffs
from towgame.dpp_core import DomainSpec, GridSpec, dpp_sweep, field_from_function
from towgame.limit_operator import (
    OperatorArgs,
    QuadraticProbe,
    ball_closed_form,
    consistency_residual,
    g_eval,
    g_lower,
    g_upper,
    standard_probes,
    viscosity_probe,
)
from towgame.movement_sets import FamilySpec

BALL = FamilySpec.ball(0.5, 0.5)
PARA = FamilySpec.paraboloid(0.5, 0.5)


def random_args(rng, dim=2, zero_v=False):
    A = rng.normal(size=(dim, dim))
    v = np.zeros(dim) if zero_v else rng.normal(size=dim)
    return OperatorArgs.make(0.5 * (A + A.T), v, float(rng.normal()))


def test_g_eval_example():
    assert g_eval(BALL, OperatorArgs.make(np.eye(2), (1, 0), 2.0)) == pytest.approx(1.375, abs=1e-12)


@pytest.mark.parametrize("fam", [BALL, PARA], ids=["ball", "paraboloid"])
def test_g_eval_zero(fam):
    assert g_eval(fam, OperatorArgs.make(np.eye(2), (0, 0), 0.0)) == 0.0


@pytest.mark.parametrize(
    "rho,expected",
    [
        # rho <= c/2: (1-c)/c rho |s| + (c+1)/2 s
        (0.2, 0.2 + 0.75),
        # the ball's time extent is capped at c/2 by the box, so I_hat = -c/2
        (0.5, 0.25 + 0.75),
    ],
)
def test_g_eval_degenerate_ball(rho, expected):
    fam = FamilySpec.ball(rho, 0.5)
    assert g_eval(fam, OperatorArgs.make(np.eye(2), (0, 0), 1.0)) == pytest.approx(expected, abs=1e-12)


def test_paraboloid_degenerate_branch():
    # I_hat = 0 for s > 0 and c/2 for s < 0
    assert g_eval(PARA, OperatorArgs.make(np.eye(2), (0, 0), 1.0)) == pytest.approx(0.75)
    assert g_eval(PARA, OperatorArgs.make(np.eye(2), (0, 0), -1.0)) == pytest.approx(-0.5)


def test_envelopes_off_degenerate_set():
    args = OperatorArgs.make(np.diag([1.0, -2.0]), (1, 0), 0.3)
    g = g_eval(BALL, args)
    assert g_upper(BALL, args) == g == g_lower(BALL, args)


def test_envelopes_example():
    args = OperatorArgs.make(-np.eye(2), (0, 0), 0.0)
    assert g_upper(BALL, args) == pytest.approx(0.125, abs=1e-12)
    assert g_lower(BALL, args) == 0.0


@pytest.mark.parametrize("fam", [BALL, PARA, FamilySpec.ball(0.8, 0.3)], ids=["ball", "paraboloid", "wide-ball"])
def test_envelope_ordering(fam):
    rng = np.random.default_rng(1)
    for i in range(100):
        args = random_args(rng, zero_v=i % 2 == 0)
        g, gu, gl = g_eval(fam, args), g_upper(fam, args), g_lower(fam, args)
        assert gl - 2 / 16 <= g <= gu + 2 / 16


def test_closed_form_ball():
    rng = np.random.default_rng(7)
    for _ in range(200):
        rho, c = rng.uniform(0.1, 0.95), rng.uniform(0.1, 0.9)
        fam = FamilySpec.ball(rho, c)
        args = random_args(rng)
        assert abs(g_eval(fam, args) - ball_closed_form(fam, args)) <= 1e-12


@settings(max_examples=40, deadline=None)
@given(lam=st.floats(1e-3, 1e3), seed=st.integers(0, 10**6), kind=st.sampled_from(["ball", "paraboloid"]))
def test_homogeneity_in_gradient(lam, seed, kind):
    fam = BALL if kind == "ball" else PARA
    args = random_args(np.random.default_rng(seed))
    scaled = OperatorArgs.make(args.M, lam * args.v, args.s)
    assert g_eval(fam, scaled) == pytest.approx(g_eval(fam, args), abs=1e-12)


@pytest.mark.parametrize("fam", [BALL, PARA], ids=["ball", "paraboloid"])
def test_envelopes_monotone_in_resolution(fam):
    rng = np.random.default_rng(3)
    for _ in range(20):
        args = random_args(rng, zero_v=True)
        ups = [g_upper(fam, args, r) for r in (4, 8, 16)]
        lows = [g_lower(fam, args, r) for r in (4, 8, 16)]
        assert ups == sorted(ups) and lows == sorted(lows, reverse=True)


def test_operator_args_validation():
    with pytest.raises(ValueError):
        OperatorArgs.make([[1.0, 2.0], [0.0, 1.0]], (1, 0), 0.0)
    with pytest.raises(ValueError):
        OperatorArgs.make(np.eye(3), (1, 0), 0.0)


def test_probe_derivatives():
    p = QuadraticProbe(np.diag([2.0, -1.0]), (0.5, 0.1), 0.3, 1.0, (0.2, 0.2), 0.5, q=0.4)
    x = np.array([0.3, 0.1])
    h = 1e-6
    num = [(p([x + h * e], 0.6)[0] - p([x - h * e], 0.6)[0]) / (2 * h) for e in np.eye(2)]
    assert np.allclose(num, p.gradient(x), atol=1e-8)
    assert (p([x], 0.6 + h)[0] - p([x], 0.6 - h)[0]) / (2 * h) == pytest.approx(p.time_derivative(0.6), abs=1e-8)


@pytest.mark.parametrize("eps", [0.2, 0.1, 0.05])
def test_consistency_example(eps):
    p = QuadraticProbe(np.eye(2), (0, 0), 0.0, 0.0, (0, 0), 0.5)
    r = consistency_residual(BALL, p, (1.0, 0.0), 0.5, eps)
    assert r.dpp_side == pytest.approx(0.125 * eps**2, abs=1e-14)
    assert r.operator_side == pytest.approx(0.125 * eps**2, abs=1e-14)
    assert r.gap <= 1e-14


@pytest.mark.parametrize("fam", [BALL, PARA], ids=["ball", "paraboloid"])
def test_consistency_affine(fam):
    p = QuadraticProbe(np.zeros((2, 2)), (0.3, -0.4), 0.0, 1.0, (0, 0), 0.5)
    r = consistency_residual(fam, p, (0.1, 0.1), 0.5, 0.1)
    assert abs(r.dpp_side) <= 1e-14 and abs(r.operator_side) <= 1e-14


@pytest.mark.parametrize("fam", [BALL, PARA], ids=["ball", "paraboloid"])
def test_consistency_order(fam):
    for p in standard_probes(2, 8, seed=0):
        gaps = [consistency_residual(fam, p, p.x0, p.t0, e).gap / e**2 for e in (0.2, 0.1, 0.05, 0.025)]
        assert all(b <= a for a, b in zip(gaps, gaps[1:])), gaps
        assert gaps[-1] <= 0.1 * gaps[0]


@pytest.mark.parametrize("seed", range(5))
def test_consistency_bracket_at_vanishing_gradient(seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(2, 2))
    p = QuadraticProbe(0.5 * (A + A.T), (0, 0), float(rng.normal()), 0.0, (0, 0), 0.5)
    for fam in (BALL, PARA):
        r = consistency_residual(fam, p, (0, 0), 0.5, 0.1)
        assert r.bracket is not None and r.in_bracket


def test_viscosity_linear_field():
    dom = DomainSpec.disk((0.0, 0.0), 1.0, 1.0, 0.2)
    v = np.array([0.6, 0.8])
    f = payoffs.linear(v)
    fld = field_from_function(dom, BALL, f, 0.1, GridSpec(0.05, 0.005), lambda X, t: X @ v)
    x0 = np.array([0.1, 0.0])
    # negative-definite curvature puts a strict minimum of u - phi at the centre
    p = QuadraticProbe(-np.eye(2), v, 0.0, float(x0 @ v), x0, 0.5, q=-1.0)
    verdict = viscosity_probe(fld, p, window=0.2)
    assert verdict.conclusive and verdict.kind == "min" and verdict.holds
    assert verdict.margin == pytest.approx(0.125, abs=1e-9)
    q = QuadraticProbe(np.eye(2), v, 0.0, float(x0 @ v), x0, 0.5, q=1.0)
    verdict = viscosity_probe(fld, q, window=0.2)
    assert verdict.conclusive and verdict.kind == "max" and verdict.holds


def test_viscosity_affine_probe_is_inconclusive():
    dom = DomainSpec.disk((0.0, 0.0), 1.0, 1.0, 0.2)
    v = np.array([0.6, 0.8])
    fld = field_from_function(dom, BALL, payoffs.linear(v), 0.1, GridSpec(0.05, 0.005), lambda X, t: X @ v)
    p = QuadraticProbe(np.zeros((2, 2)), v, 0.0, 0.0, (0.0, 0.0), 0.5)
    assert not viscosity_probe(fld, p).conclusive


def test_viscosity_on_solved_field():
    dom = DomainSpec.disk((0.0, 0.0), 1.0, 1.0, 0.2)
    fld = dpp_sweep(dom, BALL, payoffs.norm(2), 0.1, GridSpec(0.05, 0.005), resolution=4)
    rng = np.random.default_rng(0)
    verdicts = []
    for i in range(20):
        x0, t0 = rng.uniform(-0.5, 0.5, 2), rng.uniform(0.3, 0.8)
        u0 = float(fld.evaluate(x0[None], np.array([t0]))[0])
        h = 0.05
        g = [(fld.evaluate((x0 + h * e)[None], [t0])[0] - fld.evaluate((x0 - h * e)[None], [t0])[0]) / (2 * h)
             for e in np.eye(2)]
        ut = (fld.evaluate(x0[None], [t0 + 0.02])[0] - fld.evaluate(x0[None], [t0 - 0.02])[0]) / 0.04
        k = rng.uniform(5, 20) * (1 if i % 2 else -1)
        verdicts.append(viscosity_probe(fld, QuadraticProbe(-k * np.eye(2), g, ut, u0, x0, t0, q=-k), window=0.2))
    conclusive = [v for v in verdicts if v.conclusive]
    assert len(conclusive) >= 0.95 * len(verdicts)
    assert sum(v.holds for v in conclusive) >= 0.95 * len(conclusive)
