# Solve the game on the unit disk, then play it.
#
# The payoff is f(x) = |x|. Players move a token by eps*y in space and lose
# between c*eps^2 and eps^2 of time per round; a fair coin picks the mover.

import numpy as np

from towgame import payoffs
from towgame.dpp_core import DomainSpec, GridSpec, dpp_sweep, interpolate
from towgame.game_engine import Game, GreedyOnField, UniformRandom, mc_value, simulate_game
from towgame.movement_sets import FamilySpec

disk = DomainSpec.disk((0.0, 0.0), 1.0, 1.0, 0.2)  # Omega = unit disk, T = 1, eta = 0.2
fam = FamilySpec.ball(0.5, 0.5)                     # unit-scale moves: ball of radius 0.5, c = 0.5
f = payoffs.norm(2)
eps = 0.2

fld = dpp_sweep(disk, fam, f, eps, GridSpec(eps / 8, fam.c * eps**2 / 4), resolution=2)
print("nodes x slices:", fld.meta["interior_nodes"], "x", fld.meta["slices"], f"({fld.meta['runtime_s']:.1f} s)")

# value along the x1 axis at t = 1; |x| is convex so u sits above the payoff
for x1 in np.linspace(-0.8, 0.8, 5):
    print(f"  u({x1:+.1f}, 0, 1) = {interpolate(fld, (x1, 0.0), 1.0):.4f}   f = {abs(x1):.4f}")

# one play with both players greedy on the solved field
game = Game(disk, fam, f, eps, 2)
tr = simulate_game(game, (0.3, 0.2), 0.5, GreedyOnField(fld, "max"), GreedyOnField(fld, "min"), seed=1)
print("tosses:", "".join("1" if w == "I" else "2" for w in tr.tosses), "tau =", tr.tau, "payoff =", round(tr.payoff, 4))

# Monte Carlo against the DPP value at a grid node
k, idx = 120, (40, 45)
x0, t0 = fld.lattice.coords[idx], fld.times[k]
u = fld.values[(k,) + idx]
est = mc_value(game, x0, t0, GreedyOnField(fld, "max"), GreedyOnField(fld, "min"), 4000, seed=0)
print(f"u = {u:.4f}, MC = {est.mean:.4f} +- {est.se:.4f}")

# a lazy Player II only helps Player I
lazy = mc_value(game, x0, t0, GreedyOnField(fld, "max"), UniformRandom(), 4000, seed=0)
print(f"against a random opponent: {lazy.mean:.4f} +- {lazy.se:.4f}")
