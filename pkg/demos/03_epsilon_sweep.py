# Halving eps: do the game values settle down?
#
# No closed-form limit exists for |x|, so we look at successive sup-norm
# differences on one node set. A linear payoff is solved exactly at every eps.

from towgame import payoffs
from towgame.convergence_lab import SweepConfig, boundary_agreement_check, epsilon_sweep
from towgame.dpp_core import DomainSpec
from towgame.movement_sets import FamilySpec

disk = DomainSpec.disk((0.0, 0.0), 1.0, 1.0, 0.2)
ball = FamilySpec.ball(0.5, 0.5)

lin = epsilon_sweep(SweepConfig(disk, ball, payoffs.linear((0.5, -1.0), 0.2), (0.2, 0.1), resolution=3))
print("linear payoff, d_k:", lin.differences)

cfg = SweepConfig(disk, ball, payoffs.norm(2), (0.2, 0.14, 0.1), resolution=3, threads=3)
rep, fields = epsilon_sweep(cfg, keep_fields=True)
print("|x|, d_k:", ["%.4f" % d for d in rep.differences], rep.verdict)
print("runtimes:", ["%.1f s" % t for t in rep.runtimes])
for e, table in rep.modulus.items():
    print(f"  modulus at eps={float(e):.2f}:", {r: round(w, 4) for r, w in table.items()})

# near the strip the value stays close to the payoff
for e, fld in zip(cfg.eps_list, fields):
    b = boundary_agreement_check(fld, cfg.payoff, 0.1)
    print(f"eps={e}: max |u - F| within 0.1 of the strip = {b.max_deviation:.4f} at {b.worst_point}")
