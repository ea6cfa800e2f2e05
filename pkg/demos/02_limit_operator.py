# The limit operator and how the one-step average approaches it.
#
#   G(M, v, s) = K(I(v)) s - 1/2 <M J(v), J(v)>
#
# J(v) is the move that decreases <v, y> the most and I(v) its time
# coordinate. For the ball family this has a closed form.

import numpy as np

from towgame.limit_operator import (
    OperatorArgs,
    QuadraticProbe,
    ball_closed_form,
    consistency_residual,
    g_eval,
    g_lower,
    g_upper,
    standard_probes,
)
from towgame.movement_sets import FamilySpec, extremal_data

ball = FamilySpec.ball(0.5, 0.5)
par = FamilySpec.paraboloid(0.5, 0.5)

args = OperatorArgs.make(np.eye(2), (1.0, 0.0), 2.0)
print("G =", g_eval(ball, args), " closed form =", ball_closed_form(ball, args))
ex = extremal_data(ball, (0, 0), 0.5, (1.0, 0.0))
print("J =", ex.J, "I =", ex.I, "K =", ex.K)

# at v = 0 the operator jumps; the envelopes bracket it
for fam in (ball, par):
    a = OperatorArgs.make(-np.eye(2), (0.0, 0.0), 0.3)
    print(f"{fam.kind:10s} G_* = {g_lower(fam, a):+.4f}  G = {g_eval(fam, a):+.4f}  G^* = {g_upper(fam, a):+.4f}")

# consistency: (sup + inf)/2 - phi  ~  -eps^2 G(D^2 phi, grad phi, phi_t)
p = QuadraticProbe(np.eye(2), (0, 0), 0.0, 0.0, (0, 0), 0.5)
for eps in (0.2, 0.1, 0.05):
    r = consistency_residual(ball, p, (1.0, 0.0), 0.5, eps)
    print(f"eps={eps}: dpp side {r.dpp_side:.3e}, operator side {r.operator_side:.3e}")

print("normalized gaps gap/eps^2 on random probes:")
for i, p in enumerate(standard_probes(2, 4)):
    gaps = [consistency_residual(ball, p, p.x0, p.t0, e).gap / e**2 for e in (0.2, 0.1, 0.05, 0.025)]
    print(f"  probe {i}:", "  ".join(f"{g:.2e}" for g in gaps))
