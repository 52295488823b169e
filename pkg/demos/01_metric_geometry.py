"""Tour of the projective metric on density-like states.

Shows the order coefficient m(x, y) = max{lam : lam*y <= x}, the bounded
metric it induces, the three independent ways of computing it, and the
disconnected-component geometry of the state space.

Run:  python3 demos/01_metric_geometry.py
"""

import numpy as np

from hennion_lab import (
    State,
    classify_component,
    hennion_distance,
    line_decomposition,
    m_quantity,
    m_quantity_bisection,
    m_quantity_inf_sampling,
    make_algebra,
    norm,
    random_state,
)

alg = make_algebra([2], [1.0])  # 2x2 matrices with the normalized trace
rng = np.random.default_rng(7)


def show(title):
    print(f"\n=== {title} ===")


show("order coefficient of a commuting diagonal pair")
# the family X_eta = 2/(1+eta) diag(1, eta) is norm-convergent as eta -> 0
# but metric-divergent; the product of order coefficients is eta'/eta.
def x_eta(eta):
    return State.from_element(alg.element([np.diag([1.0, eta])]) * (2 / (1 + eta)))

a, b = x_eta(0.5), x_eta(0.25)
print("m(X_.5, X_.25)         =", m_quantity(a, b).value, " (exact 5/6)")
print("product of both orders =", m_quantity(a, b).value * m_quantity(b, a).value, " (exact 1/2)")
print("distance               =", hennion_distance(a, b), " (exact 1/3)")

show("three independent computation paths agree")
x = random_state(alg, "full", rng)
y = random_state(alg, "full", rng)
print("eigenpencil :", m_quantity(x, y).value)
print("bisection   :", m_quantity_bisection(x, y, tol=1e-12).value)
print("sampled inf :", m_quantity_inf_sampling(x, y, 20000, rng).value, "(upper estimate)")

show("line-segment reconstruction of the distance")
xs = State.from_element(alg.element([np.diag([1.5, 0.5])]))
ys = State.from_element(alg.element([np.diag([0.5, 1.5])]))
ld = line_decomposition(xs, ys)
print(f"t_plus = {ld.t_plus:.6f}, t_minus = {ld.t_minus:.6f}")
print(f"endpoints give d = {ld.distance:.6f}; order formula gives {hennion_distance(xs, ys):.6f}")
print(f"convex weights r = {ld.r:.4f}, s = {ld.s:.4f}")

show("the metric dominates half the trace-norm distance")
worst = 0.0
for _ in range(2000):
    u = random_state(alg, "full", rng)
    v = random_state(alg, "full", rng)
    worst = max(worst, 0.5 * norm(alg, u.element - v.element, "one") - hennion_distance(u, v))
print("largest violation of 0.5*||x-y||_1 <= d(x,y):", max(worst, 0.0))

show("invertible and singular states live in different components")
inv = random_state(alg, "full", rng)
pure = random_state(alg, "pure", rng)
print("invertible vs invertible :", classify_component(inv, random_state(alg, "full", rng)))
print("invertible vs pure       :", classify_component(inv, pure), " distance =", hennion_distance(inv, pure))

show("norm-convergent but metric-divergent family")
print("eta pairs at ratio 3 keep distance >= 1/2:")
for k in range(1, 6):
    eta = 3.0**-k
    d = hennion_distance(x_eta(eta), x_eta(eta / 3))
    print(f"  d(X_{eta:.4f}, X_{eta/3:.4f}) = {d:.6f}")
limit = State.from_element(alg.element([np.diag([2.0, 0.0])]))
print("distance to the rank-one norm-limit stays 1:", hennion_distance(x_eta(1e-5), limit))
