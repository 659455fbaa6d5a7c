"""Independent cross-check for the section return map of the built-in
four-dimensional reduced system.

Uses scipy's DOP853 at rtol = atol = 1e-12 only; nothing from
filippov_lab's integrator is imported, so the numbers printed here are an
engine-independent reference.  An excursion is chained by hand:

  1. left flight  dx/dt = A x     until x1 rises back to 0
  2. sliding      dx/dt = fS(x)   until x2 falls to 0 (weight reaches zero)

where fS = lam * c + (1 - lam) * A x with lam = x2 / (x2 + 1) for the
built-in coefficients (right first component is identically -1 on x1 = 0).

Run:  python3 tools/oracle_section.py
"""

import math

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

A = np.array(
    [
        [-0.1, 1.0, 0.0, 0.0],
        [-9.0, 0.0, 1.0, 0.0],
        [-4.0, 0.0, 0.0, 1.0],
        [-0.4, 0.0, 0.0, 0.0],
    ]
)
C = np.array([-1.0, 0.4, -0.2, -0.04])

RTOL = 1e-12
ATOL = 1e-12


def left_rhs(t, x):
    return A @ x


def hit_surface(t, x):
    return x[0]


hit_surface.terminal = True
hit_surface.direction = 1.0


def slide_rhs(t, x):
    lam = x[1] / (x[1] + 1.0)
    return lam * C + (1.0 - lam) * (A @ x)


def weight_zero(t, x):
    return x[1]


weight_zero.terminal = True
weight_zero.direction = -1.0


def excursion(theta, scale=1.0):
    z = scale * np.array([0.0, 0.0, math.cos(theta), math.sin(theta)])
    sol1 = solve_ivp(
        left_rhs,
        (0.0, 200.0),
        z,
        method="DOP853",
        rtol=RTOL,
        atol=ATOL,
        events=hit_surface,
        dense_output=False,
    )
    assert sol1.status == 1, f"no surface hit from theta={theta}"
    t1 = sol1.t_events[0][0]
    x1 = sol1.y_events[0][0].copy()
    x1[0] = 0.0
    assert x1[1] > 0.0, f"hit without attracting sliding at theta={theta}"
    sol2 = solve_ivp(
        slide_rhs,
        (0.0, 200.0),
        x1,
        method="DOP853",
        rtol=RTOL,
        atol=ATOL,
        events=weight_zero,
        dense_output=False,
    )
    assert sol2.status == 1, f"no sliding exit from theta={theta}"
    t2 = sol2.t_events[0][0]
    a = sol2.y_events[0][0].copy()
    a[0] = 0.0
    a[1] = 0.0
    theta_out = math.atan2(a[3], a[2])
    if theta_out < 0.0:
        theta_out += 2.0 * math.pi
    return theta_out, t1 + t2, float(np.linalg.norm(a)) / scale


def main():
    print("# golden excursions (theta -> G, T, D)")
    for theta in (2.0, math.pi, 4.0):
        g, t, d = excursion(theta)
        print(f"theta_in = {theta!r}")
        print(f"  G = {g!r}")
        print(f"  T = {t!r}")
        print(f"  D = {d!r}")

    print("# homogeneity check at theta = 2.5 (excursion from 0.5 * zeta)")
    g1, t1, d1 = excursion(2.5, scale=1.0)
    g2, t2, d2 = excursion(2.5, scale=0.5)
    print(f"  G diff = {abs(g1 - g2):.3e}  D rel diff = {abs(d1 - d2) / d1:.3e}")

    print("# fixed points of G on the section")
    lo = math.pi / 2 + 1e-3
    hi = 3 * math.pi / 2 - 1e-3
    grid = np.linspace(lo, hi, 2000)
    vals = []
    for theta in grid:
        try:
            g, _, _ = excursion(theta)
            vals.append(g - theta)
        except AssertionError:
            vals.append(math.nan)
    vals = np.array(vals)
    roots = []
    for i in range(len(grid) - 1):
        a, b = vals[i], vals[i + 1]
        if math.isnan(a) or math.isnan(b) or (a > 0) == (b > 0):
            continue
        root = brentq(
            lambda th: excursion(th)[0] - th, grid[i], grid[i + 1], xtol=1e-13
        )
        roots.append(root)
    for r in roots:
        g, t, d = excursion(r)
        h = 1e-6
        gp = (excursion(r + h)[0] - excursion(r - h)[0]) / (2 * h)
        print(f"theta* = {r!r}   residual = {g - r:.3e}")
        print(f"  D = {d!r}   T = {t!r}   G' = {gp!r}")
    bad = int(np.sum(np.isnan(vals)))
    print(f"# grid points without a return: {bad} / {len(grid)}")


if __name__ == "__main__":
    main()
