"""Reference stepping engine: one smooth or sliding segment at a time.

An embedded Dormand-Prince 5(4) pair with proportional step control
advances the state; accepted steps carry a cubic Hermite interpolant used
to localize events by bisection.  Each driver returns the sample path, the
derivative at every sample, and a status code describing why the segment
ended.  The numba engine in _engine_fast mirrors this logic for affine
pieces; the two must be kept in sync.

Segment status codes are shared between both engines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ConvergenceFailure
from .systems import SIGN_TOL

# status codes (shared with _engine_fast)
HORIZON = 0
SURFACE = 1
CONVERGED = 2
ESCAPED = 3
FAIL = 4
EXIT_LEFT = 5
EXIT_RIGHT = 6
TWOFOLD = 7

# Dormand-Prince 5(4) tableau
_A2 = (1 / 5,)
_A3 = (3 / 40, 9 / 40)
_A4 = (44 / 45, -56 / 15, 32 / 9)
_A5 = (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729)
_A6 = (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656)
_B = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84)
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0
_MAX_SEGMENT_STEPS = 5_000_000
_MAX_BISECT = 200

# arming: surface events fire only once the orbit has been this far from the
# surface, so segments that begin on it do not re-trigger immediately
ARM_FACTOR = 10.0


@dataclass
class EngineParams:
    rel_tol: float
    abs_tol: float
    event_tol: float
    max_step: float
    t_stop: float
    r_converge: float
    r_escape: float


@dataclass
class SegmentOutcome:
    status: int
    times: np.ndarray  # (m,)
    states: np.ndarray  # (m, n)
    derivs: np.ndarray  # (m, n)
    max_norm: float


RHS = Callable[[np.ndarray], np.ndarray]


def hermite_eval(
    t0: float,
    y0: np.ndarray,
    f0: np.ndarray,
    t1: float,
    y1: np.ndarray,
    f1: np.ndarray,
    t: float,
) -> np.ndarray:
    """Cubic Hermite interpolant over one accepted step."""
    h = t1 - t0
    s = (t - t0) / h
    s2 = s * s
    s3 = s2 * s
    return (
        (2 * s3 - 3 * s2 + 1) * y0
        + (s3 - 2 * s2 + s) * h * f0
        + (-2 * s3 + 3 * s2) * y1
        + (s3 - s2) * h * f1
    )


def _bisect_root(
    interp: Callable[[float], np.ndarray],
    gfun: Callable[[np.ndarray], float],
    ta: float,
    tb: float,
    ga: float,
    gb: float,
    gtol: float,
) -> tuple[float, np.ndarray]:
    """Find t* in [ta, tb] with |g(state(t*))| <= gtol by bisection.

    ga and gb must straddle zero (weakly at ta).
    """
    if abs(ga) <= gtol:
        return ta, interp(ta)
    sign_b = 1.0 if gb > 0 else -1.0
    for _ in range(_MAX_BISECT):
        tm = 0.5 * (ta + tb)
        ym = interp(tm)
        gm = gfun(ym)
        if abs(gm) <= gtol:
            return tm, ym
        if (gm > 0) == (sign_b > 0):
            tb = tm
        else:
            ta = tm
    raise ConvergenceFailure(
        f"event bisection failed to reach tolerance {gtol!r} on [{ta!r}, {tb!r}]"
    )


def _initial_step(y: np.ndarray, f: np.ndarray, max_step: float) -> float:
    scale = (1.0 + float(np.linalg.norm(y))) / (1.0 + float(np.linalg.norm(f)))
    return min(max_step, 0.01 * scale)


def _error_norm(err: np.ndarray, y0: np.ndarray, y1: np.ndarray, rtol: float, atol: float) -> float:
    scale = atol + rtol * np.maximum(np.abs(y0), np.abs(y1))
    return float(np.sqrt(np.mean((err / scale) ** 2)))


def _dp_step(rhs: RHS, y: np.ndarray, f: np.ndarray, h: float):
    """One Dormand-Prince attempt; returns (y1, f1, err_vector)."""
    k1 = f
    k2 = rhs(y + h * (_A2[0] * k1))
    k3 = rhs(y + h * (_A3[0] * k1 + _A3[1] * k2))
    k4 = rhs(y + h * (_A4[0] * k1 + _A4[1] * k2 + _A4[2] * k3))
    k5 = rhs(y + h * (_A5[0] * k1 + _A5[1] * k2 + _A5[2] * k3 + _A5[3] * k4))
    k6 = rhs(
        y + h * (_A6[0] * k1 + _A6[1] * k2 + _A6[2] * k3 + _A6[3] * k4 + _A6[4] * k5)
    )
    y1 = y + h * (_B[0] * k1 + _B[2] * k3 + _B[3] * k4 + _B[4] * k5 + _B[5] * k6)
    f1 = rhs(y1)  # FSAL stage, reused as next k1 on acceptance
    err = h * (
        _E[0] * k1
        + _E[2] * k3
        + _E[3] * k4
        + _E[4] * k5
        + _E[5] * k6
        + _E[6] * f1
    )
    return y1, f1, err


class _Recorder:
    """Collects (t, y, f) samples; keeps only endpoints when store is off."""

    def __init__(self, store: bool):
        self.store = store
        self.ts: list[float] = []
        self.ys: list[np.ndarray] = []
        self.fs: list[np.ndarray] = []

    def add(self, t: float, y: np.ndarray, f: np.ndarray) -> None:
        if not self.store and len(self.ts) >= 2:
            self.ts[-1] = t
            self.ys[-1] = y.copy()
            self.fs[-1] = f.copy()
            return
        self.ts.append(t)
        self.ys.append(y.copy())
        self.fs.append(f.copy())

    def outcome(self, status: int, max_norm: float) -> SegmentOutcome:
        return SegmentOutcome(
            status,
            np.array(self.ts),
            np.array(self.ys),
            np.array(self.fs),
            max_norm,
        )


def run_smooth_segment(
    rhs: RHS,
    x0: np.ndarray,
    t0: float,
    region_sign: float,
    ep: EngineParams,
    store: bool = True,
) -> SegmentOutcome:
    """Integrate one smooth piece until it leaves its region or terminates.

    region_sign is -1 for the left region (x1 < 0 inside) and +1 for the
    right.  The surface event is armed only after |x1| exceeds
    ARM_FACTOR * event_tol on the inside, so departures that start on the
    surface do not re-trigger at once.
    """
    y = np.array(x0, dtype=float)
    t = float(t0)
    f = np.asarray(rhs(y), dtype=float)
    rec = _Recorder(store)
    rec.add(t, y, f)
    max_norm = float(np.linalg.norm(y))

    arm_level = ARM_FACTOR * ep.event_tol
    outward = -region_sign  # g = outward * x1 grows when leaving the region

    def g_surface(state: np.ndarray) -> float:
        return outward * float(state[0])

    def g_conv(state: np.ndarray) -> float:
        return ep.r_converge - float(np.linalg.norm(state))

    def g_esc(state: np.ndarray) -> float:
        return float(np.linalg.norm(state)) - ep.r_escape

    armed = region_sign * float(y[0]) > arm_level
    h = _initial_step(y, f, ep.max_step)
    rad_tol = ep.event_tol * (1.0 + ep.r_converge + ep.r_escape)

    for _ in range(_MAX_SEGMENT_STEPS):
        remaining = ep.t_stop - t
        if remaining <= 1e-14 * (1.0 + abs(ep.t_stop)):
            return rec.outcome(HORIZON, max_norm)
        clamped = remaining <= h
        h_step = remaining if clamped else h
        y1, f1, err = _dp_step(rhs, y, f, h_step)
        enorm = _error_norm(err, y, y1, ep.rel_tol, ep.abs_tol)
        if not math.isfinite(enorm) or enorm > 1.0:
            shrink = 0.25 if not math.isfinite(enorm) else max(
                _MIN_FACTOR, _SAFETY * enorm ** -0.2
            )
            h = h_step * shrink
            if h < 1e-15 * (1.0 + abs(t)):
                raise ConvergenceFailure(f"step size underflow at t = {t!r}")
            continue
        t1 = ep.t_stop if clamped else t + h_step

        def interp(tt: float, t=t, y=y, f=f, t1=t1, y1=y1, f1=f1) -> np.ndarray:
            return hermite_eval(t, y, f, t1, y1, f1, tt)

        # event scan on the accepted step
        candidates: list[tuple[float, np.ndarray, int]] = []
        depth1 = region_sign * float(y1[0])
        if armed:
            if depth1 < 0.0:
                ts_, ys_ = _bisect_root(
                    interp, g_surface, t, t1, g_surface(y), g_surface(y1), ep.event_tol
                )
                candidates.append((ts_, ys_, SURFACE))
        else:
            if depth1 > arm_level:
                armed = True
            elif depth1 < -arm_level:
                # degenerate re-touch: the orbit never left the surface band
                # before breaching, so localize at the band's width instead
                ts_, ys_ = _bisect_root(
                    interp,
                    g_surface,
                    t,
                    t1,
                    min(g_surface(y), 0.0),
                    g_surface(y1),
                    arm_level,
                )
                candidates.append((ts_, ys_, SURFACE))
        n1 = float(np.linalg.norm(y1))
        if n1 <= ep.r_converge:
            ts_, ys_ = _bisect_root(interp, g_conv, t, t1, g_conv(y), g_conv(y1), rad_tol)
            candidates.append((ts_, ys_, CONVERGED))
        if n1 >= ep.r_escape:
            ts_, ys_ = _bisect_root(interp, g_esc, t, t1, g_esc(y), g_esc(y1), rad_tol)
            candidates.append((ts_, ys_, ESCAPED))
        if candidates:
            order = {SURFACE: 0, CONVERGED: 1, ESCAPED: 2}
            t_ev, y_ev, status = min(candidates, key=lambda c: (c[0], order[c[2]]))
            if status == SURFACE:
                y_ev = y_ev.copy()
                y_ev[0] = 0.0
            f_ev = np.asarray(rhs(y_ev), dtype=float)
            rec.add(t_ev, y_ev, f_ev)
            max_norm = max(max_norm, float(np.linalg.norm(y_ev)))
            return rec.outcome(status, max_norm)

        t, y, f = t1, y1, f1
        max_norm = max(max_norm, n1)
        rec.add(t, y, f)
        factor = _MAX_FACTOR if enorm == 0.0 else min(
            _MAX_FACTOR, _SAFETY * enorm ** -0.2
        )
        h = min(ep.max_step, h_step * max(factor, _MIN_FACTOR))
    raise ConvergenceFailure("smooth segment exceeded the step budget")


def run_sliding_segment(
    fl_rhs: RHS,
    fr_rhs: RHS,
    x0: np.ndarray,
    t0: float,
    ep: EngineParams,
    store: bool = True,
) -> SegmentOutcome:
    """Integrate the sliding field on the surface until the weight leaves [0, 1].

    x1 is pinned to zero after every accepted step.  Exits are localized
    where the convex weight crosses 0 (continue left) or 1 (continue right);
    a sign change or vanishing of f_L1 - f_R1 terminates at a two-fold.
    """
    y = np.array(x0, dtype=float)
    y[0] = 0.0
    t = float(t0)

    def normals(state: np.ndarray) -> tuple[float, float]:
        return float(fl_rhs(state)[0]), float(fr_rhs(state)[0])

    def slide(state: np.ndarray) -> np.ndarray:
        a = np.asarray(fl_rhs(state), dtype=float)
        b = np.asarray(fr_rhs(state), dtype=float)
        den = a[0] - b[0]
        if den == 0.0:
            return np.full(state.shape, np.nan)
        return (a[0] * b - b[0] * a) / den

    def g_weight(state: np.ndarray) -> float:
        fl1, fr1 = normals(state)
        den = fl1 - fr1
        if den == 0.0:
            return math.copysign(1e300, fl1) if fl1 != 0.0 else 0.0
        return fl1 / den

    def g_den(state: np.ndarray) -> float:
        fl1, fr1 = normals(state)
        return fl1 - fr1

    def g_conv(state: np.ndarray) -> float:
        return ep.r_converge - float(np.linalg.norm(state))

    def g_esc(state: np.ndarray) -> float:
        return float(np.linalg.norm(state)) - ep.r_escape

    f = slide(y)
    if not np.all(np.isfinite(f)):
        f = np.zeros_like(y)
    rec = _Recorder(store)
    rec.add(t, y, f)
    max_norm = float(np.linalg.norm(y))
    h = _initial_step(y, f, ep.max_step)
    rad_tol = ep.event_tol * (1.0 + ep.r_converge + ep.r_escape)

    fl1, fr1 = normals(y)
    den_prev = fl1 - fr1

    for _ in range(_MAX_SEGMENT_STEPS):
        # two-fold right at the current point
        fl1, fr1 = normals(y)
        tol = SIGN_TOL * (1.0 + float(np.linalg.norm(y)))
        if abs(fl1) <= tol and abs(fr1) <= tol:
            return rec.outcome(TWOFOLD, max_norm)
        remaining = ep.t_stop - t
        if remaining <= 1e-14 * (1.0 + abs(ep.t_stop)):
            return rec.outcome(HORIZON, max_norm)
        clamped = remaining <= h
        h_step = remaining if clamped else h
        y1, f1, err = _dp_step(slide, y, f, h_step)
        enorm = _error_norm(err, y, y1, ep.rel_tol, ep.abs_tol)
        if not math.isfinite(enorm) or enorm > 1.0:
            shrink = 0.25 if not math.isfinite(enorm) else max(
                _MIN_FACTOR, _SAFETY * enorm ** -0.2
            )
            h = h_step * shrink
            if h < 1e-15 * (1.0 + abs(t)):
                raise ConvergenceFailure(f"sliding step size underflow at t = {t!r}")
            continue
        y1[0] = 0.0
        f1 = slide(y1)
        if not np.all(np.isfinite(f1)):
            # stepped onto the degenerate set; let the two-fold check decide
            h = h_step * 0.25
            if h < 1e-15 * (1.0 + abs(t)):
                return rec.outcome(TWOFOLD, max_norm)
            continue
        t1 = ep.t_stop if clamped else t + h_step

        def interp(tt: float, t=t, y=y, f=f, t1=t1, y1=y1, f1=f1) -> np.ndarray:
            return hermite_eval(t, y, f, t1, y1, f1, tt)

        candidates: list[tuple[float, np.ndarray, int]] = []
        lam1 = g_weight(y1)
        if lam1 < 0.0:
            ts_, ys_ = _bisect_root(
                interp, g_weight, t, t1, g_weight(y), lam1, ep.event_tol
            )
            candidates.append((ts_, ys_, EXIT_LEFT))
        elif lam1 > 1.0:
            ts_, ys_ = _bisect_root(
                interp,
                lambda s: g_weight(s) - 1.0,
                t,
                t1,
                g_weight(y) - 1.0,
                lam1 - 1.0,
                ep.event_tol,
            )
            candidates.append((ts_, ys_, EXIT_RIGHT))
        den1 = g_den(y1)
        den_tol = SIGN_TOL * (1.0 + float(np.linalg.norm(y1)))
        if (den1 > 0.0) != (den_prev > 0.0):
            ts_, ys_ = _bisect_root(interp, g_den, t, t1, den_prev, den1, den_tol)
            candidates.append((ts_, ys_, TWOFOLD))
        elif abs(den1) <= den_tol:
            candidates.append((t1, y1, TWOFOLD))
        n1 = float(np.linalg.norm(y1))
        if n1 <= ep.r_converge:
            ts_, ys_ = _bisect_root(interp, g_conv, t, t1, g_conv(y), g_conv(y1), rad_tol)
            candidates.append((ts_, ys_, CONVERGED))
        if n1 >= ep.r_escape:
            ts_, ys_ = _bisect_root(interp, g_esc, t, t1, g_esc(y), g_esc(y1), rad_tol)
            candidates.append((ts_, ys_, ESCAPED))
        if candidates:
            order = {EXIT_LEFT: 0, EXIT_RIGHT: 1, TWOFOLD: 2, CONVERGED: 3, ESCAPED: 4}
            t_ev, y_ev, status = min(
                candidates, key=lambda c: (c[0], order[c[2]])
            )
            y_ev = y_ev.copy()
            y_ev[0] = 0.0
            f_ev = slide(y_ev)
            if not np.all(np.isfinite(f_ev)):
                f_ev = np.zeros_like(y_ev)
            rec.add(t_ev, y_ev, f_ev)
            max_norm = max(max_norm, float(np.linalg.norm(y_ev)))
            return rec.outcome(status, max_norm)

        t, y, f = t1, y1, f1
        den_prev = den1
        max_norm = max(max_norm, n1)
        rec.add(t, y, f)
        factor = _MAX_FACTOR if enorm == 0.0 else min(
            _MAX_FACTOR, _SAFETY * enorm ** -0.2
        )
        h = min(ep.max_step, h_step * max(factor, _MIN_FACTOR))
    raise ConvergenceFailure("sliding segment exceeded the step budget")
