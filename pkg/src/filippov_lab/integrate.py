"""Event-driven integration of piecewise-smooth systems.

A trajectory is a chain of segments, each integrated in one mode (left
piece, right piece, or sliding on the surface).  Segment ends are events:
surface hits, sliding exits where the convex weight reaches 0 or 1, and the
terminal kinds Converged, Escaped, HorizonReached, TwoFoldReached,
RepellingEncountered.  Mode decisions on the surface follow the snapped
sign pattern of the two normal components; one-sided tangencies are settled
by the directional derivative of the tangent normal component along its own
piece.

Also here: the discontinuous time reparameterization p(t) that maps a
trajectory of the original system onto the trajectory of the system with
its right piece divided by gamma, and its verification operation.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from . import _engine
from ._engine import EngineParams, SegmentOutcome, hermite_eval
from .errors import (
    ConvergenceFailure,
    DimensionError,
    MaxEventsExceeded,
    NonUniqueEvolutionError,
    ScalingHypothesisError,
    TwoFoldError,
)
from .expressions import Binary, FieldExpression, Literal
from .systems import (
    AffineField,
    ExpressionField,
    PiecewiseSystem,
    ReducedSystem,
    Side,
    SIGN_TOL,
    eval_field,
    sign_tolerance,
    snap_sign,
    surface_distance_tolerance,
)

try:
    from . import _engine_fast
except ImportError:  # numba unavailable; the reference engine covers everything
    _engine_fast = None

__all__ = [
    "Mode",
    "IntegratorConfig",
    "EventRecord",
    "TrajectorySegment",
    "Trajectory",
    "integrate",
    "locate_surface_event",
    "sliding_time_density",
    "TimeScalingResult",
    "reparameterize_time",
    "verify_time_scaling",
    "scale_right_piece",
    "check_right_entering",
    "write_trajectory_csv",
    "write_events_csv",
]


class Mode(enum.Enum):
    LEFT = "L"
    RIGHT = "R"
    SLIDING = "S"


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    event_tol: float = 1e-12
    max_step: float = 0.1
    t_max: float = 100.0
    r_escape: float = 1e3
    r_converge: float = 1e-9
    max_events: int = 10_000
    strict: bool = False


@dataclass(frozen=True)
class EventRecord:
    kind: str
    time: float
    state: np.ndarray


TERMINAL_KINDS = (
    "Converged",
    "Escaped",
    "HorizonReached",
    "TwoFoldReached",
    "RepellingEncountered",
)


@dataclass(frozen=True)
class TrajectorySegment:
    mode: Mode
    times: np.ndarray  # (m,)
    states: np.ndarray  # (m, n)
    derivs: np.ndarray  # (m, n), active-mode field at each sample
    index: int


@dataclass(frozen=True)
class Trajectory:
    system: PiecewiseSystem
    segments: list[TrajectorySegment]
    events: list[EventRecord]
    status: str  # terminal event kind
    max_norm: float  # largest sampled state norm
    config: IntegratorConfig

    @property
    def final_time(self) -> float:
        return float(self.segments[-1].times[-1])

    @property
    def final_state(self) -> np.ndarray:
        return self.segments[-1].states[-1]

    def state_at(self, t: float) -> np.ndarray:
        """Cubic Hermite evaluation inside the stored sample intervals."""
        t0 = float(self.segments[0].times[0])
        if t < t0 - 1e-12 or t > self.final_time + 1e-12:
            raise ValueError(f"time {t!r} outside [{t0!r}, {self.final_time!r}]")
        t = min(max(t, t0), self.final_time)
        for seg in self.segments:
            if t > float(seg.times[-1]):
                continue
            k = int(np.searchsorted(seg.times, t, side="right")) - 1
            k = min(max(k, 0), len(seg.times) - 2) if len(seg.times) > 1 else 0
            if len(seg.times) == 1:
                return seg.states[0].copy()
            return hermite_eval(
                float(seg.times[k]),
                seg.states[k],
                seg.derivs[k],
                float(seg.times[k + 1]),
                seg.states[k + 1],
                seg.derivs[k + 1],
                t,
            )
        return self.final_state.copy()


# ------------------------------------------------------------ RHS assembling


def _piece_rhs(piece) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(piece, AffineField):
        m, b = piece.matrix, piece.offset
        return lambda y: m @ y + b
    fast = piece.expression.compiled()
    return lambda y: np.array(fast(*y))


def _directional_normal_derivative(
    system: PiecewiseSystem, side: Side, x: np.ndarray, v: np.ndarray
) -> float:
    """d/de f_side,1(x + e v) at e = 0."""
    piece = system.left if side is Side.LEFT else system.right
    if isinstance(piece, AffineField):
        return float(piece.matrix[0] @ v)
    vn = float(np.linalg.norm(v))
    if vn == 0.0:
        return 0.0
    h = 1e-6 * (1.0 + float(np.linalg.norm(x))) / vn
    fp = float(piece(x + h * v)[0])
    fm = float(piece(x - h * v)[0])
    return (fp - fm) / (2.0 * h)


# -------------------------------------------------------------- mode decision

_TERMINAL_REPELLING = "RepellingEncountered"
_TERMINAL_TWOFOLD = "TwoFoldReached"


def _decide_on_surface(
    system: PiecewiseSystem, x: np.ndarray, strict: bool
) -> Mode | str:
    """Continuation rule at a surface point; returns a Mode or terminal kind."""
    fl = eval_field(system, Side.LEFT, x)
    fr = eval_field(system, Side.RIGHT, x)
    tol = sign_tolerance(x)
    sl = snap_sign(float(fl[0]), tol)
    sr = snap_sign(float(fr[0]), tol)
    if sl > 0 and sr < 0:
        return Mode.SLIDING
    if sl > 0 and sr > 0:
        return Mode.RIGHT
    if sl < 0 and sr < 0:
        return Mode.LEFT
    if sl < 0 and sr > 0:
        if strict:
            raise NonUniqueEvolutionError(
                f"repelling sliding point reached at {x.tolist()}"
            )
        return _TERMINAL_REPELLING
    if sl == 0 and sr == 0:
        if strict:
            raise TwoFoldError(f"two-fold reached at {x.tolist()}")
        return _TERMINAL_TWOFOLD
    if sl == 0:
        if sr > 0:
            return Mode.RIGHT  # right piece leaves transversally
        # tangency on the left side: curvature of x1 along the left flow
        d = _directional_normal_derivative(system, Side.LEFT, x, fl)
        curv_tol = SIGN_TOL * (1.0 + float(np.linalg.norm(x))) * (
            1.0 + float(np.linalg.norm(fl))
        )
        return Mode.LEFT if d < -curv_tol else Mode.SLIDING
    # sr == 0, sl != 0
    if sl < 0:
        return Mode.LEFT
    d = _directional_normal_derivative(system, Side.RIGHT, x, fr)
    curv_tol = SIGN_TOL * (1.0 + float(np.linalg.norm(x))) * (
        1.0 + float(np.linalg.norm(fr))
    )
    return Mode.RIGHT if d > curv_tol else Mode.SLIDING


def _decide_start(system: PiecewiseSystem, x: np.ndarray, strict: bool) -> Mode | str:
    x1 = float(x[0])
    stol = surface_distance_tolerance(x)
    if x1 < -stol:
        return Mode.LEFT
    if x1 > stol:
        return Mode.RIGHT
    x[0] = 0.0
    return _decide_on_surface(system, x, strict)


# ----------------------------------------------------------------- integrate


def _run_segment(
    system: PiecewiseSystem,
    mode: Mode,
    x: np.ndarray,
    t: float,
    ep: EngineParams,
    store: bool,
    use_fast: bool,
) -> SegmentOutcome:
    if use_fast:
        ml, bl = system.left.matrix, system.left.offset
        mr, br = system.right.matrix, system.right.offset
        if mode is Mode.SLIDING:
            raw = _engine_fast.run_sliding_affine(
                ml, bl, mr, br, x, t,
                ep.rel_tol, ep.abs_tol, ep.event_tol, ep.max_step,
                ep.t_stop, ep.r_converge, ep.r_escape, store,
            )
        else:
            m, b = (ml, bl) if mode is Mode.LEFT else (mr, br)
            region_sign = -1.0 if mode is Mode.LEFT else 1.0
            raw = _engine_fast.run_smooth_affine(
                m, b, x, t, region_sign,
                ep.rel_tol, ep.abs_tol, ep.event_tol, ep.max_step,
                ep.t_stop, ep.r_converge, ep.r_escape, store,
            )
        status, ts, ys, fs, max_norm = raw
        if status == _engine.FAIL:
            raise ConvergenceFailure(f"step control failed near t = {ts[-1]!r}")
        return SegmentOutcome(int(status), ts, ys, fs, float(max_norm))
    if mode is Mode.SLIDING:
        return _engine.run_sliding_segment(
            _piece_rhs(system.left), _piece_rhs(system.right), x, t, ep, store
        )
    rhs = _piece_rhs(system.left if mode is Mode.LEFT else system.right)
    region_sign = -1.0 if mode is Mode.LEFT else 1.0
    return _engine.run_smooth_segment(rhs, x, t, region_sign, ep, store)


def integrate(
    system: PiecewiseSystem | ReducedSystem,
    x0: Sequence[float],
    cfg: IntegratorConfig = IntegratorConfig(),
    store: bool = True,
    stop_events: tuple[str, ...] = (),
) -> Trajectory:
    """Integrate from x0 at t = 0 until a terminal event.

    stop_events lists non-terminal event kinds (SurfaceHit, SlidingExitLeft,
    SlidingExitRight) that end the run early; the trajectory's status is then
    that kind and its final state is the event state.

    Identical inputs produce bitwise-identical trajectories; there is no
    randomness anywhere in the pipeline.
    """
    if isinstance(system, ReducedSystem):
        system = system.as_system()
    x = np.array(x0, dtype=float)
    if x.shape != (system.dimension,):
        raise DimensionError(
            f"initial state of shape {x.shape} for dimension {system.dimension}"
        )
    use_fast = bool(system.both_affine and _engine_fast is not None)
    ep = EngineParams(
        rel_tol=cfg.rel_tol,
        abs_tol=cfg.abs_tol,
        event_tol=cfg.event_tol,
        max_step=cfg.max_step,
        t_stop=cfg.t_max,
        r_converge=cfg.r_converge,
        r_escape=cfg.r_escape,
    )

    segments: list[TrajectorySegment] = []
    events: list[EventRecord] = []
    t = 0.0
    max_norm = float(np.linalg.norm(x))

    def finish(kind: str) -> Trajectory:
        events.append(EventRecord(kind, t, x.copy()))
        return Trajectory(system, segments, events, kind, max_norm, cfg)

    def trivial_segment() -> None:
        mode = Mode.LEFT if float(x[0]) <= 0 else Mode.RIGHT
        f = eval_field(
            system, Side.LEFT if mode is Mode.LEFT else Side.RIGHT, x
        )
        segments.append(
            TrajectorySegment(
                mode, np.array([t]), np.array([x.copy()]), np.array([f]), 0
            )
        )

    # terminal conditions already true at the start
    if max_norm <= cfg.r_converge:
        trivial_segment()
        return finish("Converged")
    if max_norm >= cfg.r_escape:
        trivial_segment()
        return finish("Escaped")

    decision = _decide_start(system, x, cfg.strict)
    switches = 0
    while True:
        if not isinstance(decision, Mode):
            if not segments:
                trivial_segment()
            return finish(decision)
        outcome = _run_segment(system, decision, x, t, ep, store, use_fast)
        segments.append(
            TrajectorySegment(
                decision,
                outcome.times,
                outcome.states,
                outcome.derivs,
                len(segments),
            )
        )
        max_norm = max(max_norm, outcome.max_norm)
        t = float(outcome.times[-1])
        x = outcome.states[-1].copy()
        status = outcome.status
        if status == _engine.HORIZON:
            return finish("HorizonReached")
        if status == _engine.CONVERGED:
            return finish("Converged")
        if status == _engine.ESCAPED:
            return finish("Escaped")
        if status == _engine.TWOFOLD:
            if cfg.strict:
                raise TwoFoldError(f"two-fold reached at {x.tolist()}")
            return finish("TwoFoldReached")
        if status == _engine.SURFACE:
            kind = "SurfaceHit"
            decision = _decide_on_surface(system, x, cfg.strict)
        elif status == _engine.EXIT_LEFT:
            kind = "SlidingExitLeft"
            decision = Mode.LEFT
        elif status == _engine.EXIT_RIGHT:
            kind = "SlidingExitRight"
            decision = Mode.RIGHT
        else:
            raise ConvergenceFailure(f"segment ended with unknown status {status}")
        events.append(EventRecord(kind, t, x.copy()))
        if kind in stop_events:
            return Trajectory(system, segments, events, kind, max_norm, cfg)
        switches += 1
        if switches > cfg.max_events:
            raise MaxEventsExceeded(
                f"{switches} mode switches exceed max_events = {cfg.max_events}"
            )


def locate_surface_event(
    t0: float,
    y0: np.ndarray,
    f0: np.ndarray,
    t1: float,
    y1: np.ndarray,
    f1: np.ndarray,
    event_tol: float = 1e-12,
) -> tuple[float, np.ndarray]:
    """Localize the x1 sign change inside one accepted step.

    The step's cubic Hermite interpolant is bisected until |x1| <= event_tol;
    the returned state has x1 snapped to exactly zero.
    """
    y0 = np.asarray(y0, dtype=float)
    y1 = np.asarray(y1, dtype=float)
    a, b = float(y0[0]), float(y1[0])
    if a != 0.0 and b != 0.0 and (a > 0) == (b > 0):
        raise ValueError("bracket does not straddle the surface")

    def interp(tt: float) -> np.ndarray:
        return hermite_eval(t0, y0, np.asarray(f0, float), t1, y1, np.asarray(f1, float), tt)

    t_star, y_star = _engine._bisect_root(
        interp, lambda s: float(s[0]), t0, t1, a, b, event_tol
    )
    y_star = y_star.copy()
    y_star[0] = 0.0
    return t_star, y_star


# -------------------------------------------------------- time scaling p(t)


def sliding_time_density(
    system: PiecewiseSystem, x: Sequence[float], gamma: float
) -> float:
    """Rate a0 = (gamma * f_L1 - f_R1) / (f_L1 - f_R1) of p(t) during sliding.

    Lies in (gamma, 1] on the sliding set whenever 0 < gamma <= 1.
    """
    x = np.asarray(x, dtype=float)
    fl1 = float(eval_field(system, Side.LEFT, x)[0])
    fr1 = float(eval_field(system, Side.RIGHT, x)[0])
    den = fl1 - fr1
    if den == 0.0:
        raise TwoFoldError(f"time density undefined at {x.tolist()}")
    return (gamma * fl1 - fr1) / den


@dataclass(frozen=True)
class TimeScalingResult:
    """Piecewise-linear samples of p(t); p(times[0]) = 0."""

    gamma: float
    times: np.ndarray
    p_values: np.ndarray
    max_deviation: float  # largest violation of gamma*t <= p(t) <= t, >= 0

    def p_of(self, t: float) -> float:
        return float(np.interp(t, self.times, self.p_values))

    def t_of(self, p: float) -> float:
        return float(np.interp(p, self.p_values, self.times))


def reparameterize_time(
    traj: Trajectory, gamma: float, refine_dt: float = 0.002
) -> TimeScalingResult:
    """Accumulate p(t) over a trajectory: rate 1 on left segments, gamma on
    right segments, the sliding density in between (Simpson on a refined
    grid).  p is strictly increasing and pinched between gamma*t and t."""
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma = {gamma!r} outside (0, 1]")
    system = traj.system
    times = [float(traj.segments[0].times[0])]
    ps = [0.0]

    def push(tt: float, pp: float) -> None:
        if tt > times[-1]:
            times.append(tt)
            ps.append(pp)

    for seg in traj.segments:
        if seg.mode is Mode.LEFT or seg.mode is Mode.RIGHT:
            rate = 1.0 if seg.mode is Mode.LEFT else gamma
            # p is exactly linear here; segment-end nodes suffice
            t_end = float(seg.times[-1])
            push(t_end, ps[-1] + rate * (t_end - times[-1]))
            continue
        for k in range(len(seg.times) - 1):
            ta, tb = float(seg.times[k]), float(seg.times[k + 1])
            if tb <= times[-1]:
                continue
            ya, yb = seg.states[k], seg.states[k + 1]
            fa, fb = seg.derivs[k], seg.derivs[k + 1]
            pieces = max(1, int(math.ceil((tb - ta) / refine_dt)))
            tau0 = ta
            a0_prev = sliding_time_density(system, ya, gamma)
            for j in range(pieces):
                tau1 = tb if j == pieces - 1 else ta + (tb - ta) * (j + 1) / pieces
                mid = 0.5 * (tau0 + tau1)
                y_mid = hermite_eval(ta, ya, fa, tb, yb, fb, mid)
                y_tau1 = yb if j == pieces - 1 else hermite_eval(ta, ya, fa, tb, yb, fb, tau1)
                a_mid = sliding_time_density(system, y_mid, gamma)
                a_end = sliding_time_density(system, y_tau1, gamma)
                p_new = ps[-1] + (tau1 - tau0) / 6.0 * (a0_prev + 4.0 * a_mid + a_end)
                push(tau1, p_new)
                tau0 = tau1
                a0_prev = a_end

    t_arr = np.array(times)
    p_arr = np.array(ps)
    if np.any(np.diff(p_arr) <= 0.0):
        raise ConvergenceFailure("time reparameterization is not strictly increasing")
    rel = t_arr - t_arr[0]
    slack = 1e-12 * (1.0 + rel[-1] if len(rel) else 1.0)
    viol = np.maximum(gamma * rel - p_arr, p_arr - rel)
    max_dev = float(max(0.0, np.max(viol))) if len(viol) else 0.0
    if max_dev > slack * 10 + 1e-9:
        raise ConvergenceFailure(
            f"p(t) bounds violated by {max_dev!r}; trajectory samples too coarse"
        )
    return TimeScalingResult(gamma, t_arr, p_arr, max_dev)


def scale_right_piece(system: PiecewiseSystem, factor: float) -> PiecewiseSystem:
    """System with the right piece multiplied by factor."""
    right = system.right
    if isinstance(right, AffineField):
        scaled = AffineField(right.matrix * factor, right.offset * factor)
    else:
        expr = right.expression
        scaled = ExpressionField(
            FieldExpression(
                expr.dimension,
                tuple(Binary("*", Literal(factor), c) for c in expr.components),
            )
        )
    return PiecewiseSystem(
        dimension=system.dimension,
        left=system.left,
        right=scaled,
        left_jacobian=system.left_jacobian,
    )


def check_right_entering(
    system: PiecewiseSystem, radius: float = 1.0, points_per_axis: int = 7
) -> tuple[bool, Optional[np.ndarray]]:
    """Scan a surface grid for f_R1 < 0; returns (holds, first witness)."""
    from .systems import surface_sample_grid

    for x in surface_sample_grid(system.dimension, radius, points_per_axis):
        fr1 = float(eval_field(system, Side.RIGHT, x)[0])
        if fr1 >= -sign_tolerance(x):
            return False, x
    return True, None


def verify_time_scaling(
    system: PiecewiseSystem | ReducedSystem,
    x0: Sequence[float],
    gamma: float,
    cfg: IntegratorConfig = IntegratorConfig(),
    n_compare: int = 400,
    check_hypothesis: bool = True,
) -> float:
    """Max deviation between the reparameterized trajectory and the
    trajectory of the system with right piece divided by gamma.

    Both runs start from x0; the comparison covers the common horizon in
    the scaled time s, sampling phi(p^{-1}(s)) against the scaled run.
    """
    if isinstance(system, ReducedSystem):
        system = system.as_system()
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma = {gamma!r} outside (0, 1]")
    if check_hypothesis:
        holds, witness = check_right_entering(system)
        if not holds:
            raise ScalingHypothesisError(
                f"right piece does not enter the surface at {witness.tolist()}"
            )
    # the comparison leans on dense output between samples, whose cubic
    # interpolation error grows like max_step**4; keep steps short here
    cfg = replace(cfg, max_step=min(cfg.max_step, 0.05))
    phi = integrate(system, x0, cfg, store=True)
    scaled = scale_right_piece(system, 1.0 / gamma)
    psi = integrate(scaled, x0, cfg, store=True)
    scaling = reparameterize_time(phi, gamma)
    s_hi = min(float(scaling.p_values[-1]), psi.final_time)
    worst = 0.0
    for s in np.linspace(0.0, s_hi, n_compare + 1):
        a = phi.state_at(scaling.t_of(float(s)))
        b = psi.state_at(float(s))
        worst = max(worst, float(np.linalg.norm(a - b)))
    return worst


# ------------------------------------------------------------- serialization


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """Columns t, x1..xn, mode, segment_index; every stored sample, one row
    per segment sample (junction states appear once per adjacent segment)."""
    n = traj.system.dimension
    header = ["t"] + [f"x{i + 1}" for i in range(n)] + ["mode", "segment_index"]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for seg in traj.segments:
            letter = seg.mode.value
            for t, row in zip(seg.times, seg.states):
                cells = [_fmt(float(t))] + [_fmt(float(v)) for v in row]
                cells += [letter, str(seg.index)]
                fh.write(",".join(cells) + "\n")


def write_events_csv(traj: Trajectory, path) -> None:
    """Columns kind, time, x1..xn."""
    n = traj.system.dimension
    header = ["kind", "time"] + [f"x{i + 1}" for i in range(n)]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for ev in traj.events:
            cells = [ev.kind, _fmt(ev.time)] + [_fmt(float(v)) for v in ev.state]
            fh.write(",".join(cells) + "\n")
