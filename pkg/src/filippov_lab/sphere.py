"""Projected section dynamics for four-dimensional reduced systems.

Reduced dynamics commute with positive scalings, so orbits project onto the
unit sphere; orbits that recurrently slide leave the surface through the
tangency set and return to it, cutting the circle
zeta(theta) = (0, 0, cos theta, sin theta), theta in (pi/2, 3pi/2).
This module computes the induced circle map G(theta), the flight time
T(theta), and the radial multiplier D(theta) of one excursion, iterates G,
locates its fixed points, and estimates the orbit's Lyapunov exponent.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from ._parallel import map_indexed
from .errors import (
    DimensionError,
    MaxEventsExceeded,
    NoReturnError,
    TwoFoldError,
    ZeroStateError,
)
from .integrate import IntegratorConfig, Trajectory, integrate
from .systems import ReducedSystem

__all__ = [
    "THETA_LO",
    "THETA_HI",
    "SectionConfig",
    "ReturnSample",
    "OrbitStatistics",
    "section_point",
    "project_to_sphere",
    "return_map",
    "scan_return_map",
    "iterate_return_map",
    "find_fixed_points",
    "write_return_map_csv",
    "write_orbit_csv",
    "write_statistics_json",
]

THETA_LO = math.pi / 2
THETA_HI = 3 * math.pi / 2

# default inset when scanning the open interval; G degenerates at the ends
# where the departure curvature cos(theta) vanishes
_GRID_MARGIN = 1e-3

_FIXED_POINT_TOL = 1e-9
_FIXED_POINT_MERGE = 1e-6


def _section_integrator() -> IntegratorConfig:
    # tight tolerances: theta_out feeds central differences at fd_theta,
    # so its error budget is fd_theta * allowed G' noise
    return IntegratorConfig(
        rel_tol=1e-10,
        abs_tol=1e-12,
        event_tol=1e-12,
        max_step=0.1,
        t_max=100.0,
        r_converge=1e-10,
        r_escape=1e3,
        max_events=1000,
    )


@dataclass(frozen=True)
class SectionConfig:
    theta_lo: float = THETA_LO
    theta_hi: float = THETA_HI
    transient: int = 100
    n_iterates: int = 1000
    fd_theta: float = 1e-6
    integrator: IntegratorConfig = field(default_factory=_section_integrator)

    def __post_init__(self):
        if not self.theta_lo < self.theta_hi:
            raise ValueError("theta_lo must be below theta_hi")
        if self.transient < 0 or self.n_iterates < 1:
            raise ValueError("counts must be positive")


@dataclass(frozen=True)
class ReturnSample:
    theta_in: float
    theta_out: float
    flight_time: float
    radial_factor: float


@dataclass(frozen=True)
class OrbitStatistics:
    """Post-transient section orbit with its averaged quantities.

    thetas and ds have length n_iterates when valid; an aborted iteration
    (NoReturnError mid-orbit) leaves them truncated and valid False.
    """

    thetas: list[float]
    ds: list[float]
    lyapunov: float
    mean_D_arith: float
    mean_D_geom: float
    n_iterates: int
    transient: int
    valid: bool


def section_point(
    theta: float, theta_lo: float = THETA_LO, theta_hi: float = THETA_HI
) -> np.ndarray:
    """Unit section point (0, 0, cos theta, sin theta); theta must lie
    strictly inside the section interval."""
    if not theta_lo < theta < theta_hi:
        raise ValueError(
            f"theta = {theta!r} outside the open section interval"
            f" ({theta_lo!r}, {theta_hi!r})"
        )
    return np.array([0.0, 0.0, math.cos(theta), math.sin(theta)])


def project_to_sphere(traj: Trajectory) -> list[tuple[float, np.ndarray]]:
    """Normalize every stored sample onto the unit sphere."""
    out: list[tuple[float, np.ndarray]] = []
    for seg in traj.segments:
        for t, state in zip(seg.times, seg.states):
            norm = float(np.linalg.norm(state))
            if norm == 0.0:
                raise ZeroStateError(f"zero state at t = {float(t)!r}")
            out.append((float(t), state / norm))
    return out


def _theta_of_state(state: np.ndarray) -> float:
    angle = math.atan2(float(state[3]), float(state[2]))
    return angle + 2 * math.pi if angle < 0.0 else angle


def return_map(
    rs: ReducedSystem,
    theta: float,
    cfg: SectionConfig = SectionConfig(),
    initial_scale: float = 1.0,
    store: bool = False,
) -> ReturnSample:
    """One excursion from initial_scale * zeta(theta) back to the section.

    The orbit leaves through the tangency set, traverses the left region,
    lands on a sliding stretch, and the sliding exit where the convex weight
    reaches zero is exactly the next section crossing; theta_out is the
    angle of that arrival, radial_factor the norm ratio across the trip.
    """
    if rs.dimension != 4:
        raise DimensionError("the section circle lives in dimension 4")
    if initial_scale <= 0.0:
        raise ValueError("initial_scale must be positive")
    z = initial_scale * section_point(theta, cfg.theta_lo, cfg.theta_hi)
    try:
        traj = integrate(
            rs, z, cfg.integrator, store=store, stop_events=("SlidingExitLeft",)
        )
    except MaxEventsExceeded as exc:
        raise NoReturnError(f"event budget exhausted from theta = {theta!r}") from exc
    if traj.status == "TwoFoldReached":
        raise TwoFoldError(f"orbit from theta = {theta!r} reached a two-fold")
    if traj.status != "SlidingExitLeft":
        raise NoReturnError(
            f"orbit from theta = {theta!r} ended with {traj.status}"
            " before returning to the section"
        )
    arrival = traj.final_state
    if float(arrival[2]) >= 0.0:
        raise NoReturnError(
            f"arrival from theta = {theta!r} missed the section"
            f" (third component {float(arrival[2])!r} not negative)"
        )
    theta_out = _theta_of_state(arrival)
    return ReturnSample(
        theta_in=theta,
        theta_out=theta_out,
        flight_time=traj.final_time,
        radial_factor=float(np.linalg.norm(arrival)) / initial_scale,
    )


def scan_return_map(
    rs: ReducedSystem, thetas: Sequence[float], cfg: SectionConfig = SectionConfig()
) -> list[tuple[float, Optional[ReturnSample], str]]:
    """Evaluate the map over a grid; rows are (theta, sample or None, status).

    Status is "ok", "no_return", or "two_fold".  Rows come back in grid
    order regardless of worker threads.
    """

    def one(theta: float) -> tuple[float, Optional[ReturnSample], str]:
        try:
            return theta, return_map(rs, theta, cfg), "ok"
        except NoReturnError:
            return theta, None, "no_return"
        except TwoFoldError:
            return theta, None, "two_fold"

    return map_indexed(one, list(thetas))


def iterate_return_map(
    rs: ReducedSystem, theta0: float, cfg: SectionConfig = SectionConfig()
) -> OrbitStatistics:
    """Iterate G from theta0 and average the post-transient orbit.

    The Lyapunov exponent is the mean of ln |G'| along the orbit with G'
    from central differences at fd_theta; the radial factor is averaged both
    arithmetically and geometrically (the geometric mean below one is what
    certifies that the unprojected orbit spirals inward).
    """
    theta = theta0
    thetas: list[float] = []
    ds: list[float] = []
    log_slopes: list[float] = []
    valid = True
    h = cfg.fd_theta
    for k in range(cfg.transient + cfg.n_iterates):
        try:
            if k < cfg.transient:
                theta = return_map(rs, theta, cfg).theta_out
                continue
            center = return_map(rs, theta, cfg)
            plus, minus = map_indexed(
                lambda tt: return_map(rs, tt, cfg), [theta + h, theta - h]
            )
            slope = (plus.theta_out - minus.theta_out) / (2.0 * h)
            thetas.append(theta)
            ds.append(center.radial_factor)
            log_slopes.append(math.log(abs(slope)))
            theta = center.theta_out
        except (NoReturnError, TwoFoldError, ValueError):
            valid = False
            break
    if thetas:
        lyap = float(np.mean(log_slopes))
        arith = float(np.mean(ds))
        geom = float(math.exp(np.mean(np.log(ds))))
    else:
        lyap = arith = geom = math.nan
        valid = False
    return OrbitStatistics(
        thetas=thetas,
        ds=ds,
        lyapunov=lyap,
        mean_D_arith=arith,
        mean_D_geom=geom,
        n_iterates=cfg.n_iterates,
        transient=cfg.transient,
        valid=valid,
    )


def find_fixed_points(
    rs: ReducedSystem, cfg: SectionConfig = SectionConfig(), grid_n: int = 1000
) -> list[tuple[float, float]]:
    """Fixed points of G found by sign changes of G(theta) - theta.

    Each bracket from the uniform grid is bisected until
    |G(theta) - theta| < 1e-9; points closer than 1e-6 are merged.
    Returns (theta_star, D(theta_star)) pairs in increasing theta order.
    """
    if grid_n < 2:
        raise ValueError("grid_n must be at least 2")
    lo = cfg.theta_lo + _GRID_MARGIN
    hi = cfg.theta_hi - _GRID_MARGIN
    grid = np.linspace(lo, hi, grid_n)
    rows = scan_return_map(rs, grid, cfg)

    def gap(theta: float) -> Optional[float]:
        try:
            return return_map(rs, theta, cfg).theta_out - theta
        except (NoReturnError, TwoFoldError):
            return None

    found: list[tuple[float, float]] = []
    for (ta, sa, sta), (tb, sb, stb) in zip(rows, rows[1:]):
        if sta != "ok" or stb != "ok":
            continue
        ga = sa.theta_out - ta
        gb = sb.theta_out - tb
        if ga == 0.0:
            found.append((ta, sa.radial_factor))
            continue
        if (ga > 0) == (gb > 0):
            continue
        a, b, va = ta, tb, ga
        root = None
        for _ in range(200):
            mid = 0.5 * (a + b)
            vm = gap(mid)
            if vm is None:
                root = None
                break
            if abs(vm) < _FIXED_POINT_TOL:
                root = mid
                break
            if (vm > 0) == (va > 0):
                a, va = mid, vm
            else:
                b = mid
        if root is None:
            continue
        found.append((root, return_map(rs, root, cfg).radial_factor))
    merged: list[tuple[float, float]] = []
    for theta_star, d_star in sorted(found):
        if merged and abs(theta_star - merged[-1][0]) < _FIXED_POINT_MERGE:
            continue
        merged.append((theta_star, d_star))
    return merged


# ------------------------------------------------------------- serialization


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def write_return_map_csv(
    rows: Sequence[tuple[float, Optional[ReturnSample], str]], path
) -> None:
    """Columns theta_in, theta_out, T, D, status; failed rows carry nan."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("theta_in,theta_out,T,D,status\n")
        for theta, sample, status in rows:
            if sample is None:
                fh.write(f"{_fmt(theta)},nan,nan,nan,{status}\n")
            else:
                fh.write(
                    f"{_fmt(theta)},{_fmt(sample.theta_out)},"
                    f"{_fmt(sample.flight_time)},{_fmt(sample.radial_factor)},"
                    f"{status}\n"
                )


def write_orbit_csv(stats: OrbitStatistics, path) -> None:
    """Columns k, theta, D for the post-transient orbit."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("k,theta,D\n")
        for k, (theta, d) in enumerate(zip(stats.thetas, stats.ds)):
            fh.write(f"{k},{_fmt(theta)},{_fmt(d)}\n")


def write_statistics_json(
    stats: OrbitStatistics, fixed_points: Sequence[tuple[float, float]], path
) -> None:
    payload = {
        "lyapunov": stats.lyapunov,
        "mean_D_arith": stats.mean_D_arith,
        "mean_D_geom": stats.mean_D_geom,
        "n_iterates": stats.n_iterates,
        "transient": stats.transient,
        "valid": stats.valid,
        "fixed_points": [
            {"theta": theta, "D": d} for theta, d in fixed_points
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
