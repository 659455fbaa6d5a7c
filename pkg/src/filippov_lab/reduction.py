"""Reduction at a boundary equilibrium and the sampling-based stability probe.

The reduced system keeps the left piece's Jacobian at the origin and freezes
the right piece at its value there.  Because the reduced dynamics commute
with positive scalings, contraction of every orbit launched from the unit
half sphere is evidence of exponential stability; the probe measures the
worst contraction time T and reports decay constants alpha and beta.
Verdicts are evidence, not certificates.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.special import ndtri

from ._parallel import map_indexed
from .errors import (
    DimensionError,
    InvalidDelta,
    NotBoundaryEquilibrium,
)
from .integrate import IntegratorConfig, Trajectory, integrate
from .systems import (
    AffineField,
    PiecewiseSystem,
    ReducedSystem,
    Side,
    eval_field,
    sign_tolerance,
    surface_sample_grid,
)

__all__ = [
    "ProbeConfig",
    "StabilityVerdict",
    "SweepReport",
    "linearize_at_origin",
    "check_uniqueness_condition",
    "sample_half_sphere",
    "stability_probe",
    "robustness_sweep",
    "verdict_to_json",
    "sweep_to_json",
    "write_verdicts_json",
]

_EQUILIBRIUM_TOL = 1e-8


@dataclass(frozen=True)
class ProbeConfig:
    # r_escape needs headroom over transient amplification: orbits launched
    # from the unit half sphere of a stable system can overshoot well past
    # norm 10 while sliding before they contract
    n_samples: int = 64
    kappa: float = 0.5
    t_max: float = 200.0
    r_escape: float = 100.0
    seed: int = 0
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be at least 1")
        if not 0.0 < self.kappa < 1.0:
            raise ValueError("kappa must lie in (0, 1)")


@dataclass(frozen=True)
class StabilityVerdict:
    """One of StableEvidence / UnstableEvidence / Inconclusive / Inapplicable.

    StableEvidence carries T (worst contraction time, measured at the last
    crossing down through kappa), beta = ln(1/kappa)/T, and alpha (largest
    norm any sampled orbit reached).  UnstableEvidence
    carries the offending initial state and its behavior (Escaped; the
    NoContraction label is reserved for callers that treat a exhausted
    horizon as decisive, which the probe itself does not).
    """

    kind: str
    T: Optional[float] = None
    alpha: Optional[float] = None
    beta: Optional[float] = None
    witness: Optional[np.ndarray] = None
    behavior: Optional[str] = None
    detail: Optional[str] = None
    reason: Optional[str] = None


@dataclass(frozen=True)
class SweepReport:
    base: ReducedSystem
    delta: float
    trials: int
    verdicts: list[StabilityVerdict]
    stable_fraction: float


# --------------------------------------------------------------- reduction


def _left_jacobian_fd(system: PiecewiseSystem, fd_step: float) -> np.ndarray:
    n = system.dimension
    jac = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = fd_step
        fp = eval_field(system, Side.LEFT, e)
        fm = eval_field(system, Side.LEFT, -e)
        jac[:, j] = (fp - fm) / (2.0 * fd_step)
    return jac


def linearize_at_origin(
    system: PiecewiseSystem, fd_step: float = 1e-5
) -> ReducedSystem:
    """Reduced system at the origin: left Jacobian matrix, frozen right value.

    The origin must be a zero of the left piece to within 1e-8.  Affine left
    pieces yield their matrix exactly; expression pieces are differenced
    centrally with step fd_step; a user-supplied left_jacobian wins if set.
    """
    origin = np.zeros(system.dimension)
    residual = float(np.linalg.norm(eval_field(system, Side.LEFT, origin)))
    if residual > _EQUILIBRIUM_TOL:
        raise NotBoundaryEquilibrium(
            f"left piece at the origin has norm {residual:.3e} > {_EQUILIBRIUM_TOL}"
        )
    if system.left_jacobian is not None:
        matrix = np.asarray(system.left_jacobian(origin), dtype=float)
    elif isinstance(system.left, AffineField):
        matrix = system.left.matrix.copy()
    else:
        matrix = _left_jacobian_fd(system, fd_step)
    constant = np.asarray(eval_field(system, Side.RIGHT, origin), dtype=float)
    return ReducedSystem(matrix, constant)


def check_uniqueness_condition(
    system: PiecewiseSystem, n_grid: int = 7, radius: float = 1.0
) -> tuple[bool, Optional[np.ndarray]]:
    """Scan the surface ball for points where neither piece crosses inward.

    Forward uniqueness of solutions needs f_L1 > 0 or f_R1 < 0 at each
    surface point; the first grid point violating that (both signs weakly
    wrong, up to tolerance) is returned as a witness.
    """
    for x in surface_sample_grid(system.dimension, radius, n_grid):
        tol = sign_tolerance(x)
        fl1 = float(eval_field(system, Side.LEFT, x)[0])
        fr1 = float(eval_field(system, Side.RIGHT, x)[0])
        if fl1 <= tol and fr1 >= -tol:
            return False, x
    return True, None


# ---------------------------------------------------------------- sampling


def _kronecker_alpha(dimension: int) -> np.ndarray:
    # root of x**(d+1) = x + 1 generalizes the golden ratio; its inverse
    # powers give the best-known low-discrepancy lattice directions
    d = dimension
    phi = 1.5
    for _ in range(64):
        phi = (1.0 + phi) ** (1.0 / (d + 1))
    return phi ** -(np.arange(1, d + 1, dtype=float))


def _seed_rotation(dimension: int, seed: int) -> np.ndarray:
    """Orthogonal map fixing the first axis, drawn deterministically."""
    n = dimension
    rot = np.eye(n)
    if n <= 2:
        return rot
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((n - 1, n - 1))
    q, r = np.linalg.qr(g)
    q = q @ np.diag(np.sign(np.diag(r)))
    rot[1:, 1:] = q
    return rot


def sample_half_sphere(
    dimension: int, n_samples: int, seed: int = 0
) -> np.ndarray:
    """Quasi-uniform points on {|z| = 1, z1 <= 0}, plus 10% just right of it.

    A Kronecker lattice is pushed through the normal quantile onto the
    sphere, mirrored into the closed left half, and rotated about the first
    axis by a seed-determined orthogonal map.  The extra points have
    z1 = +0.05 so starts on the right side of the surface get probed too.
    """
    if dimension < 2:
        raise DimensionError("half-sphere sampling needs dimension >= 2")
    n_extra = int(math.ceil(0.1 * n_samples))
    total = n_samples + n_extra
    alpha = _kronecker_alpha(dimension)
    k = np.arange(1, total + 1, dtype=float)[:, None]
    u = np.mod(0.5 + k * alpha[None, :], 1.0)
    u = np.clip(u, 1e-12, 1.0 - 1e-12)
    z = ndtri(u)
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    z[: n_samples][z[:n_samples, 0] > 0.0, 0] *= -1.0
    extras = z[n_samples:]
    rest = extras[:, 1:]
    rest_norm = np.linalg.norm(rest, axis=1, keepdims=True)
    rest_norm[rest_norm == 0.0] = 1.0
    extras[:, 1:] = rest * (math.sqrt(1.0 - 0.05 ** 2) / rest_norm)
    extras[:, 0] = 0.05
    rot = _seed_rotation(dimension, seed)
    return z @ rot.T


# ------------------------------------------------------------------- probe


def _probe_integrator(pc: ProbeConfig) -> IntegratorConfig:
    # stop well below kappa, not at it: the norm can dip under the target and
    # rebound, and the contraction time must reflect the last such rebound
    return replace(
        pc.integrator,
        t_max=pc.t_max,
        r_converge=pc.kappa / 20.0,
        r_escape=pc.r_escape,
    )


def _contraction_time(traj: Trajectory, kappa: float) -> Optional[float]:
    """Last time the sampled norm crossed down through kappa.

    None when the trajectory ended above kappa.  Using the last crossing
    rather than the first touch makes T a common time at which every orbit
    sits at or below kappa, which is what the exponential envelope
    alpha*exp(-beta*t) is built from.
    """
    times = np.concatenate([seg.times for seg in traj.segments])
    norms = np.concatenate(
        [np.linalg.norm(seg.states, axis=1) for seg in traj.segments]
    )
    above = norms > kappa
    if above[-1]:
        return None
    if not above.any():
        return float(times[0])
    k = int(np.nonzero(above)[0][-1])
    n0, n1 = float(norms[k]), float(norms[k + 1])
    t0, t1 = float(times[k]), float(times[k + 1])
    if n0 == n1:
        return t1
    return t0 + (t1 - t0) * (n0 - kappa) / (n0 - n1)


def stability_probe(
    rs: Union[ReducedSystem, PiecewiseSystem], cfg: ProbeConfig = ProbeConfig()
) -> StabilityVerdict:
    """Evidence-level stability check by orbit contraction from the half sphere.

    Reduced systems with c1 > 0 are unstable by the sign of the constant
    piece and c1 = 0 precludes asymptotic stability of the reduced dynamics
    (though a full system reducing to it may still be stable); both gate to
    Inapplicable before any integration.  A full piecewise system is gated
    only on f_R1(0) > 0, since probing it at f_R1(0) = 0 is exactly the case
    of interest.

    Every sampled orbit must contract below kappa within t_max while staying
    inside r_escape.  Escape is an instability witness; anything else short
    of contraction (horizon, two-fold, repelling region) is inconclusive.

    An orbit's contraction time is the last time its norm crossed down
    through kappa, observed until the norm fell below kappa/20 or the horizon
    ran out.  T is the worst such time, so every sampled orbit is at or below
    kappa from T onward within the observed window and the reported envelope
    alpha*exp(-beta*t) holds at T, 2T, 3T.
    """
    reduced = isinstance(rs, ReducedSystem)
    if reduced:
        c1 = float(rs.constant[0])
        if c1 > 0.0:
            return StabilityVerdict(
                kind="Inapplicable",
                reason="c1_positive",
                detail="constant piece pushes away from the surface; unstable",
            )
        if c1 == 0.0:
            return StabilityVerdict(
                kind="Inapplicable",
                reason="c1_zero",
                detail=(
                    "reduced dynamics cannot be asymptotically stable; a full"
                    " system reducing to this one may still be stable"
                ),
            )
        system = rs.as_system()
    else:
        system = rs
        c1 = float(eval_field(system, Side.RIGHT, np.zeros(system.dimension))[0])
        if c1 > 0.0:
            return StabilityVerdict(
                kind="Inapplicable",
                reason="c1_positive",
                detail="right piece leaves the surface at the origin; unstable",
            )

    icfg = _probe_integrator(cfg)
    points = sample_half_sphere(system.dimension, cfg.n_samples, cfg.seed)

    def run(z: np.ndarray) -> tuple[str, Optional[float], float]:
        traj = integrate(system, z, icfg, store=True)
        return traj.status, _contraction_time(traj, cfg.kappa), traj.max_norm

    results = map_indexed(run, list(points))
    worst_T = 0.0
    worst_alpha = 0.0
    for z, (status, t_contract, peak) in zip(points, results):
        if status == "Escaped":
            return StabilityVerdict(
                kind="UnstableEvidence", witness=z.copy(), behavior="Escaped"
            )
        if status not in ("Converged", "HorizonReached"):
            detail = f"orbit from {z.tolist()} ended with {status} before contracting"
            return StabilityVerdict(kind="Inconclusive", detail=detail)
        if t_contract is None:
            detail = (
                f"orbit from {z.tolist()} was still above kappa when"
                f" {status} ended the observation"
            )
            return StabilityVerdict(kind="Inconclusive", detail=detail)
        worst_T = max(worst_T, t_contract)
        worst_alpha = max(worst_alpha, peak)
    beta = math.log(1.0 / cfg.kappa) / worst_T if worst_T > 0.0 else math.inf
    return StabilityVerdict(
        kind="StableEvidence", T=worst_T, alpha=worst_alpha, beta=beta
    )


def robustness_sweep(
    rs: ReducedSystem,
    delta: float,
    trials: int,
    cfg: ProbeConfig = ProbeConfig(),
) -> SweepReport:
    """Probe entrywise-perturbed copies of a reduced system.

    Matrix and constant entries receive independent uniform perturbations in
    [-delta, delta]; draws that would put the constant's first component on
    or past zero are rejected and redrawn, which delta < |c1| makes rare.
    """
    c1 = float(rs.constant[0])
    if delta < 0.0:
        raise InvalidDelta("delta must be nonnegative")
    if delta >= abs(c1):
        raise InvalidDelta(
            f"delta = {delta!r} is not below |c1| = {abs(c1)!r};"
            " perturbations could flip the constant's first component"
        )
    rng = np.random.default_rng(cfg.seed)
    n = rs.dimension
    verdicts: list[StabilityVerdict] = []
    perturbed: list[ReducedSystem] = []
    for _ in range(trials):
        for _attempt in range(1000):
            e_mat = rng.uniform(-delta, delta, size=(n, n))
            e_const = rng.uniform(-delta, delta, size=n)
            c_new = rs.constant + e_const
            if float(c_new[0]) < 0.0:
                break
        else:
            raise InvalidDelta("could not draw a perturbation keeping c1 < 0")
        perturbed.append(ReducedSystem(rs.matrix + e_mat, c_new))
    verdicts = map_indexed(lambda p: stability_probe(p, cfg), perturbed)
    stable = sum(1 for v in verdicts if v.kind == "StableEvidence")
    return SweepReport(
        base=rs,
        delta=delta,
        trials=trials,
        verdicts=verdicts,
        stable_fraction=stable / trials if trials else 0.0,
    )


# ----------------------------------------------------------- serialization


def verdict_to_json(verdict: StabilityVerdict) -> dict:
    out: dict = {"kind": verdict.kind}
    if verdict.kind == "StableEvidence":
        out["T"] = verdict.T
        out["alpha"] = verdict.alpha
        out["beta"] = verdict.beta
    elif verdict.kind == "UnstableEvidence":
        out["witness"] = [float(v) for v in verdict.witness]
        out["behavior"] = verdict.behavior
    elif verdict.kind == "Inconclusive":
        out["detail"] = verdict.detail
    else:
        out["reason"] = verdict.reason
        if verdict.detail:
            out["detail"] = verdict.detail
    return out


def sweep_to_json(report: SweepReport) -> dict:
    return {
        "delta": report.delta,
        "trials": report.trials,
        "stable_fraction": report.stable_fraction,
        "verdicts": [verdict_to_json(v) for v in report.verdicts],
    }


def write_verdicts_json(verdicts: dict[str, StabilityVerdict], path) -> None:
    payload = {name: verdict_to_json(v) for name, v in verdicts.items()}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
