"""Piecewise-smooth systems split by the hyperplane {x1 = 0}.

A system has a left piece (active for x1 < 0) and a right piece (x1 > 0),
each either affine or expression-defined.  On the surface itself the two
normal components f_L1 and f_R1 decide the local picture: crossing,
attracting or repelling sliding, a one-sided tangency, or a two-fold.  The
sliding vector field is the convex combination of the pieces that is tangent
to the surface.

Sign conventions use relative tolerances: a point counts as on-surface when
|x1| <= 1e-10 * (1 + |x|), and a normal component counts as zero when its
magnitude is below 1e-12 * (1 + |x|).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import (
    CrossingError,
    DegenerateError,
    DimensionError,
    NotOnSurfaceError,
    TwoFoldError,
)
from .expressions import FieldExpression

__all__ = [
    "SURFACE_TOL",
    "SIGN_TOL",
    "Side",
    "BoundaryPointClass",
    "AffineField",
    "ExpressionField",
    "PiecewiseSystem",
    "ReducedSystem",
    "SlidingData",
    "eval_field",
    "classify_boundary_point",
    "sliding_data",
    "reduced_sliding_matrix",
    "surface_distance_tolerance",
    "sign_tolerance",
    "snap_sign",
    "surface_sample_grid",
]

SURFACE_TOL = 1e-10
SIGN_TOL = 1e-12


class Side(enum.Enum):
    LEFT = "left"
    RIGHT = "right"


class BoundaryPointClass(enum.Enum):
    CROSSING = "Crossing"
    ATTRACTING_SLIDING = "AttractingSliding"
    REPELLING_SLIDING = "RepellingSliding"
    TANGENCY_LEFT = "TangencyLeft"
    TANGENCY_RIGHT = "TangencyRight"
    TWO_FOLD = "TwoFold"


# --------------------------------------------------------------- field kinds


@dataclass(frozen=True)
class AffineField:
    """x -> matrix @ x + offset."""

    matrix: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        b = np.asarray(self.offset, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError(f"matrix of shape {m.shape} is not square")
        if b.shape != (m.shape[0],):
            raise DimensionError(
                f"offset of shape {b.shape} does not match matrix {m.shape}"
            )
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "offset", b)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.matrix @ x + self.offset


@dataclass(frozen=True)
class ExpressionField:
    """Componentwise expression field; see the expressions module."""

    expression: FieldExpression

    @property
    def dimension(self) -> int:
        return self.expression.dimension

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.expression.evaluate(x)


Field = Union[AffineField, ExpressionField]


def _check_dim(piece: Field, dimension: int, name: str) -> None:
    if piece.dimension != dimension:
        raise DimensionError(
            f"{name} piece has dimension {piece.dimension}, system has {dimension}"
        )


@dataclass(frozen=True)
class PiecewiseSystem:
    """Two smooth pieces glued along {x1 = 0}.

    left_jacobian optionally supplies an analytic Jacobian for the left
    piece; affine pieces already carry theirs.
    """

    dimension: int
    left: Field
    right: Field
    left_jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = field(
        default=None, compare=False
    )

    def __post_init__(self):
        if self.dimension < 1:
            raise DimensionError("dimension must be at least 1")
        _check_dim(self.left, self.dimension, "left")
        _check_dim(self.right, self.dimension, "right")

    @property
    def both_affine(self) -> bool:
        return isinstance(self.left, AffineField) and isinstance(
            self.right, AffineField
        )


@dataclass(frozen=True)
class ReducedSystem:
    """Linear left piece (matrix @ x), constant right piece.

    The constant's first component drives every stability statement here;
    its sign is checked by the probing code, not at construction.
    """

    matrix: np.ndarray
    constant: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        c = np.asarray(self.constant, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError(f"matrix of shape {m.shape} is not square")
        if c.shape != (m.shape[0],):
            raise DimensionError(
                f"constant of shape {c.shape} does not match matrix {m.shape}"
            )
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "constant", c)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def as_system(self) -> PiecewiseSystem:
        n = self.dimension
        return PiecewiseSystem(
            dimension=n,
            left=AffineField(self.matrix, np.zeros(n)),
            right=AffineField(np.zeros((n, n)), self.constant),
        )


@dataclass(frozen=True)
class SlidingData:
    """Convex weight on the right piece and the resulting sliding velocity."""

    weight: float
    velocity: np.ndarray


# ----------------------------------------------------------------- operators


def surface_distance_tolerance(x: np.ndarray) -> float:
    return SURFACE_TOL * (1.0 + float(np.linalg.norm(x)))


def sign_tolerance(x: np.ndarray) -> float:
    return SIGN_TOL * (1.0 + float(np.linalg.norm(x)))


def snap_sign(value: float, tol: float) -> int:
    """-1, 0, or +1 with the zero band [-tol, tol]."""
    if value > tol:
        return 1
    if value < -tol:
        return -1
    return 0


def eval_field(system: PiecewiseSystem, side: Side, x: Sequence[float]) -> np.ndarray:
    """Evaluate one piece; the piece's formula is used regardless of x's side."""
    x = np.asarray(x, dtype=float)
    if x.shape != (system.dimension,):
        raise DimensionError(
            f"state of shape {x.shape} for dimension {system.dimension}"
        )
    piece = system.left if side is Side.LEFT else system.right
    return piece(x)


def _normal_signs(system: PiecewiseSystem, x: np.ndarray) -> tuple[int, int, float, float]:
    fl1 = float(eval_field(system, Side.LEFT, x)[0])
    fr1 = float(eval_field(system, Side.RIGHT, x)[0])
    tol = sign_tolerance(x)
    return snap_sign(fl1, tol), snap_sign(fr1, tol), fl1, fr1


def _require_on_surface(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if abs(float(x[0])) > surface_distance_tolerance(x):
        raise NotOnSurfaceError(f"|x1| = {abs(float(x[0]))!r} exceeds surface tolerance")
    return x


def classify_boundary_point(
    system: PiecewiseSystem, x: Sequence[float]
) -> BoundaryPointClass:
    """Classify a surface point by the snapped signs of (f_L1, f_R1)."""
    x = _require_on_surface(np.asarray(x, dtype=float))
    sl, sr, _, _ = _normal_signs(system, x)
    if sl == 0 and sr == 0:
        return BoundaryPointClass.TWO_FOLD
    if sl == 0:
        return BoundaryPointClass.TANGENCY_LEFT
    if sr == 0:
        return BoundaryPointClass.TANGENCY_RIGHT
    if sl * sr > 0:
        return BoundaryPointClass.CROSSING
    if sl > 0:
        return BoundaryPointClass.ATTRACTING_SLIDING
    return BoundaryPointClass.REPELLING_SLIDING


def sliding_data(system: PiecewiseSystem, x: Sequence[float]) -> SlidingData:
    """Sliding weight and velocity at a point of the closed sliding set.

    weight = f_L1 / (f_L1 - f_R1) and
    velocity = (f_L1 * f_R - f_R1 * f_L) / (f_L1 - f_R1), which equals the
    convex combination weight * f_R + (1 - weight) * f_L and has first
    component exactly zero.
    """
    x = _require_on_surface(np.asarray(x, dtype=float))
    fl = eval_field(system, Side.LEFT, x)
    fr = eval_field(system, Side.RIGHT, x)
    tol = sign_tolerance(x)
    sl = snap_sign(float(fl[0]), tol)
    sr = snap_sign(float(fr[0]), tol)
    if sl == 0 and sr == 0:
        raise TwoFoldError(f"both normal components vanish at {x.tolist()}")
    if sl * sr > 0:
        raise CrossingError(
            f"normal components have equal sign at {x.tolist()}; no sliding motion"
        )
    fl1 = float(fl[0])
    fr1 = float(fr[0])
    den = fl1 - fr1
    weight = fl1 / den
    velocity = (fl1 * fr - fr1 * fl) / den
    return SlidingData(weight=weight, velocity=velocity)


def reduced_sliding_matrix(rs: ReducedSystem) -> np.ndarray:
    """Matrix of the direction field of sliding motion for a reduced system.

    (I - constant e1^T / constant[0]) @ matrix; its first row vanishes
    identically, reflecting that sliding stays inside the surface.
    """
    c1 = float(rs.constant[0])
    if c1 == 0.0:
        raise DegenerateError("constant[0] is zero; sliding matrix undefined")
    n = rs.dimension
    proj = np.eye(n) - np.outer(rs.constant / c1, np.eye(n)[0])
    return proj @ rs.matrix


def surface_sample_grid(
    dimension: int, radius: float = 1.0, points_per_axis: int = 7
) -> np.ndarray:
    """Lattice of surface points: x1 = 0, remaining coordinates on a uniform
    grid over [-radius, radius].  Shape (points_per_axis**(dimension-1), n)."""
    if dimension < 2:
        raise DimensionError("surface sampling needs dimension >= 2")
    axis = np.linspace(-radius, radius, points_per_axis)
    grids = np.meshgrid(*([axis] * (dimension - 1)), indexing="ij")
    flat = [g.reshape(-1) for g in grids]
    out = np.zeros((flat[0].size, dimension))
    for i, col in enumerate(flat):
        out[:, i + 1] = col
    return out
