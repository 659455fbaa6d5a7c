"""Named built-in systems for the command line and the test corpus.

Registry keys are part of the external interface; keep them stable.
"""

from __future__ import annotations

from typing import Union

import numpy as np

from .systems import AffineField, PiecewiseSystem, ReducedSystem

__all__ = [
    "BUILTIN_NAMES",
    "DEFAULT_NU",
    "four_dimensional_reduced",
    "planar_crossing",
    "planar_crossing_reduced",
    "get_builtin",
]

DEFAULT_NU = 0.2

BUILTIN_NAMES = ("paper-4d", "paper-planar-c10", "paper-planar-c10-reduced")


def four_dimensional_reduced() -> ReducedSystem:
    """Reduced system in dimension 4 whose recurrent-sliding orbits project
    onto a chaotic circle map; the stock subject of the return-map tools."""
    a = np.array(
        [
            [-0.1, 1.0, 0.0, 0.0],
            [-9.0, 0.0, 1.0, 0.0],
            [-4.0, 0.0, 0.0, 1.0],
            [-0.4, 0.0, 0.0, 0.0],
        ]
    )
    c = np.array([-1.0, 0.4, -0.2, -0.04])
    return ReducedSystem(a, c)


def _planar_left_matrix(nu: float) -> np.ndarray:
    return np.array([[-nu, 1.0], [-1.0, -nu]])


def planar_crossing(nu: float = DEFAULT_NU) -> PiecewiseSystem:
    """Planar system whose first field component is continuous across the
    surface (both pieces give x2 there), so every boundary point is a
    crossing point and no sliding occurs.  The origin is a stable focus of
    the left piece; its reduction, by contrast, has a frozen first
    coordinate on the right.
    """
    if nu <= 0.0:
        raise ValueError("nu must be positive")
    left = AffineField(_planar_left_matrix(nu), np.zeros(2))
    right = AffineField(np.array([[0.0, 1.0], [0.0, 0.0]]), np.array([0.0, -1.0]))
    return PiecewiseSystem(2, left, right)


def planar_crossing_reduced(nu: float = DEFAULT_NU) -> ReducedSystem:
    """Reduction of planar_crossing at the origin: linear left piece,
    constant right piece (0, -1) with vanishing first component."""
    if nu <= 0.0:
        raise ValueError("nu must be positive")
    return ReducedSystem(_planar_left_matrix(nu), np.array([0.0, -1.0]))


def get_builtin(
    name: str, nu: float = DEFAULT_NU
) -> Union[PiecewiseSystem, ReducedSystem]:
    """Look up a built-in system by registry key."""
    if name == "paper-4d":
        return four_dimensional_reduced()
    if name == "paper-planar-c10":
        return planar_crossing(nu)
    if name == "paper-planar-c10-reduced":
        return planar_crossing_reduced(nu)
    raise KeyError(
        f"unknown builtin {name!r}; available: {', '.join(BUILTIN_NAMES)}"
    )
