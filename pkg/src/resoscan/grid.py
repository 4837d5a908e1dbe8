"""Uniform radial grids and grid-sampled wave functions.

The radial domain (0, R_max] is sampled at R_i = i * dR for i = 1..N;
the origin itself is excluded because the kinetic-energy representation
used in :mod:`resoscan.hamiltonian` builds the R = 0 node condition into
its matrix elements.  All inner products carry the dR quadrature weight.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInputError, ValidationError

#: relative tolerance for "new endpoint is a whole number of steps away"
_COMMENSURATE_RTOL = 1e-9

#: interior probability below this is treated as numerically empty
INTERIOR_NORM_FLOOR = 1e-14


@dataclass(frozen=True)
class RadialGrid:
    """Uniform grid R_i = i * delta_r, i = 1..n_points.

    Attributes
    ----------
    n_points : int
        Number of grid points (origin excluded).
    delta_r : float
        Grid spacing in fm.
    """

    n_points: int
    delta_r: float

    def __post_init__(self):
        if self.n_points < 2:
            raise ValidationError(f"grid needs at least 2 points, got {self.n_points}")
        if not (self.delta_r > 0.0) or not np.isfinite(self.delta_r):
            raise ValidationError(f"grid spacing must be positive, got {self.delta_r}")

    @property
    def r_max(self) -> float:
        return self.n_points * self.delta_r

    @property
    def points(self) -> np.ndarray:
        """Grid radii in fm, shape (n_points,)."""
        return np.arange(1, self.n_points + 1, dtype=float) * self.delta_r

    def index_of(self, r: float) -> int:
        """Largest i (0-based) with R_i <= r."""
        return min(int(np.floor(r / self.delta_r + _COMMENSURATE_RTOL)), self.n_points) - 1


def make_grid(r_max: float, n_points: int) -> RadialGrid:
    """Build the uniform radial grid covering (0, r_max] with n_points points."""
    if not (r_max > 0.0) or not np.isfinite(r_max):
        raise ValidationError(f"r_max must be positive and finite, got {r_max}")
    if n_points < 2:
        raise ValidationError(f"n_points must be >= 2, got {n_points}")
    return RadialGrid(n_points=int(n_points), delta_r=r_max / int(n_points))


@dataclass(frozen=True)
class GridFunction:
    """Complex-valued function sampled on a :class:`RadialGrid`."""

    grid: RadialGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != (self.grid.n_points,):
            raise ValidationError(
                f"values shape {vals.shape} does not match grid ({self.grid.n_points},)"
            )
        object.__setattr__(self, "values", vals)

    def norm_squared(self) -> float:
        """dR-weighted squared L2 norm."""
        return float(self.grid.delta_r * np.vdot(self.values, self.values).real)

    def norm(self) -> float:
        return float(np.sqrt(self.norm_squared()))

    def inner(self, other: "GridFunction") -> complex:
        """dR-weighted inner product <self|other>."""
        if other.grid != self.grid:
            raise ValidationError("inner product requires functions on the same grid")
        return complex(self.grid.delta_r * np.vdot(self.values, other.values))

    def density(self) -> np.ndarray:
        """Radial probability density |psi(R_i)|^2 (real array)."""
        return np.abs(self.values) ** 2

    def normalized(self) -> "GridFunction":
        nrm = self.norm()
        if nrm < np.sqrt(INTERIOR_NORM_FLOOR):
            raise DegenerateInputError("cannot normalize a numerically zero function")
        return GridFunction(self.grid, self.values / nrm)


def extend(fn: GridFunction, new_r_max: float) -> GridFunction:
    """Zero-pad a grid function onto a larger domain with identical spacing.

    The new endpoint must be a whole number of steps from the origin; the
    values on the original points are copied verbatim, so norms and local
    densities are preserved exactly.
    """
    dr = fn.grid.delta_r
    if new_r_max < fn.grid.r_max * (1.0 - _COMMENSURATE_RTOL):
        raise ValidationError(
            f"extension target {new_r_max} fm is smaller than the current domain "
            f"{fn.grid.r_max} fm"
        )
    n_new = int(round(new_r_max / dr))
    if abs(n_new * dr - new_r_max) > _COMMENSURATE_RTOL * max(new_r_max, dr):
        raise ValidationError(
            f"extension target {new_r_max} fm is not commensurate with spacing {dr} fm"
        )
    if n_new == fn.grid.n_points:
        return fn
    out = np.zeros(n_new, dtype=complex)
    out[: fn.grid.n_points] = fn.values
    return GridFunction(RadialGrid(n_points=n_new, delta_r=dr), out)


def interior_part(fn: GridFunction, r_cut: float) -> GridFunction:
    """Project onto R <= r_cut, zero the exterior, and renormalize to unit norm.

    Raises
    ------
    DegenerateInputError
        If the interior probability is below INTERIOR_NORM_FLOOR, i.e. the
        state has no usable interior component.
    """
    if not (0.0 < r_cut <= fn.grid.r_max * (1.0 + _COMMENSURATE_RTOL)):
        raise ValidationError(
            f"r_cut = {r_cut} fm must lie inside the grid domain (0, {fn.grid.r_max}]"
        )
    mask = fn.grid.points <= r_cut * (1.0 + _COMMENSURATE_RTOL)
    vals = np.where(mask, fn.values, 0.0 + 0.0j)
    weight = float(fn.grid.delta_r * np.sum(np.abs(vals) ** 2))
    if weight < INTERIOR_NORM_FLOOR:
        raise DegenerateInputError(
            f"interior probability {weight:.3e} below floor {INTERIOR_NORM_FLOOR:.0e} "
            f"for r_cut = {r_cut} fm"
        )
    return GridFunction(fn.grid, vals / np.sqrt(weight))
