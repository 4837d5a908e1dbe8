"""Gaussian wave packets and Chebyshev time evolution.

Times are carried in seconds and converted to inverse-MeV internally
through hbar; energies in MeV, lengths in fm throughout.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import jv

from .constants import HBAR_MEV_S
from .errors import (
    ContainmentError,
    DegenerateInputError,
    PropagationError,
    StopConditionError,
    ValidationError,
)
from .grid import GridFunction, RadialGrid
from .hamiltonian import DiscreteHamiltonian
from .potential import PotentialModel, SystemParams, total_potential

LOGGER = logging.getLogger(__name__)

#: edge amplitude must stay below this fraction of the peak amplitude
CONTAINMENT_RATIO = 1e-10

#: exterior probability below this is treated as "no recoiling body"
EXTERIOR_PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class GaussianSpec:
    """Incoming Gaussian packet: center, spatial width, inward boost.

    Both the mean wavenumber and the mean energy are stored; use
    `make_packet_spec` to fill in whichever one you did not choose,
    keeping the pair consistent for a given reduced mass.
    """

    r0_fm: float
    sigma_fm: float
    k0_invfm: float
    e0_mev: float

    def __post_init__(self):
        if self.sigma_fm <= 0.0:
            raise ValidationError(f"sigma must be positive, got {self.sigma_fm}")
        if self.r0_fm <= 0.0:
            raise ValidationError(f"r0 must be positive, got {self.r0_fm}")
        if self.k0_invfm <= 0.0:
            raise ValidationError(f"k0 must be positive, got {self.k0_invfm}")
        if self.e0_mev <= 0.0:
            raise ValidationError(f"e0 must be positive, got {self.e0_mev}")


def make_packet_spec(
    r0_fm: float,
    sigma_fm: float,
    params: SystemParams,
    k0_invfm: Optional[float] = None,
    e0_mev: Optional[float] = None,
) -> GaussianSpec:
    """Build a GaussianSpec from either the mean wavenumber or the mean energy.

    If both are supplied they must agree (relative 1e-10) under
    e = (hbar_c k)^2 / (2 mu c^2) for the given system parameters.
    """
    if k0_invfm is None and e0_mev is None:
        raise ValidationError("provide k0_invfm or e0_mev")
    if k0_invfm is None:
        k0_invfm = params.wavenumber(e0_mev)
    e_from_k = (params.hbar_c * k0_invfm) ** 2 / (2.0 * params.reduced_mass_mev)
    if e0_mev is None:
        e0_mev = e_from_k
    elif abs(e_from_k - e0_mev) > 1e-10 * abs(e0_mev):
        raise ValidationError(
            f"k0 = {k0_invfm} fm^-1 implies e0 = {e_from_k:.12g} MeV, "
            f"inconsistent with requested e0 = {e0_mev:.12g} MeV"
        )
    return GaussianSpec(r0_fm=r0_fm, sigma_fm=sigma_fm,
                        k0_invfm=k0_invfm, e0_mev=e0_mev)


@dataclass(frozen=True)
class PropagationSpec:
    """Time step (seconds), series truncation tolerance, step budget."""

    dt_s: float
    tolerance: float = 1e-15
    max_steps: int = 100_000

    def __post_init__(self):
        if self.dt_s <= 0.0:
            raise ValidationError(f"dt must be positive, got {self.dt_s}")
        if not (0.0 < self.tolerance <= 1e-8):
            raise ValidationError(
                f"tolerance must lie in (0, 1e-8], got {self.tolerance}"
            )
        if self.max_steps < 1:
            raise ValidationError(f"max_steps must be >= 1, got {self.max_steps}")


@dataclass(frozen=True)
class WavePacketState:
    psi: GridFunction
    elapsed_time_s: float
    step_count: int


def gaussian_packet(
    spec: GaussianSpec,
    grid: RadialGrid,
    model: Optional[PotentialModel] = None,
    params: Optional[SystemParams] = None,
    j: int = 0,
) -> WavePacketState:
    """Discretize the boosted Gaussian and renormalize it to one on the grid.

    The packet must be contained: amplitude at both grid edges below
    CONTAINMENT_RATIO of the peak.  If a potential model is supplied, the
    center is additionally checked against the outermost classical turning
    point of the slow spectral components (k0 - 3/sigma); a violation only
    logs a warning since it degrades, not invalidates, the run.
    """
    r = grid.points
    envelope = np.exp(-((r - spec.r0_fm) ** 2) / (2.0 * spec.sigma_fm**2))
    values = (
        np.pi**-0.25
        / np.sqrt(spec.sigma_fm)
        * envelope
        * np.exp(-1j * spec.k0_invfm * (r - spec.r0_fm))
    )
    peak = float(np.abs(values).max())
    for label, idx in (("inner", 0), ("outer", grid.n_points - 1)):
        if abs(values[idx]) > CONTAINMENT_RATIO * peak:
            raise ContainmentError(
                f"packet not contained at the {label} grid edge: "
                f"|psi| = {abs(values[idx]):.3e} vs peak {peak:.3e} "
                f"(r0 = {spec.r0_fm} fm, sigma = {spec.sigma_fm} fm, "
                f"r_max = {grid.r_max} fm)"
            )
    if model is not None and params is not None:
        _warn_if_inside_turning_point(spec, grid, model, params, j)
    psi = GridFunction(grid, values).normalized()
    return WavePacketState(psi=psi, elapsed_time_s=0.0, step_count=0)


def _warn_if_inside_turning_point(spec, grid, model, params, j) -> None:
    k_slow = spec.k0_invfm - 3.0 / spec.sigma_fm
    if k_slow <= 0.0:
        LOGGER.warning(
            "packet momentum spread reaches zero wavenumber "
            "(k0 = %.4f, 3/sigma = %.4f); no turning-point check possible",
            spec.k0_invfm,
            3.0 / spec.sigma_fm,
        )
        return
    e_slow = (params.hbar_c * k_slow) ** 2 / (2.0 * params.reduced_mass_mev)
    v = total_potential(model, params, j)(grid.points)
    above = np.nonzero(v >= e_slow)[0]
    if above.size == 0:
        return
    r_turn = grid.points[above[-1]]
    if spec.r0_fm <= r_turn:
        LOGGER.warning(
            "packet center r0 = %.1f fm is inside the outermost classical "
            "turning point %.1f fm for its slow components (e = %.3f MeV); "
            "spectral content will be distorted",
            spec.r0_fm,
            r_turn,
            e_slow,
        )


class ChebyshevPropagator:
    """Polynomial expansion of the evolution operator over one time step.

    The Hamiltonian is mapped onto [-1, 1] with the spectral bounds and
    exp(-i H dt / hbar) is expanded in Chebyshev polynomials with Bessel
    coefficients

        c_k = (2 - delta_k0) exp(-i a_c) J_k(a_s) (-i)^k,
        a_s = (E_max - E_min) dt / (2 hbar),  a_c = (E_max + E_min) dt / (2 hbar),

    truncated at the first index past which |c_k| stays below the tolerance.
    No renormalization is applied anywhere: norm conservation is a measured
    property, not an enforced one.
    """

    MAX_ORDER_SLACK = 100

    def __init__(self, ham: DiscreteHamiltonian, prop: PropagationSpec):
        self.ham = ham
        self.prop = prop
        e_min, e_max = ham.spectral_bounds()
        tau = prop.dt_s / HBAR_MEV_S  # 1/MeV
        self.alpha_s = 0.5 * (e_max - e_min) * tau
        self.alpha_c = 0.5 * (e_max + e_min) * tau
        self._e_mid = 0.5 * (e_max + e_min)
        self._e_half_span = 0.5 * (e_max - e_min)
        max_order = int(4.0 * self.alpha_s) + self.MAX_ORDER_SLACK
        k = np.arange(max_order + 1)
        mags = np.abs(jv(k, self.alpha_s))
        mags[1:] *= 2.0
        keep = np.nonzero(mags >= prop.tolerance)[0]
        if keep.size == 0:
            order = 0
        else:
            order = int(keep[-1])
        if order >= max_order:
            raise PropagationError(
                f"Chebyshev series not converged below {prop.tolerance:.1e} "
                f"by order {max_order} (a_s = {self.alpha_s:.1f}); "
                "spectral bounds are too tight or dt too large"
            )
        coef = (2.0 - (k[: order + 1] == 0)) * jv(k[: order + 1], self.alpha_s)
        self.coef = np.exp(-1j * self.alpha_c) * coef * (-1j) ** k[: order + 1]
        self.order = order

    def _apply_normalized(self, x: np.ndarray) -> np.ndarray:
        return (self.ham.apply(x) - self._e_mid * x) / self._e_half_span

    def step_values(self, values: np.ndarray) -> np.ndarray:
        phi_prev = np.asarray(values, dtype=complex)
        acc = self.coef[0] * phi_prev
        if self.order == 0:
            return acc
        phi = self._apply_normalized(phi_prev)
        acc = acc + self.coef[1] * phi
        for k in range(2, self.order + 1):
            phi_prev, phi = phi, 2.0 * self._apply_normalized(phi) - phi_prev
            acc += self.coef[k] * phi
        return acc

    def step(self, state: WavePacketState) -> WavePacketState:
        new_values = self.step_values(state.psi.values)
        return WavePacketState(
            psi=GridFunction(state.psi.grid, new_values),
            elapsed_time_s=state.elapsed_time_s + self.prop.dt_s,
            step_count=state.step_count + 1,
        )


def propagate_until(
    state: WavePacketState,
    propagator: ChebyshevPropagator,
    stop: Callable[[WavePacketState], bool],
    log_every: int = 0,
) -> WavePacketState:
    """Step until the predicate fires; the step budget comes from the spec.

    Raises StopConditionError carrying the last state when the budget is
    exhausted first.
    """
    max_steps = propagator.prop.max_steps
    for taken in range(max_steps):
        if stop(state):
            return state
        state = propagator.step(state)
        if log_every and state.step_count % log_every == 0:
            LOGGER.info(
                "step %d, t = %.3e s, norm = %.15f",
                state.step_count,
                state.elapsed_time_s,
                state.psi.norm(),
            )
    if stop(state):
        return state
    raise StopConditionError(
        f"stop condition not met within {max_steps} steps "
        f"(t = {state.elapsed_time_s:.3e} s)",
        state=state,
    )


def body_position(state: WavePacketState, r_exterior_fm: float) -> float:
    """Location of the density maximum outside r_exterior, parabola-refined."""
    grid = state.psi.grid
    mask = grid.points > r_exterior_fm
    if not np.any(mask):
        raise DegenerateInputError(
            f"r_exterior = {r_exterior_fm} fm leaves no grid points"
        )
    dens = state.psi.density()
    start = int(np.argmax(mask))
    exterior = dens[start:]
    if float(exterior.sum()) * grid.delta_r < EXTERIOR_PROB_FLOOR:
        raise DegenerateInputError(
            f"no probability outside {r_exterior_fm} fm "
            f"(exterior weight < {EXTERIOR_PROB_FLOOR:.0e})"
        )
    i = start + int(np.argmax(exterior))
    if i == start or i == grid.n_points - 1:
        return float(grid.points[i])
    y0, y1, y2 = dens[i - 1], dens[i], dens[i + 1]
    denom = y0 - 2.0 * y1 + y2
    shift = 0.0 if denom == 0.0 else 0.5 * (y0 - y2) / denom
    return float(grid.points[i] + shift * grid.delta_r)


class RecoilCrossing:
    """Stateful predicate: body dips to/below a radius, then recoils past it.

    Fires on the first state whose exterior body position is back at or
    beyond `threshold_fm` after having been at or below it.
    """

    def __init__(self, threshold_fm: float, r_exterior_fm: float):
        if threshold_fm <= r_exterior_fm:
            raise ValidationError(
                f"threshold {threshold_fm} fm must exceed the exterior "
                f"cutoff {r_exterior_fm} fm"
            )
        self.threshold_fm = threshold_fm
        self.r_exterior_fm = r_exterior_fm
        self._went_in = False

    def __call__(self, state: WavePacketState) -> bool:
        pos = body_position(state, self.r_exterior_fm)
        if not self._went_in:
            if pos <= self.threshold_fm:
                self._went_in = True
            return False
        return pos >= self.threshold_fm


class TimeReached:
    """Stop once elapsed time is at or past the target (seconds)."""

    def __init__(self, t_stop_s: float):
        self.t_stop_s = t_stop_s

    def __call__(self, state: WavePacketState) -> bool:
        return state.elapsed_time_s >= self.t_stop_s


def save_snapshot(path, state: WavePacketState, extra_metadata=None) -> None:
    """CSV dump "R_fm, re_psi, im_psi, density" with a '#' metadata header."""
    grid = state.psi.grid
    meta = {
        "n_points": grid.n_points,
        "delta_r_fm": repr(grid.delta_r),
        "r_max_fm": repr(grid.r_max),
        "elapsed_time_s": repr(state.elapsed_time_s),
        "step_count": state.step_count,
    }
    if extra_metadata:
        meta.update(extra_metadata)
    dens = state.psi.density()
    with open(path, "w", encoding="utf-8") as fh:
        for key, val in meta.items():
            fh.write(f"# {key} = {val}\n")
        fh.write("R_fm,re_psi,im_psi,density\n")
        for r, v, d in zip(grid.points, state.psi.values, dens):
            # plain-float repr round-trips bit-exactly through float()
            fh.write(f"{float(r)!r},{float(v.real)!r},{float(v.imag)!r},{float(d)!r}\n")


def load_snapshot(path) -> tuple[WavePacketState, dict]:
    """Read a snapshot written by save_snapshot; returns (state, metadata)."""
    meta: dict = {}
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line.lstrip("# ").partition("=")
                meta[key.strip()] = val.strip()
                continue
            if line.startswith("R_fm"):
                continue
            parts = line.split(",")
            rows.append((float(parts[0]), float(parts[1]), float(parts[2])))
    if not rows:
        raise ValidationError(f"{path}: snapshot holds no samples")
    arr = np.asarray(rows)
    n = arr.shape[0]
    delta_r = float(meta.get("delta_r_fm", arr[0, 0]))
    grid = RadialGrid(n_points=n, delta_r=delta_r)
    if not np.allclose(grid.points, arr[:, 0], rtol=1e-12, atol=0.0):
        raise ValidationError(f"{path}: radii are not the uniform grid they claim")
    psi = GridFunction(grid, arr[:, 1] + 1j * arr[:, 2])
    state = WavePacketState(
        psi=psi,
        elapsed_time_s=float(meta.get("elapsed_time_s", 0.0)),
        step_count=int(meta.get("step_count", 0)),
    )
    return state, meta
