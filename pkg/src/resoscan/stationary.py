"""Stationary scattering: TISE integration, Coulomb waves, phase shifts, poles.

The phase convention is Coulomb-relative throughout: delta is the extra
phase over point-Coulomb-plus-centrifugal scattering, so switching the
nuclear potential off gives delta = 0 identically.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    AntiResonanceError,
    DomainError,
    NotFoundError,
    NumericalError,
    PoleInstabilityError,
    ResolutionError,
    ValidationError,
)
from . import constants
from .fitting import Resonance
from .potential import PotentialModel, SystemParams, centrifugal_term, total_potential

LOGGER = logging.getLogger(__name__)

#: Numerov stability: local wavenumber times step must stay below this
NUMEROV_K_DR_LIMIT = 0.5

#: nuclear part of the potential must be below this (MeV) at the match radius
MATCH_NUCLEAR_FLOOR = 1e-3

#: |u| above this triggers a rescale during outward integration
RESCALE_THRESHOLD = 1e250

_CF_TINY = 1e-300


# ---------------------------------------------------------------------------
# Coulomb wave functions


def _coulomb_cf1(l: int, eta: float, rho: float) -> tuple[float, float]:
    """F'_l/F_l and the sign of F_l.

    The continued fraction is evaluated bottom-up from a truncated tail:
    with r_k = F_{k+1}/F_k and the standard recurrence coefficients
    R_j = sqrt(1 + (eta/j)^2), S_j = j/rho + eta/j,

        r_k = R_{k+1} / (S_{k+1} + f_{k+1}),   f_k = S_{k+1} - R_{k+1} r_k.

    Starting far enough above both l and the classical turning point the
    tail ratio is positive and negligible, and F_K > 0 there, so
    sign(F_l) = sign(prod_{k=l}^{K-1} r_k).  K is doubled until f and the
    sign stabilize.
    """
    n_start = max(100, int(2.0 * (rho + 2.0 * eta)) + 20)
    prev_f = None
    prev_sign = 0.0
    n = n_start
    while n <= 4_000_000:
        k_top = l + n
        f = (k_top + 1) / rho + eta / (k_top + 1)  # tail: r_{K} = 0
        sign = 1.0
        for k in range(k_top - 1, l - 1, -1):
            kk = k + 1
            r_coef = math.sqrt(1.0 + (eta / kk) ** 2)
            s_coef = kk / rho + eta / kk
            denom = s_coef + f
            if denom == 0.0:
                denom = _CF_TINY
            ratio = r_coef / denom
            f = s_coef - r_coef * ratio
            if ratio < 0.0:
                sign = -sign
        if prev_f is not None and abs(f - prev_f) <= 1e-15 * abs(f) and sign == prev_sign:
            return f, sign
        prev_f, prev_sign = f, sign
        n *= 2
    raise NumericalError(
        f"Coulomb CF1 did not stabilize (l = {l}, eta = {eta}, rho = {rho})"
    )


def _coulomb_cf2(l: int, eta: float, rho: float) -> complex:
    """(G' + iF')/(G + iF) by the complex continued fraction.

    Converges for rho comfortably above the classical turning point; below
    it the fraction stalls and a domain error is raised.
    """
    max_iter = 20_000
    cf = complex(_CF_TINY)
    c = cf
    d = 0.0 + 0.0j
    converged = False
    for k in range(1, max_iter + 1):
        a_k = complex(-l + k - 1, eta) * complex(l + k, eta)
        b_k = complex(2.0 * (rho - eta), 2.0 * k)
        d = b_k + a_k * d
        if d == 0.0:
            d = complex(_CF_TINY)
        c = b_k + a_k / c
        if c == 0.0:
            c = complex(_CF_TINY)
        d = 1.0 / d
        delta = c * d
        cf *= delta
        if abs(delta - 1.0) < 1e-15:
            converged = True
            break
    if not converged:
        raise DomainError(
            f"Coulomb CF2 stalled at rho = {rho} (l = {l}, eta = {eta}); "
            f"the point is too close to or below the classical turning point "
            f"{eta + math.sqrt(eta**2 + l * (l + 1)):.2f}"
        )
    return complex(0.0, 1.0 - eta / rho) + complex(0.0, 1.0 / rho) * cf


def coulomb_functions(l: int, eta: float, rho: float) -> tuple[float, float, float, float]:
    """Regular/irregular Coulomb wave functions (F, F', G, G') at rho.

    Derivatives are with respect to rho.  Built from the two continued
    fractions (F'/F and (G'+iF')/(G+iF)) plus the Wronskian normalization
    F'G - FG' = 1; the achieved Wronskian is re-checked defensively.
    """
    if l < 0 or int(l) != l:
        raise ValidationError(f"l must be a non-negative integer, got {l}")
    if rho <= 0.0:
        raise ValidationError(f"rho must be positive, got {rho}")
    l = int(l)
    f_ratio, f_sign = _coulomb_cf1(l, eta, rho)
    h = _coulomb_cf2(l, eta, rho)
    p, q = h.real, h.imag
    if q <= 0.0:
        raise DomainError(
            f"Coulomb CF2 returned a non-positive imaginary part at rho = {rho}; "
            "below the validity floor of the evaluation scheme"
        )
    f_val = f_sign * math.sqrt(q / ((f_ratio - p) ** 2 + q**2))
    fp_val = f_ratio * f_val
    g_val = (f_ratio - p) / q * f_val
    gp_val = (p * (f_ratio - p) / q - q) * f_val
    wronskian = fp_val * g_val - f_val * gp_val
    if abs(wronskian - 1.0) > 1e-8:
        raise DomainError(
            f"Coulomb function Wronskian off by {wronskian - 1.0:.2e} at "
            f"(l = {l}, eta = {eta}, rho = {rho}); scheme out of its domain"
        )
    return f_val, fp_val, g_val, gp_val


# ---------------------------------------------------------------------------
# Radial TISE


def integrate_tise(
    v_total: Callable[[np.ndarray], np.ndarray],
    params: SystemParams,
    e_mev: float,
    l: int,
    dr_fm: float,
    n_steps: int,
) -> np.ndarray:
    """Numerov outward integration of u'' = (V_total - E)/pref u on i*dr.

    The start values come from the regular series u ~ R^{l+1}(1 + b R^2)
    with b = w0/(4l+6), w0 the bare-potential term at the first point; this
    assumes the potential minus centrifugal part is regular at the origin.
    The recurrence runs in summed form (increments of w = (1 - h^2 f/12) u
    accumulated separately), which keeps rounding noise from the
    recurrence coefficients at O(eps/h) instead of O(eps/h^2).
    The overall scale is arbitrary; interior rescaling keeps |u| bounded
    and is invisible in any ratio or normalized shape.
    """
    if e_mev <= 0.0:
        raise ValidationError(f"scattering energy must be positive, got {e_mev}")
    if n_steps < 5:
        raise ValidationError("need at least 5 integration steps")
    radii = np.arange(1, n_steps + 1) * dr_fm
    v = np.asarray(v_total(radii), dtype=float)
    pref = params.kinetic_prefactor
    k_max = math.sqrt(max(float(np.max(e_mev - v)), e_mev) / pref)
    if k_max * dr_fm >= NUMEROV_K_DR_LIMIT:
        raise ResolutionError(
            f"k*dr = {k_max * dr_fm:.3f} exceeds {NUMEROV_K_DR_LIMIT}; "
            f"reduce dr below {NUMEROV_K_DR_LIMIT / k_max:.4f} fm"
        )
    h2f = dr_fm**2 * (v - e_mev) / pref
    w0 = (v[0] - centrifugal_term(params, l, radii[0]) - e_mev) / pref
    b = w0 / (4.0 * l + 6.0)
    u = np.zeros(n_steps, dtype=float)
    u[0] = radii[0] ** (l + 1) * (1.0 + b * radii[0] ** 2)
    u[1] = radii[1] ** (l + 1) * (1.0 + b * radii[1] ** 2)
    s = h2f / 12.0
    w_prev = u[0] * (1.0 - s[0])
    w_cur = u[1] * (1.0 - s[1])
    dlt = w_cur - w_prev
    for i in range(1, n_steps - 1):
        dlt += h2f[i] * u[i]
        w_cur += dlt
        u[i + 1] = w_cur / (1.0 - s[i + 1])
        if abs(u[i + 1]) > RESCALE_THRESHOLD:
            u[: i + 2] *= 1e-250
            w_cur *= 1e-250
            dlt *= 1e-250
    return u


def _five_point_derivative(u: np.ndarray, i: int, h: float) -> float:
    return (-u[i + 2] + 8.0 * u[i + 1] - 8.0 * u[i - 1] + u[i - 2]) / (12.0 * h)


def phase_shift(
    model: PotentialModel,
    params: SystemParams,
    e_mev: float,
    j: int,
    r_match_fm: float,
    dr_fm: float = 0.01,
) -> float:
    """Coulomb-relative scattering phase shift on (-pi, pi].

    The interior solution is matched at the grid point nearest r_match to
    cos(delta) F + sin(delta) G through its logarithmic derivative.  The
    nuclear potential must already be negligible there.
    """
    v_total = total_potential(model, params, j)
    point_coulomb = (
        params.charge_product * constants.E2 / r_match_fm
        + centrifugal_term(params, j, r_match_fm)
    )
    nuclear_left = abs(float(v_total(np.asarray([r_match_fm]))[0]) - point_coulomb)
    if nuclear_left > MATCH_NUCLEAR_FLOOR:
        raise ValidationError(
            f"nuclear potential is {nuclear_left:.2e} MeV at r_match = "
            f"{r_match_fm} fm (limit {MATCH_NUCLEAR_FLOOR}); move r_match out"
        )
    n_match = int(round(r_match_fm / dr_fm))
    if n_match < 5:
        raise ValidationError("r_match too small for the requested dr")
    u = integrate_tise(v_total, params, e_mev, j, dr_fm, n_match + 2)
    r_m = n_match * dr_fm
    u_m = u[n_match - 1]
    du_m = _five_point_derivative(u, n_match - 1, dr_fm)
    scale = max(abs(u_m), abs(du_m))
    if scale == 0.0:
        raise NumericalError(f"interior solution vanished at r = {r_m} fm")
    u_m, du_m = u_m / scale, du_m / scale
    k = params.wavenumber(e_mev)
    eta = params.sommerfeld(e_mev)
    f_val, fp_val, g_val, gp_val = coulomb_functions(j, eta, k * r_m)
    num = du_m * f_val - u_m * k * fp_val
    den = u_m * k * gp_val - du_m * g_val
    # the overall sign of u is arbitrary, so delta is defined modulo pi;
    # report the principal representative
    return _wrap_half_pi(math.atan2(num, den))


# ---------------------------------------------------------------------------
# Phase curves and widths


@dataclass(frozen=True)
class PhaseShiftCurve:
    """Adaptively sampled delta(E) for one partial wave, with an evaluator.

    `delta` carries the unwrapped continuous branch; `delta_raw` the
    principal values as returned by phase_shift.
    """

    j: int
    energies_mev: np.ndarray
    delta_raw: np.ndarray
    delta: np.ndarray
    eta: np.ndarray
    evaluator: Callable[[float], float] = field(repr=False, compare=False)


def _wrap_half_pi(x: float) -> float:
    """Map to the principal interval (-pi/2, pi/2] modulo pi."""
    y = math.fmod(x, math.pi)
    if y > 0.5 * math.pi:
        y -= math.pi
    elif y <= -0.5 * math.pi:
        y += math.pi
    return y


def compute_phase_curve(
    model: PotentialModel,
    params: SystemParams,
    j: int,
    e_lo_mev: float,
    e_hi_mev: float,
    n_init: int = 80,
    r_match_fm: float = 30.0,
    dr_fm: float = 0.01,
    max_points: int = 4000,
) -> PhaseShiftCurve:
    """Sample delta(E), refining until adjacent jumps are below pi/2 * 0.9.

    The initial spacing must already resolve the narrowest resonance in
    the range to within a factor of a few, or the pi rise can alias away;
    seed the window and n_init from a width estimate when hunting narrow
    structures.
    """
    if not (0.0 < e_lo_mev < e_hi_mev):
        raise ValidationError(f"bad energy range [{e_lo_mev}, {e_hi_mev}]")

    def evaluate(e: float) -> float:
        return phase_shift(model, params, e, j, r_match_fm, dr_fm)

    energies = list(np.linspace(e_lo_mev, e_hi_mev, n_init))
    deltas = [evaluate(e) for e in energies]
    gap_limit = 0.9 * 0.5 * math.pi
    min_spacing = max((e_hi_mev - e_lo_mev) * 1e-9, 1e-12)
    changed = True
    while changed and len(energies) < max_points:
        changed = False
        i = 0
        while i < len(energies) - 1 and len(energies) < max_points:
            jump = abs(_wrap_half_pi(deltas[i + 1] - deltas[i]))
            if jump > gap_limit and energies[i + 1] - energies[i] > min_spacing:
                mid = 0.5 * (energies[i] + energies[i + 1])
                energies.insert(i + 1, mid)
                deltas.insert(i + 1, evaluate(mid))
                changed = True
            else:
                i += 1
    e_arr = np.asarray(energies)
    raw = np.asarray(deltas)
    unwrapped = np.unwrap(raw, period=math.pi)
    etas = np.asarray([params.sommerfeld(e) for e in energies])
    return PhaseShiftCurve(
        j=j,
        energies_mev=e_arr,
        delta_raw=raw,
        delta=unwrapped,
        eta=etas,
        evaluator=evaluate,
    )


def resonance_from_phase(
    curve: PhaseShiftCurve,
    r_max_fm: Optional[float] = None,
) -> Resonance:
    """Resonance energy and width from the pi/2 (mod pi) upward crossing.

    E_R is the root of delta = pi/2 mod pi (bisection with the curve's
    evaluator); Gamma = 2 (d delta/dE)^-1 with Richardson-extrapolated
    central differences, step-halved until consecutive extrapolants agree
    (1e-8 target, 0.1% minimum before giving up).  With several upward
    crossings the steepest one wins.
    """
    d = curve.delta
    e = curve.energies_mev
    m_lo = math.floor((d.min() - 0.5 * math.pi) / math.pi)
    m_hi = math.ceil((d.max() - 0.5 * math.pi) / math.pi)
    upward = []
    downward_only = False
    for m in range(m_lo, m_hi + 1):
        target = 0.5 * math.pi + m * math.pi
        g = d - target
        hits = np.nonzero(g[:-1] * g[1:] <= 0.0)[0]
        for i in hits:
            if g[i] == 0.0 and g[i + 1] == 0.0:
                continue
            slope = (d[i + 1] - d[i]) / (e[i + 1] - e[i])
            if slope > 0.0:
                upward.append((slope, i, target))
            else:
                downward_only = True
    if not upward:
        if downward_only:
            raise AntiResonanceError(
                "phase crosses pi/2 (mod pi) downward only in this range"
            )
        raise NotFoundError("no pi/2 (mod pi) crossing in the sampled range")
    slope, i, _ = max(upward, key=lambda item: item[0])

    def local(e_val: float) -> float:
        return _wrap_half_pi(curve.evaluator(e_val) - 0.5 * math.pi)

    lo, hi = float(e[i]), float(e[i + 1])
    g_lo = local(lo)
    for _ in range(200):
        if hi - lo < 1e-12:
            break
        mid = 0.5 * (lo + hi)
        g_mid = local(mid)
        if g_lo * g_mid <= 0.0:
            hi = mid
        else:
            lo, g_lo = mid, g_mid
    e_r = 0.5 * (lo + hi)

    gamma_guess = 2.0 / slope
    s0 = min(gamma_guess / 8.0, (e[-1] - e[0]) / 10.0)

    def deriv(s: float) -> float:
        # difference wrapped mod pi; valid while s < Gamma/2, which the
        # shrinking step guarantees after the first iteration
        return _wrap_half_pi(
            curve.evaluator(e_r + s) - curve.evaluator(e_r - s)
        ) / (2.0 * s)

    # two Richardson levels on the even error series of the central
    # difference; halve until consecutive extrapolants agree to 1e-8 or
    # stop improving (noise floor), requiring at least 0.1% agreement
    d_vals = [deriv(s0), deriv(s0 / 2.0), deriv(s0 / 4.0)]
    r1 = [(4.0 * d_vals[k + 1] - d_vals[k]) / 3.0 for k in (0, 1)]
    r2_prev = (16.0 * r1[1] - r1[0]) / 15.0
    best_gap = math.inf
    best_val = r2_prev
    stalls = 0
    for n in range(3, 48):
        s_new = s0 / 2.0**n
        if s_new < 1e-12:
            break
        d_vals.append(deriv(s_new))
        r1.append((4.0 * d_vals[-1] - d_vals[-2]) / 3.0)
        r2 = (16.0 * r1[-1] - r1[-2]) / 15.0
        gap = abs(r2 - r2_prev) / max(abs(r2), 1e-300)
        r2_prev = r2
        if gap < best_gap:
            best_gap, best_val = gap, r2
            stalls = 0
        else:
            stalls += 1
        if best_gap <= 1e-8 or stalls >= 2:
            break
    if not math.isfinite(best_val) or best_gap > 1e-3:
        raise NumericalError("phase derivative estimate did not stabilize")
    if best_val <= 0.0:
        raise AntiResonanceError(
            f"negative phase slope at the crossing E = {e_r:.6f} MeV"
        )
    gamma = 2.0 / best_val
    return Resonance(
        e_r_mev=float(e_r),
        gamma_kev=float(gamma) * 1e3,
        e_r_err_mev=0.0,
        gamma_err_kev=0.0,
        method="phase-shift",
        j=curve.j,
        r_max_fm=r_max_fm,
    )


# ---------------------------------------------------------------------------
# S-matrix and pole continuation


@dataclass(frozen=True)
class SMatrixSample:
    energy_mev: float
    s_value: complex

    def __post_init__(self):
        if abs(abs(self.s_value) - 1.0) > 1e-8:
            raise ValidationError(
                f"|S| = {abs(self.s_value):.12f} at E = {self.energy_mev} MeV; "
                "not unimodular"
            )


def s_matrix(delta: float) -> complex:
    """S = exp(2 i delta)."""
    return complex(math.cos(2.0 * delta), math.sin(2.0 * delta))


def sample_s_matrix(curve: PhaseShiftCurve, energies: Sequence[float]) -> list[SMatrixSample]:
    return [
        SMatrixSample(energy_mev=float(e), s_value=s_matrix(curve.evaluator(float(e))))
        for e in energies
    ]


def _rational_pole(
    energies: np.ndarray,
    s_values: np.ndarray,
    ell: int,
    m: int,
) -> complex:
    """Best lower-half-plane pole of a rational fit to S(E) on the real axis."""
    center = 0.5 * (energies.min() + energies.max())
    scale = 0.5 * (energies.max() - energies.min())
    x = (energies - center) / scale
    cols = [x.astype(complex) ** k for k in range(ell + 1)]
    cols += [-s_values * x**k for k in range(1, m + 1)]
    a = np.column_stack(cols)
    sol, _, rank, _ = np.linalg.lstsq(a, s_values, rcond=None)
    if rank < ell + m + 1:
        # over-parametrized fit of exactly rational data; the min-norm
        # solution keeps the true pole and the residue filter below drops
        # the spurious common factor
        LOGGER.debug(
            "rational fit rank %d < %d at orders (%d, %d); using the "
            "minimum-norm solution",
            rank,
            ell + m + 1,
            ell,
            m,
        )
    p_coef = sol[: ell + 1]
    q_coef = np.concatenate(([1.0 + 0.0j], sol[ell + 1 :]))
    roots = np.roots(q_coef[::-1])
    dq = np.polynomial.polynomial.polyder(q_coef)
    span = float(energies.max() - energies.min())
    best = None
    for root in roots:
        e_pole = center + scale * root
        if e_pole.imag >= 0.0:
            continue
        gamma = -2.0 * e_pole.imag
        if gamma > span:
            continue
        if not (energies.min() - 0.5 * span <= e_pole.real <= energies.max() + 0.5 * span):
            continue
        residue = np.polynomial.polynomial.polyval(
            root, p_coef
        ) / np.polynomial.polynomial.polyval(root, dq)
        if abs(residue) < 1e-8:
            continue
        dist = abs(e_pole.real - center)
        if best is None or dist < best[0]:
            best = (dist, e_pole)
    if best is None:
        raise NotFoundError(
            f"no lower-half-plane pole inside the window at orders ({ell}, {m})"
        )
    return best[1]


def find_pole(
    samples: Sequence[SMatrixSample],
    orders: tuple = (2, 2),
    j: Optional[int] = None,
) -> Resonance:
    """S-matrix pole by rational continuation from real-axis samples.

    A pole E_R - i Gamma/2 from the (L, M) fit must be confirmed by the
    (L+1, M+1) fit within 1% of the width, otherwise the continuation is
    reported as unstable with both candidates attached.
    """
    ell, m = int(orders[0]), int(orders[1])
    if len(samples) < ell + m + 2 + 2:
        raise ValidationError(
            f"need at least {ell + m + 4} samples for orders {orders} plus the "
            f"stability check, got {len(samples)}"
        )
    energies = np.asarray([s.energy_mev for s in samples], dtype=float)
    s_vals = np.asarray([s.s_value for s in samples], dtype=complex)
    pole_a = _rational_pole(energies, s_vals, ell, m)
    pole_b = _rational_pole(energies, s_vals, ell + 1, m + 1)
    gamma_a = -2.0 * pole_a.imag
    moved = abs(pole_a - pole_b) / gamma_a
    resonance = Resonance(
        e_r_mev=float(pole_a.real),
        gamma_kev=float(gamma_a) * 1e3,
        e_r_err_mev=0.0,
        gamma_err_kev=0.0,
        method="pole",
        j=j,
    )
    if moved > 0.01:
        other = Resonance(
            e_r_mev=float(pole_b.real),
            gamma_kev=float(-2.0 * pole_b.imag) * 1e3,
            e_r_err_mev=0.0,
            gamma_err_kev=0.0,
            method="pole",
            j=j,
        )
        raise PoleInstabilityError(
            f"pole moved by {moved * 100:.2f}% of the width between orders "
            f"{orders} and ({ell + 1}, {m + 1})",
            candidates=(resonance, other),
        )
    return resonance


# ---------------------------------------------------------------------------
# Persistence


def save_phase_curve(path, curve: PhaseShiftCurve, extra_metadata=None) -> None:
    """CSV dump "E_MeV, delta_rad, delta_unwrapped_rad, eta" with '#' header."""
    meta = {"j": curve.j, "n_samples": curve.energies_mev.size}
    if extra_metadata:
        meta.update(extra_metadata)
    with open(path, "w", encoding="utf-8") as fh:
        for key, val in meta.items():
            fh.write(f"# {key} = {val}\n")
        fh.write("E_MeV,delta_rad,delta_unwrapped_rad,eta\n")
        for e, raw, unw, eta in zip(
            curve.energies_mev, curve.delta_raw, curve.delta, curve.eta
        ):
            # plain-float repr round-trips bit-exactly through float()
            fh.write(f"{float(e)!r},{float(raw)!r},{float(unw)!r},{float(eta)!r}\n")


def load_phase_curve(path) -> tuple[dict, np.ndarray]:
    """Read a phase CSV back as (metadata, record array of the four columns)."""
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
            if line.startswith("E_MeV"):
                continue
            rows.append([float(tok) for tok in line.split(",")])
    if not rows:
        raise ValidationError(f"{path}: phase file holds no samples")
    return meta, np.asarray(rows)
