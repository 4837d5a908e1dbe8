"""Resonance extraction from probability densities.

Isolated peaks get a Levenberg-Marquardt Lorentzian fit; overlapping or
broad structures go through a rational (pole-revealing) least-squares
fit.  Energies in MeV; widths reported in keV.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import AmbiguousPeakError, FitError, ValidationError

LOGGER = logging.getLogger(__name__)

LM_LAMBDA_INIT = 1e-3
LM_LAMBDA_UP = 10.0
LM_LAMBDA_DOWN = 10.0
LM_MAX_ITER = 200
LM_PARAM_TOL = 1e-10

#: local maxima at least this fraction of the tallest one count as rivals
RIVAL_HEIGHT_FRACTION = 0.5

#: rivals must be separated from the main peak by a valley this deep
RIVAL_VALLEY_FRACTION = 0.5

#: relative residue below which a rational-fit pole is a spurious doublet
POLE_RESIDUE_FLOOR = 1e-6


@dataclass(frozen=True)
class Resonance:
    """A resonance candidate: centroid, width, 1-sigma errors, provenance."""

    e_r_mev: float
    gamma_kev: float
    e_r_err_mev: float
    gamma_err_kev: float
    method: str
    j: Optional[int] = None
    r_max_fm: Optional[float] = None

    def __post_init__(self):
        if self.gamma_kev <= 0.0:
            raise ValidationError(f"width must be positive, got {self.gamma_kev} keV")
        if self.e_r_err_mev < 0.0 or self.gamma_err_kev < 0.0:
            raise ValidationError("uncertainties must be non-negative")


@dataclass(frozen=True)
class FitReport:
    resonance: Resonance
    amplitude: float
    background: float
    chi2_reduced: float
    iterations: int
    converged: bool
    window_mev: tuple


def lorentzian(e, e_r: float, gamma_mev: float):
    """Unit-area Lorentzian density (1/pi)(G/2)/((e-e_r)^2 + (G/2)^2)."""
    if gamma_mev <= 0.0:
        raise ValidationError(f"gamma must be positive, got {gamma_mev}")
    half = 0.5 * gamma_mev
    return (half / np.pi) / ((np.asarray(e, dtype=float) - e_r) ** 2 + half**2)


def _lorentzian_jacobian(e, amp, e_r, gamma, background):
    half = 0.5 * gamma
    d = (e - e_r) ** 2 + half**2
    f = (half / np.pi) / d
    df_de_r = (half / np.pi) * 2.0 * (e - e_r) / d**2
    df_dgamma = (0.5 / np.pi) / d - (half**2 / np.pi) / d**2
    cols = [f, amp * df_de_r, amp * df_dgamma]
    if background is not None:
        cols.append(np.ones_like(e))
    return np.column_stack(cols)


def _model(e, amp, e_r, gamma, background):
    out = amp * lorentzian(e, e_r, gamma)
    if background is not None:
        out = out + background
    return out


def detect_peaks(energies: np.ndarray, values: np.ndarray) -> list[int]:
    """Indices of local maxima rising above 3x the median level."""
    y = np.asarray(values, dtype=float)
    if y.size < 3:
        return []
    floor = 3.0 * float(np.median(y))
    idx = np.nonzero((y[1:-1] > y[:-2]) & (y[1:-1] >= y[2:]) & (y[1:-1] > floor))[0] + 1
    return [int(i) for i in idx]


def estimate_fwhm(energies: np.ndarray, values: np.ndarray, peak_index: int) -> float:
    """Half-maximum crossing span around one peak, in energy units."""
    y = np.asarray(values, dtype=float)
    e = np.asarray(energies, dtype=float)
    half = 0.5 * y[peak_index]
    i = peak_index
    while i > 0 and y[i] > half:
        i -= 1
    left = e[i] if y[i] <= half else e[0]
    if i < peak_index and y[i + 1] != y[i]:
        left = e[i] + (half - y[i]) / (y[i + 1] - y[i]) * (e[i + 1] - e[i])
    k = peak_index
    while k < y.size - 1 and y[k] > half:
        k += 1
    right = e[k] if y[k] <= half else e[-1]
    if k > peak_index and y[k] != y[k - 1]:
        right = e[k - 1] + (half - y[k - 1]) / (y[k] - y[k - 1]) * (e[k] - e[k - 1])
    width = right - left
    if width <= 0.0:
        width = 2.0 * (e[1] - e[0]) if e.size > 1 else 1e-3
    return float(width)


def _check_single_peak(values: np.ndarray) -> None:
    y = np.asarray(values, dtype=float)
    top = float(y.max())
    if top <= 0.0:
        raise FitError("window holds no positive density")
    maxima = [
        i
        for i in range(1, y.size - 1)
        if y[i] > y[i - 1] and y[i] >= y[i + 1] and y[i] >= RIVAL_HEIGHT_FRACTION * top
    ]
    if len(maxima) < 2:
        return
    main = max(maxima, key=lambda i: y[i])
    for i in maxima:
        if i == main:
            continue
        lo, hi = sorted((i, main))
        valley = float(y[lo : hi + 1].min())
        if valley < RIVAL_VALLEY_FRACTION * y[i]:
            raise AmbiguousPeakError(
                "several comparable maxima in the fit window; "
                "use pade_fit for overlapping structures"
            )


def fit_lorentzian(
    energies: Sequence[float],
    values: Sequence[float],
    window_mev: Optional[tuple] = None,
    init: Optional[tuple] = None,
    with_background: bool = False,
    j: Optional[int] = None,
    r_max_fm: Optional[float] = None,
) -> FitReport:
    """Levenberg-Marquardt fit of amplitude x Lorentzian to a density sample.

    Parameters
    ----------
    energies, values : samples of the density (MeV, 1/MeV).
    window_mev : optional (lo, hi) restriction; default uses all samples.
    init : optional (e_r, gamma_mev) starting point; defaults to the peak
        location and the half-maximum span.
    with_background : add a fitted constant offset.

    Returns a FitReport whose `converged` flag reflects the parameter-change
    stopping rule; a report with `converged = False` is returned (not raised)
    when the iteration budget runs out.
    """
    e_all = np.asarray(energies, dtype=float)
    y_all = np.asarray(values, dtype=float)
    if e_all.shape != y_all.shape or e_all.ndim != 1:
        raise ValidationError("energies and values must be 1-D arrays of equal length")
    if window_mev is None:
        window_mev = (float(e_all.min()), float(e_all.max()))
    lo, hi = float(window_mev[0]), float(window_mev[1])
    mask = (e_all >= lo) & (e_all <= hi)
    e = e_all[mask]
    y = y_all[mask]
    if e.size < 8:
        raise ValidationError(
            f"need at least 8 samples in the fit window, got {e.size}"
        )
    order = np.argsort(e)
    e, y = e[order], y[order]
    _check_single_peak(y)

    ipk = int(np.argmax(y))
    if init is None:
        gamma0 = estimate_fwhm(e, y, ipk)
        e_r0 = float(e[ipk])
    else:
        e_r0, gamma0 = float(init[0]), float(init[1])
    amp0 = float(y[ipk] * np.pi * gamma0 / 2.0)
    params = [amp0, e_r0, gamma0]
    if with_background:
        params.append(0.0)
    params = np.asarray(params)

    def unpack(p):
        bg = p[3] if with_background else None
        return p[0], p[1], p[2], bg

    resid = y - _model(e, *unpack(params))
    sse = float(resid @ resid)
    lam = LM_LAMBDA_INIT
    converged = False
    iterations = 0
    for iterations in range(1, LM_MAX_ITER + 1):
        amp, e_r, gamma, bg = unpack(params)
        jac = _lorentzian_jacobian(e, amp, e_r, gamma, bg)
        jtj = jac.T @ jac
        jtr = jac.T @ resid
        try:
            delta = np.linalg.solve(jtj + lam * np.diag(np.diag(jtj)), jtr)
        except np.linalg.LinAlgError:
            lam *= LM_LAMBDA_UP
            continue
        trial = params + delta
        if trial[2] <= 0.0:
            # half the distance to the gamma > 0 boundary
            shrink = 0.5 * params[2] / max(params[2] - trial[2], 1e-300)
            trial = params + shrink * delta
        trial_resid = y - _model(e, *unpack(trial))
        trial_sse = float(trial_resid @ trial_resid)
        if trial_sse <= sse:
            rel_change = float(
                np.max(np.abs(trial - params) / np.maximum(np.abs(params), 1e-300))
            )
            params, resid, sse = trial, trial_resid, trial_sse
            lam /= LM_LAMBDA_DOWN
            if rel_change < LM_PARAM_TOL:
                converged = True
                break
        else:
            lam *= LM_LAMBDA_UP
            if lam > 1e12:
                # stuck at a sharp minimum: accept current point
                converged = True
                break

    amp, e_r, gamma, bg = unpack(params)
    jac = _lorentzian_jacobian(e, amp, e_r, gamma, bg)
    jtj = jac.T @ jac
    dof = max(e.size - params.size, 1)
    chi2_red = sse / dof
    try:
        cov = np.linalg.inv(jtj) * chi2_red
        e_r_err = float(np.sqrt(max(cov[1, 1], 0.0)))
        gamma_err = float(np.sqrt(max(cov[2, 2], 0.0)))
    except np.linalg.LinAlgError:
        e_r_err = gamma_err = 0.0
    if gamma <= 0.0:
        raise FitError(f"fit collapsed to non-positive width ({gamma:.3e} MeV)")
    resonance = Resonance(
        e_r_mev=float(e_r),
        gamma_kev=float(gamma) * 1e3,
        e_r_err_mev=e_r_err,
        gamma_err_kev=gamma_err * 1e3,
        method="window-fit",
        j=j,
        r_max_fm=r_max_fm,
    )
    return FitReport(
        resonance=resonance,
        amplitude=float(amp),
        background=float(bg) if with_background else 0.0,
        chi2_reduced=float(chi2_red),
        iterations=iterations,
        converged=converged,
        window_mev=(lo, hi),
    )


def pade_fit(
    energies: Sequence[float],
    values: Sequence[float],
    orders: tuple = (3, 4),
    j: Optional[int] = None,
    r_max_fm: Optional[float] = None,
    method: str = "window-fit",
) -> list[Resonance]:
    """Rational least-squares fit; resonances from lower-half-plane poles.

    The density is fitted by P_L(x)/Q_M(x) on a centered, scaled abscissa
    (q_0 = 1, linearized normal equations).  Complex roots of Q_M with
    negative imaginary part map to E_R = Re, Gamma = -2 Im; roots outside
    the sampled window, wider than the window, or with negligible residue
    (Froissart doublets) are discarded.
    """
    ell, m = int(orders[0]), int(orders[1])
    if ell < 0 or m < 1:
        raise ValidationError(f"orders must satisfy L >= 0, M >= 1, got {orders}")
    e = np.asarray(energies, dtype=float)
    y = np.asarray(values, dtype=float)
    if e.size < ell + m + 1:
        raise ValidationError(
            f"need at least L+M+1 = {ell + m + 1} samples, got {e.size}"
        )
    center = 0.5 * (e.min() + e.max())
    scale = 0.5 * (e.max() - e.min())
    if scale <= 0.0:
        raise ValidationError("samples span zero energy range")
    x = (e - center) / scale

    # columns: p_0..p_L, then q_1..q_M (q_0 = 1); rows: P(x) - y q(x) = y
    cols = [x**k for k in range(ell + 1)]
    cols += [-y * x**k for k in range(1, m + 1)]
    a = np.column_stack(cols)
    sol, _, rank, _ = np.linalg.lstsq(a, y, rcond=None)
    if rank < ell + m + 1:
        raise FitError(
            f"rational fit normal equations are rank-deficient "
            f"(rank {rank} < {ell + m + 1}); lower the orders"
        )
    p_coef = sol[: ell + 1]
    q_coef = np.concatenate(([1.0], sol[ell + 1 :]))

    # np.roots wants highest power first
    roots = np.roots(q_coef[::-1])
    dq = np.polynomial.polynomial.polyder(q_coef)
    out = []
    span = float(e.max() - e.min())
    y_scale = float(np.abs(y).max())
    for root in roots:
        if root.imag >= 0.0:
            continue
        e_pole = center + scale * root
        gamma = -2.0 * e_pole.imag
        if not (e.min() <= e_pole.real <= e.max()):
            continue
        if gamma > span:
            continue
        residue = np.polynomial.polynomial.polyval(
            root, p_coef
        ) / np.polynomial.polynomial.polyval(root, dq)
        if abs(residue) < POLE_RESIDUE_FLOOR * y_scale:
            continue
        out.append(
            Resonance(
                e_r_mev=float(e_pole.real),
                gamma_kev=float(gamma) * 1e3,
                e_r_err_mev=0.0,
                gamma_err_kev=0.0,
                method=method,
                j=j,
                r_max_fm=r_max_fm,
            )
        )
    out.sort(key=lambda r: r.e_r_mev)
    return out
