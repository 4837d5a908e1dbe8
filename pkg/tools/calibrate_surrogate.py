"""Calibration script behind the frozen default_surrogate() parameters.

Solves (V0, r0) at fixed (a, rc) so the J = 0 barrier of the Woods-Saxon +
charged-sphere surrogate lands on the target height/radius, then scans the
interior-to-exterior amplitude ratio of the stationary solution to place the
quasi-bound band per partial wave.  Run from the repository root:

    python3 tools/calibrate_surrogate.py

The frozen values (6.77, 7.09, 0.20, 3.40) come from the shallow-pocket
branch of this family: its pocket at 6.45 fm holds exactly one narrow J = 0
state with medium J = 2 and broad J = 4 rotational partners, which is the
inventory the analysis pipeline needs.  Deeper branches (V0 ~ 8.4+) hold
several interleaved bands; pockets further in than ~6.3 fm require depths
of tens of MeV once the barrier is pinned, so they were rejected.
"""
import argparse
import math
import sys

import numpy as np

sys.path.insert(0, "src")

from resoscan.errors import NoBarrierError
from resoscan.potential import SurrogatePotential, SystemParams, find_barrier, total_potential
from resoscan.stationary import compute_phase_curve, integrate_tise, resonance_from_phase

PARAMS = SystemParams()
BARRIER_TARGET = np.array([6.45, 7.85])  # MeV, fm


def barrier0(v0, r0, a, rc):
    b = find_barrier(SurrogatePotential(v0, r0, a, rc), PARAMS, 0)
    return np.array([b.height_mev, b.radius_fm])


def solve_barrier(a, rc, v0, r0):
    """Damped finite-difference Newton for the J = 0 barrier target."""
    x = np.array([v0, r0], dtype=float)
    fx = barrier0(*x, a, rc) - BARRIER_TARGET
    best = (np.linalg.norm(fx), x.copy())
    for _ in range(50):
        if abs(fx[0]) < 0.05 and abs(fx[1]) < 0.15:
            break  # inside the physical tolerance band; deeper refinement is
            # pointless since find_barrier itself quantizes at ~1e-3 fm
        jac = np.zeros((2, 2))
        try:
            for j, d in enumerate((max(0.02 * x[0], 0.05), 0.02)):
                xp = x.copy()
                xp[j] += d
                jac[:, j] = (barrier0(*xp, a, rc) - BARRIER_TARGET - fx) / d
            step = np.linalg.solve(jac, fx)
        except (NoBarrierError, np.linalg.LinAlgError):
            break
        lam, moved = 1.0, False
        while lam > 1e-4:
            xn = np.maximum(x - lam * step, [1.0, 2.5])
            try:
                fn = barrier0(*xn, a, rc) - BARRIER_TARGET
            except NoBarrierError:
                lam /= 2.0
                continue
            if np.linalg.norm(fn) < np.linalg.norm(fx):
                x, fx, moved = xn, fn, True
                if np.linalg.norm(fx) < best[0]:
                    best = (np.linalg.norm(fx), x.copy())
                break
            lam /= 2.0
        if not moved:
            break
    return best[1]


def amplitude_ratio_scan(model, j, energies, dr=0.01, r_match=25.0):
    """max|u| inside the pocket over max|u| outside; peaks at resonances."""
    v = total_potential(model, PARAMS, j)
    b = find_barrier(model, PARAMS, j)
    n = int(round(r_match / dr))
    i_pocket = int(round(b.pocket_radius_fm / dr))
    i_barrier = int(round(b.radius_fm / dr))
    out = np.empty(len(energies))
    for m, e in enumerate(energies):
        u = integrate_tise(v, PARAMS, e, j, dr, n)
        out[m] = np.max(np.abs(u[max(i_pocket - 150, 0):i_barrier])) / np.max(
            np.abs(u[i_barrier + 100:])
        )
    return out


def prominent_peaks(energies, amplitude, prominence=3.0):
    found = []
    for i in range(2, len(energies) - 2):
        if (
            amplitude[i] >= amplitude[i - 1]
            and amplitude[i] >= amplitude[i + 1]
            and amplitude[i] > amplitude[i - 2]
            and amplitude[i] > amplitude[i + 2]
        ):
            base = min(
                np.min(amplitude[max(i - 150, 0):i + 1]),
                np.min(amplitude[i:i + 151]),
            )
            if amplitude[i] > prominence * max(base, 1e-30):
                found.append(float(energies[i]))
    return found


def refine_resonance(model, j, e_peak, de=0.002):
    last = None
    for half in (8 * de, 40 * de, 150 * de, 400 * de):
        try:
            curve = compute_phase_curve(
                model, PARAMS, j, max(e_peak - half, 0.3), e_peak + half,
                n_init=60, r_match_fm=25.0, dr_fm=0.01,
            )
            return resonance_from_phase(curve)
        except Exception as exc:  # try a wider window before giving up
            last = exc
    raise last


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--a", type=float, default=0.20, help="diffuseness (fm)")
    ap.add_argument("--rc", type=float, default=3.40, help="Coulomb radius (fm)")
    ap.add_argument("--v0", type=float, default=6.77, help="starting depth (MeV)")
    ap.add_argument("--r0", type=float, default=7.09, help="starting radius (fm)")
    args = ap.parse_args()

    v0, r0 = solve_barrier(args.a, args.rc, args.v0, args.r0)
    model = SurrogatePotential(v0, r0, args.a, args.rc)
    b0 = find_barrier(model, PARAMS, 0)
    b4 = find_barrier(model, PARAMS, 4)
    print(f"solved: V0={v0:.4f} MeV  r0={r0:.4f} fm  a={args.a} fm  rc={args.rc} fm")
    print(f"J=0 barrier {b0.height_mev:.4f} MeV @ {b0.radius_fm:.4f} fm, "
          f"pocket {b0.pocket_depth_mev:.4f} MeV @ {b0.pocket_radius_fm:.4f} fm")
    print(f"J=4 barrier {b4.height_mev:.4f} MeV @ {b4.radius_fm:.4f} fm")
    for j, lo, hi in ((0, 2.6, 6.4), (2, 3.0, 6.9), (4, 3.8, 7.5)):
        energies = np.arange(lo, hi, 0.002)
        amplitude = amplitude_ratio_scan(model, j, energies)
        for e_peak in prominent_peaks(energies, amplitude)[:4]:
            res = refine_resonance(model, j, e_peak)
            print(f"J={j}: E_R = {res.e_r_mev:.4f} MeV   Gamma = {res.gamma_kev:.4f} keV")


if __name__ == "__main__":
    main()
