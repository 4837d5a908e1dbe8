"""End-to-end resonance survey: six restartable stages over one run directory.

Stage order and artifacts (all under the configured output directory):

    propagate   propagate/initial.csv, propagate/snapshot_j{J}.csv,
                propagate/run_log.json
    spectrum    spectrum/j{J}/effective_r{R}_eps{eps}kev.csv, spectrum/index.json
    fit         fit/resonances.json
    phase       phase/curve_j{J}.csv, phase/resonances.json
    poles       poles/samples_j{J}.csv, poles/resonances.json
    compare     compare/compare.json, compare/compare.txt

Each stage reads only files written by earlier stages, so any stage can be
rerun in isolation; a missing input names the command that produces it.
`run_compare` is the exception: it computes whatever is missing, then builds
the cross-method table purely from the artifacts on disk.  Nothing here
depends on wall-clock time or iteration order of anything unordered, which
is what makes two compare runs byte-identical.

The three resonance routes stay independent where it matters: the phase and
pole stages integrate the stationary equation directly and never touch the
propagated wave function.  The window route only *seeds* their scan windows
(centroid and width scale); a narrow resonance's phase jump is invisible to
any fixed coarse energy scan, so some locator is unavoidable, and seeding
with the window result costs no independence in the extracted values.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Optional

import numpy as np

from .config import RunConfig, emit, to_dict
from .errors import (
    AntiResonanceError,
    FitError,
    MissingArtifactError,
    NotFoundError,
    NumericalError,
    PoleInstabilityError,
    ValidationError,
)
from .fitting import Resonance, detect_peaks, estimate_fwhm, fit_lorentzian, pade_fit
from .grid import extend, interior_part, make_grid
from .hamiltonian import build_hamiltonian
from .potential import find_barrier
from .propagation import (
    ChebyshevPropagator,
    PropagationSpec,
    RecoilCrossing,
    body_position,
    gaussian_packet,
    load_snapshot,
    make_packet_spec,
    propagate_until,
    save_snapshot,
)
from .solvers import DIRECT_SOLVER_MAX_N, LanczosResolvent, TridiagonalShiftSolver
from .stationary import (
    SMatrixSample,
    compute_phase_curve,
    find_pole,
    phase_shift,
    resonance_from_phase,
    s_matrix,
    save_phase_curve,
)
from .window import (
    WindowSpec,
    density_function,
    effective_spectrum,
    load_spectrum,
    resolution_estimate,
    save_spectrum,
)

LOGGER = logging.getLogger(__name__)

# scan geometry for the stationary routes, in units of the seeded width:
# the phase scan must bracket the full pi swing (>= tens of Gamma for a
# clean background), the pole fit wants a few Gamma so the rational model
# stays local
PHASE_SPAN_WIDTHS = 30.0
PHASE_SPAN_FLOOR_MEV = 0.02
PHASE_POINTS_PER_WIDTH = 3.0
POLE_SPAN_WIDTHS = 3.5
POLE_SAMPLES = 24
SEED_WIDTH_FLOOR_MEV = 1e-5


class RunPaths:
    """Artifact locations for one run directory."""

    def __init__(self, root):
        self.root = Path(root)

    @classmethod
    def from_config(cls, cfg: RunConfig) -> "RunPaths":
        return cls(cfg.out_dir)

    def config_echo(self) -> Path:
        return self.root / "config.yaml"

    def initial_snapshot(self) -> Path:
        return self.root / "propagate" / "initial.csv"

    def snapshot(self, j: int) -> Path:
        return self.root / "propagate" / f"snapshot_j{j}.csv"

    def run_log(self) -> Path:
        return self.root / "propagate" / "run_log.json"

    def spectrum_file(self, j: int, r_max_fm: float, epsilon_mev: float) -> Path:
        name = f"effective_r{r_max_fm:g}_eps{epsilon_mev * 1e3:g}kev.csv"
        return self.root / "spectrum" / f"j{j}" / name

    def spectrum_index(self) -> Path:
        return self.root / "spectrum" / "index.json"

    def fit_results(self) -> Path:
        return self.root / "fit" / "resonances.json"

    def phase_curve(self, j: int) -> Path:
        return self.root / "phase" / f"curve_j{j}.csv"

    def phase_results(self) -> Path:
        return self.root / "phase" / "resonances.json"

    def pole_samples(self, j: int) -> Path:
        return self.root / "poles" / f"samples_j{j}.csv"

    def pole_results(self) -> Path:
        return self.root / "poles" / "resonances.json"

    def compare_json(self) -> Path:
        return self.root / "compare" / "compare.json"

    def compare_text(self) -> Path:
        return self.root / "compare" / "compare.txt"


def _require(path: Path, producer: str) -> Path:
    if not path.exists():
        raise MissingArtifactError(
            f"{path} is missing; run `resoscan {producer}` first"
        )
    return path


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _read_json(path: Path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _echo_config(cfg: RunConfig, paths: RunPaths) -> None:
    paths.root.mkdir(parents=True, exist_ok=True)
    paths.config_echo().write_text(emit(cfg), encoding="utf-8")


# ---------------------------------------------------------------------------
# Stage 1: propagate


def run_propagation(cfg: RunConfig) -> dict:
    """Propagate the packet for every J until it recoils past the stop radius.

    Writes the initial packet once (it is J-independent), one snapshot per J
    at the stop crossing, and a run log with the conservation measurements.
    """
    paths = RunPaths.from_config(cfg)
    _echo_config(cfg, paths)
    paths.run_log().parent.mkdir(parents=True, exist_ok=True)
    params = cfg.system_params()
    model = cfg.potential_model()
    grid = make_grid(cfg.grid.r_max_fm, cfg.grid.n_points)
    packet = make_packet_spec(
        cfg.packet.r0_fm, cfg.packet.sigma_fm, params, e0_mev=cfg.packet.e0_mev
    )
    prop = PropagationSpec(
        dt_s=cfg.propagation.dt_s,
        tolerance=cfg.propagation.tolerance,
        max_steps=cfg.propagation.max_steps,
    )
    log: dict = {}
    for i, j in enumerate(cfg.j_list):
        ham = build_hamiltonian(grid, params, model, j)
        start = gaussian_packet(packet, grid, model, params, j)
        if i == 0:
            save_snapshot(
                paths.initial_snapshot(),
                start,
                extra_metadata={
                    "r0_fm": repr(cfg.packet.r0_fm),
                    "sigma_fm": repr(cfg.packet.sigma_fm),
                    "e0_mev": repr(cfg.packet.e0_mev),
                },
            )
        e_start = ham.expectation(start.psi.values)
        propagator = ChebyshevPropagator(ham, prop)
        stop = RecoilCrossing(cfg.propagation.stop_radius_fm, cfg.propagation.exterior_fm)
        final = propagate_until(start, propagator, stop)
        e_final = ham.expectation(final.psi.values)
        body = body_position(final, cfg.propagation.exterior_fm)
        save_snapshot(paths.snapshot(j), final, extra_metadata={"j": j})
        log[str(j)] = {
            "body_position_fm": float(body),
            "chebyshev_order": int(propagator.order),
            "elapsed_time_s": float(final.elapsed_time_s),
            "energy_drift_rel": float(abs(e_final - e_start) / abs(e_start)),
            "energy_mev": float(e_start),
            "norm_drift": float(abs(final.psi.norm() - 1.0)),
            "steps": int(final.step_count),
        }
        LOGGER.info(
            "J = %d: stopped at %.2f fm after %d steps (t = %.3e s), "
            "norm drift %.2e, <H> drift %.2e",
            j,
            body,
            final.step_count,
            final.elapsed_time_s,
            log[str(j)]["norm_drift"],
            log[str(j)]["energy_drift_rel"],
        )
    _write_json(paths.run_log(), log)
    return log


# ---------------------------------------------------------------------------
# Stage 2: spectra


def _build_engines(ham, psi_interior, psi_reference):
    """One dense reduction serves both states; Krylov spaces are per-seed."""
    if ham.grid.n_points <= DIRECT_SOLVER_MAX_N:
        engine = TridiagonalShiftSolver(ham)
        return engine, engine
    return (
        LanczosResolvent(ham, psi_interior.values),
        LanczosResolvent(ham, psi_reference.values),
    )


def _peak_energy(spectrum) -> float:
    """Tallest density peak over the computed bins; global max as fallback."""
    centroids, density = density_function(spectrum)
    if spectrum.excluded is not None:
        keep = ~spectrum.excluded
        centroids, density = centroids[keep], density[keep]
    if centroids.size == 0:
        raise NumericalError("every window bin was excluded; no peak to locate")
    peaks = detect_peaks(centroids, density)
    if peaks:
        best = max(peaks, key=lambda i: density[i])
    else:
        best = int(np.argmax(density))
    return float(centroids[best])


def run_spectra(cfg: RunConfig) -> dict:
    """Energy content of the sub-barrier interior state, per J and analysis grid.

    The snapshot is projected onto the region inside the partial wave's own
    Coulomb-barrier radius: beyond it the recoiling packet still dominates,
    while inside only tunnel-trapped amplitude survives, so the ratio to the
    initial packet exposes resonances instead of the direct background.
    The projection and the initial packet are zero-padded onto every
    analysis domain; the coarse layout covers the full configured range and
    locates the dominant peak, and each finer layout is centered on it.  One
    solve engine per (J, domain, state) is shared across all layouts, so
    the fine pass reuses the Krylov space the coarse pass already built.
    """
    paths = RunPaths.from_config(cfg)
    _echo_config(cfg, paths)
    for j in cfg.j_list:
        _require(paths.snapshot(j), "propagate")
    _require(paths.initial_snapshot(), "propagate")
    params = cfg.system_params()
    model = cfg.potential_model()
    initial_state, _ = load_snapshot(paths.initial_snapshot())
    eps_sorted = sorted(set(cfg.window.epsilon_mev), reverse=True)
    eps_coarse, eps_fine = eps_sorted[0], eps_sorted[1:]
    entries = []
    for j in cfg.j_list:
        state, _ = load_snapshot(paths.snapshot(j))
        barrier = find_barrier(model, params, j)
        interior = interior_part(state.psi, barrier.radius_fm)
        for r_max in sorted(cfg.window.analysis_r_max_fm):
            psi_t = extend(interior, r_max)
            psi_0 = extend(initial_state.psi, r_max)
            ham = build_hamiltonian(psi_t.grid, params, model, j)
            engine_t, engine_0 = _build_engines(ham, psi_t, psi_0)
            layout = WindowSpec(eps_coarse, cfg.window.e_lo_mev, cfg.window.e_hi_mev)
            files = {}

            def _compute(spec: WindowSpec, kind: str):
                eff = effective_spectrum(
                    ham,
                    psi_t,
                    psi_0,
                    spec,
                    engine_interior=engine_t,
                    engine_reference=engine_0,
                    metadata={
                        "j": j,
                        "layout": kind,
                        "projection_fm": repr(barrier.radius_fm),
                    },
                )
                path = paths.spectrum_file(j, r_max, spec.epsilon_mev)
                path.parent.mkdir(parents=True, exist_ok=True)
                save_spectrum(path, eff)
                files[repr(float(spec.epsilon_mev))] = str(path.relative_to(paths.root))
                return eff

            coarse = _compute(layout, "coarse")
            e_star = _peak_energy(coarse)
            LOGGER.info(
                "J = %d, R_max = %g fm: dominant peak near %.4f MeV", j, r_max, e_star
            )
            for eps in eps_fine:
                lo = max(cfg.window.e_lo_mev, e_star - cfg.window.fine_half_span_mev)
                hi = min(cfg.window.e_hi_mev, e_star + cfg.window.fine_half_span_mev)
                _compute(WindowSpec(eps, lo, hi), "fine")
            entries.append(
                {
                    "j": int(j),
                    "r_max_fm": float(r_max),
                    "projection_fm": float(barrier.radius_fm),
                    "e_star_mev": e_star,
                    "resolution_mev": float(resolution_estimate(e_star, r_max, params)),
                    "files": files,
                }
            )
    index = {"entries": entries}
    _write_json(paths.spectrum_index(), index)
    return index


# ---------------------------------------------------------------------------
# Stage 3: Lorentzian fits of the window densities


def _resonance_row(res: Resonance, chi2red: Optional[float], **extra) -> dict:
    row = {
        "J": res.j,
        "method": res.method,
        "E_R_MeV": float(res.e_r_mev),
        "E_R_err": float(res.e_r_err_mev),
        "Gamma_keV": float(res.gamma_kev),
        "Gamma_err": float(res.gamma_err_kev),
        "R_max_fm": None if res.r_max_fm is None else float(res.r_max_fm),
        "chi2red": None if chi2red is None else float(chi2red),
    }
    row.update(extra)
    return row


def run_fits(cfg: RunConfig) -> dict:
    """Fit the finest window density per (J, analysis grid).

    Every row lands in fit/resonances.json regardless of convergence (the
    flag travels with it); the optional rational-fit cross-check goes into a
    separate block and feeds nothing downstream.
    """
    paths = RunPaths.from_config(cfg)
    index = _read_json(_require(paths.spectrum_index(), "spectrum"))
    rows = []
    pade_rows = []
    for entry in index["entries"]:
        j, r_max = int(entry["j"]), float(entry["r_max_fm"])
        finest = min(entry["files"], key=float)
        spectrum, _ = load_spectrum(_require(paths.root / entry["files"][finest], "spectrum"))
        centroids, density = density_function(spectrum)
        if spectrum.excluded is not None:
            keep = ~spectrum.excluded
            centroids, density = centroids[keep], density[keep]
        peak = int(np.argmax(density))
        fwhm = estimate_fwhm(centroids, density, peak)
        half = cfg.fit.window_fwhm_factor * fwhm
        window = (
            max(float(centroids[0]), float(centroids[peak]) - half),
            min(float(centroids[-1]), float(centroids[peak]) + half),
        )
        report = fit_lorentzian(
            centroids,
            density,
            window_mev=window,
            with_background=cfg.fit.with_background,
            j=j,
            r_max_fm=r_max,
        )
        rows.append(
            _resonance_row(
                report.resonance,
                report.chi2_reduced,
                converged=bool(report.converged),
                epsilon_mev=float(finest),
                window_mev=[float(window[0]), float(window[1])],
                amplitude=float(report.amplitude),
                background=float(report.background),
            )
        )
        LOGGER.info(
            "J = %d, R_max = %g fm: window fit E_R = %.4f MeV, Gamma = %.3f keV "
            "(converged = %s)",
            j,
            r_max,
            report.resonance.e_r_mev,
            report.resonance.gamma_kev,
            report.converged,
        )
        in_window = (centroids >= window[0]) & (centroids <= window[1])
        try:
            candidates = pade_fit(
                centroids[in_window],
                density[in_window],
                orders=tuple(cfg.fit.pade_orders),
                j=j,
                r_max_fm=r_max,
                method="window-pade",
            )
            nearest = min(
                candidates, key=lambda r: abs(r.e_r_mev - float(centroids[peak]))
            )
            pade_rows.append(_resonance_row(nearest, None, epsilon_mev=float(finest)))
        except (FitError, NotFoundError, ValidationError) as exc:
            pade_rows.append(
                {"J": j, "method": "window-pade", "R_max_fm": r_max, "error": str(exc)}
            )
    results = {"rows": rows, "pade": pade_rows}
    _write_json(paths.fit_results(), results)
    return results


# ---------------------------------------------------------------------------
# Stage 4: scattering phase shifts


def _window_seed(cfg: RunConfig, fits: dict, index: dict, j: int):
    """(centroid, width, label) seeding the stationary scans for one J.

    Prefers the converged window fit on the largest analysis domain; falls
    back to the coarse-survey peak with the domain's resolution estimate as
    the width scale.
    """
    rows = sorted(
        (r for r in fits["rows"] if r["J"] == j and r.get("converged")),
        key=lambda r: r["R_max_fm"],
    )
    if rows:
        row = rows[-1]
        gamma = max(row["Gamma_keV"] * 1e-3, SEED_WIDTH_FLOOR_MEV)
        return row["E_R_MeV"], gamma, f"window-fit r{row['R_max_fm']:g}"
    entries = sorted(
        (e for e in index["entries"] if int(e["j"]) == j),
        key=lambda e: e["r_max_fm"],
    )
    if not entries:
        raise MissingArtifactError(
            f"no spectrum index entry for J = {j}; run `resoscan spectrum` first"
        )
    entry = entries[-1]
    gamma = max(entry["resolution_mev"], SEED_WIDTH_FLOOR_MEV)
    return entry["e_star_mev"], gamma, f"coarse-peak r{entry['r_max_fm']:g}"


def run_phase(cfg: RunConfig) -> dict:
    """Phase-shift scan and pi/2-crossing extraction around each window peak."""
    paths = RunPaths.from_config(cfg)
    fits = _read_json(_require(paths.fit_results(), "fit"))
    index = _read_json(_require(paths.spectrum_index(), "spectrum"))
    params = cfg.system_params()
    model = cfg.potential_model()
    rows = []
    for j in cfg.j_list:
        e_c, gamma, source = _window_seed(cfg, fits, index, j)
        half = min(
            cfg.stationary.scan_half_span_mev,
            max(PHASE_SPAN_WIDTHS * gamma, PHASE_SPAN_FLOOR_MEV),
        )
        lo = max(1e-3, e_c - half)
        hi = e_c + half
        n_init = int(np.clip(2.0 * half * PHASE_POINTS_PER_WIDTH / gamma, 60, 1200))
        LOGGER.info(
            "J = %d: phase scan [%.4f, %.4f] MeV, %d initial points (seed: %s)",
            j,
            lo,
            hi,
            n_init,
            source,
        )
        curve = compute_phase_curve(
            model,
            params,
            j,
            lo,
            hi,
            n_init=n_init,
            r_match_fm=cfg.stationary.r_match_fm,
            dr_fm=cfg.stationary.dr_fm,
        )
        paths.phase_curve(j).parent.mkdir(parents=True, exist_ok=True)
        save_phase_curve(
            paths.phase_curve(j),
            curve,
            extra_metadata={
                "seed_e_r_mev": repr(float(e_c)),
                "seed_gamma_mev": repr(float(gamma)),
                "seed_source": source,
            },
        )
        try:
            res = resonance_from_phase(curve)
            rows.append(_resonance_row(res, None, seed_source=source))
            LOGGER.info(
                "J = %d: phase crossing E_R = %.4f MeV, Gamma = %.3f keV",
                j,
                res.e_r_mev,
                res.gamma_kev,
            )
        except (NotFoundError, AntiResonanceError, NumericalError) as exc:
            rows.append(
                {"J": int(j), "method": "phase-shift", "error": str(exc), "seed_source": source}
            )
            LOGGER.warning("J = %d: phase route failed: %s", j, exc)
    results = {"rows": rows}
    _write_json(paths.phase_results(), results)
    return results


# ---------------------------------------------------------------------------
# Stage 5: S-matrix poles


def run_poles(cfg: RunConfig) -> dict:
    """Rational continuation of S(E) to its lower-half-plane pole, per J."""
    paths = RunPaths.from_config(cfg)
    phases = _read_json(_require(paths.phase_results(), "phase"))
    fits = _read_json(_require(paths.fit_results(), "fit"))
    index = _read_json(_require(paths.spectrum_index(), "spectrum"))
    params = cfg.system_params()
    model = cfg.potential_model()
    rows = []
    for j in cfg.j_list:
        phase_row = next(
            (r for r in phases["rows"] if r["J"] == j and "error" not in r), None
        )
        if phase_row is not None:
            e_c = phase_row["E_R_MeV"]
            gamma = max(phase_row["Gamma_keV"] * 1e-3, SEED_WIDTH_FLOOR_MEV)
            source = "phase-shift"
        else:
            e_c, gamma, source = _window_seed(cfg, fits, index, j)
        span = POLE_SPAN_WIDTHS * gamma
        energies = np.linspace(max(1e-3, e_c - span), e_c + span, POLE_SAMPLES)
        samples = [
            SMatrixSample(
                energy_mev=float(e),
                s_value=s_matrix(
                    phase_shift(
                        model,
                        params,
                        float(e),
                        j=j,
                        r_match_fm=cfg.stationary.r_match_fm,
                        dr_fm=cfg.stationary.dr_fm,
                    )
                ),
            )
            for e in energies
        ]
        path = paths.pole_samples(j)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"# j = {j}\n# seed_source = {source}\n")
            fh.write("E_MeV,re_s,im_s\n")
            for s in samples:
                fh.write(
                    f"{float(s.energy_mev)!r},{float(s.s_value.real)!r},"
                    f"{float(s.s_value.imag)!r}\n"
                )
        try:
            res = find_pole(samples, orders=tuple(cfg.stationary.pole_orders), j=j)
            rows.append(_resonance_row(res, None, seed_source=source))
            LOGGER.info(
                "J = %d: pole at E_R = %.4f MeV, Gamma = %.3f keV",
                j,
                res.e_r_mev,
                res.gamma_kev,
            )
        except PoleInstabilityError as exc:
            rows.append(
                {
                    "J": int(j),
                    "method": "pole",
                    "error": str(exc),
                    "candidates": [
                        _resonance_row(c, None) for c in exc.candidates
                    ],
                    "seed_source": source,
                }
            )
            LOGGER.warning("J = %d: pole route unstable: %s", j, exc)
        except (NotFoundError, ValidationError) as exc:
            rows.append(
                {"J": int(j), "method": "pole", "error": str(exc), "seed_source": source}
            )
            LOGGER.warning("J = %d: pole route failed: %s", j, exc)
    results = {"rows": rows}
    _write_json(paths.pole_results(), results)
    return results


# ---------------------------------------------------------------------------
# Stage 6: cross-method comparison


_STAGES = (
    ("propagate", run_propagation),
    ("spectrum", run_spectra),
    ("fit", run_fits),
    ("phase", run_phase),
    ("poles", run_poles),
)


def _stage_outputs(cfg: RunConfig, paths: RunPaths, name: str) -> list:
    if name == "propagate":
        return [paths.initial_snapshot(), paths.run_log()] + [
            paths.snapshot(j) for j in cfg.j_list
        ]
    if name == "spectrum":
        return [paths.spectrum_index()]
    if name == "fit":
        return [paths.fit_results()]
    if name == "phase":
        return [paths.phase_results()]
    if name == "poles":
        return [paths.pole_results()]
    raise ValueError(name)


def run_stage(cfg: RunConfig, name: str) -> dict:
    for stage, runner in _STAGES:
        if stage == name:
            return runner(cfg)
    raise ValueError(f"unknown stage {name!r}")


def _pairwise_spread(values: dict) -> Optional[float]:
    """Largest pairwise relative separation 2|a-b|/(a+b) among the values."""
    vals = list(values.values())
    worst = 0.0
    for i in range(len(vals)):
        for k in range(i + 1, len(vals)):
            mean = 0.5 * (vals[i] + vals[k])
            if mean != 0.0:
                worst = max(worst, abs(vals[i] - vals[k]) / mean)
    return worst if len(vals) >= 2 else None


def _format_row(row: dict) -> str:
    r_max = row.get("R_max_fm")
    r_txt = f"{r_max:7.0f}" if r_max is not None else "      -"
    if "error" in row:
        return (
            f"{row['J']:>2d}  {row['method']:<12s} {r_txt}  "
            f"error: {row['error']}"
        )
    chi = row.get("chi2red")
    chi_txt = f"{chi:10.3e}" if chi is not None else "         -"
    return (
        f"{row['J']:>2d}  {row['method']:<12s} {r_txt}  "
        f"{row['E_R_MeV']:10.4f} {row['E_R_err']:9.4f}  "
        f"{row['Gamma_keV']:10.4f} {row['Gamma_err']:9.4f}  {chi_txt}"
    )


def _format_table(cfg: RunConfig, by_j: dict) -> str:
    lines = [
        "cross-method resonance comparison",
        "units: E_R in MeV, Gamma in keV, domains in fm",
        "",
        " J  method        R_max     E_R_MeV   +/-         Gamma_keV   +/-       chi2red",
    ]
    for j in cfg.j_list:
        block = by_j[str(j)]
        lines.append("-" * len(lines[3]))
        for row in block["window_fit"]:
            lines.append(_format_row(row))
        lines.append(_format_row(block["phase_shift"]))
        lines.append(_format_row(block["pole"]))
        summary = block["summary"]
        spread = summary["e_r_max_pairwise_rel"]
        if spread is not None:
            lines.append(f"    E_R pairwise spread: {spread * 100.0:.3f}%")
        for r_txt, ratio in sorted(
            summary["gamma_window_over_pole"].items(), key=lambda kv: float(kv[0])
        ):
            if ratio is not None:
                lines.append(
                    f"    Gamma window/pole at {float(r_txt):g} fm: {ratio:.3f}"
                )
    lines.append("")
    return "\n".join(lines)


def run_compare(cfg: RunConfig) -> dict:
    """Assemble the per-J, per-method table; compute whatever is missing.

    The JSON is rebuilt purely from the artifacts on disk with sorted keys
    and no timestamps, so identical configurations yield identical bytes.
    """
    paths = RunPaths.from_config(cfg)
    _echo_config(cfg, paths)
    for name, runner in _STAGES:
        missing = [p for p in _stage_outputs(cfg, paths, name) if not p.exists()]
        if missing:
            LOGGER.info("compare: computing missing stage '%s'", name)
            runner(cfg)
    fits = _read_json(paths.fit_results())
    phases = _read_json(paths.phase_results())
    poles = _read_json(paths.pole_results())
    by_j = {}
    for j in cfg.j_list:
        window_rows = sorted(
            (r for r in fits["rows"] if r["J"] == j),
            key=lambda r: r["R_max_fm"],
        )
        phase_row = next(
            (r for r in phases["rows"] if r["J"] == j),
            {"J": int(j), "method": "phase-shift", "error": "not computed"},
        )
        pole_row = next(
            (r for r in poles["rows"] if r["J"] == j),
            {"J": int(j), "method": "pole", "error": "not computed"},
        )
        centroids = {}
        if window_rows:
            best = [r for r in window_rows if r.get("converged")] or window_rows
            centroids["window-fit"] = best[-1]["E_R_MeV"]
        if "error" not in phase_row:
            centroids["phase-shift"] = phase_row["E_R_MeV"]
        if "error" not in pole_row:
            centroids["pole"] = pole_row["E_R_MeV"]
        gamma_ratio = {}
        for row in window_rows:
            key = repr(float(row["R_max_fm"]))
            if "error" not in pole_row and pole_row["Gamma_keV"] > 0.0:
                gamma_ratio[key] = row["Gamma_keV"] / pole_row["Gamma_keV"]
            else:
                gamma_ratio[key] = None
        by_j[str(j)] = {
            "window_fit": window_rows,
            "phase_shift": phase_row,
            "pole": pole_row,
            "summary": {
                "e_r_by_method": centroids,
                "e_r_max_pairwise_rel": _pairwise_spread(centroids),
                "gamma_window_over_pole": gamma_ratio,
            },
        }
    config_echo = to_dict(cfg)
    config_echo.pop("out_dir", None)  # the table must not depend on where it lives
    compare = {"config": config_echo, "by_j": by_j}
    paths.compare_json().parent.mkdir(parents=True, exist_ok=True)
    _write_json(paths.compare_json(), compare)
    paths.compare_text().write_text(_format_table(cfg, by_j), encoding="utf-8")
    return compare
