"""Gnuplot script emission for the CSV artifacts the pipeline writes.

Plotting stays out of process: every figure-like artifact maps to a small,
self-contained gnuplot script placed next to it, so figures are reproducible
files rather than library calls.  The artifact kind is recognized from its
column-header line; anything unrecognized is refused rather than guessed.
Crossing markers and fit overlays are baked into the script as inline data
and constants at emission time, keeping the script free of runtime logic.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Optional

from .errors import MissingArtifactError, ValidationError

SPECTRUM_HEADER = "E_MeV,P,P_per_MeV,excluded_flag"
SNAPSHOT_HEADER = "R_fm,re_psi,im_psi,density"
PHASE_HEADER = "E_MeV,delta_rad,delta_unwrapped_rad,eta"
SMATRIX_HEADER = "E_MeV,re_s,im_s"
POTENTIAL_HEADER = "# R_fm U_MeV"


def _read_artifact(path: Path):
    """(metadata dict, header line, data rows as string lists)."""
    meta: dict = {}
    header = None
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, sep, val = line.lstrip("# ").partition("=")
                if sep:
                    meta[key.strip()] = val.strip()
                elif line == POTENTIAL_HEADER:
                    header = line
                continue
            if header is None:
                header = line
                continue
            rows.append(line.split(","))
    return meta, header, rows


def _common_prelude(title: str) -> list:
    return [
        "#!/usr/bin/env gnuplot",
        "# generated by resoscan plot",
        "set datafile separator comma",
        "set datafile commentschars '#'",
        f"set title '{title}'",
        "set grid",
        "set key top right",
    ]


def _spectrum_script(path: Path, meta: dict, fit_row: Optional[dict]) -> str:
    title = f"window spectrum (eps = {meta.get('epsilon_mev', '?')} MeV, " \
            f"R_max = {meta.get('r_max_fm', '?')} fm)"
    lines = _common_prelude(title)
    lines += [
        "set xlabel 'E (MeV)'",
        "set ylabel 'P / 2{/Symbol e} (1/MeV)'",
        "set logscale y",
    ]
    plot = f"plot '{path.name}' using 1:3 with steps lw 2 title 'window density'"
    if fit_row is not None:
        if "amplitude" not in fit_row:
            raise ValidationError(
                "fit row carries no amplitude; regenerate it with `resoscan fit`"
            )
        amp = float(fit_row["amplitude"])
        e_r = float(fit_row["E_R_MeV"])
        gamma_mev = float(fit_row["Gamma_keV"]) * 1e-3
        background = float(fit_row.get("background", 0.0))
        lines += [
            f"amp = {amp!r}",
            f"e_r = {e_r!r}",
            f"hw = {0.5 * gamma_mev!r}",
            f"bg = {background!r}",
            "lor(x) = bg + amp * (hw / pi) / ((x - e_r)**2 + hw**2)",
        ]
        plot += ", lor(x) with lines lw 2 title 'Lorentzian fit'"
    lines.append(plot)
    return "\n".join(lines) + "\n"


def _snapshot_script(path: Path, meta: dict) -> str:
    title = f"radial density (t = {meta.get('elapsed_time_s', '?')} s)"
    lines = _common_prelude(title)
    lines += [
        "set xlabel 'R (fm)'",
        "set ylabel '|psi|^2 (1/fm)'",
        f"plot '{path.name}' using 1:4 with lines lw 2 title 'density'",
    ]
    return "\n".join(lines) + "\n"


def _phase_crossings(rows) -> list:
    """Upward pi/2 (mod pi) crossings of the unwrapped phase, interpolated."""
    pts = [(float(r[0]), float(r[2])) for r in rows]
    crossings = []
    for (e0, d0), (e1, d1) in zip(pts[:-1], pts[1:]):
        if d1 <= d0:
            continue
        m_lo = math.ceil((d0 - 0.5 * math.pi) / math.pi)
        m_hi = math.floor((d1 - 0.5 * math.pi) / math.pi)
        for m in range(m_lo, m_hi + 1):
            target = 0.5 * math.pi + m * math.pi
            frac = (target - d0) / (d1 - d0)
            crossings.append((e0 + frac * (e1 - e0), target))
    return crossings


def _phase_script(path: Path, meta: dict, rows) -> str:
    title = f"scattering phase shift (J = {meta.get('j', '?')})"
    lines = _common_prelude(title)
    lines += [
        "set xlabel 'E (MeV)'",
        "set ylabel '{/Symbol d} (rad)'",
    ]
    crossings = _phase_crossings(rows)
    plot = f"plot '{path.name}' using 1:3 with lines lw 2 title 'unwrapped phase'"
    if crossings:
        plot += ", '-' using 1:2 with points pt 6 ps 2 lw 2 title 'pi/2 crossings'"
    lines.append(plot)
    for e, d in crossings:
        lines.append(f"{e!r} {d!r}")
    if crossings:
        lines.append("e")
    return "\n".join(lines) + "\n"


def _smatrix_script(path: Path, meta: dict) -> str:
    title = f"S-matrix samples (J = {meta.get('j', '?')})"
    lines = _common_prelude(title)
    lines += [
        "set xlabel 'E (MeV)'",
        "set ylabel 'S(E)'",
        f"plot '{path.name}' using 1:2 with linespoints title 'Re S', "
        f"'{path.name}' using 1:3 with linespoints title 'Im S'",
    ]
    return "\n".join(lines) + "\n"


def _potential_script(path: Path) -> str:
    lines = _common_prelude("effective radial potential")
    lines += [
        "set datafile separator whitespace",
        "set xlabel 'R (fm)'",
        "set ylabel 'U (MeV)'",
        f"plot '{path.name}' using 1:2 with lines lw 2 title 'U(R)'",
    ]
    return "\n".join(lines) + "\n"


def _load_fit_row(fit_path: Path, meta: dict) -> dict:
    """Row of fit/resonances.json matching the spectrum's J and domain."""
    if not fit_path.exists():
        raise MissingArtifactError(f"{fit_path} is missing; run `resoscan fit` first")
    rows = json.loads(fit_path.read_text(encoding="utf-8")).get("rows", [])
    j = meta.get("j")
    r_max = meta.get("r_max_fm")
    for row in rows:
        if (
            j is not None
            and str(row.get("J")) == str(j)
            and r_max is not None
            and abs(float(row["R_max_fm"]) - float(r_max)) < 1e-9
        ):
            return row
    raise ValidationError(
        f"{fit_path} holds no row for J = {j}, R_max = {r_max} fm"
    )


def emit_plot_script(artifact, output=None, fit=None) -> Path:
    """Write the gnuplot script for one artifact; returns the script path.

    The script refers to the artifact by file name, so it must be run from
    (or shipped with) the artifact's directory.
    """
    artifact = Path(artifact)
    if not artifact.exists():
        raise MissingArtifactError(f"artifact {artifact} does not exist")
    meta, header, rows = _read_artifact(artifact)
    if header == SPECTRUM_HEADER:
        fit_row = _load_fit_row(Path(fit), meta) if fit else None
        text = _spectrum_script(artifact, meta, fit_row)
    elif header == SNAPSHOT_HEADER:
        text = _snapshot_script(artifact, meta)
    elif header == PHASE_HEADER:
        text = _phase_script(artifact, meta, rows)
    elif header == SMATRIX_HEADER:
        text = _smatrix_script(artifact, meta)
    elif header == POTENTIAL_HEADER:
        text = _potential_script(artifact)
    else:
        raise ValidationError(
            f"{artifact}: unsupported artifact (header {header!r}); expected one "
            "of the spectrum/snapshot/phase/S-matrix/potential CSV formats"
        )
    out = Path(output) if output else artifact.with_suffix(".gp")
    out.write_text(text, encoding="utf-8")
    return out
