"""Command line front end.

One subcommand per pipeline stage plus `plot`; every stage command takes the
same configuration flags (`--config` YAML file, repeatable `--set` dotted
overrides) so a run can be steered entirely from the shell.  Exit codes are
part of the interface: 0 success, 2 configuration/validation failure, 3
numerical failure, 4 missing input artifact.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Optional, Sequence

from . import __version__, pipeline
from .config import load_config
from .errors import MissingArtifactError, NumericalError, ValidationError
from .plotscripts import emit_plot_script

LOGGER = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_MISSING_ARTIFACT = 4

_STAGE_COMMANDS = {
    "propagate": (
        pipeline.run_propagation,
        "propagate the packet and snapshot it at the recoil stop",
    ),
    "spectrum": (
        pipeline.run_spectra,
        "window-operator energy spectra of the sub-barrier interior state",
    ),
    "fit": (
        pipeline.run_fits,
        "Lorentzian fits of the window densities",
    ),
    "phase": (
        pipeline.run_phase,
        "scattering phase shifts and pi/2-crossing resonances",
    ),
    "poles": (
        pipeline.run_poles,
        "S-matrix poles by rational continuation",
    ),
    "compare": (
        pipeline.run_compare,
        "cross-method comparison table (computes missing stages)",
    ),
}


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--config",
        metavar="FILE",
        default=None,
        help="YAML run configuration (defaults apply when omitted)",
    )
    parser.add_argument(
        "--set",
        dest="overrides",
        metavar="PATH=VALUE",
        action="append",
        default=[],
        help="override one configuration entry, e.g. --set grid.n_points=4096; "
        "repeatable",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="resoscan",
        description="Resonance identification in radial quantum scattering: "
        "wave-packet window spectra, phase shifts, and S-matrix poles.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "-v",
        "--verbose",
        action="count",
        default=0,
        help="-v for progress, -vv for debug output",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name, (_, help_text) in _STAGE_COMMANDS.items():
        cmd = sub.add_parser(name, help=help_text)
        _add_config_flags(cmd)
    plot = sub.add_parser("plot", help="emit a gnuplot script for one CSV artifact")
    plot.add_argument("artifact", help="CSV artifact written by another command")
    plot.add_argument(
        "-o",
        "--output",
        default=None,
        help="script path (default: the artifact path with a .gp suffix)",
    )
    plot.add_argument(
        "--fit",
        default=None,
        metavar="JSON",
        help="fit results to overlay on a spectrum artifact",
    )
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "plot":
            script = emit_plot_script(args.artifact, output=args.output, fit=args.fit)
            print(script)
            return EXIT_OK
        cfg = load_config(args.config, overrides=args.overrides)
        _STAGE_COMMANDS[args.command][0](cfg)
        return EXIT_OK
    except MissingArtifactError as exc:
        print(f"resoscan {args.command}: {exc}", file=sys.stderr)
        return EXIT_MISSING_ARTIFACT
    except FileNotFoundError as exc:
        # a missing *input* (configuration, table) is a usage problem, not a
        # missing pipeline artifact
        print(f"resoscan {args.command}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ValidationError as exc:
        print(f"resoscan {args.command}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"resoscan {args.command}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
