"""Command-line entry point: one subcommand per stage plus ``pipeline``.

Exit codes: 0 success, 1 input or validation error (including strict-mode
constraint violations), 2 numerical failure.
"""

import argparse
import logging
import sys

from . import __version__
from .config import load_config
from .errors import ConstraintViolation, InputError, NumericalError
from .pipeline import STAGES, run_pipeline

log = logging.getLogger("coroskin")

# inputs each stage may read from files instead of upstream stages
STAGE_INPUTS = {
    "phantom": (),
    "vesselness": ("volume",),
    "centerline": ("vesselness",),
    "topology": ("tree",),
    "surface": ("tree",),
    "tetmesh": ("surface", "tree"),
    "weights": ("tetmesh",),
    "sequence": ("tree", "surface", "tetmesh", "weights", "handles", "keyposes"),
    "validate": ("sequence", "reference", "tree", "surface", "tetmesh", "weights", "handles", "keyposes"),
    "simulate": ("tree", "surface", "tetmesh", "weights", "handles", "keyposes", "scenario"),
}
ALL_INPUTS = ("volume", "vesselness", "tree", "surface", "tetmesh", "weights", "handles", "keyposes", "scenario", "sequence", "reference")

HELP = {
    "phantom": "render a synthetic phantom volume with its true tree and surface",
    "vesselness": "multiscale Hessian vesselness of a volume",
    "centerline": "segment a vesselness volume and extract the centerline tree",
    "topology": "bifurcation angles and radius-law residuals of a tree",
    "surface": "loft a closed surface mesh around a centerline tree",
    "tetmesh": "fill a lofted surface with tetrahedra",
    "weights": "bounded biharmonic skinning weights on a tet mesh",
    "sequence": "key poses and an interpolated cardiac-cycle mesh sequence",
    "validate": "HD / MSD / BCR / BCS metrics CSV between two sequences",
    "simulate": "scripted guidewire and contrast run against the moving mesh",
    "pipeline": "run the whole chain (all stages, or those named in --stages)",
}


def _common(p):
    p.add_argument("--config", metavar="PATH", help="YAML configuration file")
    p.add_argument("--out", metavar="DIR", default="out", help="output directory (default: %(default)s)")
    p.add_argument("--seed", type=int, metavar="U64", help="global seed")
    p.add_argument("--strict", action="store_true", default=None, help="fail on mechanical constraint violations")
    p.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="SECTION.FIELD=VALUE",
        help="override one configuration field (repeatable)",
    )
    p.add_argument("-v", "--verbose", action="count", default=0)


def build_parser():
    parser = argparse.ArgumentParser(prog="coroskin", description="Coronary tree reconstruction and cardiac-motion mesh sequences.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name in STAGES + ("pipeline",):
        p = sub.add_parser(name, help=HELP[name], description=HELP[name])
        _common(p)
        for inp in STAGE_INPUTS.get(name, ALL_INPUTS):
            p.add_argument(f"--{inp}", metavar="PATH", help=f"{inp} artifact file")
        if name == "pipeline":
            p.add_argument("--stages", metavar="LIST", help="comma-separated stage names (default: all)")
    return parser


def _seed(value):
    if value is None:
        return None
    if not 0 <= value < 2**64:
        raise InputError(f"--seed must be an unsigned 64-bit integer, got {value}")
    return value


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = load_config(args.config, args.overrides, seed=_seed(args.seed), strict=args.strict)
        names = STAGE_INPUTS.get(args.command, ALL_INPUTS)
        inputs = {k: getattr(args, k) for k in names if getattr(args, k, None)}
        if args.command == "pipeline":
            stages = [s.strip() for s in args.stages.split(",")] if args.stages else None
        else:
            stages = [args.command]
        pipe, manifest = run_pipeline(cfg, args.out, inputs, stages)
    except (InputError, ConstraintViolation) as exc:
        print(f"coroskin: error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"coroskin: numerical failure: {exc}", file=sys.stderr)
        return 2
    print(f"{len(manifest['artifacts'])} artifact(s) in {args.out}; config sha256 {manifest['config_sha256'][:12]}")
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
