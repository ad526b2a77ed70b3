"""Command-line entry point: ``gfnuq <subcommand> [--manifest m.json] [overrides]``.

Exit codes: 0 success, 1 usage, 2 numerical failure (including diverged
ensemble members), 3 I/O.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from ..errors import GfnUqError, NumericalError, UsageError
from . import stages
from .manifest import EXPERIMENTS, ExperimentManifest

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3

COMMANDS = ("sample-rewards", "train-ensemble", "fit-embed", "extract-policies", "fit-surrogate",
            "sample-surrogate", "compare", "run-all", "sobol")


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad arguments; usage errors here are 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser():
    parser = _Parser(prog="gfnuq", description="GFlowNet policy surrogates: ensembles, PCE fits, comparisons.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-member progress")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--manifest", help="JSON manifest; defaults come from --experiment otherwise")
        p.add_argument("--experiment", choices=EXPERIMENTS)
        p.add_argument("--seed", type=int)
        p.add_argument("--out-dir")
        p.add_argument("--surrogate", choices=("pce", "mlp"))
        p.add_argument("--degree", type=int)
        p.add_argument("--ridge", type=float)
        p.add_argument("--samples", type=int)
        if name in ("sample-rewards", "train-ensemble", "extract-policies"):
            p.add_argument("--role", choices=("train", "test", "both"), default="both")
    return parser


def load_manifest(args):
    if args.manifest:
        doc = ExperimentManifest.load(args.manifest).to_dict()
        if args.experiment and args.experiment != doc["experiment"]:
            raise UsageError(f"--experiment {args.experiment} contradicts manifest ({doc['experiment']})")
    elif args.experiment:
        doc = ExperimentManifest.default(args.experiment).to_dict()
    else:
        raise UsageError("need --manifest or --experiment")
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.out_dir is not None:
        doc["out_dir"] = args.out_dir
    for key, value in (("kind", args.surrogate), ("degree", args.degree), ("ridge", args.ridge),
                       ("samples", args.samples)):
        if value is not None:
            doc["surrogate"][key] = value
    return ExperimentManifest.from_dict(doc)


def _roles(args):
    return stages.ROLES if args.role == "both" else (args.role,)


def _print(obj):
    print(json.dumps(obj, sort_keys=True))


def dispatch(args):
    m = load_manifest(args)
    kind = m.surrogate["kind"]
    cmd = args.command
    if cmd == "sample-rewards":
        stages.sample_rewards(m, _roles(args))
    elif cmd == "fit-embed":
        stages.fit_embed(m)
    elif cmd == "train-ensemble":
        diverged = {role: stages.run_ensemble(m, role) for role in _roles(args)}
        n = sum(len(v) for v in diverged.values())
        if n:
            print(f"{n} member(s) diverged: {diverged}", file=sys.stderr)
            return EXIT_NUMERICAL
    elif cmd == "extract-policies":
        traj = stages.resolve_trajectory(m)
        for role in _roles(args):
            t = stages.extract_policy_tensor(m, role, traj)
            print(f"{role}: tensor {tuple(t.values.shape)} -> {stages.trajectory_dir(m, traj)}")
    elif cmd == "fit-surrogate":
        traj = stages.resolve_trajectory(m, create=False)
        stages.fit_surrogate(m, stages.load_tensor(m, "train", traj), stages.load_embed(m), kind)
    elif cmd == "sample-surrogate":
        traj = stages.resolve_trajectory(m, create=False)
        model = stages.load_surrogate(m, traj, kind)
        samples = stages.sample_surrogate(m, model, stages.load_embed(m), traj, kind)
        print(f"{samples.shape[0]} samples of shape {tuple(samples.shape[1:])}")
    elif cmd == "compare":
        report = stages.compare_stage(m, stages.resolve_trajectory(m, create=False), kind)
        _print(report["summary"])
    elif cmd == "sobol":
        if kind != "pce":
            raise UsageError("Sobol' indices need a PCE surrogate")
        doc = stages.sobol_stage(m, stages.resolve_trajectory(m, create=False))
        print(f"{len(doc['indices'])} channel(s) written")
    elif cmd == "run-all":
        report, diverged = stages.run_all(m, kind)
        _print(report["summary"])
        n = sum(diverged.values())
        if n:
            print(f"{n} member(s) diverged: {diverged}", file=sys.stderr)
            return EXIT_NUMERICAL
    return EXIT_OK


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"gfnuq: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return dispatch(args)
    except UsageError as exc:
        print(f"gfnuq: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"gfnuq: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"gfnuq: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except GfnUqError as exc:
        print(f"gfnuq: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
