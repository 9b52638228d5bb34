"""Command-line entry point: one subcommand per experiment.

Settings come from an optional JSON config file (keys matching
:class:`~hugint.experiments.ExperimentConfig`) overridden by command-line
flags.  Every run writes its data files plus a manifest JSON into the output
directory.  Exit codes: 0 on success, 2 on configuration errors, 3 on
numerical failures.
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import HugError
from .experiments import RUNNERS, ConfigError, ExperimentConfig
from .output import ManifestTimer, write_manifest

_EXPERIMENT_HELP = {
    "table1": "one- and two-step position errors of the benchmark per step size",
    "convergence": "fitted convergence orders (one-step, two-step, global)",
    "phase-portrait": "classified grid of reduced ellipse trajectories",
    "foldback": "discrete fold-back trajectory vs. the flow it shadows",
    "ellipsoid": "d_max scatter/ECDF over random unit velocities on an ellipsoid",
    "ecdf": "matched-step d_max ECDF comparison between the 3-D and 6-D presets",
    "sphere-tail": "tail probability of |u.v| for v uniform on a sphere",
    "chain": "sampling chain on a Gaussian target with interleaved random walks",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hugint",
        description="Run experiments for the level-set hugging integrator.",
    )
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name, help_text in _EXPERIMENT_HELP.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON config file; flags override its keys")
        p.add_argument("--out", help="output directory (default: current directory)")
        p.add_argument("--seed", type=int, help="root RNG seed (default: 0)")
        p.add_argument("--replicates", type=int, help="replicate count for sampled studies")
        p.add_argument(
            "--full-scale",
            action="store_true",
            default=None,
            help="use publication-scale replicate and step counts",
        )
        p.add_argument("--workers", type=int, help="process count for replicated studies")
        if name in ("convergence", "phase-portrait"):
            p.add_argument("--t-end", type=float, dest="t_end", help="time horizon")
        if name in ("foldback", "ellipsoid", "ecdf", "chain"):
            p.add_argument("--delta", type=float, help="step size")
            p.add_argument("--steps", type=int, help="steps per trajectory")
        if name in ("ellipsoid", "sphere-tail"):
            p.add_argument("--dim", type=int, help="ambient dimension")
        if name == "sphere-tail":
            p.add_argument("--h", type=float, help="threshold in [0, 1]")
        if name == "chain":
            p.add_argument("--iterations", type=int, help="chain length")
            p.add_argument(
                "--walk-scale",
                type=float,
                dest="walk_scale",
                help="random-walk proposal scale (interleaved move)",
            )
    return parser


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    settings: dict = {}
    if args.config:
        try:
            with open(args.config) as fh:
                settings = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(settings, dict):
            raise ConfigError("config file must hold a JSON object")
    for key, value in vars(args).items():
        if key in ("config",) or value is None:
            continue
        settings[key] = value
    settings["experiment"] = args.experiment
    settings.setdefault("out", ".")
    settings.setdefault("seed", 0)
    try:
        return ExperimentConfig(**settings)
    except TypeError as exc:
        raise ConfigError(f"bad config key: {exc}") from exc


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    runner = RUNNERS[config.experiment]
    try:
        with ManifestTimer() as timer:
            summary = runner(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except HugError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    manifest_path = f"{config.out}/{config.experiment}.manifest.json"
    write_manifest(
        manifest_path,
        config.experiment,
        config.echo(),
        config.seed,
        timer.wall_time_s,
        summary=summary,
    )
    print(json.dumps({"summary": summary, "manifest": manifest_path}, indent=2, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
