"""Command-line entry point.

    rise-explore [--config FILE] [--seeds 0-99] [--out DIR] [--jobs N] [--plot] <subcommand> [...]

Global flags may appear before or after the subcommand. The output directory
defaults to ``$RISE_EXPLORE_OUT/<kind>`` and then ``results/<kind>``; --out wins.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

import yaml

from .config import KINDS, ExperimentConfig, config_from_dict, load_config, parse_seeds
from .errors import ValidationError
from .runner import run_experiment

_GLOBAL_DEFAULTS = {"config": None, "seeds": None, "out": None, "jobs": None, "plot": None}


def _add_globals(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", metavar="FILE", default=d, help="YAML experiment config")
    p.add_argument("--seeds", default=d, help="e.g. 0-99 or 1,2,5")
    p.add_argument("--out", metavar="DIR", default=d, help="output directory")
    p.add_argument("--jobs", type=int, metavar="N", default=d, help="worker processes")
    p.add_argument("--plot", action=argparse.BooleanOptionalAction, default=d,
                   help="write plot.svg (default on)")


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected numbers, got {text!r}") from None


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers, got {text!r}") from None


class _Parser(argparse.ArgumentParser):
    """Usage errors as a single diagnostic line."""

    def error(self, message: str):
        self.exit(2, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rise-explore", description="Exploration experiments on tabular problems.")
    _add_globals(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        _add_globals(p, suppress=True)
        return p

    p = add("estimate", "validate the k-NN entropy estimators on synthetic samples")
    p.add_argument("--distribution", choices=("uniform", "gaussian"))
    p.add_argument("--sizes", type=_ints, help="sample sizes, e.g. 500,1000,5000")
    p.add_argument("--dim", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--search-k", action="store_true", default=None)

    p = add("bandit", "compare bandit strategies on Bernoulli arms")
    p.add_argument("--probs", type=_floats, help="arm probabilities, e.g. 0.1,0.5,0.9")
    p.add_argument("--steps", type=int)
    p.add_argument("--record-every", type=int)

    p = add("maze", "maze coverage benchmark: Q-learning with and without RISE")
    p.add_argument("--size", type=int)
    p.add_argument("--budget", type=int, help="max environment steps per run")
    p.add_argument("--lambda0", type=float)
    p.add_argument("--k", type=int)

    p = add("mepc", "maximum-entropy policy computation on a tabular MDP")
    p.add_argument("--mdp", metavar="FILE", help="MDP text file (default: 3-state chain)")
    p.add_argument("--alpha", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--iterations", type=int, help="override the bound")
    p.add_argument("--every", type=int, help="print every N iterations")

    p = add("ccp", "coupon-collector expected time and Monte-Carlo check")
    p.add_argument("--dist", metavar="FILE", help="probabilities, whitespace or comma separated")
    p.add_argument("--n", type=int, help="uniform size when no file is given")
    p.add_argument("--tol", type=float)
    p.add_argument("--runs", type=int)

    p = add("rise-pipeline", "two-phase RISE: k search from random rollouts, then Q-learning")
    p.add_argument("--size", type=int)
    p.add_argument("--phase1-steps", type=int)
    p.add_argument("--budget", type=int)
    return parser


# subcommand flag -> (config section, key)
_OVERRIDES = {
    "estimate": {"distribution": ("estimate", "distribution"), "sizes": ("estimate", "sizes"),
                 "dim": ("estimate", "dim"), "k": ("estimate", "k"), "alpha": ("estimate", "alpha"),
                 "search_k": ("estimate", "search_k")},
    "bandit": {"probs": ("bandit", "probs"), "steps": ("bandit", "steps"),
               "record_every": ("bandit", "record_every")},
    "maze": {"size": ("env", "size"), "budget": ("agent", "max_total_steps"),
             "lambda0": ("intrinsic", "lambda0"), "k": ("intrinsic", "k")},
    "mepc": {"mdp": ("mepc", "mdp"), "alpha": ("mepc", "alpha"), "sigma": ("mepc", "sigma"),
             "epsilon": ("mepc", "epsilon"), "iterations": ("mepc", "iterations"), "every": ("mepc", "every")},
    "ccp": {"dist": ("ccp", "dist"), "n": ("ccp", "n"), "tol": ("ccp", "tol"), "runs": ("ccp", "runs")},
    "rise-pipeline": {"size": ("env", "size"), "phase1_steps": ("pipeline", "phase1_steps"),
                      "budget": ("agent", "max_total_steps")},
}


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """Config file (if any), then subcommand flags, then global flags."""
    kind = args.command
    if args.config:
        base = load_config(args.config)
        if base.kind != kind:
            raise ValidationError(f"config kind {base.kind!r} does not match subcommand {kind!r}")
        data = dataclasses.asdict(base)
    else:
        data = {"kind": kind}
    for flag, (section, key) in _OVERRIDES[kind].items():
        value = getattr(args, flag, None)
        if value is not None:
            data.setdefault(section, {})[key] = value
    if args.seeds is not None:
        data["seeds"] = parse_seeds(args.seeds)
    for key in ("out", "jobs", "plot"):
        value = getattr(args, key)
        if value is not None:
            data[key] = value
    return config_from_dict(_plain(data))


def _plain(obj):
    """Tuples to lists so nested dataclass dicts round-trip through the loader."""
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _report(cfg: ExperimentConfig, result) -> None:
    if cfg.kind == "mepc":
        print(",".join(result.extra["header"]))
        for row in result.extra["rows"]:
            print(",".join(str(v) for v in row))
    elif cfg.kind == "ccp":
        e, m = result.extra["expected"], result.extra["mc_mean"]
        print(f"expected_time={e!r}")
        print(f"monte_carlo_mean={m!r} relative_gap={m / e - 1.0:+.4%}")
    for s in result.summaries.values():
        status = "" if s.complete else f"  (incomplete: {len(s.errors)} failed)"
        print(f"{s.label}: {s.formatted} over {len(s.values)} seeds{status}")
    print(f"wrote {result.raw_path} and {result.summary_path}"
          + (f" and {result.plot_path}" if result.plot_path else ""))


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    for key, value in _GLOBAL_DEFAULTS.items():
        if not hasattr(args, key):
            setattr(args, key, value)
    try:
        cfg = resolve_config(args)
        result = run_experiment(cfg)
    except (ValidationError, yaml.YAMLError, OSError) as exc:
        print(f"rise-explore {args.command}: error: {str(exc).splitlines()[0] if str(exc) else type(exc).__name__}",
              file=sys.stderr)
        return 2
    _report(cfg, result)
    if any(not s.complete for s in result.summaries.values()):
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
