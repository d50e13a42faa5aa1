"""Command-line entry point: ``select``, ``verify``, ``experiment`` and ``gen``.

Every flag can also come from ``--config FILE``: a flat ``key = value`` text
file (``#`` comments) or a JSON object. Keys use the flag names with
underscores; flags given on the command line win over the file.

Exit codes: 0 success, 1 usage or config error, 2 valid but incomplete result
(an unfinished DistinctCount run, or a verification whose inequality fails).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from bandit_subset import evaluation, verify
from bandit_subset.reward_model import (
    ActionSpace,
    Gibbs,
    LinearCanonicalModel,
    RBF,
    build_kernel_model,
    toy_model,
    make_grid_space,
    make_orthonormal_space,
    make_sphere_clusters,
)
from bandit_subset.selection import DistinctCount, Exact, Iterations, ThompsonApprox, epsilon_net_select

EXIT_OK, EXIT_USAGE, EXIT_INCOMPLETE = 0, 1, 2


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# specs


def parse_space(spec: str, seed: int | None = None):
    """Returns (space, model or None); ``example1`` comes with its own instance distribution."""
    kind, _, rest = spec.partition(":")
    parts = rest.split(":") if rest else []
    try:
        if kind == "grid" and len(parts) == 3:
            return make_grid_space(float(parts[0]), float(parts[1]), int(parts[2])), None
        if kind == "orthonormal" and len(parts) == 1:
            return make_orthonormal_space(int(parts[0])), None
        if kind == "sphere" and len(parts) == 1:
            space, _ = make_sphere_clusters(float(parts[0]), np.random.default_rng(seed))
            return space, None
        if kind == "example1" and not parts:
            model = toy_model()
            return model.space, model
        if kind == "csv" and rest:
            return read_space_csv(rest), None
    except (ValueError, OSError) as exc:
        raise UsageError(f"bad space {spec!r}: {exc}") from None
    raise UsageError(f"unknown space {spec!r}; use grid:lo:hi:n, orthonormal:n, sphere:spread, example1 or csv:path")


def read_space_csv(path) -> ActionSpace:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2 or rows[0][0] != "idx":
        raise ValueError("expected an idx,x0,... header and at least one row")
    return ActionSpace(np.array([[float(v) for v in r[1:]] for r in rows[1:]]))


def build_model(space_spec: str, kernel_spec: str, seed: int | None = None):
    space, model = parse_space(space_spec, seed)
    kind, _, rest = kernel_spec.partition(":")
    if kind == "linear" and not rest:
        return model if model is not None else LinearCanonicalModel(space)
    if model is not None:
        raise UsageError("example1 only supports the linear kernel")
    try:
        if kind == "rbf" and rest:
            return build_kernel_model(space, RBF(float(rest)))
        if kind == "gibbs" and not rest:
            return build_kernel_model(space, Gibbs())
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise UsageError(f"cannot build kernel model: {exc}") from None
    raise UsageError(f"unknown kernel {kernel_spec!r}; use linear, rbf:<length_scale> or gibbs")


# ---------------------------------------------------------------------------
# config files


def read_config(path) -> dict:
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        data = json.loads(text)
        if not isinstance(data, dict):
            raise UsageError("JSON config must be an object")
        return data
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _convert(action: argparse.Action, value):
    if isinstance(action, argparse._StoreTrueAction):
        if isinstance(value, bool):
            return value
        if str(value).lower() in ("1", "true", "yes", "on"):
            return True
        if str(value).lower() in ("0", "false", "no", "off"):
            return False
        raise UsageError(f"{action.dest}: expected a boolean, got {value!r}")
    if action.type is not None and isinstance(value, str):
        try:
            value = action.type(value)
        except (TypeError, ValueError) as exc:
            raise UsageError(f"{action.dest}: {exc}") from None
    elif action.type is not None and not isinstance(value, (list, dict)):
        value = action.type(value)
    if action.choices is not None and value not in action.choices:
        raise UsageError(f"{action.dest}: {value!r} not in {sorted(action.choices)}")
    return value


def apply_config(parser: argparse.ArgumentParser, args: argparse.Namespace, defaults: dict) -> argparse.Namespace:
    """Fill unset flags from the config file, then from ``defaults``."""
    actions = {a.dest: a for a in parser._actions if a.dest not in ("help", "config", "command")}
    if getattr(args, "config", None):
        try:
            config = read_config(args.config)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        unknown = sorted(set(config) - set(actions))
        if unknown:
            raise UsageError(f"unknown config keys: {unknown}")
        for key, value in config.items():
            if getattr(args, key, None) in (None, False):
                setattr(args, key, _convert(actions[key], value))
    for key, value in defaults.items():
        if getattr(args, key, None) is None:
            setattr(args, key, value)
    return args


# ---------------------------------------------------------------------------
# subcommands


SELECT_DEFAULTS = {"kernel": "linear", "mode": "distinct", "oracle": "exact", "ts_rounds": 300}


def cmd_select(args) -> int:
    if args.space is None or args.k is None or args.seed is None:
        raise UsageError("select needs --space, --k and --seed")
    model = build_model(args.space, args.kernel, args.seed)
    oracle = Exact() if args.oracle == "exact" else ThompsonApprox(args.ts_rounds)
    if args.k < 1:
        raise UsageError("--k must be >= 1")
    stop = Iterations(args.k) if args.mode == "iterations" else DistinctCount(args.k, args.max_iterations)
    result = epsilon_net_select(model, oracle, stop, np.random.default_rng(args.seed))
    _emit(result.to_json(), args.out)
    return EXIT_OK if result.complete else EXIT_INCOMPLETE


def _scaled(value: int, scale: int) -> int:
    return max(1, value // scale)


def _eps_list(text: str) -> list[float]:
    try:
        values = [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"bad --eps {text!r}") from None
    if not values or any(v <= 0 for v in values):
        raise UsageError("--eps values must be positive")
    return values


VERIFY_DEFAULTS = {"seed": 0, "scale": 1}


def cmd_verify(args) -> int:
    scale = args.scale
    kw: dict = {}
    name = args.check
    if name == "lemma1":
        kw = {"eps": _eps_list(args.eps or "0.2")[0], "k": args.k or 30, "runs": args.runs or 2000,
              "seed": args.seed}
    elif name == "lemma_maxq":
        if args.m is None or args.k is None:
            raise UsageError("lemma_maxq needs --m and --k")
        kw = {"m": args.m, "k": args.k}
    elif name == "iid_band":
        kw = {"samples": _scaled(10**5, scale), "seed": args.seed}
    elif name == "widths":
        kw = {"seed": args.seed}
    elif name == "thm1":
        kw = {"preset": args.preset or "sphere:0.05", "c": args.c, "seed": args.seed,
              "eval_instances": _scaled(10**5, scale)}
    elif name == "thm2":
        kw = {"preset": args.preset or "sphere:0.05", "k": args.k or 50, "c": args.c, "reps": args.reps or 30,
              "seed": args.seed, "eval_instances": _scaled(10**4, scale)}
    elif name == "thm3":
        kw = {"preset": args.preset or "rbf-grid:500:1.0", "eps_values": tuple(_eps_list(args.eps or "0.4,0.2,0.1,0.05")),
              "c": args.c, "seed": args.seed, "eval_instances": _scaled(10**5, scale)}
    elif name == "thm5":
        kw = {"k": args.k or 1, "c": 0.1 if args.c is None else args.c, "c_lower": args.c_lower,
              "runs": args.runs or 200, "seed": args.seed}
    kw = {k: v for k, v in kw.items() if v is not None}
    try:
        result = verify.RUNNERS[name](**kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _emit(result.to_json(), args.out)
    return EXIT_OK if result.holds else EXIT_INCOMPLETE


EXPERIMENT_DEFAULTS = {"scale": 1}


def cmd_experiment(args) -> int:
    if args.manifest:
        try:
            recorded = json.loads(Path(args.manifest).read_text())
            overrides = dict(recorded["config"])
        except (OSError, KeyError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read manifest: {exc}") from None
        if args.name is not None and args.name != recorded["experiment"]:
            raise UsageError("experiment name does not match the manifest")
        name = recorded["experiment"]
        overrides.pop("experiment", None)
        overrides.pop("output_dir", None)
    else:
        if args.name is None:
            raise UsageError("experiment needs a name or --manifest")
        if args.seed is None:
            raise UsageError("experiment needs --seed")
        name = args.name
        overrides = {"seed": args.seed, "scale": args.scale}
        for key in ("repetitions", "eval_instances"):
            if getattr(args, key) is not None:
                overrides[key] = getattr(args, key)
        if args.wallclock:
            overrides["record_wallclock"] = True
        if args.duplicates_consume:
            if name != "combinatorial":
                raise UsageError("--duplicates-consume only applies to the combinatorial experiment")
            overrides["duplicates_consume"] = True
    overrides["workers"] = args.workers if args.workers is not None else evaluation.default_workers()
    out_dir = args.out_dir or "results"
    overrides["output_dir"] = out_dir
    try:
        config = evaluation.make_config(name, **overrides)
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from None
    try:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        probe = Path(out_dir) / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise UsageError(f"output directory not writable: {exc}") from None
    result = evaluation.run_experiment(config)
    for path in evaluation.write_outputs(result, out_dir):
        print(path)
    return EXIT_OK


def cmd_gen(args) -> int:
    if args.space is None:
        raise UsageError("gen needs --space")
    space, _ = parse_space(args.space, args.seed)
    _emit(space.to_csv(), args.out, newline=False)
    return EXIT_OK


def _emit(text: str, out, newline: bool = True) -> None:
    if out:
        Path(out).write_text(text + ("\n" if newline else ""))
    else:
        sys.stdout.write(text + ("\n" if newline else ""))


# ---------------------------------------------------------------------------
# parser


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = argparse.ArgumentParser(prog="bandit-subset", description="Representative subset selection for bandit families.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("select", help="run the epsilon-net selection loop")
    p.add_argument("--config", help="key = value or JSON file; flags override it")
    p.add_argument("--space", help="grid:lo:hi:n | orthonormal:n | sphere:spread | example1 | csv:path")
    p.add_argument("--kernel", help="linear (default) | rbf:<length_scale> | gibbs")
    p.add_argument("--k", type=int, help="iterations or distinct actions")
    p.add_argument("--mode", choices=("distinct", "iterations"), help="stop rule (default distinct)")
    p.add_argument("--max-iterations", type=int, help="cap for distinct mode (default 1000 k)")
    p.add_argument("--oracle", choices=("exact", "ts"), help="inner argmax solver (default exact)")
    p.add_argument("--ts-rounds", type=int, help="Thompson rounds per oracle call (default 300)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="write JSON here instead of stdout")
    p.set_defaults(func=cmd_select, defaults=SELECT_DEFAULTS)

    p = sub.add_parser("verify", help="numerically check a lemma or bound")
    p.add_argument("check", choices=verify.CHECKS)
    p.add_argument("--config")
    p.add_argument("--eps", help="scale, or comma list for thm3")
    p.add_argument("--k", type=int)
    p.add_argument("--m", type=int, help="number of clusters (lemma_maxq)")
    p.add_argument("--runs", type=int)
    p.add_argument("--reps", type=int)
    p.add_argument("--preset", help="sphere:<spread> | rbf-grid:<n>:<l>")
    p.add_argument("--c", type=float, help="absolute constant C (default 3; 0.1 for thm5)")
    p.add_argument("--c-lower", type=float, help="lower-bound constant c (default 0.1)")
    p.add_argument("--seed", type=int)
    p.add_argument("--scale", type=int, help="divide Monte-Carlo sample counts")
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify, defaults=VERIFY_DEFAULTS)

    p = sub.add_parser("experiment", help="run one of the four experiments")
    p.add_argument("name", nargs="?", choices=tuple(evaluation.RUNNERS))
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--scale", type=int, help="divide eval instances and repetitions (min 10 reps)")
    p.add_argument("--repetitions", type=int)
    p.add_argument("--eval-instances", type=int)
    p.add_argument("--workers", type=int, help="process count (default: BANDIT_SUBSET_THREADS or CPU count)")
    p.add_argument("--out-dir")
    p.add_argument("--manifest", help="replay the run recorded in this manifest")
    p.add_argument("--wallclock", action="store_true", help="record per-method wallclock_ms")
    p.add_argument("--duplicates-consume", action="store_true",
                   help="count every oracle call, not only new actions, in EpsilonNet+TS pulls")
    p.set_defaults(func=cmd_experiment, defaults=EXPERIMENT_DEFAULTS)

    p = sub.add_parser("gen", help="emit an action-space CSV")
    p.add_argument("--config")
    p.add_argument("--space")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen, defaults={})

    return parser, {name: sp for name, sp in sub.choices.items()}


def main(argv=None) -> int:
    parser, subparsers = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage; the contract reserves 2 for incomplete results
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        apply_config(subparsers[args.command], args, args.defaults)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
