"""Command-line entry point.

Every run writes its outputs plus ``<output>.manifest.json``; ``homecourt
replay MANIFEST`` re-runs the recorded command and checks the outputs hash
identically.
"""
from __future__ import annotations

import argparse
import datetime as dt
import hashlib
import json
import os
import platform
import secrets
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, glm, inference, kernels, matching, metrics, simulate
from .errors import ConfigError, HomecourtError
from .model import GD_ORDER, GenderDivision, Stat, parse_dataset
from .rpi import RpiCache

OUT_DIR_ENV = "HOMECOURT_OUT_DIR"
EXIT_OK, EXIT_DATA, EXIT_USAGE = 0, 1, 2

DEFAULT_OUT = {
    "validate": "validation.csv",
    "summarize": "summary.csv",
    "attendance-test": "attendance_test.csv",
    "match-diagnose": "match_diagnose.json",
    "fit": "glm_fit.csv",
    "simulate": "league.csv",
}
# flags that never change what a run computes; excluded from the replay argv
_NOT_REPLAYED = {"help", "out_dir"}


class UsageError(Exception):
    pass


@dataclass
class RunOutput:
    files: dict[str, str] = field(default_factory=dict)  # file name -> content
    inputs: list[str] = field(default_factory=list)
    exit_code: int = EXIT_OK
    message: str = ""


# ----------------------------------------------------------------- helpers

def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _file_hash(path) -> str:
    return _sha256(Path(path).read_bytes())


def _with_suffix(name: str, suffix: str) -> str:
    stem, _, ext = name.rpartition(".")
    return f"{stem or ext}{suffix}"


def _main_name(args) -> str:
    name = args.out or DEFAULT_OUT[args.command]
    if getattr(args, "json", False) and name.endswith(".csv"):
        name = name[: -len(".csv")] + ".json"
    return name


def _parse(path, schema_path, strict: bool):
    schema = json.loads(Path(schema_path).read_text()) if schema_path else None
    with open(path, newline="") as fh:
        return parse_dataset(fh, schema=schema, strict=strict)


def _load(args):
    result = _parse(args.input, args.schema, args.strict)
    if result.errors:
        print(f"skipped {len(result.errors)} invalid row(s); run `validate` for details", file=sys.stderr)
    return result.dataset


def _gds(codes) -> tuple[GenderDivision, ...] | None:
    if not codes:
        return None
    try:
        return tuple(GenderDivision.parse(c) for c in codes)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _stats(names, default):
    if not names:
        return tuple(default)
    try:
        return tuple(Stat.parse(n) for n in names)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _round_floats(obj, digits: int = 6):
    if isinstance(obj, float):
        return float(f"{obj:.{digits}g}")
    if isinstance(obj, dict):
        return {k: _round_floats(v, digits) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_round_floats(v, digits) for v in obj]
    return obj


# ---------------------------------------------------------------- commands

def cmd_validate(args) -> RunOutput:
    result = _parse(args.input, args.schema, strict=False)
    rows = [("error", e.row, e.message) for e in result.errors]
    rows += [("warning", w.row, w.message) for w in result.warnings]
    if args.json:
        doc = {
            "valid": result.ok,
            "n_games": len(result.dataset),
            "errors": [{"row": e.row, "message": e.message} for e in result.errors],
            "warnings": [{"row": w.row, "message": w.message} for w in result.warnings],
        }
        text = json.dumps(doc, indent=2) + "\n"
    else:
        lines = ["severity,row,message"] + [f'{s},{r},"{m}"' for s, r, m in rows]
        text = "\n".join(lines) + "\n"
    out = RunOutput({_main_name(args): text}, [args.input])
    out.message = f"{len(result.dataset)} valid game(s), {len(result.errors)} error(s), {len(result.warnings)} warning(s)"
    if result.errors:
        out.exit_code = EXIT_DATA
    return out


def cmd_summarize(args) -> RunOutput:
    ds = _load(args)
    rows = metrics.sort_by_home_away(metrics.summarize(ds, pool_seasons=args.pool_seasons))
    if args.plot_data:
        text = (json.dumps(metrics.plot_data(rows), indent=2) + "\n") if args.json else metrics.plot_data_csv(rows)
    else:
        text = metrics.summary_json(rows) if args.json else metrics.summary_csv(rows)
    return RunOutput({_main_name(args): text}, [args.input])


def cmd_attendance_test(args) -> RunOutput:
    ds = _load(args)
    table = inference.attendance_table(
        ds,
        iterations=args.iterations,
        seed=args.seed,
        stats=_stats(args.stats, Stat),
        gender_divisions=_gds(args.gender_divisions),
        family_alpha=args.alpha_family,
        n_bins=args.bins,
        threads=args.threads,
    )
    text = table.to_json() if args.json else table.to_csv()
    out = RunOutput({_main_name(args): text}, [args.input])
    out.message = f"alpha = {args.alpha_family} / {table.n_tests} = {table.alpha:.3g}"
    for gd, err in table.errors.items():
        print(f"{gd.label}: {err}", file=sys.stderr)
    return out


def cmd_match_diagnose(args) -> RunOutput:
    ds = _load(args)
    gd = _gds([args.gender_division])[0]
    cutoffs = matching.attendance_cutoffs(ds, gd)
    low, high = matching.partition_by_attendance(ds, gd, cutoffs)
    cache = RpiCache(ds)
    low_v = np.array([cache.advantage(g) for g in low])
    high_v = np.array([cache.advantage(g) for g in high])
    doc = matching.diagnose(low_v, high_v, args.bins, np.random.default_rng(args.seed))
    doc["gender_division"] = gd.code
    doc["cutoffs"] = {"low": cutoffs.low_cutoff, "high": cutoffs.high_cutoff}
    doc["seed"] = args.seed
    doc = _round_floats(doc)
    for key in ("ks_pre", "ks_post"):
        doc[key]["p_value"] = float(f"{doc[key]['p_value']:.2e}")
    name = args.out or DEFAULT_OUT["match-diagnose"]
    return RunOutput({name: json.dumps(doc, indent=2) + "\n"}, [args.input])


def cmd_fit(args) -> RunOutput:
    ds = _load(args)
    season = args.season
    if season is None:
        seasons = ds.seasons
        if len(seasons) != 1:
            raise UsageError(f"--season is required: the input holds {len(seasons)} seasons")
        season = seasons[0]
    elif season == "all":
        season = None
    table = glm.fit_all(
        ds, season, n_folds=args.folds, n_lambdas=args.lambdas, seed=args.seed, rule=args.rule,
        threads=args.threads, stats=_stats(args.stats, glm.ELIGIBLE_STATS),
    )
    for stat, err in table.errors.items():
        print(f"{stat.value}: {err}", file=sys.stderr)
    name = _main_name(args)
    files = {name: table.to_json() if args.json else table.to_csv(), _with_suffix(name, ".sidecar.json"): table.sidecar()}
    return RunOutput(files, [args.input])


def cmd_simulate(args) -> RunOutput:
    multipliers = {}
    for item in args.home_multiplier or ():
        stat, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--home-multiplier expects STAT=VALUE, got {item!r}")
        try:
            multipliers[Stat.parse(stat)] = float(value)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    config = simulate.LeagueConfig(
        gender_divisions=_gds(args.gender_divisions) or GD_ORDER,
        n_teams=args.teams,
        games_per_team=args.games,
        seasons=tuple(args.seasons),
        neutral_fraction=args.neutral_fraction,
        attendance_strength_coupling=args.attendance_coupling,
        overdispersion=args.overdispersion,
        seed=args.seed,
    )
    slope = args.referee_slope
    if args.pf_shift is not None:
        if slope:
            raise UsageError("give at most one of --referee-slope and --pf-shift")
        slope = simulate.referee_slope_for_pf_shift(args.pf_shift, config)
    config = simulate.with_bias(
        config, home_multipliers=multipliers, attendance_referee_slope=slope,
        neutral_home_bias=args.neutral_home_bias,
    )
    dataset, truth = simulate.generate_league(config)
    name = args.out or DEFAULT_OUT["simulate"]
    files = {name: simulate.write_dataset(dataset), _with_suffix(name, ".truth.json"): truth.to_json()}
    out = RunOutput(files)
    out.message = f"{len(dataset)} games"
    return out


COMMANDS = {
    "validate": cmd_validate,
    "summarize": cmd_summarize,
    "attendance-test": cmd_attendance_test,
    "match-diagnose": cmd_match_diagnose,
    "fit": cmd_fit,
    "simulate": cmd_simulate,
}
STOCHASTIC = {"attendance-test", "match-diagnose", "fit", "simulate"}


# ------------------------------------------------------------------ parser

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _probability(text: str) -> float:
    v = float(text)
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1), got {v}")
    return v


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = _Parser(prog="homecourt", description="Home-court and officiating bias analysis.")
    parser.add_argument("--version", action="version", version=f"homecourt {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    common = _Parser(add_help=False)
    common.add_argument("--out", help="output file name (relative names go under the output directory)")
    common.add_argument("--out-dir", help=f"output directory (default: ${OUT_DIR_ENV}, else the working directory)")
    common.add_argument("--json", action="store_true", help="write JSON instead of CSV")

    data = _Parser(add_help=False)
    data.add_argument("--input", required=True, help="games CSV (two rows per game)")
    data.add_argument("--schema", help="JSON file mapping canonical column names to the file's headers")
    data.add_argument("--strict", action="store_true", help="fail on any invalid row instead of skipping it")

    seeded = _Parser(add_help=False)
    seeded.add_argument("--seed", type=int, help="master seed; a fresh one is generated and recorded if omitted")

    threaded = _Parser(add_help=False)
    threaded.add_argument("--threads", type=_positive, default=1, help="worker threads; results do not depend on it")

    p = sub.add_parser("validate", parents=[common], formatter_class=fmt, help="check a games CSV")
    p.add_argument("--input", required=True, help="games CSV (two rows per game)")
    p.add_argument("--schema", help="JSON file mapping canonical column names to the file's headers")

    p = sub.add_parser("summarize", parents=[common, data], formatter_class=fmt,
                       help="home/neutral/away percent increases")
    p.add_argument("--plot-data", action="store_true", help="emit the long-format plotting table")
    p.add_argument("--pool-seasons", action="store_true", help="one value per stat and division over all seasons")

    p = sub.add_parser("attendance-test", parents=[common, data, seeded, threaded], formatter_class=fmt,
                       help="repeated matched low/high attendance tests")
    p.add_argument("--iterations", type=_positive, default=inference.ITERATIONS, help="matchings per division")
    p.add_argument("--alpha-family", type=_probability, default=inference.FAMILY_ALPHA,
                   help="family-wise alpha before the Bonferroni division")
    p.add_argument("--bins", type=_positive, default=matching.N_BINS, help="RPI' bins used for matching")
    p.add_argument("--stats", nargs="+", metavar="STAT", help="statistics to test (default: all 14)")
    p.add_argument("--gender-divisions", nargs="+", metavar="GD", help="e.g. M1 W3 (default: all present)")

    p = sub.add_parser("match-diagnose", parents=[common, data, seeded], formatter_class=fmt,
                       help="RPI' balance before and after one matching")
    p.add_argument("--gender-division", required=True, metavar="GD", help="e.g. M1")
    p.add_argument("--bins", type=_positive, default=matching.N_BINS, help="RPI' bins used for matching")

    p = sub.add_parser("fit", parents=[common, data, seeded, threaded], formatter_class=fmt,
                       help="LASSO Poisson regressions with cross-validated penalty")
    p.add_argument("--season", help="season to fit; 'all' pools every season (required if several are present)")
    p.add_argument("--folds", type=_positive, default=glm.N_FOLDS, help="cross-validation folds")
    p.add_argument("--lambdas", type=_positive, default=glm.N_LAMBDAS, help="penalty path length")
    p.add_argument("--rule", choices=("min", "1se"), default="min", help="penalty selection rule")
    p.add_argument("--stats", nargs="+", metavar="STAT", help="statistics to fit (default: all 8 eligible)")

    p = sub.add_parser("simulate", parents=[common, seeded], formatter_class=fmt,
                       help="generate a synthetic league with known biases")
    defaults = simulate.LeagueConfig()
    p.add_argument("--teams", type=_positive, default=defaults.n_teams, help="teams per division (even)")
    p.add_argument("--games", type=_positive, default=defaults.games_per_team, help="games per team per season")
    p.add_argument("--seasons", nargs="+", default=list(defaults.seasons), help="season labels")
    p.add_argument("--gender-divisions", nargs="+", metavar="GD", help="divisions to generate (default: all six)")
    p.add_argument("--neutral-fraction", type=float, default=defaults.neutral_fraction)
    p.add_argument("--attendance-coupling", type=float, default=defaults.attendance_strength_coupling,
                   help="correlation of log attendance with home strength")
    p.add_argument("--overdispersion", type=float, default=defaults.overdispersion, help="gamma frailty variance")
    p.add_argument("--home-multiplier", action="append", metavar="STAT=VALUE",
                   help="multiplicative home effect, repeatable (e.g. BLK=1.13)")
    p.add_argument("--referee-slope", type=float, default=0.0,
                   help="home PF/FTA log-rate change per sd of log attendance")
    p.add_argument("--pf-shift", type=float, help="size the referee slope to move home PF advantage by this many fouls")
    p.add_argument("--neutral-home-bias", action="store_true", help="apply home multipliers at neutral sites too")

    p = sub.add_parser("replay", formatter_class=fmt, help="re-run a manifest and verify identical outputs")
    p.add_argument("manifest", help="path to a *.manifest.json file")
    p.add_argument("--out-dir", help="where replayed outputs go (default: a 'replay' folder beside the manifest)")
    return parser


def _subparser(parser: argparse.ArgumentParser, command: str) -> argparse.ArgumentParser:
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[command]
    raise KeyError(command)


def canonical_argv(parser: argparse.ArgumentParser, args) -> list[str]:
    """Fully explicit argv reproducing ``args`` (every flag spelled out)."""
    argv = [args.command]
    for action in _subparser(parser, args.command)._actions:
        if action.dest in _NOT_REPLAYED or not action.option_strings:
            continue
        value = getattr(args, action.dest)
        flag = action.option_strings[-1]
        if isinstance(action, argparse._StoreTrueAction):
            if value:
                argv.append(flag)
        elif value is None:
            continue
        elif isinstance(action, argparse._AppendAction):
            for v in value:
                argv += [flag, str(v)]
        elif isinstance(value, list):
            argv += [flag, *map(str, value)]
        else:
            argv += [flag, repr(value) if isinstance(value, float) else str(value)]
    return argv


# --------------------------------------------------------------------- run

def output_dir(args) -> Path:
    return Path(args.out_dir or os.environ.get(OUT_DIR_ENV) or ".")


def _now() -> str:
    return dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")


def _run(parser, args) -> int:
    started = _now()
    if args.command in STOCHASTIC and args.seed is None:
        args.seed = secrets.randbits(63)
        print(f"seed: {args.seed}", file=sys.stderr)
    result = COMMANDS[args.command](args)
    outdir = output_dir(args)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, text in result.files.items():
        path = outdir / name
        path.parent.mkdir(parents=True, exist_ok=True)
        data = text.encode("utf-8")
        path.write_bytes(data)
        written.append({"path": name, "sha256": _sha256(data)})
    params = {k: v for k, v in vars(args).items() if k not in _NOT_REPLAYED}
    manifest = {
        "command": args.command,
        "argv": canonical_argv(parser, args),
        "params": params,
        "seed": getattr(args, "seed", None),
        "engine_version": __version__,
        "kernel_backend": kernels.BACKEND,
        "numpy_version": np.__version__,
        "python_version": platform.python_version(),
        "inputs": [{"path": str(Path(p).resolve()), "sha256": _file_hash(p)} for p in result.inputs],
        "outputs": written,
        "exit_code": result.exit_code,
        "started_at": started,
        "finished_at": _now(),
    }
    main_name = next(iter(result.files))
    (outdir / f"{main_name}.manifest.json").write_text(json.dumps(manifest, indent=2, default=str) + "\n")
    if result.message:
        print(result.message, file=sys.stderr)
    for w in written:
        print(outdir / w["path"])
    return result.exit_code


def replay(manifest_path, out_dir=None) -> int:
    """Re-run a manifest; 0 when every output is byte-identical, 1 otherwise."""
    manifest_path = Path(manifest_path)
    manifest = json.loads(manifest_path.read_text())
    for item in manifest["inputs"]:
        if not Path(item["path"]).exists() or _file_hash(item["path"]) != item["sha256"]:
            print(f"input changed or missing: {item['path']}", file=sys.stderr)
            return EXIT_DATA
    target = Path(out_dir) if out_dir else manifest_path.parent / "replay"
    code = main(manifest["argv"] + ["--out-dir", str(target)])
    if code != manifest.get("exit_code", EXIT_OK):
        print(f"replay exited with {code}, recorded {manifest.get('exit_code')}", file=sys.stderr)
        return EXIT_DATA
    mismatched = [o["path"] for o in manifest["outputs"]
                  if not (target / o["path"]).exists() or _file_hash(target / o["path"]) != o["sha256"]]
    if mismatched:
        print("outputs differ: " + ", ".join(mismatched), file=sys.stderr)
        return EXIT_DATA
    print(f"replay identical: {len(manifest['outputs'])} output(s)", file=sys.stderr)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "replay":
            return replay(args.manifest, args.out_dir)
        return _run(parser, args)
    except (UsageError, ConfigError) as exc:
        print(f"homecourt: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (HomecourtError, OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        print(f"homecourt: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
