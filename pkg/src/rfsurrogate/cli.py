"""Command-line front end.

    rfsurrogate train CONFIG -o DIR
    rfsurrogate curve CONFIG [--figure NAME] -o DIR
    rfsurrogate verify

Every output directory gets a ``manifest.json``; passing that manifest back as
CONFIG reproduces the run.  Exit codes: 0 success, 2 config error, 3 runtime or
invariant failure.

Curve CSV columns (stable): ``scenario,pnr_db,success_rate,stderr,n_trials``.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .config import ConfigError, config_from_dict, config_to_dict, pnr_grid
from .experiment import Figure, ModelStore, attack_success_curve, reproduce
from .nn.io import save_model

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

CSV_HEADER = "scenario,pnr_db,success_rate,stderr,n_trials"
MANIFEST_VERSION = 1

log = logging.getLogger("rfsurrogate")


def _cpu_count() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


def _common(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, help="override the config's master seed")
    p.add_argument("--trials", type=int, help="Monte Carlo trials per PNR point")
    p.add_argument("--pnr-min", type=float)
    p.add_argument("--pnr-max", type=float)
    p.add_argument("--pnr-step", type=float)
    p.add_argument("--alg1-literal", action="store_true", help="literal variant: attack on a noise gate and keep the largest non-flipping amplitude")
    p.add_argument("--jobs", type=int, default=_cpu_count(), help="worker processes (results do not depend on it)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rfsurrogate", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train the target and surrogate models")
    t.add_argument("config")
    t.add_argument("-o", "--output", required=True)
    _common(t)

    c = sub.add_parser("curve", help="attack-success curves as CSV")
    c.add_argument("config")
    c.add_argument("--figure", choices=[f.value for f in Figure])
    c.add_argument("-o", "--output", required=True)
    _common(c)

    v = sub.add_parser("verify", help="run the invariant suites at small scale")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--suite", action="append", help="run only this suite (repeatable)")
    v.add_argument("--inject", choices=["gradient", "bisection", "budget"], help=argparse.SUPPRESS)
    return ap


def _read_json(path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"invalid JSON: {exc}") from None


def resolve_config(args):
    """Config file (or manifest) plus command-line overrides."""
    raw = _read_json(args.config)
    cfg = config_from_dict(raw)
    over = {}
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed", "must be >= 0")
        over["master_seed"] = args.seed
    if args.trials is not None:
        if args.trials < 1:
            raise ConfigError("--trials", "must be positive")
        over["test_trials"] = args.trials
    bounds = (args.pnr_min, args.pnr_max, args.pnr_step)
    if any(b is not None for b in bounds):
        grid = cfg.pnr_grid_db
        lo = grid[0] if args.pnr_min is None else args.pnr_min
        hi = grid[-1] if args.pnr_max is None else args.pnr_max
        step = (grid[1] - grid[0] if len(grid) > 1 else 1.0) if args.pnr_step is None else args.pnr_step
        over["pnr_grid_db"] = pnr_grid({"min": lo, "max": hi, "step": step})
    if args.alg1_literal:
        over["attack"] = dataclasses.replace(cfg.attack, alg1_literal=True)
    if args.jobs < 1:
        raise ConfigError("--jobs", "must be >= 1")
    return dataclasses.replace(cfg, **over), raw


def _manifest(args, cfg, command, extra=None):
    return {
        "manifest_version": MANIFEST_VERSION,
        "tool": "rfsurrogate",
        "tool_version": __version__,
        "command": command,
        "config_path": str(args.config),
        "master_seed": cfg.master_seed,
        "config": config_to_dict(cfg),
        **(extra or {}),
    }


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _stamp(manifest, t0):
    manifest["wall_clock"] = {
        "finished_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "seconds": round(time.perf_counter() - t0, 3),
    }


def format_csv(table) -> str:
    lines = [CSV_HEADER]
    for p in table.points:
        lines.append(f"{table.label},{p.pnr_db:.6g},{p.success_rate:.6g},{p.stderr:.6g},{p.n_trials}")
    return "\n".join(lines) + "\n"


def cmd_train(args) -> int:
    t0 = time.perf_counter()
    cfg, _ = resolve_config(args)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    store = ModelStore(cfg)
    model_t, model_a = store.target(), store.surrogate(cfg.topology.d_ba)
    save_model(model_t, out / "model_t.rfsnn")
    save_model(model_a, out / "model_a.rfsnn")
    metrics = {"model_t": model_t.train_meta, "model_a": model_a.train_meta}
    _write_json(out / "metrics.json", metrics)
    manifest = _manifest(args, cfg, "train")
    _stamp(manifest, t0)
    _write_json(out / "manifest.json", manifest)
    print(f"target val accuracy {model_t.train_meta['val_accuracy']:.4f}, surrogate val accuracy {model_a.train_meta['val_accuracy']:.4f}")
    return EXIT_OK


def cmd_curve(args) -> int:
    t0 = time.perf_counter()
    cfg, raw = resolve_config(args)
    figure = args.figure or raw.get("figure")
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    if figure:
        tables = reproduce(figure, cfg, jobs=args.jobs, store=ModelStore(cfg))
        prefix = f"{figure}_"
    else:
        tables = [attack_success_curve(cfg, jobs=args.jobs)]
        prefix = ""
    files = []
    for t in tables:
        name = f"{prefix}{t.label}.csv"
        (out / name).write_text(format_csv(t), encoding="utf-8")
        files.append(name)
    metrics = {t.label: t.metadata for t in tables}
    _write_json(out / "metrics.json", metrics)
    manifest = _manifest(args, cfg, "curve", {"figure": figure, "csv_files": files})
    _stamp(manifest, t0)
    _write_json(out / "manifest.json", manifest)
    for name in files:
        print(out / name)
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import format_report, run_suites

    results = run_suites(args.seed, inject=args.inject, only=args.suite)
    print(format_report(results, args.seed))
    return EXIT_OK if results and all(r.passed for r in results) else EXIT_RUNTIME


COMMANDS = {"train": cmd_train, "curve": cmd_curve, "verify": cmd_verify}


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors, which is also our config-error code
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        log.debug("failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
