"""Command-line entry point: ``sofai run|baseline|inspect|export``.

Exit codes: 0 on success, 1 on configuration, parse or I/O errors, 2 when
the task file parses but fails validation.  Errors go to stderr as a single
line starting with ``error:``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

from .experience import ExperienceStore, StoreFormatError, load_store, save_store
from .metacognition import ArbitrationConfig
from .orchestrator import (
    RunConfig,
    TraceFormatError,
    export_csv,
    read_trace,
    run_experiment,
    summary_csv,
    write_trace,
)
from .world import TaskParseError, TaskValidationError, load_task

log = logging.getLogger("sofai")


class CliError(Exception):
    def __init__(self, message: str, code: int = 1):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise CliError(message)


# flag name -> (RunConfig/ArbitrationConfig attribute, type)
_RUN_KEYS: dict[str, tuple[str, type]] = {
    "mode": ("mode", str),
    "episodes": ("episodes", int),
    "seed": ("seed", int),
    "budget-s": ("episode_budget_s", float),
    "alpha": ("alpha", float),
    "gamma": ("gamma", float),
    "clock": ("clock", str),
}
_ARB_KEYS: dict[str, tuple[str, type]] = {
    "tau1": ("tau1", float),
    "lambda-time": ("lambda_time", float),
    "k": ("k", float),
    "m-scale": ("m_scale", float),
}
_PATH_KEYS = ("task", "trace", "summary", "store")


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--task")
    p.add_argument("--config")
    for flag in (*_RUN_KEYS, *_ARB_KEYS):
        p.add_argument(f"--{flag}", dest=flag.replace("-", "_"))
    for flag in ("trace", "summary", "store"):
        p.add_argument(f"--{flag}")
    p.add_argument("--block", default=None)
    p.add_argument("-v", "--verbose", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sofai", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    _add_run_flags(sub.add_parser("run", help="run an experiment with meta-cognitive arbitration"))
    _add_run_flags(sub.add_parser("baseline", help="run a pure-s1 or pure-s2 baseline"))
    p = sub.add_parser("inspect", help="print store statistics as JSON")
    p.add_argument("--store", required=True)
    p = sub.add_parser("export", help="aggregate a trace into per-block CSV")
    p.add_argument("--trace", required=True)
    p.add_argument("--summary", help="output CSV (stdout if omitted)")
    p.add_argument("--block", default="10")
    return parser


def _settings(args: argparse.Namespace) -> dict[str, Any]:
    """Merge the optional JSON config file with flags; flags win."""
    merged: dict[str, Any] = {}
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text())
        except FileNotFoundError:
            raise CliError(f"config: file not found: {args.config}") from None
        except json.JSONDecodeError as exc:
            raise CliError(f"config: invalid JSON at line {exc.lineno}") from None
        if not isinstance(doc, dict):
            raise CliError("config: top level must be an object")
        known = {*_RUN_KEYS, *_ARB_KEYS, *_PATH_KEYS, "block"}
        for key, value in doc.items():
            flag = key.replace("_", "-")
            if flag not in known:
                raise CliError(f"{key}: unknown config key")
            merged[flag] = value
    for flag in (*_RUN_KEYS, *_ARB_KEYS, *_PATH_KEYS, "block"):
        value = getattr(args, flag.replace("-", "_"), None)
        if value is not None:
            merged[flag] = value
    return merged


def _convert(flag: str, value: Any, kind: type) -> Any:
    try:
        if kind is int:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        return kind(value)
    except (TypeError, ValueError):
        raise CliError(f"{flag}: invalid value {value!r}") from None


def _run_config(settings: dict[str, Any]) -> RunConfig:
    run_kw = {attr: _convert(f, settings[f], kind) for f, (attr, kind) in _RUN_KEYS.items() if f in settings}
    arb_kw = {attr: _convert(f, settings[f], kind) for f, (attr, kind) in _ARB_KEYS.items() if f in settings}
    try:
        arb = ArbitrationConfig(**arb_kw)
    except ValueError as exc:
        raise CliError(f"arbitration: {exc}") from None
    try:
        return RunConfig(arbitration=arb, **run_kw)
    except ValueError as exc:
        field = str(exc).split()[0]
        raise CliError(f"{field}: {exc}") from None


def _open_store(path: str | None, config: RunConfig, settings: dict[str, Any]) -> ExperienceStore:
    if path and Path(path).exists():
        try:
            store = load_store(path)
        except StoreFormatError as exc:
            raise CliError(f"store: {exc}") from None
        for flag, attr in (("alpha", "alpha"), ("gamma", "gamma")):
            if flag in settings:
                setattr(store, attr, getattr(config, attr))
        return store
    return config.new_store()


def _write(path: str, text: str) -> None:
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise CliError(f"{path}: cannot write ({exc.strerror})") from None


def cmd_run(args: argparse.Namespace, baseline: bool = False) -> int:
    settings = _settings(args)
    if baseline:
        settings.setdefault("mode", "pure-s2")
        if settings["mode"] not in ("pure-s1", "pure-s2"):
            raise CliError(f"mode: baseline mode must be pure-s1 or pure-s2, got {settings['mode']!r}")
    config = _run_config(settings)
    if "task" not in settings:
        raise CliError("task: --task is required")
    try:
        task = load_task(settings["task"])
    except FileNotFoundError:
        raise CliError(f"task: file not found: {settings['task']}") from None
    except TaskValidationError as exc:
        raise CliError(f"task.{exc}", code=2) from None
    except TaskParseError as exc:
        raise CliError(f"task.{exc}") from None
    store = _open_store(settings.get("store"), config, settings)

    result = run_experiment(config, task, store)
    if "trace" in settings:
        try:
            write_trace(settings["trace"], result.records())
        except OSError as exc:
            raise CliError(f"trace: cannot write ({exc.strerror})") from None
    if "summary" in settings:
        _write(settings["summary"], summary_csv(result.episodes))
    if "store" in settings:
        try:
            save_store(store, settings["store"])
        except OSError as exc:
            raise CliError(f"store: cannot write ({exc.strerror})") from None
    blocks = result.blocks()
    log.info("ran %d episodes in mode %s", config.episodes, config.mode)
    print(
        json.dumps(
            {
                "task": task.task_id,
                "mode": config.mode,
                "episodes": config.episodes,
                "final_block_mean_return": blocks[-1].mean_return,
                "final_block_s2_fraction": blocks[-1].s2_fraction,
                "charged_s": result.charged_s,
            }
        )
    )
    return 0


def store_report(store: ExperienceStore) -> dict[str, Any]:
    def means(table):
        return [{"key": [str(k) for k in (key if isinstance(key, tuple) else (key,))], "mean": m.mean, "count": m.count}
                for key, m in sorted(table.items())]

    return {
        "q_entries": len(store.q_table),
        "q_visits": store.visits(),
        "params": {"alpha": store.alpha, "gamma": store.gamma, "q0": store.q0},
        "solver_runtime": means(store.runtimes),
        "solver_outcome": means(store.outcomes),
        "cell_outcome_entries": len(store.cell_outcomes),
        "task_returns": means(store.task_returns),
        "mc_costs": means(store.mc_costs),
    }


def cmd_inspect(args: argparse.Namespace) -> int:
    try:
        store = load_store(args.store)
    except FileNotFoundError:
        raise CliError(f"store: file not found: {args.store}") from None
    except StoreFormatError as exc:
        raise CliError(f"store: {exc}") from None
    print(json.dumps(store_report(store), indent=2))
    return 0


def cmd_export(args: argparse.Namespace) -> int:
    block = _convert("block", args.block, int)
    if block < 1:
        raise CliError("block: must be a positive integer")
    try:
        rows = read_trace(args.trace)
    except FileNotFoundError:
        raise CliError(f"trace: file not found: {args.trace}") from None
    except TraceFormatError as exc:
        raise CliError(f"trace: {exc}") from None
    text = export_csv(rows, block)
    if args.summary:
        _write(args.summary, text)
    else:
        sys.stdout.write(text)
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(
            level=logging.DEBUG if getattr(args, "verbose", 0) > 1 else logging.WARNING,
            stream=sys.stderr,
            format="%(message)s",
        )
        if args.command == "run":
            return cmd_run(args)
        if args.command == "baseline":
            return cmd_run(args, baseline=True)
        if args.command == "inspect":
            return cmd_inspect(args)
        if args.command == "export":
            return cmd_export(args)
        raise CliError("command: expected one of run, baseline, inspect, export")
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
