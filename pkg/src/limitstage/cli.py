"""Batch front door: run constructions, verify their logs, render sentences.

Three subcommands cover the workbench surface:

* ``run`` executes one named construction under an oracle script and
  writes the canonical run log.  The construction id is
  ``<module>.<mode>``, e.g. ``qvector.dim1_pi2`` or
  ``realfields.findeg_dsigma2``.  Scripts come from a JSON file, an
  inline JSON object, or a generator spec (anything without a "table"
  key is handed to the script generator, with the config horizon
  filling in when the spec leaves it out).
* ``verify`` replays a finished log offline and compares stage by
  stage.  Runs are deterministic, so a clean log matches byte for
  byte; a log that stops early is reported unsettled rather than
  flagged, and any diverging stage is named.
* ``scott`` builds a catalog sentence, prints its rendering and
  complexity class, and evaluates it on a finite structure when one
  is supplied.

Exit codes are stable: 0 clean, 1 input error, 2 invariant violation.
All file I/O uses the canonical JSON forms owned by the construction
modules, so two executions of the same config produce byte-identical
logs.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field

from .ehrenfeucht import run_order_reduction
from .finitestructs import (
    FiniteStructure,
    InvariantError,
    ScriptError,
    run_finite_reduction,
)
from .oracles import gen_script, script_from_obj, validate_script
from .pgroups import run_group_reduction
from .qvector import run_qvector
from .realfields import run_field_reduction
from .scott import CATALOG, EvalError, build_scott, classify, eval_finite, render
from .serial import canonical_dumps, load_path

EXIT_CLEAN = 0
EXIT_INPUT = 1
EXIT_INVARIANT = 2

RUNNERS = {
    "finite": run_finite_reduction,
    "qvector": run_qvector,
    "realfields": run_field_reduction,
    "pgroups": run_group_reduction,
    "ehrenfeucht": run_order_reduction,
}

_CONFIG_KEYS = ("construction", "params", "script", "horizon", "out", "seed")


@dataclass(frozen=True)
class RunConfig:
    """One batch run: which construction, under which script, how far.

    ``script`` is a path string, an inline script object, or a
    generator spec.  ``horizon`` fills a generator spec that omits its
    own and must agree with an explicit table.  ``seed`` is recorded
    for harnesses that generated the config; execution itself is
    deterministic and never consumes it.
    """

    construction: str
    script: object
    params: dict = field(default_factory=dict)
    horizon: int | None = None
    out: str | None = None
    seed: int | None = None

    @staticmethod
    def from_obj(obj: dict) -> "RunConfig":
        if not isinstance(obj, dict):
            raise ScriptError("run config must be a JSON object")
        unknown = sorted(set(obj) - set(_CONFIG_KEYS))
        if unknown:
            raise ScriptError(f"unknown config keys: {', '.join(unknown)}")
        if not isinstance(obj.get("construction"), str):
            raise ScriptError("config needs a construction id string")
        if "script" not in obj:
            raise ScriptError("config needs a script (path, object, or generator spec)")
        params = obj.get("params", {})
        if not isinstance(params, dict):
            raise ScriptError("config params must be an object")
        horizon = obj.get("horizon")
        if horizon is not None and (not isinstance(horizon, int) or horizon < 0):
            raise ScriptError("config horizon must be a nonnegative integer")
        out = obj.get("out")
        if out is not None and not isinstance(out, str):
            raise ScriptError("config out must be a path string")
        seed = obj.get("seed")
        if seed is not None and not isinstance(seed, int):
            raise ScriptError("config seed must be an integer")
        return RunConfig(obj["construction"], obj["script"], params, horizon, out, seed)


def _inline_or_path(text: str, label: str):
    """JSON value from an inline literal or a file path."""
    stripped = text.strip()
    if stripped.startswith("{") or stripped.startswith("["):
        try:
            return json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise ScriptError(f"inline {label} is not valid JSON: {exc}") from None
    try:
        return load_path(text)
    except OSError as exc:
        raise ScriptError(f"cannot read {label} file {text!r}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ScriptError(f"{label} file {text!r} is not valid JSON: {exc}") from None


def load_script(source, horizon: int | None):
    """Oracle script from a path, an inline table, or a generator spec.

    A mapping with a "table" key is a literal script and must agree
    with an explicit config horizon; anything else is a generator
    spec, with the config horizon filling in when the spec has none.
    Validation problems surface as ScriptError with the validator's
    own wording.
    """
    obj = _inline_or_path(source, "script") if isinstance(source, str) else source
    if not isinstance(obj, dict):
        raise ScriptError("script must be a JSON object or a path to one")
    if "table" in obj:
        try:
            script = script_from_obj(obj)
        except (KeyError, TypeError, ValueError) as exc:
            raise ScriptError(f"bad script object: {exc}") from None
        if horizon is not None and horizon != script.horizon:
            raise ScriptError(
                f"config horizon {horizon} disagrees with the script table ({script.horizon})"
            )
    else:
        spec = dict(obj)
        if horizon is not None:
            spec.setdefault("horizon", horizon)
        try:
            script = gen_script(spec)
        except (KeyError, TypeError, ValueError) as exc:
            raise ScriptError(f"bad script spec: {exc}") from None
    problems = validate_script(script)
    if problems:
        raise ScriptError("; ".join(problems))
    return script


def run_construction(construction: str, params: dict, script) -> dict:
    """Dispatches a ``<module>.<mode>`` id to its run entry point."""
    prefix, _, mode = construction.partition(".")
    runner = RUNNERS.get(prefix)
    if runner is None or not mode:
        known = ", ".join(sorted(RUNNERS))
        raise ScriptError(f"unknown construction {construction!r} (modules: {known})")
    return runner(mode, params, script)


def _report(log: dict, stream) -> None:
    """Finalize report: the scalar facts of the run's final record."""
    print(f"construction {log['construction']} ({len(log['stages'])} stages)", file=stream)
    for key, value in log["final"].items():
        if isinstance(value, (bool, int, str)) or value is None:
            print(f"  {key} = {json.dumps(value)}", file=stream)


def cmd_run(config: RunConfig) -> int:
    """Executes the configured construction and writes its log.

    The log goes to ``out`` when the config names one, otherwise to
    stdout (with the report on stderr so pipes stay clean).
    """
    try:
        script = load_script(config.script, config.horizon)
        log = run_construction(config.construction, dict(config.params), script)
    except ScriptError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InvariantError as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    text = canonical_dumps(log)
    if config.out:
        with open(config.out, "w", encoding="utf-8") as handle:
            handle.write(text + "\n")
        _report(log, sys.stdout)
    else:
        print(text)
        _report(log, sys.stderr)
    return EXIT_CLEAN


def cmd_verify(path: str) -> int:
    """Replays a run log offline and compares it stage by stage.

    Deterministic runs make the comparison exact: a full match is
    clean, a log whose stages are a proper prefix of the replay is
    unsettled (an honest partial record), and any divergence flags
    the first differing stage.  Idempotent; writes nothing.
    """
    try:
        log = _inline_or_path(path, "log")
    except ScriptError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    missing = [
        key
        for key in ("format", "construction", "params", "script", "stages", "final")
        if not isinstance(log, dict) or key not in log
    ]
    if missing:
        print(f"input error: log lacks keys: {', '.join(missing)}", file=sys.stderr)
        return EXIT_INPUT
    if log["format"] != "limitstage.run.v1":
        print(f"input error: unknown log format {log['format']!r}", file=sys.stderr)
        return EXIT_INPUT
    try:
        script = load_script(log["script"], None)
        replay = run_construction(log["construction"], dict(log["params"]), script)
    except ScriptError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InvariantError as exc:
        print(f"invariant violation during replay: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    logged = log["stages"]
    fresh = replay["stages"]
    if len(logged) > len(fresh):
        print(
            f"flagged: log holds {len(logged)} stages, replay only {len(fresh)}",
            file=sys.stderr,
        )
        return EXIT_INVARIANT
    for i, (got, want) in enumerate(zip(logged, fresh)):
        if canonical_dumps(got) != canonical_dumps(want):
            print(f"flagged stage {i}: log disagrees with replay", file=sys.stderr)
            return EXIT_INVARIANT
    if len(logged) < len(fresh):
        print(f"verdict unsettled: log stops at stage {len(logged)} of {len(fresh)}")
        return EXIT_CLEAN
    if canonical_dumps(log) != canonical_dumps(replay):
        print("flagged final report: log disagrees with replay", file=sys.stderr)
        return EXIT_INVARIANT
    print(f"clean: all {len(fresh)} stages replay identically")
    _report(replay, sys.stdout)
    return EXIT_CLEAN


def _catalog_params(catalog_id: str, params: dict) -> dict:
    """Catalog params with embedded structure objects revived."""
    if catalog_id == "scott_finite" and isinstance(params.get("struct"), dict):
        revived = dict(params)
        revived["struct"] = FiniteStructure.from_obj(params["struct"])
        return revived
    return params


def cmd_scott(catalog_id: str, params: dict, struct_source: str | None) -> int:
    """Builds a catalog sentence; prints rendering, class, and value."""
    try:
        phi = build_scott(catalog_id, _catalog_params(catalog_id, params))
    except ScriptError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (KeyError, TypeError, ValueError) as exc:
        print(f"input error: bad catalog params: {exc}", file=sys.stderr)
        return EXIT_INPUT
    print(render(phi))
    print(f"class {classify(phi).render()}")
    if struct_source is not None:
        try:
            obj = _inline_or_path(struct_source, "structure")
            structure = FiniteStructure.from_obj(obj)
            value = eval_finite(phi, structure)
        except ScriptError as exc:
            print(f"input error: {exc}", file=sys.stderr)
            return EXIT_INPUT
        except (EvalError, KeyError, TypeError, ValueError) as exc:
            print(f"input error: cannot evaluate on that structure: {exc}", file=sys.stderr)
            return EXIT_INPUT
        print(f"value {json.dumps(value)}")
    return EXIT_CLEAN


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="limitstage",
        description="Run scripted constructions, verify their logs, and render catalog sentences.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute a construction and write its run log")
    run_p.add_argument("--config", help="JSON run-config file; flags below override its fields")
    run_p.add_argument("--construction", help="construction id, <module>.<mode>")
    run_p.add_argument("--script", help="script JSON path, inline object, or generator spec")
    run_p.add_argument("--params", help="construction parameters, inline JSON or a file path")
    run_p.add_argument("--horizon", type=int, help="stage horizon for generator specs")
    run_p.add_argument("--out", help="log destination (stdout when omitted)")
    run_p.add_argument("--seed", type=int, help="recorded seed for generated configs")

    verify_p = sub.add_parser("verify", help="replay a run log and compare stage by stage")
    verify_p.add_argument("log", help="run-log path")

    scott_p = sub.add_parser("scott", help="build a catalog sentence and classify it")
    scott_p.add_argument("--id", required=True, help=f"catalog id, one of: {', '.join(sorted(CATALOG))}")
    scott_p.add_argument("--params", help="catalog parameters, inline JSON or a file path")
    scott_p.add_argument("--struct", help="finite structure to evaluate on, inline JSON or a path")
    return parser


def _main_run(args) -> int:
    try:
        merged = {}
        if args.config:
            loaded = _inline_or_path(args.config, "config")
            if not isinstance(loaded, dict):
                raise ScriptError("run config must be a JSON object")
            merged.update(loaded)
        for key in _CONFIG_KEYS:
            value = getattr(args, key)
            if value is not None:
                merged[key] = value
        if isinstance(merged.get("params"), str):
            merged["params"] = _inline_or_path(merged["params"], "params")
        config = RunConfig.from_obj(merged)
    except ScriptError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return cmd_run(config)


def _main_scott(args) -> int:
    try:
        params = _inline_or_path(args.params, "params") if args.params else {}
        if not isinstance(params, dict):
            raise ScriptError("catalog params must be a JSON object")
    except ScriptError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return cmd_scott(args.id, params, args.struct)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return _main_run(args)
    if args.command == "verify":
        return cmd_verify(args.log)
    return _main_scott(args)


if __name__ == "__main__":
    sys.exit(main())
