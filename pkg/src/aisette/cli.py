"""``aisette``: check, test, run, encode/decode, lint, introspect and serve from one command.

Exit status: 0 success, 1 domain failure (diagnostic, counterexample,
fault, missing obligation), 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import re
import sys
from pathlib import Path

from . import corpus
from .agents import ScriptedTable, load_binding
from .bapi import FORMS, DecodeError, decode, encode, parse_type, to_json_bridge
from .diagnostics import AisetteError
from .lang import parse_module, typecheck
from .lang.checker import TypedModule
from .runtime.events import EventLog
from .runtime.holes import HoleStore
from .runtime.interp import EnvRecord, Interpreter
from .runtime.values import VOID, Fault, Value
from .sundew import (
    Bounds, SolverError, SolverNotFound, Unsupported, check_api_call_site, check_error_reachability, emit_smt,
    run_chktest,
)

OK, FAILED, USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# -- shared helpers -------------------------------------------------------------------


def read_module_text(spec: str) -> tuple[str, Path | None]:
    """Source text for a path, or for a bundled module name such as ``sign``."""
    p = Path(spec)
    if p.is_file() or (p.exists() and spec not in corpus.NAMES):
        try:
            return p.read_text(encoding="utf-8"), p
        except OSError as exc:
            raise UsageError(f"cannot read {spec}: {exc.strerror}") from None
    if spec in corpus.NAMES:
        return corpus.source(spec), None
    raise UsageError(f"no such module file: {spec}")


def load_module(spec: str) -> tuple[TypedModule, Path | None]:
    text, path = read_module_text(spec)
    return typecheck(parse_module(text)), path


def bounds_of(args) -> Bounds:
    return Bounds(args.string_bound, args.list_bound, args.events_bound)


def emit(args, text: str, data) -> None:
    if args.format == "json":
        print(json.dumps(data, sort_keys=True))
    elif text:
        print(text)


def value_text(tm, v: Value, t) -> str:
    """Values shown to users go out redacted."""
    return encode(tm, v, t, "redacted")


def value_json(tm, v: Value, t):
    from .bapi import redact

    return json.loads(to_json_bridge(tm, redact(v), t))


def fault_text(f: Fault) -> str:
    where = f" at {f.span}" if f.span else ""
    owner = f" in {f.owner}" if f.owner else ""
    return f"FAULT {f.kind}{owner}{where}: {f.message}"


def parse_literal_with_type(tm, text: str):
    """Decode an entity literal whose leading identifier names its type."""
    m = re.match(r"\s*([A-Za-z_][A-Za-z0-9_]*)", text)
    if not m or m.group(1) not in tm.entities:
        raise UsageError(f"expected an entity literal, got {text!r}")
    return decode(tm, text, m.group(1))


# -- check ------------------------------------------------------------------------------


def cmd_check(args) -> int:
    results, status = [], OK
    for spec in args.paths:
        text, _ = read_module_text(spec)
        try:
            typecheck(parse_module(text))
            results.append({"path": spec, "ok": True, "diagnostics": []})
            if args.format != "json":
                print(f"ok {spec}")
        except AisetteError as exc:
            status = FAILED
            results.append({"path": spec, "ok": False, "diagnostics": [d.to_json() for d in exc.diagnostics]})
            if args.format != "json":
                for d in exc.diagnostics:
                    print(f"{spec}:{d}")
    if args.format == "json":
        print(json.dumps(results, sort_keys=True))
    return status


# -- test -------------------------------------------------------------------------------


def cmd_test(args) -> int:
    tm, _ = load_module(args.module)
    rx = re.compile(args.filter) if args.filter else None
    names = [t.name for t in tm.source.chktests if rx is None or rx.search(t.name)]
    rng = tuple(args.int_range) if args.int_range else None
    bounds = bounds_of(args)
    out, status = [], OK
    if args.emit:
        Path(args.emit).mkdir(parents=True, exist_ok=True)
    for name in names:
        if args.emit:
            (Path(args.emit) / f"{name}.smt2").write_text(emit_smt(tm, name, bounds).text, encoding="utf-8")
        res = run_chktest(tm, name, args.solver, args.timeout, bounds, rng)
        params = {p.name: p.type for p in tm.chktests[name].params}
        rec = {"test": name, "status": res.status, "elapsed": round(res.elapsed, 4)}
        if res.status == "valid":
            line = f"VALID {name}"
        elif res.status == "counterexample":
            status = FAILED
            shown = ", ".join(f"{k} = {value_text(tm, v, params[k])}" for k, v in res.witness.items())
            line = f"COUNTEREXAMPLE {name} {shown}"
            rec["witness"] = {k: value_json(tm, v, params[k]) for k, v in res.witness.items()}
            if res.fault is not None:
                rec["fault"] = res.fault.to_json()
        else:
            status = FAILED
            line = f"UNKNOWN {name} ({res.reason})"
            rec["reason"] = res.reason
        if args.format != "json":
            print(line)
        out.append(rec)
    sites = []
    if args.errors:
        entries = [f.name for f in tm.source.functions if f.kind == "function"]
        for r in check_error_reachability(tm, entries, args.solver, args.timeout, bounds, rng):
            rec = {"entry": r.entry, "kind": r.kind, "at": str(r.span), "clause": r.clause, "status": r.status}
            decl = tm.functions[r.entry]
            types = {p.name: p.type for p in decl.params}
            shown = ""
            if r.status == "witness":
                rec["witness"] = {k: value_json(tm, v, types[k]) for k, v in r.witness.items()}
                shown = " " + ", ".join(f"{k} = {value_text(tm, v, types[k])}" for k, v in r.witness.items())
            elif r.status == "unknown":
                rec["reason"] = r.reason
                shown = f" ({r.reason})"
            if args.format != "json":
                print(f"{r.status.upper()} {r.entry} {r.kind} at {r.span}{shown}")
            sites.append(rec)
    if args.format == "json":
        print(json.dumps({"tests": out, "sites": sites, "run": len(names)}, sort_keys=True))
    else:
        print(f"{len(names)} tests run")
    return status


# -- run ----------------------------------------------------------------------------------


def stdin_resolver(tm):
    from .agents import value_json as untyped
    from .bapi import redact

    def resolve(hole_id, doc, t, args):
        shown = ", ".join(f"{n} = {json.dumps(untyped(redact(v)))}" for n, v in args)
        sys.stderr.write(f"hole {hole_id}{' (' + doc + ')' if doc else ''}: give a {t} for ({shown})\n> ")
        sys.stderr.flush()
        line = sys.stdin.readline()
        if not line.strip():
            return None
        try:
            return decode(tm, line.strip(), t)
        except DecodeError as exc:
            sys.stderr.write(f"{exc.diagnostics[0]}\n")
            return None

    return resolve


def cmd_run(args) -> int:
    tm, path = load_module(args.module)
    decl = tm.functions.get(args.name) or tm.apis.get(args.name)
    if decl is None:
        raise UsageError(f"no function, action or api named {args.name}")
    if len(args.args) != len(decl.params):
        raise UsageError(f"{args.name} takes {len(decl.params)} argument(s), {len(args.args)} given")
    try:
        values = [decode(tm, text, p.type) for text, p in zip(args.args, decl.params)]
        env = {}
        for item in args.env:
            name, _, text = item.partition("=")
            t = next((p.type for d in [*tm.apis.values(), *tm.functions.values()] for p in d.env if p.name == name), None)
            if t is None:
                raise UsageError(f"env.{name} is not declared anywhere in the module")
            env[name] = decode(tm, text, t)
        log = EventLog([parse_literal_with_type(tm, e) for e in args.event])
    except DecodeError as exc:
        raise UsageError(f"bad argument literal: {exc.diagnostics[0]}") from None
    agents = {}
    if args.stub:
        table = ScriptedTable.load(args.stub)
        agents = {name: table for name in tm.agents}
    for item in args.agent:
        name, _, spec = item.partition("=")
        agents[name] = load_binding(spec)
    calls = []

    def recorder(api_name):
        def bound(ctx):
            api_decl = tm.apis[api_name]
            shown = ", ".join(f"{p.name} = {value_text(tm, ctx.args[p.name], p.type)}" for p in api_decl.params)
            calls.append({"api": api_name, "args": {p.name: value_json(tm, ctx.args[p.name], p.type) for p in api_decl.params}})
            if args.format != "json":
                print(f"CALL {api_name}({shown})")
            return None

        return bound

    apis = {name: recorder(name) for name, d in tm.apis.items() if d.body is None and d.return_type.name == "Void"}
    examples = Path(args.examples) if args.examples else ((path.parent if path else Path.cwd()) / "holes")
    holes = HoleStore(tm, None if args.no_prompt else stdin_resolver(tm), examples)
    interp = Interpreter(tm, apis=apis, agents=agents, holes=holes, events=log)
    try:
        if args.name in tm.apis:
            result = interp.invoke_api(args.name, EnvRecord(env), values, log)
        else:
            result = interp.call(args.name, values, EnvRecord(env))
    except Fault as f:
        from .mint.app import scrub
        from .runtime.values import sensitive_leaves

        secrets = [s for v in [*values, *env.values()] for s in sensitive_leaves(v)]
        rec = {k: (scrub(v, secrets) if isinstance(v, str) else v) for k, v in f.to_json().items()}
        emit(args, scrub(fault_text(f), secrets), {"ok": False, "fault": rec, "calls": calls})
        return FAILED
    ret = decl.return_type
    if args.format == "json":
        shown = None if result == VOID else value_json(tm, result, ret)
        print(json.dumps({"ok": True, "result": shown, "calls": calls}, sort_keys=True))
    else:
        text = "void" if result == VOID else encode(tm, result, ret, args.form)
        print(f"OK {args.name} => {text}")
    return OK


# -- encode / decode -------------------------------------------------------------------------


def _input_text(args) -> str:
    return args.text if args.text is not None else sys.stdin.read()


def cmd_encode(args) -> int:
    tm, _ = load_module(args.module)
    t = parse_type(args.type)
    try:
        v = decode(tm, _input_text(args), t, args.input_form)
    except DecodeError as exc:
        return _decode_failure(args, exc)
    text = encode(tm, v, t, args.to)
    emit(args, text, {"ok": True, "form": args.to, "text": text})
    return OK


def cmd_decode(args) -> int:
    tm, _ = load_module(args.module)
    t = parse_type(args.type)
    try:
        v = decode(tm, _input_text(args), t, args.input_form)
    except DecodeError as exc:
        return _decode_failure(args, exc)
    emit(args, encode(tm, v, t, "redacted"), {"ok": True, "value": value_json(tm, v, t)})
    return OK


def _decode_failure(args, exc: DecodeError) -> int:
    emit(args, "\n".join(str(d) for d in exc.diagnostics), {"ok": False, "diagnostics": [d.to_json() for d in exc.diagnostics]})
    return FAILED


# -- lint / serve --------------------------------------------------------------------------------


def _config_path(args) -> str:
    path = args.config or os.environ.get("MINT_CONFIG")
    if not path:
        raise UsageError("no config given (use --config or MINT_CONFIG)")
    return path


def cmd_lint(args) -> int:
    from .lang import check_source
    from .mint import lint_sensitive_exposure, load_config

    cfg = load_config(_config_path(args))
    try:
        tm = check_source(cfg.resolve(cfg.source).read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"cannot read module {cfg.source}: {exc.strerror}") from None
    findings = lint_sensitive_exposure(cfg, tm)
    emit(args, "\n".join(str(f) for f in findings) or "clean", [dataclasses.asdict(f) for f in findings])
    return FAILED if findings else OK


def cmd_serve(args) -> int:
    from .mint import LintBlocked, MintApp, load_config, make_server

    cfg = load_config(_config_path(args))
    try:
        app = MintApp(cfg, allow_lint_warnings=args.allow_lint_warnings)
    except LintBlocked as exc:
        for f in exc.findings:
            print(f"lint {f}", file=sys.stderr)
        print("startup blocked by sensitivity lint (use --allow-lint-warnings to override)", file=sys.stderr)
        return USAGE
    server = make_server(app, args.host, args.port)
    host, port = server.server_address[:2]
    print(f"serving on http://{host}:{port}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return OK


# -- introspect ------------------------------------------------------------------------------------


def merged_module(module_text: str, prefix_text: str | None) -> TypedModule:
    """Module with the prefix file's declarations layered on top (same-named ones replaced)."""
    base = parse_module(module_text)
    if prefix_text is None:
        return typecheck(base)
    top = parse_module(prefix_text)
    merged = {}
    for bucket in ("aliases", "entities", "functions", "apis", "agents", "chktests"):
        mine = getattr(top, bucket)
        names = {d.name for d in mine}
        merged[bucket] = tuple(d for d in getattr(base, bucket) if d.name not in names) + mine
    return typecheck(dataclasses.replace(base, **merged))


def _find_action(tm: TypedModule, api: str) -> str:
    from .lang import ast as A

    callers = []
    for f in tm.source.functions:
        if f.kind != "action" or isinstance(f.body, A.Hole):
            continue
        if f"api {api}(" in _body_text(f):
            callers.append(f.name)
    if len(callers) != 1:
        raise UsageError(f"name the action with --action (callers of {api}: {', '.join(callers) or 'none'})")
    return callers[0]


def _body_text(f) -> str:
    from .lang.printer import _body

    return "\n".join(_body(f.body))


def cmd_introspect(args) -> int:
    text, _ = read_module_text(args.module)
    prefix = Path(args.prefix).read_text(encoding="utf-8") if args.prefix else None
    tm = merged_module(text, prefix)
    if args.api not in tm.apis:
        raise UsageError(f"no api named {args.api}")
    action = args.action or _find_action(tm, args.api)
    try:
        facts = [parse_literal_with_type(tm, e) for e in args.event]
    except DecodeError as exc:
        raise UsageError(f"bad --event literal: {exc.diagnostics[0]}") from None
    report = check_api_call_site(tm, action, args.api, facts, args.solver, args.timeout, bounds_of(args))
    types = {p.name: p.type for p in tm.apis[args.api].params}
    types.update({f"env.{p.name}": p.type for p in tm.functions[action].env})
    types.update({p.name: p.type for p in tm.functions[action].params})

    def shown(w):
        return ", ".join(f"{k} = {value_text(tm, v, types[k])}" for k, v in w.items() if k in types)

    data = {
        "action": action, "api": args.api, "satisfied": report.satisfied, "checked": report.checked,
        "missing": [
            {"clause": m.clause, "summary": m.summary, "status": m.status,
             "witness": {k: value_json(tm, v, types[k]) for k, v in m.witness.items() if k in types}}
            for m in report.missing
        ],
    }
    if report.satisfied:
        lines = [f"SATISFIED {args.api} in {action} ({len(report.checked)} requires clause(s) hold)"]
    else:
        lines = [f"MISSING {len(report.missing)} of {len(report.checked)} requires clause(s) for {args.api} in {action}"]
        for m in report.missing:
            lines.append(f"  requires {' '.join(m.clause.split())}")
            lines.append(f"    {m.summary}")
            if m.witness:
                lines.append(f"    witness: {shown(m.witness)}")
    emit(args, "\n".join(lines), data)
    return OK if report.satisfied else FAILED


# -- argument parsing ------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("text", "json"), default="text", help="output style")
    solver = argparse.ArgumentParser(add_help=False)
    solver.add_argument("--solver", default=None, help="solver command (default: $AISETTE_SOLVER or 'z3 -in -smt2')")
    solver.add_argument("--timeout", type=int, default=10_000, help="solver timeout in ms")
    solver.add_argument("--string-bound", type=int, default=64)
    solver.add_argument("--list-bound", type=int, default=8)
    solver.add_argument("--events-bound", type=int, default=8)

    p = argparse.ArgumentParser(prog="aisette", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", parents=[common], help="parse and typecheck modules")
    c.add_argument("paths", nargs="+")
    c.set_defaults(fn=cmd_check)

    t = sub.add_parser("test", parents=[common, solver], help="prove chktests with the solver")
    t.add_argument("module")
    t.add_argument("--filter", help="regex selecting chktest names")
    t.add_argument("--int-range", nargs=2, type=int, metavar=("LO", "HI"), help="restrict Int inputs")
    t.add_argument("--errors", action="store_true", help="also classify fault sites in every function")
    t.add_argument("--emit", metavar="DIR", help="write each query as DIR/<test>.smt2")
    t.set_defaults(fn=cmd_test)

    r = sub.add_parser("run", parents=[common], help="evaluate a function, action or api")
    r.add_argument("module")
    r.add_argument("name")
    r.add_argument("args", nargs="*", help="arguments as BAPI literals")
    r.add_argument("--env", action="append", default=[], metavar="NAME=LITERAL")
    r.add_argument("--event", action="append", default=[], metavar="LITERAL", help="event appended before the run")
    r.add_argument("--stub", metavar="TSV", help="scripted table bound to every declared agent")
    r.add_argument("--agent", action="append", default=[], metavar="NAME=SPEC", help="table:PATH, exec:CMD or a URL")
    r.add_argument("--examples", metavar="DIR", help="hole example directory (default: holes/ beside the module)")
    r.add_argument("--no-prompt", action="store_true", help="do not ask on stdin for unfilled holes")
    r.add_argument("--form", choices=("verbose", "minimal", "redacted", "json"), default="redacted")
    r.set_defaults(fn=cmd_run)

    for name, fn, helptext in (("encode", cmd_encode, "convert a value between wire forms"),
                               ("decode", cmd_decode, "validate a value against a type")):
        e = sub.add_parser(name, parents=[common], help=helptext)
        e.add_argument("module")
        e.add_argument("type")
        e.add_argument("--text", help="input text (default: stdin)")
        e.add_argument("--input-form", choices=("verbose", "minimal", "json"), default=None,
                       help="input form (default: detect JSON, else BAPI)")
        if name == "encode":
            e.add_argument("--to", choices=FORMS, default="verbose")
        e.set_defaults(fn=fn)

    lt = sub.add_parser("lint", parents=[common], help="sensitivity lint for a service config")
    lt.add_argument("--config", help="config path (default: $MINT_CONFIG)")
    lt.set_defaults(fn=cmd_lint)

    i = sub.add_parser("introspect", parents=[common, solver], help="check an api call site's obligations")
    i.add_argument("module")
    i.add_argument("--api", required=True)
    i.add_argument("--action", help="action containing the call (default: the only caller)")
    i.add_argument("--prefix", metavar="FILE", help="declarations that replace same-named ones in the module")
    i.add_argument("--event", action="append", default=[], metavar="LITERAL", help="event assumed present in the log")
    i.set_defaults(fn=cmd_introspect)

    s = sub.add_parser("serve", parents=[common], help="run the HTTP service")
    s.add_argument("--config", help="config path (default: $MINT_CONFIG)")
    s.add_argument("--host", default=None)
    s.add_argument("--port", type=int, default=None)
    s.add_argument("--allow-lint-warnings", action="store_true")
    s.set_defaults(fn=cmd_serve)
    return p


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    # literals such as -3i would otherwise be read as option flags; BAPI and int() skip the space
    argv = [" " + a if re.match(r"-\d", a) else a for a in argv]
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    if extra and args.command == "run" and not any(a.startswith("-") for a in extra):
        # positional literals that came after an option
        args.args = [*args.args, *extra]
    elif extra:
        parser.error(f"unrecognized arguments: {' '.join(extra)}")
    try:
        return args.fn(args)
    except UsageError as exc:
        _usage(args, str(exc))
        return USAGE
    except (SolverNotFound, SolverError) as exc:
        _usage(args, str(exc))
        return USAGE
    except Unsupported as exc:
        _usage(args, str(exc))
        return USAGE
    except AisetteError as exc:
        from .mint import ConfigError

        if isinstance(exc, ConfigError):
            _usage(args, str(exc))
            return USAGE
        emit(args, str(exc), {"ok": False, "diagnostics": [d.to_json() for d in exc.diagnostics]})
        return FAILED


def _usage(args, message: str) -> None:
    if getattr(args, "format", "text") == "json":
        print(json.dumps({"ok": False, "error": message}))
    else:
        print(f"aisette: {message}", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
