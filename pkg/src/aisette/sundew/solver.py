"""Child-process SMT solver: one script in, one check-sat answer (and model values) out."""

from __future__ import annotations

import os
import shlex
import shutil
import subprocess
import time
from dataclasses import dataclass

from ..diagnostics import NO_SPAN, AisetteError, error
from .smt import SexpError, read_sexps

DEFAULT_SOLVER = "z3 -in -smt2"
DEFAULT_TIMEOUT_MS = 10_000


class SolverNotFound(AisetteError):
    def __init__(self, command: str):
        super().__init__([error("solver-not-found", f"SMT solver not found: {command!r} (set AISETTE_SOLVER or --solver)", NO_SPAN)])


class SolverError(AisetteError):
    def __init__(self, message: str):
        super().__init__([error("solver-protocol", message, NO_SPAN)])


@dataclass
class Answer:
    status: str  # sat | unsat | unknown | timeout
    values: list | None
    elapsed: float


def solver_command(solver: str | None = None) -> list[str]:
    text = solver or os.environ.get("AISETTE_SOLVER") or DEFAULT_SOLVER
    argv = shlex.split(text)
    if not argv:
        raise SolverNotFound(text)
    exe = argv[0]
    found = shutil.which(exe)
    if found is None:
        raise SolverNotFound(exe)
    if len(argv) == 1 and os.path.basename(exe).startswith("z3"):
        argv += ["-in", "-smt2"]
    return argv


def solve(script: str, values: list[str] = (), solver: str | None = None, timeout_ms: int = DEFAULT_TIMEOUT_MS) -> Answer:
    """Run ``script`` (without check-sat) and return the verdict plus ``get-value`` results when sat."""
    argv = solver_command(solver)
    if timeout_ms <= 0:
        return Answer("timeout", None, 0.0)
    prefix = ""
    if os.path.basename(argv[0]).startswith("z3"):
        prefix = f"(set-option :timeout {int(timeout_ms)})\n"
    tail = "(check-sat)\n"
    if values:
        tail += "(get-value (" + " ".join(values) + "))\n"
    tail += "(exit)\n"
    start = time.perf_counter()
    try:
        proc = subprocess.run(
            argv, input=prefix + script + "\n" + tail, capture_output=True, text=True,
            timeout=timeout_ms / 1000 + 2,
        )
    except subprocess.TimeoutExpired:
        return Answer("timeout", None, time.perf_counter() - start)
    except OSError as exc:
        raise SolverNotFound(f"{argv[0]} ({exc})") from None
    elapsed = time.perf_counter() - start
    return _parse(proc.stdout, bool(values), elapsed, timeout_ms, proc.stderr)


def _parse(out: str, want_values: bool, elapsed: float, timeout_ms: int, err: str = "") -> Answer:
    try:
        items = read_sexps(out)
    except SexpError as exc:
        raise SolverError(f"unreadable solver output: {exc}: {out[:200]!r}") from None
    for i, item in enumerate(items):
        if isinstance(item, list) and item[:1] == ["error"]:
            raise SolverError(f"solver rejected the script: {_text(item)}")
        if item in ("sat", "unsat", "unknown"):
            values = None
            if item == "sat" and want_values:
                if i + 1 >= len(items) or not isinstance(items[i + 1], list) or items[i + 1][:1] == ["error"]:
                    raise SolverError(f"solver returned sat without a model: {out[:200]!r}")
                values = [pair[1] for pair in items[i + 1]]
            status = item
            if item == "unknown" and elapsed * 1000 >= 0.9 * timeout_ms:
                status = "timeout"
            return Answer(status, values, elapsed)
        if isinstance(item, str) and item not in ("success",):
            break
    raise SolverError(f"solver gave no check-sat answer: {(out or err)[:200]!r}")


def _text(sx) -> str:
    if isinstance(sx, tuple) and sx[:1] == ("#str",):
        return sx[1]
    if isinstance(sx, list):
        return " ".join(_text(x) for x in sx)
    return str(sx)
