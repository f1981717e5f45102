"""Hole execution: memoized answers from a resolver, optionally persisted as examples.

An example file ``<dir>/<hole id>.examples`` holds one verbose record per line::

    HoleExample{ hole = '_absbody', args = HoleArgs{ x = -3i }, result = 3i }
"""

from __future__ import annotations

import dataclasses
import threading
from pathlib import Path
from typing import Callable

from ..lang import ast as A
from ..lang.checker import TypedModule
from .values import EntityV, Fault, StrV, Value, conforms

Resolver = Callable[[str, "str | None", A.TypeRef, tuple], "Value | None"]


def example_schema(tm: TypedModule, hole: A.Hole) -> TypedModule:
    """``tm`` extended with the HoleArgs/HoleExample entities describing ``hole``'s records."""
    args = A.EntityDecl("HoleArgs", tuple(A.Param(n, t) for n, t in hole.scope))
    rec = A.EntityDecl("HoleExample", (
        A.Param("hole", A.CSTRING),
        A.Param("args", A.TypeRef("HoleArgs")),
        A.Param("result", hole.ty),
    ))
    return dataclasses.replace(tm, entities={**tm.entities, "HoleArgs": args, "HoleExample": rec})


def example_path(directory, hole_id: str) -> Path:
    return Path(directory) / f"{hole_id}.examples"


class HoleStore:
    def __init__(self, tm: TypedModule, resolver: Resolver | None = None, examples_dir=None):
        self.tm = tm
        self.resolver = resolver
        self.examples_dir = Path(examples_dir) if examples_dir is not None else None
        self.memo: dict[tuple, Value] = {}
        self._loaded: set[str] = set()
        self._lock = threading.Lock()

    def _load(self, hole: A.Hole) -> None:
        hid = hole.hole_id
        if hid in self._loaded:
            return
        self._loaded.add(hid)
        if self.examples_dir is None or not hole.examples:
            return
        path = example_path(self.examples_dir, hid)
        if not path.exists():
            return
        from ..bapi import decode

        schema = example_schema(self.tm, hole)
        for line in path.read_text(encoding="utf-8").splitlines():
            if line.strip():
                rec = decode(schema, line, "HoleExample", form="verbose")
                self.memo[(hid, rec.get("args").fields)] = rec.get("result")

    def execute(self, hole: A.Hole, args: tuple) -> Value:
        hid = hole.hole_id
        t = hole.ty or hole.type
        with self._lock:
            self._load(hole)
            key = (hid, tuple(args))
            if key in self.memo:
                return self.memo[key]
        if self.resolver is None:
            raise Fault("unfilled-hole", f"unfilled hole {hid}", hid, hole.span, hole.owner)
        v = self.resolver(hid, hole.doc, t, tuple(args))
        if v is None:
            raise Fault("unfilled-hole", f"unfilled hole {hid}", hid, hole.span, hole.owner)
        if not conforms(self.tm, v, t):
            raise Fault("type", f"answer for hole {hid} is not a well-formed {t}", hid, hole.span, hole.owner)
        with self._lock:
            if key not in self.memo:
                self.memo[key] = v
                if hole.examples and self.examples_dir is not None:
                    self._append(hole, args, v)
        return v

    def _append(self, hole: A.Hole, args: tuple, v: Value) -> None:
        from ..bapi import encode

        schema = example_schema(self.tm, hole)
        rec = EntityV("HoleExample", (
            ("hole", StrV(hole.hole_id, True)),
            ("args", EntityV("HoleArgs", tuple(args))),
            ("result", v),
        ))
        self.examples_dir.mkdir(parents=True, exist_ok=True)
        with example_path(self.examples_dir, hole.hole_id).open("a", encoding="utf-8") as fh:
            fh.write(encode(schema, rec, "HoleExample", "verbose") + "\n")


def table_resolver(table: dict) -> Resolver:
    """Resolver answering from ``{(hole id, args tuple): value}``; misses return None."""

    def resolve(hole_id, doc, t, args):
        return table.get((hole_id, tuple(args)))

    return resolve
