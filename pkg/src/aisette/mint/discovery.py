"""Progressive discovery: the /actions index, per-endpoint detail documents, and /search.

All three payloads are values of declared schema entities, so they go out in
whichever wire form the caller negotiates.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from typing import Callable

from .. import lang
from ..bapi import from_json_bridge
from ..lang import ast as A
from ..lang.checker import TypedModule
from ..runtime.holes import example_path
from ..runtime.values import Value
from .config import MintConfig, Route
from .lint import task_decl
from .config import schema


def _value(type_name: str, data) -> Value:
    return from_json_bridge(schema(), json.dumps(data), type_name)


def signature(decl) -> str:
    params = ", ".join(f"{p.name}: {p.type}" for p in decl.params)
    return f"{decl.name}({params}): {decl.return_type}"


def endpoint_data(tm: TypedModule, route: Route) -> dict:
    decl = task_decl(tm, route.task)
    return {
        "name": decl.name,
        "path": route.path,
        "kind": "api" if isinstance(decl, A.ApiDecl) else "action",
        "signature": signature(decl),
        "environment": [p.name for p in decl.env],
        "preconditions": [c.text for c in decl.requires],
        "postconditions": [c.text for c in decl.ensures],
        "doc": decl.doc or "",
        "scopes": list(getattr(decl, "permissions", ())),
        "visibility": route.visibility,
    }


def task_routes(config: MintConfig) -> list[Route]:
    return sorted((r for r in config.routes if r.task is not None), key=lambda r: (r.task, r.path))


def actions_index(tm: TypedModule, config: MintConfig, visible: Callable[[Route], bool]) -> Value:
    eps = [endpoint_data(tm, r) for r in task_routes(config) if visible(r)]
    return _value("ActionsIndex", {"endpoints": eps})


def _referenced(tm: TypedModule, types) -> tuple[list, list]:
    aliases, entities, seen = [], [], set()

    def visit(t):
        if t is None or t.name in seen:
            return
        seen.add(t.name)
        for a in t.args:
            visit(a)
        if t.name in tm.aliases:
            aliases.append(tm.aliases[t.name])
        elif t.name in tm.entities:
            ent = tm.entities[t.name]
            entities.append(ent)
            for f in ent.fields:
                visit(f.type)

    for t in types:
        visit(t)
    return aliases, entities


def action_detail(tm: TypedModule, config: MintConfig, route: Route) -> Value:
    decl = task_decl(tm, route.task)
    types = [p.type for p in decl.params] + [p.type for p in decl.env] + [decl.return_type]
    aliases, entities = _referenced(tm, types)
    type_text = [
        lang.print_module(A.SourceModule(aliases=(a,))).strip() for a in aliases
    ] + [lang.print_module(A.SourceModule(entities=(e,))).strip() for e in entities]
    fields = ", ".join(f"{p.name} = <{p.type}>" for p in decl.params)
    usage = (
        f"POST {route.path} with body {decl.name}{{ {fields} }} (verbose), positional fields (minimal), "
        f"or a JSON object keyed by parameter name. Env bindings {', '.join(p.name for p in decl.env) or '(none)'} "
        f"are supplied by the server."
    )
    examples = []
    exdir = config.resolve(config.examples)
    if exdir is not None:
        for hole in sorted((h for h in tm.holes.values() if h.owner == decl.name), key=lambda h: h.hole_id):
            path = example_path(exdir, hole.hole_id)
            if path.exists():
                examples += [ln for ln in path.read_text(encoding="utf-8").splitlines() if ln.strip()]
    links = [
        {"rel": "self", "href": f"/actions/{decl.name}"},
        {"rel": "invoke", "href": route.path},
        {"rel": "index", "href": "/actions"},
    ] + [{"rel": "type", "href": f"/search?q={t.name}"} for t in aliases + entities]
    return _value("ActionDetail", {
        "endpoint": endpoint_data(tm, route), "usage": usage, "types": type_text,
        "examples": examples, "links": links,
    })


# -- search --------------------------------------------------------------------

_WORD = re.compile(r"[A-Z]+(?![a-z])|[A-Z]?[a-z]+|[0-9]+")


def tokens(text: str) -> list[str]:
    """Case-folded words; camelCase and SNAKE_CASE are split."""
    return [w.lower() for w in _WORD.findall(text)]


def search_terms(tm: TypedModule, decl) -> Counter:
    parts = [decl.name, decl.doc or ""]
    parts += [p.name for p in decl.params] + [p.name for p in decl.env]
    for t in [p.type for p in decl.params] + [decl.return_type]:
        parts.append(str(t))
    return Counter(tokens(" ".join(parts)))


def score(query: list[str], terms: Counter) -> int:
    """Exact word matches count 2 per occurrence; prefix matches (4+ letters shared) count 1."""
    total = 0
    for q in query:
        for word, n in terms.items():
            if word == q:
                total += 2 * n
            elif min(len(word), len(q)) >= 4 and (word.startswith(q) or q.startswith(word)):
                total += n
    return total


def search(tm: TypedModule, config: MintConfig, query: str, visible: Callable[[Route], bool]) -> Value:
    q = tokens(query)
    hits = []
    for r in task_routes(config):
        if not visible(r):
            continue
        s = score(q, search_terms(tm, task_decl(tm, r.task)))
        if s > 0:
            hits.append({"name": r.task, "score": s, "link": f"/actions/{r.task}"})
    hits.sort(key=lambda h: (-h["score"], h["name"]))
    return _value("SearchResults", {"query": query, "hits": hits})
