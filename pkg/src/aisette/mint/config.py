"""Service configuration: routes, env bindings, agent bindings and middleware switches.

A config file is a ``MintConfig`` value written either as JSON or as a BAPI
verbose literal; both are decoded against the declared schema, so alias
constraints (``public|private``, ``none|sensitive``) are checked on load.
JSON configs may omit fields that have defaults.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

from ..bapi import DecodeError, decode
from ..diagnostics import NO_SPAN, AisetteError, error
from ..lang import check_source
from ..lang.ast import TypeRef
from ..lang.checker import TypedModule
from ..runtime.values import py
from ..sandbox import GlobError, glob_to_regex, globs_overlap, literal_prefix


class ConfigError(AisetteError):
    pass


def config_error(message: str, code: str = "config") -> ConfigError:
    return ConfigError([error(code, message, NO_SPAN)])


@lru_cache(maxsize=1)
def schema() -> TypedModule:
    text = resources.files(__package__).joinpath("schema.bsq").read_text(encoding="utf-8")
    return check_source(text)


JSON_DEFAULTS = {
    "routes": [], "bindings": [], "agents": [], "logging": True, "auth": True, "solver": None,
    "timeout": 10_000, "host": "127.0.0.1", "port": 8080, "faultlog": None, "examples": None,
}
ROUTE_DEFAULTS = {"task": None, "file": None, "visibility": "private", "ceiling": "none"}


@dataclass(frozen=True)
class Route:
    path: str
    task: str | None = None
    file: str | None = None
    visibility: str = "private"
    ceiling: str = "none"

    @property
    def public(self) -> bool:
        return self.visibility == "public"

    def matches(self, path: str) -> bool:
        return route_regex(self.path).fullmatch("route:" + path) is not None


@lru_cache(maxsize=256)
def route_regex(path: str):
    return glob_to_regex("route:" + path)


@dataclass
class MintConfig:
    source: str
    routes: list[Route] = field(default_factory=list)
    bindings: dict[str, str] = field(default_factory=dict)
    agents: dict[str, str] = field(default_factory=dict)
    logging: bool = True
    auth: bool = True
    solver: str | None = None
    timeout: int = 10_000
    host: str = "127.0.0.1"
    port: int = 8080
    faultlog: str | None = None
    examples: str | None = None
    base: Path = Path(".")

    def resolve(self, p: str | None) -> Path | None:
        if p is None:
            return None
        q = Path(p)
        return q if q.is_absolute() else self.base / q


def parse_config(text: str, base: Path = Path(".")) -> MintConfig:
    """Decode config text (JSON or BAPI verbose) and check routes are well-formed."""
    t = TypeRef("MintConfig")
    try:
        if text.lstrip().startswith("{"):
            raw = json.loads(text)
            if not isinstance(raw, dict):
                raise config_error("config must be a JSON object")
            raw = {**JSON_DEFAULTS, **raw}
            raw["routes"] = [{**ROUTE_DEFAULTS, **r} if isinstance(r, dict) else r for r in raw["routes"]]
            for key in ("bindings", "agents"):
                if isinstance(raw[key], dict):
                    raw[key] = [{"name": k, "value": v} for k, v in raw[key].items()]
            value = decode(schema(), json.dumps(raw), t, "json")
        else:
            value = decode(schema(), text, t, "verbose")
    except json.JSONDecodeError as exc:
        raise config_error(f"config is not valid JSON: {exc}") from None
    except DecodeError as exc:
        raise ConfigError(exc.diagnostics) from None
    d = py(value)
    cfg = MintConfig(
        source=d["source"],
        routes=[Route(**r) for r in d["routes"]],
        bindings={b["name"]: b["value"] for b in d["bindings"]},
        agents={b["name"]: b["value"] for b in d["agents"]},
        logging=d["logging"], auth=d["auth"], solver=d["solver"], timeout=d["timeout"],
        host=d["host"], port=d["port"], faultlog=d["faultlog"], examples=d["examples"], base=base,
    )
    check_routes(cfg.routes)
    return cfg


def load_config(path) -> MintConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise config_error(f"cannot read config {path}: {exc.strerror}", "config-missing") from None
    return parse_config(text, path.parent)


RESERVED = ("/actions", "/actions/*", "/search")


def check_routes(routes: list[Route]) -> None:
    """Every route names exactly one target, compiles, and overlaps resolve by a unique longest literal prefix."""
    for r in routes:
        if (r.task is None) == (r.file is None):
            raise config_error(f"route {r.path} must name exactly one of task or file")
        if not r.path.startswith("/"):
            raise config_error(f"route {r.path} must start with '/'")
        try:
            route_regex(r.path)
        except GlobError as exc:
            raise config_error(f"route {r.path}: {exc}", "glob") from None
        for reserved in RESERVED:
            if globs_overlap("route:" + r.path, "route:" + reserved):
                raise config_error(f"route {r.path} overlaps the built-in route {reserved}")
    for i, a in enumerate(routes):
        for b in routes[i + 1:]:
            if globs_overlap("route:" + a.path, "route:" + b.path) and literal_prefix(a.path) == literal_prefix(b.path):
                raise config_error(f"routes {a.path} and {b.path} overlap with equal literal prefixes", "route-tie")


def match_route(routes: list[Route], path: str) -> Route | None:
    """Most specific matching route: longest literal prefix wins."""
    hits = [r for r in routes if r.matches(path)]
    if not hits:
        return None
    return max(hits, key=lambda r: literal_prefix(r.path))
