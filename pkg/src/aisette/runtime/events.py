"""Append-only event log referenced by ``$events`` in api preconditions."""

from __future__ import annotations

import threading

from .values import EntityV, StrV, Value


class EventLog:
    """Ordered entity events; there is no removal or in-place update.

    ``append`` is a system hook: the language itself has no operation that
    writes to the log.
    """

    def __init__(self, entries=()):
        self._entries: list[EntityV] = list(entries)
        self._lock = threading.Lock()

    def append(self, event: EntityV) -> None:
        if not isinstance(event, EntityV):
            raise TypeError("events are entity values")
        with self._lock:
            self._entries.append(event)

    @property
    def entries(self) -> tuple[EntityV, ...]:
        with self._lock:
            return tuple(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def contains(self, type_name: str, pattern: dict[str, Value]) -> bool:
        """True iff an entry of ``type_name`` equals ``pattern`` on every named field."""
        for ev in self.entries:
            if ev.type == type_name and all(ev.get(k) == v for k, v in pattern.items()):
                return True
        return False


def completed(task: str) -> EntityV:
    return EntityV("TaskCompleted", (("task", StrV(task, True)),))


def faulted(task: str, kind: str, clause: str | None) -> EntityV:
    return EntityV("TaskFaulted", (("task", StrV(task, True)), ("kind", StrV(kind, True)), ("clause", StrV(clause or ""))))
