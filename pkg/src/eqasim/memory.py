"""Bounded per-target top-k observation memory."""

import bisect
from dataclasses import dataclass

from .errors import DuplicateEntryError, UnknownTargetError

DEFAULT_K = 3


@dataclass(frozen=True, slots=True)
class MemoryEntry:
    observation_id: int
    score: object  # RelevanceBreakdown
    pose: object = None  # AgentState
    summary: str = ""
    # per-target visible fractions at capture time, kept for audit from logs
    evidence: tuple = ()

    @property
    def rank_key(self):
        return (-self.score.combined, self.observation_id)

    def to_dict(self):
        return {
            "observation_id": self.observation_id,
            "score": self.score.to_dict(),
            "pose": self.pose.to_dict() if self.pose is not None else None,
            "summary": self.summary,
            "evidence": [list(e) for e in self.evidence],
        }


class TargetMemory:
    """The ``k`` best entries seen for one target.

    Ordered by combined score descending, ties by smaller observation id.
    """

    def __init__(self, target, capacity=DEFAULT_K):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.target = tuple(target)
        self.capacity = capacity
        self._keys = []
        self._entries = []

    def __len__(self):
        return len(self._entries)

    @property
    def entries(self):
        return list(self._entries)

    def best(self):
        return self._entries[0] if self._entries else None

    def insert(self, entry):
        """Insert ``entry`` if it ranks in the top ``k``; returns whether it did."""
        key = (-entry.score.combined, entry.observation_id)
        full = len(self._keys) >= self.capacity
        if full and key >= self._keys[-1]:
            if key == self._keys[-1] or any(e.observation_id == entry.observation_id
                                            for e in self._entries):
                raise DuplicateEntryError(entry.observation_id)
            return False
        if any(e.observation_id == entry.observation_id for e in self._entries):
            raise DuplicateEntryError(entry.observation_id)
        i = bisect.bisect_left(self._keys, key)
        self._keys.insert(i, key)
        self._entries.insert(i, entry)
        if len(self._keys) > self.capacity:
            self._keys.pop()
            self._entries.pop()
        return True

    def to_dict(self):
        return {"target": list(self.target), "capacity": self.capacity,
                "entries": [e.to_dict() for e in self._entries]}


class EpisodeMemory:
    """One :class:`TargetMemory` per target, in the order targets were given."""

    def __init__(self, targets, k=DEFAULT_K):
        self.k = k
        self.per_target = {}
        for t in targets:
            t = tuple(t)
            if t not in self.per_target:
                self.per_target[t] = TargetMemory(t, k)

    @property
    def targets(self):
        return list(self.per_target)

    def _get(self, target):
        try:
            return self.per_target[tuple(target)]
        except KeyError:
            raise UnknownTargetError(target) from None

    def insert(self, target, entry):
        return self._get(target).insert(entry)

    def retrieve(self, target):
        return self._get(target).entries

    def all_snapshots(self):
        out = []
        for mem in self.per_target.values():
            out.extend(mem.entries)
        return out

    def total_entries(self):
        return sum(len(m) for m in self.per_target.values())

    def to_dict(self):
        return {"k": self.k, "targets": [m.to_dict() for m in self.per_target.values()]}
