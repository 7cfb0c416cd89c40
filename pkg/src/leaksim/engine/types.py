"""Core value types shared by both propagation kernels."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from ..topology import Rel


class Phase(enum.Enum):
    UNPOISONED = "unpoisoned"
    CONTROL = "control"
    LEAK = "leak"
    PLAIN = "plain"


class DivergenceError(RuntimeError):
    """Convergence did not reach a fixpoint within the round bound."""


@dataclass(frozen=True)
class Announcement:
    """A prefix advertisement as sent between ASes.

    ``as_path`` is most-recent-exporter first; the rightmost element is the
    origin (poison sandwiches repeat the origin around each poisoned ASN).
    ``leak_provenance`` marks announcements descending from a leak export.
    """

    prefix_id: int
    as_path: tuple
    leak_provenance: bool = False
    phase: Phase = Phase.PLAIN

    def __post_init__(self):
        if not self.as_path:
            raise ValueError("as_path must be non-empty")


@dataclass(frozen=True)
class RibEntry:
    """A candidate route at one AS.

    ``learned_relationship`` is the topology's label for the neighbor the
    route came from; ``None`` marks a self-originated route.
    """

    route: Announcement
    learned_from: int
    learned_relationship: Rel | None


# Route preference: self-originated < customer < peer < provider.
_SELF_RANK = -1
_REL_RANK = {Rel.CUSTOMER: 0, Rel.PEER: 1, Rel.PROVIDER: 2}


def preference_key(entry):
    rank = (
        _SELF_RANK
        if entry.learned_relationship is None
        else _REL_RANK[entry.learned_relationship]
    )
    return (rank, len(entry.route.as_path), entry.learned_from)


def sandwich_path(origin, poisons):
    """Origination path with each poison wrapped in copies of the origin.

    ``poisons=(X, Y)`` yields ``(origin, X, origin, Y, origin)``; the
    rightmost element is always the origin, so poisoned ASes drop the route
    via loop detection while everyone else still sees a valid origin.
    """
    path = [origin]
    for p in poisons:
        path.append(p)
        path.append(origin)
    return tuple(path)
