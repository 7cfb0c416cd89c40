"""Reference (pure-Python) propagation kernel.

Single-prefix, event-driven, deterministic BGP propagation: origination
(optionally poisoned), per-update import checks (loop detection plus a
caller-supplied filter), best-path selection, and valley-free export.
Processing follows a FIFO queue of (exporter, receiver) tasks; tasks for an
AS whose best route changed are enqueued neighbor-ASN ascending, so a run is
fully reproducible.
"""

from __future__ import annotations

from collections import deque

from ..topology import Rel, UnknownAsError
from .types import Announcement, DivergenceError, Phase, RibEntry, preference_key

DROP_LOOP = "loop"


class RoutingState:
    """Mutable per-run routing state over an immutable topology.

    Keeps, per AS, the latest accepted candidate from each neighbor and the
    selected best entry, plus the instrumentation the experiments need:
    per-AS drop reasons, which ASes ever received a leak-tagged update, and
    each AS's last leak-tagged export.
    """

    def __init__(self, prefix_id=0, phase=Phase.PLAIN):
        self.prefix_id = prefix_id
        self.phase = phase
        self.candidates = {}
        self.best = {}
        self.origin_announcements = {}
        self.queue = deque()
        self.pending = set()
        self.drop_counts = {}
        self.leak_received = set()
        self.leak_exports = {}

    def best_path(self, asn):
        entry = self.best.get(asn)
        return entry.route.as_path if entry is not None else None

    def candidates_of(self, asn):
        return dict(self.candidates.get(asn, ()))

    def installed(self, leak_only=False):
        if leak_only:
            return {
                a for a, e in self.best.items() if e is not None and e.route.leak_provenance
            }
        return {a for a, e in self.best.items() if e is not None}

    def drop(self, asn, reason):
        per_as = self.drop_counts.setdefault(asn, {})
        per_as[reason] = per_as.get(reason, 0) + 1

    def clone(self):
        if self.queue:
            raise RuntimeError("cannot clone a state with pending exports")
        other = RoutingState(self.prefix_id, self.phase)
        other.candidates = {a: dict(c) for a, c in self.candidates.items()}
        other.best = dict(self.best)
        other.origin_announcements = dict(self.origin_announcements)
        other.drop_counts = {a: dict(c) for a, c in self.drop_counts.items()}
        other.leak_received = set(self.leak_received)
        other.leak_exports = dict(self.leak_exports)
        return other


def loop_check(as_path, local):
    """True when the route must be dropped: ``local`` already on the path."""
    return local in as_path


def decide(entries):
    """Best entry under customer<peer<provider, then path length, then
    lowest sender ASN; ``None`` for an empty candidate set."""
    best = None
    best_key = None
    for entry in entries:
        key = preference_key(entry)
        if best_key is None or key < best_key:
            best, best_key = entry, key
    return best


def export_targets(learned_relationship, local, topology, learned_from=None):
    """Neighbors eligible to receive the local best route, ascending.

    Customer-learned and self-originated routes go to every neighbor;
    peer- and provider-learned routes go to customers only. The neighbor
    the route was learned from is excluded.
    """
    if learned_relationship in (None, Rel.CUSTOMER):
        targets = topology.neighbors(local)
    else:
        targets = sorted(topology.customers_of[local])
    if learned_from is None:
        return tuple(targets)
    return tuple(t for t in targets if t != learned_from)


def originate(state, topology, origin, poisons=(), leak_provenance=False):
    """Install a self-route at ``origin`` (sandwiching any poisons) and
    schedule exports to all its neighbors."""
    if origin not in topology.nodes:
        raise UnknownAsError(origin)
    from .types import sandwich_path

    ann = Announcement(
        prefix_id=state.prefix_id,
        as_path=sandwich_path(origin, tuple(poisons)),
        leak_provenance=leak_provenance,
        phase=state.phase,
    )
    state.origin_announcements[origin] = ann
    state.best[origin] = RibEntry(ann, origin, None)
    _schedule_exports(state, topology, origin)
    return state


def inject_export(state, topology, sender, as_path, receivers, leak_provenance=True):
    """Schedule a fixed announcement from ``sender`` to ``receivers``.

    Used for leak injection: the announcement bypasses the sender's normal
    export policy, but receivers process it through the regular import
    pipeline. The sender's own routing state is untouched.
    """
    if sender not in topology.nodes:
        raise UnknownAsError(sender)
    ann = Announcement(
        prefix_id=state.prefix_id,
        as_path=tuple(as_path),
        leak_provenance=leak_provenance,
        phase=state.phase,
    )
    for receiver in sorted(receivers):
        state.queue.append((sender, receiver, ann))
    return state


def converge(state, topology, import_filter=None, max_rounds=None):
    """Process pending exports until a fixpoint.

    ``import_filter(receiver, sender, relationship, as_path)`` returns a
    drop-reason string or ``None``; it runs after loop detection and before
    candidate insertion. One round drains the tasks currently queued; the
    run aborts with :class:`DivergenceError` after ``max_rounds`` rounds
    (default ``10 * |nodes|``).
    """
    if max_rounds is None:
        max_rounds = 10 * len(topology.nodes)
    rounds = 0
    queue = state.queue
    while queue:
        rounds += 1
        if rounds > max_rounds:
            raise DivergenceError(
                f"no fixpoint after {max_rounds} rounds ({len(queue)} tasks pending)"
            )
        for _ in range(len(queue)):
            exporter, receiver, fixed = queue.popleft()
            if fixed is None:
                state.pending.discard((exporter, receiver))
                ann = _export_announcement(state, exporter)
            else:
                ann = fixed
            _deliver(state, topology, import_filter, exporter, receiver, ann)
    return state


def _export_announcement(state, exporter):
    entry = state.best[exporter]
    if entry.learned_relationship is None:
        return entry.route  # origination path already starts with the origin
    return Announcement(
        prefix_id=entry.route.prefix_id,
        as_path=(exporter,) + entry.route.as_path,
        leak_provenance=entry.route.leak_provenance,
        phase=entry.route.phase,
    )


def _deliver(state, topology, import_filter, exporter, receiver, ann):
    if ann.leak_provenance:
        state.leak_received.add(receiver)
        state.leak_exports[exporter] = ann.as_path
    if loop_check(ann.as_path, receiver):
        state.drop(receiver, DROP_LOOP)
        return
    relationship = topology.relationship(receiver, exporter)
    if import_filter is not None:
        reason = import_filter(receiver, exporter, relationship, ann.as_path)
        if reason is not None:
            state.drop(receiver, reason)
            return
    entry = RibEntry(ann, exporter, relationship)
    cands = state.candidates.setdefault(receiver, {})
    cands[exporter] = entry
    new_best = decide(cands.values())
    if new_best != state.best.get(receiver):
        state.best[receiver] = new_best
        _schedule_exports(state, topology, receiver)


def _schedule_exports(state, topology, asn):
    entry = state.best[asn]
    learned_from = entry.learned_from if entry.learned_relationship is not None else None
    for target in export_targets(
        entry.learned_relationship, asn, topology, learned_from
    ):
        key = (asn, target)
        if key not in state.pending:
            state.pending.add(key)
            state.queue.append((asn, target, None))
