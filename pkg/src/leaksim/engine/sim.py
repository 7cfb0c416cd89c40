"""Backend-neutral simulation facade.

``Simulation`` hides which propagation kernel does the work: the compiled
extension (``leaksim.engine._kernel``) when it is built, otherwise the pure
Python reference kernel. Both implement identical semantics, scheduling, and
tie-breaks, so results are bit-identical across backends.
"""

from __future__ import annotations

import os

from ..filters import make_import_filter
from ..topology import Rel
from .types import Phase
from . import state as ops

_NATIVE = None
_NATIVE_ERR = None
try:
    from . import _kernel as _NATIVE  # noqa: F401
except ImportError as exc:  # extension not built
    _NATIVE_ERR = exc

BACKEND_ENV = "LEAKSIM_BACKEND"


def available_backends():
    backends = ["pure"]
    if _NATIVE is not None:
        backends.insert(0, "native")
    return tuple(backends)


def default_backend():
    forced = os.environ.get(BACKEND_ENV)
    if forced:
        if forced not in ("pure", "native"):
            raise ValueError(f"{BACKEND_ENV} must be 'pure' or 'native', got {forced!r}")
        if forced == "native" and _NATIVE is None:
            raise RuntimeError(
                f"{BACKEND_ENV}=native but the compiled kernel is unavailable: {_NATIVE_ERR}"
            )
        return forced
    return "native" if _NATIVE is not None else "pure"


class Simulation:
    """One prefix's propagation over a fixed topology and scenario."""

    def __init__(self, topology, scenario=None, prefix_id=0, phase=Phase.PLAIN, backend=None):
        self.topology = topology
        self.scenario = scenario
        self.phase = phase
        self.backend = backend or default_backend()
        if self.backend == "native":
            if _NATIVE is None:
                raise RuntimeError(f"native backend unavailable: {_NATIVE_ERR}")
            self._impl = _NATIVE.NativeSimulation(
                _native_index(topology), _native_scenario(scenario, topology), prefix_id
            )
        elif self.backend == "pure":
            self._impl = _PureImpl(topology, scenario, prefix_id, phase)
        else:
            raise ValueError(f"unknown backend {self.backend!r}")

    def originate(self, origin, poisons=()):
        self._impl.originate(origin, tuple(poisons))
        return self

    def inject_export(self, sender, as_path, receivers, leak_provenance=True):
        self._impl.inject_export(sender, tuple(as_path), tuple(sorted(receivers)), leak_provenance)
        return self

    def converge(self, max_rounds=None):
        self._impl.converge(max_rounds or 0)
        return self

    def clone(self):
        copy = object.__new__(Simulation)
        copy.topology = self.topology
        copy.scenario = self.scenario
        copy.phase = self.phase
        copy.backend = self.backend
        copy._impl = self._impl.clone()
        return copy

    # -- results -----------------------------------------------------------

    def best_path(self, asn):
        return self._impl.best_path(asn)

    def best_paths(self):
        """Mapping asn -> converged best path (ASes without a route omitted)."""
        return self._impl.best_paths()

    def installed(self, leak_only=False):
        return self._impl.installed(leak_only)

    def leak_received(self):
        return self._impl.leak_received()

    def leak_exports(self):
        """Mapping exporter -> last leak-tagged path it exported."""
        return self._impl.leak_exports()

    def drop_counts(self):
        """Mapping asn -> {reason: count} accumulated over the run."""
        return self._impl.drop_counts()


class _PureImpl:
    def __init__(self, topology, scenario, prefix_id, phase, _state=None):
        self.topology = topology
        self.scenario = scenario
        self._filter = make_import_filter(scenario, topology)
        self.state = _state or ops.RoutingState(prefix_id, phase)

    def originate(self, origin, poisons):
        ops.originate(self.state, self.topology, origin, poisons)

    def inject_export(self, sender, as_path, receivers, leak_provenance):
        ops.inject_export(
            self.state, self.topology, sender, as_path, receivers, leak_provenance
        )

    def converge(self, max_rounds):
        ops.converge(self.state, self.topology, self._filter, max_rounds or None)

    def clone(self):
        return _PureImpl(
            self.topology,
            self.scenario,
            self.state.prefix_id,
            self.state.phase,
            _state=self.state.clone(),
        )

    def best_path(self, asn):
        return self.state.best_path(asn)

    def best_paths(self):
        return {
            a: e.route.as_path for a, e in self.state.best.items() if e is not None
        }

    def installed(self, leak_only):
        return frozenset(self.state.installed(leak_only))

    def leak_received(self):
        return frozenset(self.state.leak_received)

    def leak_exports(self):
        return dict(self.state.leak_exports)

    def drop_counts(self):
        return {a: dict(c) for a, c in self.state.drop_counts.items()}


def _native_index(topology):
    index = getattr(topology, "_native_index", None)
    if index is None:
        from . import compile as engcompile

        index = engcompile.TopologyIndex(topology)
        topology._native_index = index
    return index


def _native_scenario(scenario, topology):
    from . import compile as engcompile

    return engcompile.ScenarioTables(scenario, _native_index(topology))
