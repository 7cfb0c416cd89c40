"""AS-level topology: relationship parsing, customer cones, classes, clique.

Loads CAIDA-style serial-2 relationship data (``asn|asn|code`` lines, where
code -1 means the first AS is a provider of the second and 0 means the two
ASes peer). From the link set we derive each AS's customer cone, its class
in the usual four-tier scheme (Tier 1 / large ISP / small ISP / stub), and
the Tier-1 peering clique.
"""

from __future__ import annotations

import enum
from collections import deque

import numpy as np


class TopologyError(ValueError):
    """Base class for topology loading/validation problems."""


class RelationshipParseError(TopologyError):
    def __init__(self, message, line_no):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class ProviderCycleError(TopologyError):
    """The provider->customer subgraph contains a cycle; cones are undefined."""


class CliqueValidationError(TopologyError):
    def __init__(self, message, asn=None):
        super().__init__(message)
        self.asn = asn


class UnknownAsError(TopologyError):
    def __init__(self, asn):
        super().__init__(f"unknown AS {asn}")
        self.asn = asn


class LinkKind(enum.IntEnum):
    """Link label as stored in the relationship file."""

    PROVIDER_TO_CUSTOMER = -1
    PEER_TO_PEER = 0


class Rel(enum.IntEnum):
    """Role of a neighbor from the local AS's point of view.

    ``Rel.CUSTOMER`` means the neighbor is the local AS's customer. The
    ordering matches route preference (customer routes first).
    """

    CUSTOMER = 0
    PEER = 1
    PROVIDER = 2


class AsClass(enum.Enum):
    TIER1 = "T"
    LARGE_ISP = "L"
    SMALL_ISP = "S"
    STUB = "U"

    @property
    def code(self):
        return self.value


# Cone-size thresholds for the class tiers (cone excludes the AS itself).
LARGE_ISP_MIN_CONE = 51
SMALL_ISP_MIN_CONE = 5

_CLIQUE_HEADERS = ("# input clique:", "# inferred clique:")

_POPCOUNT8 = np.unpackbits(np.arange(256, dtype=np.uint8)[:, None], axis=1).sum(axis=1)


class AsTopology:
    """Immutable AS relationship graph with cones, classes, and clique.

    Construct via :func:`parse_relationships` (links only) followed by
    :meth:`resolve`, or in one step with :func:`load_topology`.
    """

    def __init__(self):
        self.nodes = frozenset()
        self.providers_of = {}
        self.customers_of = {}
        self.peers_of = {}
        self.clique = frozenset()
        self.cone_size = {}
        self.as_class = {}
        self.header_clique = None
        self._resolved = False
        self._neighbor_cache = {}

    # -- accessors ---------------------------------------------------------

    def neighbors(self, asn):
        """All neighbors of ``asn``, ascending."""
        cached = self._neighbor_cache.get(asn)
        if cached is None:
            if asn not in self.nodes:
                raise UnknownAsError(asn)
            cached = tuple(
                sorted(
                    self.customers_of[asn] | self.peers_of[asn] | self.providers_of[asn]
                )
            )
            self._neighbor_cache[asn] = cached
        return cached

    def relationship(self, asn, neighbor):
        """Role of ``neighbor`` as seen from ``asn``; raises if not adjacent."""
        if neighbor in self.customers_of.get(asn, ()):
            return Rel.CUSTOMER
        if neighbor in self.peers_of.get(asn, ()):
            return Rel.PEER
        if neighbor in self.providers_of.get(asn, ()):
            return Rel.PROVIDER
        if asn not in self.nodes:
            raise UnknownAsError(asn)
        raise TopologyError(f"no link between AS {asn} and AS {neighbor}")

    def customer_cone(self, asn):
        """All ASes reachable from ``asn`` via provider->customer links only.

        ``asn`` itself is excluded; peer links are never traversed.
        """
        if asn not in self.nodes:
            raise UnknownAsError(asn)
        seen = set()
        stack = list(self.customers_of[asn])
        while stack:
            cur = stack.pop()
            if cur in seen:
                continue
            seen.add(cur)
            stack.extend(self.customers_of[cur] - seen)
        seen.discard(asn)
        return frozenset(seen)

    def ucla_class(self, asn):
        try:
            return self.as_class[asn]
        except KeyError:
            raise UnknownAsError(asn) from None

    def class_counts(self):
        counts = {cls: 0 for cls in AsClass}
        for cls in self.as_class.values():
            counts[cls] += 1
        return counts

    def tier1s(self):
        return tuple(sorted(self.clique))

    def class_members(self, cls):
        return tuple(sorted(a for a, c in self.as_class.items() if c is cls))

    # -- construction ------------------------------------------------------

    def _add_provider_link(self, provider, customer, line_no):
        if customer in self.peers_of.get(provider, ()):
            raise RelationshipParseError(
                f"conflicting duplicate link {provider}|{customer}", line_no
            )
        if provider in self.providers_of.get(customer, ()):
            return  # exact duplicate
        if customer in self.providers_of.get(provider, ()):
            raise RelationshipParseError(
                f"conflicting duplicate link {provider}|{customer} "
                "(reverse provider link already present)",
                line_no,
            )
        self._ensure(provider)
        self._ensure(customer)
        self.customers_of[provider].add(customer)
        self.providers_of[customer].add(provider)

    def _add_peer_link(self, a, b, line_no):
        if b in self.customers_of.get(a, ()) or b in self.providers_of.get(a, ()):
            raise RelationshipParseError(f"conflicting duplicate link {a}|{b}", line_no)
        self._ensure(a)
        self._ensure(b)
        self.peers_of[a].add(b)
        self.peers_of[b].add(a)

    def _ensure(self, asn):
        if asn not in self.providers_of:
            self.providers_of[asn] = set()
            self.customers_of[asn] = set()
            self.peers_of[asn] = set()

    def _freeze_links(self):
        self.nodes = frozenset(self.providers_of)
        self.providers_of = {a: frozenset(s) for a, s in self.providers_of.items()}
        self.customers_of = {a: frozenset(s) for a, s in self.customers_of.items()}
        self.peers_of = {a: frozenset(s) for a, s in self.peers_of.items()}

    def resolve(self, clique_override=None):
        """Compute cones, resolve the clique, and classify every AS.

        Returns ``self``. Raises :class:`ProviderCycleError` if the
        provider graph is cyclic and :class:`CliqueValidationError` if an
        explicit clique member is unknown or has providers.
        """
        if self._resolved:
            raise TopologyError("topology already resolved")
        self.cone_size = _cone_sizes(self)
        if clique_override is not None:
            self.clique = _validated_clique(self, clique_override, "override")
        elif self.header_clique is not None:
            self.clique = _validated_clique(self, self.header_clique, "header")
        else:
            self.clique = _derive_clique(self)
        self.as_class = {}
        for asn in self.nodes:
            if asn in self.clique:
                self.as_class[asn] = AsClass.TIER1
            else:
                cone = self.cone_size[asn]
                if cone >= LARGE_ISP_MIN_CONE:
                    self.as_class[asn] = AsClass.LARGE_ISP
                elif cone >= SMALL_ISP_MIN_CONE:
                    self.as_class[asn] = AsClass.SMALL_ISP
                else:
                    self.as_class[asn] = AsClass.STUB
        self._resolved = True
        return self

    # -- serialization -----------------------------------------------------

    def serialize(self):
        """Relationship text that re-parses to an identical topology."""
        lines = []
        if self.clique:
            lines.append("# input clique: " + " ".join(str(a) for a in sorted(self.clique)))
        elif self.header_clique:
            lines.append(
                "# input clique: " + " ".join(str(a) for a in sorted(self.header_clique))
            )
        for a in sorted(self.customers_of):
            for b in sorted(self.customers_of[a]):
                lines.append(f"{a}|{b}|-1")
        for a in sorted(self.peers_of):
            for b in sorted(self.peers_of[a]):
                if a < b:
                    lines.append(f"{a}|{b}|0")
        return "\n".join(lines) + "\n"


def parse_relationships(text):
    """Parse serial-2 relationship lines into an unresolved topology.

    ``text`` may be a string or an iterable of lines. Data lines are
    ``asn|asn|code`` with an optional trailing source field; ``#`` lines are
    comments, except a clique header (``# input clique: ...``) whose ASNs are
    kept as clique candidates.
    """
    topo = AsTopology()
    if isinstance(text, str):
        lines = text.splitlines()
    else:
        lines = text
    for line_no, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            lowered = line.lower()
            for header in _CLIQUE_HEADERS:
                if lowered.startswith(header):
                    fields = line[len(header):].split()
                    try:
                        candidates = tuple(int(f) for f in fields)
                    except ValueError:
                        raise RelationshipParseError(
                            "clique header contains a non-integer ASN", line_no
                        ) from None
                    topo.header_clique = candidates
                    break
            continue
        fields = line.split("|")
        if len(fields) not in (3, 4):
            raise RelationshipParseError(
                f"expected 3 fields, got {len(fields)}", line_no
            )
        try:
            a, b = int(fields[0]), int(fields[1])
            code = int(fields[2])
        except ValueError:
            raise RelationshipParseError(f"non-integer field in {line!r}", line_no) from None
        if a <= 0 or b <= 0:
            raise RelationshipParseError(f"ASNs must be positive in {line!r}", line_no)
        if a == b:
            raise RelationshipParseError(f"self-link {a}|{b}", line_no)
        if code == LinkKind.PROVIDER_TO_CUSTOMER:
            topo._add_provider_link(a, b, line_no)
        elif code == LinkKind.PEER_TO_PEER:
            topo._add_peer_link(a, b, line_no)
        else:
            raise RelationshipParseError(f"unknown relationship code {code}", line_no)
    topo._freeze_links()
    return topo


def load_topology(path, clique_override_path=None):
    """Parse a relationship file and resolve cones/clique/classes."""
    with open(path, encoding="utf-8") as fh:
        topo = parse_relationships(fh)
    override = None
    if clique_override_path is not None:
        override = read_clique_file(clique_override_path)
    return topo.resolve(clique_override=override)


def read_clique_file(path):
    """Whitespace-separated ASN list, ``#`` comments allowed."""
    asns = []
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if line:
                asns.extend(int(tok) for tok in line.split())
    return tuple(asns)


def _toposort_providers(topo):
    """Provider->customer topological order; raises on cycles."""
    indeg = {a: len(topo.providers_of[a]) for a in topo.nodes}
    queue = deque(sorted(a for a, d in indeg.items() if d == 0))
    order = []
    while queue:
        cur = queue.popleft()
        order.append(cur)
        for c in sorted(topo.customers_of[cur]):
            indeg[c] -= 1
            if indeg[c] == 0:
                queue.append(c)
    if len(order) != len(topo.nodes):
        cyclic = sorted(a for a, d in indeg.items() if d > 0)
        raise ProviderCycleError(
            f"provider graph contains a cycle involving {len(cyclic)} ASes "
            f"(e.g. AS {cyclic[0]})"
        )
    return order


def _cone_sizes(topo):
    """Customer-cone cardinality for every AS (self excluded).

    Cones are folded bottom-up over the provider DAG as packed bitsets; a
    child's bitset is freed once all its providers are done, which keeps
    memory manageable on full Internet-scale datasets.
    """
    order = _toposort_providers(topo)
    asns = sorted(topo.nodes)
    idx = {a: i for i, a in enumerate(asns)}
    nbytes = (len(asns) + 7) // 8
    bits = {}
    remaining_providers = {a: len(topo.providers_of[a]) for a in topo.nodes}
    sizes = {}
    for a in reversed(order):
        acc = np.zeros(nbytes, dtype=np.uint8)
        for c in topo.customers_of[a]:
            ci = idx[c]
            acc[ci >> 3] |= 1 << (ci & 7)
            np.bitwise_or(acc, bits[c], out=acc)
        sizes[a] = int(_POPCOUNT8[acc].sum())
        bits[a] = acc
        for c in topo.customers_of[a]:
            remaining_providers[c] -= 1
            if remaining_providers[c] == 0:
                del bits[c]
    return sizes


def _validated_clique(topo, members, source):
    seen = set()
    for asn in members:
        if asn in seen:
            raise CliqueValidationError(
                f"clique {source} lists AS {asn} twice", asn=asn
            )
        seen.add(asn)
        if asn not in topo.nodes:
            raise CliqueValidationError(
                f"clique {source} member AS {asn} not in topology", asn=asn
            )
        if topo.providers_of[asn]:
            raise CliqueValidationError(
                f"clique {source} member AS {asn} has a provider", asn=asn
            )
    return frozenset(members)


def _derive_clique(topo):
    """Greedy maximal set of provider-free, pairwise-peering ASes.

    Candidates are taken in descending cone size (ASN ascending on ties), so
    the result is deterministic. An explicit clique override is preferred on
    real datasets; this fallback covers synthetic fixtures.
    """
    provider_free = [a for a in topo.nodes if not topo.providers_of[a]]
    provider_free.sort(key=lambda a: (-topo.cone_size[a], a))
    clique = []
    for a in provider_free:
        if all(m in topo.peers_of[a] for m in clique):
            clique.append(a)
    return frozenset(clique)


def tier1_clique(topo, override=None):
    """Validated clique: explicit ``override`` > file header > derivation."""
    if override is not None:
        return _validated_clique(topo, tuple(override), "override")
    if topo.header_clique is not None:
        return _validated_clique(topo, topo.header_clique, "header")
    if not topo.cone_size:
        raise TopologyError("cone sizes required to derive a clique")
    return _derive_clique(topo)
