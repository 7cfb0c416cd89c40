"""Peerlock / Peerlock-lite import filters and protection scenarios.

A Peerlock rule says: the protector drops any update whose AS path contains
the protected AS, unless the update came directly from the protected AS or
from an authorized upstream with the protected AS immediately behind it.
Peerlock-lite is the provider-side variant: drop customer-sent updates whose
path contains any of a set of large networks (normally the Tier-1 clique).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .topology import AsClass, Rel

DROP_PEERLOCK = "peerlock"
DROP_PEERLOCK_LITE = "peerlock_lite"
DROP_POISON_FILTER = "poison_filter"

SCENARIO_NAMES = (
    "none",
    "inferred",
    "full-t1",
    "full-t1-lisp-lock",
    "full-t1-lisp-lite",
    "full-t1-lisp-both",
    "inferred-lisp-lite",
)


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class PeerlockRule:
    protector: int
    protected: int
    authorized_upstreams: frozenset = frozenset()

    def __post_init__(self):
        if self.protector == self.protected:
            raise ScenarioError(f"AS {self.protector} cannot peerlock for itself")


@dataclass(frozen=True)
class PeerlockLiteDeployment:
    deployer: int
    protected_set: frozenset


class ProtectionScenario:
    """A full filter configuration, immutable once built.

    Rules are keyed by (protector, protected): duplicates with identical
    authorized upstreams collapse, conflicting duplicates are an error.
    ``poison_filterers`` are ASes that drop any update whose path revisits
    an ASN (a poison sandwich), used only by the measurement emulation.
    """

    def __init__(self, name, peerlock_rules=(), lite_deployments=(), poison_filterers=()):
        self.name = name
        keyed = {}
        for rule in peerlock_rules:
            key = (rule.protector, rule.protected)
            prev = keyed.get(key)
            if prev is not None and prev.authorized_upstreams != rule.authorized_upstreams:
                raise ScenarioError(
                    f"conflicting duplicate peerlock rule for {key}"
                )
            keyed[key] = rule
        self.peerlock_rules = tuple(keyed[k] for k in sorted(keyed))
        by_deployer = {}
        for dep in lite_deployments:
            prev = by_deployer.get(dep.deployer)
            if prev is not None:
                dep = PeerlockLiteDeployment(
                    dep.deployer, prev.protected_set | dep.protected_set
                )
            by_deployer[dep.deployer] = dep
        self.lite_deployments = tuple(by_deployer[d] for d in sorted(by_deployer))
        self.poison_filterers = frozenset(poison_filterers)
        self._rules_by_protector = {}
        for rule in self.peerlock_rules:
            self._rules_by_protector.setdefault(rule.protector, []).append(rule)
        self._lite_by_deployer = {d.deployer: d for d in self.lite_deployments}

    def rules_of(self, protector):
        return tuple(self._rules_by_protector.get(protector, ()))

    def lite_of(self, deployer):
        return self._lite_by_deployer.get(deployer)

    def is_empty(self):
        return not (self.peerlock_rules or self.lite_deployments or self.poison_filterers)

    def protected_anywhere(self, asn):
        """True if ``asn`` occurs in any rule or lite protected set."""
        return any(r.protected == asn or r.protector == asn for r in self.peerlock_rules) or any(
            asn in d.protected_set or d.deployer == asn for d in self.lite_deployments
        )


EMPTY_SCENARIO = ProtectionScenario("none")


def peerlock_permits(rules, receiver, sender, as_path):
    """Apply the receiver's Peerlock rules to one update; True = accept."""
    for rule in rules:
        if rule.protector != receiver or rule.protected not in as_path:
            continue
        if sender == rule.protected:
            continue
        if sender in rule.authorized_upstreams and _immediately_follows(
            as_path, sender, rule.protected
        ):
            continue
        return False
    return True


def _immediately_follows(as_path, upstream, protected):
    for i in range(len(as_path) - 1):
        if as_path[i] == upstream and as_path[i + 1] == protected:
            return True
    return False


def peerlocklite_permits(deployments, receiver, sender_relationship, as_path):
    """Peerlock-lite check: drop customer-sent paths containing a protected AS."""
    if sender_relationship is not Rel.CUSTOMER:
        return True
    for dep in deployments:
        if dep.deployer != receiver:
            continue
        if any(hop in dep.protected_set for hop in as_path):
            return False
    return True


def has_repeated_asn(as_path):
    return len(set(as_path)) != len(as_path)


def make_import_filter(scenario, topology=None):
    """Compile a scenario into the engine's import-filter hook.

    Returns ``filter(receiver, sender, relationship, as_path) -> reason|None``.
    Checks run in a fixed order (Peerlock, Peerlock-lite, poison filtering)
    so drop-reason accounting is reproducible; loop detection happens in the
    engine before this hook.
    """
    if scenario is None or scenario.is_empty():
        return None
    rules_by_protector = scenario._rules_by_protector
    lite_by_deployer = scenario._lite_by_deployer
    poison_filterers = scenario.poison_filterers

    def import_filter(receiver, sender, relationship, as_path):
        rules = rules_by_protector.get(receiver)
        if rules and not peerlock_permits(rules, receiver, sender, as_path):
            return DROP_PEERLOCK
        dep = lite_by_deployer.get(receiver)
        if (
            dep is not None
            and relationship is Rel.CUSTOMER
            and any(hop in dep.protected_set for hop in as_path)
        ):
            return DROP_PEERLOCK_LITE
        if receiver in poison_filterers and has_repeated_asn(as_path):
            return DROP_POISON_FILTER
        return None

    return import_filter


def load_rules(path):
    """Peerlock rules from a text file: ``protector protected`` per line."""
    rules = []
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            fields = line.split()
            if len(fields) != 2:
                raise ScenarioError(
                    f"{path}: line {line_no}: expected 'protector protected', got {line!r}"
                )
            try:
                protector, protected = int(fields[0]), int(fields[1])
            except ValueError:
                raise ScenarioError(
                    f"{path}: line {line_no}: non-integer ASN in {line!r}"
                ) from None
            rules.append(PeerlockRule(protector, protected))
    return rules


def build_scenario(name, topology, inferred_rules=None, poison_filterers=()):
    """Construct one of the named protection scenarios.

    ``full-t1`` peerlocks every ordered Tier-1 pair; the ``*-lisp-lock``
    variants add Peerlock at each large ISP for its Tier-1 peers, and the
    ``*-lisp-lite`` variants deploy Peerlock-lite (protecting the clique) at
    every large ISP. ``inferred*`` variants take measured rules from a file
    (``inferred_rules`` may be a path or a pre-loaded rule list).
    """
    if name not in SCENARIO_NAMES:
        raise ScenarioError(
            f"unknown scenario {name!r}; expected one of {', '.join(SCENARIO_NAMES)}"
        )
    clique = sorted(topology.clique)
    rules = []
    lite = []
    if name.startswith("full-t1"):
        for a in clique:
            for b in clique:
                if a != b:
                    rules.append(PeerlockRule(a, b))
    if name.startswith("inferred"):
        if inferred_rules is None:
            raise ScenarioError(f"scenario {name!r} requires an inferred-rules file")
        if isinstance(inferred_rules, (str, bytes)) or hasattr(inferred_rules, "__fspath__"):
            inferred_rules = load_rules(inferred_rules)
        for rule in inferred_rules:
            if rule.protector not in topology.nodes:
                raise ScenarioError(
                    f"inferred rule protector AS {rule.protector} not in topology"
                )
            rules.append(rule)
    large_isps = topology.class_members(AsClass.LARGE_ISP)
    if name.endswith("lisp-lock") or name.endswith("lisp-both"):
        clique_set = topology.clique
        for lisp in large_isps:
            for t1 in sorted(topology.peers_of[lisp] & clique_set):
                rules.append(PeerlockRule(lisp, t1))
    if name.endswith("lisp-lite") or name.endswith("lisp-both"):
        for lisp in large_isps:
            lite.append(PeerlockLiteDeployment(lisp, topology.clique))
    return ProtectionScenario(name, rules, lite, poison_filterers)
