"""Seeded synthetic AS topologies for tests, fixtures, and benchmarks.

Two flavors: :func:`hierarchy_topology` builds a realistic-ish four-tier
graph (peering clique on top, large ISPs, mid ISPs, stubs) whose classes
come out right under the cone thresholds; :func:`small_random_topology`
builds tiny arbitrary valley-free graphs for oracle comparisons. Both emit
serial-2 text so fixtures go through the regular parser.
"""

from __future__ import annotations

import random

from .topology import parse_relationships


def hierarchy_text(
    seed,
    n_tier1=4,
    n_large=8,
    n_mid=32,
    n_stub=224,
    cross_region_prob=0.15,
    large_t1_peer_prob=0.3,
    large_peer_prob=0.3,
    mid_peer_prob=0.04,
):
    """Serial-2 text for a four-tier topology with a clique header.

    Each Tier 1 anchors a "region" of large ISPs, mid ISPs, and stubs, so
    customer cones are mostly disjoint and routes between regions actually
    cross the peering clique (sparse cross-region links and ISP peering add
    the usual bypasses). ASNs are banded for readability: Tier 1s at 10+,
    large ISPs at 100+, mid ISPs at 1000+, stubs at 10000+.
    """
    rng = random.Random(seed)
    tier1 = [10 + i for i in range(n_tier1)]
    large = [100 + i for i in range(n_large)]
    mid = [1000 + i for i in range(n_mid)]
    stub = [10000 + i for i in range(n_stub)]
    large_by_region = {r: [l for i, l in enumerate(large) if i % n_tier1 == r]
                       for r in range(n_tier1)}
    mid_by_region = {r: [m for i, m in enumerate(mid) if i % n_tier1 == r]
                     for r in range(n_tier1)}

    provider_links = set()
    peer_links = set()

    def peer(a, b):
        peer_links.add((min(a, b), max(a, b)))

    def other_region(r):
        choices = [x for x in range(n_tier1) if x != r]
        return rng.choice(choices) if choices else r

    for i, a in enumerate(tier1):
        for b in tier1[i + 1:]:
            peer(a, b)
    for i, lisp in enumerate(large):
        region = i % n_tier1
        provider_links.add((tier1[region], lisp))
        if rng.random() < cross_region_prob:
            provider_links.add((tier1[other_region(region)], lisp))
        if rng.random() < large_t1_peer_prob:
            candidates = [t for t in tier1 if (t, lisp) not in provider_links]
            if candidates:
                peer(rng.choice(candidates), lisp)
    for i, a in enumerate(large):
        for b in large[i + 1:]:
            if rng.random() < large_peer_prob:
                peer(a, b)
    for i, m in enumerate(mid):
        region = i % n_tier1
        homes = large_by_region[region]
        for up in rng.sample(homes, k=min(len(homes), rng.randint(1, 2))):
            provider_links.add((up, m))
        if rng.random() < cross_region_prob:
            provider_links.add((rng.choice(large_by_region[other_region(region)]), m))
    for i, a in enumerate(mid):
        for b in mid[i + 1:]:
            if rng.random() < mid_peer_prob:
                peer(a, b)
    for i, s in enumerate(stub):
        region = i % n_tier1
        homes = mid_by_region[region]
        k = 1 if rng.random() < 0.6 else 2
        for up in rng.sample(homes, k=min(len(homes), k)):
            provider_links.add((up, s))
        if rng.random() < 0.05:
            provider_links.add((rng.choice(large_by_region[region]), s))

    # Peer links must not duplicate provider links.
    peer_links = {
        (a, b)
        for a, b in peer_links
        if (a, b) not in provider_links and (b, a) not in provider_links
    }

    lines = ["# input clique: " + " ".join(str(t) for t in tier1)]
    for a, b in sorted(provider_links):
        lines.append(f"{a}|{b}|-1")
    for a, b in sorted(peer_links):
        lines.append(f"{a}|{b}|0")
    return "\n".join(lines) + "\n"


def hierarchy_topology(seed, **kwargs):
    return parse_relationships(hierarchy_text(seed, **kwargs)).resolve()


def small_random_topology(seed, n=10, extra_link_prob=0.35, peer_prob=0.3):
    """A tiny random topology with an acyclic provider graph.

    Every AS beyond the first gets at least one provider among the earlier
    ASes (so the graph is connected), plus random extra provider and peer
    links. ASNs are 1..n.
    """
    rng = random.Random(seed)
    asns = list(range(1, n + 1))
    provider_links = set()
    peer_links = set()
    for i, a in enumerate(asns[1:], start=1):
        provider = asns[rng.randrange(i)]
        provider_links.add((provider, a))
        for b in asns[:i]:
            if b != provider and rng.random() < extra_link_prob / (i + 1):
                provider_links.add((b, a))
    for i, a in enumerate(asns):
        for b in asns[i + 1:]:
            if (a, b) in provider_links or (b, a) in provider_links:
                continue
            if rng.random() < peer_prob / 2:
                peer_links.add((a, b))
    lines = [f"{a}|{b}|-1" for a, b in sorted(provider_links)]
    lines += [f"{a}|{b}|0" for a, b in sorted(peer_links)]
    return parse_relationships("\n".join(lines) + "\n").resolve()


def _main(argv=None):
    import argparse

    parser = argparse.ArgumentParser(
        description="emit a synthetic serial-2 topology on stdout"
    )
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--tier1", type=int, default=4)
    parser.add_argument("--large", type=int, default=6)
    parser.add_argument("--mid", type=int, default=30)
    parser.add_argument("--stub", type=int, default=160)
    args = parser.parse_args(argv)
    print(
        hierarchy_text(
            args.seed,
            n_tier1=args.tier1,
            n_large=args.large,
            n_mid=args.mid,
            n_stub=args.stub,
        ),
        end="",
    )


if __name__ == "__main__":
    _main()
