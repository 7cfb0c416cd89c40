"""Leak-segment extraction and two-character path encoding.

A captured leak export is reduced to its *leak segment*: drop the invariant
tail right of the leaker (the leaker's route to the destination), then trim
from the left every AS that received the route from its provider (ordinary
propagation down into customer cones). Each remaining AS becomes a token:
its class letter (T/L/S/U) followed by its relationship to the next AS
toward the leaker (P = that AS's provider, R = peer, C = customer).
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

from .topology import AsClass, Rel

CLASS_CHARS = {
    AsClass.TIER1: "T",
    AsClass.LARGE_ISP: "L",
    AsClass.SMALL_ISP: "S",
    AsClass.STUB: "U",
}

REL_CHARS = {Rel.PROVIDER: "P", Rel.PEER: "R", Rel.CUSTOMER: "C"}


class SegmentError(ValueError):
    pass


class EncodingDiagnostic(SegmentError):
    """A segment hop received the route from a customer.

    Cannot happen for single-leaker campaigns after left trimming; raised
    loudly rather than silently encoded as "C".
    """


@dataclass(frozen=True)
class LeakSegment:
    """The encoded portion of one leak export.

    ``asns`` runs from the furthest encoded AS down to the AS adjacent to
    the leaker; the leaker itself anchors the segment but is not encoded.
    """

    asns: tuple
    leaker: int
    encoding: tuple


def leak_segment(as_path, leaker, topology):
    """Extract and encode the leak segment of one exported path."""
    if leaker not in as_path:
        raise SegmentError(f"leaker AS {leaker} not on path {as_path}")
    head = list(as_path[: as_path.index(leaker)])
    # Trim cone propagation: drop leading hops that got the route from
    # their provider (the next AS toward the leaker).
    while head:
        receiver = head[0]
        sender = head[1] if len(head) > 1 else leaker
        if topology.relationship(receiver, sender) is Rel.PROVIDER:
            head.pop(0)
        else:
            break
    asns = tuple(head)
    return LeakSegment(asns, leaker, encode_segment(asns, leaker, topology))


def encode_segment(asns, leaker, topology):
    """Token sequence for a trimmed segment, leftmost = furthest from leaker."""
    tokens = []
    for i, asn in enumerate(asns):
        toward_leaker = asns[i + 1] if i + 1 < len(asns) else leaker
        rel = _relationship_char(asn, toward_leaker, topology)
        if rel == "C":
            raise EncodingDiagnostic(
                f"AS {asn} received the route from customer {toward_leaker}; "
                "down-steps must be trimmed, not encoded"
            )
        tokens.append(CLASS_CHARS[topology.ucla_class(asn)] + rel)
    return tuple(tokens)


def _relationship_char(asn, toward_leaker, topology):
    try:
        rel = topology.relationship(asn, toward_leaker)
    except Exception as exc:
        raise SegmentError(
            f"no topology link between segment ASes {asn} and {toward_leaker}"
        ) from exc
    # relationship() reports the neighbor's role; the token describes the
    # segment AS's own role on that link, which is the inverse.
    inverse = {Rel.CUSTOMER: Rel.PROVIDER, Rel.PROVIDER: Rel.CUSTOMER, Rel.PEER: Rel.PEER}
    return REL_CHARS[inverse[rel]]


def render_encoding(tokens):
    return "[" + ", ".join(tokens) + "]"


def tabulate_encodings(exports, topology):
    """Frequency table of segment encodings over campaign exports.

    ``exports`` yields ``(case_index, leaker, exporter, as_path)`` records,
    one per exporting AS per case. Returns rows of (encoding, count, pct)
    sorted by descending count, encoding string ascending on ties.
    """
    counts = Counter()
    total = 0
    for _case_index, leaker, _exporter, path in exports:
        segment = leak_segment(path, leaker, topology)
        counts[render_encoding(segment.encoding)] += 1
        total += 1
    rows = [
        (encoding, count, count / total if total else 0.0)
        for encoding, count in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    ]
    return rows, total


_STAT_CLASSES = (AsClass.TIER1, AsClass.LARGE_ISP, AsClass.SMALL_ISP, AsClass.STUB)


def segment_stats(exports, topology):
    """Per-class transit statistics over campaign exports.

    Returns a record with the mean/std of segment length plus, per AS class,
    the share of segments transiting at least one member and the mean/std of
    per-segment member counts. The stub column is auxiliary (cone-internal
    propagation is trimmed before encoding, so stubs rarely appear).
    """
    n = 0
    len_sum = 0.0
    len_sq = 0.0
    per_class = {cls: {"with": 0, "sum": 0.0, "sq": 0.0} for cls in _STAT_CLASSES}
    for _case_index, leaker, _exporter, path in exports:
        segment = leak_segment(path, leaker, topology)
        n += 1
        length = len(segment.asns)
        len_sum += length
        len_sq += length * length
        members = Counter(topology.ucla_class(a) for a in segment.asns)
        for cls in _STAT_CLASSES:
            count = members.get(cls, 0)
            acc = per_class[cls]
            if count:
                acc["with"] += 1
            acc["sum"] += count
            acc["sq"] += count * count
    record = {
        "n_segments": n,
        "segment_length_mean": _mean(len_sum, n),
        "segment_length_std": _std(len_sum, len_sq, n),
    }
    for cls in _STAT_CLASSES:
        acc = per_class[cls]
        key = cls.name.lower()
        record[f"{key}_pct_paths"] = acc["with"] / n if n else 0.0
        record[f"{key}_mean"] = _mean(acc["sum"], n)
        record[f"{key}_std"] = _std(acc["sum"], acc["sq"], n)
    return record


def _mean(total, n):
    return total / n if n else 0.0


def _std(total, sq, n):
    if not n:
        return 0.0
    mean = total / n
    var = max(sq / n - mean * mean, 0.0)
    return math.sqrt(var)


ENCODINGS_HEADER = "scenario,encoding,count,pct"
STATS_FIELDS = (
    "scenario",
    "n_segments",
    "segment_length_mean",
    "segment_length_std",
    "tier1_pct_paths",
    "tier1_mean",
    "tier1_std",
    "large_isp_pct_paths",
    "large_isp_mean",
    "large_isp_std",
    "small_isp_pct_paths",
    "small_isp_mean",
    "small_isp_std",
    "stub_pct_paths",
    "stub_mean",
    "stub_std",
)


def write_tables(scenario_name, encoding_rows, stats_record, outdir, provenance=()):
    """Write encodings.csv and segment_stats.csv under ``outdir``."""
    import os

    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, "encodings.csv"), "w", encoding="utf-8") as fh:
        for line in provenance:
            fh.write(line + "\n")
        fh.write(ENCODINGS_HEADER + "\n")
        for encoding, count, pct in encoding_rows:
            fh.write(f'{scenario_name},"{encoding}",{count},{pct:.6f}\n')
    with open(os.path.join(outdir, "segment_stats.csv"), "w", encoding="utf-8") as fh:
        for line in provenance:
            fh.write(line + "\n")
        fh.write(",".join(STATS_FIELDS) + "\n")
        values = [scenario_name]
        for field in STATS_FIELDS[1:]:
            value = stats_record[field]
            values.append(str(value) if isinstance(value, int) else f"{value:.6f}")
        fh.write(",".join(values) + "\n")
