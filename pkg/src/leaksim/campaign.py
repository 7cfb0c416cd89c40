"""Tier-1 route-leak campaigns: case sampling, leak injection, aggregation.

A campaign iterates over all ordered Tier-1 pairs (the target links),
samples leakers from the link start's customer cone and destinations from
the link end's cone such that the leaker's plain best path crosses the link,
then replays each leak under a protection scenario and measures who received
and who installed the leaked route.
"""

from __future__ import annotations

import gzip
import hashlib
import io
import itertools
import json
import random
from dataclasses import dataclass

from .engine import Simulation
from .topology import AsClass

DEST_ATTEMPTS = 50

STATUS_OK = "ok"
STATUS_NO_ROUTE = "no_route"

SKIP_EMPTY_CONE = "empty_cone"
SKIP_NO_DESTINATION = "no_destination"


def derive_seed(*parts):
    """Stable 64-bit substream seed from arbitrary labeled parts.

    Hash-based so results do not depend on process hash randomization or on
    how work is split across processes.
    """
    text = "|".join(str(p) for p in parts)
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "big")


@dataclass(frozen=True)
class LeakCase:
    link_start: int
    link_end: int
    leaker: int
    destination: int
    seed: int


@dataclass(frozen=True)
class SkipRecord:
    link_start: int
    link_end: int
    leaker: int | None
    reason: str


@dataclass(frozen=True)
class LeakResult:
    case: LeakCase
    received: frozenset
    installed: frozenset
    exported_paths: tuple  # ((exporter, as_path), ...) sorted by exporter
    drop_log: dict
    status: str = STATUS_OK

    @property
    def paths(self):
        return tuple(path for _, path in self.exported_paths)


def enumerate_t1_links(topology):
    """All ordered pairs of distinct clique members, ASN-lexicographic."""
    return tuple(itertools.permutations(sorted(topology.clique), 2))


def contains_adjacent(path, first, second):
    for a, b in zip(path, path[1:]):
        if a == first and b == second:
            return True
    return False


class BaselineCache:
    """Small LRU of converged baseline simulations keyed by destination."""

    def __init__(self, topology, scenario, backend=None, maxsize=32):
        self.topology = topology
        self.scenario = scenario
        self.backend = backend
        self.maxsize = maxsize
        self._cache = {}

    def get(self, destination):
        sim = self._cache.pop(destination, None)
        if sim is None:
            sim = Simulation(self.topology, self.scenario, backend=self.backend)
            sim.originate(destination).converge()
        self._cache[destination] = sim
        while len(self._cache) > self.maxsize:
            self._cache.pop(next(iter(self._cache)))
        return sim


def sample_leak_cases(topology, link, n=20, seed=0, plain_baselines=None):
    """Sample up to ``n`` leak cases for one Tier-1 link.

    Leakers are drawn without replacement from the link start's customer
    cone; for each, destinations from the link end's cone are resampled (up
    to 50 attempts) until the leaker's plain converged best path toward the
    destination crosses the link. Sampling always uses unfiltered baselines,
    so the same seed yields the same cases under every scenario.
    """
    link_start, link_end = link
    if plain_baselines is None:
        plain_baselines = BaselineCache(topology, None)
    start_cone = sorted(topology.customer_cone(link_start))
    if not start_cone:
        return [], [SkipRecord(link_start, link_end, None, SKIP_EMPTY_CONE)]
    dest_pool = sorted(topology.customer_cone(link_end))
    if not dest_pool:
        return [], [SkipRecord(link_start, link_end, None, SKIP_EMPTY_CONE)]
    rng = random.Random(derive_seed(seed, "leakers", link_start, link_end))
    leakers = rng.sample(start_cone, min(n, len(start_cone)))
    cases = []
    skips = []
    for leaker in leakers:
        case_rng = random.Random(derive_seed(seed, "dest", link_start, link_end, leaker))
        found = None
        for _ in range(DEST_ATTEMPTS):
            destination = dest_pool[case_rng.randrange(len(dest_pool))]
            if destination == leaker:
                continue
            baseline = plain_baselines.get(destination)
            path = baseline.best_path(leaker)
            if path is not None and contains_adjacent(path, link_start, link_end):
                found = destination
                break
        if found is None:
            skips.append(SkipRecord(link_start, link_end, leaker, SKIP_NO_DESTINATION))
        else:
            cases.append(
                LeakCase(
                    link_start,
                    link_end,
                    leaker,
                    found,
                    derive_seed(seed, "case", link_start, link_end, leaker, found),
                )
            )
    return cases, skips


def run_leak(topology, scenario, case, backend=None, baseline=None):
    """Replay one leak case under a scenario and collect the outcome.

    The baseline for the destination's prefix converges first (under the
    scenario's filters), then the leaker re-exports its installed best path
    to all its peers and providers with leak provenance set, and propagation
    continues to a new fixpoint. The drop log covers only the leak stage.
    """
    if baseline is None:
        baseline = (
            Simulation(topology, scenario, backend=backend)
            .originate(case.destination)
            .converge()
        )
    sim = baseline.clone()
    before_drops = baseline.drop_counts()
    leaker = case.leaker
    best = sim.best_path(leaker)
    if best is None:
        return LeakResult(
            case,
            received=frozenset({leaker}),
            installed=frozenset({leaker}),
            exported_paths=(),
            drop_log={},
            status=STATUS_NO_ROUTE,
        )
    leak_path = (leaker,) + best
    receivers = sorted(topology.peers_of[leaker] | topology.providers_of[leaker])
    sim.inject_export(leaker, leak_path, receivers, leak_provenance=True)
    sim.converge()
    received = frozenset(sim.leak_received() | {leaker})
    installed = frozenset(sim.installed(leak_only=True) | {leaker})
    exports = tuple(sorted(sim.leak_exports().items()))
    drop_log = _drop_delta(before_drops, sim.drop_counts())
    return LeakResult(case, received, installed, exports, drop_log)


def _drop_delta(before, after):
    delta = {}
    for asn, counts in after.items():
        prior = before.get(asn, {})
        for reason, count in counts.items():
            diff = count - prior.get(reason, 0)
            if diff:
                delta.setdefault(asn, {})[reason] = diff
    return delta


@dataclass(frozen=True)
class CaseRow:
    index: int
    link_start: int
    link_end: int
    leaker: int
    destination: int
    n_received: int
    n_installed: int
    frac_received: float
    frac_installed: float
    status: str


class CampaignReport:
    """Merged outcome of a campaign run.

    ``exports`` holds one ``(case_index, leaker, ((exporter, path), ...))``
    record per completed case when the campaign keeps exports in memory.
    """

    def __init__(self, scenario_name, n_topology):
        self.scenario_name = scenario_name
        self.n_topology = n_topology
        self.rows = []
        self.skips = []
        self.exports = []
        self.total_exporting = 0
        self.mitigated = 0

    def add_result(self, result, keep_exports):
        index = len(self.rows)
        n_recv = len(result.received)
        n_inst = len(result.installed)
        self.rows.append(
            CaseRow(
                index,
                result.case.link_start,
                result.case.link_end,
                result.case.leaker,
                result.case.destination,
                n_recv,
                n_inst,
                n_recv / self.n_topology,
                n_inst / self.n_topology,
                result.status,
            )
        )
        self.total_exporting += len(result.exported_paths)
        if result.installed == {result.case.leaker}:
            self.mitigated += 1
        if keep_exports:
            self.exports.append((index, result.case.leaker, result.exported_paths))

    @property
    def n_cases(self):
        return len(self.rows)

    def iter_exports(self):
        for case_index, leaker, pairs in self.exports:
            for exporter, path in pairs:
                yield case_index, leaker, exporter, path

    def cdf_series(self, metric):
        """Empirical CDF points (x, y) over completed cases for a metric."""
        values = sorted(
            getattr(row, metric) for row in self.rows if row.status != "error"
        )
        points = []
        n = len(values)
        for i, x in enumerate(values, start=1):
            if points and points[-1][0] == x:
                points[-1] = (x, i / n)
            else:
                points.append((x, i / n))
        return points

    def summary(self):
        completed = [r for r in self.rows if r.status == STATUS_OK]
        return {
            "scenario": self.scenario_name,
            "topology_size": self.n_topology,
            "cases_attempted": self.n_cases + len(self.skips),
            "cases_completed": self.n_cases,
            "cases_skipped": len(self.skips),
            "total_exporting_ases": self.total_exporting,
            "fully_mitigated": self.mitigated,
            "fully_mitigated_fraction": self.mitigated / self.n_cases if self.n_cases else 0.0,
            "cases_received_gt_10pct": sum(1 for r in self.rows if r.frac_received > 0.10),
            "cases_installed_gt_10pct": sum(1 for r in self.rows if r.frac_installed > 0.10),
            "mean_frac_received": (
                sum(r.frac_received for r in self.rows) / self.n_cases if self.n_cases else 0.0
            ),
            "mean_frac_installed": (
                sum(r.frac_installed for r in self.rows) / self.n_cases if self.n_cases else 0.0
            ),
            "n_completed_ok": len(completed),
        }


# Worker-global context so a process pool does not re-pickle the topology
# for every link.
_WORKER = {}


def _init_worker(topology, scenario, n_per_link, seed, backend):
    _WORKER["topology"] = topology
    _WORKER["scenario"] = scenario
    _WORKER["n_per_link"] = n_per_link
    _WORKER["seed"] = seed
    _WORKER["backend"] = backend


def _run_link(link):
    return _process_link(
        _WORKER["topology"],
        _WORKER["scenario"],
        link,
        _WORKER["n_per_link"],
        _WORKER["seed"],
        _WORKER["backend"],
    )


def _process_link(topology, scenario, link, n_per_link, seed, backend):
    plain = BaselineCache(topology, None, backend=backend)
    if scenario is None or scenario.is_empty():
        scoped = plain
    else:
        scoped = BaselineCache(topology, scenario, backend=backend)
    cases, skips = sample_leak_cases(
        topology, link, n=n_per_link, seed=seed, plain_baselines=plain
    )
    results = []
    for case in cases:
        baseline = scoped.get(case.destination)
        results.append(run_leak(topology, scenario, case, backend=backend, baseline=baseline))
    return results, skips


def run_campaign(
    topology,
    scenario,
    n_per_link=20,
    seed=0,
    parallelism=1,
    backend=None,
    keep_exports=True,
    links=None,
):
    """Run all links of a campaign and merge results in deterministic order.

    Cases are sampled from unfiltered baselines (scenario-independent), then
    replayed under ``scenario``. ``parallelism`` splits work by link across
    processes; the merge order is fixed, so the report is identical at any
    parallelism level.
    """
    if links is None:
        links = enumerate_t1_links(topology)
    scenario_name = scenario.name if scenario is not None else "none"
    report = CampaignReport(scenario_name, len(topology.nodes))
    if parallelism <= 1:
        outcomes = (
            _process_link(topology, scenario, link, n_per_link, seed, backend)
            for link in links
        )
        for results, skips in outcomes:
            for result in results:
                report.add_result(result, keep_exports)
            report.skips.extend(skips)
        return report
    import multiprocessing as mp

    ctx = mp.get_context("fork" if "fork" in mp.get_all_start_methods() else "spawn")
    with ctx.Pool(
        processes=parallelism,
        initializer=_init_worker,
        initargs=(topology, scenario, n_per_link, seed, backend),
    ) as pool:
        for results, skips in pool.imap(_run_link, links):
            for result in results:
                report.add_result(result, keep_exports)
            report.skips.extend(skips)
    return report


# -- artifact files ---------------------------------------------------------

CASES_HEADER = (
    "link_start,link_end,leaker,destination,n_received,n_installed,"
    "frac_received,frac_installed,status"
)
SKIPS_HEADER = "link_start,link_end,leaker,reason"
CDF_HEADER = "scenario,metric,x,y"
EXPORTS_HEADER = "case_index,leaker,exporter,as_path"


def write_artifacts(report, outdir, provenance=(), meta=None):
    """Write cases.csv, skips.csv, cdf.csv, exports.csv.gz, summary.json."""
    import os

    os.makedirs(outdir, exist_ok=True)

    def _open(name):
        return open(os.path.join(outdir, name), "w", encoding="utf-8", newline="")

    with _open("cases.csv") as fh:
        for line in provenance:
            fh.write(line + "\n")
        fh.write(CASES_HEADER + "\n")
        for r in report.rows:
            fh.write(
                f"{r.link_start},{r.link_end},{r.leaker},{r.destination},"
                f"{r.n_received},{r.n_installed},{r.frac_received:.8f},"
                f"{r.frac_installed:.8f},{r.status}\n"
            )
    with _open("skips.csv") as fh:
        for line in provenance:
            fh.write(line + "\n")
        fh.write(SKIPS_HEADER + "\n")
        for s in report.skips:
            leaker = "" if s.leaker is None else s.leaker
            fh.write(f"{s.link_start},{s.link_end},{leaker},{s.reason}\n")
    with _open("cdf.csv") as fh:
        for line in provenance:
            fh.write(line + "\n")
        fh.write(CDF_HEADER + "\n")
        for metric, label in (("frac_received", "received"), ("frac_installed", "installed")):
            for x, y in report.cdf_series(metric):
                fh.write(f"{report.scenario_name},{label},{x:.8f},{y:.8f}\n")
    raw = io.StringIO()
    for line in provenance:
        raw.write(line + "\n")
    raw.write(EXPORTS_HEADER + "\n")
    for case_index, leaker, exporter, path in report.iter_exports():
        raw.write(f"{case_index},{leaker},{exporter},{' '.join(map(str, path))}\n")
    # mtime is pinned so re-runs produce byte-identical archives
    with open(os.path.join(outdir, "exports.csv.gz"), "wb") as fh:
        with gzip.GzipFile(fileobj=fh, mode="wb", mtime=0) as gz:
            gz.write(raw.getvalue().encode("utf-8"))
    summary = report.summary()
    summary["format_version"] = 1
    if meta:
        summary.update(meta)
    with _open("summary.json") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_exports(path):
    """Yield (case_index, leaker, exporter, as_path) from an exports file."""
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "rt", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line == EXPORTS_HEADER:
                continue
            case_index, leaker, exporter, path_field = line.split(",", 3)
            yield (
                int(case_index),
                int(leaker),
                int(exporter),
                tuple(int(t) for t in path_field.split()),
            )
