import pytest

from leaksim.campaign import (
    BaselineCache,
    CampaignReport,
    LeakCase,
    STATUS_NO_ROUTE,
    STATUS_OK,
    contains_adjacent,
    derive_seed,
    enumerate_t1_links,
    read_exports,
    run_campaign,
    run_leak,
    sample_leak_cases,
    write_artifacts,
)
from leaksim.engine import Simulation
from leaksim.filters import PeerlockRule, ProtectionScenario, build_scenario
from leaksim.topology import parse_relationships
from leaksim import synth


def topo_of(text):
    return parse_relationships(text).resolve()


# Six-AS fixture: clique {10, 20}; 1 and 3 sit under 10, destination 2 under
# 20, 4 is the leaker's customer. Leaker 1 peers with 3.
SIX_AS = "\n".join(
    [
        "# input clique: 10 20",
        "10|20|0",
        "10|1|-1",
        "10|3|-1",
        "20|2|-1",
        "1|3|0",
        "1|4|-1",
    ]
)

# Multi-homed leaker 1 under providers 5 and 6 (both customers of 10).
MULTIHOMED = "\n".join(
    [
        "# input clique: 10 20",
        "10|20|0",
        "10|5|-1",
        "10|6|-1",
        "5|1|-1",
        "6|1|-1",
        "20|2|-1",
    ]
)


class TestLinkEnumeration:
    def test_nineteen_clique_yields_342(self):
        members = [10 + i for i in range(19)]
        lines = ["# input clique: " + " ".join(map(str, members))]
        lines += [f"{a}|{b}|0" for i, a in enumerate(members) for b in members[i + 1:]]
        lines.append(f"{members[0]}|500|-1")
        topo = topo_of("\n".join(lines))
        links = enumerate_t1_links(topo)
        assert len(links) == 342
        assert len(set(links)) == 342

    def test_two_clique_yields_two_ordered_pairs(self):
        topo = topo_of(SIX_AS)
        assert enumerate_t1_links(topo) == ((10, 20), (20, 10))

    def test_ordering_stable(self):
        topo = topo_of(SIX_AS)
        assert enumerate_t1_links(topo) == enumerate_t1_links(topo)


class TestSampling:
    def test_without_replacement_bound(self):
        topo = topo_of(SIX_AS)  # cone(10) = {1, 3, 4}
        cases, skips = sample_leak_cases(topo, (10, 20), n=20, seed=1)
        assert len(cases) + len(skips) == 3
        assert len({c.leaker for c in cases}) == len(cases)

    def test_case_paths_cross_the_link(self):
        topo = topo_of(SIX_AS)
        cases, _ = sample_leak_cases(topo, (10, 20), n=20, seed=1)
        assert cases, "fixture must admit at least one case"
        for case in cases:
            baseline = Simulation(topo, backend="pure").originate(case.destination).converge()
            path = baseline.best_path(case.leaker)
            assert contains_adjacent(path, 10, 20)
            assert case.leaker in topo.customer_cone(10)
            assert case.destination in topo.customer_cone(20)

    def test_same_seed_identical(self):
        topo = synth.hierarchy_topology(2)
        link = enumerate_t1_links(topo)[0]
        first = sample_leak_cases(topo, link, n=5, seed=9)
        second = sample_leak_cases(topo, link, n=5, seed=9)
        assert first == second

    def test_different_seed_differs(self):
        topo = synth.hierarchy_topology(2)
        links = enumerate_t1_links(topo)
        a = [c for link in links for c in sample_leak_cases(topo, link, n=8, seed=1)[0]]
        b = [c for link in links for c in sample_leak_cases(topo, link, n=8, seed=2)[0]]
        assert a and b
        assert a != b

    def test_empty_cone_skips(self):
        topo = topo_of("# input clique: 10 20\n10|20|0\n20|2|-1")
        cases, skips = sample_leak_cases(topo, (10, 20), n=20, seed=1)
        assert cases == []
        assert skips[0].reason == "empty_cone"


class TestRunLeak:
    def case(self, topo, leaker=1, dest=2):
        return LeakCase(10, 20, leaker, dest, seed=0)

    def test_six_as_fixture_matches_hand_enumeration(self):
        topo = topo_of(SIX_AS)
        result = run_leak(topo, None, self.case(topo), backend="pure")
        # Leak goes to peer 3 (installs: peer beats provider) and provider 10
        # (loop-dropped: 10 already on the path).
        assert result.status == STATUS_OK
        assert result.received == {1, 3, 10}
        assert result.installed == {1, 3}
        assert result.exported_paths == ((1, (1, 10, 20, 2)),)
        assert result.drop_log == {10: {"loop": 1}}

    def test_leaker_customers_not_counted_without_leak_update(self):
        topo = topo_of(SIX_AS)
        result = run_leak(topo, None, self.case(topo), backend="pure")
        # AS 4 routes through the leaker legitimately but never sees a
        # leak-tagged update.
        assert 4 not in result.received
        assert 4 not in result.installed

    def test_single_filter_blocks_the_only_exits(self):
        topo = topo_of(MULTIHOMED)
        scenario = ProtectionScenario("blocked", [PeerlockRule(6, 10)])
        result = run_leak(topo, scenario, self.case(topo), backend="pure")
        # provider 5 drops by loop detection (it is on the leak path);
        # provider 6 peerlocks for 10. Nothing spreads.
        assert result.installed == {1}
        assert result.received == {1, 5, 6}
        assert result.drop_log[5] == {"loop": 1}
        assert result.drop_log[6] == {"peerlock": 1}

    def test_invariants_on_random_campaign(self):
        topo = synth.hierarchy_topology(3)
        report = run_campaign(topo, None, n_per_link=2, seed=5)
        assert report.rows, "campaign should complete cases"
        for case_index, leaker, exporter, path in report.iter_exports():
            assert leaker in path
            row = report.rows[case_index]
            baseline = (
                Simulation(topo, backend="pure").originate(row.destination).converge()
            )
            tail = path[path.index(leaker) + 1:]
            assert tail == baseline.best_path(leaker)

    def test_installed_subset_of_received(self):
        topo = synth.hierarchy_topology(12)
        link = enumerate_t1_links(topo)[2]
        cases, _ = sample_leak_cases(topo, link, n=4, seed=3)
        for case in cases:
            result = run_leak(topo, None, case, backend="pure")
            assert result.installed <= result.received
            assert case.leaker in result.installed

    def test_no_route_case(self):
        topo = topo_of(MULTIHOMED)
        # Peerlock at both of the leaker's providers for 20 kills even the
        # baseline route (it transits 20).
        scenario = ProtectionScenario(
            "wall", [PeerlockRule(5, 20), PeerlockRule(6, 20)]
        )
        result = run_leak(topo, scenario, self.case(topo), backend="pure")
        assert result.status == STATUS_NO_ROUTE
        assert result.installed == {1}


class TestFullT1Invariant:
    def test_no_tier1_installs_remote_tier1_path(self):
        topo = synth.hierarchy_topology(13)
        scenario = build_scenario("full-t1", topo)
        links = enumerate_t1_links(topo)[:4]
        for link in links:
            cases, _ = sample_leak_cases(topo, link, n=2, seed=11)
            for case in cases:
                sim = (
                    Simulation(topo, scenario, backend="pure")
                    .originate(case.destination)
                    .converge()
                )
                best = sim.best_path(case.leaker)
                if best is None:
                    continue
                sim.inject_export(
                    case.leaker,
                    (case.leaker,) + best,
                    sorted(topo.peers_of[case.leaker] | topo.providers_of[case.leaker]),
                )
                sim.converge()
                for t1 in topo.clique:
                    path = sim.best_path(t1)
                    if path is None:
                        continue
                    for hop in path[1:]:
                        assert hop not in topo.clique or hop == path[0] or hop == t1


class TestCampaignDeterminism:
    @pytest.fixture(scope="class")
    def topo(self):
        return synth.hierarchy_topology(12)

    def test_parallelism_does_not_change_report(self, topo):
        seq = run_campaign(topo, None, n_per_link=3, seed=7, parallelism=1)
        par = run_campaign(topo, None, n_per_link=3, seed=7, parallelism=2)
        assert seq.rows == par.rows
        assert seq.skips == par.skips
        assert seq.exports == par.exports
        assert seq.summary() == par.summary()

    def test_artifact_bytes_identical(self, topo, tmp_path):
        import filecmp

        for jobs, name in ((1, "a"), (2, "b")):
            report = run_campaign(topo, None, n_per_link=2, seed=3, parallelism=jobs)
            write_artifacts(report, tmp_path / name, provenance=("# test=1",))
        for fname in ("cases.csv", "skips.csv", "cdf.csv", "exports.csv.gz", "summary.json"):
            assert filecmp.cmp(tmp_path / "a" / fname, tmp_path / "b" / fname, shallow=False), fname

    def test_exports_roundtrip(self, topo, tmp_path):
        report = run_campaign(topo, None, n_per_link=2, seed=3)
        write_artifacts(report, tmp_path / "out")
        loaded = list(read_exports(tmp_path / "out" / "exports.csv.gz"))
        assert loaded == list(report.iter_exports())


class TestCdf:
    def test_cdf_monotone_and_bounded(self):
        topo = synth.hierarchy_topology(12)
        report = run_campaign(topo, None, n_per_link=2, seed=3)
        for metric in ("frac_received", "frac_installed"):
            series = report.cdf_series(metric)
            assert series[-1][1] == pytest.approx(1.0)
            xs = [p[0] for p in series]
            ys = [p[1] for p in series]
            assert xs == sorted(xs)
            assert ys == sorted(ys)


class TestSeedDerivation:
    def test_stable_and_distinct(self):
        assert derive_seed(1, "x", 2) == derive_seed(1, "x", 2)
        assert derive_seed(1, "x", 2) != derive_seed(1, "x", 3)
