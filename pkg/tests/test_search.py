"""Search engine: ranking, determinism, failure reporting, cross scans."""

import numpy as np
import pytest

from gpmkit import (
    CellEntry,
    DataValidationError,
    Profile,
    ProfileStore,
    RelationshipSpec,
    ResolvedStore,
    SearchQuery,
    VectorEntry,
    cross_search,
    load_frequencies,
    multi_locus_lr,
    resolve_profile,
    search,
)

STR_TABLE = "locus,allele,frequency\nL1,8,0.1\nL1,9,0.2\nL1,10,0.3\nL1,11,0.4\n"

TWO_LOCUS_TABLE = (
    "locus,allele,frequency\n"
    "L1,8,0.1\nL1,9,0.2\nL1,10,0.3\nL1,11,0.4\n"
    "L2,a,0.5\nL2,b,0.3\nL2,c,0.2\n"
)


def vec_profile(pid, loci):
    return Profile(pid, {}, {name: VectorEntry(pair) for name, pair in loci.items()})


@pytest.fixture
def str_freqs():
    return load_frequencies(STR_TABLE)


@pytest.fixture
def alice_bob(str_freqs):
    alice = vec_profile("alice", {"L1": ("8", "F")})
    bob = vec_profile("bob", {"L1": ("8", "9")})
    return alice, bob


SAME_AND_SIBLING = (RelationshipSpec.same(), RelationshipSpec.sibling())


class TestSearchBasics:
    def test_single_candidate(self, str_freqs, alice_bob):
        alice, bob = alice_bob
        report = search(
            SearchQuery(profile=alice, hypotheses=SAME_AND_SIBLING),
            ProfileStore([bob]),
            str_freqs,
        )
        assert len(report.results) == 1
        hit = report.results[0]
        assert hit.candidate_id == "bob"
        assert hit.per_hypothesis["sibling"].overall == pytest.approx(3.0, abs=1e-9)
        assert hit.per_hypothesis["same"].overall == pytest.approx(5.0, abs=1e-9)
        assert hit.best_hypothesis == "same"
        assert hit.shared_loci == 1

    def test_query_by_stored_id(self, str_freqs, alice_bob):
        alice, bob = alice_bob
        store = ProfileStore([alice, bob])
        report = search(
            SearchQuery(profile="alice", hypotheses=(RelationshipSpec.sibling(),), top_k=2),
            store,
            str_freqs,
        )
        by_id = {r.candidate_id: r for r in report.results}
        assert by_id["bob"].per_hypothesis["sibling"].overall == pytest.approx(3.0, abs=1e-9)

    def test_self_match_certain_profile(self, str_freqs):
        bob = vec_profile("bob", {"L1": ("8", "9")})
        report = search(
            SearchQuery(profile=bob, hypotheses=(RelationshipSpec.same(),)),
            ProfileStore([bob]),
            str_freqs,
        )
        # Reciprocal of the genotype probability 2 * 0.1 * 0.2.
        assert report.results[0].best_lr == pytest.approx(25.0, rel=1e-9)

    def test_min_lr_filters(self, str_freqs, alice_bob):
        alice, bob = alice_bob
        report = search(
            SearchQuery(profile=alice, hypotheses=SAME_AND_SIBLING, min_lr=1e6),
            ProfileStore([bob]),
            str_freqs,
        )
        assert report.results == ()

    def test_top_k_limits(self, str_freqs):
        store = ProfileStore(
            [vec_profile(f"p{i}", {"L1": ("8", "9")}) for i in range(5)]
        )
        query = vec_profile("q", {"L1": ("8", "9")})
        report = search(
            SearchQuery(profile=query, hypotheses=(RelationshipSpec.same(),), top_k=3),
            store,
            str_freqs,
        )
        assert [r.candidate_id for r in report.results] == ["p0", "p1", "p2"]

    def test_full_scan_returns_everyone_once(self, str_freqs):
        store = ProfileStore(
            [vec_profile(f"p{i}", {"L1": ("8", str(8 + i % 4))}) for i in range(7)]
        )
        query = vec_profile("q", {"L1": ("8", "F")})
        report = search(
            SearchQuery(profile=query, hypotheses=SAME_AND_SIBLING, top_k=7, min_lr=0.0),
            store,
            str_freqs,
        )
        assert sorted(r.candidate_id for r in report.results) == [f"p{i}" for i in range(7)]

    def test_ties_break_by_id(self, str_freqs):
        store = ProfileStore(
            [vec_profile(pid, {"L1": ("8", "9")}) for pid in ("zeta", "alpha", "mid")]
        )
        query = vec_profile("q", {"L1": ("8", "9")})
        report = search(
            SearchQuery(profile=query, hypotheses=(RelationshipSpec.same(),), top_k=3),
            store,
            str_freqs,
        )
        assert [r.candidate_id for r in report.results] == ["alpha", "mid", "zeta"]

    def test_zero_shared_loci_skipped(self):
        freqs = load_frequencies(TWO_LOCUS_TABLE)
        store = ProfileStore(
            [
                vec_profile("only-l2", {"L2": ("a", "b")}),
                vec_profile("has-l1", {"L1": ("8", "9")}),
            ]
        )
        query = vec_profile("q", {"L1": ("8", "9")})
        report = search(
            SearchQuery(profile=query, hypotheses=(RelationshipSpec.same(),), top_k=5),
            store,
            freqs,
        )
        assert report.skipped == ("only-l2",)
        assert [r.candidate_id for r in report.results] == ["has-l1"]

    def test_validation(self, alice_bob):
        alice, _ = alice_bob
        with pytest.raises(DataValidationError):
            SearchQuery(profile=alice, hypotheses=())
        with pytest.raises(DataValidationError):
            SearchQuery(profile=alice, hypotheses=SAME_AND_SIBLING, top_k=0)
        with pytest.raises(DataValidationError):
            SearchQuery(profile=alice, hypotheses=SAME_AND_SIBLING, min_lr=-1.0)
        with pytest.raises(DataValidationError):
            SearchQuery(
                profile=alice, hypotheses=(RelationshipSpec.same(), RelationshipSpec.same())
            )


class TestEngineMatchesScalarPath:
    def test_per_pair_agreement(self):
        freqs = load_frequencies(TWO_LOCUS_TABLE)
        rng = np.random.default_rng(17)
        l1 = freqs["L1"].locus
        l2 = freqs["L2"].locus
        profiles = []
        for i in range(12):
            loci = {"L1": ("8", str(8 + int(rng.integers(0, 4))))}
            if i % 3 != 0:
                loci["L2"] = ("a", ["a", "b", "c"][int(rng.integers(0, 3))])
            profiles.append(vec_profile(f"p{i:02d}", loci))
        store = ProfileStore(profiles)
        query = vec_profile("q", {"L1": ("8", "F"), "L2": ("a", "b")})
        for theta in (0.0, 0.03):
            report = search(
                SearchQuery(
                    profile=query,
                    hypotheses=(RelationshipSpec.same(), RelationshipSpec.sibling(),
                                RelationshipSpec.degree_n(2)),
                    theta=theta,
                    top_k=12,
                ),
                store,
                freqs,
            )
            assert len(report.results) == 12
            query_gpms = resolve_profile(query, freqs)
            for hit in report.results:
                cand_gpms = resolve_profile(store.get(hit.candidate_id), freqs)
                for spec in (RelationshipSpec.same(), RelationshipSpec.sibling(),
                             RelationshipSpec.degree_n(2)):
                    expected = multi_locus_lr(query_gpms, cand_gpms, spec, freqs, theta)
                    got = hit.per_hypothesis[spec.label]
                    assert got.log10_overall == pytest.approx(
                        expected.log10_overall, abs=1e-12
                    )
                    for loc_got, loc_exp in zip(got.per_locus, expected.per_locus):
                        assert loc_got.lr == pytest.approx(loc_exp.lr, rel=1e-12)
                        assert loc_got.denominator == pytest.approx(
                            loc_exp.denominator, rel=1e-12
                        )

    def test_mutation_model_agreement(self, str_freqs):
        from gpmkit import MutationModel

        store = ProfileStore([vec_profile("c", {"L1": ("9", "10")})])
        query = vec_profile("q", {"L1": ("8", "9")})
        model = MutationModel(0.002, 0.6)
        report = search(
            SearchQuery(
                profile=query,
                hypotheses=(RelationshipSpec.degree_n(1),),
                mutation=model,
            ),
            store,
            str_freqs,
        )
        expected = multi_locus_lr(
            resolve_profile(query, str_freqs),
            resolve_profile(store.get("c"), str_freqs),
            RelationshipSpec.degree_n(1),
            str_freqs,
            mutation_model=model,
        )
        got = report.results[0].per_hypothesis["d1"]
        assert got.overall == pytest.approx(expected.overall, rel=1e-12)


class TestDeterminism:
    def _random_store(self, n=300):
        freqs = load_frequencies(TWO_LOCUS_TABLE)
        rng = np.random.default_rng(23)
        profiles = []
        for i in range(n):
            a = str(8 + int(rng.integers(0, 4)))
            b = str(8 + int(rng.integers(0, 4)))
            c = ["a", "b", "c"][int(rng.integers(0, 3))]
            profiles.append(vec_profile(f"p{i:04d}", {"L1": (a, b), "L2": (c, "F")}))
        return freqs, ProfileStore(profiles)

    def test_worker_counts_agree_exactly(self):
        freqs, store = self._random_store()
        rs = ResolvedStore(store, freqs)
        query = vec_profile("q", {"L1": ("8", "F"), "L2": ("a", "b")})
        q = SearchQuery(profile=query, hypotheses=SAME_AND_SIBLING, theta=0.01, top_k=300)
        reports = [search(q, rs, freqs, workers=w) for w in (1, 2, 8)]
        assert reports[0] == reports[1] == reports[2]

    def test_repeat_runs_identical(self, str_freqs, alice_bob):
        alice, bob = alice_bob
        q = SearchQuery(profile=alice, hypotheses=SAME_AND_SIBLING)
        r1 = search(q, ProfileStore([bob]), str_freqs)
        r2 = search(q, ProfileStore([bob]), str_freqs)
        assert r1 == r2


class TestFailureReporting:
    def test_zero_background_candidate_warns(self):
        freqs = load_frequencies("locus,allele,frequency\nL1,8,0.5\nL1,9,0.5\nL1,10,0\n")
        store = ProfileStore(
            [vec_profile("clean", {"L1": ("8", "9")}), vec_profile("rare", {"L1": ("10", "10")})]
        )
        query = vec_profile("q", {"L1": ("10", "10")})
        report = search(
            SearchQuery(profile=query, hypotheses=(RelationshipSpec.same(),), top_k=5),
            store,
            freqs,
        )
        assert any("rare" in w for w in report.warnings)
        # The undefined pair is dropped; the defined pair is still ranked.
        assert {r.candidate_id for r in report.results} == {"clean"}

    def test_scan_never_aborts(self):
        freqs = load_frequencies("locus,allele,frequency\nL1,8,0.5\nL1,9,0.5\nL1,10,0\n")
        store = ProfileStore(
            [vec_profile(f"p{i}", {"L1": ("8", "9") if i % 2 else ("10", "9")}) for i in range(6)]
        )
        query = vec_profile("q", {"L1": ("10", "9")})
        report = search(
            SearchQuery(profile=query, hypotheses=SAME_AND_SIBLING, top_k=6),
            store,
            freqs,
        )
        assert len(report.results) + len(report.warnings) >= 6


class TestCrossSearch:
    def test_self_pair(self, str_freqs):
        p = vec_profile("solo", {"L1": ("8", "9")})
        pairs = list(
            cross_search(ProfileStore([p]), ProfileStore([p]), (RelationshipSpec.same(),), str_freqs)
        )
        assert len(pairs) == 1
        assert pairs[0].query_id == "solo"
        assert pairs[0].result.candidate_id == "solo"
        assert pairs[0].result.best_lr == pytest.approx(25.0, rel=1e-9)

    def test_mixture_pair_value(self):
        text = "locus,allele,frequency\nL,A,0.1\nL,B,0.1\nL,C,0.1\nL,D,0.7\n"
        freqs = load_frequencies(text)
        q = 1.0 / 120.0
        t10 = [
            ("A", "A", 18 * q), ("A", "B", 20 * q), ("A", "C", 19 * q),
            ("B", "B", 2 * q), ("B", "C", 11 * q),
        ]
        a = Profile("ex3-major", {}, {
            "L": CellEntry((("A", "B", 0.25), ("A", "C", 0.25))),
        })
        b = Profile("ex4-marginal", {}, {
            "L": CellEntry(tuple((x, y, v) for x, y, v in t10)),
        })
        pairs = list(
            cross_search(
                ProfileStore([a]), ProfileStore([b]), (RelationshipSpec.same(),), freqs
            )
        )
        assert len(pairs) == 1
        locus_lr = pairs[0].result.per_hypothesis["same"].per_locus[0]
        assert locus_lr.lr == pytest.approx(16.25, rel=1e-9)

    def test_deterministic_pair_order(self, str_freqs):
        a_store = ProfileStore(
            [vec_profile(pid, {"L1": ("8", "9")}) for pid in ("a2", "a1")]
        )
        b_store = ProfileStore(
            [vec_profile(pid, {"L1": ("8", "9")}) for pid in ("b2", "b1", "b3")]
        )
        pairs = [
            (p.query_id, p.result.candidate_id)
            for p in cross_search(a_store, b_store, (RelationshipSpec.same(),), str_freqs)
        ]
        assert pairs == [
            ("a1", "b1"), ("a1", "b2"), ("a1", "b3"),
            ("a2", "b1"), ("a2", "b2"), ("a2", "b3"),
        ]

    def test_min_lr_infinite_is_empty(self, str_freqs):
        p = vec_profile("solo", {"L1": ("8", "9")})
        pairs = list(
            cross_search(
                ProfileStore([p]), ProfileStore([p]), (RelationshipSpec.same(),),
                str_freqs, min_lr=float("inf"),
            )
        )
        assert pairs == []

    def test_self_pairs_of_certain_profiles_clear_unity(self, str_freqs):
        profiles = [
            vec_profile(f"p{i}", {"L1": (a, b)})
            for i, (a, b) in enumerate([("8", "8"), ("8", "9"), ("10", "11"), ("11", "11")])
        ]
        store = ProfileStore(profiles)
        rs = ResolvedStore(store, str_freqs)
        pairs = list(cross_search(rs, rs, (RelationshipSpec.same(),), str_freqs))
        self_pairs = {p.query_id: p for p in pairs if p.query_id == p.result.candidate_id}
        assert len(self_pairs) == len(profiles)
        for pair in self_pairs.values():
            assert pair.result.best_lr >= 1.0
