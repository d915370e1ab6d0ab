import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bsodiag.errors import SnapshotValidationError, UndefinedConfidenceError
from bsodiag.fcm import (
    CorpusStats,
    EventGroup,
    FailureKnowledgeGraph,
    TaggedEvent,
    build_fkg,
    confidence,
    group_events,
    load_fkg,
    mine_failure_pairs,
    mine_fkg,
    mine_frequent_failures,
    save_fkg,
    support,
)

from helpers import brute_force_mine, make_event

LEVELS = {"a": 3, "b": 2, "c": 1, "d": 2, "e": 4, "f": 1}


def tagged(day, dc, ftype, start=-10):
    return TaggedEvent(
        day=day, data_center=dc, event=make_event([f"{ftype}-dev"], type_failure=ftype, start=start, end=start + 1)
    )


def group_of(*types, day="2023-01-01", dc="dc-01"):
    return EventGroup(
        day=day,
        data_center=dc,
        events=tuple(
            make_event([f"{t}-dev"], type_failure=t, start=-10 - i, end=-9 - i)
            for i, t in enumerate(types)
        ),
    )


class TestGroupEvents:
    def test_same_key_one_group(self):
        groups = group_events([tagged("2023-01-01", "dc-01", "a"), tagged("2023-01-01", "dc-01", "b")])
        assert len(groups) == 1
        assert len(groups[0].events) == 2

    def test_distinct_data_centers_split(self):
        groups = group_events([tagged("2023-01-01", "dc-01", "a"), tagged("2023-01-01", "dc-02", "a")])
        assert len(groups) == 2

    def test_empty_history(self):
        assert group_events([]) == []

    def test_duplicates_collapse(self):
        groups = group_events(
            [tagged("2023-01-01", "dc-01", "a", start=-10), tagged("2023-01-01", "dc-01", "a", start=-10)]
        )
        assert len(groups[0].events) == 1

    def test_missing_tags_rejected(self):
        with pytest.raises(SnapshotValidationError):
            TaggedEvent.from_dict(
                {"day": "", "data_center": "dc", **make_event(["x"]).to_dict()}
            )


class TestMineFrequentFailures:
    def test_type_in_every_group_is_retained(self):
        groups = [group_of("a", "b", day=f"d{i}") for i in range(5)]
        q1 = mine_frequent_failures(groups, alpha=1.0)
        assert q1 == {"a": 5, "b": 5}

    def test_threshold_arithmetic_drops_rare_types(self):
        # 1 presence against alpha * 10000 groups = 10 required.
        groups = [group_of("a", day=f"d{i}") for i in range(9999)] + [group_of("a", "b", day="last")]
        q1 = mine_frequent_failures(groups, alpha=0.001)
        assert "a" in q1 and "b" not in q1

    def test_counts_are_group_presence_not_event_instances(self):
        groups = [group_of("a", "a", "a")]  # duplicates collapse within a group
        assert mine_frequent_failures(groups, alpha=0.5) == {"a": 1}


class TestMineFailurePairs:
    def test_perfect_cooccurrence_has_confidence_one(self):
        groups = [group_of("a", "b", day=f"d{i}") for i in range(100)]
        q1 = mine_frequent_failures(groups, 0.001)
        pairs = mine_failure_pairs(q1, groups, 0.001, LEVELS)
        assert [(p.antecedent, p.consequent, p.confidence) for p in pairs] == [("a", "b", 1.0)]

    def test_equal_levels_never_pair(self):
        groups = [group_of("b", "d", day=f"d{i}") for i in range(100)]
        q1 = mine_frequent_failures(groups, 0.001)
        assert mine_failure_pairs(q1, groups, 0.001, LEVELS) == []

    def test_confidence_is_conditional_on_antecedent(self):
        groups = [group_of("a", "b", day=f"p{i}") for i in range(10)]
        groups += [group_of("a", day=f"a{i}") for i in range(30)]
        groups += [group_of("c", day=f"c{i}") for i in range(10)]
        q1 = mine_frequent_failures(groups, 0.001)
        pairs = {(p.antecedent, p.consequent): p for p in mine_failure_pairs(q1, groups, 0.001, LEVELS)}
        assert pairs[("a", "b")].confidence == pytest.approx(10 / 40 )
        assert pairs[("a", "b")].count == 10

    def test_toy_corpus_matches_brute_force(self):
        groups = [
            group_of("a", "b", "c"),
            group_of("a", "b"),
            group_of("a"),
            group_of("b", "c"),
            group_of("e", "a", "c"),
        ]
        q1 = mine_frequent_failures(groups, 0.2)
        pairs = mine_failure_pairs(q1, groups, 0.2, LEVELS)
        _, expected = brute_force_mine([g.failure_types for g in groups], 0.2, LEVELS)
        assert {(p.antecedent, p.consequent): (p.count, p.support, p.confidence) for p in pairs} == expected

    def test_missing_level_is_an_error(self):
        groups = [group_of("zz", "b")]
        q1 = mine_frequent_failures(groups, 0.001)
        with pytest.raises(SnapshotValidationError, match="zz"):
            mine_failure_pairs(q1, groups, 0.001, LEVELS)


class TestSupportConfidence:
    stats = CorpusStats(n_groups=10, type_group_counts={"a": 6, "b": 4}, n_candidates=4)

    def test_zero_pair_count(self):
        assert support(0, self.stats) == 0.0

    def test_confidence_division(self):
        assert confidence(3, "a", self.stats) == 0.5

    def test_group_denominator_support(self):
        assert support(2, self.stats) == pytest.approx(0.2)

    def test_literal_mode_uses_candidate_denominator(self):
        stats = CorpusStats(
            n_groups=10, type_group_counts={"a": 6}, n_candidates=4, mode="literal"
        )
        assert support(2, stats) == pytest.approx(0.5)

    def test_undefined_confidence(self):
        with pytest.raises(UndefinedConfidenceError):
            confidence(1, "zz", self.stats)


class TestKnowledgeGraph:
    def test_empty_pairs_empty_graph(self):
        fkg = build_fkg([], alpha=0.001, n_groups=0)
        assert fkg.nodes == () and fkg.edges == ()
        assert fkg.confidence_of("a", "b") == 0.0

    def test_nodes_are_types_involved_in_edges(self):
        groups = [group_of("a", "b", "c", day=f"d{i}") for i in range(10)]
        fkg = mine_fkg([], alpha=0.5, rule_tree=LEVELS)
        assert fkg.nodes == ()
        fkg = mine_fkg(
            [tagged(f"d{i}", "dc", t) for i in range(10) for t in ("a", "b", "c")],
            alpha=0.5,
            rule_tree=LEVELS,
        )
        assert set(fkg.nodes) == {"a", "b", "c"}
        assert len(fkg.edges) == 3  # a->b, a->c, b->c

    def test_round_trip(self, tmp_path):
        history = [tagged(f"d{i}", "dc", t) for i in range(12) for t in ("a", "b")]
        fkg = mine_fkg(history, alpha=0.01, rule_tree=LEVELS, mined_at="2024-01-01T00:00:00+00:00")
        save_fkg(fkg, tmp_path / "fkg.json")
        loaded = load_fkg(tmp_path / "fkg.json")
        assert loaded.structurally_equal(fkg)
        assert loaded.provenance == fkg.provenance

    def test_level_constraint_makes_graph_acyclic(self):
        rng = np.random.default_rng(0)
        types = list(LEVELS)
        history = []
        for day in range(40):
            for t in rng.choice(types, size=3, replace=False):
                history.append(tagged(f"d{day}", "dc", str(t)))
        fkg = mine_fkg(history, alpha=0.01, rule_tree=LEVELS)
        # Every edge strictly decreases the level, so no cycles can exist.
        for e in fkg.edges:
            assert LEVELS[e.antecedent] > LEVELS[e.consequent]
        assert _has_no_cycles(fkg)


def _has_no_cycles(fkg: FailureKnowledgeGraph) -> bool:
    adj = {}
    for e in fkg.edges:
        adj.setdefault(e.antecedent, []).append(e.consequent)
    seen, active = set(), set()

    def visit(node):
        if node in active:
            return False
        if node in seen:
            return True
        seen.add(node)
        active.add(node)
        ok = all(visit(n) for n in adj.get(node, []))
        active.discard(node)
        return ok

    return all(visit(n) for n in fkg.nodes)


@st.composite
def small_corpora(draw):
    types = draw(st.lists(st.sampled_from("abcdef"), min_size=1, max_size=6, unique=True))
    n_groups = draw(st.integers(min_value=1, max_value=8))
    groups = []
    for i in range(n_groups):
        members = draw(st.lists(st.sampled_from(types), min_size=0, max_size=6))
        groups.append(tuple(members))
    alpha = draw(st.sampled_from([0.001, 0.1, 0.25, 0.5, 0.9]))
    return groups, alpha


@settings(max_examples=80, deadline=None)
@given(small_corpora())
def test_mining_matches_brute_force_oracle(corpus):
    raw_groups, alpha = corpus
    groups = [group_of(*members, day=f"d{i}") for i, members in enumerate(raw_groups)]
    q1 = mine_frequent_failures(groups, alpha)
    pairs = mine_failure_pairs(q1, groups, alpha, LEVELS)
    expected_q1, expected_pairs = brute_force_mine(
        [g.failure_types for g in groups], alpha, LEVELS
    )
    assert q1 == expected_q1
    assert {
        (p.antecedent, p.consequent): (p.count, p.support, p.confidence) for p in pairs
    } == expected_pairs


@settings(max_examples=40, deadline=None)
@given(small_corpora(), st.randoms(use_true_random=False))
def test_mining_is_order_invariant(corpus, rnd):
    raw_groups, alpha = corpus
    history = []
    for i, members in enumerate(raw_groups):
        for j, t in enumerate(members):
            history.append(tagged(f"d{i}", "dc", t, start=-10 - j))
    shuffled = list(history)
    rnd.shuffle(shuffled)
    a = mine_fkg(history, alpha, LEVELS, mined_at="x")
    b = mine_fkg(shuffled, alpha, LEVELS, mined_at="x")
    assert a.structurally_equal(b)


@settings(max_examples=40, deadline=None)
@given(small_corpora())
def test_raising_alpha_never_adds_pairs(corpus):
    raw_groups, _ = corpus
    groups = [group_of(*members, day=f"d{i}") for i, members in enumerate(raw_groups)]
    previous = None
    for alpha in (0.05, 0.2, 0.5, 0.9):
        q1 = mine_frequent_failures(groups, alpha)
        pairs = {
            (p.antecedent, p.consequent)
            for p in mine_failure_pairs(q1, groups, alpha, LEVELS)
        }
        if previous is not None:
            assert pairs <= previous
        previous = pairs
