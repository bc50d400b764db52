import itertools

import numpy as np
import pytest

from bodyschema import completion as cp
from bodyschema import topology as tp
from bodyschema.errors import NotCompletableError

from test_topology import FIVE_NODE_ROWS, five_node_matrix


def worked_partial():
    # two observed sensors: one on the arm tip (all joints), one on the
    # third link of a six-joint robot
    return tp.DependencyMatrix(
        ("a", "b"),
        ("c1", "c2", "c3", "c4", "c5", "c6"),
        np.array([[1, 1, 1, 1, 1, 1], [1, 1, 1, 0, 0, 0]], dtype=np.int8),
    )


def single_row_oracle(sub: tp.DependencyMatrix):
    """Every binary row whose addition yields a fully valid matrix."""
    n = sub.shape[1]
    found = []
    for bits in itertools.product([0, 1], repeat=n):
        candidate = tp.DependencyMatrix(
            tuple(sub.row_labels) + ("__new__",),
            sub.col_labels,
            np.vstack([sub.values, np.array(bits, dtype=np.int8)]),
        )
        if tp.check_conditions(candidate).satisfies_P:
            found.append(bits)
    return found


def random_tree(rng, n):
    nodes = [f"n{i}" for i in range(1, n + 1)]
    parents = {}
    for i, node in enumerate(nodes):
        j = rng.integers(0, i + 1)
        parents[node] = None if j == 0 else nodes[j - 1]
    edges = list(rng.permutation([f"e{k}" for k in range(1, n + 1)]))
    return tp.OutTree(
        {node: (parents[node], edges[i]) for i, node in enumerate(nodes)}
    )


class TestWorkedExample:
    def test_fills_to_valid_square(self):
        full = cp.complete(worked_partial(), ["c", "d", "e", "f"], seed=0)
        assert full.shape == (6, 6)
        assert tp.check_conditions(full).satisfies_P
        assert np.array_equal(full.values[:2], worked_partial().values)

    def test_different_seeds_still_valid(self):
        for seed in range(5):
            full = cp.complete(worked_partial(), ["c", "d", "e", "f"], seed=seed)
            assert tp.check_conditions(full).satisfies_P

    def test_not_unique_with_four_missing(self):
        assert not cp.is_unique_completion(worked_partial())


class TestPreconditions:
    def test_rejects_non_pminus(self):
        # columns c1={a,c}, c2={a,b}, c3={b,c} cross pairwise
        bad = tp.DependencyMatrix(
            ("a", "b", "c"),
            ("c1", "c2", "c3", "c4"),
            np.array(
                [[1, 1, 0, 0], [0, 1, 1, 0], [1, 0, 1, 1]], dtype=np.int8
            ),
        )
        with pytest.raises(NotCompletableError) as err:
            cp.complete(bad, ["x"])
        assert 5 in err.value.report.failed()

    def test_label_count_checked(self):
        with pytest.raises(ValueError):
            cp.complete(worked_partial(), ["only-one"])

    def test_label_collision_checked(self):
        with pytest.raises(ValueError):
            cp.complete(worked_partial(), ["a", "x", "y", "z"])

    def test_square_valid_input_unchanged(self):
        m = five_node_matrix()
        assert cp.complete(m, []) == m
        assert not cp.is_unique_completion(m)


class TestUniqueness:
    def test_all_single_row_drops_match_oracle(self):
        m = five_node_matrix()
        for drop in FIVE_NODE_ROWS:
            sub = m.restrict_rows([r for r in FIVE_NODE_ROWS if r != drop])
            oracle_rows = single_row_oracle(sub)
            predicted_unique = cp.is_unique_completion(sub)
            assert predicted_unique == (len(oracle_rows) == 1), drop
            filled = cp.complete(sub, ["fresh"], seed=0)
            assert tp.check_conditions(filled).satisfies_P
            assert tuple(filled.row("fresh").tolist()) in oracle_rows
            if predicted_unique:
                assert np.array_equal(filled.row("fresh"), m.row(drop))

    def test_unique_requires_used_column(self):
        # dropping a leaf empties its column; the orphan edge can re-attach
        # anywhere, so several completions exist and none is certified
        m = five_node_matrix()
        sub = m.restrict_rows(["b", "c", "d", "f"])  # drop leaf a
        assert not cp.is_unique_completion(sub)
        assert len(single_row_oracle(sub)) > 1


class TestRandomTrees:
    def test_soundness_and_restriction(self):
        rng = np.random.default_rng(0)
        checked = 0
        for _ in range(400):
            n = int(rng.integers(2, 6))
            tree = random_tree(rng, n)
            full = tp.tree_to_matrix(tree)
            k = int(rng.integers(1, n))
            keep = sorted(rng.choice(list(full.row_labels), size=k, replace=False))
            sub = full.restrict_rows(keep)
            if not tp.check_conditions(sub).satisfies_Pminus:
                continue
            filled = cp.complete(sub, [f"u{i}" for i in range(n - k)], seed=1)
            assert tp.check_conditions(filled).satisfies_P
            assert np.array_equal(filled.values[:k], sub.values)
            checked += 1
        assert checked > 100
