"""Generation, canonical codes, automorphisms, C-isomorphisms, the oracle."""

import itertools
import random

import pytest

import treecells as tc
from treecells.suite import random_params

from conftest import refs


def brute_force_isomorphic(t1, n1, t2, n2, l1=None, l2=None) -> bool:
    """Backtracking order-isomorphism test, independent of hashing."""
    l1 = l1 or {}
    l2 = l2 or {}
    if l1.get(n1, "") != l2.get(n2, ""):
        return False
    if t1.is_leaf(n1) != t2.is_leaf(n2):
        return False
    c1, c2 = t1.children[n1], t2.children[n2]
    if len(c1) != len(c2):
        return False
    for perm in itertools.permutations(c2):
        if all(
            brute_force_isomorphic(t1, a, t2, b, l1, l2) for a, b in zip(c1, perm)
        ):
            return True
    return not c1


def brute_force_transitive(antichain) -> bool:
    """Permutation search for relation-preserving bijections of the antichain."""
    members = sorted(antichain, key=lambda r: r.node)

    def c(x, y, z):
        return tc.lt(tc.inf(x, y), tc.inf(y, z))

    def preserves(perm):
        mapping = dict(zip(members, perm))
        return all(
            c(x, y, z) == c(mapping[x], mapping[y], mapping[z])
            for x in members
            for y in members
            for z in members
        )

    reachable = {members[0]}
    for perm in itertools.permutations(members):
        if preserves(perm):
            reachable |= {dict(zip(members, perm))[members[0]]}
    return reachable == set(members)


class TestGenerator:
    def test_forced_shape_matches_fixture(self, fixture_a):
        params = tc.TreeGenParams(max_depth=2, branching=(2, 2), leaves=4, seed=7)
        tree = tc.generate_good_tree(params)
        assert tc.canonical_form(tree) == tc.canonical_form(fixture_a)

    def test_single_leaf(self):
        tree = tc.generate_good_tree(
            tc.TreeGenParams(max_depth=0, branching=(2, 2), leaves=1, seed=0)
        )
        assert len(tree.leaves) == 1
        assert len(tree.parent) == 2

    def test_determinism(self):
        params = tc.TreeGenParams(max_depth=3, branching=(2, 4), leaves=9, seed=99)
        a = tc.generate_good_tree(params)
        b = tc.generate_good_tree(params)
        assert a.to_json() == b.to_json()

    def test_leaf_target_met_and_axioms_hold(self):
        rng = random.Random(1)
        for _ in range(50):
            params = random_params(rng, 14)
            tree = tc.generate_good_tree(params)
            assert len(tree.leaves) == params.leaves
            assert tc.check_c_axioms(tree).c_axioms_pass

    def test_unsatisfiable_params(self):
        with pytest.raises(tc.UnsatisfiableParamsError):
            tc.TreeGenParams(max_depth=2, branching=(2, 2), leaves=0, seed=0)
        with pytest.raises(tc.UnsatisfiableParamsError):
            tc.generate_good_tree(
                tc.TreeGenParams(max_depth=2, branching=(2, 2), leaves=9, seed=0)
            )
        with pytest.raises(tc.UnsatisfiableParamsError):
            tc.TreeGenParams(max_depth=2, branching=(1, 2), leaves=2, seed=0)


class TestCanonicalForm:
    def test_permuting_symmetric_leaves_keeps_code(self, fixture_a):
        # swapping the two leaves under one node relabels nothing structural
        permuted = tc.GoodTree(
            {0: None, 1: 0, 2: 1, 4: 2, 3: 2, 5: 1, 6: 5, 7: 5}, [4, 3, 6, 7]
        )
        assert tc.canonical_form(fixture_a) == tc.canonical_form(permuted)

    def test_path_tree_differs(self, fixture_a):
        path = tc.GoodTree({0: None, 1: 0, 2: 1, 3: 2, 4: 2, 5: 3, 6: 3}, [4, 5, 6])
        assert tc.canonical_form(fixture_a) != tc.canonical_form(path)

    def test_labels_change_code(self, fixture_a):
        assert tc.canonical_form(fixture_a, labels={3: "*"}) != tc.canonical_form(
            fixture_a
        )

    def test_agrees_with_brute_force(self):
        rng = random.Random(77)
        trees = [tc.generate_good_tree(random_params(rng, 7)) for _ in range(16)]
        for t1 in trees:
            for t2 in trees:
                expected = brute_force_isomorphic(
                    t1, t1.virtual_root, t2, t2.virtual_root
                )
                assert (tc.canonical_form(t1) == tc.canonical_form(t2)) == expected


class TestAutomorphismTransitive:
    def test_fixture_leaves(self, fixture_a):
        assert tc.automorphism_transitive(fixture_a.leaf_refs())

    def test_uneven_depths(self):
        tree = tc.GoodTree({0: None, 1: 0, 2: 1, 3: 2, 4: 2, 5: 1}, [3, 4, 5])
        assert not tc.automorphism_transitive(tree.leaf_refs())

    def test_singleton(self, fixture_a):
        assert tc.automorphism_transitive([fixture_a.ref(3)])

    def test_agrees_with_brute_force(self):
        rng = random.Random(5)
        for _ in range(30):
            tree = tc.generate_good_tree(random_params(rng, 7))
            leaves = tree.leaf_refs()
            k = rng.randint(1, len(leaves))
            antichain = rng.sample(leaves, k)
            assert tc.automorphism_transitive(antichain) == brute_force_transitive(
                antichain
            )


class TestCIsomorphism:
    def test_identity(self, fixture_a):
        identity = tc.LeafMap(fixture_a, {n: n for n in fixture_a.leaves})
        assert tc.is_c_isomorphism(identity, tc.whole_region(fixture_a))

    def test_identity_on_generated_trees(self):
        rng = random.Random(31)
        for _ in range(20):
            tree = tc.generate_good_tree(random_params(rng, 10))
            identity = tc.LeafMap(tree, {n: n for n in tree.leaves})
            assert tc.is_c_isomorphism(identity, tc.whole_region(tree))

    def test_collapse_not_injective(self, fixture_a):
        collapse = tc.LeafMap(fixture_a, {3: 3, 4: 3, 6: 6, 7: 7})
        assert not tc.is_c_isomorphism(collapse, tc.whole_region(fixture_a))

    def test_swap_preserves(self, fixture_a):
        swap = tc.LeafMap(fixture_a, {3: 4, 4: 3, 6: 6, 7: 7})
        assert tc.is_c_isomorphism(swap, tc.whole_region(fixture_a))

    def test_non_antichain_image_rejected(self, fixture_a):
        bad = tc.LeafMap(fixture_a, {3: 1, 4: 2, 6: 6, 7: 7})
        with pytest.raises(ValueError):
            tc.is_c_isomorphism(bad, tc.whole_region(fixture_a))


class TestIncomparableChains:
    def test_symmetric_pair(self, fixture_a):
        u, w = refs(fixture_a, 2, 5)
        assert tc.is_incomparable_chain_set([[u], [w]])

    def test_comparable_elements_fail(self, fixture_a):
        r, u = refs(fixture_a, 1, 2)
        assert not tc.is_incomparable_chain_set([[r], [u]])

    def test_singleton_family_vacuous(self, fixture_a):
        r, u = refs(fixture_a, 1, 2)
        assert tc.is_incomparable_chain_set([[r, u]])

    def test_empty_family_rejected(self):
        with pytest.raises(ValueError):
            tc.is_incomparable_chain_set([])

    def test_symmetric_triple(self):
        tree = tc.GoodTree(
            {0: None, 1: 0, 2: 1, 3: 2, 4: 2, 5: 1, 6: 5, 7: 5, 8: 1, 9: 8, 10: 8},
            [3, 4, 6, 7, 9, 10],
        )
        u, w, v = refs(tree, 2, 5, 8)
        assert tc.is_incomparable_chain_set([[u], [w], [v]])

    def test_skewed_infima_fail_antichain_condition(self, fixture_a):
        # leaves taken two from one side, one from the other: the pairwise
        # infima of the endpoints are comparable, so (b) fails
        a1, a2, a3 = refs(fixture_a, 3, 4, 6)
        assert not tc.is_incomparable_chain_set([[a1], [a2], [a3]])


class TestBruteForceOracle:
    def test_parent_map_single_part(self, fixture_a):
        parent_map = tc.LeafMap(fixture_a, {3: 2, 4: 2, 6: 5, 7: 5})
        parts = tc.brute_force_locally_constant_partition(parent_map)
        assert parts == [frozenset({3, 4, 6, 7})]

    def test_constant_single_part(self, fixture_a):
        constant = tc.LeafMap(fixture_a, {3: 1, 4: 1, 6: 1, 7: 1})
        assert len(tc.brute_force_locally_constant_partition(constant)) == 1

    def test_chain_image_single_part(self, fixture_a):
        chain_valued = tc.LeafMap(fixture_a, {3: 2, 4: 2, 6: 1, 7: 1})
        parts = tc.brute_force_locally_constant_partition(chain_valued)
        assert len(parts) == 1

    def test_mixed_image_needs_two_parts(self, fixture_a):
        # image {u, w, r}: u,w incomparable, r below both
        mixed = tc.LeafMap(fixture_a, {3: 2, 4: 5, 6: 1, 7: 1})
        parts = tc.brute_force_locally_constant_partition(mixed)
        assert len(parts) == 2

    def test_parts_partition_domain(self, fixture_a):
        rng = random.Random(17)
        nodes = fixture_a.real_nodes()
        for _ in range(25):
            table = tc.LeafMap(
                fixture_a, {n: rng.choice(nodes) for n in fixture_a.leaves}
            )
            parts = tc.brute_force_locally_constant_partition(table)
            union = set()
            for p in parts:
                assert not (p & union)
                union |= p
            assert union == fixture_a.leaves


class TestLeafMapSerialization:
    def test_roundtrip(self, fixture_a):
        table = tc.LeafMap(fixture_a, {3: 2, 4: 2, 6: 5, 7: 5})
        data = table.to_json()
        assert tc.LeafMap.from_json(fixture_a, data).mapping == table.mapping
