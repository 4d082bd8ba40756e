"""Order-theoretic core: infima, the derived relation, regions, closures."""

import random

import pytest

import treecells as tc
from treecells import puiseux as px

from conftest import refs


def independent_inf(tree, a, b):
    """Cross-check oracle: deepest common node of the two root paths."""

    def path(n):
        out = []
        while n is not None:
            out.append(n)
            n = tree.parent[n]
        return out

    pa, pb = path(a), set(path(b))
    for n in pa:
        if n in pb:
            return n
    raise AssertionError("virtual root is always common")


class TestInf:
    def test_fixture_examples(self, fixture_a):
        a1, a2, a3 = refs(fixture_a, 3, 4, 6)
        assert tc.inf(a1, a2).node == 2
        assert tc.inf(a1, a3).node == 1
        assert tc.inf(a1, a1) == a1

    def test_commutative_associative(self, fixture_a):
        nodes = [fixture_a.ref(n) for n in fixture_a.nodes()]
        for a in nodes:
            for b in nodes:
                assert tc.inf(a, b) == tc.inf(b, a)
                for c in nodes:
                    assert tc.inf(tc.inf(a, b), c) == tc.inf(a, tc.inf(b, c))

    def test_against_independent_oracle(self):
        rng = random.Random(11)
        from treecells.suite import random_params

        for _ in range(30):
            tree = tc.generate_good_tree(random_params(rng, 12))
            nodes = tree.nodes()
            for _ in range(40):
                a, b = rng.choice(nodes), rng.choice(nodes)
                got = tc.inf(tree.ref(a), tree.ref(b)).node
                assert got == independent_inf(tree, a, b)

    def test_backend_mismatch(self, fixture_a):
        with pytest.raises(tc.BackendMismatchError):
            tc.inf(fixture_a.ref(3), px.monomial(1))
        other = tc.GoodTree({0: None, 1: 0}, [1])
        with pytest.raises(tc.BackendMismatchError):
            tc.inf(fixture_a.ref(3), other.ref(1))


class TestCRelation:
    def test_fixture_examples(self, fixture_a):
        a1, a2, a3 = refs(fixture_a, 3, 4, 6)
        assert tc.c_relation(a3, a1, a2) is True
        assert tc.c_relation(a1, a1, a2) is False
        assert tc.c_relation(a1, a3, a3) is True

    def test_requires_leaves(self, fixture_a):
        a1, a2 = refs(fixture_a, 3, 4)
        with pytest.raises(ValueError):
            tc.c_relation(fixture_a.ref(1), a1, a2)


class TestAxioms:
    def test_fixture_passes_c_fails_d(self, fixture_a):
        report = tc.check_c_axioms(fixture_a)
        assert report.c_axioms_pass
        d = report.result("D")
        assert not d.passed
        assert "finite model" in d.note

    def test_single_leaf(self):
        tree = tc.GoodTree({0: None, 1: 0}, [1])
        report = tc.check_c_axioms(tree)
        assert report.c_axioms_pass
        assert not report.result("D").passed

    def test_two_leaves(self):
        tree = tc.GoodTree({0: None, 1: 0, 2: 1, 3: 1}, [2, 3])
        assert tc.check_c_axioms(tree).c_axioms_pass

    def test_json_shape(self, fixture_a):
        data = tc.check_c_axioms(fixture_a).to_json()
        assert [r["axiom"] for r in data["results"]] == ["C1", "C2", "C3", "C4", "D"]


class TestRegions:
    def test_cone_members(self, fixture_a):
        r, a1 = refs(fixture_a, 1, 3)
        assert {x.node for x in tc.region_members(tc.Cone(r, a1))} == {3, 4}

    def test_level_set_members(self, fixture_a):
        r, a1 = refs(fixture_a, 1, 3)
        assert {x.node for x in tc.region_members(tc.LevelSet(r, (a1,)))} == {6, 7}

    def test_point_members(self, fixture_a):
        a3 = fixture_a.ref(6)
        assert tc.region_members(tc.Point(a3)) == frozenset({a3})

    def test_whole_members(self, fixture_a):
        whole = tc.whole_region(fixture_a)
        assert {x.node for x in tc.region_members(whole)} == {3, 4, 6, 7}

    def test_contains_cone(self, fixture_a):
        r, a1, a2 = refs(fixture_a, 1, 3, 4)
        assert tc.region_contains(tc.Cone(r, a1), a2)

    def test_interval_two_readings(self, fixture_a):
        r, u, a1, a2 = refs(fixture_a, 1, 2, 3, 4)
        interval = tc.Interval(r, a1)
        assert tc.region_contains(interval, u)  # internal node: tree reading
        assert tc.region_contains(interval, a2)  # leaf reading
        assert not tc.region_contains(interval, a1)

    def test_whole_contains(self, fixture_a):
        for n in fixture_a.leaves:
            assert tc.region_contains(tc.Whole(), fixture_a.ref(n))

    def test_invalid_regions(self, fixture_a):
        r, u, a1 = refs(fixture_a, 1, 2, 3)
        with pytest.raises(tc.RegionError):
            tc.Cone(a1, r)  # basis above witness
        with pytest.raises(tc.RegionError):
            tc.Interval(u, u)
        with pytest.raises(tc.RegionError):
            # bn(r) = 2, removing 2 cones leaves nothing to witness the level
            tc.LevelSet(r, (a1, fixture_a.ref(6)))

    def test_region_min(self, fixture_a):
        r, a1 = refs(fixture_a, 1, 3)
        assert tc.region_min(tc.Cone(r, a1)) == r
        assert tc.region_min(tc.Whole()) is None
        assert tc.region_min(tc.whole_region(fixture_a)).node == 0


class TestIdentities:
    """The two defining identities linking the relation to cones and levels."""

    def _trees(self):
        rng = random.Random(3)
        from treecells.suite import random_params

        return [tc.generate_good_tree(random_params(rng, 9)) for _ in range(25)]

    def test_cone_identity(self):
        for tree in self._trees():
            leaves = tree.leaf_refs()
            for a in leaves:
                for b in leaves:
                    if a == b:
                        continue
                    cone = tc.Cone(tc.inf(a, b), a)
                    for x in leaves:
                        assert tc.region_contains(cone, x) == tc.c_relation(b, x, a)

    def test_level_identity(self):
        for tree in self._trees():
            leaves = tree.leaf_refs()
            for a in leaves:
                for b in leaves:
                    level = (
                        tc.Point(a) if a == b else tc.LevelSet(tc.inf(a, b))
                    )
                    for x in leaves:
                        assert tc.region_contains(level, x) == (
                            not tc.c_relation(x, a, b)
                        )


class TestBranch:
    def test_fixture(self, fixture_a):
        assert [x.node for x in tc.branch(fixture_a.ref(3))] == [0, 1, 2]

    def test_single_leaf_tree(self):
        tree = tc.GoodTree({0: None, 1: 0}, [1])
        assert [x.node for x in tc.branch(tree.ref(1))] == [0]

    def test_puiseux_branch_query(self):
        chain = tc.branch(px.monomial(1))
        assert chain.at(2) == px.Ball(px.monomial(1), 2)

    def test_non_leaf_rejected(self, fixture_a):
        with pytest.raises(ValueError):
            tc.branch(fixture_a.ref(1))


class TestBranchingNumber:
    def test_fixture(self, fixture_a):
        assert tc.branching_number(fixture_a.ref(1)) == 2
        assert tc.branching_number(fixture_a.ref(2)) == 2

    def test_puiseux_infinite(self):
        assert tc.branching_number(px.Ball(px.zero(), 0)) == px.INFINITE_BRANCHING

    def test_leaf_rejected(self, fixture_a):
        with pytest.raises(ValueError):
            tc.branching_number(fixture_a.ref(3))


class TestInfClosure:
    def test_examples(self, fixture_a):
        a1, a2, a3 = refs(fixture_a, 3, 4, 6)
        assert {x.node for x in tc.inf_closure([a1, a3])} == {3, 6, 1}
        assert {x.node for x in tc.inf_closure([a1, a2, a3])} == {3, 4, 6, 2, 1}
        assert tc.inf_closure([a1]) == frozenset({a1})

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            tc.inf_closure([])

    def test_idempotent_monotone_bounded(self):
        rng = random.Random(23)
        from treecells.suite import random_params

        for _ in range(40):
            tree = tc.generate_good_tree(random_params(rng, 10))
            leaves = tree.leaf_refs()
            k = rng.randint(1, len(leaves))
            sample = rng.sample(leaves, k)
            closed = tc.inf_closure(sample)
            assert tc.inf_closure(closed) == closed
            assert len(closed) <= 2 * len(sample) - 1
            bigger = tc.inf_closure(leaves)
            assert closed <= bigger


class TestInducedCSet:
    def test_two_leaves(self, fixture_a):
        sub = tc.induced_c_set(refs(fixture_a, 3, 6))
        assert sub.leaves == frozenset({3, 6})
        assert len(sub.parent) == 4  # both leaves, their meet, virtual root

    def test_internal_antichain(self, fixture_a):
        sub = tc.induced_c_set(refs(fixture_a, 2, 5))
        assert sub.leaves == frozenset({2, 5})
        assert 1 in sub.parent  # the meet of u and w

    def test_singleton(self, fixture_a):
        sub = tc.induced_c_set([fixture_a.ref(3)])
        assert sub.leaves == frozenset({3})

    def test_axioms_pass_on_induced(self, fixture_a):
        sub = tc.induced_c_set(fixture_a.leaf_refs())
        assert tc.check_c_axioms(sub).c_axioms_pass

    def test_rejects_comparable(self, fixture_a):
        with pytest.raises(ValueError):
            tc.induced_c_set(refs(fixture_a, 1, 2))


class TestChainsAntichains:
    def test_examples(self, fixture_a):
        u, w, r = refs(fixture_a, 2, 5, 1)
        assert tc.is_antichain([u, w])
        assert tc.is_chain([r, u])
        assert not tc.is_antichain([r, u, w])
        assert not tc.is_chain([r, u, w])


class TestSplittingTree:
    def test_examples(self, fixture_a):
        a1, a2 = refs(fixture_a, 3, 4)
        assert {x.node for x in tc.splitting_tree([a1])} == {1, 2}
        assert tc.splitting_tree(fixture_a.leaf_refs()) == frozenset()
        assert {x.node for x in tc.splitting_tree([a1, a2])} == {1}

    def test_complement_symmetry(self, fixture_a):
        leaves = fixture_a.leaf_refs()
        for k in range(len(leaves) + 1):
            import itertools

            for subset in itertools.combinations(leaves, k):
                rest = [l for l in leaves if l not in subset]
                assert tc.splitting_tree(subset) == tc.splitting_tree(rest)


class TestSplittingNodesOnBranch:
    def test_examples(self, fixture_a):
        a1, a2, a3 = refs(fixture_a, 3, 4, 6)
        assert {x.node for x in tc.splitting_nodes_on_branch([a1, a3], a2)} == {1}
        assert tc.splitting_nodes_on_branch([], a2) == frozenset()
        assert tc.splitting_nodes_on_branch([a1], a2) == frozenset()

    def test_brute_force_agreement(self, fixture_a):
        # direct evaluation of both intersections along the branch
        tree = fixture_a
        sset = {3, 6}
        alpha = 4
        expected = set()
        for a in [0, 1, 2]:
            lam = tree.leaves_above(a) if a else tree.leaves
            child = alpha
            while tree.parent[child] != a:
                child = tree.parent[child]
            co_cone = set(lam) - set(tree.leaves_above(child))
            if co_cone & sset and co_cone - sset:
                expected.add(a)
        got = {x.node for x in tc.splitting_nodes_on_branch(refs(tree, 3, 6), tree.ref(4))}
        assert got == expected == {1}

    def test_contained_in_splitting_tree(self):
        rng = random.Random(7)
        from treecells.suite import random_params

        for _ in range(30):
            tree = tc.generate_good_tree(random_params(rng, 10))
            leaves = tree.leaf_refs()
            subset = [l for l in leaves if rng.random() < 0.5]
            split = tc.splitting_tree(subset)
            for alpha in leaves:
                if alpha in subset:
                    continue
                nodes = tc.splitting_nodes_on_branch(subset, alpha)
                branch = set(tc.branch(alpha))
                assert nodes <= split & branch


class TestPredecessorsInClosure:
    def test_examples(self, fixture_a):
        a1, a2, a3 = refs(fixture_a, 3, 4, 6)
        assert tc.predecessors_in_closure([a1, a2]) == frozenset({a1, a2})
        assert tc.predecessors_in_closure([a1]) == frozenset()
        assert tc.predecessors_in_closure([a1, a3]) == frozenset({a1, a3})


class TestSerialization:
    def test_tree_json_roundtrip(self, fixture_a):
        data = fixture_a.to_json()
        back = tc.GoodTree.from_json(data)
        assert back.to_json() == data

    def test_dot_has_leaf_boxes(self, fixture_a):
        dot = fixture_a.to_dot()
        assert 'n3 [label="3", shape=box]' in dot
        assert 'n1 [label="1", shape=ellipse]' in dot

    def test_region_json_roundtrip(self, fixture_a):
        from treecells.trees import region_from_json, region_to_json

        r, a1 = refs(fixture_a, 1, 3)
        for region in (
            tc.Point(a1),
            tc.Cone(r, a1),
            tc.Interval(r, a1),
            tc.LevelSet(r, (a1,)),
            tc.whole_region(fixture_a),
        ):
            data = region_to_json(region)
            assert region_to_json(region_from_json(data, fixture_a)) == data


class TestGoodTreeInvariants:
    def test_rejects_multiple_roots(self):
        with pytest.raises(ValueError):
            tc.GoodTree({0: None, 1: None}, [0, 1])

    def test_rejects_node_above_leaf(self):
        with pytest.raises(ValueError):
            tc.GoodTree({0: None, 1: 0, 2: 1}, [1, 2])

    def test_rejects_cycle(self):
        with pytest.raises(ValueError):
            tc.GoodTree({0: None, 1: 2, 2: 1}, [1])

    def test_rejects_barren_internal_node(self):
        with pytest.raises(ValueError):
            tc.GoodTree({0: None, 1: 0, 2: 1}, [])
