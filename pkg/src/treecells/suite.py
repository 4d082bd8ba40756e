"""A deterministic verification battery behind the ``suite`` CLI command.

Runs a reduced version of each property family on seeded inputs and reports
one case entry per family.  Given the same seed the report is byte-identical
across runs; the heavier exhaustive checks live in the test suite.
"""

from __future__ import annotations

import random
from fractions import Fraction

from . import puiseux
from .decompose import (
    PiecewiseFn,
    PiecewiseMonotoneMap,
    ResidueAffine,
    ResidueMap,
    ValuationOfDifference,
    decompose_locally_constant,
    locally_constant_restriction,
    value_group_normal_form,
)
from .finite_trees import (
    LeafMap,
    TreeGenParams,
    brute_force_locally_constant_partition,
    generate_good_tree,
)
from .trees import (
    Cone,
    LevelSet,
    Whole,
    c_relation,
    check_c_axioms,
    inf,
    region_contains,
)
from .tree_subsets import decompose_T_subset


def _case(name: str, ok: bool, detail: str) -> dict:
    return {"name": name, "status": "pass" if ok else "fail", "detail": detail}


def random_params(rng: random.Random, max_leaves: int) -> TreeGenParams:
    """Coherent random generator parameters: the leaf target always fits."""
    depth = rng.randint(1, 4)
    hi = rng.randint(2, 4)
    cap = min(max_leaves, hi**depth)
    leaves = rng.randint(2, cap) if cap >= 2 else 1
    return TreeGenParams(
        max_depth=depth,
        branching=(2, hi),
        leaves=leaves,
        seed=rng.randrange(2**32),
    )


def _axiom_cases(seed: int, count: int) -> dict:
    rng = random.Random(seed)
    checked = 0
    for _ in range(count):
        params = random_params(rng, 12)
        tree = generate_good_tree(params)
        report = check_c_axioms(tree)
        if not report.c_axioms_pass or report.result("D").passed:
            return _case("axioms", False, f"failure at params {params}")
        checked += 1
    return _case("axioms", True, f"{checked} seeded trees")


def _identity_cases(seed: int, count: int) -> dict:
    rng = random.Random(seed)
    for _ in range(count):
        tree = generate_good_tree(random_params(rng, 8))
        leaves = tree.leaf_refs()
        for a in leaves:
            for b in leaves:
                if a == b:
                    continue
                basis = inf(a, b)
                cone = Cone(basis, a)
                level = LevelSet(basis)
                for x in leaves:
                    if region_contains(cone, x) != c_relation(b, x, a):
                        return _case("identities", False, f"cone identity at {x}")
                    if region_contains(level, x) == c_relation(x, a, b):
                        return _case("identities", False, f"level identity at {x}")
    return _case("identities", True, f"{count} seeded trees")


def _decompose_cases(seed: int, count: int) -> dict:
    rng = random.Random(seed)
    done = 0
    for _ in range(count):
        tree = generate_good_tree(random_params(rng, 6))
        nodes = tree.real_nodes()
        table = LeafMap(
            tree, {leaf: rng.choice(nodes) for leaf in sorted(tree.leaves)}
        )
        table = locally_constant_restriction(table)
        if not table.mapping:
            continue
        f = PiecewiseFn.from_table(table)
        result = decompose_locally_constant(f)
        covered: set[int] = set(result.exceptional)
        for cell in result.cells:
            if covered & cell.leaves:
                return _case("decompose", False, "cells overlap")
            covered |= cell.leaves
        if covered != set(table.mapping):
            return _case("decompose", False, "cells miss domain points")
        oracle = brute_force_locally_constant_partition(table)
        if len(oracle) > len(result.cells):
            return _case("decompose", False, "oracle beats the partition size bound")
        done += 1
    return _case("decompose", True, f"{done} random leaf maps")


def _puiseux_cases(seed: int, count: int, precision: Fraction) -> dict:
    rng = random.Random(seed)
    for _ in range(count):
        x = puiseux.random_series(rng, precision)
        y = puiseux.random_series(rng, precision)
        if not x.is_zero_up_to_precision and not y.is_zero_up_to_precision:
            if puiseux.val(puiseux.mul(x, y)) != puiseux.val(x) + puiseux.val(y):
                return _case("puiseux", False, f"v(xy) at {x!r}, {y!r}")
        s = puiseux.add(x, y)
        if (
            not x.is_zero_up_to_precision
            and not y.is_zero_up_to_precision
            and puiseux.val(x) != puiseux.val(y)
        ):
            if puiseux.val(s) != min(puiseux.val(x), puiseux.val(y)):
                return _case("puiseux", False, f"ultrametric at {x!r}, {y!r}")
    return _case("puiseux", True, f"{count} sampled pairs")


def _vgroup_cases(seed: int, count: int, precision: Fraction) -> dict:
    rng = random.Random(seed)
    for _ in range(count):
        beta = puiseux.random_series(rng, precision, max_terms=2)
        u = Fraction(rng.choice([1, -1]) * rng.randint(1, 4), rng.randint(1, 3))
        v = Fraction(rng.randint(-5, 5))
        expr = ValuationOfDifference(beta, PiecewiseMonotoneMap.affine(u, v))
        f = PiecewiseFn(((whole_region_puiseux(precision), expr),))
        nf = value_group_normal_form(f)
        cell = nf.cells[0]
        for _ in range(20):
            x = puiseux.random_series(rng, precision)
            diff = puiseux.sub(x, beta)
            if diff.is_zero_up_to_precision:
                continue
            a = expr.post.apply(puiseux.val(diff))
            if cell.fiber_level(a) != puiseux.val(diff):
                return _case("vgroup-nf", False, f"fiber identity at {x!r}")
    return _case("vgroup-nf", True, f"{count} constructed functions")


def whole_region_puiseux(precision: Fraction) -> Whole:
    return Whole(root=puiseux.root_ball(precision))


def _residue_cases(seed: int, count: int, precision: Fraction) -> dict:
    rng = random.Random(seed)
    for _ in range(count):
        alpha = puiseux.random_series(rng, precision, max_terms=2)
        beta = puiseux.add(alpha, puiseux.monomial(rng.randint(-2, 3), rng.randint(1, 5), precision))
        h = ResidueMap.affine(Fraction(rng.randint(1, 5)), Fraction(rng.randint(-3, 3)))
        expr = ResidueAffine(alpha, beta, h)
        ball = expr.ball()
        for _ in range(20):
            offset = puiseux.random_series(rng, precision)
            x = puiseux.add(
                alpha,
                puiseux.mul(offset, puiseux.monomial(ball.radius, 1, precision)),
            )
            if not ball.contains(x):
                continue
            direct = expr.value_at(x)
            arg = puiseux.div(
                puiseux.sub(x, alpha), puiseux.sub(alpha, beta)
            )
            if direct != h.apply(puiseux.residue(arg)):
                return _case("residue-nf", False, f"identity at {x!r}")
    return _case("residue-nf", True, f"{count} constructed functions")


def _tsubset_cases(seed: int, count: int) -> dict:
    rng = random.Random(seed)
    for _ in range(count):
        tree = generate_good_tree(random_params(rng, 12))
        internal = tree.internal_nodes()
        if not internal:
            continue
        x = {n for n in internal if rng.random() < 0.5}
        cells = decompose_T_subset(tree, x)
        union: set[int] = set()
        for cell in cells:
            ext = {r.node for r in cell.extension()}
            if ext & union:
                return _case("t-subset", False, "cells overlap")
            union |= ext
        if union != x:
            return _case("t-subset", False, "extension union differs from the input")
    return _case("t-subset", True, f"{count} random subsets")


def run_suite(seed: int = 0, precision: Fraction = Fraction(16)) -> dict:
    cases = [
        _axiom_cases(seed + 1, 40),
        _identity_cases(seed + 2, 15),
        _decompose_cases(seed + 3, 40),
        _puiseux_cases(seed + 4, 300, precision),
        _vgroup_cases(seed + 5, 10, precision),
        _residue_cases(seed + 6, 10, precision),
        _tsubset_cases(seed + 7, 40),
    ]
    return {
        "seed": seed,
        "precision": str(precision),
        "cases": cases,
        "status": "pass" if all(c["status"] == "pass" for c in cases) else "fail",
    }
