"""Decomposition of locally constant tree-valued functions.

The centerpiece is :func:`decompose_locally_constant`: the domain of a
locally constant function into the canonical tree splits into cells whose
images are antichains or chains.  The algorithm follows the structure of the
underlying proof: compute the constancy basis g of every point, classify the
fiber shapes (a union of r cones at g, or an m-level set at g), group the
domain by shape, then resolve each group through antichain strata or through
a partition into families of indistinguishable chains.

Around it sit the factoring results (through a branch, through the cones at
a node) and the two valued-field normal forms (value group and residue),
which operate on a closed expression grammar: finite tables, constants,
valuation-of-difference expressions and residue-affine expressions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from . import puiseux
from .finite_trees import LeafMap, is_incomparable_chain_set
from .puiseux import Ball, PuiseuxBranch, Series
from .trees import (
    Cone,
    FiniteNode,
    GoodTree,
    Interval,
    LevelSet,
    NodeRef,
    Region,
    Whole,
    _c_rel_nodes,
    inf,
    is_antichain,
    is_chain,
    leafset_to_regions,
    leq,
    lt,
    refs_equal,
    region_contains,
    region_from_json,
    region_members,
    region_min,
    region_to_json,
    ref_from_json,
    ref_to_json,
    sort_key,
    whole_region,
)


class NotLocallyConstantError(ValueError):
    def __init__(self, message: str, witness=None):
        super().__init__(message)
        self.witness = witness


class ResidueMapError(ValueError):
    """Raised when a residue map cannot answer a query without root solving."""


@dataclass(frozen=True)
class ResidueMap:
    """A definable self-map of the residue field.

    Either a finite table of input/output pairs or a rational function given
    by ascending-degree coefficient tuples.  Rational maps evaluate anywhere
    the denominator does not vanish; preimage counting is only offered for
    tables and affine maps, since anything further would need root solving.
    """

    table: tuple[tuple[Fraction, Fraction], ...] | None = None
    num: tuple[Fraction, ...] | None = None
    den: tuple[Fraction, ...] | None = None

    def __post_init__(self):
        if (self.table is None) == (self.num is None):
            raise ValueError("a residue map is a table or a rational function")
        if self.num is not None and (self.den is None or all(c == 0 for c in self.den)):
            raise ValueError("rational maps need a nonzero denominator")

    @classmethod
    def from_table(cls, entries: dict) -> "ResidueMap":
        table = tuple(sorted((Fraction(k), Fraction(v)) for k, v in entries.items()))
        return cls(table=table)

    @classmethod
    def rational(cls, num, den=(1,)) -> "ResidueMap":
        return cls(
            num=tuple(Fraction(c) for c in num),
            den=tuple(Fraction(c) for c in den),
        )

    @classmethod
    def identity(cls) -> "ResidueMap":
        return cls.rational((0, 1))

    @classmethod
    def affine(cls, u, v) -> "ResidueMap":
        return cls.rational((v, u))

    @classmethod
    def negation(cls) -> "ResidueMap":
        return cls.rational((0, -1))

    @classmethod
    def constant(cls, c) -> "ResidueMap":
        return cls.rational((c,))

    def _poly(self, coeffs: tuple[Fraction, ...], u: Fraction) -> Fraction:
        acc = Fraction(0)
        for c in reversed(coeffs):
            acc = acc * u + c
        return acc

    def apply(self, u: Fraction) -> Fraction:
        if self.table is not None:
            for k, v in self.table:
                if k == u:
                    return v
            raise ResidueMapError(f"table has no entry at {u}")
        d = self._poly(self.den, u)  # type: ignore[arg-type]
        if d == 0:
            raise ResidueMapError(f"denominator vanishes at {u}")
        return self._poly(self.num, u) / d  # type: ignore[arg-type]

    def _degrees(self) -> tuple[int, int]:
        def deg(coeffs):
            d = -1
            for i, c in enumerate(coeffs):
                if c != 0:
                    d = i
            return d

        return deg(self.num), deg(self.den)  # type: ignore[arg-type]

    @property
    def is_constant(self) -> bool:
        if self.table is not None:
            return len({v for _, v in self.table}) <= 1
        dn, dd = self._degrees()
        return dn <= 0 and dd <= 0

    def constant_value(self) -> Fraction:
        if not self.is_constant:
            raise ValueError("map is not constant")
        if self.table is not None:
            return self.table[0][1]
        num0 = self.num[0] if self.num else Fraction(0)  # type: ignore[index]
        return num0 / self.den[0]  # type: ignore[index]

    def preimage_count(self, value: Fraction) -> int:
        if self.table is not None:
            return sum(1 for _, v in self.table if v == value)
        dn, dd = self._degrees()
        if dn <= 1 and dd <= 0:
            if dn == 1:
                return 1
            return 0 if self._poly(self.num, Fraction(0)) != value else 1  # type: ignore[arg-type]
        raise ResidueMapError("preimage counting needs a table or an affine map")

    def scaled(self, c: Fraction) -> "ResidueMap":
        """The precomposition u -> self(c * u)."""
        if c == 0:
            raise ValueError("scaling factor must be a unit")
        if self.table is not None:
            return ResidueMap(
                table=tuple(sorted((k / c, v) for k, v in self.table))
            )
        num = tuple(a * c**i for i, a in enumerate(self.num))  # type: ignore[arg-type]
        den = tuple(a * c**i for i, a in enumerate(self.den))  # type: ignore[arg-type]
        return ResidueMap(num=num, den=den)

    def to_json(self) -> dict:
        if self.table is not None:
            return {
                "kind": "table",
                "entries": [[str(k), str(v)] for k, v in self.table],
            }
        return {
            "kind": "rational",
            "num": [str(c) for c in self.num],  # type: ignore[union-attr]
            "den": [str(c) for c in self.den],  # type: ignore[union-attr]
        }

    @classmethod
    def from_json(cls, data: dict) -> "ResidueMap":
        if data["kind"] == "table":
            return cls(
                table=tuple(
                    sorted((Fraction(k), Fraction(v)) for k, v in data["entries"])
                )
            )
        return cls.rational(
            [Fraction(c) for c in data["num"]], [Fraction(c) for c in data["den"]]
        )


# ---------------------------------------------------------------------------
# Monotone maps on the value group


@dataclass(frozen=True)
class MapPiece:
    """One piece of a piecewise map on rationals: affine u*a+v, or constant v.

    The piece applies on the half-open window [lo, hi); ``None`` means
    unbounded.  ``u`` is ``None`` for constant pieces and nonzero otherwise.
    """

    lo: Fraction | None
    hi: Fraction | None
    u: Fraction | None
    v: Fraction

    def __post_init__(self):
        if self.u is not None and self.u == 0:
            raise ValueError("affine pieces need a nonzero slope")

    def contains(self, a: Fraction) -> bool:
        if self.lo is not None and a < self.lo:
            return False
        if self.hi is not None and a >= self.hi:
            return False
        return True

    def apply(self, a: Fraction) -> Fraction:
        if self.u is None:
            return self.v
        return self.u * a + self.v

    @property
    def is_constant(self) -> bool:
        return self.u is None


@dataclass(frozen=True)
class PiecewiseMonotoneMap:
    pieces: tuple[MapPiece, ...]

    def __post_init__(self):
        spans = sorted(
            self.pieces, key=lambda p: (0, 0) if p.lo is None else (1, p.lo)
        )
        for a, b in zip(spans, spans[1:]):
            if a.hi is None or (b.lo is not None and a.hi > b.lo):
                raise ValueError("map pieces must cover disjoint windows")

    @classmethod
    def identity(cls) -> "PiecewiseMonotoneMap":
        return cls((MapPiece(None, None, Fraction(1), Fraction(0)),))

    @classmethod
    def affine(cls, u, v) -> "PiecewiseMonotoneMap":
        return cls((MapPiece(None, None, Fraction(u), Fraction(v)),))

    def piece_at(self, a: Fraction) -> MapPiece:
        for p in self.pieces:
            if p.contains(a):
                return p
        raise ValueError(f"no map piece covers {a}")

    def apply(self, a: Fraction) -> Fraction:
        return self.piece_at(a).apply(a)

    def to_json(self) -> dict:
        out = []
        for p in self.pieces:
            entry: dict = {
                "lo": None if p.lo is None else str(p.lo),
                "hi": None if p.hi is None else str(p.hi),
            }
            if p.u is None:
                entry["kind"] = "const"
                entry["value"] = str(p.v)
            else:
                entry["kind"] = "affine"
                entry["u"] = str(p.u)
                entry["v"] = str(p.v)
            out.append(entry)
        return {"pieces": out}

    @classmethod
    def from_json(cls, data: dict) -> "PiecewiseMonotoneMap":
        pieces = []
        for entry in data["pieces"]:
            lo = None if entry["lo"] is None else Fraction(entry["lo"])
            hi = None if entry["hi"] is None else Fraction(entry["hi"])
            if entry["kind"] == "const":
                pieces.append(MapPiece(lo, hi, None, Fraction(entry["value"])))
            else:
                pieces.append(MapPiece(lo, hi, Fraction(entry["u"]), Fraction(entry["v"])))
        return cls(tuple(pieces))


# ---------------------------------------------------------------------------
# Expression grammar


@dataclass(frozen=True)
class ConstExpr:
    """A constant node value on the piece."""

    node: NodeRef


@dataclass(frozen=True)
class TableExpr:
    """An explicit finite table (finite backend)."""

    table: LeafMap


@dataclass(frozen=True)
class ValuationOfDifference:
    """x maps to the ball around beta of radius post(v(x - beta)).

    The computable stand-in for definable functions into a branch / the
    value group.
    """

    beta: Series
    post: PiecewiseMonotoneMap

    def ball_at(self, x: Series) -> Ball:
        v = puiseux.val(puiseux.sub(x, self.beta))
        if isinstance(v, puiseux.UnknownValuation):
            raise puiseux.PrecisionError("argument is indistinguishable from beta")
        return Ball(self.beta, self.post.apply(v))


@dataclass(frozen=True)
class ResidueAffine:
    """x maps to h(residue((x - alpha)/(alpha - beta))), a residue-field value."""

    alpha: Series
    beta: Series
    h: "ResidueMap"

    @property
    def scale_valuation(self) -> Fraction:
        v = puiseux.val(puiseux.sub(self.alpha, self.beta))
        if isinstance(v, puiseux.UnknownValuation):
            raise puiseux.PrecisionError("alpha and beta are indistinguishable")
        return v

    def ball(self) -> Ball:
        """The closed ball on which the expression reads one residue digit."""
        return Ball(self.alpha, self.scale_valuation)

    def value_at(self, x: Series) -> Fraction:
        arg = puiseux.div(
            puiseux.sub(x, self.alpha), puiseux.sub(self.alpha, self.beta)
        )
        return self.h.apply(puiseux.residue(arg))


Expr = ConstExpr | TableExpr | ValuationOfDifference | ResidueAffine


@dataclass(frozen=True)
class PiecewiseFn:
    """A definable function given by finitely many (region, expression) pieces."""

    pieces: tuple[tuple[Region, Expr], ...]

    def __post_init__(self):
        if not self.pieces:
            raise ValueError("a piecewise function needs at least one piece")
        if self.backend == "finite":
            seen: set[int] = set()
            for region, expr in self.pieces:
                members = {r.node for r in region_members(region)}
                if members & seen:
                    raise ValueError("piece domains overlap")
                seen |= members
                if isinstance(expr, TableExpr):
                    missing = members - set(expr.table.mapping)
                    if missing:
                        raise ValueError(f"table misses leaves {sorted(missing)}")

    @property
    def backend(self) -> str:
        region, expr = self.pieces[0]
        if isinstance(expr, (ValuationOfDifference, ResidueAffine)):
            return "puiseux"
        if isinstance(expr, ConstExpr) and not isinstance(expr.node, FiniteNode):
            return "puiseux"
        anchor = region_min(region)
        return "finite" if isinstance(anchor, FiniteNode) or anchor is None else "puiseux"

    @property
    def tree(self) -> GoodTree:
        for region, expr in self.pieces:
            if isinstance(expr, TableExpr):
                return expr.table.tree
            anchor = region_min(region)
            if isinstance(anchor, FiniteNode):
                return anchor.tree
            if isinstance(expr, ConstExpr) and isinstance(expr.node, FiniteNode):
                return expr.node.tree
        raise ValueError("no finite tree behind this function")

    def domain_leaves(self) -> frozenset[int]:
        out: set[int] = set()
        for region, _ in self.pieces:
            out |= {r.node for r in region_members(region)}
        return frozenset(out)

    def leaf_mapping(self) -> dict[int, NodeRef]:
        """The explicit leaf-to-value table of a finite-backend function."""
        tree = self.tree
        out: dict[int, NodeRef] = {}
        for region, expr in self.pieces:
            for ref in region_members(region):
                if isinstance(expr, ConstExpr):
                    out[ref.node] = expr.node
                elif isinstance(expr, TableExpr):
                    out[ref.node] = FiniteNode(tree, expr.table.mapping[ref.node])
                else:
                    raise ValueError("symbolic expression on the finite backend")
        return out

    def piece_at(self, x: NodeRef) -> tuple[Region, Expr]:
        for region, expr in self.pieces:
            if region_contains(region, x):
                return region, expr
        raise ValueError("argument outside the domain")

    def evaluate(self, x: NodeRef):
        _, expr = self.piece_at(x)
        if isinstance(expr, ConstExpr):
            return expr.node
        if isinstance(expr, TableExpr):
            return expr.table.value_ref(x.node)  # type: ignore[union-attr]
        if isinstance(expr, ValuationOfDifference):
            return expr.ball_at(x)  # type: ignore[arg-type]
        return expr.value_at(x)  # type: ignore[arg-type]

    @classmethod
    def from_table(cls, table: LeafMap, region: Region | None = None) -> "PiecewiseFn":
        """Wrap a leaf map; the domain regions are derived from its support."""
        if region is not None:
            return cls(((region, TableExpr(table)),))
        if table.domain == table.tree.leaves:
            return cls(((whole_region(table.tree), TableExpr(table)),))
        regions = leafset_to_regions(table.tree, table.domain)
        pieces = tuple(
            (r, TableExpr(table.restrict({m.node for m in region_members(r)})))
            for r in regions
        )
        return cls(pieces)

    def to_json(self) -> dict:
        out = []
        for region, expr in self.pieces:
            if isinstance(expr, ConstExpr):
                e = {"kind": "const", "node": ref_to_json(expr.node)}
            elif isinstance(expr, TableExpr):
                e = {"kind": "table", **expr.table.to_json()}
            elif isinstance(expr, ValuationOfDifference):
                e = {
                    "kind": "vdiff",
                    "beta": puiseux.series_to_json(expr.beta),
                    "post": expr.post.to_json(),
                }
            else:
                e = {
                    "kind": "resaffine",
                    "alpha": puiseux.series_to_json(expr.alpha),
                    "beta": puiseux.series_to_json(expr.beta),
                    "h": expr.h.to_json(),
                }
            out.append({"domain": region_to_json(region), "expr": e})
        return {"pieces": out}

    @classmethod
    def from_json(cls, data: dict, tree: GoodTree | None = None) -> "PiecewiseFn":
        pieces = []
        for entry in data["pieces"]:
            region = region_from_json(entry["domain"], tree)
            e = entry["expr"]
            kind = e["kind"]
            if kind == "const":
                expr: Expr = ConstExpr(ref_from_json(e["node"], tree))
            elif kind == "table":
                if tree is None:
                    raise ValueError("table expressions need a tree")
                expr = TableExpr(LeafMap.from_json(tree, e))
            elif kind == "vdiff":
                expr = ValuationOfDifference(
                    puiseux.series_from_json(e["beta"]),
                    PiecewiseMonotoneMap.from_json(e["post"]),
                )
            elif kind == "resaffine":
                expr = ResidueAffine(
                    puiseux.series_from_json(e["alpha"]),
                    puiseux.series_from_json(e["beta"]),
                    ResidueMap.from_json(e["h"]),
                )
            else:
                raise ValueError(f"unknown expression kind {kind!r}")
            pieces.append((region, expr))
        return cls(tuple(pieces))


# ---------------------------------------------------------------------------
# Finite-backend analysis: constancy bases, fiber blocks, shapes


@dataclass(frozen=True)
class FiberShape:
    """The shape of a constancy fiber at its basis.

    ``kind`` is "cones" (a union of ``count`` cones at the basis, fewer than
    the removed ones) or "level" (everything above the basis with ``count``
    cones removed).  Witnesses name one member per counted cone.
    """

    kind: str
    count: int | float
    basis: NodeRef
    witnesses: tuple[NodeRef, ...] = ()

    @property
    def key(self):
        return (self.kind, self.count)


@dataclass(frozen=True)
class _Block:
    leaves: frozenset[int]
    basis: FiniteNode
    value: NodeRef
    shape: FiberShape


def _cone_of_leaf_at(tree: GoodTree, basis: int, leaf: int) -> frozenset[int]:
    child = leaf
    while tree.parent[child] != basis:
        child = tree.parent[child]  # type: ignore[assignment]
    return tree.leaves_above(child)


def _constancy_basis_finite(
    tree: GoodTree, mapping: dict[int, NodeRef], leaf: int
) -> int:
    """The lowest node whose cone toward the leaf sits in the domain with one value."""
    dom = set(mapping)
    value = mapping[leaf]
    child = leaf
    basis = tree.parent[leaf]
    assert basis is not None
    while True:
        above = tree.parent[basis]
        if above is None:
            break
        cone = tree.leaves_above(basis)
        if cone <= dom and all(refs_equal(mapping[l], value) for l in cone):
            child, basis = basis, above
        else:
            break
    return basis


def _classify(r: int | float, m: int) -> tuple[str, int | float]:
    if m == 0:
        return ("level", 0)
    if r <= m:
        return ("cones", r)
    return ("level", m)


def _blocks_finite(tree: GoodTree, mapping: dict[int, NodeRef]) -> list[_Block]:
    dom = set(mapping)
    basis_of = {leaf: _constancy_basis_finite(tree, mapping, leaf) for leaf in dom}
    grouped: dict[tuple, list[int]] = {}
    for leaf in sorted(dom):
        key = (basis_of[leaf], sort_key(mapping[leaf]))
        grouped.setdefault(key, []).append(leaf)
    blocks = []
    for (basis, _), leaves in sorted(grouped.items()):
        block_leaves = frozenset(leaves)
        in_witness, out_witness = [], []
        for c in tree.children[basis]:
            cone = tree.leaves_above(c)
            if cone <= block_leaves:
                in_witness.append(min(cone))
            else:
                out_witness.append(min(cone))
        kind, count = _classify(len(in_witness), len(out_witness))
        chosen = in_witness if kind == "cones" else out_witness
        shape = FiberShape(
            kind,
            count,
            FiniteNode(tree, basis),
            tuple(FiniteNode(tree, w) for w in chosen),
        )
        blocks.append(
            _Block(block_leaves, FiniteNode(tree, basis), mapping[leaves[0]], shape)
        )
    return blocks


def constancy_basis(f: PiecewiseFn, alpha: NodeRef) -> NodeRef:
    """The basis of the maximal cone inside dom(f) around alpha where f is constant.

    Returns the virtual root (the -infinity element) when f is constant on
    the whole space.
    """
    if f.backend == "finite":
        tree = f.tree
        mapping = f.leaf_mapping()
        if alpha.node not in mapping:  # type: ignore[union-attr]
            raise ValueError("point outside the domain")
        return FiniteNode(tree, _constancy_basis_finite(tree, mapping, alpha.node))  # type: ignore[union-attr]
    region, expr = f.piece_at(alpha)
    basis = _symbolic_constancy_basis(region, expr, alpha)  # type: ignore[arg-type]
    return basis


def _region_cone_basis(region: Region, alpha: Series) -> Ball:
    """The basis of the largest cone around alpha inside a Puiseux region."""
    if isinstance(region, Whole):
        return puiseux.root_ball(alpha.precision)
    if isinstance(region, Cone):
        return region.basis  # type: ignore[return-value]
    if isinstance(region, LevelSet):
        return region.basis  # type: ignore[return-value]
    if isinstance(region, Interval):
        m = inf(alpha, region.high)
        if isinstance(m, Series):
            raise ValueError("interval witness is not separated from the point")
        return m
    raise NotLocallyConstantError(
        "no cone of constancy exists at an isolated point", witness=alpha
    )


def _deeper(a: Ball, b: Ball) -> Ball:
    return b if puiseux.ball_le(a, b) else a


def _symbolic_constancy_basis(region: Region, expr, alpha: Series) -> Ball:
    if isinstance(expr, ConstExpr):
        return _region_cone_basis(region, alpha)
    if isinstance(expr, ValuationOfDifference):
        w = puiseux.val(puiseux.sub(alpha, expr.beta))
        if isinstance(w, puiseux.UnknownValuation):
            raise puiseux.PrecisionError("point indistinguishable from beta")
        piece = expr.post.piece_at(w)
        if piece.is_constant:
            lo = piece.lo
            if lo is None:
                basis = _region_cone_basis(region, alpha)
            else:
                basis = Ball(alpha, lo)
        else:
            basis = Ball(alpha, w)
        return _deeper(basis, _region_cone_basis(region, alpha))
    if isinstance(expr, ResidueAffine):
        if expr.h.is_constant:
            basis = _region_cone_basis(region, alpha)
        else:
            basis = Ball(alpha, expr.scale_valuation)
        return _deeper(basis, _region_cone_basis(region, alpha))
    raise ValueError("finite tables have no symbolic basis")


def fiber_shape(f: PiecewiseFn, alpha: NodeRef) -> FiberShape:
    """Classify the fiber of f through alpha at the constancy basis."""
    if f.backend == "finite":
        tree = f.tree
        mapping = f.leaf_mapping()
        if alpha.node not in mapping:  # type: ignore[union-attr]
            raise ValueError("point outside the domain")
        for block in _blocks_finite(tree, mapping):
            if alpha.node in block.leaves:  # type: ignore[union-attr]
                return block.shape
        raise AssertionError("blocks cover the domain")
    region, expr = f.piece_at(alpha)
    basis = _symbolic_constancy_basis(region, expr, alpha)  # type: ignore[arg-type]
    if isinstance(expr, ValuationOfDifference):
        w = puiseux.val(puiseux.sub(alpha, expr.beta))
        piece = expr.post.piece_at(w)  # type: ignore[arg-type]
        if not piece.is_constant:
            # The fiber is the sphere around beta: one cone (toward beta) removed.
            return FiberShape("level", 1, basis, (expr.beta,))
        return FiberShape("cones", 1, basis, (alpha,))
    if isinstance(expr, ResidueAffine) and not expr.h.is_constant:
        n = expr.h.preimage_count(expr.value_at(alpha))  # type: ignore[arg-type]
        return FiberShape("cones", n, basis, (alpha,))
    # constants: the fiber is the whole constancy cone at the region basis
    if isinstance(region, Whole):
        return FiberShape("level", 0, basis, ())
    if isinstance(region, LevelSet):
        return FiberShape("level", len(region.removed), basis, region.removed)
    if isinstance(region, Interval):
        return FiberShape("level", 1, basis, (region.high,))
    return FiberShape("cones", 1, basis, (alpha,))


# ---------------------------------------------------------------------------
# Antichain strata and chain families


def antichain_strata(nodes) -> list[list[NodeRef]]:
    """Peel a finite node set into its successive maximal antichains."""
    remaining = sorted(nodes, key=sort_key)
    strata: list[list[NodeRef]] = []
    while remaining:
        layer = [
            x for x in remaining if not any(lt(x, y) for y in remaining if y is not x)
        ]
        layer_keys = {sort_key(x) for x in layer}
        strata.append(layer)
        remaining = [x for x in remaining if sort_key(x) not in layer_keys]
    return strata


def _maximal_chain_partition(nodes) -> list[tuple[NodeRef, ...]]:
    """A deterministic partition into chains: peel down-sets of maximal elements."""
    remaining = sorted(nodes, key=sort_key)
    chains: list[tuple[NodeRef, ...]] = []
    while remaining:
        maximals = [
            x for x in remaining if not any(lt(x, y) for y in remaining if y is not x)
        ]
        m = maximals[0]
        members = [x for x in remaining if leq(x, m)]
        members.sort(key=sort_key)
        members.sort(
            key=lambda r: r.tree.depth[r.node] if isinstance(r, FiniteNode) else 0
        )
        chains.append(tuple(members))
        taken = {sort_key(x) for x in members}
        remaining = [x for x in remaining if sort_key(x) not in taken]
    return chains


def _chain_profile(chain: tuple[NodeRef, ...]):
    return tuple(
        r.tree.depth[r.node] if isinstance(r, FiniteNode) else sort_key(r)
        for r in chain
    )


def incomparable_chain_partition(nodes) -> list[list[tuple[NodeRef, ...]]]:
    """Split a finite union of chains into families of indistinguishable chains.

    The maximal chains are grouped by depth profile; a group that fails the
    incomparable-chain conditions falls apart into singleton families, which
    hold vacuously.
    """
    chains = _maximal_chain_partition(nodes)
    by_profile: dict[tuple, list[tuple[NodeRef, ...]]] = {}
    for c in chains:
        by_profile.setdefault(_chain_profile(c), []).append(c)
    families: list[list[tuple[NodeRef, ...]]] = []
    for profile in sorted(by_profile):
        group = by_profile[profile]
        if len(group) == 1 or (
            all(isinstance(r, FiniteNode) for c in group for r in c)
            and is_incomparable_chain_set([list(c) for c in group])
        ):
            families.append(group)
        else:
            families.extend([c] for c in group)
    return families


# ---------------------------------------------------------------------------
# Monotonicity split


@dataclass(frozen=True)
class MonotonicitySplit:
    """Domain partition into locally constant, C-isomorphism and exceptional parts.

    Finite backend: frozensets of leaf ids.  Puiseux backend: tuples of
    regions (the supported expression grammar is locally constant, so the
    middle component is always empty there).
    """

    locally_constant: frozenset | tuple
    c_isomorphism: frozenset | tuple
    exceptional: frozenset | tuple


def _has_c_iso_cone(tree: GoodTree, mapping: dict[int, NodeRef], leaf: int) -> bool:
    dom = set(mapping)
    basis = tree.parent[leaf]
    while basis is not None:
        cands = sorted(_cone_of_leaf_at(tree, basis, leaf) & dom)
        if len(cands) >= 2:
            values = [mapping[l] for l in cands]
            keys = {sort_key(v) for v in values}
            if len(keys) == len(values) and is_antichain(values):
                refs = [FiniteNode(tree, l) for l in cands]
                vals = {l: mapping[l] for l in cands}
                ok = True
                for x in refs:
                    for y in refs:
                        for z in refs:
                            if _c_rel_nodes(x, y, z) != _c_rel_nodes(
                                vals[x.node], vals[y.node], vals[z.node]
                            ):
                                ok = False
                                break
                        if not ok:
                            break
                    if not ok:
                        break
                if ok:
                    return True
        basis = tree.parent[basis]
    return False


def monotonicity_split(f: PiecewiseFn) -> MonotonicitySplit:
    """Classify the domain: locally constant, local C-isomorphism, or neither.

    A point is a local C-isomorphism point when some cone around it carries
    at least two domain points on which f is injective and preserves the
    derived relation, and no cone around it witnesses constancy on two or
    more points.  On the finite backend the remainder is empty.
    """
    if f.backend == "puiseux":
        regions = tuple(region for region, _ in f.pieces)
        return MonotonicitySplit(regions, (), ())
    tree = f.tree
    mapping = f.leaf_mapping()
    dom = sorted(mapping)
    k_strong: set[int] = set()
    for leaf in dom:
        basis = tree.parent[leaf]
        value = mapping[leaf]
        while basis is not None:
            cone = _cone_of_leaf_at(tree, basis, leaf)
            if cone <= set(mapping) and len(cone) >= 2:
                if all(refs_equal(mapping[l], value) for l in cone):
                    k_strong.add(leaf)
                    break
            basis = tree.parent[basis]
    c_iso = {
        leaf
        for leaf in dom
        if leaf not in k_strong and _has_c_iso_cone(tree, mapping, leaf)
    }
    locally_constant = frozenset(l for l in dom if l not in c_iso)
    return MonotonicitySplit(locally_constant, frozenset(c_iso), frozenset())


# ---------------------------------------------------------------------------
# The main decomposition


@dataclass(frozen=True)
class Cell:
    regions: tuple[Region, ...]
    tag: str
    leaves: frozenset[int] | None = None

    def to_json(self) -> dict:
        return {
            "regions": [region_to_json(r) for r in self.regions],
            "tag": self.tag,
            "leaves": sorted(self.leaves) if self.leaves is not None else None,
        }


@dataclass(frozen=True)
class DecompositionResult:
    cells: tuple[Cell, ...]
    exceptional: frozenset[int]
    added_parameters: tuple[NodeRef, ...]

    def to_json(self) -> dict:
        return {
            "cells": [c.to_json() for c in self.cells],
            "exceptional": sorted(self.exceptional),
            "added_parameters": [ref_to_json(p) for p in self.added_parameters],
        }


def _min_mixed_partition(values: list[NodeRef]) -> list[list[NodeRef]]:
    """The minimum partition of a small node set into antichains and chains."""
    n = len(values)
    comp = [
        [
            1 if (leq(values[i], values[j]) or leq(values[j], values[i])) else 0
            for j in range(n)
        ]
        for i in range(n)
    ]

    def valid(mask: int) -> bool:
        idx = [i for i in range(n) if mask >> i & 1]
        flags = {comp[i][j] for a, i in enumerate(idx) for j in idx[a + 1 :]}
        return len(flags) <= 1

    full = (1 << n) - 1
    best: dict[int, int] = {0: 0}
    choice: dict[int, int] = {}
    order = sorted(range(1, full + 1), key=lambda m: (bin(m).count("1"), m))
    for mask in order:
        lowest = mask & -mask
        best_cost = None
        best_sub = None
        sub = mask
        while sub:
            if sub & lowest and valid(sub):
                rest = mask ^ sub
                if rest in best:
                    cost = best[rest] + 1
                    if best_cost is None or cost < best_cost or (
                        cost == best_cost and sub < best_sub  # type: ignore[operator]
                    ):
                        best_cost, best_sub = cost, sub
            sub = (sub - 1) & mask
        if best_cost is not None:
            best[mask] = best_cost
            choice[mask] = best_sub  # type: ignore[assignment]
    parts = []
    mask = full
    while mask:
        sub = choice[mask]
        parts.append([values[i] for i in range(n) if sub >> i & 1])
        mask ^= sub
    parts.reverse()
    return parts


def _group_cells(
    tree: GoodTree,
    blocks: list[_Block],
    shape_key,
) -> tuple[list[tuple[frozenset[int], str, NodeRef | None]], list[NodeRef]]:
    """Resolve one fiber-shape group into tagged leaf cells.

    Returns (cells, parameters); cells carry the selected chain's top node
    when a chain was singled out of a multi-chain family.
    """
    values: list[NodeRef] = []
    for b in blocks:
        if not any(refs_equal(b.value, v) for v in values):
            values.append(b.value)
    values.sort(key=sort_key)

    def pullback(selected: list[NodeRef]) -> frozenset[int]:
        out: set[int] = set()
        for b in blocks:
            if any(refs_equal(b.value, v) for v in selected):
                out |= b.leaves
        return frozenset(out)

    cells: list[tuple[frozenset[int], str, NodeRef | None]] = []
    params: list[NodeRef] = []

    if is_antichain(values):
        cells.append((pullback(values), "antichain", None))
        return cells, params

    if shape_key == ("level", 1):
        families = incomparable_chain_partition(values)
        for family in families:
            for chain in family:
                param = chain[-1] if len(family) > 1 else None
                cells.append((pullback(list(chain)), "chain", param))
                if param is not None:
                    params.append(param)
        return cells, params

    strata = antichain_strata(values)
    mixed = _min_mixed_partition(values) if len(values) <= 12 else None
    strata_count = len(strata)
    mixed_count = len(mixed) if mixed is not None else strata_count
    if strata_count <= mixed_count + 1:
        for layer in strata:
            cells.append((pullback(layer), "antichain", None))
        return cells, params
    for part in mixed:  # type: ignore[union-attr]
        if is_antichain(part):
            cells.append((pullback(part), "antichain", None))
        else:
            chain = sorted(part, key=lambda r: tree.depth[r.node] if isinstance(r, FiniteNode) else 0)
            param = chain[-1]
            cells.append((pullback(part), "chain", param))
            params.append(param)
    return cells, params


def locally_constant_restriction(table: LeafMap) -> LeafMap:
    """The largest restriction of a leaf map that is locally constant throughout.

    Iterates the monotonicity split until no C-isomorphism points remain;
    the result may be empty.
    """
    current = table
    while current.mapping:
        split = monotonicity_split(PiecewiseFn.from_table(current))
        if not split.c_isomorphism:
            return current
        current = current.restrict(split.locally_constant)
    return current


def decompose_locally_constant(f: PiecewiseFn) -> DecompositionResult:
    """Split dom(f) into cells whose images are antichains or chains.

    Precondition: f is locally constant on its domain; run
    :func:`monotonicity_split` first.  A nonempty C-isomorphism component
    raises :class:`NotLocallyConstantError` with a witness point.
    """
    if f.backend == "puiseux":
        return _decompose_symbolic(f)
    tree = f.tree
    split = monotonicity_split(f)
    if split.c_isomorphism:
        witness = min(split.c_isomorphism)  # type: ignore[arg-type]
        raise NotLocallyConstantError(
            f"f is a local C-isomorphism at leaf {witness}", witness=witness
        )
    mapping = f.leaf_mapping()
    blocks = _blocks_finite(tree, mapping)
    groups: dict[tuple, list[_Block]] = {}
    for b in blocks:
        groups.setdefault(b.shape.key, []).append(b)

    cells: list[Cell] = []
    parameters: list[NodeRef] = []
    for key in sorted(groups, key=str):
        raw_cells, params = _group_cells(tree, groups[key], key)
        parameters.extend(params)
        for leaves, tag, _ in raw_cells:
            cells.append(Cell(leafset_to_regions(tree, leaves), tag, leaves))
    cells.sort(key=lambda c: (min(c.leaves), len(c.leaves)))  # type: ignore[arg-type]
    return DecompositionResult(tuple(cells), frozenset(split.exceptional), tuple(parameters))


def _decompose_symbolic(f: PiecewiseFn) -> DecompositionResult:
    cells = []
    for region, expr in f.pieces:
        if isinstance(expr, ConstExpr):
            cells.append(Cell((region,), "antichain", None))
        elif isinstance(expr, ResidueAffine):
            # values live among the cones at one node: an antichain
            cells.append(Cell((region,), "antichain", None))
        elif isinstance(expr, ValuationOfDifference):
            # balls around one center are totally ordered: a chain per piece
            cells.append(Cell((region,), "chain", None))
        else:
            raise ValueError("finite tables are not symbolic")
    return DecompositionResult(tuple(cells), frozenset(), ())


# ---------------------------------------------------------------------------
# Factoring through a branch


@dataclass(frozen=True)
class BranchPiece:
    domain_leaves: frozenset[int] | None
    domain_region: Region | None
    branch: tuple[FiniteNode, ...] | PuiseuxBranch
    table: dict | None = field(default=None, compare=False)
    post: PiecewiseMonotoneMap | None = None

    def apply(self, meet: NodeRef):
        if self.table is not None:
            return self.table[sort_key(meet)]
        assert isinstance(meet, Ball) and self.post is not None
        return Ball(meet.center, self.post.apply(meet.radius))


@dataclass(frozen=True)
class BranchFactoring:
    pieces: tuple[BranchPiece, ...]
    residual_leaves: frozenset[int]
    residual_regions: tuple[Region, ...]
    residual_image: tuple


def branch_meet(alpha: NodeRef, chain) -> NodeRef:
    """The infimum of a leaf with a chain: the deepest meet with its members."""
    if isinstance(chain, PuiseuxBranch):
        m = inf(alpha, chain.leaf)
        if not isinstance(m, Ball):
            raise puiseux.PrecisionError(
                "leaf is indistinguishable from the branch at this precision"
            )
        return m
    meets = [inf(alpha, b) for b in chain]
    top = meets[0]
    for m in meets[1:]:
        if leq(top, m):
            top = m
    return top


def factor_through_branch(f: PiecewiseFn, chain) -> BranchFactoring:
    """Factor a chain-valued function through meets with a branch.

    For every point of the non-residual part, f(alpha) equals the branch map
    evaluated at inf(alpha, B).  The residual part has finite image.
    """
    if f.backend == "puiseux":
        return _factor_branch_symbolic(f, chain)
    tree = f.tree
    chain_list = sorted(chain, key=lambda r: tree.depth[r.node])
    if not is_chain(chain_list):
        raise ValueError("descriptor is not a chain")
    chain_nodes = {r.node for r in chain_list}
    mapping = f.leaf_mapping()
    for leaf, value in sorted(mapping.items()):
        if not isinstance(value, FiniteNode) or value.node not in chain_nodes:
            raise ValueError(f"image of leaf {leaf} is not within the chain")
    blocks = _blocks_finite(tree, mapping)
    residual: set[int] = set()
    kept: list[_Block] = []
    for b in blocks:
        out_cones = sum(
            1
            for c in tree.children[b.basis.node]
            if not tree.leaves_above(c) <= b.leaves
        )
        if out_cones == 1:
            kept.append(b)
        else:
            residual |= b.leaves
    meets: dict[int, NodeRef] = {}
    table: dict = {}
    conflicted: set = set()
    for b in kept:
        for leaf in sorted(b.leaves):
            m = branch_meet(FiniteNode(tree, leaf), chain_list)
            meets[leaf] = m
            key = sort_key(m)
            if key in table and not refs_equal(table[key], b.value):
                conflicted.add(key)
            table.setdefault(key, b.value)
    for leaf in list(meets):
        if sort_key(meets[leaf]) in conflicted:
            residual.add(leaf)
            del meets[leaf]
    for key in conflicted:
        del table[key]
    piece_leaves = frozenset(meets)
    pieces = ()
    if piece_leaves:
        branch_nodes = sorted(
            {meets[l] for l in meets}, key=lambda r: tree.depth[r.node]
        )
        pieces = (
            BranchPiece(piece_leaves, None, tuple(branch_nodes), dict(table), None),
        )
    residual_image = tuple(
        sorted({sort_key(mapping[l]) for l in residual})
    )
    return BranchFactoring(
        pieces,
        frozenset(residual),
        tuple(leafset_to_regions(tree, frozenset(residual))) if residual else (),
        residual_image,
    )


def _factor_branch_symbolic(f: PiecewiseFn, chain) -> BranchFactoring:
    if not isinstance(chain, PuiseuxBranch):
        raise ValueError("Puiseux functions factor through a PuiseuxBranch")
    pieces: list[BranchPiece] = []
    residual_regions: list[Region] = []
    residual_image: list = []
    for region, expr in f.pieces:
        if isinstance(expr, ConstExpr):
            residual_regions.append(region)
            residual_image.append(expr.node)
            continue
        if not isinstance(expr, ValuationOfDifference):
            raise ValueError("image is not within a chain")
        if not puiseux.indistinguishable(expr.beta, chain.leaf):
            raise ValueError("designated branch does not match the expression")
        affine = tuple(p for p in expr.post.pieces if not p.is_constant)
        consts = tuple(p for p in expr.post.pieces if p.is_constant)
        if affine:
            pieces.append(
                BranchPiece(None, region, chain, None, PiecewiseMonotoneMap(affine))
            )
        for p in consts:
            residual_regions.append(region)
            residual_image.append(Ball(expr.beta, p.v))
    return BranchFactoring(
        tuple(pieces), frozenset(), tuple(residual_regions), tuple(residual_image)
    )


# ---------------------------------------------------------------------------
# Value-group normal form


@dataclass(frozen=True)
class ValueGroupCell:
    region: Region
    window: tuple[Fraction | None, Fraction | None]
    beta: Series
    forward: MapPiece
    inverse: PiecewiseMonotoneMap

    def fiber_level(self, a: Fraction) -> Fraction:
        """The valuation a_i with {f = a} = {v(x - beta) = a_i} on the cell."""
        return self.inverse.apply(a)


@dataclass(frozen=True)
class ValueGroupNormalForm:
    finite_values: tuple[Fraction, ...]
    cells: tuple[ValueGroupCell, ...]


def value_group_normal_form(f: PiecewiseFn) -> ValueGroupNormalForm:
    """Normalize a value-group-valued function to v(x - beta) fibers.

    Constant pieces and constant sub-maps contribute the finite value set F;
    every remaining cell carries the inverted monotone map realizing the
    fiber identity.
    """
    finite_vals: list[Fraction] = []
    cells: list[ValueGroupCell] = []
    for region, expr in f.pieces:
        if isinstance(expr, ConstExpr):
            if not isinstance(expr.node, Ball):
                raise ValueError("value-group constants are balls on a branch")
            finite_vals.append(expr.node.radius)
            continue
        if not isinstance(expr, ValuationOfDifference):
            raise ValueError("piece is not reducible to the value-group normal form")
        for piece in expr.post.pieces:
            if piece.is_constant:
                finite_vals.append(piece.v)
                continue
            assert piece.u is not None
            inverse = PiecewiseMonotoneMap.affine(
                Fraction(1) / piece.u, -piece.v / piece.u
            )
            cells.append(
                ValueGroupCell(region, (piece.lo, piece.hi), expr.beta, piece, inverse)
            )
    return ValueGroupNormalForm(
        tuple(sorted(set(finite_vals))), tuple(cells)
    )


# ---------------------------------------------------------------------------
# Factoring through cones


def _cone_rep(tree: GoodTree, basis: int, node: int) -> int:
    """The child of ``basis`` whose subtree holds ``node``: the cone's name."""
    child = node
    while tree.parent[child] != basis:
        child = tree.parent[child]  # type: ignore[assignment]
    return child


def cofinite_locally_constant_check(f: PiecewiseFn, a: NodeRef) -> frozenset:
    """Points with no cone of constancy for the induced cone-valued reading.

    Cone-valued means values are compared as cones at ``a``.  Symbolic
    residue-affine pieces are locally constant everywhere, so the Puiseux
    answer is empty.
    """
    if f.backend == "puiseux":
        for region, expr in f.pieces:
            if not isinstance(expr, (ResidueAffine, ConstExpr)):
                raise ValueError("image is not within the cones at a node")
        return frozenset()
    tree = f.tree
    if not isinstance(a, FiniteNode) or a.is_leaf:
        raise ValueError("cones live at internal nodes")
    mapping = f.leaf_mapping()
    for leaf, value in sorted(mapping.items()):
        if not lt(a, value):
            raise ValueError(f"image of leaf {leaf} escapes the cones at the node")
    cone_value = {
        leaf: FiniteNode(tree, _cone_rep(tree, a.node, value.node))  # type: ignore[union-attr]
        for leaf, value in mapping.items()
    }
    dom = set(mapping)
    exceptional = set()
    for leaf in sorted(dom):
        ok = False
        basis = tree.parent[leaf]
        while basis is not None:
            cone = _cone_of_leaf_at(tree, basis, leaf)
            if cone <= dom and len(cone) >= 2:
                if all(cone_value[l] == cone_value[leaf] for l in cone):
                    ok = True
                    break
            basis = tree.parent[basis]
        if not ok and len(dom) > 1:
            exceptional.add(leaf)
    return frozenset(FiniteNode(tree, l) for l in sorted(exceptional))


@dataclass(frozen=True)
class ConeFactoring:
    target: NodeRef
    bases: tuple[NodeRef, ...]
    maps: tuple
    residual_leaves: frozenset[int]
    residual_regions: tuple[Region, ...]


@dataclass(frozen=True)
class FiniteConeMap:
    basis: FiniteNode
    table: dict[int, int] = field(compare=False)

    def apply(self, cone_rep: int) -> int:
        return self.table[cone_rep]


@dataclass(frozen=True)
class ResidueConeMap:
    """Cone map between balls, as a residue map on cone indices."""

    basis: Ball
    target: Ball
    h: "ResidueMap"

    def apply(self, index: Fraction) -> Fraction:
        return self.h.apply(index)


def factor_through_cones(f: PiecewiseFn, a: NodeRef) -> ConeFactoring:
    """Factor a cone-valued function through the cones at an antichain of nodes."""
    if f.backend == "puiseux":
        return _factor_cones_symbolic(f, a)
    tree = f.tree
    exceptional = {r.node for r in cofinite_locally_constant_check(f, a)}
    mapping = f.leaf_mapping()
    cone_value = {
        leaf: _cone_rep(tree, a.node, value.node)  # type: ignore[union-attr]
        for leaf, value in mapping.items()
    }
    dom = sorted(set(mapping) - exceptional)
    residual: set[int] = set(exceptional)
    # constancy bases for the cone-valued reading
    sub = {leaf: FiniteNode(tree, cone_value[leaf]) for leaf in dom}
    bases = {leaf: _constancy_basis_finite(tree, sub, leaf) for leaf in dom}
    base_nodes = sorted({b for b in bases.values()})
    root_based = [b for b in base_nodes if b == tree.virtual_root]
    for b in root_based:
        residual |= {l for l in dom if bases[l] == b}
    candidates = [
        b
        for b in base_nodes
        if b != tree.virtual_root
        and not any(
            o != b and o != tree.virtual_root and tree.le(o, b) for o in base_nodes
        )
    ]
    maps = []
    out_bases = []
    for m in sorted(candidates):
        covered = [l for l in dom if l not in residual and tree.le(m, l)]
        table: dict[int, int] = {}
        bad: set[int] = set()
        for leaf in covered:
            rep = _cone_rep(tree, m, leaf)
            if rep in table and table[rep] != cone_value[leaf]:
                bad.add(rep)
            table.setdefault(rep, cone_value[leaf])
        for leaf in covered:
            if _cone_rep(tree, m, leaf) in bad:
                residual.add(leaf)
        for rep in bad:
            del table[rep]
        if table:
            out_bases.append(FiniteNode(tree, m))
            maps.append(FiniteConeMap(FiniteNode(tree, m), table))
    return ConeFactoring(
        a,
        tuple(out_bases),
        tuple(maps),
        frozenset(residual),
        tuple(leafset_to_regions(tree, frozenset(residual))) if residual else (),
    )


def _factor_cones_symbolic(f: PiecewiseFn, a: NodeRef) -> ConeFactoring:
    if not isinstance(a, Ball) or a.is_root:
        raise ValueError("target must be a proper ball")
    bases: list[NodeRef] = []
    maps = []
    residual_regions: list[Region] = []
    for region, expr in f.pieces:
        if isinstance(expr, ConstExpr):
            residual_regions.append(region)
            continue
        if not isinstance(expr, ResidueAffine):
            raise ValueError("image escapes the cones at the node")
        if expr.h.is_constant:
            residual_regions.append(region)
            continue
        t = expr.scale_valuation
        b = Ball(expr.alpha, t)
        # residue((x-alpha)/(alpha-beta)) = cone_index(b, x) * c with
        # c = residue(t^t / (alpha - beta)); precompose h with the scaling.
        scale = puiseux.residue(
            puiseux.div(
                puiseux.monomial(t, 1, expr.alpha.precision),
                puiseux.sub(expr.alpha, expr.beta),
            )
        )
        bases.append(b)
        maps.append(ResidueConeMap(b, a, expr.h.scaled(scale)))
    return ConeFactoring(a, tuple(bases), tuple(maps), frozenset(), tuple(residual_regions))


# ---------------------------------------------------------------------------
# Residue normal form


@dataclass(frozen=True)
class ResidueCell:
    region: Region
    alpha: Series
    beta: Series
    radius: Fraction
    h: "ResidueMap"

    def ball(self) -> Ball:
        return Ball(self.alpha, self.radius)

    def evaluate(self, x: Series) -> Fraction:
        arg = puiseux.div(puiseux.sub(x, self.alpha), puiseux.sub(self.alpha, self.beta))
        return self.h.apply(puiseux.residue(arg))

    def cone_embedding(self, x: Series) -> Series:
        """The cone map from cones at inf(0,1) into cones at the cell ball."""
        return puiseux.add(
            puiseux.mul(x, puiseux.sub(self.alpha, self.beta)), self.alpha
        )


@dataclass(frozen=True)
class ResidueNormalForm:
    finite_values: tuple[Fraction, ...]
    cells: tuple[ResidueCell, ...]

    def covers(self, x: Series) -> bool:
        return any(cell.ball().contains(x) for cell in self.cells)


def residue_normal_form(f: PiecewiseFn) -> ResidueNormalForm:
    """Normalize a residue-valued function to h((x-alpha)/(alpha-beta)) pieces."""
    finite_vals: list[Fraction] = []
    cells: list[ResidueCell] = []
    for region, expr in f.pieces:
        if isinstance(expr, ConstExpr):
            raise ValueError(
                "residue-valued constants are residue-affine pieces with constant h"
            )
        if not isinstance(expr, ResidueAffine):
            raise ValueError("piece is not reducible to the residue normal form")
        if expr.h.is_constant:
            finite_vals.append(expr.h.constant_value())
            continue
        cells.append(ResidueCell(region, expr.alpha, expr.beta, expr.scale_valuation, expr.h))
    return ResidueNormalForm(tuple(sorted(set(finite_vals))), tuple(cells))
