"""Explicit finite good trees as an exhaustive oracle domain.

Seeded generation of good trees, canonical codes for rooted-tree isomorphism
(recursive multiset hashing), automorphism transitivity on antichains, the
C-isomorphism predicate, validation of incomparable-chain families, and a
brute-force minimal partition oracle for leaf maps.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field

from .trees import (
    FiniteNode,
    GoodTree,
    Region,
    _c_rel_nodes,
    induced_c_set,
    inf,
    is_antichain,
    lt,
    region_members,
    sort_key,
)


class UnsatisfiableParamsError(ValueError):
    """Raised when no good tree realizes the requested generator parameters."""


@dataclass(frozen=True)
class TreeGenParams:
    max_depth: int
    branching: tuple[int, int]
    leaves: int
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.branching
        if self.leaves < 1:
            raise UnsatisfiableParamsError("leaf target must be at least 1")
        if lo < 2 or hi < lo:
            raise UnsatisfiableParamsError("internal nodes must branch at least twice")
        if self.max_depth < 0:
            raise UnsatisfiableParamsError("depth must be nonnegative")


def generate_good_tree(params: TreeGenParams) -> GoodTree:
    """A deterministic random good tree: same params and seed, same tree.

    The tree has a single real root under the virtual root; every internal
    node branches within the requested range and the leaf count is met
    exactly.  Node ids are assigned in construction order (0 is the virtual
    root, 1 the real root).
    """
    lo, hi = params.branching
    if params.leaves > 1:
        if params.max_depth < 1 or params.leaves < 2:
            raise UnsatisfiableParamsError("several leaves need positive depth")
        if params.leaves > hi**params.max_depth:
            raise UnsatisfiableParamsError(
                f"{params.leaves} leaves do not fit in depth {params.max_depth} "
                f"with branching at most {hi}"
            )
    rng = random.Random(params.seed)
    parent: dict[int, int | None] = {0: None}
    leaves: list[int] = []
    counter = 1

    def build(parent_id: int, depth_left: int, budget: int):
        nonlocal counter
        node = counter
        counter += 1
        parent[node] = parent_id
        if budget == 1:
            leaves.append(node)
            return
        cap = hi ** (depth_left - 1)
        kmin = max(lo, -(-budget // cap))
        kmax = min(hi, budget)
        if kmin > kmax:
            raise UnsatisfiableParamsError("branching range cannot meet the leaf target")
        k = rng.randint(kmin, kmax)
        remaining = budget
        for i in range(k):
            slots_after = k - i - 1
            part_lo = max(1, remaining - slots_after * cap)
            part_hi = min(cap, remaining - slots_after)
            part = rng.randint(part_lo, part_hi)
            remaining -= part
            build(node, depth_left - 1, part)

    build(0, params.max_depth if params.leaves > 1 else 1, params.leaves)
    return GoodTree(parent, leaves)


# ---------------------------------------------------------------------------
# Canonical codes (recursive multiset hashing)


def _mix(payload: bytes) -> bytes:
    return hashlib.blake2b(payload, digest_size=16).digest()


def canonical_form(tree: GoodTree, labels: dict[int, str] | None = None) -> str:
    """A canonical code: equal codes iff a label-preserving order-isomorphism exists.

    Computed bottom-up; every node's code mixes its label, its leaf flag and
    the sorted codes of its children.  Collision risk of the 128-bit mix is
    negligible at this scale and is cross-checked against brute force in the
    test suite.
    """
    labels = labels or {}
    codes: dict[int, bytes] = {}
    for node in sorted(tree.parent, key=lambda n: -tree.depth[n]):
        kind = b"L" if tree.is_leaf(node) else b"N"
        label = labels.get(node, "").encode()
        child_codes = sorted(codes[c] for c in tree.children[node])
        codes[node] = _mix(kind + b"\x00" + label + b"\x00" + b"".join(child_codes))
    return codes[tree.virtual_root].hex()


def automorphism_transitive(antichain: list[FiniteNode]) -> bool:
    """Whether the induced C-set's automorphisms act transitively on the antichain.

    Decided by canonical codes with one marked leaf: an automorphism maps a
    to b exactly when marking a and marking b yield the same code.
    """
    members = sorted(antichain, key=sort_key)
    if not members:
        raise ValueError("automorphism_transitive needs a nonempty antichain")
    if len(members) == 1:
        if not is_antichain(members):
            raise ValueError("not an antichain")
        return True
    induced = induced_c_set(members)
    codes = {
        m.node: canonical_form(induced, labels={m.node: "*"}) for m in members
    }
    return len(set(codes.values())) == 1


# ---------------------------------------------------------------------------
# Leaf maps and C-isomorphisms


@dataclass(frozen=True)
class LeafMap:
    """A finite definable function: leaves of a tree to nodes of the same tree."""

    tree: GoodTree
    mapping: dict[int, int] = field(compare=False)

    def __post_init__(self):
        for leaf, node in self.mapping.items():
            if leaf not in self.tree.leaves:
                raise ValueError(f"{leaf} is not a leaf")
            if node not in self.tree.parent:
                raise ValueError(f"image {node} is not a node")

    @property
    def domain(self) -> frozenset[int]:
        return frozenset(self.mapping)

    def __call__(self, leaf: int) -> int:
        return self.mapping[leaf]

    def value_ref(self, leaf: int) -> FiniteNode:
        return FiniteNode(self.tree, self.mapping[leaf])

    def restrict(self, leaves) -> "LeafMap":
        keep = set(leaves)
        return LeafMap(self.tree, {l: v for l, v in self.mapping.items() if l in keep})

    def to_json(self) -> dict:
        return {
            "entries": [
                {"leaf": l, "node": self.mapping[l]} for l in sorted(self.mapping)
            ]
        }

    @classmethod
    def from_json(cls, tree: GoodTree, data: dict) -> "LeafMap":
        return cls(tree, {e["leaf"]: e["node"] for e in data["entries"]})


def is_c_isomorphism(f: LeafMap, domain: Region) -> bool:
    """Injective and preserving the C-relation and its negation on the domain.

    The image must be an antichain (the relation on it is the one induced on
    the antichain, which is computed with the ambient infima).
    """
    tree = f.tree
    dom = sorted(r.node for r in region_members(domain))
    for leaf in dom:
        if leaf not in f.mapping:
            raise ValueError(f"map is not total on the domain: missing leaf {leaf}")
    image = [FiniteNode(tree, f.mapping[l]) for l in dom]
    if not is_antichain(set(image)):
        raise ValueError("image is not an antichain")
    values = {f.mapping[l] for l in dom}
    if len(values) != len(dom):
        return False
    refs = [FiniteNode(tree, l) for l in dom]
    fmap = {l: FiniteNode(tree, f.mapping[l]) for l in dom}
    for x in refs:
        for y in refs:
            for z in refs:
                if _c_rel_nodes(x, y, z) != _c_rel_nodes(
                    fmap[x.node], fmap[y.node], fmap[z.node]
                ):
                    return False
    return True


# ---------------------------------------------------------------------------
# Incomparable chain families


def _chain_sorted(chain) -> list[FiniteNode]:
    members = sorted(chain, key=sort_key)
    members.sort(key=lambda r: r.tree.depth[r.node])
    return members


def is_incomparable_chain_set(chains) -> bool:
    """Validate a finite family of finite chains as pairwise indistinguishable.

    Conditions: (a) elementwise incomparability across distinct chains,
    (b) the antichain of pairwise infima of left endpoints carries a
    transitive automorphism action, (c) a uniform count of chains passing
    above each of those infima.  Singleton families hold vacuously.
    """
    family = [list(c) for c in chains]
    if not family:
        raise ValueError("empty chain family")
    for c in family:
        if not c:
            raise ValueError("chains must be nonempty")
        if not all(isinstance(r, FiniteNode) for r in c):
            raise ValueError("finite backend only")
    if len(family) == 1:
        return True
    for i, c0 in enumerate(family):
        for c1 in family[i + 1 :]:
            for x in c0:
                for y in c1:
                    if x.tree.le(x.node, y.node) or x.tree.le(y.node, x.node):
                        return False
    lps = [_chain_sorted(c)[0] for c in family]
    infima: list[FiniteNode] = []
    for i, a in enumerate(lps):
        for b in lps[i + 1 :]:
            m = inf(a, b)
            if not any(m == o for o in infima):
                infima.append(m)
    if not is_antichain(infima):
        return False
    if not automorphism_transitive(infima):
        return False
    counts = set()
    for a in infima:
        k = sum(
            1 for c in family if any(lt(a, x) for x in c)
        )
        counts.add(k)
    return len(counts) == 1


# ---------------------------------------------------------------------------
# Brute-force oracle for the decomposition theorem


def brute_force_locally_constant_partition(f: LeafMap) -> list[frozenset[int]]:
    """The minimal partition of dom(f) whose parts have antichain or chain images.

    Exhaustive backtracking over set partitions in increasing part count;
    intended for trees with at most 8 leaves.  Independent of the
    decomposition algorithm: only the ambient order is shared.
    """
    tree = f.tree
    dom = sorted(f.mapping)
    if not dom:
        return []
    if len(dom) > 8:
        raise ValueError("oracle is limited to domains of at most 8 leaves")
    values = sorted({f.mapping[l] for l in dom})
    comp = {
        (a, b): tree.le(a, b) or tree.le(b, a) for a in values for b in values
    }

    def part_ok(vals: set[int]) -> bool:
        vs = sorted(vals)
        all_comp = all(comp[(a, b)] for i, a in enumerate(vs) for b in vs[i + 1 :])
        all_incomp = all(
            not comp[(a, b)] for i, a in enumerate(vs) for b in vs[i + 1 :]
        )
        return all_comp or all_incomp

    for k in range(1, len(dom) + 1):
        parts: list[set[int]] = []
        images: list[set[int]] = []

        def assign(i: int) -> bool:
            if i == len(dom):
                return True
            leaf = dom[i]
            v = f.mapping[leaf]
            for j in range(len(parts)):
                images[j].add(v)
                if part_ok(images[j]):
                    parts[j].add(leaf)
                    if assign(i + 1):
                        return True
                    parts[j].discard(leaf)
                images[j] = {f.mapping[l] for l in parts[j]}
            if len(parts) < k:
                parts.append({leaf})
                images.append({v})
                if assign(i + 1):
                    return True
                parts.pop()
                images.pop()
            return False

        if assign(0):
            return [frozenset(p) for p in parts]
    raise AssertionError("singleton partition is always valid")
