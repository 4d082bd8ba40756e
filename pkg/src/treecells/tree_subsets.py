"""Decomposing subsets of the internal tree into point and interval families.

A definable subset of the internal tree T decomposes into 1-cells: families
of points or open order-intervals parameterized by a definable antichain
through t-functions (functions on an antichain whose image is an antichain
or a finite family of indistinguishable chains).

The pipeline mirrors the defining construction: the minimal antichain of
elements lying above everything comparable in X, the slice of X under each
of its members, a partition by slice profile, and a refinement of the slice
endpoint functions into t-functions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .decompose import (
    NotLocallyConstantError,
    _blocks_finite,
    _group_cells,
    _has_c_iso_cone,
    _maximal_chain_partition,
)
from .finite_trees import is_incomparable_chain_set
from .trees import (
    FiniteNode,
    GoodTree,
    induced_c_set,
    is_antichain,
    lt,
    sort_key,
)


# ---------------------------------------------------------------------------
# t-functions


def is_t_function(mapping: dict[FiniteNode, FiniteNode]) -> bool:
    """Whether a map on an antichain has an antichain image or splits into one
    family of indistinguishable chains.

    The image must be an antichain, or decompose into maximal chains that
    form a single family: same depth profile plus the incomparability,
    transitivity and uniform-count conditions.
    """
    domain = sorted(mapping, key=sort_key)
    if not is_antichain(domain):
        raise ValueError("the domain of a t-function is an antichain")
    image: list[FiniteNode] = []
    for a in domain:
        v = mapping[a]
        if not any(v == o for o in image):
            image.append(v)
    if is_antichain(image):
        return True
    from .decompose import incomparable_chain_partition

    return len(incomparable_chain_partition(image)) == 1


def _induced_fn(mapping: dict[FiniteNode, FiniteNode]):
    """Set a map on an antichain up as a function on the induced C-set."""
    domain = sorted(mapping, key=sort_key)
    induced = induced_c_set(domain)
    table = {a.node: mapping[a] for a in domain}
    return induced, table


def _decompose_on_antichain(mapping: dict[FiniteNode, FiniteNode]):
    induced, table = _induced_fn(mapping)
    c_iso = set()
    for leaf in sorted(table):
        basis = induced.parent[leaf]
        strong = False
        value = table[leaf]
        while basis is not None:
            toward = next(c for c in induced.children[basis] if induced.le(c, leaf))
            cone = induced.leaves_above(toward)
            if len(cone) >= 2 and all(table[l] == value for l in cone):
                strong = True
                break
            basis = induced.parent[basis]
        if not strong and _has_c_iso_cone(induced, table, leaf):
            c_iso.add(leaf)
    if c_iso:
        raise NotLocallyConstantError(
            f"map is a local C-isomorphism inside the induced C-set at {min(c_iso)}",
            witness=min(c_iso),
        )
    blocks = _blocks_finite(induced, table)
    groups: dict[tuple, list] = {}
    for b in blocks:
        groups.setdefault(b.shape.key, []).append(b)
    parts: list[frozenset[int]] = []
    for key in sorted(groups, key=str):
        raw, _ = _group_cells(induced, groups[key], key)
        parts.extend(leaves for leaves, _, _ in raw)
    parts.sort(key=min)
    return parts


def t_decompose(mapping: dict[FiniteNode, FiniteNode]) -> list[tuple[FiniteNode, ...]]:
    """Split the antichain domain so that each restriction is a t-function.

    Runs the locally-constant decomposition inside the induced C-set of the
    domain; the cells' images are antichains or chains, hence t-function
    images.
    """
    domain = sorted(mapping, key=sort_key)
    if not domain:
        return []
    tree = domain[0].tree
    parts = _decompose_on_antichain(mapping)
    out = []
    for part in parts:
        refs = tuple(FiniteNode(tree, n) for n in sorted(part))
        restriction = {r: mapping[r] for r in refs}
        if not is_t_function(restriction):
            raise AssertionError("decomposition part is not a t-function domain")
        out.append(refs)
    return out


def descending_locally_constant(
    mapping: dict[FiniteNode, FiniteNode]
) -> frozenset[FiniteNode]:
    """Exceptional points of a strictly descending map on an antichain.

    Precondition (checked, witness reported): every value lies strictly
    below its argument.  On explicit finite antichains every member has a
    cone of constancy in the induced C-set (the point cone at its immediate
    predecessor qualifies), so the returned set is empty; the precondition
    check is the live content.
    """
    domain = sorted(mapping, key=sort_key)
    if not is_antichain(domain):
        raise ValueError("domain must be an antichain")
    for a in domain:
        if not lt(mapping[a], a):
            raise ValueError(f"map does not descend at {a!r}")
    induced, table = _induced_fn(mapping)
    exceptional = set()
    for leaf in sorted(table):
        basis = induced.parent[leaf]
        found = False
        while basis is not None:
            toward = next(c for c in induced.children[basis] if induced.le(c, leaf))
            cone = induced.leaves_above(toward)
            if all(table[l] == table[leaf] for l in cone):
                found = True
                break
            basis = induced.parent[basis]
        if not found:
            exceptional.add(leaf)
    tree = domain[0].tree
    return frozenset(FiniteNode(tree, n) for n in sorted(exceptional))


# ---------------------------------------------------------------------------
# Minimal upper antichain and branch slices


def minimal_upper_antichain(
    tree: GoodTree, X: frozenset[int] | set[int]
) -> list[FiniteNode]:
    """Real nodes above some X-element, above everything comparable in X,
    and minimal with those properties."""
    xset = set(X)
    for x in xset:
        if x not in tree.parent or x == tree.virtual_root:
            raise ValueError(f"{x} is not a real node")
    theta: dict[int, bool] = {}
    has_x_strictly_above: dict[int, bool] = {}
    for node in sorted(tree.parent, key=lambda n: tree.depth[n]):
        p = tree.parent[node]
        theta[node] = False if p is None else (theta[p] or p in xset)
    for node in sorted(tree.parent, key=lambda n: -tree.depth[n]):
        has_x_strictly_above[node] = any(
            has_x_strictly_above[c] or c in xset for c in tree.children[node]
        )
    candidates = {
        n
        for n in tree.parent
        if n != tree.virtual_root and theta[n] and not has_x_strictly_above[n]
    }
    out = []
    blocked: dict[int, bool] = {}
    for node in sorted(tree.parent, key=lambda n: tree.depth[n]):
        p = tree.parent[node]
        above = False if p is None else (blocked[p] or p in candidates)
        blocked[node] = above
        if node in candidates and not above:
            out.append(FiniteNode(tree, node))
    assert is_antichain(out)
    return sorted(out, key=sort_key)


@dataclass(frozen=True)
class BranchSlice:
    """The part of X weakly below an antichain member, split into runs and points.

    Runs of consecutive nodes are the finite surrogate of open intervals and
    are reported through their endpoints; the member itself, when it belongs
    to X, is carried as a flag rather than a point.
    """

    anchor: FiniteNode
    intervals: tuple[tuple[FiniteNode, FiniteNode], ...]
    points: tuple[FiniteNode, ...]
    self_member: bool

    @property
    def profile(self) -> tuple:
        slots: list[tuple] = []
        merged = [("I", iv[0]) for iv in self.intervals] + [
            ("P", p) for p in self.points
        ]
        merged.sort(key=lambda kv: kv[1].tree.depth[kv[1].node])
        slots = [kind for kind, _ in merged]
        if self.self_member:
            slots.append("S")
        return tuple(slots)


def branch_slice(tree: GoodTree, X: set[int], a: FiniteNode) -> BranchSlice:
    """Slice X along the down-set of an antichain member."""
    below = sorted(
        (t for t in X if tree.le(t, a.node) and t != a.node),
        key=lambda n: tree.depth[n],
    )
    runs: list[list[int]] = []
    for t in below:
        if runs and tree.parent[t] == runs[-1][-1]:
            runs[-1].append(t)
        else:
            runs.append([t])
    intervals = tuple(
        (FiniteNode(tree, run[0]), FiniteNode(tree, run[-1]))
        for run in runs
        if len(run) >= 2
    )
    points = tuple(FiniteNode(tree, run[0]) for run in runs if len(run) == 1)
    return BranchSlice(a, intervals, points, a.node in X)


# ---------------------------------------------------------------------------
# 1-cells of T


@dataclass(frozen=True)
class PointFamily:
    antichain: tuple[FiniteNode, ...]
    values: dict[FiniteNode, FiniteNode] = field(compare=False)

    def __post_init__(self):
        if not is_antichain(self.antichain):
            raise ValueError("a 1-cell is parameterized by an antichain")

    def extension(self) -> frozenset[FiniteNode]:
        return frozenset(self.values[a] for a in self.antichain)

    def validate(self):
        if not is_t_function({a: self.values[a] for a in self.antichain}):
            raise ValueError("the point function is not a t-function")

    def to_json(self) -> dict:
        return {
            "kind": "points",
            "antichain": [a.node for a in self.antichain],
            "values": {str(a.node): self.values[a].node for a in self.antichain},
        }


@dataclass(frozen=True)
class IntervalFamily:
    antichain: tuple[FiniteNode, ...]
    lower: dict[FiniteNode, FiniteNode] = field(compare=False)
    upper: dict[FiniteNode, FiniteNode] = field(compare=False)

    def __post_init__(self):
        if not is_antichain(self.antichain):
            raise ValueError("a 1-cell is parameterized by an antichain")
        for a in self.antichain:
            if not lt(self.lower[a], self.upper[a]):
                raise ValueError("interval bounds must satisfy g(a) < f(a)")

    def extension(self) -> frozenset[FiniteNode]:
        out = set()
        for a in self.antichain:
            tree = a.tree
            node = self.upper[a].node
            node = tree.parent[node]  # strictly below the upper bound
            while node is not None and node != self.lower[a].node:
                out.add(FiniteNode(tree, node))
                node = tree.parent[node]
        return frozenset(out)

    def validate(self):
        for func in (self.lower, self.upper):
            if not is_t_function({a: func[a] for a in self.antichain}):
                raise ValueError("an interval bound is not a t-function")

    def to_json(self) -> dict:
        return {
            "kind": "intervals",
            "antichain": [a.node for a in self.antichain],
            "lower": {str(a.node): self.lower[a].node for a in self.antichain},
            "upper": {str(a.node): self.upper[a].node for a in self.antichain},
        }


TCell = PointFamily | IntervalFamily


def _slot_functions(tree: GoodTree, cls: list[FiniteNode], slices: dict[int, BranchSlice]):
    """Per-slot endpoint functions of a profile class, bottom-up slot order."""
    slots = []
    profile = slices[cls[0].node].profile
    n_intervals = sum(1 for s in profile if s == "I")
    n_points = sum(1 for s in profile if s == "P")
    for i in range(n_intervals):
        lower: dict[FiniteNode, FiniteNode] = {}
        upper: dict[FiniteNode, FiniteNode] = {}
        for a in cls:
            lo, hi = slices[a.node].intervals[i]
            lower[a] = FiniteNode(tree, tree.parent[lo.node])  # type: ignore[arg-type]
            up = hi.node
            child = a.node
            while tree.parent[child] != up:
                child = tree.parent[child]  # type: ignore[assignment]
            upper[a] = FiniteNode(tree, child)
        slots.append(("I", i, lower, upper))
    for j in range(n_points):
        values = {a: slices[a.node].points[j] for a in cls}
        slots.append(("P", j, values, None))
    if slices[cls[0].node].self_member:
        slots.append(("S", 0, {a: a for a in cls}, None))
    return slots


def decompose_T_subset(tree: GoodTree, X: set[int] | frozenset[int]) -> list[TCell]:
    """Decompose a subset of the internal tree into disjoint 1-cells.

    ``X`` must consist of internal real nodes.  The output cells are
    pairwise disjoint and their extensions union to exactly X.
    """
    xset = set(X)
    for x in xset:
        if x not in tree.parent:
            raise ValueError(f"{x} is not a node")
        if x == tree.virtual_root or tree.is_leaf(x):
            raise ValueError("subsets of the internal tree contain internal nodes only")
    if not xset:
        return []
    A = minimal_upper_antichain(tree, xset)
    assigned: dict[int, list[int]] = {a.node: [] for a in A}
    for t in sorted(xset):
        owner = next(a for a in A if tree.le(t, a.node))
        assigned[owner.node].append(t)
    slices = {
        a.node: branch_slice(tree, set(assigned[a.node]), a) for a in A
    }
    by_profile: dict[tuple, list[FiniteNode]] = {}
    for a in A:
        by_profile.setdefault(slices[a.node].profile, []).append(a)

    cells: list[TCell] = []
    for profile in sorted(by_profile):
        if not profile:
            continue
        cls = sorted(by_profile[profile], key=sort_key)
        slots = _slot_functions(tree, cls, slices)
        # refine the class so every slot function is a t-function
        parts: list[tuple[FiniteNode, ...]] = [tuple(cls)]
        for kind, _, first, second in slots:
            funcs = [first] + ([second] if second is not None else [])
            for func in funcs:
                if kind != "S" and all(lt(func[a], a) for a in cls):
                    descending_locally_constant({a: func[a] for a in cls})
                new_parts: list[tuple[FiniteNode, ...]] = []
                for part in parts:
                    restriction = {a: func[a] for a in part}
                    if len(part) == 1 or is_t_function(restriction):
                        new_parts.append(part)
                    else:
                        new_parts.extend(t_decompose(restriction))
                parts = new_parts
        for part in sorted(parts, key=lambda p: sort_key(p[0])):
            for kind, _, first, second in slots:
                if kind == "I":
                    cells.append(
                        IntervalFamily(
                            part,
                            {a: first[a] for a in part},
                            {a: second[a] for a in part},
                        )
                    )
                else:
                    cells.append(PointFamily(part, {a: first[a] for a in part}))
    return cells


def tcell_to_json(cell: TCell) -> dict:
    return cell.to_json()
