"""Executable decompositions over ultrametric ball trees.

Finite good trees and a truncated-Puiseux-series valued field serve as the
two backends; on top of them live the derived C-relation, regions, the
decomposition of locally constant tree-valued functions into antichain and
chain cells, the branch/cone factorings, the value-group and residue normal
forms, and the 1-cell decomposition of subsets of the internal tree.
"""

from .trees import (
    AxiomReport,
    BackendMismatchError,
    Cone,
    FiniteNode,
    GoodTree,
    Interval,
    LevelSet,
    Point,
    Region,
    RegionError,
    Whole,
    branch,
    branching_number,
    c_relation,
    check_c_axioms,
    comparable,
    induced_c_set,
    inf,
    inf_closure,
    is_antichain,
    is_chain,
    leq,
    lt,
    predecessors_in_closure,
    region_contains,
    region_members,
    region_min,
    splitting_nodes_on_branch,
    splitting_tree,
    whole_region,
)
from .puiseux import (
    Ball,
    PrecisionError,
    PuiseuxBranch,
    Series,
    UnknownValuation,
    add,
    ball_inf,
    cone_index,
    constant,
    div,
    monomial,
    mul,
    neg,
    residue,
    series,
    sub,
    val,
    zero,
)
from .finite_trees import (
    LeafMap,
    TreeGenParams,
    UnsatisfiableParamsError,
    automorphism_transitive,
    brute_force_locally_constant_partition,
    canonical_form,
    generate_good_tree,
    is_c_isomorphism,
    is_incomparable_chain_set,
)
from .decompose import (
    Cell,
    ConstExpr,
    DecompositionResult,
    FiberShape,
    NotLocallyConstantError,
    PiecewiseFn,
    PiecewiseMonotoneMap,
    ResidueAffine,
    ResidueMap,
    TableExpr,
    ValuationOfDifference,
    antichain_strata,
    cofinite_locally_constant_check,
    constancy_basis,
    decompose_locally_constant,
    factor_through_branch,
    factor_through_cones,
    fiber_shape,
    incomparable_chain_partition,
    monotonicity_split,
    residue_normal_form,
    value_group_normal_form,
)
from .tree_subsets import (
    BranchSlice,
    IntervalFamily,
    PointFamily,
    TCell,
    branch_slice,
    decompose_T_subset,
    descending_locally_constant,
    is_t_function,
    minimal_upper_antichain,
    t_decompose,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
