"""Batch command-line front end.

Subcommands read JSON inputs against the module schemas, run one algorithm,
and write JSON (or DOT) outputs.  All randomness flows from --seed; identical
inputs and seeds give byte-identical outputs.  Exit codes: 0 success, 1
malformed input, 2 precondition violation (with a machine-readable error
object on stderr).
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from fractions import Fraction

from . import puiseux
from .decompose import (
    NotLocallyConstantError,
    PiecewiseFn,
    antichain_strata,
    decompose_locally_constant,
    factor_through_branch,
    factor_through_cones,
    residue_normal_form,
    value_group_normal_form,
)
from .finite_trees import TreeGenParams, generate_good_tree
from .puiseux import PrecisionError
from .trees import GoodTree, ref_to_json
from .tree_subsets import decompose_T_subset, tcell_to_json


class InputError(ValueError):
    pass


def _load_json(path: str):
    try:
        with open(path) as handle:
            return json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc


def _emit(args, payload: str):
    if args.out:
        with open(args.out, "w") as handle:
            handle.write(payload)
    else:
        sys.stdout.write(payload)


def _dump(args, data) -> None:
    _emit(args, json.dumps(data, indent=2, sort_keys=True) + "\n")


def _load_tree(path: str) -> GoodTree:
    data = _load_json(path)
    try:
        return GoodTree(
            {e["id"]: e["parent"] for e in data["nodes"]}, data["leaves"]
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed tree: {exc}") from exc


def _load_fn(args) -> PiecewiseFn:
    data = _load_json(args.fn)
    tree = _load_tree(args.tree) if getattr(args, "tree", None) else None
    try:
        return PiecewiseFn.from_json(data, tree)
    except (KeyError, TypeError) as exc:
        raise InputError(f"malformed function: {exc}") from exc


def cmd_axioms_check(args) -> int:
    from .trees import check_c_axioms

    tree = _load_tree(args.tree)
    rep = check_c_axioms(tree, sample_rng=random.Random(args.seed))
    _dump(args, rep.to_json())
    return 0


def cmd_gen_tree(args) -> int:
    lo, _, hi = args.branching.partition(":")
    params = TreeGenParams(
        max_depth=args.depth,
        branching=(int(lo), int(hi or lo)),
        leaves=args.leaves,
        seed=args.seed,
    )
    tree = generate_good_tree(params)
    if args.format == "dot":
        _emit(args, tree.to_dot())
    else:
        _dump(args, tree.to_json())
    return 0


def cmd_export_dot(args) -> int:
    tree = _load_tree(args.tree)
    _emit(args, tree.to_dot())
    return 0


def cmd_strata(args) -> int:
    tree = _load_tree(args.tree)
    data = _load_json(args.nodes)
    try:
        refs = [tree.ref(n) for n in data["nodes"]]
    except (KeyError, ValueError) as exc:
        raise InputError(str(exc)) from exc
    layers = antichain_strata(refs)
    _dump(args, {"strata": [[x.node for x in layer] for layer in layers]})
    return 0


def cmd_decompose_fn(args) -> int:
    f = _load_fn(args)
    result = decompose_locally_constant(f)
    _dump(args, result.to_json())
    return 0


def cmd_factor_branch(args) -> int:
    f = _load_fn(args)
    data = _load_json(args.chain)
    if "branch_leaf" in data:
        chain = puiseux.PuiseuxBranch(puiseux.series_from_json(data["branch_leaf"]))
    else:
        tree = f.tree
        chain = [tree.ref(n) for n in data["chain"]]
    factored = factor_through_branch(f, chain)
    pieces = []
    for piece in factored.pieces:
        entry: dict = {}
        if piece.domain_leaves is not None:
            entry["leaves"] = sorted(piece.domain_leaves)
            entry["branch"] = [b.node for b in piece.branch]
            entry["table"] = {
                str(key): ref_to_json(value) for key, value in sorted(
                    piece.table.items(), key=lambda kv: str(kv[0])
                )
            }
        else:
            from .trees import region_to_json

            entry["region"] = region_to_json(piece.domain_region)
            entry["post"] = piece.post.to_json()
        pieces.append(entry)
    _dump(
        args,
        {
            "pieces": pieces,
            "residual_leaves": sorted(factored.residual_leaves),
            "residual_image_size": len(factored.residual_image),
        },
    )
    return 0


def cmd_factor_cones(args) -> int:
    f = _load_fn(args)
    data = _load_json(args.at)
    if "ball" in data:
        at = puiseux.ball_from_json(data["ball"])
    else:
        at = f.tree.ref(data["node"])
    factored = factor_through_cones(f, at)
    _dump(
        args,
        {
            "bases": [ref_to_json(b) for b in factored.bases],
            "residual_leaves": sorted(factored.residual_leaves),
            "map_count": len(factored.maps),
        },
    )
    return 0


def cmd_vgroup_nf(args) -> int:
    f = _load_fn(args)
    nf = value_group_normal_form(f)
    _dump(
        args,
        {
            "finite_values": [str(v) for v in nf.finite_values],
            "cells": [
                {
                    "beta": puiseux.series_to_json(cell.beta),
                    "window": [
                        None if cell.window[0] is None else str(cell.window[0]),
                        None if cell.window[1] is None else str(cell.window[1]),
                    ],
                    "inverse": cell.inverse.to_json(),
                }
                for cell in nf.cells
            ],
        },
    )
    return 0


def cmd_residue_nf(args) -> int:
    f = _load_fn(args)
    nf = residue_normal_form(f)
    _dump(
        args,
        {
            "finite_values": [str(v) for v in nf.finite_values],
            "cells": [
                {
                    "alpha": puiseux.series_to_json(cell.alpha),
                    "beta": puiseux.series_to_json(cell.beta),
                    "radius": str(cell.radius),
                    "h": cell.h.to_json(),
                }
                for cell in nf.cells
            ],
        },
    )
    return 0


def cmd_t_decompose(args) -> int:
    tree = _load_tree(args.tree)
    data = _load_json(args.nodes)
    cells = decompose_T_subset(tree, set(data["nodes"]))
    _dump(args, {"cells": [tcell_to_json(c) for c in cells]})
    return 0


def cmd_suite(args) -> int:
    from .suite import run_suite

    report = run_suite(seed=args.seed, precision=Fraction(args.precision))
    _dump(args, report)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="treecells",
        description="decompositions of tree-valued functions over ultrametric ball trees",
    )
    parser.add_argument("--seed", type=int, default=0, help="seed for all randomness")
    parser.add_argument(
        "--precision", default="16", help="series precision exponent (rational)"
    )
    parser.add_argument("--out", default=None, help="output path (default stdout)")
    parser.add_argument(
        "--format", choices=["json", "dot"], default="json", help="output format"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("axioms-check", help="check the C-set axioms of a tree")
    p.add_argument("tree")
    p.set_defaults(func=cmd_axioms_check)

    p = sub.add_parser("gen-tree", help="generate a seeded good tree")
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--branching", default="2:3", help="lo:hi branching range")
    p.add_argument("--leaves", type=int, required=True)
    p.set_defaults(func=cmd_gen_tree)

    p = sub.add_parser("export-dot", help="render a tree in DOT")
    p.add_argument("tree")
    p.set_defaults(func=cmd_export_dot)

    p = sub.add_parser("strata", help="peel a node set into maximal antichains")
    p.add_argument("tree")
    p.add_argument("nodes")
    p.set_defaults(func=cmd_strata)

    p = sub.add_parser("decompose-fn", help="decompose a locally constant function")
    p.add_argument("fn")
    p.add_argument("--tree", default=None)
    p.set_defaults(func=cmd_decompose_fn)

    p = sub.add_parser("factor-branch", help="factor a chain-valued function")
    p.add_argument("fn")
    p.add_argument("chain")
    p.add_argument("--tree", default=None)
    p.set_defaults(func=cmd_factor_branch)

    p = sub.add_parser("factor-cones", help="factor a cone-valued function")
    p.add_argument("fn")
    p.add_argument("at")
    p.add_argument("--tree", default=None)
    p.set_defaults(func=cmd_factor_cones)

    p = sub.add_parser("vgroup-nf", help="value-group normal form")
    p.add_argument("fn")
    p.set_defaults(func=cmd_vgroup_nf)

    p = sub.add_parser("residue-nf", help="residue-field normal form")
    p.add_argument("fn")
    p.set_defaults(func=cmd_residue_nf)

    p = sub.add_parser("t-decompose", help="decompose a subset of the internal tree")
    p.add_argument("tree")
    p.add_argument("nodes")
    p.set_defaults(func=cmd_t_decompose)

    p = sub.add_parser("suite", help="run the deterministic verification battery")
    p.set_defaults(func=cmd_suite)

    return parser


def _error(code: str, message: str, witness=None) -> None:
    sys.stderr.write(
        json.dumps(
            {"code": code, "message": message, "witness": witness}, sort_keys=True
        )
        + "\n"
    )


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        _error("MALFORMED_INPUT", str(exc))
        return 1
    except NotLocallyConstantError as exc:
        _error("NOT_LOCALLY_CONSTANT", str(exc), witness=exc.witness)
        return 2
    except PrecisionError as exc:
        _error("PRECISION_EXHAUSTED", str(exc))
        return 2
    except (ValueError, KeyError) as exc:
        _error("PRECONDITION", str(exc))
        return 2


if __name__ == "__main__":
    sys.exit(main())
