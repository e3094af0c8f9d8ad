"""Command-line front end.

Every command that decides something prints its verdict on the first line
of standard output.  Exit codes: 0 SAT/ACCEPT/PASS, 1 UNSAT/REJECT/FAIL,
2 UNSAT-UP-TO or UNKNOWN, 3 malformed input.
"""

from __future__ import annotations

import argparse
import os
import sys

from .forest import (
    ExtractionError, BuildError, build_model, extract_forest, parse_forest, render_forest, verify_forest,
)
from .formula import FormulaError, parse_file, render_file, to_nnf
from .fragment import AUF1_MINUS, check_fragment, fragment_name, UnknownFragment
from .normal_form import (
    FragmentViolation, NotASentence, branch_from_bits, branch_of_model, expand_model,
    render_normal_form, render_weak_normal_form, to_weak_normal_form, zero_ary_branches,
)
from .semantics import EvaluationError, NoCompletion, Structure, evaluate, parse_structure, render_structure
from .sexpr import ParseError
from .smallmodel import ShrinkError, build_ext, render_ext, shrink
from .solver import SAT, UNKNOWN, UNSAT_COMPLETE, SearchConfig, decide, solve_bounded

EXIT_OK, EXIT_NO, EXIT_OPEN, EXIT_INPUT = 0, 1, 2, 3


class InputError(Exception):
    pass


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None


def _load_formula(path: str, allow_equality: bool = False):
    try:
        return parse_file(_read(path), allow_equality=allow_equality)
    except ParseError as exc:
        raise InputError(f"{path}:{exc}") from None


def _load_structure(path: str, sig):
    try:
        return parse_structure(_read(path), sig)
    except ParseError as exc:
        raise InputError(f"{path}:{exc}") from None


def _weak(f, sig):
    try:
        return to_weak_normal_form(f, sig)
    except FragmentViolation as exc:
        raise InputError(str(exc)) from None


class _Out:
    def __init__(self, path: str | None):
        self.path = path
        self.parts: list[str] = []

    def write(self, text: str):
        self.parts.append(text if text.endswith("\n") else text + "\n")

    def flush(self):
        text = "".join(self.parts)
        if self.path:
            with open(self.path, "w", encoding="utf-8") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)


def _note(msg: str):
    print(msg, file=sys.stderr)


# ---------------------------------------------------------------- commands


def cmd_check(args, out: _Out) -> int:
    sig, f = _load_formula(args.file, args.allow_equality)
    report = check_fragment(f, args.fragment, allow_equality=args.allow_equality)
    out.write("ACCEPT" if report.accepted else "REJECT")
    for v in report.violations:
        out.write(str(v))
    for n in report.notes:
        _note(f"note: {n}")
    return EXIT_OK if report.accepted else EXIT_NO


def cmd_nnf(args, out: _Out) -> int:
    sig, f = _load_formula(args.file, args.allow_equality)
    out.write(render_file(sig, to_nnf(f)))
    return EXIT_OK


def cmd_normalize(args, out: _Out) -> int:
    sig, f = _load_formula(args.file, args.allow_equality)
    w = _weak(f, sig)
    if args.branch is not None:
        try:
            nf = branch_from_bits(w, args.branch)
        except ValueError as exc:
            raise InputError(str(exc)) from None
        if nf is None:
            raise InputError(f"branch {args.branch} falsifies a ground conjunct")
        out.write(render_normal_form(nf))
    elif args.all or args.out_dir:
        branches = zero_ary_branches(w)
        if args.out_dir:
            os.makedirs(args.out_dir, exist_ok=True)
            for nf in branches:
                name = (nf.bits or "nf") + ".fol"
                with open(os.path.join(args.out_dir, name), "w", encoding="utf-8") as fh:
                    fh.write(render_normal_form(nf))
            _note(f"wrote {len(branches)} branch file(s) to {args.out_dir}")
        else:
            for nf in branches:
                out.write(render_normal_form(nf))
    else:
        out.write(render_weak_normal_form(w))
    return EXIT_OK


def cmd_solve(args, out: _Out) -> int:
    sig, f = _load_formula(args.file, args.allow_equality)
    cfg = SearchConfig(args.max_size, args.prune_iso, args.time_budget)
    report = check_fragment(f, AUF1_MINUS, allow_equality=args.allow_equality)
    try:
        if report.accepted:
            res = decide(f, sig, cfg)
        else:
            _note("note: not in AUF1minus; searching for models of the formula directly")
            for v in report.violations:
                _note(f"note: {v}")
            res = solve_bounded(f, cfg, sig)
    except NotASentence as exc:
        raise InputError(str(exc)) from None
    out.write(res.verdict)
    if res.status == SAT:
        out.write(render_structure(res.model))
        return EXIT_OK
    if res.status == UNKNOWN:
        _note("note: time budget exhausted")
    return EXIT_NO if res.status == UNSAT_COMPLETE else EXIT_OPEN


def cmd_model_check(args, out: _Out) -> int:
    sig, f = _load_formula(args.formula, args.allow_equality)
    s = _load_structure(args.structure, sig)
    try:
        ok = evaluate(s, f)
    except EvaluationError as exc:
        raise InputError(str(exc)) from None
    out.write("PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_NO


def _branch_and_model(args):
    sig, f = _load_formula(args.formula)
    s = _load_structure(args.structure, sig)
    w = _weak(f, sig)
    try:
        expanded = expand_model(s, w)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    nf = branch_of_model(w, expanded)
    return sig, f, w, nf, expanded


def cmd_forest_extract(args, out: _Out) -> int:
    _, _, _, nf, expanded = _branch_and_model(args)
    out.write(render_forest(extract_forest(expanded.reduct(nf.signature), nf, nf.bits)))
    return EXIT_OK


def _forest_branch(args):
    sig, f = _load_formula(args.formula)
    w = _weak(f, sig)
    try:
        fst = parse_forest(_read(args.forest), w.extended_signature.restrict(lambda n, k: k >= 1))
    except ParseError as exc:
        raise InputError(f"{args.forest}:{exc}") from None
    if fst.branch is not None:
        try:
            nf = branch_from_bits(w, fst.branch)
        except ValueError as exc:
            raise InputError(str(exc)) from None
        if nf is None:
            raise InputError(f"branch {fst.branch} falsifies a ground conjunct")
    else:
        branches = zero_ary_branches(w)
        if len(branches) != 1:
            raise InputError(f"the formula has {len(branches)} branches; add (branch BITS) to the forest")
        nf = branches[0]
    return sig, f, nf, fst


def cmd_forest_verify(args, out: _Out) -> int:
    _, _, nf, fst = _forest_branch(args)
    rep = verify_forest(fst, nf)
    out.write("PASS" if rep.passed else "FAIL")
    out.write(rep.render())
    return EXIT_OK if rep.passed else EXIT_NO


def cmd_forest_to_model(args, out: _Out) -> int:
    sig, f, nf, fst = _forest_branch(args)
    try:
        model = build_model(fst, nf)
    except BuildError as exc:
        out.write("FAIL")
        _note(f"error: {exc}")
        return EXIT_NO
    out.write(render_structure(_with_props(model, nf, sig)))
    return EXIT_OK


def _with_props(model: Structure, nf, sig) -> Structure:
    values = dict(nf.valuation)
    rels = {name: (([()] if values[name] else []) if k == 0 else model.relation(name))
            for name, k in sig.relations}
    return Structure(sig, model.size, rels)


def cmd_shrink(args, out: _Out) -> int:
    sig, f, w, nf, expanded = _branch_and_model(args)
    if nf.m_exists == 0:
        raise InputError("the branch has no existential conjuncts; a single element of the model is a model")
    res = shrink(expanded.reduct(nf.signature), nf, nf.bits)
    _note(f"note: source size {expanded.size}, small domain |B| = {res.domain.size} "
          f"(K={res.domain.K}, m={res.domain.m_exists}, L={res.domain.L})")
    if args.forest:
        with open(args.forest, "w", encoding="utf-8") as fh:
            fh.write(render_forest(res.forest))
    out.write(render_structure(_with_props(res.model, nf, sig)))
    return EXIT_OK


def cmd_ext_fn(args, out: _Out) -> int:
    if args.K < 1:
        raise InputError("K must be at least 1")
    out.write(render_ext(build_ext(args.K)))
    return EXIT_OK


# ------------------------------------------------------------------ parser


def _fragment(text: str) -> str:
    try:
        return fragment_name(text)
    except UnknownFragment as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="auf1m", description="Satisfiability tools for the AUF1minus fragment.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-o", "--output", help="write the main output to this file instead of stdout")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", parents=[common], help="fragment membership")
    c.add_argument("--fragment", required=True, type=_fragment, help="suf1, auf1, auf1m or fo2")
    c.add_argument("--allow-equality", action="store_true")
    c.add_argument("file")
    c.set_defaults(func=cmd_check)

    c = sub.add_parser("nnf", parents=[common], help="negation normal form")
    c.add_argument("--allow-equality", action="store_true")
    c.add_argument("file")
    c.set_defaults(func=cmd_nnf)

    c = sub.add_parser("normalize", parents=[common], help="weak normal form, or its 0-ary branches")
    c.add_argument("--allow-equality", action="store_true")
    g = c.add_mutually_exclusive_group()
    g.add_argument("--branch", metavar="BITS", help="the normal form for one 0-ary valuation")
    g.add_argument("--all", action="store_true", help="every surviving branch")
    c.add_argument("--out-dir", help="write one file per branch, named by its bit string")
    c.add_argument("file")
    c.set_defaults(func=cmd_normalize)

    c = sub.add_parser("solve", parents=[common], help="bounded satisfiability search")
    c.add_argument("file")
    c.add_argument("--max-size", type=int, required=True)
    c.add_argument("--allow-equality", action="store_true")
    c.add_argument("--prune-iso", action="store_true", help="break symmetry between elements")
    c.add_argument("--time-budget", type=int, metavar="SECS")
    c.set_defaults(func=cmd_solve)

    c = sub.add_parser("model-check", parents=[common], help="evaluate a formula in a structure")
    c.add_argument("--allow-equality", action="store_true")
    c.add_argument("formula")
    c.add_argument("structure")
    c.set_defaults(func=cmd_model_check)

    c = sub.add_parser("forest-extract", parents=[common], help="satisfaction forest of a model")
    c.add_argument("formula")
    c.add_argument("structure")
    c.set_defaults(func=cmd_forest_extract)

    c = sub.add_parser("forest-verify", parents=[common], help="check the forest conditions")
    c.add_argument("formula")
    c.add_argument("forest")
    c.set_defaults(func=cmd_forest_verify)

    c = sub.add_parser("forest-to-model", parents=[common], help="build a model from a satisfaction forest")
    c.add_argument("formula")
    c.add_argument("forest")
    c.set_defaults(func=cmd_forest_to_model)

    c = sub.add_parser("shrink", parents=[common], help="rebuild a model over the small domain")
    c.add_argument("formula")
    c.add_argument("structure")
    c.add_argument("--forest", help="also write the small satisfaction forest here")
    c.set_defaults(func=cmd_shrink)

    c = sub.add_parser("ext-fn", parents=[common], help="print an extension function")
    c.add_argument("K", type=int)
    c.set_defaults(func=cmd_ext_fn)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    if getattr(args, "max_size", 1) < 1:
        _note("error: --max-size must be at least 1")
        return EXIT_INPUT
    out = _Out(args.output)
    try:
        code = args.func(args, out)
    except (InputError, ParseError, FormulaError) as exc:
        _note(f"error: {exc}")
        return EXIT_INPUT
    except (ExtractionError, ShrinkError, NoCompletion) as exc:
        _note(f"error: {exc}")
        return EXIT_INPUT
    out.flush()
    return code


def run_cli(argv) -> int:
    return main(list(argv))


if __name__ == "__main__":
    sys.exit(main())
