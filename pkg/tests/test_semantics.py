import itertools

import pytest
from hypothesis import given, settings, strategies as st

from auf1m.formula import Atom, Signature, infer_blocks, parse_formula, to_nnf
from auf1m.normal_form import normal_form
from auf1m.semantics import (
    EvaluationError, NoCompletion, OneType, Structure, UndefinedAtom, all_one_types, complete_pre,
    covering_tuples, evaluate, evaluate_pre, is_forall_compatible, is_typeset_compatible,
    one_type_of, parse_structure, pre_structure, pre_substructure, render_structure,
)
from auf1m.sexpr import ParseError
from auf1m.solver import enumerate_structures
from helpers import corpus

SIG = Signature.of(P=1, R=2)


def cycle(n):
    return Structure(SIG, n, {"R": [(i, (i + 1) % n) for i in range(n)]})


def test_evaluate_examples():
    f = parse_formula("(forall (x) (exists (y) (R x y)))", SIG)
    g = parse_formula("(exists (x) (R x x))", SIG)
    assert evaluate(cycle(3), f) and not evaluate(cycle(3), g)
    assert evaluate(cycle(1), g)
    assert evaluate(cycle(3), Atom("R", ("x", "y")), {"x": 2, "y": 0})


def test_unbound_variable():
    with pytest.raises(EvaluationError):
        evaluate(cycle(2), Atom("R", ("x", "y")), {"x": 0})


def test_structure_validation():
    with pytest.raises(ValueError):
        Structure(SIG, 0)
    with pytest.raises(ValueError):
        Structure(SIG, 2, {"R": [(0, 2)]})
    with pytest.raises(ValueError):
        Structure(SIG, 2, {"Q": [(0,)]})


def test_structure_round_trip():
    s = Structure(Signature.of(A=0, P=1, R=2), 3, {"A": [()], "P": [(1,)], "R": [(0, 1), (2, 2)]})
    text = render_structure(s)
    assert text.startswith("(size 3)\n(prop A true)")
    assert parse_structure(text, s.signature) == s


@pytest.mark.parametrize("text", ["", "(size 0)", "(size 2)(rel R (0 5))", "(size 2)(rel Q (0))",
                                  "(size 2)(rel R (0))", "(size 2)(rel R)(rel R)"])
def test_structure_parse_errors(text):
    with pytest.raises(ParseError):
        parse_structure(text, SIG)


def test_one_types():
    s = Structure(SIG, 2, {"P": [(1,)], "R": [(1, 1), (0, 1)]})
    assert one_type_of(s, 0) == OneType.from_true(SIG, [])
    assert one_type_of(s, 1) == OneType.from_true(SIG, ["P", "R"])
    assert len(all_one_types(SIG)) == 4


def test_pre_structure_fixes_diagonal_and_covering_atoms():
    sig = Signature.of(P=1, R=2, T=3)
    s = Structure(sig, 3, {"R": [(0, 1), (1, 2)], "T": [(0, 1, 2), (2, 2, 2)]})
    p = pre_substructure(s, [0, 1])
    assert p.value("R", (0, 1)) and not p.value("R", (1, 0))
    with pytest.raises(UndefinedAtom):
        p.value("T", (0, 1, 2))
    q = pre_substructure(s, [0, 1, 2])
    assert q.value("T", (0, 1, 2)) and q.value("T", (2, 2, 2))
    with pytest.raises(UndefinedAtom):
        q.value("R", (0, 1))     # R cannot cover three elements
    assert len(covering_tuples(sig, [0, 1, 2])) == 6


def test_evaluate_pre_matches_structure_on_defined_atoms():
    s = cycle(3)
    p = pre_substructure(s, [0, 1])
    f = parse_formula("(or (R x y) (not (R y x)))", SIG)
    assert evaluate_pre(p, f, {"x": 0, "y": 1}) == evaluate(s, f, {"x": 0, "y": 1})


def test_forall_compatibility():
    nf = normal_form(universal=[parse_formula("(forall (x y) (or (not (R x y)) (R y x)))", SIG)], signature=SIG)
    t0 = OneType.from_true(SIG, [])
    sym = pre_structure(SIG, {0: t0, 1: t0}, [("R", (0, 1)), ("R", (1, 0))])
    asym = pre_structure(SIG, {0: t0, 1: t0}, [("R", (0, 1))])
    assert is_forall_compatible(sym, nf) and not is_forall_compatible(asym, nf)


def test_typeset_compatibility_and_completion():
    # P-elements and non-P elements must be R-related, but R is irreflexive-ish on P
    nf = normal_form(universal=[
        parse_formula("(forall (x y) (or (P x) (not (P y)) (R x y)))", SIG),
        parse_formula("(forall (x) (not (R x x)))", SIG),
    ], signature=SIG)
    p, n = OneType.from_true(SIG, ["P"]), OneType.from_true(SIG, [])
    assert is_typeset_compatible([p, n], nf)
    pre = complete_pre([(3, n), (5, p)], nf)
    assert pre.value("R", (3, 5)) and not pre.value("R", (5, 3))
    bad = OneType.from_true(SIG, ["R"])
    assert not is_typeset_compatible([bad], nf)
    with pytest.raises(NoCompletion):
        complete_pre([(0, bad)], nf)


def test_complete_pre_is_least():
    nf = normal_form(universal=[parse_formula("(forall (x y) (or (R x y) (R y x)))", SIG)], signature=SIG)
    t = OneType.from_true(SIG, ["R"])
    pre = complete_pre([(0, t), (1, t)], nf)
    # R(0,1) is the more significant atom, so it is left false
    assert not pre.value("R", (0, 1)) and pre.value("R", (1, 0))


# ------------------------------------------------------------- properties


@st.composite
def structures(draw, sig):
    n = draw(st.integers(1, 3))
    rels = {}
    for name, k in sig.relations:
        tuples = list(itertools.product(range(n), repeat=k))
        rels[name] = [t for t in tuples if draw(st.booleans())]
    return Structure(sig, n, rels)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 119), st.data())
def test_nnf_and_blocks_preserve_truth(i, data):
    sig, f = corpus()[i]
    s = data.draw(structures(sig))
    v = evaluate(s, f)
    assert evaluate(s, to_nnf(f)) == v
    assert evaluate(s, infer_blocks(f)) == v


@settings(max_examples=40, deadline=None)
@given(structures(Signature.of(A=0, P=1, R=2)))
def test_structure_render_round_trip(s):
    assert parse_structure(render_structure(s), s.signature) == s


def test_enumeration_counts():
    assert sum(1 for _ in enumerate_structures(SIG, 2)) == 2 ** 6
    # directed graphs with loops on two unlabelled vertices
    assert sum(1 for _ in enumerate_structures(Signature.of(R=2), 2, isomorphism_pruning=True)) == 10


def test_nnf_preserves_truth_exhaustively():
    for sig, f in corpus():
        g = to_nnf(f)
        for n in (1, 2):
            for s in enumerate_structures(sig, n):
                assert evaluate(s, g) == evaluate(s, f)
