import pytest

from auf1m.formula import Signature, parse_file, parse_formula
from auf1m.normal_form import to_weak_normal_form, zero_ary_branches
from auf1m.semantics import evaluate
from auf1m.solver import (
    SAT, UNKNOWN, UNSAT_COMPLETE, UNSAT_UP_TO, SearchConfig, SolveResult, atom_order, decide,
    enumerate_structures, find_model, solve_bounded, theoretical_bound,
)
from helpers import CORPUS, corpus

SIG = Signature.of(P=1, R=2)


def test_atom_order():
    assert atom_order(SIG, 2) == [("P", (0,)), ("P", (1,)), ("R", (0, 0)), ("R", (0, 1)),
                                  ("R", (1, 0)), ("R", (1, 1))]


def test_find_model_is_first_in_enumeration_order():
    for sig, f in corpus()[:60]:
        for n in (1, 2):
            first = next((s for s in enumerate_structures(sig, n) if evaluate(s, f)), None)
            assert find_model(f, sig, n) == first


def test_pruned_search_finds_a_model_iff_one_exists():
    for sig, f in corpus()[:60]:
        for n in (2, 3):
            plain = find_model(f, sig, n)
            pruned = find_model(f, sig, n, isomorphism_pruning=True)
            assert (plain is None) == (pruned is None)
            if pruned is not None:
                assert evaluate(pruned, f)


def test_solve_bounded_reports_least_size():
    f = parse_formula("(forall (x) (exists (y) (and (R x y) (not (R y x)))))", SIG)
    res = solve_bounded(f, SearchConfig(max_size=4), SIG)
    assert res.status == SAT and res.bound == 3 and res.verdict == "SAT"
    res = solve_bounded(f, SearchConfig(max_size=2), SIG)
    assert res.status == UNSAT_UP_TO and res.verdict == "UNSAT-UP-TO 2"


def test_config_validation():
    with pytest.raises(ValueError):
        SearchConfig(max_size=0)
    with pytest.raises(ValueError):
        solve_bounded(parse_formula("(forall (x) (P x))", SIG), SearchConfig())


def test_time_budget():
    sig, f = parse_file((CORPUS / "infinity_eq.fol").read_text(), allow_equality=True)
    res = solve_bounded(f, SearchConfig(max_size=6, time_budget=0.0), sig)
    assert res.status in (UNKNOWN, UNSAT_UP_TO)
    assert SolveResult(UNKNOWN).verdict == "UNKNOWN"


def test_theoretical_bound():
    sig, f = parse_file((CORPUS / "shrink_example.fol").read_text())
    nf, = zero_ary_branches(to_weak_normal_form(f, sig))
    # 2K * m * (K-1)^(K-1) * 2^|unary-and-up relations|
    assert theoretical_bound(nf) == 2 * 2 * 1 * 1 * 2


def test_decide_complete_unsat_within_the_bound():
    sig = Signature.of(P=1)
    f = parse_formula("(and (exists (x) (P x)) (forall (x) (not (P x))))", sig)
    # K = m = 1 and one relation, so sizes up to 2 * 2 = 4 settle it
    res = decide(f, sig, SearchConfig(max_size=4))
    assert res.status == UNSAT_COMPLETE and res.verdict == "UNSAT"
    assert decide(f, sig, SearchConfig(max_size=3)).status == UNSAT_UP_TO
    # with R in the signature the bound doubles
    assert decide(f, SIG, SearchConfig(max_size=4)).status == UNSAT_UP_TO


def test_decide_returns_models_of_the_input():
    sig, f = parse_file((CORPUS / "auf1m_shared.fol").read_text())
    res = decide(f, sig, SearchConfig(max_size=3))
    assert res.status == SAT and evaluate(res.model, f)
    assert res.model.signature == sig


def test_decide_with_zero_ary_relations():
    sig = Signature.of(A=0, P=1)
    f = parse_formula("(and (or (A) (exists (x) (P x))) (forall (x) (not (P x))))", sig)
    res = decide(f, sig, SearchConfig(max_size=2))
    assert res.status == SAT and res.model.prop("A")


def test_decide_equality_is_never_complete():
    sig = Signature.of(R=2).with_equality()
    f = parse_formula("(and (exists (x) (R x x)) (forall (x y) (or (= x y) (not (R x y)))) "
                      "(forall (x) (not (R x x))))", sig)
    res = decide(f, sig, SearchConfig(max_size=3))
    assert res.status == UNSAT_UP_TO


def test_corpus_statuses_are_stable():
    counts = {}
    for sig, f in corpus():
        st = decide(f, sig, SearchConfig(max_size=3)).status
        counts[st] = counts.get(st, 0) + 1
    assert counts == {SAT: 94, UNSAT_UP_TO: 15, UNSAT_COMPLETE: 11}
