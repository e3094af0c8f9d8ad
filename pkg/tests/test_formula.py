import pytest

from auf1m.formula import (
    EXISTS, FORALL, And, Atom, Const, Eq, FormulaError, Imp, Not, Or, Quant, Signature,
    check_signature, exists, forall, free_variables, infer_blocks, is_nnf, parse_file,
    parse_formula, render_file, render_formula, simplify, substitute_props, to_nnf,
)
from auf1m.sexpr import ParseError
from helpers import CORPUS

SIG = Signature.of(P=1, Q=1, R=2, S=4, T=3)


def test_parse_simple_block():
    f = parse_formula("(forall (x) (exists (y) (R x y)))", SIG)
    assert f == Quant(((FORALL, "x"), (EXISTS, "y")), Atom("R", ("x", "y")))


def test_parse_guarded_example():
    text = "(forall (x y z) (imp (and (P x)(P y)(P z)) (or (T x y z) (not (S z z x y)))))"
    f = parse_formula(text, SIG)
    assert f.prefix == ((FORALL, "x"), (FORALL, "y"), (FORALL, "z"))
    assert isinstance(f.body, Imp)
    assert f.body.consequent.children[1] == Not(Atom("S", ("z", "z", "x", "y")))


def test_arity_mismatch_is_reported_with_position():
    with pytest.raises(ParseError) as exc:
        parse_formula("(R x)", SIG)
    assert "arity" in str(exc.value)
    assert exc.value.line == 1 and exc.value.col == 1


@pytest.mark.parametrize("text, fragment", [
    ("(forall (x) (U x))", "undeclared"),
    ("(forall (x) (P x)", "unbalanced"),
    ("(forall (x x) (P x))", "repeated"),
    ("(= x y)", "equality"),
    ("(and)", "at least one"),
    ("(imp (P x))", "two formulas"),
    ("(forall () (P x))", "empty variable"),
    ("(not (P x) (P y))", "exactly one"),
])
def test_parse_errors(text, fragment):
    with pytest.raises(ParseError) as exc:
        parse_formula(text, SIG)
    assert fragment in str(exc.value).lower() or fragment == "unbalanced"


def test_error_position_on_second_line():
    with pytest.raises(ParseError) as exc:
        parse_file("(decl P 1)\n(forall (x)\n   (Z x))")
    assert exc.value.line == 3 and exc.value.col == 5


def test_equality_when_allowed():
    f = parse_formula("(forall (x y) (or (= x y) (R x y)))", SIG.with_equality())
    assert Eq("x", "y") in f.body.children


def test_open_formulas_parse():
    f = parse_formula("(R x y)", SIG)
    assert free_variables(f) == {"x", "y"}


def test_declarations_extend_signature():
    sig, f = parse_file("; comment\n(decl A 0)\n(decl B 2)\n(and (A) (forall (x) (B x x)))")
    assert sig.relations == (("A", 0), ("B", 2))
    assert f.children[0] == Atom("A", ())


def test_redeclaration_rejected():
    with pytest.raises(ParseError):
        parse_file("(decl A 1)(decl A 2)(forall (x) (A x))")


def test_render_examples():
    assert render_formula(forall("x", exists("y", Atom("R", ("x", "y"))))) == "(forall (x) (exists (y) (R x y)))"
    assert render_formula(Atom("P", ("x",))) == "(P x)"
    assert render_formula(Const(False)) == "(false)"


@pytest.mark.parametrize("name", ["suf1_guarded", "suf1_nested", "auf1m_ternary",
                                  "auf1m_alternating", "auf1m_shared", "infinity_eq5"])
def test_round_trip_on_bundled_formulas(name):
    sig, f = parse_file((CORPUS / f"{name}.fol").read_text(), allow_equality=True)
    sig2, g = parse_file(render_file(sig, f), allow_equality=True)
    assert sig2 == sig and g == f


def test_nnf_examples():
    P, Q = Atom("P", ("x",)), Atom("Q", ("x",))
    assert to_nnf(Not(And((P, Q)))) == Or((Not(P), Not(Q)))
    assert to_nnf(Imp(P, Q)) == Or((Not(P), Q))
    f = Not(forall("x", exists("y", Atom("R", ("x", "y")))))
    assert infer_blocks(to_nnf(f)) == Quant(((EXISTS, "x"), (FORALL, "y")), Not(Atom("R", ("x", "y"))))


def test_nnf_is_idempotent_and_nnf():
    sig, f = parse_file((CORPUS / "suf1_nested.fol").read_text())
    g = to_nnf(f)
    assert is_nnf(g) and not is_nnf(f)
    assert to_nnf(g) == g


def test_free_variables_examples():
    assert free_variables(forall("x", Atom("R", ("x", "y")))) == {"y"}
    f = parse_formula("(forall (x y) (exists (z) (or (and (not (P x)) (not (P y))) (T x y z))))", SIG)
    assert free_variables(f) == set()
    g = And((Atom("P", ("x",)), exists("x", Atom("Q", ("x",)))))
    assert free_variables(g) == {"x"}


def test_infer_blocks_merges_and_is_idempotent():
    nested = Quant(((FORALL, "x"),), Quant(((EXISTS, "y"),), Atom("R", ("x", "y"))))
    merged = infer_blocks(nested)
    assert merged == Quant(((FORALL, "x"), (EXISTS, "y")), Atom("R", ("x", "y")))
    assert infer_blocks(merged) == merged


def test_infer_blocks_keeps_separated_blocks():
    inner = Quant(((EXISTS, "y"),), Quant(((FORALL, "z"),), Quant(((EXISTS, "t"),),
                                                                  Atom("S", ("x", "y", "z", "t")))))
    f = Quant(((FORALL, "x"),), Or((Atom("P", ("x",)), inner)))
    g = infer_blocks(f)
    assert g.prefix == ((FORALL, "x"),)
    assert g.body.children[1].prefix == ((EXISTS, "y"), (FORALL, "z"), (EXISTS, "t"))


def test_infer_blocks_does_not_merge_rebinding():
    f = Quant(((FORALL, "x"),), Quant(((EXISTS, "x"),), Atom("P", ("x",))))
    assert infer_blocks(f) == f


def test_block_rejects_repeated_variable():
    with pytest.raises(FormulaError):
        Quant(((FORALL, "x"), (EXISTS, "x")), Atom("P", ("x",)))


def test_check_signature():
    with pytest.raises(FormulaError):
        check_signature(Atom("R", ("x",)), SIG)
    with pytest.raises(FormulaError):
        check_signature(Eq("x", "y"), SIG)


def test_substitute_and_simplify():
    f = Or((Atom("E"), forall("x", Atom("P", ("x",)))))
    assert simplify(substitute_props(f, {"E": True})) == Const(True)
    assert simplify(substitute_props(f, {"E": False})) == forall("x", Atom("P", ("x",)))
    assert simplify(forall("x", And((Const(True), Const(False))))) == Const(False)
