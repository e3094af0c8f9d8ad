"""Weak normal form, 0-ary branch elimination and normal form.

The weak normal form is built by repeatedly lifting an innermost block out
of the formula.  A block with a free variable ``y`` becomes a fresh unary
atom ``@P_i(y)`` plus the conjunct ``forall y <block prefix> (not @P_i(y) or
matrix)``; a closed block below the top becomes a fresh 0-ary ``@E_i`` that
guards the lifted block.  Only one direction of each definition is written,
which is sound because the input is in negation normal form.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .formula import (
    EXISTS, FORALL, TRUE, And, Atom, Const, Eq, Formula, Not, Or, Quant, Signature,
    free_variables, is_quantifier_free, render_formula, render_signature, simplify,
    subformulas, substitute_props,
)
from .fragment import AUF1_MINUS, MembershipReport, check_fragment
from .semantics import Structure, evaluate

FRESH_PREFIX = "@"


class FragmentViolation(ValueError):
    def __init__(self, report: MembershipReport, message: str | None = None):
        self.report = report
        detail = "; ".join(str(v) for v in report.violations)
        super().__init__(message or f"not in {report.fragment}: {detail}")


class NotASentence(ValueError):
    pass


@dataclass(frozen=True)
class WeakConjunct:
    """``guard -> prefix matrix``; ``guard`` is a 0-ary relation name or None."""

    guard: str | None
    prefix: tuple[tuple[str, str], ...]
    matrix: Formula

    @property
    def k(self) -> int:
        return len(self.prefix)

    @property
    def universal(self) -> bool:
        return all(kind == FORALL for kind, _ in self.prefix)

    def body(self) -> Formula:
        return Quant(self.prefix, self.matrix) if self.prefix else self.matrix

    def to_formula(self) -> Formula:
        if self.guard is None:
            return self.body()
        return Or((Not(Atom(self.guard)), self.body()))


@dataclass(frozen=True)
class Rewrite:
    locator: str
    symbol: str
    variable: str | None      # None for a 0-ary replacement
    replaced: Formula          # the lifted block, over the extended signature


@dataclass(frozen=True)
class WeakNormalForm:
    conjuncts: tuple[WeakConjunct, ...]
    extended_signature: Signature
    trace: tuple[Rewrite, ...]
    source: Formula
    source_signature: Signature

    def to_formula(self) -> Formula:
        parts = tuple(c.to_formula() for c in self.conjuncts)
        return And(parts) if parts else TRUE

    def fresh_symbols(self) -> list[str]:
        return [r.symbol for r in self.trace]


@dataclass(frozen=True)
class ExistentialConjunct:
    prefix: tuple[tuple[str, str], ...]
    matrix: Formula

    @property
    def k(self) -> int:
        return len(self.prefix)

    @property
    def variables(self) -> tuple[str, ...]:
        return tuple(v for _, v in self.prefix)

    @property
    def kinds(self) -> tuple[str, ...]:
        return tuple(k for k, _ in self.prefix)

    def suffix(self, j: int) -> Formula:
        """The formula from quantifier position ``j`` (0-based) on."""
        return Quant(self.prefix[j:], self.matrix) if j < len(self.prefix) else self.matrix

    def to_formula(self) -> Formula:
        return Quant(self.prefix, self.matrix)


@dataclass(frozen=True)
class UniversalConjunct:
    variables: tuple[str, ...]
    matrix: Formula

    @property
    def l(self) -> int:
        return len(self.variables)

    def to_formula(self) -> Formula:
        return Quant(tuple((FORALL, v) for v in self.variables), self.matrix)


@dataclass(frozen=True)
class NormalForm:
    existential: tuple[ExistentialConjunct, ...]
    universal: tuple[UniversalConjunct, ...]
    signature: Signature
    valuation: tuple[tuple[str, bool], ...] = field(default=())

    @property
    def m_exists(self) -> int:
        return len(self.existential)

    @property
    def K(self) -> int:
        return max((c.k for c in self.existential), default=0)

    @property
    def bits(self) -> str:
        return "".join("1" if v else "0" for _, v in self.valuation)

    def to_formula(self) -> Formula:
        parts = tuple(c.to_formula() for c in self.existential) + tuple(c.to_formula() for c in self.universal)
        return And(parts) if parts else TRUE

    def __post_init__(self):
        for c in self.existential:
            if c.k < 1 or c.prefix[-1][0] != EXISTS:
                raise ValueError("existential conjuncts end with an existential quantifier")
            if not is_quantifier_free(c.matrix):
                raise ValueError("conjunct matrices are quantifier-free")
        for c in self.universal:
            if c.l < 1 or not is_quantifier_free(c.matrix):
                raise ValueError("universal conjuncts bind at least one variable over a quantifier-free matrix")


def normal_form(existential=(), universal=(), signature: Signature | None = None) -> NormalForm:
    """Convenience constructor from formulas ``Q.. matrix`` / ``forall.. matrix``."""
    ex = []
    for f in existential:
        ex.append(f if isinstance(f, ExistentialConjunct) else ExistentialConjunct(f.prefix, f.body))
    un = []
    for f in universal:
        if isinstance(f, UniversalConjunct):
            un.append(f)
        else:
            if any(k != FORALL for k, _ in f.prefix):
                raise ValueError("universal conjunct with an existential quantifier")
            un.append(UniversalConjunct(f.variables, f.body))
    return NormalForm(tuple(ex), tuple(un), signature or Signature())


# ------------------------------------------------------------ weak form


def to_weak_normal_form(f: Formula, sig: Signature) -> WeakNormalForm:
    if free_variables(f):
        raise NotASentence(f"free variables {sorted(free_variables(f))}")
    for name in sig.names:
        if name.startswith(FRESH_PREFIX):
            raise ValueError(f"relation names starting with {FRESH_PREFIX!r} are reserved: {name}")
    report = check_fragment(f, AUF1_MINUS, allow_equality=sig.equality_allowed)
    if not report.accepted:
        raise FragmentViolation(report)
    g = report.blocks
    builder = _Lifter(sig)
    parts = list(g.children) if isinstance(g, And) else [g]
    top: list[WeakConjunct] = []
    ground_parts: list[Formula] = []
    ground_at = None
    for i, part in enumerate(parts):
        if isinstance(part, Quant):
            body = builder.lift(part.body, f"/{i}/0" if len(parts) > 1 else "/0")
            top.append(WeakConjunct(None, part.prefix, body))
        else:
            if ground_at is None:
                ground_at = len(top)
                top.append(None)  # placeholder for the combined k=0 conjunct
            ground_parts.append(builder.lift(part, f"/{i}" if len(parts) > 1 else "/"))
    if ground_at is not None:
        top[ground_at] = WeakConjunct(None, (), ground_parts[0] if len(ground_parts) == 1 else And(tuple(ground_parts)))
    return WeakNormalForm(tuple(top) + tuple(builder.conjuncts), builder.signature(),
                          tuple(builder.trace), f, sig)


class _Lifter:
    def __init__(self, sig: Signature):
        self.base = sig
        self.fresh: list[tuple[str, int]] = []
        self.conjuncts: list[WeakConjunct] = []
        self.trace: list[Rewrite] = []
        self.n_unary = 0
        self.n_prop = 0

    def signature(self) -> Signature:
        return self.base.extend(self.fresh)

    def lift(self, f: Formula, where: str) -> Formula:
        """Replace every block inside ``f`` (innermost, leftmost first)."""
        if isinstance(f, Quant):
            block = Quant(f.prefix, self.lift(f.body, where + "/0"))
            free = sorted(free_variables(block))
            if free:
                (y,) = free  # one-dimensionality
                self.n_unary += 1
                name = f"{FRESH_PREFIX}P_{self.n_unary}"
                self.fresh.append((name, 1))
                guard = Not(Atom(name, (y,)))
                rest = block.body.children if isinstance(block.body, Or) else (block.body,)
                self.conjuncts.append(WeakConjunct(None, ((FORALL, y),) + block.prefix, Or((guard,) + rest)))
                self.trace.append(Rewrite(where, name, y, block))
                return Atom(name, (y,))
            self.n_prop += 1
            name = f"{FRESH_PREFIX}E_{self.n_prop}"
            self.fresh.append((name, 0))
            self.conjuncts.append(WeakConjunct(name, block.prefix, block.body))
            self.trace.append(Rewrite(where, name, None, block))
            return Atom(name)
        if isinstance(f, Not):
            return Not(self.lift(f.child, where + "/0"))
        if isinstance(f, (And, Or)):
            return type(f)(tuple(self.lift(c, f"{where}/{i}") for i, c in enumerate(f.children)))
        return f


def render_weak_normal_form(w: WeakNormalForm) -> str:
    return render_signature(w.extended_signature) + render_formula(w.to_formula()) + "\n"


# -------------------------------------------------------- 0-ary branches


def zero_ary_branches(w: WeakNormalForm) -> list[NormalForm]:
    """One normal form per surviving valuation of the 0-ary symbols, in binary
    counting order over the symbols' declaration order."""
    props = w.extended_signature.props()
    sig = w.extended_signature.restrict(lambda n, k: k >= 1)
    out = []
    for bits in itertools.product((False, True), repeat=len(props)):
        values = dict(zip(props, bits))
        nf = _branch(w, values, sig)
        if nf is not None:
            out.append(nf)
    return out


def branch_for(w: WeakNormalForm, values: dict[str, bool]) -> NormalForm | None:
    """The normal form for one 0-ary valuation, or None if it is contradictory."""
    props = w.extended_signature.props()
    missing = set(props) - set(values)
    if missing:
        raise ValueError(f"no value for 0-ary symbols {sorted(missing)}")
    return _branch(w, {p: values[p] for p in props}, w.extended_signature.restrict(lambda n, k: k >= 1))


def branch_from_bits(w: WeakNormalForm, bits: str) -> NormalForm | None:
    props = w.extended_signature.props()
    if len(bits) != len(props) or set(bits) - {"0", "1"}:
        raise ValueError(f"expected {len(props)} bits for 0-ary symbols {list(props)}, got {bits!r}")
    return branch_for(w, {p: b == "1" for p, b in zip(props, bits)})


def _branch(w: WeakNormalForm, values: dict[str, bool], sig: Signature) -> NormalForm | None:
    existential, universal = [], []
    for c in w.conjuncts:
        if c.guard is not None and not values[c.guard]:
            continue
        matrix = simplify(substitute_props(c.matrix, values))
        if isinstance(matrix, Const):
            if not matrix.value:
                return None
            continue
        if not c.prefix:
            raise AssertionError("k=0 conjunct did not reduce to a constant")
        if c.universal:
            universal.append(UniversalConjunct(tuple(v for _, v in c.prefix), matrix))
        else:
            existential.append(ExistentialConjunct(c.prefix, matrix))
    return NormalForm(tuple(existential), tuple(universal), sig, tuple(values.items()))


def render_normal_form(nf: NormalForm) -> str:
    parts = [c.to_formula() for c in nf.existential] + [c.to_formula() for c in nf.universal]
    body = "(and " + " ".join(render_formula(p) for p in parts) + ")" if parts else "(true)"
    header = f"; branch {nf.bits}\n" if nf.valuation else ""
    return header + render_signature(nf.signature) + body + "\n"


# -------------------------------------------------------- model expansion


def expand_model(s: Structure, w: WeakNormalForm) -> Structure:
    """Interpret every fresh symbol by the truth set of the block it replaced."""
    if not evaluate(s.reduct(w.source_signature) if s.signature != w.source_signature else s, w.source):
        raise ValueError("the structure is not a model of the source formula")
    cur = s.reduct(w.source_signature).expand(w.extended_signature, {})
    for r in w.trace:
        if r.variable is None:
            cur = cur.replace(**{r.symbol: [()] if evaluate(cur, r.replaced) else []})
        else:
            cur = cur.replace(**{r.symbol: [(a,) for a in cur.domain if evaluate(cur, r.replaced, {r.variable: a})]})
    for c in w.conjuncts:
        if not evaluate(cur, c.to_formula()):
            raise AssertionError(f"expansion violates conjunct {render_formula(c.to_formula())}")
    return cur


def branch_of_model(w: WeakNormalForm, expanded: Structure) -> NormalForm:
    """The branch selected by the 0-ary values of an expanded model."""
    nf = branch_for(w, {p: expanded.prop(p) for p in w.extended_signature.props()})
    if nf is None:
        raise ValueError("the model's 0-ary values falsify a ground conjunct")
    return nf


def branch_structure(expanded: Structure, nf: NormalForm) -> Structure:
    return expanded.reduct(nf.signature)


# ----------------------------------------------------------- Maslov shape


@dataclass(frozen=True)
class ShapeReport:
    kind: str          # "existential" or "universal"
    index: int
    ok: bool
    problems: tuple[str, ...] = ()


def check_maslov_shape(nf: NormalForm) -> tuple[bool, list[ShapeReport]]:
    """Match each conjunct against the prenex shape of the dual Maslov class.

    Universal conjuncts: every atom has at most one variable or contains all
    the universal variables.  Existential conjuncts: every atom has at most
    one variable or its last-quantified variable is existential.  Equality
    is not allowed in either.
    """
    reports = []
    for i, c in enumerate(nf.universal):
        problems = []
        xs = set(c.variables)
        for atom in _atoms(c.matrix, problems):
            vs = set(atom.args)
            if len(vs) <= 1 or vs == xs:
                continue
            problems.append(f"atom {atom} has neither at most one variable nor all of {sorted(xs)}")
        reports.append(ShapeReport("universal", i, not problems, tuple(problems)))
    for i, c in enumerate(nf.existential):
        problems = []
        position = {v: j for j, v in enumerate(c.variables)}
        for atom in _atoms(c.matrix, problems):
            vs = set(atom.args)
            if len(vs) <= 1:
                continue
            last = max(position.get(v, -1) for v in vs)
            if last < 0 or c.prefix[last][0] != EXISTS:
                problems.append(f"atom {atom}: its last-quantified variable is not existential")
        reports.append(ShapeReport("existential", i, not problems, tuple(problems)))
    return all(r.ok for r in reports), reports


def _atoms(matrix: Formula, problems: list[str]):
    for _, node in subformulas(matrix):
        if isinstance(node, Eq):
            problems.append(f"equality {render_formula(node)}")
        elif isinstance(node, Quant):
            problems.append("quantifier inside the matrix")
        elif isinstance(node, Atom):
            yield node
