"""First-order formulas over purely relational signatures.

Formulas are immutable trees.  Quantifiers come in blocks: a ``Quant`` node
carries a whole prefix such as ``((FORALL, "x"), (EXISTS, "y"))``.  The
concrete syntax is an s-expression language::

    (decl R 2)
    (forall (x) (exists (y) (R x y)))
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .sexpr import ParseError, SList, Symbol, expect_int, expect_list, expect_symbol, read_all, where

FORALL = "forall"
EXISTS = "exists"
KEYWORDS = frozenset({"decl", "not", "and", "or", "imp", "forall", "exists", "=", "true", "false"})


class FormulaError(ValueError):
    pass


@dataclass(frozen=True)
class Signature:
    """Relation symbols with arities, in declaration order."""

    relations: tuple[tuple[str, int], ...] = ()
    equality_allowed: bool = False
    _arity: dict = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        arity = {}
        for name, k in self.relations:
            if name in arity:
                raise FormulaError(f"relation {name} declared twice")
            if k < 0:
                raise FormulaError(f"relation {name} has negative arity")
            arity[name] = k
        object.__setattr__(self, "relations", tuple((n, int(k)) for n, k in self.relations))
        object.__setattr__(self, "_arity", arity)

    @classmethod
    def of(cls, equality_allowed: bool = False, **arities: int) -> "Signature":
        return cls(tuple(arities.items()), equality_allowed)

    def __contains__(self, name: str) -> bool:
        return name in self._arity

    def arity(self, name: str) -> int:
        try:
            return self._arity[name]
        except KeyError:
            raise FormulaError(f"undeclared relation {name}") from None

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.relations)

    def sorted_relations(self) -> list[tuple[str, int]]:
        return sorted(self.relations)

    def props(self) -> tuple[str, ...]:
        """0-ary relation names, in declaration order."""
        return tuple(n for n, k in self.relations if k == 0)

    def unary_and_up(self) -> list[tuple[str, int]]:
        return [(n, k) for n, k in sorted(self.relations) if k >= 1]

    def extend(self, more: Iterable[tuple[str, int]]) -> "Signature":
        return Signature(self.relations + tuple(more), self.equality_allowed)

    def restrict(self, keep) -> "Signature":
        return Signature(tuple((n, k) for n, k in self.relations if keep(n, k)), self.equality_allowed)

    def with_equality(self, allowed: bool = True) -> "Signature":
        return Signature(self.relations, allowed)


class Formula:
    __slots__ = ()

    def __str__(self) -> str:
        return render_formula(self)


@dataclass(frozen=True)
class Atom(Formula):
    rel: str
    args: tuple[str, ...] = ()


@dataclass(frozen=True)
class Eq(Formula):
    left: str
    right: str


@dataclass(frozen=True)
class Const(Formula):
    value: bool


@dataclass(frozen=True)
class Not(Formula):
    child: Formula


@dataclass(frozen=True)
class And(Formula):
    children: tuple[Formula, ...]


@dataclass(frozen=True)
class Or(Formula):
    children: tuple[Formula, ...]


@dataclass(frozen=True)
class Imp(Formula):
    antecedent: Formula
    consequent: Formula


@dataclass(frozen=True)
class Quant(Formula):
    prefix: tuple[tuple[str, str], ...]
    body: Formula

    def __post_init__(self):
        if not self.prefix:
            raise FormulaError("empty quantifier prefix")
        seen = set()
        for kind, var in self.prefix:
            if kind not in (FORALL, EXISTS):
                raise FormulaError(f"unknown quantifier {kind!r}")
            if var in seen:
                raise FormulaError(f"variable {var} repeated in one quantifier block")
            seen.add(var)

    @property
    def variables(self) -> tuple[str, ...]:
        return tuple(v for _, v in self.prefix)

    @property
    def kinds(self) -> tuple[str, ...]:
        return tuple(k for k, _ in self.prefix)


TRUE = Const(True)
FALSE = Const(False)

Prefix = tuple[tuple[str, str], ...]


def conj(*parts: Formula) -> Formula:
    return parts[0] if len(parts) == 1 else And(tuple(parts))


def disj(*parts: Formula) -> Formula:
    return parts[0] if len(parts) == 1 else Or(tuple(parts))


def forall(variables: str, body: Formula) -> Quant:
    return Quant(tuple((FORALL, v) for v in variables.split()), body)


def exists(variables: str, body: Formula) -> Quant:
    return Quant(tuple((EXISTS, v) for v in variables.split()), body)


def children(f: Formula) -> tuple[Formula, ...]:
    if isinstance(f, (And, Or)):
        return f.children
    if isinstance(f, Not):
        return (f.child,)
    if isinstance(f, Imp):
        return (f.antecedent, f.consequent)
    if isinstance(f, Quant):
        return (f.body,)
    return ()


def subformulas(f: Formula) -> Iterator[tuple[tuple[int, ...], Formula]]:
    """Pre-order walk yielding (path, node); a path is a tuple of child indices."""
    stack = [((), f)]
    while stack:
        path, node = stack.pop()
        yield path, node
        kids = children(node)
        for i in range(len(kids) - 1, -1, -1):
            stack.append((path + (i,), kids[i]))


def locator(path: tuple[int, ...]) -> str:
    return "/" + "/".join(map(str, path))


def size(f: Formula) -> int:
    """Node count, counting each bound variable of a block as one node."""
    total = 0
    for _, node in subformulas(f):
        total += 1 + (len(node.prefix) if isinstance(node, Quant) else 0)
    return total


def free_variables(f: Formula) -> frozenset[str]:
    if isinstance(f, Atom):
        return frozenset(f.args)
    if isinstance(f, Eq):
        return frozenset((f.left, f.right))
    if isinstance(f, Const):
        return frozenset()
    if isinstance(f, Quant):
        return free_variables(f.body) - set(f.variables)
    out: frozenset[str] = frozenset()
    for c in children(f):
        out |= free_variables(c)
    return out


def relations_used(f: Formula) -> set[str]:
    return {node.rel for _, node in subformulas(f) if isinstance(node, Atom)}


def uses_equality(f: Formula) -> bool:
    return any(isinstance(node, Eq) for _, node in subformulas(f))


def is_quantifier_free(f: Formula) -> bool:
    return not any(isinstance(node, Quant) for _, node in subformulas(f))


def is_nnf(f: Formula) -> bool:
    for _, node in subformulas(f):
        if isinstance(node, Imp):
            return False
        if isinstance(node, Not) and not isinstance(node.child, (Atom, Eq)):
            return False
    return True


def _dual(kind: str) -> str:
    return EXISTS if kind == FORALL else FORALL


def to_nnf(f: Formula) -> Formula:
    """Push negations down to atoms and eliminate implications."""
    return _nnf(f, False)


def _nnf(f: Formula, neg: bool) -> Formula:
    if isinstance(f, (Atom, Eq)):
        return Not(f) if neg else f
    if isinstance(f, Const):
        return Const(f.value != neg)
    if isinstance(f, Not):
        return _nnf(f.child, not neg)
    if isinstance(f, Imp):
        parts = (_nnf(f.antecedent, not neg), _nnf(f.consequent, neg))
        return And(parts) if neg else Or(parts)
    if isinstance(f, And):
        parts = tuple(_nnf(c, neg) for c in f.children)
        return Or(parts) if neg else And(parts)
    if isinstance(f, Or):
        parts = tuple(_nnf(c, neg) for c in f.children)
        return And(parts) if neg else Or(parts)
    if isinstance(f, Quant):
        prefix = tuple((_dual(k), v) for k, v in f.prefix) if neg else f.prefix
        return Quant(prefix, _nnf(f.body, neg))
    raise TypeError(f"not a formula: {f!r}")


def infer_blocks(f: Formula) -> Formula:
    """Merge directly nested quantifier nodes into maximal blocks.

    A nested node is not merged when it rebinds a variable of the enclosing
    prefix, since a block prefix binds pairwise distinct variables.
    """
    if isinstance(f, Quant):
        body = infer_blocks(f.body)
        if isinstance(body, Quant) and not set(f.variables) & set(body.variables):
            return Quant(f.prefix + body.prefix, body.body)
        return Quant(f.prefix, body)
    if isinstance(f, Not):
        return Not(infer_blocks(f.child))
    if isinstance(f, And):
        return And(tuple(infer_blocks(c) for c in f.children))
    if isinstance(f, Or):
        return Or(tuple(infer_blocks(c) for c in f.children))
    if isinstance(f, Imp):
        return Imp(infer_blocks(f.antecedent), infer_blocks(f.consequent))
    return f


def substitute_props(f: Formula, values: dict[str, bool]) -> Formula:
    """Replace 0-ary atoms named in ``values`` by constants."""
    if isinstance(f, Atom):
        return Const(values[f.rel]) if not f.args and f.rel in values else f
    if isinstance(f, Not):
        return Not(substitute_props(f.child, values))
    if isinstance(f, (And, Or)):
        return type(f)(tuple(substitute_props(c, values) for c in f.children))
    if isinstance(f, Imp):
        return Imp(substitute_props(f.antecedent, values), substitute_props(f.consequent, values))
    if isinstance(f, Quant):
        return Quant(f.prefix, substitute_props(f.body, values))
    return f


def simplify(f: Formula) -> Formula:
    """Fold constants away.  Quantifiers over a constant collapse to it
    (domains are nonempty)."""
    if isinstance(f, Not):
        c = simplify(f.child)
        return Const(not c.value) if isinstance(c, Const) else Not(c)
    if isinstance(f, (And, Or)):
        absorbing = isinstance(f, Or)
        parts = []
        for c in f.children:
            c = simplify(c)
            if isinstance(c, Const):
                if c.value == absorbing:
                    return c
                continue
            parts.append(c)
        if not parts:
            return Const(not absorbing)
        return parts[0] if len(parts) == 1 else type(f)(tuple(parts))
    if isinstance(f, Imp):
        return simplify(Or((Not(f.antecedent), f.consequent)))
    if isinstance(f, Quant):
        body = simplify(f.body)
        return body if isinstance(body, Const) else Quant(f.prefix, body)
    return f


def split_runs(prefix: Prefix) -> list[tuple[str, list[str]]]:
    runs: list[tuple[str, list[str]]] = []
    for kind, var in prefix:
        if runs and runs[-1][0] == kind:
            runs[-1][1].append(var)
        else:
            runs.append((kind, [var]))
    return runs


# ---------------------------------------------------------------- rendering


def render_formula(f: Formula) -> str:
    if isinstance(f, Atom):
        return "(" + " ".join((f.rel,) + f.args) + ")"
    if isinstance(f, Eq):
        return f"(= {f.left} {f.right})"
    if isinstance(f, Const):
        return "(true)" if f.value else "(false)"
    if isinstance(f, Not):
        return f"(not {render_formula(f.child)})"
    if isinstance(f, And):
        return "(and " + " ".join(render_formula(c) for c in f.children) + ")"
    if isinstance(f, Or):
        return "(or " + " ".join(render_formula(c) for c in f.children) + ")"
    if isinstance(f, Imp):
        return f"(imp {render_formula(f.antecedent)} {render_formula(f.consequent)})"
    if isinstance(f, Quant):
        out = render_formula(f.body)
        for kind, names in reversed(split_runs(f.prefix)):
            out = f"({kind} ({' '.join(names)}) {out})"
        return out
    raise TypeError(f"not a formula: {f!r}")


def render_signature(sig: Signature) -> str:
    return "".join(f"(decl {name} {k})\n" for name, k in sig.relations)


def render_file(sig: Signature, f: Formula) -> str:
    return render_signature(sig) + render_formula(f) + "\n"


# ------------------------------------------------------------------ parsing


def parse_file(text: str, sig: Signature | None = None, allow_equality: bool | None = None
               ) -> tuple[Signature, Formula]:
    """Parse ``decl* formula``; declarations extend ``sig``."""
    sig = sig or Signature()
    if allow_equality is not None:
        sig = sig.with_equality(allow_equality)
    items = read_all(text)
    decls = []
    body = []
    for item in items:
        if isinstance(item, SList) and item and isinstance(item[0], Symbol) and item[0].text == "decl":
            if body:
                raise ParseError("declaration after the formula", item.line, item.col)
            decls.append(item)
        else:
            body.append(item)
    extra = []
    known = set(sig.names)
    for d in decls:
        if len(d) != 3:
            raise ParseError("expected (decl NAME ARITY)", d.line, d.col)
        name = expect_symbol(d[1], "relation name")
        _check_name(d[1], "relation")
        if name in known:
            raise ParseError(f"relation {name} declared twice", *where(d[1]))
        known.add(name)
        extra.append((name, expect_int(d[2], "arity")))
    sig = sig.extend(extra)
    if len(body) != 1:
        if not body:
            raise ParseError("no formula found", 1, 1)
        raise ParseError("more than one formula in file", *where(body[1]))
    return sig, _parse(body[0], sig)


def parse_formula(text: str, sig: Signature) -> Formula:
    """Parse a formula (optionally preceded by declarations) over ``sig``.

    Directly nested quantifier groups are merged into blocks, so the result
    is always block-maximal (see ``infer_blocks``).
    """
    return parse_file(text, sig)[1]


def _check_name(sym, what: str):
    if sym.text in KEYWORDS:
        raise ParseError(f"{sym.text!r} is a keyword, not a {what} name", sym.line, sym.col)


def _parse(node, sig: Signature) -> Formula:
    return infer_blocks(_parse_raw(node, sig))


def _parse_raw(node, sig: Signature) -> Formula:
    lst = expect_list(node, "a formula")
    if not lst:
        raise ParseError("empty list is not a formula", lst.line, lst.col)
    head = expect_symbol(lst[0], "connective or relation name")
    args = lst[1:]
    if head == "not":
        if len(args) != 1:
            raise ParseError("'not' takes exactly one formula", lst.line, lst.col)
        return Not(_parse_raw(args[0], sig))
    if head in ("and", "or"):
        if not args:
            raise ParseError(f"'{head}' needs at least one formula", lst.line, lst.col)
        parts = tuple(_parse_raw(a, sig) for a in args)
        return And(parts) if head == "and" else Or(parts)
    if head == "imp":
        if len(args) != 2:
            raise ParseError("'imp' takes exactly two formulas", lst.line, lst.col)
        return Imp(_parse_raw(args[0], sig), _parse_raw(args[1], sig))
    if head in (FORALL, EXISTS):
        if len(args) != 2:
            raise ParseError(f"expected ({head} (VAR+) FORMULA)", lst.line, lst.col)
        vs = expect_list(args[0], "variable list")
        if not vs:
            raise ParseError("empty variable list", vs.line, vs.col)
        names = []
        for v in vs:
            name = expect_symbol(v, "variable")
            _check_name(v, "variable")
            if name in names:
                raise ParseError(f"variable {name} repeated in one quantifier block", *where(v))
            names.append(name)
        return Quant(tuple((head, n) for n in names), _parse_raw(args[1], sig))
    if head == "=":
        if len(args) != 2:
            raise ParseError("'=' takes exactly two variables", lst.line, lst.col)
        if not sig.equality_allowed:
            raise ParseError("equality is not allowed (enable it explicitly)", lst.line, lst.col)
        return Eq(*(_var(a) for a in args))
    if head in ("true", "false"):
        if args:
            raise ParseError(f"'{head}' takes no arguments", lst.line, lst.col)
        return Const(head == "true")
    if head == "decl":
        raise ParseError("declaration inside a formula", lst.line, lst.col)
    if head not in sig:
        raise ParseError(f"undeclared relation {head}", *where(lst[0]))
    arity = sig.arity(head)
    if len(args) != arity:
        raise ParseError(f"relation {head} has arity {arity}, got {len(args)} arguments", lst.line, lst.col)
    return Atom(head, tuple(_var(a) for a in args))


def _var(node) -> str:
    name = expect_symbol(node, "variable")
    _check_name(node, "variable")
    return name


def check_signature(f: Formula, sig: Signature):
    """Raise FormulaError if ``f`` mentions something ``sig`` does not allow."""
    for path, node in subformulas(f):
        if isinstance(node, Atom) and sig.arity(node.rel) != len(node.args):
            raise FormulaError(f"arity mismatch for {node.rel} at {locator(path)}")
        if isinstance(node, Eq) and not sig.equality_allowed:
            raise FormulaError(f"equality at {locator(path)} but equality is not allowed")

