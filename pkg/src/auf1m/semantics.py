"""Finite structures, pre-structures and 1-types.

A pre-structure on an element set H only fixes the facts whose argument
tuple mentions every element of H or exactly one element of H.  Facts of the
second kind are the diagonal atoms R(a, ..., a); they make up the 1-types.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .formula import (
    FORALL, And, Atom, Const, Eq, Formula, Imp, Not, Or, Quant, Signature,
)
from .propositional import CDCL, Encoder, lex_least
from .sexpr import ParseError, expect_int, expect_list, expect_symbol, read_all, where


class EvaluationError(ValueError):
    pass


class UndefinedAtom(EvaluationError):
    """A pre-structure was asked about a fact outside its defined domain."""


class NoCompletion(ValueError):
    """No forall-compatible pre-structure realizes the requested 1-types."""


class Structure:
    """A finite relational structure with domain {0, ..., size-1}.

    0-ary relations are stored as the set {()} (true) or the empty set.
    Instances are immutable; use ``replace`` to derive new ones.
    """

    __slots__ = ("signature", "size", "_rels", "_hash")

    def __init__(self, signature: Signature, size: int, relations: Mapping[str, Iterable] | None = None):
        if size < 1:
            raise ValueError("structures have a nonempty domain")
        rels = {}
        given = dict(relations or {})
        for name, arity in signature.relations:
            tuples = frozenset(tuple(t) for t in given.pop(name, ()))
            for t in tuples:
                if len(t) != arity:
                    raise ValueError(f"tuple {t} does not match arity {arity} of {name}")
                if any(not 0 <= e < size for e in t):
                    raise ValueError(f"tuple {t} of {name} leaves the domain of size {size}")
            rels[name] = tuples
        if given:
            raise ValueError(f"relations not in the signature: {', '.join(sorted(given))}")
        object.__setattr__(self, "signature", signature)
        object.__setattr__(self, "size", size)
        object.__setattr__(self, "_rels", rels)
        object.__setattr__(self, "_hash", None)

    def __setattr__(self, name, value):
        raise AttributeError("Structure is immutable")

    @property
    def domain(self) -> range:
        return range(self.size)

    def relation(self, name: str) -> frozenset:
        return self._rels[name]

    def holds(self, name: str, args: tuple) -> bool:
        return args in self._rels[name]

    def prop(self, name: str) -> bool:
        return () in self._rels[name]

    def relations(self) -> dict[str, frozenset]:
        return dict(self._rels)

    def replace(self, **relations: Iterable) -> "Structure":
        rels = self.relations()
        rels.update(relations)
        return Structure(self.signature, self.size, rels)

    def reduct(self, sig: Signature) -> "Structure":
        return Structure(sig, self.size, {n: self._rels[n] for n in sig.names})

    def expand(self, sig: Signature, relations: Mapping[str, Iterable]) -> "Structure":
        rels = self.relations()
        rels.update(relations)
        return Structure(sig, self.size, rels)

    def _key(self):
        return (self.signature.relations, self.size, tuple(sorted((n, tuple(sorted(r))) for n, r in self._rels.items())))

    def __eq__(self, other):
        return isinstance(other, Structure) and self._key() == other._key()

    def __hash__(self):
        if self._hash is None:
            object.__setattr__(self, "_hash", hash(self._key()))
        return self._hash

    def __repr__(self):
        return f"Structure(size={self.size}, {dict((n, sorted(r)) for n, r in self._rels.items())})"


# ------------------------------------------------------------- evaluation


def evaluate(s: Structure, f: Formula, a: Mapping[str, int] | None = None) -> bool:
    """Tarskian truth of ``f`` in ``s`` under assignment ``a``."""
    return _eval(s, f, dict(a or {}))


def _lookup(env, var):
    try:
        return env[var]
    except KeyError:
        raise EvaluationError(f"unbound variable {var}") from None


def _eval(s: Structure, f: Formula, env: dict) -> bool:
    if isinstance(f, Atom):
        return tuple(_lookup(env, v) for v in f.args) in s._rels[f.rel]
    if isinstance(f, Eq):
        return _lookup(env, f.left) == _lookup(env, f.right)
    if isinstance(f, Const):
        return f.value
    if isinstance(f, Not):
        return not _eval(s, f.child, env)
    if isinstance(f, And):
        return all(_eval(s, c, env) for c in f.children)
    if isinstance(f, Or):
        return any(_eval(s, c, env) for c in f.children)
    if isinstance(f, Imp):
        return not _eval(s, f.antecedent, env) or _eval(s, f.consequent, env)
    if isinstance(f, Quant):
        return _eval_block(s, f.prefix, 0, f.body, dict(env))
    raise TypeError(f"not a formula: {f!r}")


def _eval_block(s, prefix, i, body, env) -> bool:
    if i == len(prefix):
        return _eval(s, body, env)
    kind, var = prefix[i]
    if kind == FORALL:
        for e in range(s.size):
            env[var] = e
            if not _eval_block(s, prefix, i + 1, body, env):
                return False
        return True
    for e in range(s.size):
        env[var] = e
        if _eval_block(s, prefix, i + 1, body, env):
            return True
    return False


# ----------------------------------------------------------------- 1-types


@dataclass(frozen=True, order=True)
class OneType:
    """Truth values of the diagonal atoms R(x, ..., x), by relation name.

    0-ary relations carry no per-element information and are left out.
    """

    values: tuple[tuple[str, bool], ...]

    @classmethod
    def from_true(cls, sig: Signature, true_rels: Iterable[str]) -> "OneType":
        true_rels = set(true_rels)
        return cls(tuple((n, n in true_rels) for n, _ in sig.unary_and_up()))

    def __getitem__(self, rel: str) -> bool:
        for name, val in self.values:
            if name == rel:
                return val
        raise KeyError(rel)

    @property
    def key(self) -> tuple[bool, ...]:
        return tuple(v for _, v in self.values)

    def true_relations(self) -> tuple[str, ...]:
        return tuple(n for n, v in self.values if v)

    def __str__(self) -> str:
        return "{" + ", ".join(f"{n}:{'T' if v else 'F'}" for n, v in self.values) + "}"


def all_one_types(sig: Signature) -> list[OneType]:
    names = [n for n, _ in sig.unary_and_up()]
    return [OneType(tuple(zip(names, bits))) for bits in itertools.product((False, True), repeat=len(names))]


def one_type_of(s: Structure, e: int) -> OneType:
    return OneType(tuple((n, (e,) * k in s._rels[n]) for n, k in s.signature.unary_and_up()))


# ---------------------------------------------------------- pre-structures


def covering_tuples(sig: Signature, elements: Sequence[int]) -> list[tuple[str, tuple]]:
    """Atoms whose tuple uses every element of a set of size >= 2, in (name, tuple) order."""
    elems = sorted(elements)
    m = len(elems)
    if m < 2:
        return []
    out = []
    full = set(elems)
    for name, k in sig.unary_and_up():
        if k < m:
            continue
        for t in itertools.product(elems, repeat=k):
            if len(set(t)) == m and set(t) == full:
                out.append((name, t))
    return out


def defined_atoms(sig: Signature, elements: Sequence[int]) -> list[tuple[str, tuple]]:
    """Every atom a pre-structure on ``elements`` fixes: diagonals first, then covering."""
    diag = [(name, (e,) * k) for e in sorted(elements) for name, k in sig.unary_and_up()]
    return diag + covering_tuples(sig, elements)


@dataclass(frozen=True)
class PreStructure:
    signature: Signature
    elements: frozenset[int]
    true_atoms: frozenset[tuple[str, tuple]]

    def is_defined(self, rel: str, args: tuple) -> bool:
        used = set(args)
        return bool(args) and used <= self.elements and (len(used) == 1 or used == self.elements)

    def value(self, rel: str, args: tuple) -> bool:
        if rel not in self.signature or not self.is_defined(rel, args):
            raise UndefinedAtom(f"{rel}{args} is not fixed by a pre-structure on {sorted(self.elements)}")
        return (rel, args) in self.true_atoms

    def type_of(self, e: int) -> OneType:
        if e not in self.elements:
            raise KeyError(e)
        return OneType(tuple((n, (n, (e,) * k) in self.true_atoms) for n, k in self.signature.unary_and_up()))

    def types(self) -> dict[int, OneType]:
        return {e: self.type_of(e) for e in sorted(self.elements)}

    def atoms(self) -> list[tuple[str, tuple, bool]]:
        return [(n, t, (n, t) in self.true_atoms) for n, t in defined_atoms(self.signature, self.elements)]

    def flipped(self, rel: str, args: tuple) -> "PreStructure":
        if not self.is_defined(rel, args):
            raise UndefinedAtom(f"{rel}{args}")
        return PreStructure(self.signature, self.elements, self.true_atoms ^ {(rel, args)})

    def renamed(self, mapping: Mapping[int, int]) -> "PreStructure":
        return PreStructure(self.signature, frozenset(mapping.get(e, e) for e in self.elements),
                            frozenset((n, tuple(mapping.get(e, e) for e in t)) for n, t in self.true_atoms))


def pre_structure(sig: Signature, types: Mapping[int, OneType], covering: Iterable[tuple[str, tuple]] = ()
                  ) -> PreStructure:
    """Assemble a pre-structure from element 1-types and the true covering atoms."""
    true_atoms = set()
    for e, tp in types.items():
        for name, k in sig.unary_and_up():
            if tp[name]:
                true_atoms.add((name, (e,) * k))
    true_atoms.update(covering)
    return PreStructure(sig, frozenset(types), frozenset(true_atoms))


def pre_substructure(s: Structure, H: Iterable[int]) -> PreStructure:
    H = frozenset(H)
    if not H:
        raise ValueError("a pre-substructure needs a nonempty element set")
    if any(not 0 <= e < s.size for e in H):
        raise ValueError("element outside the domain")
    true_atoms = frozenset((n, t) for n, t in defined_atoms(s.signature, H) if t in s._rels[n])
    return PreStructure(s.signature, H, true_atoms)


def evaluate_pre(p: PreStructure, qf: Formula, a: Mapping[str, int]) -> bool:
    """Truth of a quantifier-free formula in a pre-structure."""
    if isinstance(qf, Atom):
        try:
            args = tuple(a[v] for v in qf.args)
        except KeyError as exc:
            raise EvaluationError(f"unbound variable {exc.args[0]}") from None
        return p.value(qf.rel, args)
    if isinstance(qf, Eq):
        return a[qf.left] == a[qf.right]
    if isinstance(qf, Const):
        return qf.value
    if isinstance(qf, Not):
        return not evaluate_pre(p, qf.child, a)
    if isinstance(qf, And):
        return all(evaluate_pre(p, c, a) for c in qf.children)
    if isinstance(qf, Or):
        return any(evaluate_pre(p, c, a) for c in qf.children)
    if isinstance(qf, Imp):
        return not evaluate_pre(p, qf.antecedent, a) or evaluate_pre(p, qf.consequent, a)
    raise EvaluationError("evaluate_pre needs a quantifier-free formula")


def covering_sequences(elements: Sequence[int], length: int):
    """Sequences of the given length whose set of entries is exactly ``elements``."""
    elems = sorted(elements)
    full = set(elems)
    if length < len(elems):
        return
    for seq in itertools.product(elems, repeat=length):
        if set(seq) == full:
            yield seq


# ---------------------------------------------------- forall-compatibility


def default_m_max(nf) -> int:
    ls = [len(c.variables) for c in nf.universal]
    arities = [k for _, k in nf.signature.relations]
    return max([1] + ls + arities)


def is_forall_compatible(p: PreStructure, nf) -> bool:
    for conj in nf.universal:
        for seq in covering_sequences(p.elements, len(conj.variables)):
            if not evaluate_pre(p, conj.matrix, dict(zip(conj.variables, seq))):
                return False
    return True


def _completion_problem(types: Sequence[OneType], nf):
    """Clauses whose models are the compatible covering-atom assignments on
    elements 0..m-1 with the given 1-types.  Returns (solver, ordered atoms, vars)
    or None if some constraint is violated outright."""
    sig = nf.signature
    m = len(types)
    elems = list(range(m))
    atoms = covering_tuples(sig, elems)
    solver = CDCL()
    var_of = {a: solver.new_var() for a in atoms}
    full = set(elems)

    def atom(rel, args):
        used = set(args)
        if len(used) == 1:
            return types[args[0]][rel]
        if used == full and (rel, args) in var_of:
            return var_of[(rel, args)]
        raise UndefinedAtom(f"{rel}{args} is not fixed by a pre-structure on {elems}")

    enc = Encoder(solver, atom)
    for conj in nf.universal:
        for seq in covering_sequences(elems, len(conj.variables)):
            if not enc.require(conj.matrix, elems, dict(zip(conj.variables, seq))):
                return None
    return solver, atoms, var_of


def is_typeset_compatible(types: Iterable[OneType], nf, m_max: int | None = None) -> bool:
    """Whether every assignment of the types to at most ``m_max`` fresh elements
    extends to a forall-compatible pre-structure."""
    types = sorted(set(types))
    if m_max is None:
        m_max = default_m_max(nf)
    if not nf.universal or not types:
        return True
    for m in range(1, m_max + 1):
        # element names are interchangeable, so multisets of types suffice
        for combo in itertools.combinations_with_replacement(types, m):
            problem = _completion_problem(combo, nf)
            if problem is None or not problem[0].solve():
                return False
    return True


def complete_pre(elements_with_types: Iterable[tuple[int, OneType]], nf) -> PreStructure:
    """Lexicographically least forall-compatible pre-structure with the given 1-types."""
    pairs = sorted(elements_with_types)
    elems = [e for e, _ in pairs]
    if len(set(elems)) != len(elems) or not elems:
        raise ValueError("elements must be distinct and nonempty")
    types = [t for _, t in pairs]
    problem = _completion_problem(types, nf)
    if problem is not None:
        solver, atoms, var_of = problem
        values = lex_least(solver, [var_of[a] for a in atoms])
        if values is not None:
            rename = dict(enumerate(elems))
            covering = [(n, tuple(rename[i] for i in t)) for (n, t) in atoms if values[var_of[(n, t)]]]
            return pre_structure(nf.signature, dict(pairs), covering)
    raise NoCompletion(f"no forall-compatible pre-structure on {elems} with types {[str(t) for t in types]}")


# ---------------------------------------------------------- file format


def parse_structure(text: str, sig: Signature) -> Structure:
    items = read_all(text)
    if not items:
        raise ParseError("empty structure file", 1, 1)
    head = expect_list(items[0], "(size N)")
    if len(head) != 2 or expect_symbol(head[0], "'size'") != "size":
        raise ParseError("structure file must start with (size N)", head.line, head.col)
    n = expect_int(head[1], "domain size")
    if n < 1:
        raise ParseError("domain size must be positive", *where(head[1]))
    rels: dict[str, set] = {}
    for item in items[1:]:
        entry = expect_list(item, "(rel ...) or (prop ...)")
        if not entry:
            raise ParseError("empty entry", entry.line, entry.col)
        kind = expect_symbol(entry[0], "'rel' or 'prop'")
        if len(entry) < 2:
            raise ParseError(f"({kind} NAME ...) needs a relation name", entry.line, entry.col)
        name = expect_symbol(entry[1], "relation name")
        if name not in sig:
            raise ParseError(f"undeclared relation {name}", *where(entry[1]))
        if name in rels:
            raise ParseError(f"relation {name} given twice", *where(entry[1]))
        arity = sig.arity(name)
        if kind == "prop":
            if arity != 0 or len(entry) != 3:
                raise ParseError(f"(prop {name} true|false) needs a 0-ary relation", entry.line, entry.col)
            val = expect_symbol(entry[2], "true or false")
            if val not in ("true", "false"):
                raise ParseError("expected true or false", *where(entry[2]))
            rels[name] = {()} if val == "true" else set()
        elif kind == "rel":
            tuples = set()
            for t in entry[2:]:
                tl = expect_list(t, "a tuple of element indices")
                tup = tuple(expect_int(x, "element index") for x in tl)
                if len(tup) != arity:
                    raise ParseError(f"{name} has arity {arity}, tuple has {len(tup)} entries", tl.line, tl.col)
                if any(e >= n for e in tup):
                    raise ParseError(f"element index out of range for size {n}", tl.line, tl.col)
                tuples.add(tup)
            rels[name] = tuples
        else:
            raise ParseError(f"unknown entry {kind!r}", *where(entry[0]))
    return Structure(sig, n, rels)


def render_structure(s: Structure) -> str:
    lines = [f"(size {s.size})"]
    for name, arity in s.signature.relations:
        rel = s.relation(name)
        if arity == 0:
            lines.append(f"(prop {name} {'true' if rel else 'false'})")
        elif rel:
            tuples = " ".join("(" + " ".join(map(str, t)) + ")" for t in sorted(rel))
            lines.append(f"(rel {name} {tuples})")
    return "\n".join(lines) + "\n"
