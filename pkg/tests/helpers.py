"""Shared test utilities: a seeded generator of small AUF1minus sentences and
brute-force oracles that do not go through the normal-form pipeline."""

from __future__ import annotations

import itertools
import random
from functools import lru_cache
from pathlib import Path

from auf1m.formula import (
    EXISTS, FORALL, And, Atom, Not, Or, Quant, Signature, free_variables,
)
from auf1m.fragment import AUF1_MINUS, check_fragment
from auf1m.normal_form import to_weak_normal_form, zero_ary_branches
from auf1m.semantics import evaluate
from auf1m.solver import atom_order, enumerate_structures, find_model

ROOT = Path(__file__).resolve().parents[1]
CORPUS = ROOT / "corpus"

POOL = (("P", 1), ("R", 2), ("T", 3))
BRUTE_LIMIT = 16   # enumerate when a size has at most 2**BRUTE_LIMIT structures


class _Gen:
    def __init__(self, rng: random.Random, sig: Signature):
        self.rng = rng
        self.sig = sig
        self.fresh = 0

    def var(self) -> str:
        self.fresh += 1
        return f"v{self.fresh}"

    def atom(self, vs: list[str], full: bool) -> Atom:
        rng = self.rng
        if full and len(vs) > 1:
            options = [(n, k) for n, k in self.sig.relations if k >= len(vs)]
            if options:
                name, k = rng.choice(options)
                args = list(vs) + [rng.choice(vs) for _ in range(k - len(vs))]
                rng.shuffle(args)
                return Atom(name, tuple(args))
        name, k = rng.choice(self.sig.relations)
        return Atom(name, (rng.choice(vs),) * k)

    def literal(self, vs, full) -> object:
        a = self.atom(vs, full)
        return Not(a) if self.rng.random() < 0.4 else a

    def matrix(self, vs: list[str], depth: int, allow_nested: bool):
        rng = self.rng
        r = rng.random()
        if depth <= 0 or r < 0.25:
            return self.literal(vs, rng.random() < 0.6)
        if allow_nested and r < 0.45:
            return self.nested(vs)
        if allow_nested and r < 0.52:
            return self.block(1, allow_nested=False)
        parts = tuple(self.matrix(vs, depth - 1, allow_nested) for _ in range(rng.choice((2, 2, 3))))
        return And(parts) if rng.random() < 0.5 else Or(parts)

    def nested(self, vs: list[str]):
        """A one-quantifier block over one outer variable."""
        y = self.rng.choice(vs)
        z = self.var()
        kind = self.rng.choice((FORALL, EXISTS))
        return Quant(((kind, z),), self.matrix([y, z], 1, allow_nested=False))

    def block(self, length: int, allow_nested: bool = True):
        shapes = {1: [(FORALL,), (EXISTS,)], 2: [(FORALL, FORALL), (FORALL, EXISTS), (EXISTS, EXISTS)]}
        kinds = self.rng.choice(shapes[length])
        vs = [self.var() for _ in kinds]
        body = self.matrix(vs, 2, allow_nested and length == 1 or allow_nested and self.rng.random() < 0.5)
        return Quant(tuple(zip(kinds, vs)), body)

    def sentence(self):
        rng = self.rng
        parts = [self.block(rng.choice((1, 2))) for _ in range(rng.choice((1, 1, 2, 2, 3)))]
        if len(parts) == 1:
            return parts[0]
        return And(tuple(parts)) if rng.random() < 0.6 else Or(tuple(parts))


def max_k(w) -> int:
    return max((nf.K for nf in zero_ary_branches(w)), default=0)


def generate_corpus(count: int = 120, seed: int = 20240611):
    """``count`` closed AUF1minus sentences over at most two relations of arity
    at most 3 whose normal forms have K <= 2.  Returns (sig, formula) pairs."""
    rng = random.Random(seed)
    out = []
    while len(out) < count:
        rels = rng.sample(POOL, rng.choice((1, 2, 2)))
        sig = Signature(tuple(sorted(rels)))
        f = _Gen(rng, sig).sentence()
        if free_variables(f) or not check_fragment(f, AUF1_MINUS).accepted:
            continue
        w = to_weak_normal_form(f, sig)
        if max_k(w) > 2:
            continue
        out.append((sig, f))
    return out


@lru_cache(maxsize=None)
def corpus():
    return tuple(generate_corpus())


def atom_count(sig: Signature, n: int) -> int:
    return len(atom_order(sig, n))


def brute_models(sig: Signature, f, n: int):
    return [s for s in enumerate_structures(sig, n) if evaluate(s, f)]


def direct_sat_up_to(sig: Signature, f, n: int) -> bool:
    """Satisfiable over some size <= n, searched without the normal form."""
    for m in range(1, n + 1):
        if atom_count(sig, m) <= BRUTE_LIMIT:
            if any(evaluate(s, f) for s in enumerate_structures(sig, m)):
                return True
        elif find_model(f, sig, m) is not None:
            return True
    return False


def all_subsets(xs):
    xs = list(xs)
    return itertools.chain.from_iterable(itertools.combinations(xs, r) for r in range(len(xs) + 1))


# --------------------------------------------------------------- forests


def branch_models(sig, f, sizes=(1, 2, 3), per_size: int = 2):
    """(nf, branch structure) pairs for models of ``f``: the least models of
    each size per branch, found without going through the forest code."""
    w = to_weak_normal_form(f, sig)
    out = []
    for nf in zero_ary_branches(w):
        g = nf.to_formula()
        for n in sizes:
            found = 0
            extra = []
            while found < per_size:
                h = And((g,) + tuple(extra)) if extra else g
                m = find_model(h, nf.signature, n)
                if m is None:
                    break
                out.append((nf, m))
                found += 1
                extra.append(Not(_describe(m)))
    return out


def _describe(m):
    """"Some element has the 1-type of element 0".  Negating it is a cheap way
    to push the search towards a different model."""
    from auf1m.formula import Const
    from auf1m.formula import exists as ex
    lits = []
    for name, k in m.signature.unary_and_up():
        a = Atom(name, ("_e",) * k)
        lits.append(a if m.holds(name, (0,) * k) else Not(a))
    return ex("_e", And(tuple(lits))) if lits else Const(True)


def shape_ok(fst, nf) -> bool:
    """Independent check of the tree shape: universal levels list the domain
    once each, existential levels have one child, kinds follow the prefix."""
    n = fst.domain_size
    if len(fst.trees) != nf.m_exists:
        return False
    for t, tree in enumerate(fst.trees):
        conj = nf.existential[t]

        def ok(children, j):
            if j == conj.k:
                return not children
            kind = conj.prefix[j][0]
            labels = [c.label for c in children]
            if kind == FORALL and sorted(labels) != list(range(n)):
                return False
            if kind == EXISTS and len(labels) != 1:
                return False
            want = "u" if kind == FORALL else "e"
            return all(c.kind == want and ok(c.children, j + 1) for c in children)

        if tree.conjunct != t or not ok(tree.children, 0):
            return False
    return True


def realizable(fst, nf) -> bool:
    """Is there a model of ``nf`` over the forest's domain that agrees with
    every leaf pre-structure and satisfies each conjunct's matrix along each
    branch?  Together with the shape this is what a forest is meant to say."""
    from auf1m.propositional import CDCL, Encoder
    if not shape_ok(fst, nf):
        return False
    sig = nf.signature
    n = fst.domain_size
    solver = CDCL()
    var = {a: solver.new_var() for a in atom_order(sig, n)}
    enc = Encoder(solver, lambda rel, args: var[(rel, args)])
    for tree in fst.trees:
        conj = nf.existential[tree.conjunct]
        for br in tree.branches():
            pre = br[-1].pre
            if pre.elements != frozenset(x.label for x in br):
                return False
            for name, t, value in pre.atoms():
                solver.add_clause((var[(name, t)] if value else -var[(name, t)],))
            env = dict(zip(conj.variables, (x.label for x in br)))
            if not enc.require(conj.matrix, range(n), env):
                return False
    for c in nf.universal:
        if not enc.require(c.to_formula(), range(n)):
            return False
    return solver.ok and solver.solve()


def _replace_at(children, path, fn):
    """Apply ``fn`` to the child list reached by following ``path``."""
    from dataclasses import replace
    if not path:
        return tuple(fn(list(children)))
    i, rest = path[0], path[1:]
    out = list(children)
    out[i] = replace(out[i], children=_replace_at(out[i].children, rest, fn))
    return tuple(out)


def _rename_subtree(node, a, b):
    from dataclasses import replace
    pre = node.pre.renamed({a: b}) if node.pre is not None else None
    return replace(node, label=b if node.label == a else node.label,
                   children=tuple(_rename_subtree(c, a, b) for c in node.children), pre=pre)


def _positions(tree):
    """(path, node, labels above) for every node, path of child indices."""
    out = []
    stack = [((i,), c, ()) for i, c in enumerate(tree.children)]
    while stack:
        path, node, above = stack.pop()
        out.append((path, node, above))
        stack.extend((path + (i,), c, above + (node.label,)) for i, c in enumerate(node.children))
    return out


MUTATIONS = ("flip", "relabel", "drop", "duplicate", "add")


def mutate(fst, rng: random.Random, kind: str | None = None):
    """One random single-point mutation, or None if the chosen kind does not apply."""
    from dataclasses import replace
    kind = kind or rng.choice(MUTATIONS)
    t = rng.randrange(len(fst.trees))
    tree = fst.trees[t]
    path, node, above = rng.choice(_positions(tree))
    if kind == "flip":
        leaves = [(p, x) for p, x, _ in _positions(tree) if x.pre is not None]
        path, leaf = rng.choice(leaves)
        name, args, _ = rng.choice(leaf.pre.atoms())
        new = replace(leaf, pre=leaf.pre.flipped(name, args))
        children = _replace_at(tree.children, path[:-1], lambda cs: cs[:path[-1]] + [new] + cs[path[-1] + 1:])
    elif kind == "relabel":
        below = {x.label for p, x, _ in _positions(tree) if p[:len(path)] == path}
        free = [b for b in range(fst.domain_size) if b not in below and b not in above]
        if not free:
            return None
        new = _rename_subtree(node, node.label, rng.choice(free))
        children = _replace_at(tree.children, path[:-1], lambda cs: cs[:path[-1]] + [new] + cs[path[-1] + 1:])
    elif kind == "drop":
        children = _replace_at(tree.children, path[:-1], lambda cs: cs[:path[-1]] + cs[path[-1] + 1:])
        if not children:
            return None
    elif kind == "duplicate":
        children = _replace_at(tree.children, path[:-1], lambda cs: cs + [node])
    else:
        free = [b for b in range(fst.domain_size) if b not in above and b != node.label]
        if not free:
            return None
        new = _rename_subtree(node, node.label, rng.choice(free))
        # the renamed copy may still mention node.label deeper down; rename consistently
        if any(x.label == node.label for _, x, _ in _positions(replace(tree, children=(new,)))):
            return None
        children = _replace_at(tree.children, path[:-1], lambda cs: cs + [new])
    trees = list(fst.trees)
    trees[t] = replace(tree, children=children)
    return replace(fst, trees=tuple(trees)), kind
