"""The exponential small-model construction.

Given a model A of a normal form sentence, build a satisfaction forest over
the domain B = [2K] x [m] x [(K-1)^(K-1)] x [L] and turn it into a model.
Leaves are placed in a layer that no other label on their branch uses,
chosen through an injective extension function, so distinct branches
always have distinct label sets.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass
from typing import Hashable, Iterable

from .formula import FORALL
from .forest import EXISTENTIAL, UNIVERSAL, Forest, Node, Tree, build_model
from .normal_form import NormalForm
from .semantics import OneType, Structure, evaluate, one_type_of, pre_structure


# ------------------------------------------------------------ matchings


@dataclass(frozen=True)
class BipartiteGraph:
    left: tuple
    right: tuple
    edges: frozenset

    @classmethod
    def from_edges(cls, left: Iterable, right: Iterable, edges: Iterable) -> "BipartiteGraph":
        left, right, edges = tuple(left), tuple(right), frozenset(edges)
        ls, rs = set(left), set(right)
        for a, b in edges:
            if a not in ls or b not in rs:
                raise ValueError(f"edge {a!r}-{b!r} does not join the left side to the right side")
        return cls(left, right, edges)


@dataclass(frozen=True)
class MatchingResult:
    matching: dict | None
    violator: frozenset | None = None    # a left set with fewer neighbours than members

    @property
    def ok(self) -> bool:
        return self.matching is not None


def hall_matching(g: BipartiteGraph) -> MatchingResult:
    """A matching covering the left side, found by augmenting paths.

    Vertices are tried in the order they are listed.  If some left vertex
    cannot be matched, the left vertices reachable from it by alternating
    paths form a set whose neighbourhood is too small.
    """
    rank = {v: i for i, v in enumerate(g.right)}
    adj: dict[Hashable, list] = {u: [] for u in g.left}
    for a, b in g.edges:
        adj[a].append(b)
    for u in adj:
        adj[u].sort(key=rank.__getitem__)
    match_l: dict = {}
    match_r: dict = {}
    for u in g.left:
        # breadth-first search for a free right vertex
        parent: dict = {}
        seen_left = [u]
        queue = deque([u])
        found = None
        while queue and found is None:
            x = queue.popleft()
            for y in adj[x]:
                if y in parent:
                    continue
                parent[y] = x
                if y not in match_r:
                    found = y
                    break
                nxt = match_r[y]
                seen_left.append(nxt)
                queue.append(nxt)
        if found is None:
            return MatchingResult(None, frozenset(seen_left))
        y = found
        while True:
            x = parent[y]
            prev = match_l.get(x)
            match_l[x], match_r[y] = y, x
            if x == u:
                break
            y = prev
    return MatchingResult(match_l)


# ------------------------------------------------------ extension function


@dataclass(frozen=True)
class ExtensionFunction:
    K: int
    levels: dict        # l -> {frozenset S of size l: frozenset of size l+1}

    def __call__(self, S: Iterable[int]) -> frozenset[int]:
        S = frozenset(S)
        if not S:
            return frozenset({1})
        return self.levels[len(S)][S]

    def items(self):
        yield frozenset(), frozenset({1})
        for l in sorted(self.levels):
            for S in sorted(self.levels[l], key=sorted):
                yield S, self.levels[l][S]

    def problems(self) -> list[str]:
        """Violations of the superset, size and injectivity properties (empty if none)."""
        out = []
        universe = frozenset(range(1, 2 * self.K + 1))
        images: dict[frozenset, frozenset] = {}
        for l in range(1, self.K):
            dom = self.levels.get(l, {})
            want = {frozenset(c) for c in itertools.combinations(sorted(universe), l)}
            if set(dom) != want:
                out.append(f"level {l} is defined on {len(dom)} of {len(want)} subsets")
            for S, T in dom.items():
                if not S < T or len(T) != len(S) + 1 or not T <= universe:
                    out.append(f"{sorted(S)} -> {sorted(T)} is not a one-element extension")
                if T in images:
                    out.append(f"{sorted(images[T])} and {sorted(S)} both map to {sorted(T)}")
                images[T] = S
        return out


class ExtensionError(RuntimeError):
    pass


def build_ext(K: int) -> ExtensionFunction:
    if K < 1:
        raise ValueError("K must be at least 1")
    universe = range(1, 2 * K + 1)
    levels = {}
    for l in range(1, K):
        left = [frozenset(c) for c in itertools.combinations(universe, l)]
        right = [frozenset(c) for c in itertools.combinations(universe, l + 1)]
        edges = [(S, S | {x}) for S in left for x in universe if x not in S]
        res = hall_matching(BipartiteGraph(tuple(left), tuple(right), frozenset(edges)))
        if not res.ok:
            raise ExtensionError(f"no covering matching at level {l} for K={K}")
        levels[l] = res.matching
    return ExtensionFunction(K, levels)


def render_ext(ext: ExtensionFunction) -> str:
    def show(S):
        return "{" + ",".join(map(str, sorted(S))) + "}"
    return "".join(f"{show(S)} -> {show(T)}\n" for S, T in ext.items())


# ------------------------------------------------------------- the domain


def pow0(a: int, b: int) -> int:
    return 1 if b == 0 else a ** b


@dataclass(frozen=True)
class SmallDomain:
    K: int
    m_exists: int
    types: tuple[OneType, ...]       # alpha_1 .. alpha_L

    @property
    def L(self) -> int:
        return len(self.types)

    @property
    def T(self) -> int:
        return pow0(self.K - 1, self.K - 1)

    @property
    def size(self) -> int:
        return 2 * self.K * self.m_exists * self.T * self.L

    def elements(self) -> list[tuple[int, int, int, int]]:
        return list(itertools.product(range(1, 2 * self.K + 1), range(1, self.m_exists + 1),
                                      range(1, self.T + 1), range(1, self.L + 1)))

    def index(self, element: tuple[int, int, int, int]) -> int:
        s, i, t, l = element
        return (((s - 1) * self.m_exists + (i - 1)) * self.T + (t - 1)) * self.L + (l - 1)

    def element(self, index: int) -> tuple[int, int, int, int]:
        index, l = divmod(index, self.L)
        index, t = divmod(index, self.T)
        s, i = divmod(index, self.m_exists)
        return s + 1, i + 1, t + 1, l + 1

    def layer(self, index: int) -> int:
        return self.element(index)[0]

    def type_of(self, index: int) -> OneType:
        return self.types[self.element(index)[3] - 1]


def domain_size(K: int, m_exists: int, L: int) -> int:
    return 2 * K * m_exists * pow0(K - 1, K - 1) * L


def build_small_domain(s: Structure, nf: NormalForm) -> SmallDomain:
    if nf.m_exists == 0:
        raise ValueError("no existential conjuncts: the sentence is preserved under substructures")
    s = s.reduct(nf.signature) if s.signature != nf.signature else s
    types = []
    for e in s.domain:
        tp = one_type_of(s, e)
        if tp not in types:
            types.append(tp)
    return SmallDomain(nf.K, nf.m_exists, tuple(types))


# --------------------------------------------------------------- shrinking


@dataclass(frozen=True)
class ShrinkResult:
    domain: SmallDomain
    forest: Forest
    model: Structure


class ShrinkError(ValueError):
    pass


def shrink(s: Structure, nf: NormalForm, branch: str | None = None) -> ShrinkResult:
    """Rebuild a model of ``nf`` over the small domain, following ``s`` through patterns."""
    s = s.reduct(nf.signature) if s.signature != nf.signature else s
    for c in nf.existential + nf.universal:
        if not evaluate(s, c.to_formula()):
            raise ShrinkError("the structure is not a model of the normal form")
    dom = build_small_domain(s, nf)
    ext = build_ext(dom.K)
    type_index = {tp: l for l, tp in enumerate(dom.types, start=1)}
    # least element of A realizing each type
    pattern_of_type = {}
    for e in s.domain:
        pattern_of_type.setdefault(type_index[one_type_of(s, e)], e)
    trees = []
    for i, conj in enumerate(nf.existential, start=1):
        used_t: dict[tuple, set] = {}
        builder = _TreeBuilder(s, nf, conj, i, dom, ext, type_index, pattern_of_type, used_t)
        trees.append(Tree(i - 1, builder.level(0, [], [], {})))
    fst = Forest(dom.size, tuple(trees), branch)
    return ShrinkResult(dom, fst, build_model(fst, nf))


class _TreeBuilder:
    def __init__(self, s, nf, conj, i, dom, ext, type_index, pattern_of_type, used_t):
        self.s, self.nf, self.conj, self.i = s, nf, conj, i
        self.dom, self.ext = dom, ext
        self.type_index, self.pattern_of_type = type_index, pattern_of_type
        self.used_t = used_t

    def level(self, j, labels, pats, env) -> tuple[Node, ...]:
        conj, dom = self.conj, self.dom
        kind, var = conj.prefix[j]
        leaf = j == conj.k - 1
        out = []
        if kind == FORALL:
            for b in range(dom.size):
                if b in labels:
                    pat = pats[labels.index(b)]
                else:
                    pat = self.pattern_of_type[dom.element(b)[3]]
                out.append(self._node(UNIVERSAL, j, labels, pats, env, b, pat, leaf))
            return tuple(out)
        rest = conj.suffix(j + 1)
        w = None
        for a in self.s.domain:
            env[var] = a
            if evaluate(self.s, rest, {**env}):
                w = a
                break
        if w is None:
            raise ShrinkError(f"no witness for {var}: the structure is not a model")
        l = self.type_index[one_type_of(self.s, w)]
        if not leaf:
            if w in pats:
                b = labels[pats.index(w)]
            else:
                b = next(x for x in range(dom.size) if dom.element(x)[3] == l and x not in labels)
        else:
            layers = {dom.layer(x) for x in labels}
            (new_layer,) = self.ext(layers) - layers
            key = (frozenset(labels), new_layer, l)
            taken = self.used_t.setdefault(key, set())
            t = next((t for t in range(1, dom.T + 1) if t not in taken), None)
            if t is None:
                raise ShrinkError("ran out of t-coordinates")
            taken.add(t)
            b = dom.index((new_layer, self.i, t, l))
        return (self._node(EXISTENTIAL, j, labels, pats, env, b, w, leaf),)

    def _node(self, kind, j, labels, pats, env, b, pat, leaf) -> Node:
        var = self.conj.prefix[j][1]
        labels2, pats2 = labels + [b], pats + [pat]
        env2 = {**env, var: pat}
        if leaf:
            return Node(kind, b, (), self._pre(labels2, pats2))
        return Node(kind, b, self.level(j + 1, labels2, pats2, env2))

    def _pre(self, labels, pats):
        sig = self.nf.signature
        pat = dict(zip(labels, pats))
        elems = sorted(pat)
        types = {a: one_type_of(self.s, pat[a]) for a in elems}
        covering = []
        if len(elems) >= 2:
            full = set(elems)
            for name, k in sig.unary_and_up():
                for t in itertools.product(elems, repeat=k):
                    if set(t) == full and self.s.holds(name, tuple(pat[a] for a in t)):
                        covering.append((name, t))
        return pre_structure(sig, types, covering)
