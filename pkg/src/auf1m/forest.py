"""Satisfaction forests: extraction from a model, verification, and model building.

A forest has one tree per existential conjunct.  Level j of tree i follows
the j-th quantifier of the conjunct: a universal level branches over the
whole domain, an existential level has a single child labelled with a
witness.  Every branch carries a pre-structure on the set of its labels.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator

from .formula import FORALL, Signature
from .normal_form import NormalForm
from .semantics import (
    EvaluationError, OneType, PreStructure, Structure, all_one_types, complete_pre,
    covering_tuples, default_m_max, evaluate, evaluate_pre, is_forall_compatible,
    is_typeset_compatible, pre_structure, pre_substructure,
)
from .sexpr import ParseError, SList, Symbol, expect_int, expect_list, expect_symbol, read_all, where

CONDITIONS = ("T1", "T2", "T3", "T4", "T5", "F1", "F2", "F3", "F4")
UNIVERSAL, EXISTENTIAL = "u", "e"


@dataclass(frozen=True)
class Node:
    kind: str
    label: int
    children: tuple["Node", ...] = ()
    pre: PreStructure | None = None   # only on leaves


@dataclass(frozen=True)
class Tree:
    conjunct: int
    children: tuple[Node, ...]     # children of the (unlabelled) root

    def branches(self) -> Iterator[tuple[Node, ...]]:
        """Root-to-leaf node sequences (root excluded), depth first."""
        stack: list[tuple[Node, tuple]] = [(n, ()) for n in reversed(self.children)]
        while stack:
            node, above = stack.pop()
            path = above + (node,)
            if not node.children:
                yield path
            else:
                stack.extend((c, path) for c in reversed(node.children))


@dataclass(frozen=True)
class Forest:
    domain_size: int
    trees: tuple[Tree, ...]
    branch: str | None = None      # 0-ary valuation the forest was built for, if any

    @property
    def domain(self) -> range:
        return range(self.domain_size)


def seq(branch) -> tuple[int, ...]:
    return tuple(n.label for n in branch)


def set_of(branch) -> frozenset[int]:
    return frozenset(n.label for n in branch)


def set_minus(branch) -> frozenset[int]:
    return frozenset(n.label for n in branch[:-1])


def _where(t: int, b: int, branch) -> str:
    return f"tree {t} branch {b} {list(seq(branch))}"


# ---------------------------------------------------------------- extraction


class ExtractionError(ValueError):
    pass


def extract_forest(s: Structure, nf: NormalForm, branch: str | None = None) -> Forest:
    """Build the satisfaction forest of a model, choosing least witnesses."""
    if s.signature != nf.signature:
        s = s.reduct(nf.signature)
    trees = []
    for i, conj in enumerate(nf.existential):
        trees.append(Tree(i, _extract_level(s, conj, 0, {}, ())))
    return Forest(s.size, tuple(trees), branch)


def _extract_level(s, conj, j, env, labels) -> tuple[Node, ...]:
    kind, var = conj.prefix[j]
    last = j == conj.k - 1
    if kind == FORALL:
        candidates = list(s.domain)
    else:
        rest = conj.suffix(j + 1)
        candidates = []
        for b in s.domain:
            env[var] = b
            if evaluate(s, rest, env):
                candidates.append(b)
                break
        del env[var]
        if not candidates:
            raise ExtractionError(f"no witness for {var} under {dict(env)}: the structure is not a model")
    out = []
    for b in candidates:
        env[var] = b
        path = labels + (b,)
        if last:
            node = Node(UNIVERSAL if kind == FORALL else EXISTENTIAL, b, (), pre_substructure(s, path))
        else:
            node = Node(UNIVERSAL if kind == FORALL else EXISTENTIAL, b,
                        _extract_level(s, conj, j + 1, env, path))
        out.append(node)
    env.pop(var, None)
    return tuple(out)


# -------------------------------------------------------------- verification


@dataclass
class ForestReport:
    failures: dict[str, list[str]] = field(default_factory=lambda: {c: [] for c in CONDITIONS})
    malformed: bool = False     # the shape was broken, so the semantic checks were skipped
    m_max: int = 1

    @property
    def passed(self) -> bool:
        return not self.malformed and not any(self.failures.values())

    def failed(self) -> list[str]:
        return [c for c in CONDITIONS if self.failures[c]]

    def status(self, cond: str) -> str:
        if self.failures[cond]:
            return "FAIL"
        return "SKIPPED" if self.malformed else "PASS"

    def render(self) -> str:
        lines = []
        for c in CONDITIONS:
            extra = f" (m_max {self.m_max})" if c == "F4" else ""
            lines.append(f"{c} {self.status(c)}{extra}")
            for msg in self.failures[c][:5]:
                lines.append(f"  {msg}")
            if len(self.failures[c]) > 5:
                lines.append(f"  ... {len(self.failures[c]) - 5} more")
        return "\n".join(lines) + "\n"


def verify_forest(fst: Forest, nf: NormalForm, m_max: int | None = None) -> ForestReport:
    rep = ForestReport(m_max=m_max or default_m_max(nf))
    fail = rep.failures
    if _check_structure(fst, nf, fail):
        rep.malformed = True
        _blame_trees(len(fst.trees), fail)
        return rep
    n = fst.domain_size
    all_branches = []   # (tree index, branch index, branch)
    for t, tree in enumerate(fst.trees):
        conj = nf.existential[tree.conjunct]
        # T1 and the prefix alignment behind F1
        _check_shape(tree, conj, n, t, fail)
        for b, br in enumerate(tree.branches()):
            all_branches.append((t, b, br))
            pre = br[-1].pre
            assignment = dict(zip(conj.variables, seq(br)))
            try:
                ok = evaluate_pre(pre, conj.matrix, assignment)
            except EvaluationError as exc:
                ok = False
                fail["T2"].append(f"{_where(t, b, br)}: {exc}")
            else:
                if not ok:
                    fail["T2"].append(f"{_where(t, b, br)}: matrix false at {list(seq(br))}")
    # T3 / F2: one 1-type per element
    occurrences: dict[int, list] = {}
    for t, b, br in all_branches:
        pre = br[-1].pre
        for a in set_of(br):
            occurrences.setdefault(a, []).append((t, b, pre.type_of(a)))
    for a, occ in sorted(occurrences.items()):
        _consistency(a, occ, fail, "T3", "F2", f"element {a}")
    # T4 / F3: one pre-structure per label set
    by_set: dict[frozenset, list] = {}
    for t, b, br in all_branches:
        by_set.setdefault(set_of(br), []).append((t, b, br[-1].pre))
    for s, occ in sorted(by_set.items(), key=lambda kv: sorted(kv[0])):
        _consistency(s, occ, fail, "T4", "F3", f"label set {sorted(s)}")
    # T5
    seen: dict[PreStructure, bool] = {}
    for t, b, br in all_branches:
        pre = br[-1].pre
        if pre not in seen:
            try:
                seen[pre] = is_forall_compatible(pre, nf)
            except EvaluationError:
                seen[pre] = False
        if not seen[pre]:
            fail["T5"].append(f"{_where(t, b, br)}: label is not compatible with the universal conjuncts")
    _blame_trees(len(fst.trees), fail)
    # F4
    types = {tp for _, _, br in all_branches for tp in br[-1].pre.types().values()}
    try:
        ok = is_typeset_compatible(types, nf, rep.m_max)
    except EvaluationError:
        ok = False
    if not ok:
        fail["F4"].append(f"the {len(types)} 1-types of the forest are not compatible (m_max {rep.m_max})")
    return rep


def _consistency(key, occ, fail, within: str, across: str, what: str):
    per_tree: dict[int, set] = {}
    first: dict[int, tuple] = {}
    for t, b, val in occ:
        per_tree.setdefault(t, set()).add(val)
        first.setdefault(t, (b, val))
    for t, vals in per_tree.items():
        if len(vals) > 1:
            bs = sorted({b for tt, b, v in occ if tt == t})
            fail[within].append(f"tree {t} branches {bs[:4]}: {what} labelled inconsistently")
    if len(per_tree) > 1 and len(set().union(*per_tree.values())) > 1:
        trees = sorted(per_tree)
        fail[across].append(f"trees {trees}: {what} labelled inconsistently")


def _blame_trees(count: int, fail):
    """F1: every tree is a satisfaction tree for its conjunct."""
    for t in range(count):
        for c in ("T1", "T2", "T3", "T4", "T5"):
            if any(msg.startswith(f"tree {t} ") for msg in fail[c]):
                fail["F1"].append(f"tree {t}: violates {c}")


def _check_structure(fst: Forest, nf: NormalForm, fail) -> bool:
    """Shape problems that make the other checks meaningless.  They are filed
    under T1 (tree shape), T2 (leaf labels) or F1 (one tree per conjunct);
    returns True if any was found."""
    if fst.domain_size < 1:
        fail["F1"].append("the domain is empty")
        return True
    if len(fst.trees) != nf.m_exists:
        fail["F1"].append(f"{len(fst.trees)} trees for {nf.m_exists} existential conjuncts")
        return True
    bad = False
    for t, tree in enumerate(fst.trees):
        if tree.conjunct != t:
            fail["F1"].append(f"tree {t} is tagged with conjunct {tree.conjunct}")
            bad = True
            continue
        k = nf.existential[t].k
        if not tree.children:
            fail["T1"].append(f"tree {t} root has no children")
            bad = True
        for b, br in enumerate(tree.branches()):
            where_ = f"tree {t} branch {b}"
            if len(br) != k:
                fail["T1"].append(f"{where_}: depth {len(br)}, expected {k}")
                bad = True
                continue
            for node in br:
                if not 0 <= node.label < fst.domain_size:
                    fail["T1"].append(f"{where_}: label {node.label} outside the domain")
                    bad = True
                if node.kind not in (UNIVERSAL, EXISTENTIAL):
                    fail["T1"].append(f"{where_}: unknown node kind {node.kind!r}")
                    bad = True
            for node in br[:-1]:
                if node.pre is not None:
                    fail["T1"].append(f"{where_}: inner node carries a pre-structure")
                    bad = True
            pre = br[-1].pre
            if pre is None:
                fail["T2"].append(f"{where_}: leaf without a pre-structure")
                bad = True
            elif pre.elements != set_of(br):
                fail["T2"].append(f"{where_}: pre-structure on {sorted(pre.elements)}, "
                                  f"branch labels {sorted(set_of(br))}")
                bad = True
            elif pre.signature != nf.signature:
                fail["T2"].append(f"{where_}: pre-structure over a different signature")
                bad = True
    return bad


def _check_shape(tree: Tree, conj, n: int, t: int, fail):
    def walk(children, j, path):
        kind, _ = conj.prefix[j]
        want = UNIVERSAL if kind == FORALL else EXISTENTIAL
        where_ = f"tree {t} " + (f"node {path}" if path else "root")
        labels = [c.label for c in children]
        if kind == FORALL:
            if sorted(labels) != list(range(n)):
                fail["T1"].append(f"{where_}: level {j + 1} is universal but the children are "
                                  f"labelled {labels}, not each of the {n} elements once")
        elif len(children) != 1:
            fail["T1"].append(f"{where_}: level {j + 1} is existential but has {len(children)} children")
        for c in children:
            if c.kind != want:
                fail["T1"].append(f"{where_}: child {c.label} is marked {c.kind!r}, quantifier {j + 1} is {kind}")
            if c.children:
                walk(c.children, j + 1, path + [c.label])

    walk(tree.children, 0, [])


# --------------------------------------------------------------- building


class BuildError(ValueError):
    pass


def build_model(fst: Forest, nf: NormalForm, verify: bool = True) -> Structure:
    """Turn a satisfaction forest into a model of ``nf`` over its domain."""
    if verify:
        rep = verify_forest(fst, nf)
        if not rep.passed:
            raise BuildError("forest fails " + ", ".join(rep.failed()))
    sig = nf.signature
    branches = [br for tree in fst.trees for br in tree.branches()]
    # Step 1: 1-types from the first branch holding each element
    types: dict[int, OneType] = {}
    for br in branches:
        for a, tp in br[-1].pre.types().items():
            types.setdefault(a, tp)
    default = _default_type(types.values(), nf)
    for a in fst.domain:
        types.setdefault(a, default)
    true_atoms: set[tuple[str, tuple]] = set()
    for a, tp in types.items():
        for name, k in sig.unary_and_up():
            if tp[name]:
                true_atoms.add((name, (a,) * k))
    # Step 2: covering atoms of the branch labels
    defined = set()
    for br in branches:
        pre = br[-1].pre
        if len(pre.elements) >= 2 and pre.elements not in defined:
            defined.add(pre.elements)
            true_atoms.update(a for a in pre.true_atoms if len(set(a[1])) >= 2)
    # Step 3: complete the remaining sets the universal conjuncts can see
    reach = min(max((c.l for c in nf.universal), default=0),
                max((k for _, k in sig.unary_and_up()), default=0))
    cache: dict[tuple, list] = {}
    for m in range(2, reach + 1):
        for H in itertools.combinations(fst.domain, m):
            if frozenset(H) in defined:
                continue
            pattern = tuple(types[a] for a in H)
            if pattern not in cache:
                local = complete_pre(list(enumerate(pattern)), nf)
                cache[pattern] = [a for a in local.true_atoms if len(set(a[1])) >= 2]
            true_atoms.update((name, tuple(H[i] for i in t)) for name, t in cache[pattern])
    rels: dict[str, list] = {name: [] for name, _ in sig.relations}
    for name, t in true_atoms:
        rels[name].append(t)
    return Structure(sig, fst.domain_size, rels)


def _default_type(present, nf) -> OneType:
    present = sorted(set(present))
    if present:
        return present[0]
    for tp in all_one_types(nf.signature):
        if is_typeset_compatible([tp], nf):
            return tp
    raise BuildError("no 1-type is compatible with the universal conjuncts")


# ------------------------------------------------------------- file format


def render_forest(fst: Forest) -> str:
    out = [f"(forest (domain {fst.domain_size})"]
    if fst.branch is not None:
        out.append(f"  (branch {fst.branch or '-'})")
    for tree in fst.trees:
        out.append(f"  (tree {tree.conjunct}")
        for node in tree.children:
            _render_node(node, 2, out)
        out[-1] += ")"
    out[-1] += ")"
    return "\n".join(out) + "\n"


def _render_node(node: Node, depth: int, out: list[str]):
    pad = "  " * depth
    if node.pre is not None and not node.children and node.kind == EXISTENTIAL:
        out.append(f"{pad}(leaf {node.label} {render_pre(node.pre)})")
        return
    out.append(f"{pad}({node.kind} {node.label}")
    for c in node.children:
        _render_node(c, depth + 1, out)
    if node.pre is not None:
        out.append(f"{pad}  {render_pre(node.pre)}")
    out[-1] += ")"


def render_pre(pre: PreStructure) -> str:
    parts = ["(pre"]
    for e, tp in pre.types().items():
        parts.append(f"(type {e}" + "".join(f" ({n} {'true' if v else 'false'})" for n, v in tp.values) + ")")
    for name, t in covering_tuples(pre.signature, sorted(pre.elements)):
        val = "true" if (name, t) in pre.true_atoms else "false"
        parts.append(f"({name} ({' '.join(map(str, t))}) {val})")
    return " ".join(parts) + ")"


def parse_forest(text: str, sig: Signature) -> Forest:
    items = read_all(text)
    if len(items) != 1:
        raise ParseError("expected a single (forest ...) form", 1, 1)
    top = expect_list(items[0], "(forest ...)")
    if not top or expect_symbol(top[0], "'forest'") != "forest":
        raise ParseError("expected (forest ...)", top.line, top.col)
    rest = list(top[1:])
    if not rest:
        raise ParseError("missing (domain N)", top.line, top.col)
    dom = expect_list(rest.pop(0), "(domain N)")
    if len(dom) != 2 or expect_symbol(dom[0], "'domain'") != "domain":
        raise ParseError("expected (domain N)", dom.line, dom.col)
    n = expect_int(dom[1], "domain size")
    branch = None
    if rest and isinstance(rest[0], SList) and rest[0] and isinstance(rest[0][0], Symbol) \
            and rest[0][0].text == "branch":
        b = rest.pop(0)
        if len(b) != 2:
            raise ParseError("expected (branch BITS)", b.line, b.col)
        text_bits = expect_symbol(b[1], "bit string")
        branch = "" if text_bits == "-" else text_bits
        if set(branch) - {"0", "1"}:
            raise ParseError("branch must be a string of 0s and 1s", *where(b[1]))
    trees = []
    for item in rest:
        tl = expect_list(item, "(tree I node ...)")
        if len(tl) < 2 or expect_symbol(tl[0], "'tree'") != "tree":
            raise ParseError("expected (tree I node ...)", tl.line, tl.col)
        idx = expect_int(tl[1], "tree index")
        trees.append(Tree(idx, tuple(_parse_node(x, sig) for x in tl[2:])))
    return Forest(n, tuple(trees), branch)


def _parse_node(item, sig: Signature) -> Node:
    nl = expect_list(item, "a node (u|e|leaf LABEL ...)")
    if len(nl) < 2:
        raise ParseError("a node needs a kind and a label", nl.line, nl.col)
    kind = expect_symbol(nl[0], "node kind")
    if kind not in ("u", "e", "leaf"):
        raise ParseError(f"unknown node kind {kind!r}", *where(nl[0]))
    label = expect_int(nl[1], "node label")
    children, pre = [], None
    for x in nl[2:]:
        xl = expect_list(x, "a child node or (pre ...)")
        if xl and isinstance(xl[0], Symbol) and xl[0].text == "pre":
            if pre is not None:
                raise ParseError("two (pre ...) entries on one node", xl.line, xl.col)
            pre = _parse_pre(xl, sig)
        else:
            children.append(_parse_node(xl, sig))
    if kind == "leaf":
        if children or pre is None:
            raise ParseError("(leaf LABEL (pre ...)) takes exactly a pre-structure", nl.line, nl.col)
        kind = EXISTENTIAL
    return Node(kind, label, tuple(children), pre)


def _parse_pre(pl: SList, sig: Signature) -> PreStructure:
    types: dict[int, OneType] = {}
    covering = []
    atoms = []
    for x in pl[1:]:
        xl = expect_list(x, "(type E ...) or (R (i ...) true|false)")
        if not xl:
            raise ParseError("empty entry", xl.line, xl.col)
        head = expect_symbol(xl[0], "'type' or a relation name")
        if head == "type":
            if len(xl) < 2:
                raise ParseError("(type E (R true|false) ...)", xl.line, xl.col)
            e = expect_int(xl[1], "element")
            true_rels = []
            for y in xl[2:]:
                yl = expect_list(y, "(R true|false)")
                if len(yl) != 2:
                    raise ParseError("expected (R true|false)", yl.line, yl.col)
                name = expect_symbol(yl[0], "relation name")
                if name not in sig or sig.arity(name) < 1:
                    raise ParseError(f"unknown relation {name}", *where(yl[0]))
                if _bool(yl[1]):
                    true_rels.append(name)
            if e in types:
                raise ParseError(f"type of element {e} given twice", xl.line, xl.col)
            types[e] = OneType.from_true(sig, true_rels)
        else:
            if head not in sig:
                raise ParseError(f"unknown relation {head}", *where(xl[0]))
            if len(xl) != 3:
                raise ParseError(f"expected ({head} (i ...) true|false)", xl.line, xl.col)
            tl = expect_list(xl[1], "an element tuple")
            t = tuple(expect_int(y, "element") for y in tl)
            if len(t) != sig.arity(head):
                raise ParseError(f"{head} has arity {sig.arity(head)}", tl.line, tl.col)
            atoms.append((head, t, xl))
            if _bool(xl[2]):
                covering.append((head, t))
    elems = frozenset(types)
    if not elems:
        raise ParseError("a pre-structure needs at least one (type ...) entry", pl.line, pl.col)
    for head, t, xl in atoms:
        if set(t) != elems or len(elems) < 2:
            raise ParseError(f"atom {head}{t} does not cover the elements {sorted(elems)}", xl.line, xl.col)
    return pre_structure(sig, types, covering)


def _bool(sym) -> bool:
    v = expect_symbol(sym, "true or false")
    if v not in ("true", "false"):
        raise ParseError("expected true or false", *where(sym))
    return v == "true"
