"""Fragment membership: sUF1, AUF1, AUF1-minus and FO2.

A parsed formula only shows maximal quantifier chains, while the formation
rules talk about blocks.  A chain is accepted when *some* split of it into
consecutive blocks obeys the rules; the split is found by a memoized search
over split points, preferring the fewest blocks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

from .formula import (
    EXISTS, FORALL, Atom, Const, Eq, Formula, Imp, Not, Quant,
    free_variables, infer_blocks, locator, subformulas, to_nnf,
)

SUF1, AUF1, AUF1_MINUS, FO2 = "sUF1", "AUF1", "AUF1minus", "FO2"
FRAGMENTS = (SUF1, AUF1, AUF1_MINUS, FO2)
_ALIASES = {
    "suf1": SUF1, "auf1": AUF1, "auf1minus": AUF1_MINUS, "auf1m": AUF1_MINUS,
    "auf1-": AUF1_MINUS, "fo2": FO2,
}

ONE_DIMENSIONALITY = "one-dimensionality"
UNIFORMITY = "uniformity"
BLOCK_SHAPE = "block-shape"
VARIABLE_COUNT = "variable-count"
EQUALITY_USE = "equality-use"


class UnknownFragment(ValueError):
    pass


def fragment_name(name: str) -> str:
    if name in FRAGMENTS:
        return name
    try:
        return _ALIASES[name.lower()]
    except KeyError:
        raise UnknownFragment(f"unknown fragment {name!r}; expected one of {', '.join(FRAGMENTS)}") from None


@dataclass(frozen=True)
class Violation:
    locator: str
    rule: str
    detail: str = ""

    def __str__(self) -> str:
        return f"{self.locator}: {self.rule}: {self.detail}"


@dataclass(frozen=True)
class MembershipReport:
    fragment: str
    violations: tuple[Violation, ...] = ()
    notes: tuple[str, ...] = ()
    # the checked formula with chains split into the chosen blocks (None if rejected)
    blocks: Formula | None = field(default=None, compare=False, repr=False)

    @property
    def accepted(self) -> bool:
        return not self.violations


def check_fragment(f: Formula, fragment: str, allow_equality: bool = False) -> MembershipReport:
    fragment = fragment_name(fragment)
    notes: list[str] = []
    if fragment == AUF1_MINUS:
        notes.append("converted to negation normal form before checking")
        f = to_nnf(f)
    f = infer_blocks(f)
    if fragment == FO2:
        violations = _check_fo2(f, allow_equality)
        blocks = f if not violations else None
    else:
        checker = _BlockChecker(fragment, allow_equality)
        violations, blocks = checker.run(f)
        notes.extend(checker.notes)
    if any(isinstance(node, Eq) for _, node in subformulas(f)) and allow_equality:
        notes.append("equality present: exempt from uniformity, but finite-model guarantees do not apply")
    for path, node in subformulas(f):
        if isinstance(node, Quant):
            body_free = free_variables(node.body)
            for v in node.variables:
                if v not in body_free:
                    notes.append(f"{locator(path)}: vacuous quantification of {v}")
    return MembershipReport(fragment, tuple(violations), tuple(dict.fromkeys(notes)),
                            blocks if not violations else None)


def _check_fo2(f: Formula, allow_equality: bool) -> list[Violation]:
    out = []
    names: set[str] = set()
    for path, node in subformulas(f):
        if isinstance(node, Atom):
            names.update(node.args)
        elif isinstance(node, Eq):
            names.update((node.left, node.right))
            if not allow_equality:
                out.append(Violation(locator(path), EQUALITY_USE, "equality is not enabled"))
        elif isinstance(node, Quant):
            names.update(node.variables)
    if len(names) > 2:
        out.insert(0, Violation("/", VARIABLE_COUNT,
                                f"{len(names)} variable names used: {', '.join(sorted(names))}"))
    return out


def block_shape_ok(fragment: str, kinds) -> bool:
    if fragment == SUF1:
        return len(set(kinds)) == 1
    if fragment == AUF1_MINUS:
        return all(k == FORALL for k in kinds) or kinds[-1] == EXISTS
    return True


class _BlockChecker:
    def __init__(self, fragment: str, allow_equality: bool):
        self.fragment = fragment
        self.allow_equality = allow_equality
        self.notes: list[str] = []
        self._chains: dict[int, tuple[list[Violation], Formula]] = {}

    def run(self, f: Formula):
        return self.node(f, (), None)

    def node(self, f: Formula, path, full: frozenset | None):
        """Check ``f`` inside a matrix whose full variable set is ``full``.

        Returns (violations, rebuilt formula with blocks made explicit).
        """
        if isinstance(f, Atom):
            vs = set(f.args)
            if len(vs) <= 1 or (full is not None and vs == full):
                return [], f
            want = "{" + ", ".join(sorted(full)) + "}" if full is not None else "no enclosing block"
            return [Violation(locator(path), UNIFORMITY,
                              f"atom {f} uses {{{', '.join(sorted(vs))}}}, block variables are {want}")], f
        if isinstance(f, Eq):
            if self.allow_equality:
                return [], f
            return [Violation(locator(path), EQUALITY_USE, "equality is not enabled")], f
        if isinstance(f, Const):
            return [], f
        if isinstance(f, Quant):
            key = id(f)
            if key not in self._chains:
                self._chains[key] = self.chain(f, path)
            return self._chains[key]
        kids = []
        out: list[Violation] = []
        parts = (f.child,) if isinstance(f, Not) else (
            (f.antecedent, f.consequent) if isinstance(f, Imp) else f.children)
        for i, c in enumerate(parts):
            v, rebuilt = self.node(c, path + (i,), full)
            out.extend(v)
            kids.append(rebuilt)
        if isinstance(f, Not):
            return out, Not(kids[0])
        if isinstance(f, Imp):
            return out, Imp(*kids)
        return out, type(f)(tuple(kids))

    def chain(self, q: Quant, path):
        prefix, matrix, n = q.prefix, q.body, len(q.prefix)
        matrix_free = free_variables(matrix)
        # free variables of the block starting at position a
        free_from = [matrix_free - {v for _, v in prefix[a:]} for a in range(n + 1)]
        matrix_results: dict[frozenset, tuple] = {}

        def check_matrix(full: frozenset):
            if full not in matrix_results:
                matrix_results[full] = self.node(matrix, path + (0,), full)
            return matrix_results[full]

        def segment(a: int, b: int) -> list[Violation]:
            out = []
            kinds = [k for k, _ in prefix[a:b]]
            where = f"{locator(path)}[{a}:{b}]"
            if not block_shape_ok(self.fragment, kinds):
                what = {SUF1: "mixes quantifier kinds",
                        AUF1_MINUS: "is neither all-universal nor ends existentially"}[self.fragment]
                out.append(Violation(where, BLOCK_SHAPE, f"block {_show(prefix[a:b])} {what}"))
            if len(free_from[a]) > 1:
                out.append(Violation(where, ONE_DIMENSIONALITY,
                                     f"block {_show(prefix[a:b])} leaves {{{', '.join(sorted(free_from[a]))}}} free"))
            return out

        @lru_cache(maxsize=None)
        def best(a: int):
            # -> (violation count, block count, violations, split points, rebuilt matrix)
            options = []
            for b in range(a + 1, n + 1):
                here = segment(a, b)
                if b == n:
                    full = frozenset(v for _, v in prefix[a:]) | free_from[a]
                    mv, rebuilt = check_matrix(full)
                    options.append((len(here) + len(mv), 1, here + mv, (b,), rebuilt))
                else:
                    cnt, blocks, rest, splits, rebuilt = best(b)
                    options.append((len(here) + cnt, 1 + blocks, here + rest, (b,) + splits, rebuilt))
            return min(options, key=lambda o: (o[0], o[1]))

        _, _, violations, splits, body = best(0)
        starts = (0,) + splits[:-1]
        for a, b in reversed(list(zip(starts, splits))):
            body = Quant(prefix[a:b], body)
        if len(splits) > 1 and not violations:
            self.notes.append(f"{locator(path)}: quantifier chain read as blocks "
                              + " | ".join(_show(prefix[a:b]) for a, b in zip(starts, splits)))
        return list(violations), body


def _show(prefix) -> str:
    return "".join(("A" if k == FORALL else "E") + v for k, v in prefix)
