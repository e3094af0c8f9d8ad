"""Finite model search and the satisfiability pipeline.

``enumerate_structures`` is the brute-force oracle used by the tests.  The
bounded search grounds the formula over {0..n-1} and hands the clauses to
the CDCL engine, asking for the lexicographically least model, which is the
first model the oracle would enumerate.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from typing import Iterator

from .formula import Formula, Signature, check_signature, uses_equality
from .normal_form import NormalForm, to_weak_normal_form, zero_ary_branches
from .propositional import CDCL, Encoder, SearchTimeout, lex_least
from .semantics import Structure, evaluate

SAT = "SAT"
UNSAT_UP_TO = "UNSAT_UP_TO"
UNSAT_COMPLETE = "UNSAT_COMPLETE"
UNKNOWN = "UNKNOWN"


@dataclass(frozen=True)
class SearchConfig:
    max_size: int = 4
    isomorphism_pruning: bool = False
    time_budget: float | None = None    # seconds of wall-clock time

    def __post_init__(self):
        if self.max_size < 1:
            raise ValueError("max_size must be at least 1")


@dataclass
class SolveResult:
    status: str
    bound: int | None = None
    model: Structure | None = None
    branch: tuple[tuple[str, bool], ...] | None = None
    stats: dict = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        if self.status == SAT:
            return "SAT"
        if self.status == UNSAT_COMPLETE:
            return "UNSAT"
        if self.status == UNSAT_UP_TO:
            return f"UNSAT-UP-TO {self.bound}"
        return "UNKNOWN"


# ----------------------------------------------------------------- oracle


def atom_order(sig: Signature, n: int) -> list[tuple[str, tuple]]:
    """All ground atoms over {0..n-1}, sorted by relation name and then tuple."""
    return [(name, t) for name, k in sig.sorted_relations() for t in itertools.product(range(n), repeat=k)]


def enumerate_structures(sig: Signature, n: int, isomorphism_pruning: bool = False) -> Iterator[Structure]:
    """Every structure of size ``n``; the first atom is the most significant bit."""
    if n < 1:
        raise ValueError("n must be positive")
    atoms = atom_order(sig, n)
    index = {a: i for i, a in enumerate(atoms)}
    perms = list(itertools.permutations(range(n)))[1:] if isomorphism_pruning else []
    for bits in itertools.product((False, True), repeat=len(atoms)):
        if perms and not _canonical(bits, atoms, index, perms):
            continue
        rels: dict[str, list] = {}
        for (name, t), b in zip(atoms, bits):
            if b:
                rels.setdefault(name, []).append(t)
        yield Structure(sig, n, rels)


def _canonical(bits, atoms, index, perms) -> bool:
    for p in perms:
        image = [False] * len(bits)
        for (name, t), b in zip(atoms, bits):
            if b:
                image[index[(name, tuple(p[e] for e in t))]] = True
        if tuple(image) < bits:
            return False
    return True


# --------------------------------------------------------- bounded search


def _deadline(cfg: SearchConfig, start: float) -> float | None:
    return None if cfg.time_budget is None else start + cfg.time_budget


def find_model(f: Formula, sig: Signature, n: int, isomorphism_pruning: bool = False,
               deadline: float | None = None, stats: dict | None = None) -> Structure | None:
    """The least model of size ``n`` in enumeration order (or under pruning, the
    least one whose 1-types are sorted), or None."""
    solver = CDCL()
    atoms = atom_order(sig, n)
    var = {a: solver.new_var() for a in atoms}
    enc = Encoder(solver, lambda rel, args: var[(rel, args)])
    domain = range(n)
    if enc.require(f, domain) and isomorphism_pruning and n > 1:
        _sorted_types(solver, sig, n, var)
    result = lex_least(solver, [var[a] for a in atoms], deadline=deadline) if solver.ok else None
    if stats is not None:
        stats["conflicts"] = stats.get("conflicts", 0) + solver.conflicts
        stats["sizes_searched"] = stats.get("sizes_searched", 0) + 1
    if result is None:
        return None
    rels: dict[str, list] = {}
    for (name, t), v in var.items():
        if result[v]:
            rels.setdefault(name, []).append(t)
    return Structure(sig, n, rels)


def _sorted_types(solver: CDCL, sig: Signature, n: int, var):
    """Require the diagonal bit vectors of consecutive elements to be lex-ordered.

    Every structure is isomorphic to one whose elements are sorted by 1-type,
    so this keeps at least one member of each isomorphism class."""
    rels = sig.unary_and_up()
    if not rels:
        return
    for e in range(n - 1):
        a = [var[(name, (e,) * k)] for name, k in rels]
        b = [var[(name, (e + 1,) * k)] for name, k in rels]
        eq = None     # literal meaning "the prefixes so far are equal"; None is true
        for x, y in zip(a, b):
            guard = [] if eq is None else [-eq]
            solver.add_clause(guard + [-x, y])
            nxt = solver.new_var()
            solver.add_clause(guard + [x, y, nxt])
            solver.add_clause(guard + [-x, -y, nxt])
            eq = nxt


def solve_bounded(f, cfg: SearchConfig, sig: Signature | None = None) -> SolveResult:
    """Search sizes 1..max_size in order for a model of a formula or normal form."""
    if isinstance(f, NormalForm):
        sig = f.signature
        f = f.to_formula()
    if sig is None:
        raise ValueError("a signature is needed for a bare formula")
    check_signature(f, sig)
    start = time.monotonic()
    stats: dict = {}
    try:
        for n in range(1, cfg.max_size + 1):
            model = find_model(f, sig, n, cfg.isomorphism_pruning, _deadline(cfg, start), stats)
            if model is not None:
                if not evaluate(model, f):
                    raise AssertionError("search returned a structure that is not a model")
                stats["elapsed"] = time.monotonic() - start
                return SolveResult(SAT, n, model, None, stats)
    except SearchTimeout:
        stats["elapsed"] = time.monotonic() - start
        return SolveResult(UNKNOWN, stats.get("sizes_searched"), None, None, stats)
    stats["elapsed"] = time.monotonic() - start
    return SolveResult(UNSAT_UP_TO, cfg.max_size, None, None, stats)


# ---------------------------------------------------------------- pipeline


def theoretical_bound(nf: NormalForm) -> int:
    if nf.m_exists == 0:
        return 1
    K = nf.K
    t = 1 if K == 1 else (K - 1) ** (K - 1)
    return 2 * K * nf.m_exists * t * 2 ** len(nf.signature.unary_and_up())


def decide(f: Formula, sig: Signature, cfg: SearchConfig) -> SolveResult:
    """Satisfiability through the weak normal form and its 0-ary branches."""
    start = time.monotonic()
    w = to_weak_normal_form(f, sig)
    branches = zero_ary_branches(w)
    equality = uses_equality(f)
    stats: dict = {"branches": len(branches), "fresh_symbols": len(w.trace)}
    complete = not equality
    searched = 0
    for nf in branches:
        bound = theoretical_bound(nf)
        limit = min(cfg.max_size, bound)
        if limit < bound:
            complete = False
        remaining = None if cfg.time_budget is None else max(0.0, cfg.time_budget - (time.monotonic() - start))
        res = solve_bounded(nf, SearchConfig(limit, cfg.isomorphism_pruning, remaining))
        stats["conflicts"] = stats.get("conflicts", 0) + res.stats.get("conflicts", 0)
        if res.status == UNKNOWN:
            stats["elapsed"] = time.monotonic() - start
            return SolveResult(UNKNOWN, None, None, nf.valuation, stats)
        searched = max(searched, limit)
        if res.status == SAT:
            model = _source_model(res.model, nf, sig)
            if not evaluate(model, f):
                raise AssertionError("branch model does not satisfy the input formula")
            stats["elapsed"] = time.monotonic() - start
            return SolveResult(SAT, res.bound, model, nf.valuation, stats)
    stats["elapsed"] = time.monotonic() - start
    if complete:
        return SolveResult(UNSAT_COMPLETE, searched, None, None, stats)
    return SolveResult(UNSAT_UP_TO, cfg.max_size, None, None, stats)


def _source_model(m: Structure, nf: NormalForm, sig: Signature) -> Structure:
    """Reduct of a branch model to the input signature, with the branch's 0-ary values."""
    values = dict(nf.valuation)
    rels = {}
    for name, k in sig.relations:
        rels[name] = ([()] if values[name] else []) if k == 0 else m.relation(name)
    return Structure(sig, m.size, rels)

