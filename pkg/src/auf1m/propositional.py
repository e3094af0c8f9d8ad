"""Grounding of first-order formulas over finite domains and a small CDCL search.

This is the backtracking core behind bounded model search, pre-structure
completion and 1-type compatibility.  Formulas are grounded in negation
normal form, so a one-directional (Plaisted-Greenbaum) clause encoding is
enough: every gate variable only implies its definition.
"""

from __future__ import annotations

import heapq
import time
from typing import Callable, Iterable, Sequence

from .formula import And, Atom, Const, Eq, Formula, Not, Or, Quant, FORALL, is_nnf, to_nnf


class SearchTimeout(Exception):
    pass


class CDCL:
    """Conflict-driven clause learning with two watched literals.

    Literals are non-zero ints (``-v`` is the negation of ``v``).  Decisions
    use VSIDS with ties broken by variable index and a saved phase that
    starts at false, so runs are fully deterministic.
    """

    def __init__(self):
        self.nvars = 0
        self.clauses: list[list[int]] = []
        self.watches: dict[int, list[int]] = {}
        self.assign: list[int] = [0]
        self.level: list[int] = [0]
        self.reason: list[int] = [-1]
        self.activity: list[float] = [0.0]
        self.phase: list[bool] = [False]
        self.trail: list[int] = []
        self.trail_lim: list[int] = []
        self.qhead = 0
        self.ok = True
        self.var_inc = 1.0
        self.heap: list[tuple[float, int]] = []
        self.conflicts = 0
        self.decisions = 0

    # -- construction

    def new_var(self) -> int:
        self.nvars += 1
        v = self.nvars
        self.assign.append(0)
        self.level.append(0)
        self.reason.append(-1)
        self.activity.append(0.0)
        self.phase.append(False)
        self.watches[v] = []
        self.watches[-v] = []
        heapq.heappush(self.heap, (0.0, v))
        return v

    def value(self, lit: int) -> int:
        a = self.assign[abs(lit)]
        return a if lit > 0 else -a

    def add_clause(self, lits: Iterable[int]) -> bool:
        if not self.ok:
            return False
        self._cancel_until(0)
        seen: set[int] = set()
        clause = []
        for lit in lits:
            if -lit in seen:
                return True
            if lit in seen:
                continue
            val = self.value(lit)
            if val > 0:
                return True
            if val < 0:
                continue
            seen.add(lit)
            clause.append(lit)
        if not clause:
            self.ok = False
            return False
        if len(clause) == 1:
            self._enqueue(clause[0], -1)
            if self._propagate() != -1:
                self.ok = False
            return self.ok
        self._attach(clause)
        return True

    def _attach(self, clause: list[int]) -> int:
        idx = len(self.clauses)
        self.clauses.append(clause)
        self.watches[clause[0]].append(idx)
        self.watches[clause[1]].append(idx)
        return idx

    # -- core loop

    def _enqueue(self, lit: int, reason: int):
        v = abs(lit)
        self.assign[v] = 1 if lit > 0 else -1
        self.level[v] = len(self.trail_lim)
        self.reason[v] = reason
        self.trail.append(lit)

    def _propagate(self) -> int:
        clauses, watches, assign = self.clauses, self.watches, self.assign
        while self.qhead < len(self.trail):
            p = self.trail[self.qhead]
            self.qhead += 1
            false_lit = -p
            ws = watches[false_lit]
            keep = []
            i, n = 0, len(ws)
            while i < n:
                ci = ws[i]
                i += 1
                c = clauses[ci]
                if c[0] == false_lit:
                    c[0], c[1] = c[1], c[0]
                first = c[0]
                fa = assign[abs(first)]
                if (fa if first > 0 else -fa) > 0:
                    keep.append(ci)
                    continue
                for k in range(2, len(c)):
                    lit = c[k]
                    la = assign[abs(lit)]
                    if (la if lit > 0 else -la) >= 0:
                        c[1], c[k] = lit, false_lit
                        watches[lit].append(ci)
                        break
                else:
                    keep.append(ci)
                    if (fa if first > 0 else -fa) < 0:
                        keep.extend(ws[i:])
                        watches[false_lit] = keep
                        self.qhead = len(self.trail)
                        return ci
                    self._enqueue(first, ci)
            watches[false_lit] = keep
        return -1

    def _analyze(self, confl: int) -> tuple[list[int], int]:
        seen = set()
        learnt = [0]
        counter = 0
        p = 0
        idx = len(self.trail) - 1
        cur = len(self.trail_lim)
        c = confl
        while True:
            for q in self.clauses[c]:
                if q == p:
                    continue
                v = abs(q)
                if v not in seen and self.level[v] > 0:
                    seen.add(v)
                    self._bump(v)
                    if self.level[v] == cur:
                        counter += 1
                    else:
                        learnt.append(q)
            while abs(self.trail[idx]) not in seen:
                idx -= 1
            p = self.trail[idx]
            idx -= 1
            seen.discard(abs(p))
            counter -= 1
            if counter == 0:
                break
            c = self.reason[abs(p)]
        learnt[0] = -p
        if len(learnt) == 1:
            return learnt, 0
        best = max(range(1, len(learnt)), key=lambda j: self.level[abs(learnt[j])])
        learnt[1], learnt[best] = learnt[best], learnt[1]
        return learnt, self.level[abs(learnt[1])]

    def _bump(self, v: int):
        self.activity[v] += self.var_inc
        if self.activity[v] > 1e100:
            self.activity = [a * 1e-100 for a in self.activity]
            self.var_inc *= 1e-100
            self.heap = [(-self.activity[u], u) for u in range(1, self.nvars + 1) if self.assign[u] == 0]
            heapq.heapify(self.heap)
            return
        if self.assign[v] == 0:
            heapq.heappush(self.heap, (-self.activity[v], v))

    def _cancel_until(self, lvl: int):
        if len(self.trail_lim) <= lvl:
            return
        start = self.trail_lim[lvl]
        for lit in self.trail[start:]:
            v = abs(lit)
            self.phase[v] = lit > 0
            self.assign[v] = 0
            self.reason[v] = -1
            heapq.heappush(self.heap, (-self.activity[v], v))
        del self.trail[start:]
        del self.trail_lim[lvl:]
        self.qhead = len(self.trail)

    def _pick(self) -> int:
        while self.heap:
            neg_act, v = heapq.heappop(self.heap)
            if self.assign[v] == 0 and -neg_act == self.activity[v]:
                return v
        for v in range(1, self.nvars + 1):
            if self.assign[v] == 0:
                return v
        return 0

    def solve(self, assumptions: Sequence[int] = (), deadline: float | None = None) -> bool:
        if not self.ok:
            return False
        self._cancel_until(0)
        if self._propagate() != -1:
            self.ok = False
            return False
        restart_at = 100
        luby_i = 1
        since_restart = 0
        while True:
            confl = self._propagate()
            if confl != -1:
                self.conflicts += 1
                since_restart += 1
                if not self.trail_lim:
                    self.ok = False
                    return False
                if deadline is not None and self.conflicts % 64 == 0 and time.monotonic() > deadline:
                    raise SearchTimeout()
                learnt, back = self._analyze(confl)
                self._cancel_until(back)
                if len(learnt) == 1:
                    self._enqueue(learnt[0], -1)
                else:
                    self._enqueue(learnt[0], self._attach(learnt))
                self.var_inc /= 0.95
                continue
            if since_restart >= restart_at:
                since_restart = 0
                luby_i += 1
                restart_at = 100 * _luby(luby_i)
                self._cancel_until(0)
                continue
            lvl = len(self.trail_lim)
            if lvl < len(assumptions):
                lit = assumptions[lvl]
                val = self.value(lit)
                self.trail_lim.append(len(self.trail))
                if val < 0:
                    self._cancel_until(0)
                    return False
                if val == 0:
                    self._enqueue(lit, -1)
                continue
            v = self._pick()
            if v == 0:
                return True
            self.decisions += 1
            if deadline is not None and self.decisions % 1024 == 0 and time.monotonic() > deadline:
                raise SearchTimeout()
            self.trail_lim.append(len(self.trail))
            self._enqueue(v if self.phase[v] else -v, -1)

    def model_value(self, v: int) -> bool:
        """Value of ``v`` after a successful solve; unassigned reads as false."""
        return self.assign[v] > 0


def _luby(i: int) -> int:
    k = 1
    while (1 << k) - 1 < i:
        k += 1
    while True:
        if i == (1 << k) - 1:
            return 1 << (k - 1)
        i -= (1 << (k - 1)) - 1
        k = 1
        while (1 << k) - 1 < i:
            k += 1


class Encoder:
    """Builds clauses for NNF formulas grounded over a finite domain.

    ``atom`` maps a relation name and an element tuple to ``True``/``False``
    (a fixed value) or to a solver literal.
    """

    def __init__(self, solver: CDCL, atom: Callable[[str, tuple], object]):
        self.solver = solver
        self.atom = atom
        self._gates: dict[tuple, int] = {}

    def ground(self, f: Formula, domain: Sequence[int], env: dict) -> object:
        """Return True, False or a literal equivalent (one-directionally) to ``f``."""
        if isinstance(f, Atom):
            return self.atom(f.rel, tuple(env[a] for a in f.args))
        if isinstance(f, Eq):
            return env[f.left] == env[f.right]
        if isinstance(f, Const):
            return f.value
        if isinstance(f, Not):
            inner = self.ground(f.child, domain, env)
            return (not inner) if isinstance(inner, bool) else -inner
        if isinstance(f, (And, Or)):
            return self._gate(isinstance(f, And), (self.ground(c, domain, env) for c in f.children))
        if isinstance(f, Quant):
            return self._ground_block(f.prefix, 0, f.body, domain, dict(env))
        raise TypeError(f"cannot ground {f!r}")

    def _ground_block(self, prefix, i, body, domain, env):
        if i == len(prefix):
            return self.ground(body, domain, env)
        kind, var = prefix[i]

        def parts():
            for e in domain:
                env[var] = e
                yield self._ground_block(prefix, i + 1, body, domain, env)

        return self._gate(kind == FORALL, parts())

    def _gate(self, is_and: bool, parts) -> object:
        absorbing = not is_and
        lits = set()
        for p in parts:
            if isinstance(p, bool):
                if p == absorbing:
                    return absorbing
                continue
            if -p in lits:
                return absorbing
            lits.add(p)
        if not lits:
            return is_and
        if len(lits) == 1:
            return next(iter(lits))
        key = (is_and, tuple(sorted(lits)))
        g = self._gates.get(key)
        if g is None:
            g = self.solver.new_var()
            if is_and:
                for lit in key[1]:
                    self.solver.add_clause((-g, lit))
            else:
                self.solver.add_clause((-g,) + key[1])
            self._gates[key] = g
        return g

    def require(self, f: Formula, domain: Sequence[int], env: dict | None = None) -> bool:
        """Add ``f`` as a hard constraint; False if it is trivially unsatisfiable."""
        if not is_nnf(f):
            f = to_nnf(f)
        lit = self.ground(f, domain, dict(env or {}))
        if lit is True:
            return True
        if lit is False:
            self.solver.add_clause(())
            return False
        return self.solver.add_clause((lit,))


def lex_least(solver: CDCL, order: Sequence[int], deadline: float | None = None) -> dict[int, bool] | None:
    """Lexicographically least assignment to ``order`` (false < true), or None."""
    if not solver.solve(deadline=deadline):
        return None
    current = {v: solver.model_value(v) for v in order}
    fixed: list[int] = []
    for v in order:
        if current[v]:
            if solver.solve(fixed + [-v], deadline=deadline):
                current = {u: solver.model_value(u) for u in order}
            else:
                fixed.append(v)
                continue
        fixed.append(-v)
    return {abs(l): l > 0 for l in fixed}
