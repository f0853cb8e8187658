"""A small CDCL SAT solver with a fixed decision order and per-variable polarity.

Literals are non-zero ints in DIMACS style. The solver is incremental: clauses
may be added between calls and each call may pass assumption literals."""

from __future__ import annotations


class Solver:
    def __init__(self) -> None:
        self.nvars = 0
        self.clauses: list[list[int]] = []
        self.watches: dict[int, list[list[int]]] = {}
        self.assign: list[int] = [0]  # per var: 0 unassigned, 1 true, -1 false
        self.level: list[int] = [0]
        self.reason: list[list[int] | None] = [None]
        self.phase: list[bool] = [False]
        self.trail: list[int] = []
        self.trail_lim: list[int] = []
        self.qhead = 0
        self.order: list[int] = []
        self.pos: list[int] = [0]
        self.next_idx = 0
        self.ok = True
        self.model: list[bool] = []
        self.conflicts = 0

    def new_var(self, phase: bool = False) -> int:
        self.nvars += 1
        v = self.nvars
        self.assign.append(0)
        self.level.append(0)
        self.reason.append(None)
        self.phase.append(phase)
        self.watches[v] = []
        self.watches[-v] = []
        self.pos.append(len(self.order))
        self.order.append(v)
        return v

    def prioritize(self, first: list[int]) -> None:
        """Decide the given variables first, in this order; others keep creation order."""
        head = list(dict.fromkeys(first))
        chosen = set(head)
        self.order = head + [v for v in self.order if v not in chosen]
        for i, v in enumerate(self.order):
            self.pos[v] = i
        self.next_idx = 0

    def value(self, lit: int) -> int:
        a = self.assign[abs(lit)]
        return a if lit > 0 else -a

    # clause management
    def add_clause(self, lits) -> bool:
        if not self.ok:
            return False
        self._cancel_until(0)
        clause: list[int] = []
        for lit in dict.fromkeys(lits):
            if -lit in clause:
                return True
            val = self.value(lit)
            if val == 1:
                return True
            if val == 0:
                clause.append(lit)
        if not clause:
            self.ok = False
            return False
        if len(clause) == 1:
            self._enqueue(clause[0], None)
            if self._propagate() is not None:
                self.ok = False
            return self.ok
        self.clauses.append(clause)
        self.watches[clause[0]].append(clause)
        self.watches[clause[1]].append(clause)
        return True

    def _enqueue(self, lit: int, reason) -> None:
        v = abs(lit)
        self.assign[v] = 1 if lit > 0 else -1
        self.level[v] = len(self.trail_lim)
        self.reason[v] = reason
        self.trail.append(lit)

    def _propagate(self):
        assign = self.assign
        while self.qhead < len(self.trail):
            p = self.trail[self.qhead]
            self.qhead += 1
            false_lit = -p
            ws = self.watches[false_lit]
            keep: list[list[int]] = []
            i = 0
            n = len(ws)
            while i < n:
                c = ws[i]
                i += 1
                if c[0] == false_lit:
                    c[0], c[1] = c[1], c[0]
                first = c[0]
                fv = assign[abs(first)]
                if (fv if first > 0 else -fv) == 1:
                    keep.append(c)
                    continue
                for k in range(2, len(c)):
                    lk = c[k]
                    av = assign[abs(lk)]
                    if (av if lk > 0 else -av) != -1:
                        c[1], c[k] = lk, c[1]
                        self.watches[lk].append(c)
                        break
                else:
                    keep.append(c)
                    if (fv if first > 0 else -fv) == -1:
                        keep.extend(ws[i:])
                        self.watches[false_lit] = keep
                        self.qhead = len(self.trail)
                        return c
                    self._enqueue(first, c)
            self.watches[false_lit] = keep
        return None

    def _analyze(self, confl: list[int]) -> tuple[list[int], int]:
        seen = set()
        learnt = [0]
        counter = 0
        p = 0
        idx = len(self.trail) - 1
        cur = len(self.trail_lim)
        clause = confl
        while True:
            for q in clause:
                if q == p:
                    continue
                v = abs(q)
                if v in seen or self.level[v] == 0:
                    continue
                seen.add(v)
                if self.level[v] == cur:
                    counter += 1
                else:
                    learnt.append(q)
            while abs(self.trail[idx]) not in seen:
                idx -= 1
            p = self.trail[idx]
            idx -= 1
            counter -= 1
            if counter == 0:
                break
            clause = self.reason[abs(p)]
            seen.discard(abs(p))
        learnt[0] = -p
        if len(learnt) == 1:
            return learnt, 0
        best = max(range(1, len(learnt)), key=lambda j: self.level[abs(learnt[j])])
        learnt[1], learnt[best] = learnt[best], learnt[1]
        return learnt, self.level[abs(learnt[1])]

    def _cancel_until(self, lvl: int) -> None:
        if len(self.trail_lim) <= lvl:
            return
        start = self.trail_lim[lvl]
        for lit in self.trail[start:]:
            v = abs(lit)
            self.assign[v] = 0
            self.reason[v] = None
            if self.pos[v] < self.next_idx:
                self.next_idx = self.pos[v]
        del self.trail[start:]
        del self.trail_lim[lvl:]
        self.qhead = len(self.trail)

    def _pick(self) -> int:
        order = self.order
        while self.next_idx < len(order):
            v = order[self.next_idx]
            if self.assign[v] == 0:
                return v if self.phase[v] else -v
            self.next_idx += 1
        return 0

    def solve(self, assumptions=()) -> bool:
        """True iff satisfiable under the assumptions; the model is kept in self.model."""
        self.model = []
        if not self.ok:
            return False
        self._cancel_until(0)
        if self._propagate() is not None:
            self.ok = False
            return False
        assumptions = list(assumptions)
        while True:
            confl = self._propagate()
            if confl is not None:
                self.conflicts += 1
                if len(self.trail_lim) == 0:
                    self.ok = False
                    return False
                learnt, back = self._analyze(confl)
                self._cancel_until(back)
                if len(learnt) == 1:
                    self._enqueue(learnt[0], None)
                else:
                    self.clauses.append(learnt)
                    self.watches[learnt[0]].append(learnt)
                    self.watches[learnt[1]].append(learnt)
                    self._enqueue(learnt[0], learnt)
                continue
            lvl = len(self.trail_lim)
            if lvl < len(assumptions):
                lit = assumptions[lvl]
                val = self.value(lit)
                if val == -1:
                    self._cancel_until(0)
                    return False
                self.trail_lim.append(len(self.trail))
                if val == 0:
                    self._enqueue(lit, None)
                continue
            lit = self._pick()
            if lit == 0:
                self.model = [False] + [self.assign[v] > 0 for v in range(1, self.nvars + 1)]
                self._cancel_until(0)
                return True
            self.trail_lim.append(len(self.trail))
            self._enqueue(lit, None)


def totalizer(solver: Solver, lits: list[int]) -> list[int]:
    """Unary counter over lits: outputs[k-1] is true iff at least k inputs are true."""
    if not lits:
        return []
    nodes = [[lit] for lit in lits]
    while len(nodes) > 1:
        merged = []
        for i in range(0, len(nodes) - 1, 2):
            merged.append(_merge(solver, nodes[i], nodes[i + 1]))
        if len(nodes) % 2:
            merged.append(nodes[-1])
        nodes = merged
    return nodes[0]


def _merge(solver: Solver, a: list[int], b: list[int]) -> list[int]:
    p, q = len(a), len(b)
    r = [solver.new_var() for _ in range(p + q)]
    for i in range(p + 1):
        for j in range(q + 1):
            if i + j >= 1:
                clause = [r[i + j - 1]]
                if i:
                    clause.append(-a[i - 1])
                if j:
                    clause.append(-b[j - 1])
                solver.add_clause(clause)
            if i + j < p + q:
                clause = [-r[i + j]]
                if i < p:
                    clause.append(a[i])
                if j < q:
                    clause.append(b[j])
                solver.add_clause(clause)
    return r
