"""Complete CNF satisfiability solver (CDCL).

Conflict-driven clause learning with two-watched-literal propagation
(binary clauses kept in dedicated implication lists, long clauses watched
with blocking literals), first-UIP conflict analysis, a heap-backed
decayed-activity decision heuristic, phase saving, Luby restarts, and
glue-aware learned-clause deletion. Deterministic: no randomized
tie-breaking, so a formula always yields the same model.

Variables are positive integers 1..nvars; clauses are lists of signed ints
in DIMACS style (-v is the negation of v).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from heapq import heappush, heappop

__all__ = ["CNF", "Solver", "solve"]

_UNASSIGNED = -1


@dataclass
class CNF:
    nvars: int = 0
    clauses: list[list[int]] = field(default_factory=list)

    def new_var(self) -> int:
        self.nvars += 1
        return self.nvars

    def add_clause(self, lits: list[int]) -> None:
        if not lits:
            raise ValueError("empty clause makes the formula trivially unsat")
        for lit in lits:
            v = abs(lit)
            if v == 0:
                raise ValueError("0 is not a valid literal")
            if v > self.nvars:
                self.nvars = v
        seen = set(lits)
        if any(-lit in seen for lit in seen):
            return  # tautology
        self.clauses.append(sorted(seen, key=abs))

    def to_dimacs(self) -> str:
        lines = [f"p cnf {self.nvars} {len(self.clauses)}"]
        for cl in self.clauses:
            lines.append(" ".join(str(x) for x in cl) + " 0")
        return "\n".join(lines) + "\n"


def _luby(i: int) -> int:
    """i-th element (1-based) of the Luby restart sequence 1,1,2,1,1,2,4,..."""
    while True:
        k = i.bit_length()
        if i == (1 << k) - 1:
            return 1 << (k - 1)
        i -= (1 << (k - 1)) - 1


def _lit(signed: int) -> int:
    v = abs(signed)
    return 2 * v if signed > 0 else 2 * v + 1


class Solver:
    """One-shot CDCL solver for a fixed formula.

    Internal literals are 2v (positive) / 2v+1 (negative). Binary clauses
    never enter the watched-clause store: ``binaries[lit]`` lists the
    literals implied when ``lit`` becomes true. Reason codes: -1 for
    decisions/units, (-2 - other_lit) for binary implications, clause index
    otherwise.
    """

    def __init__(self, cnf: CNF):
        self.nvars = cnf.nvars
        n = cnf.nvars + 1
        self.assign: list[int] = [_UNASSIGNED] * n
        self.level: list[int] = [0] * n
        self.reason: list[int] = [-1] * n
        self.activity: list[float] = [0.0] * n
        self.saved_phase: list[int] = [0] * n
        self.trail: list[int] = []
        self.trail_lim: list[int] = []
        self.clauses: list[list[int]] = []
        self.learned_from: int = 0
        self.clause_lbd: dict[int, int] = {}
        self.binaries: list[list[int]] = [[] for _ in range(2 * n)]
        self.watches: list[list[tuple[int, int]]] = [[] for _ in range(2 * n)]
        self.prop_head = 0
        self.var_inc = 1.0
        self.var_decay = 0.95
        self.ok = True
        self.conflicts = 0
        self.heap: list[tuple[float, int]] = []
        self._binreason: list[int] = [0, 0]  # scratch clause for analysis

        units: list[int] = []
        for cl in cnf.clauses:
            lits = [_lit(x) for x in cl]
            if len(lits) == 1:
                units.append(lits[0])
            elif len(lits) == 2:
                self.binaries[lits[0] ^ 1].append(lits[1])
                self.binaries[lits[1] ^ 1].append(lits[0])
            else:
                self._attach(lits)
        self.learned_from = len(self.clauses)
        for v in range(1, n):
            heappush(self.heap, (0.0, v))
        for u in units:
            if not self._enqueue(u, -1):
                self.ok = False
                return
        if self._propagate() is not None:
            self.ok = False

    # -- plumbing ---------------------------------------------------------

    def _attach(self, lits: list[int]) -> int:
        idx = len(self.clauses)
        self.clauses.append(lits)
        self.watches[lits[0] ^ 1].append((idx, lits[1]))
        self.watches[lits[1] ^ 1].append((idx, lits[0]))
        return idx

    def _enqueue(self, lit: int, reason: int) -> bool:
        v = lit >> 1
        val = 1 - (lit & 1)
        if self.assign[v] != _UNASSIGNED:
            return self.assign[v] == val
        self.assign[v] = val
        self.level[v] = len(self.trail_lim)
        self.reason[v] = reason
        self.trail.append(lit)
        return True

    def _propagate(self) -> list[int] | None:
        """Exhaust unit propagation; returns a conflicting clause or None."""
        clauses = self.clauses
        watches = self.watches
        binaries = self.binaries
        assign = self.assign
        level = self.level
        reason = self.reason
        trail = self.trail
        while self.prop_head < len(trail):
            lit = trail[self.prop_head]
            self.prop_head += 1
            falsified = lit ^ 1
            # binary implications first: cheap and conflict-rich
            for implied in binaries[lit]:
                v = implied >> 1
                a = assign[v]
                if a == _UNASSIGNED:
                    assign[v] = 1 - (implied & 1)
                    level[v] = len(self.trail_lim)
                    reason[v] = -2 - falsified
                    trail.append(implied)
                elif a != 1 - (implied & 1):
                    return [implied, falsified]
            wl = watches[lit]
            kept = 0
            i = 0
            n_w = len(wl)
            while i < n_w:
                ci, blocker = wl[i]
                i += 1
                ab = assign[blocker >> 1]
                if ab != _UNASSIGNED and (ab ^ (blocker & 1)) == 1:
                    wl[kept] = (ci, blocker)
                    kept += 1
                    continue
                cl = clauses[ci]
                if cl[0] == falsified:
                    cl[0], cl[1] = cl[1], cl[0]
                first = cl[0]
                af = assign[first >> 1]
                if af != _UNASSIGNED and (af ^ (first & 1)) == 1:
                    wl[kept] = (ci, first)
                    kept += 1
                    continue
                moved = False
                for k in range(2, len(cl)):
                    lk = cl[k]
                    ak = assign[lk >> 1]
                    if ak == _UNASSIGNED or (ak ^ (lk & 1)) == 1:
                        cl[1], cl[k] = lk, cl[1]
                        watches[lk ^ 1].append((ci, first))
                        moved = True
                        break
                if moved:
                    continue
                wl[kept] = (ci, blocker)
                kept += 1
                if af == _UNASSIGNED:
                    v = first >> 1
                    assign[v] = 1 - (first & 1)
                    level[v] = len(self.trail_lim)
                    reason[v] = ci
                    trail.append(first)
                else:  # conflict
                    while i < n_w:
                        wl[kept] = wl[i]
                        kept += 1
                        i += 1
                    del wl[kept:]
                    return cl
            del wl[kept:]
        return None

    def _reason_lits(self, v: int) -> list[int]:
        r = self.reason[v]
        if r <= -2:
            other = -2 - r
            lit = 2 * v + (1 - self.assign[v])
            self._binreason[0] = lit
            self._binreason[1] = other
            return self._binreason
        return self.clauses[r]

    # -- search -----------------------------------------------------------

    def _bump(self, v: int) -> None:
        act = self.activity[v] + self.var_inc
        self.activity[v] = act
        heappush(self.heap, (-act, v))
        if act > 1e100:
            for u in range(1, self.nvars + 1):
                self.activity[u] *= 1e-100
            self.var_inc *= 1e-100
            self.heap = [(-self.activity[u], u) for u in range(1, self.nvars + 1)]

    def _analyze(self, confl: list[int]) -> tuple[list[int], int, int]:
        learned = [0]
        seen = [False] * (self.nvars + 1)
        counter = 0
        p = -1
        idx = len(self.trail) - 1
        cur_level = len(self.trail_lim)
        confl_lits = confl
        while True:
            start = 0 if p == -1 else 1
            for q in confl_lits[start:]:
                v = q >> 1
                if not seen[v] and self.level[v] > 0:
                    seen[v] = True
                    self._bump(v)
                    if self.level[v] >= cur_level:
                        counter += 1
                    else:
                        learned.append(q)
            while True:
                p = self.trail[idx]
                idx -= 1
                if seen[p >> 1]:
                    break
            counter -= 1
            seen[p >> 1] = False
            if counter == 0:
                break
            confl_lits = self._reason_lits(p >> 1)
            if confl_lits[0] != p:
                k = confl_lits.index(p)
                confl_lits[0], confl_lits[k] = confl_lits[k], confl_lits[0]
        learned[0] = p ^ 1
        lbd = len({self.level[q >> 1] for q in learned})
        if len(learned) == 1:
            return learned, 0, lbd
        back = max(self.level[q >> 1] for q in learned[1:])
        k = max(range(1, len(learned)), key=lambda t: self.level[learned[t] >> 1])
        learned[1], learned[k] = learned[k], learned[1]
        return learned, back, lbd

    def _backtrack(self, lvl: int) -> None:
        limit = self.trail_lim[lvl]
        for lit in reversed(self.trail[limit:]):
            v = lit >> 1
            self.saved_phase[v] = self.assign[v]
            self.assign[v] = _UNASSIGNED
            heappush(self.heap, (-self.activity[v], v))
        del self.trail[limit:]
        del self.trail_lim[lvl:]
        self.prop_head = len(self.trail)

    def _decide(self) -> int:
        while self.heap:
            act, v = heappop(self.heap)
            if self.assign[v] == _UNASSIGNED and -act == self.activity[v]:
                return 2 * v + (1 - self.saved_phase[v])
        for v in range(1, self.nvars + 1):
            if self.assign[v] == _UNASSIGNED:
                return 2 * v + (1 - self.saved_phase[v])
        return 0

    def _reduce_db(self) -> None:
        """Drop the less useful half of the learned clauses."""
        locked = set()
        for lit in self.trail:
            r = self.reason[lit >> 1]
            if r >= 0:
                locked.add(r)
        cand = [
            ci for ci in range(self.learned_from, len(self.clauses))
            if ci not in locked and self.clause_lbd.get(ci, 9) > 3
        ]
        cand.sort(key=lambda ci: (-self.clause_lbd.get(ci, 9), -len(self.clauses[ci])))
        drop = set(cand[: len(cand) // 2])
        if not drop:
            return
        remap: dict[int, int] = {}
        new_clauses: list[list[int]] = []
        for ci, cl in enumerate(self.clauses):
            if ci in drop:
                continue
            remap[ci] = len(new_clauses)
            new_clauses.append(cl)
        self.clauses = new_clauses
        self.clause_lbd = {
            remap[ci]: lbd for ci, lbd in self.clause_lbd.items() if ci in remap
        }
        for v in range(1, self.nvars + 1):
            r = self.reason[v]
            if r >= 0:
                self.reason[v] = remap.get(r, -1)
        self.watches = [[] for _ in range(2 * (self.nvars + 1))]
        for ci, cl in enumerate(self.clauses):
            self.watches[cl[0] ^ 1].append((ci, cl[1]))
            self.watches[cl[1] ^ 1].append((ci, cl[0]))

    def solve(self) -> list[int] | None:
        """Return a model as bits indexed by variable (index 0 unused)."""
        if not self.ok:
            return None
        restart_round = 1
        limit = 100 * _luby(restart_round)
        conflicts_here = 0
        max_learned = 2000 + len(self.clauses) // 3
        while True:
            confl = self._propagate()
            if confl is not None:
                self.conflicts += 1
                conflicts_here += 1
                if not self.trail_lim:
                    return None
                learned, back, lbd = self._analyze(confl)
                self._backtrack(back)
                if len(learned) == 1:
                    if not self._enqueue(learned[0], -1):
                        return None
                elif len(learned) == 2:
                    self.binaries[learned[0] ^ 1].append(learned[1])
                    self.binaries[learned[1] ^ 1].append(learned[0])
                    self._enqueue(learned[0], -2 - (learned[1] ^ 1))
                else:
                    ci = self._attach(learned)
                    self.clause_lbd[ci] = lbd
                    self._enqueue(learned[0], ci)
                self.var_inc /= self.var_decay
                continue
            if len(self.clauses) - self.learned_from > max_learned:
                self._reduce_db()
                max_learned = int(max_learned * 1.3)
            if conflicts_here >= limit:
                conflicts_here = 0
                restart_round += 1
                limit = 100 * _luby(restart_round)
                if self.trail_lim:
                    self._backtrack(0)
                continue
            lit = self._decide()
            if lit == 0:
                model = [0] * (self.nvars + 1)
                for v in range(1, self.nvars + 1):
                    model[v] = self.assign[v] if self.assign[v] != _UNASSIGNED else 0
                return model
            self.trail_lim.append(len(self.trail))
            self._enqueue(lit, -1)


def solve(cnf: CNF) -> list[int] | None:
    """Solve a formula; returns per-variable bits (1-indexed) or None."""
    return Solver(cnf).solve()
