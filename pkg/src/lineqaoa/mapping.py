"""SAT-based initial mapping of graph nodes onto a line of qubits.

A brick-pattern swap network alternates full layers of SWAP gates on the
even pairs (0,1),(2,3),... and the odd pairs (1,2),(3,4),... of a line.
A graph can be executed with L layers iff there is a node-to-position
assignment under which every edge's endpoints become line-adjacent at some
time t <= L. Feasibility for fixed L is encoded as CNF and decided by the
complete solver in :mod:`lineqaoa.satsolver`; a binary search over L finds
the minimum, since feasibility is monotone in L (the time-t adjacency sets
only grow).
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .graphs import Graph
from .satsolver import CNF, solve

__all__ = [
    "BrickSchedule",
    "MappingSolution",
    "brick_permutations",
    "adjacent_pairs_through",
    "encode_feasibility",
    "solve_min_layers",
]


@dataclass(frozen=True)
class BrickSchedule:
    """Permutations P_0..P_L of line positions under t brick swap layers.

    ``permutations[t][q]`` is where the content initially at position q sits
    after t layers. Layer t acts on even pairs when (t + parity offset) is
    even, odd pairs otherwise.
    """

    n: int
    num_layers: int
    first_parity: str
    permutations: tuple[tuple[int, ...], ...]

    def layer_pairs(self, t: int) -> list[tuple[int, int]]:
        """Position pairs swapped by layer t (0-based)."""
        off = 0 if self.first_parity == "even" else 1
        start = (t + off) % 2
        return [(q, q + 1) for q in range(start, self.n - 1, 2)]


def brick_permutations(n: int, num_layers: int, first_parity: str = "even") -> BrickSchedule:
    if n < 2:
        raise ValueError("line needs at least 2 positions")
    if num_layers < 0:
        raise ValueError("layer count must be nonnegative")
    if first_parity not in ("even", "odd"):
        raise ValueError("first_parity must be 'even' or 'odd'")
    perms = [tuple(range(n))]
    off = 0 if first_parity == "even" else 1
    cur = list(range(n))
    for t in range(num_layers):
        start = (t + off) % 2
        layer = list(range(n))
        for q in range(start, n - 1, 2):
            layer[q], layer[q + 1] = layer[q + 1], layer[q]
        cur = [layer[c] for c in cur]
        perms.append(tuple(cur))
    return BrickSchedule(n, num_layers, first_parity, tuple(perms))


def adjacent_pairs_through(schedule: BrickSchedule, upto: int) -> dict[tuple[int, int], int]:
    """Earliest time t <= upto at which each position pair is line-adjacent.

    Keys are unordered (p, q) with p < q over initial positions.
    """
    first: dict[tuple[int, int], int] = {}
    for t in range(upto + 1):
        perm = schedule.permutations[t]
        where = [0] * schedule.n
        for q0, qt in enumerate(perm):
            where[qt] = q0
        for q in range(schedule.n - 1):
            a, b = where[q], where[q + 1]
            key = (a, b) if a < b else (b, a)
            if key not in first:
                first[key] = t
    return first


def _amo_pairwise(cnf: CNF, lits: list[int]) -> None:
    for i in range(len(lits)):
        for j in range(i + 1, len(lits)):
            cnf.add_clause([-lits[i], -lits[j]])


def _amo_ladder(cnf: CNF, lits: list[int]) -> None:
    """Sequential at-most-one: s_i carries 'some lit <= i is true'."""
    if len(lits) <= 4:
        _amo_pairwise(cnf, lits)
        return
    prev = None
    for i, lit in enumerate(lits):
        s = cnf.new_var()
        cnf.add_clause([-lit, s])
        if prev is not None:
            cnf.add_clause([-prev, s])
            cnf.add_clause([-prev, -lit])
        prev = s


def encode_feasibility(
    graph: Graph,
    num_layers: int,
    first_parity: str = "even",
    pairwise_limit: int = 20,
    break_reflection: bool = True,
) -> tuple[CNF, dict[tuple[int, int], int]]:
    """CNF that is satisfiable iff the graph routes within ``num_layers``.

    Variables x[v,q] = node v sits at initial position q (exactly one
    position per node, at most one node per position). For each edge (u,v)
    and each position q, x[u,q] implies that v sits at one of the positions
    adjacent to q by time ``num_layers``.

    The line's end-for-end reflection maps brick layers onto themselves for
    even n, so an optional symmetry-breaking unit restricts node 0 to the
    lower half of the line.
    """
    n = graph.n
    schedule = brick_permutations(n, num_layers, first_parity)
    first = adjacent_pairs_through(schedule, num_layers)
    neighbors: list[set[int]] = [set() for _ in range(n)]
    for (a, b) in first:
        neighbors[a].add(b)
        neighbors[b].add(a)

    cnf = CNF()
    var = [[0] * n for _ in range(n)]
    for v in range(n):
        for q in range(n):
            var[v][q] = cnf.new_var()
    degs = graph.degrees()
    amo = _amo_pairwise if n <= pairwise_limit else _amo_ladder
    for v in range(n):
        cnf.add_clause([var[v][q] for q in range(n)])
        amo(cnf, [var[v][q] for q in range(n)])
    for q in range(n):
        amo(cnf, [var[v][q] for v in range(n)])
        # redundant at-least-one (implied by counting, propagates much better)
        cnf.add_clause([var[v][q] for v in range(n)])
    # a node needs at least deg(v) distinct adjacency partners at its seat
    for q in range(n):
        cap = len(neighbors[q])
        for v in range(n):
            if degs[v] > cap:
                cnf.add_clause([-var[v][q]])
    for (u, v) in graph.edges:
        for q in range(n):
            cnf.add_clause([-var[u][q]] + [var[v][p] for p in sorted(neighbors[q])])
            cnf.add_clause([-var[v][q]] + [var[u][p] for p in sorted(neighbors[q])])
    if break_reflection and n % 2 == 0:
        for q in range(n // 2, n):
            cnf.add_clause([-var[0][q]])
    return cnf, first


@dataclass
class MappingSolution:
    """Initial node-to-position assignment plus the per-edge schedule.

    ``sigma[v]`` is the line position of node v; ``edge_times`` aligns with
    ``graph.edges`` and gives the earliest layer count after which each
    edge's endpoints are adjacent.
    """

    n: int
    sigma: list[int]
    num_layers: int
    edge_times: list[int]
    first_parity: str = "even"

    def schedule(self) -> BrickSchedule:
        return brick_permutations(self.n, self.num_layers, self.first_parity)

    def validate(self, graph: Graph) -> None:
        if graph.n != self.n or len(self.edge_times) != len(graph.edges):
            raise ValueError("mapping does not match graph")
        if sorted(self.sigma) != list(range(self.n)):
            raise ValueError("sigma is not a bijection")
        sched = self.schedule()
        for (u, v), t in zip(graph.edges, self.edge_times):
            pu = sched.permutations[t][self.sigma[u]]
            pv = sched.permutations[t][self.sigma[v]]
            if abs(pu - pv) != 1:
                raise ValueError(f"edge ({u},{v}) not adjacent at its time {t}")

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "sigma": list(self.sigma),
            "num_layers": self.num_layers,
            "edge_times": list(self.edge_times),
            "first_parity": self.first_parity,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "MappingSolution":
        return cls(
            n=int(doc["n"]),
            sigma=list(doc["sigma"]),
            num_layers=int(doc["num_layers"]),
            edge_times=list(doc["edge_times"]),
            first_parity=doc.get("first_parity", "even"),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), sort_keys=True))

    @classmethod
    def load(cls, path: str | Path) -> "MappingSolution":
        return cls.from_json(json.loads(Path(path).read_text()))


def _model_to_mapping(
    graph: Graph,
    model: list[int],
    num_layers: int,
    first_parity: str,
) -> MappingSolution:
    n = graph.n
    sigma = [-1] * n
    for v in range(n):
        for q in range(n):
            if model[v * n + q + 1]:
                sigma[v] = q
                break
    schedule = brick_permutations(n, num_layers, first_parity)
    first = adjacent_pairs_through(schedule, num_layers)
    times = []
    for (u, v) in graph.edges:
        a, b = sigma[u], sigma[v]
        key = (a, b) if a < b else (b, a)
        times.append(first[key])
    sol = MappingSolution(n, sigma, num_layers, times, first_parity)
    sol.validate(graph)
    return sol


def feasible_at(graph: Graph, num_layers: int, first_parity: str = "even") -> MappingSolution | None:
    cnf, _ = encode_feasibility(graph, num_layers, first_parity)
    model = solve(cnf)
    if model is None:
        return None
    return _model_to_mapping(graph, model, num_layers, first_parity)


def capacity_lower_bound(graph: Graph, first_parity: str = "even") -> int:
    """Smallest L not excluded by partner counting.

    A node of degree d can only sit at a position that becomes adjacent to
    at least d distinct positions within L layers, so the sorted degree
    sequence must fit under the sorted capacity sequence.
    """
    degs = sorted(graph.degrees(), reverse=True)
    n = graph.n
    for L in range(max(n - 2, 0) + 1):
        schedule = brick_permutations(n, L, first_parity)
        first = adjacent_pairs_through(schedule, L)
        cap = [0] * n
        for (a, b) in first:
            cap[a] += 1
            cap[b] += 1
        cap.sort(reverse=True)
        if all(d <= c for d, c in zip(degs, cap)):
            return L
    return max(n - 2, 0)


def solve_min_layers(
    graph: Graph,
    lmax: int | None = None,
    lmin: int | None = None,
    first_parity: str = "even",
) -> MappingSolution:
    """Minimal-layer mapping via binary search over feasibility.

    ``lmax`` defaults to n - 2, which always routes a line of n qubits;
    ``lmin`` defaults to the counting lower bound.
    """
    if lmax is None:
        lmax = max(graph.n - 2, 0)
    if lmin is None:
        lmin = capacity_lower_bound(graph, first_parity)
    top = feasible_at(graph, lmax, first_parity)
    if top is None:
        raise ValueError(f"graph cannot be routed within {lmax} swap layers")
    lo, hi = lmin, lmax
    best = top
    while lo < hi:
        mid = (lo + hi) // 2
        sol = feasible_at(graph, mid, first_parity)
        if sol is None:
            lo = mid + 1
        else:
            best = sol
            hi = mid
    if best.num_layers != lo:
        # re-derive the schedule at the tight layer count
        best = feasible_at(graph, lo, first_parity)
        assert best is not None
    return best
