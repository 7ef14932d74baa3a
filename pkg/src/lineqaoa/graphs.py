"""Random regular graphs, cut energies, and exact MaxCut oracles.

Conventions: nodes are 0..n-1, edges are stored as sorted pairs (u, v) with
u < v. An assignment is a bit vector b of length n; node i carries spin
z_i = (-1)**b[i], and the cost energy of a graph is sum_{(i,j) in E}
w_ij * z_i * z_j. For unit weights the identity energy = |E| - 2*cut holds.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "Graph",
    "CutSolution",
    "generate_rr3",
    "energy_of",
    "cut_value",
    "maxcut_oracle",
    "approximation_ratio",
    "graph_density",
]


@dataclass(frozen=True)
class CutSolution:
    """A bipartition with its cut count and cost energy."""

    assignment: tuple[int, ...]
    cut_value: float
    energy: float
    exact: bool = True


@dataclass
class Graph:
    """Simple undirected graph with optional per-edge weights.

    Once ``solve_maxcut`` has run, the optimum is cached on the instance so
    approximation ratios can be computed repeatedly without re-solving.
    """

    n: int
    edges: list[tuple[int, int]]
    weights: list[float] | None = None
    maxcut: CutSolution | None = field(default=None, compare=False)
    _max_energy: float | None = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"need at least one node, got n={self.n}")
        canon = []
        seen = set()
        for u, v in self.edges:
            if u == v:
                raise ValueError(f"self-loop on node {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValueError(f"edge ({u},{v}) out of range for n={self.n}")
            e = (u, v) if u < v else (v, u)
            if e in seen:
                raise ValueError(f"duplicate edge {e}")
            seen.add(e)
            canon.append(e)
        self.edges = canon
        if self.weights is not None and len(self.weights) != len(canon):
            raise ValueError("weights length must match edge count")

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def weight(self, k: int) -> float:
        return 1.0 if self.weights is None else self.weights[k]

    def weight_array(self) -> np.ndarray:
        if self.weights is None:
            return np.ones(len(self.edges))
        return np.asarray(self.weights, dtype=float)

    def degrees(self) -> list[int]:
        deg = [0] * self.n
        for u, v in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg

    def adjacency(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        return adj

    def is_connected(self) -> bool:
        if self.n == 0:
            return True
        adj = self.adjacency()
        seen = {0}
        stack = [0]
        while stack:
            u = stack.pop()
            for w in adj[u]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == self.n

    def solve_maxcut(self) -> CutSolution:
        """Solve (or look up) the MaxCut optimum and cache it."""
        if self.maxcut is None:
            self.maxcut = maxcut_oracle(self)
        return self.maxcut

    def energy_extremes(self) -> tuple[float, float]:
        """Exact (min, max) of the cost energy over all assignments.

        The minimum is the MaxCut energy. For nonnegative weights the
        maximum is the total weight (uncut partition); with mixed-sign
        weights it is found by minimizing the sign-flipped instance.
        """
        e_min = self.solve_maxcut().energy
        if self._max_energy is None:
            if self.weights is None or all(w >= 0 for w in self.weights):
                self._max_energy = float(self.weight_array().sum())
            else:
                flipped = Graph(self.n, list(self.edges), [-w for w in self.weights])
                self._max_energy = -flipped.solve_maxcut().energy
        return e_min, self._max_energy

    # -- JSON round trip ---------------------------------------------------

    def to_json(self) -> dict:
        doc: dict = {"n": self.n, "edges": [list(e) for e in self.edges]}
        if self.weights is not None:
            doc["weights"] = list(self.weights)
        if self.maxcut is not None:
            doc["maxcut"] = {
                "assignment": list(self.maxcut.assignment),
                "cut_value": self.maxcut.cut_value,
                "energy": self.maxcut.energy,
                "exact": self.maxcut.exact,
            }
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "Graph":
        g = cls(
            n=int(doc["n"]),
            edges=[tuple(e) for e in doc["edges"]],
            weights=list(doc["weights"]) if doc.get("weights") else None,
        )
        if "maxcut" in doc:
            mc = doc["maxcut"]
            g.maxcut = CutSolution(
                assignment=tuple(mc["assignment"]),
                cut_value=mc["cut_value"],
                energy=mc["energy"],
                exact=bool(mc["exact"]),
            )
        return g

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), sort_keys=True, indent=1))

    @classmethod
    def load(cls, path: str | Path) -> "Graph":
        return cls.from_json(json.loads(Path(path).read_text()))


def generate_rr3(n: int, seed: int) -> Graph:
    """Sample a simple random 3-regular graph on ``n`` nodes.

    Uses configuration-model stub pairing with a full restart whenever the
    pairing produces a self-loop or multi-edge, so the draw is deterministic
    given the seed. Disconnected samples are kept.
    """
    if n < 4:
        raise ValueError(f"no simple 3-regular graph on n={n} < 4 nodes")
    if (3 * n) % 2 != 0:
        raise ValueError(f"3-regular graph needs 3n even, got n={n}")
    rng = np.random.default_rng(seed)
    while True:
        stubs = np.repeat(np.arange(n), 3)
        rng.shuffle(stubs)
        pairs = stubs.reshape(-1, 2)
        edges = set()
        ok = True
        for u, v in pairs:
            if u == v:
                ok = False
                break
            e = (int(min(u, v)), int(max(u, v)))
            if e in edges:
                ok = False
                break
            edges.add(e)
        if ok:
            return Graph(n=n, edges=sorted(edges))


def _check_assignment(graph: Graph, assignment: Sequence[int]) -> np.ndarray:
    bits = np.asarray(assignment, dtype=np.int64)
    if bits.shape != (graph.n,):
        raise ValueError(
            f"assignment length {bits.shape} does not match n={graph.n}"
        )
    return bits


def cut_value(graph: Graph, assignment: Sequence[int]) -> float:
    """Total weight of edges crossing the bipartition."""
    bits = _check_assignment(graph, assignment)
    total = 0.0
    for k, (u, v) in enumerate(graph.edges):
        if bits[u] != bits[v]:
            total += graph.weight(k)
    return total


def energy_of(graph: Graph, assignment: Sequence[int]) -> float:
    """Cost energy sum_{(i,j)} w_ij * z_i * z_j with z = (-1)**bit."""
    bits = _check_assignment(graph, assignment)
    z = 1.0 - 2.0 * bits
    u = np.fromiter((e[0] for e in graph.edges), dtype=np.int64, count=len(graph.edges))
    v = np.fromiter((e[1] for e in graph.edges), dtype=np.int64, count=len(graph.edges))
    return float(np.dot(graph.weight_array(), z[u] * z[v]))


def energies_of_bitstrings(graph: Graph, bits_matrix: np.ndarray) -> np.ndarray:
    """Vectorized ``energy_of`` over rows of a (m, n) bit matrix."""
    z = 1.0 - 2.0 * np.asarray(bits_matrix, dtype=float)
    u = [e[0] for e in graph.edges]
    v = [e[1] for e in graph.edges]
    return (z[:, u] * z[:, v]) @ graph.weight_array()


_EXHAUSTIVE_LIMIT = 28


def _exhaustive_maxcut(graph: Graph) -> CutSolution:
    # Gray-code walk: flip one bit per step and update the energy
    # incrementally from the flipped node's incident edges.
    n = graph.n
    adj_w: list[list[tuple[int, float]]] = [[] for _ in range(n)]
    for k, (u, v) in enumerate(graph.edges):
        w = graph.weight(k)
        adj_w[u].append((v, w))
        adj_w[v].append((u, w))
    z = np.ones(n)
    energy = float(graph.weight_array().sum())
    best_energy = energy
    best = np.zeros(n, dtype=np.int64)
    bits = np.zeros(n, dtype=np.int64)
    for i in range(1, 1 << n):
        flip = (i & -i).bit_length() - 1
        # energy change: edges at `flip` swap sign
        delta = 0.0
        for v, w in adj_w[flip]:
            delta += w * z[flip] * z[v]
        z[flip] = -z[flip]
        bits[flip] ^= 1
        energy -= 2.0 * delta
        if energy < best_energy:
            best_energy = energy
            best = bits.copy()
    total_w = float(graph.weight_array().sum())
    cut = (total_w - best_energy) / 2.0
    return CutSolution(
        assignment=tuple(int(b) for b in best),
        cut_value=cut,
        energy=best_energy,
        exact=True,
    )


def _local_search_maxcut(graph: Graph, restarts: int = 32, seed: int = 0) -> CutSolution:
    rng = np.random.default_rng(seed)
    n = graph.n
    adj_w: list[list[tuple[int, float]]] = [[] for _ in range(n)]
    for k, (u, v) in enumerate(graph.edges):
        w = graph.weight(k)
        adj_w[u].append((v, w))
        adj_w[v].append((u, w))
    best_energy = np.inf
    best = None
    for _ in range(restarts):
        bits = rng.integers(0, 2, size=n)
        z = 1.0 - 2.0 * bits
        improved = True
        while improved:
            improved = False
            for i in range(n):
                gain = sum(w * z[i] * z[j] for j, w in adj_w[i])
                if gain > 0:  # flipping i lowers the energy by 2*gain
                    z[i] = -z[i]
                    bits[i] ^= 1
                    improved = True
        energy = energy_of(graph, bits)
        if energy < best_energy:
            best_energy = energy
            best = bits.copy()
    total_w = float(graph.weight_array().sum())
    cut = (total_w - best_energy) / 2.0
    return CutSolution(
        assignment=tuple(int(b) for b in best),
        cut_value=cut,
        energy=float(best_energy),
        exact=False,
    )


def maxcut_oracle(graph: Graph) -> CutSolution:
    """Exact MaxCut by exhaustive search up to 28 nodes, best-found above."""
    if graph.n <= _EXHAUSTIVE_LIMIT:
        return _exhaustive_maxcut(graph)
    return _local_search_maxcut(graph)


def approximation_ratio(graph: Graph, mu: float) -> float:
    """Place the energy ``mu`` between the exact extremes of the landscape.

    Returns (mu - E_max) / (E_min - E_max), which is 1 at the optimum and 0
    at the anti-optimum.
    """
    e_min, e_max = graph.energy_extremes()
    if e_min == e_max:
        raise ValueError("constant energy landscape, ratio undefined")
    return (mu - e_max) / (e_min - e_max)


def graph_density(graph: Graph) -> float:
    """|E| divided by the number of node pairs."""
    if graph.n < 2:
        raise ValueError("density needs n >= 2")
    return graph.num_edges / (graph.n * (graph.n - 1) / 2)
