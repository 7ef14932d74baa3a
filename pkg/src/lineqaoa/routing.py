"""Depth-p QAOA construction on a line of qubits via brick swap networks.

Each cost layer walks the swap network, executing every edge's two-qubit
phase block at the first time its endpoints are line-adjacent. Odd cost
layers ascend through the network; even layers run it in reverse so the
wire permutation keeps composing instead of being rebuilt from scratch.
An edge whose wire pair is swapped by the immediately following brick
layer is merged with that SWAP into a single three-CNOT block.

All two-qubit gates are emitted as CX so that per-gate noise accounting
and gate-count identities are exact:

    two-qubit gates = 3 * swaps + 2 * p * |E| - 2 * merges
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .circuits import Circuit, Gate, Symbol, barrier_rz, decompose_rzz, expand_swap, merge_rzz_swap
from .graphs import Graph
from .mapping import MappingSolution

__all__ = ["RoutedQaoa", "route", "training_variant", "naive_qaoa_circuit"]


@dataclass
class RoutedQaoa:
    """A routed depth-p QAOA template with symbolic (gamma, beta) slots."""

    graph: Graph
    mapping: MappingSolution
    p: int
    circuit: Circuit
    logical_map: list[int]  # node -> measured bit index
    swap_count: int
    merged_count: int
    initial_h_ops: int = field(default=0)

    @property
    def n(self) -> int:
        return self.graph.n

    def bind(self, gammas: Sequence[float], betas: Sequence[float]) -> Circuit:
        if len(gammas) != self.p or len(betas) != self.p:
            raise ValueError(f"need {self.p} gamma and beta values")
        return self.circuit.bind(gammas, betas)

    def two_qubit_count(self) -> int:
        return self.circuit.two_qubit_count()


def route(graph: Graph, mapping: MappingSolution, p: int, reverse_even: bool = True) -> RoutedQaoa:
    """Build the routed circuit for ``graph`` under ``mapping`` at depth p."""
    if p < 1:
        raise ValueError("depth must be at least 1")
    mapping.validate(graph)
    n = graph.n
    schedule = mapping.schedule()
    pos = list(mapping.sigma)  # node -> wire
    perm = list(range(n))  # initial wire -> current wire
    ops: list[Gate] = [Gate("H", (w,)) for w in range(n)]
    swaps = 0
    merges = 0

    by_time: dict[int, list[int]] = {}
    for idx, t in enumerate(mapping.edge_times):
        by_time.setdefault(t, []).append(idx)
    if by_time:
        t_min, t_max = min(by_time), max(by_time)
    else:
        t_min = t_max = 0
    cur = 0

    def emit_edges(edge_idxs: list[int], k: int, next_pairs: set[tuple[int, int]]) -> None:
        nonlocal merges
        blocks = []
        for idx in edge_idxs:
            u, v = graph.edges[idx]
            a, b = pos[u], pos[v]
            if a > b:
                a, b = b, a
            blocks.append((a, b, idx))
        # plain phase blocks first: a merged block moves wire contents, so it
        # must come after every other edge scheduled at this time
        for a, b, idx in sorted(blocks):
            if (a, b) not in next_pairs:
                theta = Symbol("gamma", k - 1, scale=graph.weight(idx))
                ops.extend(decompose_rzz(theta, a, b))
        for a, b, idx in sorted(blocks):
            if (a, b) in next_pairs:
                theta = Symbol("gamma", k - 1, scale=graph.weight(idx))
                ops.extend(merge_rzz_swap(theta, a, b))
                next_pairs.remove((a, b))
                _swap_tracking(a, b)
                merges += 1

    def _swap_tracking(a: int, b: int) -> None:
        nonlocal swaps
        swaps += 1
        for v in range(n):
            if pos[v] == a:
                pos[v] = b
            elif pos[v] == b:
                pos[v] = a
        for w in range(n):
            if perm[w] == a:
                perm[w] = b
            elif perm[w] == b:
                perm[w] = a

    def emit_layer(pairs: set[tuple[int, int]]) -> None:
        for a, b in sorted(pairs):
            ops.extend(expand_swap(a, b))
            _swap_tracking(a, b)

    for k in range(1, p + 1):
        forward = (k % 2 == 1) or not reverse_even
        if forward:
            targets = [t for t in range(cur, t_max + 1) if t in by_time]
            step = +1
        else:
            targets = [t for t in range(cur, t_min - 1, -1) if t in by_time]
            step = -1
        remaining = set(targets)
        while True:
            if cur in remaining:
                remaining.discard(cur)
                if remaining:
                    layer_idx = cur if step > 0 else cur - 1
                    next_pairs = set(schedule.layer_pairs(layer_idx))
                    emit_edges(by_time[cur], k, next_pairs)
                    emit_layer(next_pairs)
                    cur += step
                else:
                    emit_edges(by_time[cur], k, set())
                    break
            else:
                if not remaining:
                    break
                layer_idx = cur if step > 0 else cur - 1
                next_pairs = set(schedule.layer_pairs(layer_idx))
                emit_layer(next_pairs)
                cur += step
        for w in range(n):
            ops.append(Gate("RX", (w,), Symbol("beta", k - 1, scale=2.0)))

    circuit = Circuit(n, ops, final_permutation=perm)
    logical_map = [perm[mapping.sigma[v]] for v in range(n)]
    routed = RoutedQaoa(
        graph=graph,
        mapping=mapping,
        p=p,
        circuit=circuit,
        logical_map=logical_map,
        swap_count=swaps,
        merged_count=merges,
        initial_h_ops=n,
    )
    expect = 3 * swaps + 2 * p * graph.num_edges - 2 * merges
    got = circuit.two_qubit_count()
    if got != expect:
        raise AssertionError(f"gate-count identity violated: {got} != {expect}")
    return routed


def training_variant(routed: RoutedQaoa, initial_bits: Sequence[int], betas: Sequence[float]) -> Circuit:
    """Clifford-reducible twin of the routed circuit for training rows.

    The initial superposition layer becomes X gates on the wires whose node
    carries bit 1, every cost-layer RZ becomes a barrier (gamma frozen at
    zero without touching any CX), and the mixer angles are bound to
    ``betas``. The two-qubit structure is exactly that of the routed
    circuit, so the noise footprint matches.
    """
    n = routed.n
    if len(initial_bits) != n:
        raise ValueError(f"need {n} initial bits")
    if len(betas) != routed.p:
        raise ValueError(f"need {routed.p} beta values")
    head: list[Gate] = []
    for v in range(n):
        if initial_bits[v]:
            head.append(Gate("X", (routed.mapping.sigma[v],)))
    tail = routed.circuit.ops[routed.initial_h_ops:]
    body = Circuit(n, list(tail) if not head else head + list(tail),
                   list(routed.circuit.final_permutation))
    return barrier_rz(body).bind([0.0] * routed.p, list(betas))


def naive_qaoa_circuit(graph: Graph, p: int, gammas: Sequence[float], betas: Sequence[float]) -> Circuit:
    """Unrouted reference ansatz: H layer, per-edge RZZ blocks, RX mixers."""
    ops: list[Gate] = [Gate("H", (q,)) for q in range(graph.n)]
    for k in range(p):
        for idx, (u, v) in enumerate(graph.edges):
            ops.append(Gate("RZZ", (u, v), 2.0 * gammas[k] * graph.weight(idx)))
        for q in range(graph.n):
            ops.append(Gate("RX", (q,), 2.0 * betas[k]))
    return Circuit(graph.n, ops)
