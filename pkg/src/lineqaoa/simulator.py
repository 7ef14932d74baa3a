"""Noiseless and noisy circuit simulation with shot sampling.

Noise model: thermal relaxation at zero temperature. Each noisy two-qubit
gate applies, to both of its operands, amplitude decay by exp(-t/T1)
toward |0> and coherence decay by exp(-t/T2) for the gate's duration t;
every other instruction is noiseless.

Backends (chosen automatically):

* noiseless      dense statevector, up to 26 qubits
* noisy, n <= 12 exact density matrix (fused-superoperator engine)
* noisy, n <= 20 stochastic Kraus unraveling, one trajectory per shot

Bit order: index 0 of a bitstring is its leftmost character everywhere.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .circuits import Circuit, Gate, gate_matrix
from ._kernels import apply_pair_superop, apply_single_superop, rest_offsets, sparsify16

__all__ = [
    "NoiseModel",
    "ShotResult",
    "ObservableVector",
    "sample_noise_model",
    "relaxation_kraus",
    "relaxation_factors",
    "apply_thermal_relaxation",
    "simulate",
    "exact_probabilities",
    "exact_observables",
    "observables_from_counts",
    "STATEVECTOR_LIMIT",
    "DENSITY_LIMIT",
    "TRAJECTORY_LIMIT",
]

STATEVECTOR_LIMIT = 26
DENSITY_LIMIT = 12
TRAJECTORY_LIMIT = 20


# ---------------------------------------------------------------------------
# noise model
# ---------------------------------------------------------------------------


@dataclass
class NoiseModel:
    """Per-qubit T1/T2 (microseconds) plus per-gate durations (nanoseconds)."""

    t1: np.ndarray
    t2: np.ndarray
    gate_durations_ns: dict[str, float]
    noisy_kinds: frozenset[str] = frozenset({"CX", "ECR"})

    def __post_init__(self) -> None:
        self.t1 = np.asarray(self.t1, dtype=float)
        self.t2 = np.asarray(self.t2, dtype=float)
        if self.t1.shape != self.t2.shape:
            raise ValueError("t1/t2 length mismatch")
        if np.any(self.t1 <= 0) or np.any(self.t2 <= 0):
            raise ValueError("relaxation times must be positive")
        if np.any(self.t2 > 2 * self.t1 + 1e-12):
            raise ValueError("T2 <= 2*T1 violated")
        if any(d < 0 for d in self.gate_durations_ns.values()):
            raise ValueError("durations must be nonnegative")
        self.noisy_kinds = frozenset(self.noisy_kinds)

    @property
    def num_qubits(self) -> int:
        return len(self.t1)

    def duration_of(self, kind: str) -> float:
        return self.gate_durations_ns.get(kind, 0.0)

    def to_json(self) -> dict:
        return {
            "t1_us": self.t1.tolist(),
            "t2_us": self.t2.tolist(),
            "gate_durations_ns": dict(self.gate_durations_ns),
            "noisy_kinds": sorted(self.noisy_kinds),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "NoiseModel":
        return cls(
            t1=np.asarray(doc["t1_us"], dtype=float),
            t2=np.asarray(doc["t2_us"], dtype=float),
            gate_durations_ns={k: float(v) for k, v in doc["gate_durations_ns"].items()},
            noisy_kinds=frozenset(doc.get("noisy_kinds", ["CX", "ECR"])),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), sort_keys=True))

    @classmethod
    def load(cls, path: str | Path) -> "NoiseModel":
        return cls.from_json(json.loads(Path(path).read_text()))


def sample_noise_model(
    n: int,
    seed: int,
    mean_us: float = 10.0,
    std_us: float = 0.010,
    two_qubit_ns: float = 300.0,
) -> NoiseModel:
    """Draw per-qubit T1, T2 from a Gaussian (10 us mean, 10 ns std default).

    T2 draws are clipped to the physical bound 2*T1; both are floored well
    above zero (the default spread makes clipping astronomically rare).
    """
    if n < 1:
        raise ValueError("need at least one qubit")
    rng = np.random.default_rng(seed)
    t1 = rng.normal(mean_us, std_us, size=n)
    t2 = rng.normal(mean_us, std_us, size=n)
    floor = 1e-3 * mean_us
    t1 = np.maximum(t1, floor)
    t2 = np.minimum(np.maximum(t2, floor), 2 * t1)
    return NoiseModel(
        t1=t1,
        t2=t2,
        gate_durations_ns={"CX": two_qubit_ns, "ECR": two_qubit_ns},
    )


def relaxation_factors(t1_us: float, t2_us: float, t_ns: float) -> tuple[float, float]:
    """(population factor e^{-t/T1}, coherence factor e^{-t/T2})."""
    if t_ns < 0:
        raise ValueError("duration must be nonnegative")
    if t2_us > 2 * t1_us + 1e-12:
        raise ValueError("T2 <= 2*T1 required")
    t_us = t_ns * 1e-3
    return math.exp(-t_us / t1_us), math.exp(-t_us / t2_us)


def relaxation_kraus(t1_us: float, t2_us: float, t_ns: float) -> list[np.ndarray]:
    """Kraus operators: amplitude damping composed with pure dephasing."""
    g1, g2 = relaxation_factors(t1_us, t2_us, t_ns)
    p_reset = 1.0 - g1
    # residual coherence after amplitude damping is sqrt(g1); pure dephasing
    # supplies the rest of the T2 factor
    ratio = min(g2 / math.sqrt(g1), 1.0)
    p_z = 0.5 * (1.0 - ratio)
    ad = [
        np.array([[1.0, 0.0], [0.0, math.sqrt(1.0 - p_reset)]], dtype=complex),
        np.array([[0.0, math.sqrt(p_reset)], [0.0, 0.0]], dtype=complex),
    ]
    pd = [
        math.sqrt(1.0 - p_z) * np.eye(2, dtype=complex),
        math.sqrt(p_z) * np.diag([1.0, -1.0]).astype(complex),
    ]
    out = []
    for d in pd:
        for k in ad:
            op = d @ k
            if np.any(np.abs(op) > 1e-15):
                out.append(op)
    return out


def relaxation_superop(t1_us: float, t2_us: float, t_ns: float) -> np.ndarray:
    """4x4 action on the (ket, bra) digit basis |0><0|,|0><1|,|1><0|,|1><1|."""
    g1, g2 = relaxation_factors(t1_us, t2_us, t_ns)
    return np.array(
        [
            [1.0, 0.0, 0.0, 1.0 - g1],
            [0.0, g2, 0.0, 0.0],
            [0.0, 0.0, g2, 0.0],
            [0.0, 0.0, 0.0, g1],
        ],
        dtype=complex,
    )


def apply_thermal_relaxation(
    rho: np.ndarray, qubit: int, t1_us: float, t2_us: float, t_ns: float
) -> np.ndarray:
    """Apply the relaxation channel to one qubit of a dense density matrix."""
    dim = rho.shape[0]
    n = dim.bit_length() - 1
    out = np.zeros_like(rho)
    for k in relaxation_kraus(t1_us, t2_us, t_ns):
        full = _embed_on(k, qubit, n)
        out += full @ rho @ full.conj().T
    return out


def _embed_on(m: np.ndarray, qubit: int, n: int) -> np.ndarray:
    left = np.eye(2**qubit, dtype=complex)
    right = np.eye(2 ** (n - qubit - 1), dtype=complex)
    return np.kron(np.kron(left, m), right)


# ---------------------------------------------------------------------------
# results and observables
# ---------------------------------------------------------------------------


@dataclass
class ShotResult:
    counts: dict[str, int]
    shots: int
    logical_map: list[int] | None = None

    def __post_init__(self) -> None:
        if sum(self.counts.values()) != self.shots:
            raise ValueError("counts do not sum to shot total")

    def bit_matrix(self) -> tuple[np.ndarray, np.ndarray]:
        """(unique bitstring rows, weights); rows relabeled to node order."""
        keys = sorted(self.counts)
        rows = np.array([[int(c) for c in k] for k in keys], dtype=np.int8)
        w = np.array([self.counts[k] for k in keys], dtype=float)
        if self.logical_map is not None:
            rows = rows[:, self.logical_map]
        return rows, w

    def to_json(self) -> dict:
        return {
            "counts": dict(sorted(self.counts.items())),
            "shots": self.shots,
            "logical_map": self.logical_map,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "ShotResult":
        return cls(dict(doc["counts"]), int(doc["shots"]), doc.get("logical_map"))


@dataclass
class ObservableVector:
    """All <Z_i> and <Z_i Z_j> (i < j, lexicographic), in node order."""

    singles: np.ndarray
    pairs: np.ndarray

    def __post_init__(self) -> None:
        self.singles = np.asarray(self.singles, dtype=float)
        self.pairs = np.asarray(self.pairs, dtype=float)
        n = len(self.singles)
        if len(self.pairs) != n * (n - 1) // 2:
            raise ValueError("pair vector length mismatch")

    @property
    def n(self) -> int:
        return len(self.singles)

    @staticmethod
    def pair_slot(n: int, i: int, j: int) -> int:
        if not (0 <= i < j < n):
            raise ValueError("need 0 <= i < j < n")
        return i * (2 * n - i - 1) // 2 + (j - i - 1)

    def correlator(self, i: int, j: int) -> float:
        return float(self.pairs[self.pair_slot(self.n, i, j)])

    def vector(self) -> np.ndarray:
        return np.concatenate([self.singles, self.pairs])

    def edge_correlators(self, edges: Sequence[tuple[int, int]]) -> np.ndarray:
        return np.array([self.correlator(u, v) for u, v in edges])


def _observables_from_rows(rows: np.ndarray, weights: np.ndarray) -> ObservableVector:
    total = weights.sum()
    z = 1.0 - 2.0 * rows.astype(float)
    singles = (weights @ z) / total
    second = (z.T * weights) @ z / total
    n = rows.shape[1]
    iu = np.triu_indices(n, k=1)
    return ObservableVector(singles=singles, pairs=second[iu])


def observables_from_counts(result: ShotResult) -> ObservableVector:
    if result.shots < 1:
        raise ValueError("need at least one shot")
    rows, w = result.bit_matrix()
    return _observables_from_rows(rows, w)


def _observables_from_probs(probs: np.ndarray, n: int, logical_map: list[int] | None) -> ObservableVector:
    """Exact singles/pairs from a 2^n probability vector (infinite shots)."""
    t = probs.reshape((2,) * n)
    singles_m = np.empty(n)
    for q in range(n):
        axes = tuple(a for a in range(n) if a != q)
        marg = t.sum(axis=axes)
        singles_m[q] = marg[0] - marg[1]
    pairs_m = np.empty((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            axes = tuple(a for a in range(n) if a not in (i, j))
            marg = t.sum(axis=axes)
            pairs_m[i, j] = marg[0, 0] - marg[0, 1] - marg[1, 0] + marg[1, 1]
    if logical_map is not None:
        inv = logical_map
        singles = np.array([singles_m[inv[v]] for v in range(n)])
        pairs = np.empty(n * (n - 1) // 2)
        for i in range(n):
            for j in range(i + 1, n):
                a, b = inv[i], inv[j]
                if a > b:
                    a, b = b, a
                pairs[ObservableVector.pair_slot(n, i, j)] = pairs_m[a, b]
    else:
        singles = singles_m
        iu = np.triu_indices(n, k=1)
        pairs = pairs_m[iu]
    return ObservableVector(singles=singles, pairs=pairs)


# ---------------------------------------------------------------------------
# statevector backend (noiseless)
# ---------------------------------------------------------------------------


def _sv_apply_gate(psi: np.ndarray, g: Gate, n: int) -> np.ndarray:
    kind = g.kind
    if kind in ("BARRIER", "MEASURE"):
        return psi
    if kind == "RZ":
        view = psi.reshape((2 ** g.qubits[0], 2, -1))
        view[:, 0, :] *= np.exp(-0.5j * g.param)
        view[:, 1, :] *= np.exp(0.5j * g.param)
        return psi
    if kind == "RZZ":
        a, b = g.qubits
        if a > b:
            a, b = b, a
        view = psi.reshape((2 ** a, 2, 2 ** (b - a - 1), 2, -1))
        ph = np.exp(-0.5j * g.param)
        view[:, 0, :, 0, :] *= ph
        view[:, 1, :, 1, :] *= ph
        view[:, 0, :, 1, :] *= ph.conjugate()
        view[:, 1, :, 0, :] *= ph.conjugate()
        return psi
    if kind == "X":
        view = psi.reshape((2 ** g.qubits[0], 2, -1))
        view[:, [0, 1], :] = view[:, [1, 0], :]
        return psi
    if kind == "CX":
        c, t = g.qubits
        psi_t = psi.reshape((2,) * n)
        i0 = [slice(None)] * n
        i0[c], i0[t] = 1, 0
        i1 = [slice(None)] * n
        i1[c], i1[t] = 1, 1
        tmp = psi_t[tuple(i0)].copy()
        psi_t[tuple(i0)] = psi_t[tuple(i1)]
        psi_t[tuple(i1)] = tmp
        return psi
    if kind == "SWAP":
        a, b = g.qubits
        psi_t = psi.reshape((2,) * n)
        i01 = [slice(None)] * n
        i01[a], i01[b] = 0, 1
        i10 = [slice(None)] * n
        i10[a], i10[b] = 1, 0
        tmp = psi_t[tuple(i01)].copy()
        psi_t[tuple(i01)] = psi_t[tuple(i10)]
        psi_t[tuple(i10)] = tmp
        return psi
    # generic dense 1- or 2-qubit unitary
    m = gate_matrix(g)
    qs = g.qubits
    k = len(qs)
    psi_t = psi.reshape((2,) * n)
    mt = m.reshape((2,) * (2 * k))
    moved = np.tensordot(mt, psi_t, axes=(list(range(k, 2 * k)), list(qs)))
    rest = iter(range(k, n))
    order = []
    for axis in range(n):
        if axis in qs:
            order.append(qs.index(axis))
        else:
            order.append(next(rest))
    return np.ascontiguousarray(moved.transpose(order)).reshape(-1)


def _statevector(circuit: Circuit) -> np.ndarray:
    n = circuit.num_qubits
    if n > STATEVECTOR_LIMIT:
        raise ValueError(
            f"{n} qubits exceeds the {STATEVECTOR_LIMIT}-qubit statevector limit"
        )
    psi = np.zeros(2**n, dtype=complex)
    psi[0] = 1.0
    for g in circuit.ops:
        psi = _sv_apply_gate(psi, g, n)
    return psi


# ---------------------------------------------------------------------------
# density-matrix backend (noisy, exact)
# ---------------------------------------------------------------------------

_DIAG_KINDS = frozenset({"X", "CX", "SWAP", "RZ", "BARRIER", "MEASURE"})


_EYE4 = np.eye(4, dtype=complex)


def _kron4(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """np.kron for two 4x4 blocks without its small-array overhead."""
    return (a[:, None, :, None] * b[None, :, None, :]).reshape(16, 16)


def _superop_single(u: np.ndarray) -> np.ndarray:
    return np.kron(u, u.conj())


def _superop_pair(u4: np.ndarray) -> np.ndarray:
    """U (x) U* reordered from (ka kb, ba bb) to paired digits (ea, eb)."""
    t = np.einsum("ABab,CDcd->ACBDacbd", u4.reshape(2, 2, 2, 2), u4.conj().reshape(2, 2, 2, 2))
    return np.ascontiguousarray(t.reshape(16, 16))


class _Block:
    __slots__ = ("qubits", "superop")

    def __init__(self, qubits: tuple[int, ...]):
        self.qubits = qubits
        dim = 4 if len(qubits) == 1 else 16
        self.superop = np.eye(dim, dtype=complex)

    def push_unitary(self, u: np.ndarray, qubits: tuple[int, ...]) -> None:
        if len(self.qubits) == 1:
            self.superop = _superop_single(u) @ self.superop
            return
        a, b = self.qubits
        if len(qubits) == 1:
            s4 = _superop_single(u)
            full = _kron4(s4, _EYE4) if qubits[0] == a else _kron4(_EYE4, s4)
        else:
            if qubits == (a, b):
                u4 = u
            else:  # operands reversed relative to block order
                perm = np.array([0, 2, 1, 3])
                u4 = u[np.ix_(perm, perm)]
            full = _superop_pair(u4)
        self.superop = full @ self.superop

    def push_relax(self, local_q: int, r4: np.ndarray) -> None:
        if len(self.qubits) == 1:
            self.superop = r4 @ self.superop
        elif local_q == 0:
            self.superop = _kron4(r4, _EYE4) @ self.superop
        else:
            self.superop = _kron4(_EYE4, r4) @ self.superop


def _plan_blocks(gates: list[Gate], noise: NoiseModel | None) -> list[_Block]:
    blocks: list[_Block] = []
    open_for: dict[int, int] = {}
    alive: list[bool] = []

    def new_block(qubits: tuple[int, ...]) -> int:
        blocks.append(_Block(qubits))
        alive.append(True)
        return len(blocks) - 1

    for g in gates:
        if g.kind in ("BARRIER", "MEASURE"):
            continue
        qs = g.qubits
        if len(qs) == 1:
            q = qs[0]
            bi = open_for.get(q)
            if bi is None:
                bi = new_block((q,))
                open_for[q] = bi
            blocks[bi].push_unitary(gate_matrix(g), qs)
        else:
            a, b = qs if qs[0] < qs[1] else (qs[1], qs[0])
            bia, bib = open_for.get(qs[0]), open_for.get(qs[1])
            if bia is not None and bia == bib and blocks[bia].qubits == (a, b):
                bi = bia
            else:
                bi = new_block((a, b))
                for q in (a, b):
                    prev = open_for.get(q)
                    if prev is not None and blocks[prev].qubits == (q,):
                        # fold a pending single-qubit block into the pair
                        local = 0 if q == a else 1
                        s4 = blocks[prev].superop
                        full = _kron4(s4, _EYE4) if local == 0 else _kron4(_EYE4, s4)
                        blocks[bi].superop = full @ blocks[bi].superop
                        alive[prev] = False
                    open_for[q] = bi
            blocks[bi].push_unitary(gate_matrix(g), qs)
            if noise is not None and g.kind in noise.noisy_kinds:
                dur = noise.duration_of(g.kind)
                for q in qs:
                    r4 = relaxation_superop(noise.t1[q], noise.t2[q], dur)
                    blocks[bi].push_relax(0 if q == a else 1, r4)
    return [b for b, ok in zip(blocks, alive) if ok]


def _diag_prefix(circuit: Circuit, noise: NoiseModel | None) -> tuple[np.ndarray, int]:
    """Evolve the classical-basis prefix on the 2^n diagonal.

    Returns the diagonal distribution and the index of the first gate that
    leaves the diagonal (len(ops) if the whole circuit is classical).
    """
    n = circuit.num_qubits
    p = np.zeros(2**n)
    p[0] = 1.0
    for gi, g in enumerate(circuit.ops):
        if g.kind not in _DIAG_KINDS:
            return p, gi
        if g.kind in ("RZ", "BARRIER", "MEASURE"):
            continue
        if g.kind == "X":
            view = p.reshape((2 ** g.qubits[0], 2, -1))
            view[:, [0, 1], :] = view[:, [1, 0], :]
        elif g.kind in ("CX", "SWAP"):
            t = p.reshape((2,) * n)
            if g.kind == "CX":
                c, tq = g.qubits
                i0 = [slice(None)] * n
                i0[c] = 1
                i0[tq] = 0
                i1 = [slice(None)] * n
                i1[c] = 1
                i1[tq] = 1
            else:
                a, b = g.qubits
                i0 = [slice(None)] * n
                i0[a], i0[b] = 0, 1
                i1 = [slice(None)] * n
                i1[a], i1[b] = 1, 0
            tmp = t[tuple(i0)].copy()
            t[tuple(i0)] = t[tuple(i1)]
            t[tuple(i1)] = tmp
        if noise is not None and g.kind in noise.noisy_kinds and len(g.qubits) == 2:
            dur = noise.duration_of(g.kind)
            for q in g.qubits:
                g1, _ = relaxation_factors(noise.t1[q], noise.t2[q], dur)
                view = p.reshape((2 ** q, 2, -1))
                excited = view[:, 1, :].copy()
                view[:, 1, :] = g1 * excited
                view[:, 0, :] += (1.0 - g1) * excited
    return p, len(circuit.ops)


class _DensityState:
    def __init__(self, n: int):
        self.n = n
        self.rho = np.zeros(4**n, dtype=complex)
        self.rho[0] = 1.0
        self.buf = np.empty_like(self.rho)
        self._strides = [4 ** (n - 1 - q) for q in range(n)]

    def load_diagonal(self, p: np.ndarray) -> None:
        self.rho[:] = 0.0
        self.rho[_diag_indices(self.n)] = p

    def offsets(self, axes: tuple[int, ...]) -> np.ndarray:
        key = (self.n, axes)
        if key not in _OFFSET_CACHE:
            _OFFSET_CACHE[key] = rest_offsets(self.n, axes)
        return _OFFSET_CACHE[key]

    def apply_block(self, block: _Block) -> None:
        if len(block.qubits) == 1:
            q = block.qubits[0]
            apply_single_superop(
                self.rho, self.buf, self.offsets((q,)), self._strides[q],
                np.ascontiguousarray(block.superop),
            )
        else:
            a, b = block.qubits
            nnz, cols, vals = sparsify16(block.superop, tol=1e-300)
            apply_pair_superop(
                self.rho, self.buf, self.offsets((a, b)),
                self._strides[a], self._strides[b], nnz, cols, vals,
            )
        self.rho, self.buf = self.buf, self.rho

    def probabilities(self) -> np.ndarray:
        p = self.rho[_diag_indices(self.n)].real.copy()
        np.clip(p, 0.0, None, out=p)
        s = p.sum()
        if not 0.5 < s < 1.5:
            raise RuntimeError(f"density matrix trace drifted to {s}")
        return p / s


_OFFSET_CACHE: dict[tuple[int, tuple[int, ...]], np.ndarray] = {}
_DIAG_CACHE: dict[int, np.ndarray] = {}


def _diag_indices(n: int) -> np.ndarray:
    if n not in _DIAG_CACHE:
        bits = np.arange(2**n, dtype=np.int64)
        idx = np.zeros(2**n, dtype=np.int64)
        for q in range(n):
            idx += ((bits >> (n - 1 - q)) & 1) * 3 * 4 ** (n - 1 - q)
        _DIAG_CACHE[n] = idx
    return _DIAG_CACHE[n]


def _density_probabilities(circuit: Circuit, noise: NoiseModel | None) -> np.ndarray:
    n = circuit.num_qubits
    if n > DENSITY_LIMIT:
        raise ValueError(
            f"{n} qubits exceeds the {DENSITY_LIMIT}-qubit density-matrix limit"
        )
    p, start = _diag_prefix(circuit, noise)
    if start == len(circuit.ops):
        return p
    state = _DensityState(n)
    state.load_diagonal(p)
    for block in _plan_blocks(circuit.ops[start:], noise):
        state.apply_block(block)
    return state.probabilities()


# ---------------------------------------------------------------------------
# trajectory backend (noisy, stochastic)
# ---------------------------------------------------------------------------


def _trajectory_counts(
    circuit: Circuit,
    noise: NoiseModel,
    shots: int,
    seed: int,
    max_batch_bytes: int = 1 << 29,
) -> dict[str, int]:
    n = circuit.num_qubits
    if n > TRAJECTORY_LIMIT:
        raise ValueError(
            f"{n} qubits exceeds the {TRAJECTORY_LIMIT}-qubit trajectory limit"
        )
    noisy_ops = [
        g for g in circuit.ops if len(g.qubits) == 2 and g.kind in noise.noisy_kinds
    ]
    events_per_traj = 2 * len(noisy_ops) * 2  # (AD + PD) x both operands
    # per-trajectory substreams keyed by (seed, trajectory index): results do
    # not depend on batching
    uniforms = np.empty((shots, max(events_per_traj, 1)))
    for i in range(shots):
        rng_i = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(i,)))
        uniforms[i] = rng_i.random(max(events_per_traj, 1))

    dim = 2**n
    batch = max(1, min(shots, max_batch_bytes // (16 * dim)))
    counts: dict[str, int] = {}
    done = 0
    while done < shots:
        m = min(batch, shots - done)
        psi = np.zeros((m, dim), dtype=complex)
        psi[:, 0] = 1.0
        u_rows = uniforms[done : done + m]
        ev = 0
        for g in circuit.ops:
            psi = _batched_gate(psi, g, n)
            if len(g.qubits) == 2 and g.kind in noise.noisy_kinds:
                dur = noise.duration_of(g.kind)
                for q in g.qubits:
                    psi = _batched_relax(
                        psi, q, n,
                        noise.t1[q], noise.t2[q], dur,
                        u_rows[:, ev], u_rows[:, ev + 1],
                    )
                    ev += 2
        probs = np.abs(psi) ** 2
        probs /= probs.sum(axis=1, keepdims=True)
        # sample one outcome per trajectory, reusing its substream tail
        picks = np.empty(m, dtype=np.int64)
        for i in range(m):
            rng_i = np.random.default_rng(
                np.random.SeedSequence(entropy=seed, spawn_key=(done + i, 1))
            )
            picks[i] = rng_i.choice(dim, p=probs[i])
        for k in picks:
            key = format(k, f"0{n}b")
            counts[key] = counts.get(key, 0) + 1
        done += m
    return counts


def _batched_gate(psi: np.ndarray, g: Gate, n: int) -> np.ndarray:
    if g.kind in ("BARRIER", "MEASURE"):
        return psi
    m = psi.shape[0]
    if g.kind == "RZ":
        q = g.qubits[0]
        view = psi.reshape(m, 2**q, 2, -1)
        view[:, :, 0, :] *= np.exp(-0.5j * g.param)
        view[:, :, 1, :] *= np.exp(0.5j * g.param)
        return psi
    if g.kind == "CX":
        c, t = g.qubits
        tens = psi.reshape((m,) + (2,) * n)
        i0 = [slice(None)] * (n + 1)
        i0[1 + c], i0[1 + t] = 1, 0
        i1 = [slice(None)] * (n + 1)
        i1[1 + c], i1[1 + t] = 1, 1
        tmp = tens[tuple(i0)].copy()
        tens[tuple(i0)] = tens[tuple(i1)]
        tens[tuple(i1)] = tmp
        return psi
    if g.kind == "X":
        q = g.qubits[0]
        view = psi.reshape(m, 2**q, 2, -1)
        view[:, :, [0, 1], :] = view[:, :, [1, 0], :]
        return psi
    # generic dense
    mat = gate_matrix(g)
    qs = g.qubits
    k = len(qs)
    tens = psi.reshape((m,) + (2,) * n)
    mt = mat.reshape((2,) * (2 * k))
    moved = np.tensordot(mt, tens, axes=(list(range(k, 2 * k)), [1 + q for q in qs]))
    # axes now: (k gate outputs, batch, rest)
    rest = iter(range(k + 1, n + 1))
    order = [k]  # batch axis back to front
    for axis in range(n):
        if axis in qs:
            order.append(qs.index(axis))
        else:
            order.append(next(rest))
    return np.ascontiguousarray(moved.transpose(order)).reshape(m, -1)


def _batched_relax(
    psi: np.ndarray, q: int, n: int,
    t1_us: float, t2_us: float, t_ns: float,
    u_ad: np.ndarray, u_pd: np.ndarray,
) -> np.ndarray:
    g1, g2 = relaxation_factors(t1_us, t2_us, t_ns)
    p_reset = 1.0 - g1
    ratio = min(g2 / math.sqrt(g1), 1.0)
    p_z = 0.5 * (1.0 - ratio)
    m = psi.shape[0]
    view = psi.reshape(m, 2**q, 2, -1)
    p1 = np.einsum("mir->m", np.abs(view[:, :, 1, :]) ** 2).real
    p_damp = p_reset * p1
    damped = u_ad < p_damp
    keep = ~damped
    if np.any(damped):
        sel = view[damped]
        excited = sel[:, :, 1, :] / np.sqrt(p1[damped])[:, None, None]
        sel[:, :, 0, :] = excited
        sel[:, :, 1, :] = 0.0
        view[damped] = sel
    if np.any(keep):
        sel = view[keep]
        sel[:, :, 1, :] *= math.sqrt(1.0 - p_reset)
        norm = np.sqrt(1.0 - p_damp[keep])
        view[keep] = sel / norm[:, None, None, None]
    flip = u_pd < p_z
    if np.any(flip):
        view[flip, :, 1, :] *= -1.0
    return psi


# ---------------------------------------------------------------------------
# public entry points
# ---------------------------------------------------------------------------


def _pick_method(circuit: Circuit, noise: NoiseModel | None, method: str | None) -> str:
    if method is not None:
        return method
    if noise is None:
        return "statevector"
    if circuit.num_qubits <= DENSITY_LIMIT:
        return "density"
    if circuit.num_qubits <= TRAJECTORY_LIMIT:
        return "trajectory"
    raise ValueError(
        f"no noisy backend for {circuit.num_qubits} qubits "
        f"(density handles <= {DENSITY_LIMIT}, trajectories <= {TRAJECTORY_LIMIT})"
    )


def exact_probabilities(
    circuit: Circuit, noise: NoiseModel | None = None, method: str | None = None
) -> np.ndarray:
    """Measurement distribution without shot sampling (infinite-shot mode)."""
    if circuit.is_symbolic:
        raise ValueError("bind circuit parameters before simulating")
    how = _pick_method(circuit, noise, method)
    if how == "statevector":
        if noise is not None:
            raise ValueError("statevector backend is noiseless only")
        psi = _statevector(circuit)
        return np.abs(psi) ** 2
    if how == "density":
        return _density_probabilities(circuit, noise)
    raise ValueError(f"no exact distribution for method {how!r}")


def exact_observables(
    circuit: Circuit,
    noise: NoiseModel | None = None,
    logical_map: list[int] | None = None,
    method: str | None = None,
) -> ObservableVector:
    probs = exact_probabilities(circuit, noise, method)
    return _observables_from_probs(probs, circuit.num_qubits, logical_map)


def simulate(
    circuit: Circuit,
    noise: NoiseModel | None = None,
    shots: int = 4096,
    seed: int = 0,
    logical_map: list[int] | None = None,
    method: str | None = None,
) -> ShotResult:
    """Run a concrete circuit and sample ``shots`` bitstrings."""
    if shots < 1:
        raise ValueError("need at least one shot")
    if circuit.is_symbolic:
        raise ValueError("bind circuit parameters before simulating")
    how = _pick_method(circuit, noise, method)
    n = circuit.num_qubits
    if how == "trajectory":
        if noise is None:
            raise ValueError("trajectory backend needs a noise model")
        counts = _trajectory_counts(circuit, noise, shots, seed)
    else:
        probs = exact_probabilities(circuit, noise, how)
        rng = np.random.default_rng(seed)
        draws = rng.multinomial(shots, probs / probs.sum())
        counts = {}
        for k in np.nonzero(draws)[0]:
            counts[format(k, f"0{n}b")] = int(draws[k])
    return ShotResult(counts=counts, shots=shots, logical_map=logical_map)
