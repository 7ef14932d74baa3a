"""Gate-level circuit IR over the line-hardware gate set.

Matrix conventions (bit 0 is the leftmost / most significant index):

* RZ(a)  = diag(exp(-i a/2), exp(+i a/2))
* RX(a)  = exp(-i a/2 X)
* RZZ(a) = exp(-i a/2 Z (x) Z)
* SX     = sqrt(X) with SX^2 = X
* ECR    = RZX(pi/2) * (X on first operand), which makes
  CX(c,t) equal to [RZ(-pi/2) c][RX(-pi/2) t] ECR(c,t) [X c] up to
  global phase; this fixed dressing is the one used for native-set
  gate accounting.

Angles may be concrete floats or symbolic references into the
(gamma, beta) parameter vectors of a variational template; ``bind``
produces a fully concrete circuit.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

__all__ = [
    "Gate",
    "Circuit",
    "Symbol",
    "GATE_ARITY",
    "decompose_rzz",
    "merge_rzz_swap",
    "barrier_rz",
    "count_gates",
    "native_counts",
    "gate_matrix",
    "circuit_unitary",
]

GATE_ARITY = {
    "X": 1,
    "SX": 1,
    "H": 1,
    "RZ": 1,
    "RX": 1,
    "CX": 2,
    "ECR": 2,
    "SWAP": 2,
    "RZZ": 2,
    "BARRIER": 1,
    "MEASURE": 1,
}

_PARAMETRIC = {"RZ", "RX", "RZZ"}
TWO_QUBIT_KINDS = ("CX", "ECR", "SWAP", "RZZ")


@dataclass(frozen=True)
class Symbol:
    """Reference to slot ``index`` of a parameter vector, times ``scale``."""

    name: str  # "gamma" or "beta"
    index: int
    scale: float = 1.0

    def value(self, gammas: Sequence[float], betas: Sequence[float]) -> float:
        vec = gammas if self.name == "gamma" else betas
        return self.scale * float(vec[self.index])


Param = Union[float, Symbol, None]


def _canonical_angle(a: float) -> float:
    """Wrap an angle into (-2*pi, 2*pi]."""
    a = math.fmod(a, 4.0 * math.pi)
    if a > 2.0 * math.pi:
        a -= 4.0 * math.pi
    elif a <= -2.0 * math.pi:
        a += 4.0 * math.pi
    return a


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple[int, ...]
    param: Param = None

    def __post_init__(self) -> None:
        if self.kind not in GATE_ARITY:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if len(self.qubits) != GATE_ARITY[self.kind]:
            raise ValueError(
                f"{self.kind} takes {GATE_ARITY[self.kind]} operand(s), "
                f"got {self.qubits}"
            )
        if len(set(self.qubits)) != len(self.qubits):
            raise ValueError(f"repeated operand in {self.kind} on {self.qubits}")
        if self.kind in _PARAMETRIC:
            if self.param is None:
                raise ValueError(f"{self.kind} needs an angle")
            if isinstance(self.param, (int, float)):
                object.__setattr__(self, "param", _canonical_angle(float(self.param)))
        elif self.param is not None:
            raise ValueError(f"{self.kind} takes no parameter")

    @property
    def is_symbolic(self) -> bool:
        return isinstance(self.param, Symbol)

    def bound(self, gammas: Sequence[float], betas: Sequence[float]) -> "Gate":
        if not self.is_symbolic:
            return self
        return Gate(self.kind, self.qubits, self.param.value(gammas, betas))


@dataclass
class Circuit:
    """Ordered gate list; ``final_permutation[q]`` is the wire where the
    content initially on wire q ends up (identity unless routed)."""

    num_qubits: int
    ops: list[Gate]
    final_permutation: list[int] | None = None

    def __post_init__(self) -> None:
        for g in self.ops:
            if any(q >= self.num_qubits or q < 0 for q in g.qubits):
                raise ValueError(f"gate {g} out of range for {self.num_qubits} qubits")
        if self.final_permutation is None:
            self.final_permutation = list(range(self.num_qubits))
        if sorted(self.final_permutation) != list(range(self.num_qubits)):
            raise ValueError("final_permutation must be a bijection on wires")

    @property
    def is_symbolic(self) -> bool:
        return any(g.is_symbolic for g in self.ops)

    def bind(self, gammas: Sequence[float], betas: Sequence[float]) -> "Circuit":
        return Circuit(
            self.num_qubits,
            [g.bound(gammas, betas) for g in self.ops],
            list(self.final_permutation),
        )

    def two_qubit_count(self) -> int:
        return sum(1 for g in self.ops if g.kind in TWO_QUBIT_KINDS)

    # -- JSON --------------------------------------------------------------

    def to_json(self) -> dict:
        ops = []
        for g in self.ops:
            op: dict = {"kind": g.kind, "qubits": list(g.qubits)}
            if isinstance(g.param, Symbol):
                op["param"] = {
                    "sym": g.param.name,
                    "k": g.param.index,
                    "scale": g.param.scale,
                }
            elif g.param is not None:
                op["param"] = g.param
            ops.append(op)
        return {
            "num_qubits": self.num_qubits,
            "ops": ops,
            "final_permutation": list(self.final_permutation),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "Circuit":
        ops = []
        for op in doc["ops"]:
            p = op.get("param")
            if isinstance(p, dict):
                p = Symbol(p["sym"], int(p["k"]), float(p["scale"]))
            ops.append(Gate(op["kind"], tuple(op["qubits"]), p))
        return cls(int(doc["num_qubits"]), ops, doc.get("final_permutation"))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), sort_keys=True))

    @classmethod
    def load(cls, path: str | Path) -> "Circuit":
        return cls.from_json(json.loads(Path(path).read_text()))


# -- circuit transforms ------------------------------------------------------


def _scaled(theta: Param, factor: float) -> Param:
    if isinstance(theta, Symbol):
        return replace(theta, scale=theta.scale * factor)
    return factor * theta


def decompose_rzz(theta: Param, i: int, j: int) -> list[Gate]:
    """exp(-i theta Z_i Z_j) as CX(i,j) RZ(2 theta, j) CX(i,j), exactly."""
    return [
        Gate("CX", (i, j)),
        Gate("RZ", (j,), _scaled(theta, 2.0)),
        Gate("CX", (i, j)),
    ]


def merge_rzz_swap(theta: Param, i: int, j: int) -> list[Gate]:
    """SWAP(i,j) * exp(-i theta Z_i Z_j) in three two-qubit gates.

    The trailing CX of the RZZ block cancels against the leading CX of the
    expanded SWAP, leaving CX(i,j) RZ(2 theta, j) CX(j,i) CX(i,j).
    """
    return [
        Gate("CX", (i, j)),
        Gate("RZ", (j,), _scaled(theta, 2.0)),
        Gate("CX", (j, i)),
        Gate("CX", (i, j)),
    ]


def expand_swap(i: int, j: int) -> list[Gate]:
    return [Gate("CX", (i, j)), Gate("CX", (j, i)), Gate("CX", (i, j))]


def barrier_rz(circuit: Circuit) -> Circuit:
    """Replace every RZ by a barrier on the same wire.

    In routed circuits all RZ gates come from cost-layer rotations (the
    initial superposition layer uses H and the mixer uses RX), so this
    freezes gamma at zero while keeping every two-qubit gate in place.
    """
    ops = [
        Gate("BARRIER", g.qubits) if g.kind == "RZ" else g
        for g in circuit.ops
    ]
    return Circuit(circuit.num_qubits, ops, list(circuit.final_permutation))


def count_gates(circuit: Circuit) -> dict[str, int]:
    """Per-kind gate histogram; barriers are not gates and are excluded."""
    out: dict[str, int] = {}
    for g in circuit.ops:
        if g.kind == "BARRIER":
            continue
        out[g.kind] = out.get(g.kind, 0) + 1
    return out


# Native-set footprint of each abstract kind, with the fixed ECR dressing
# CX = [RZ c][RX t] ECR [X c] and the 2-SX euler form for RX.
_NATIVE_EXPANSION = {
    "H": {"RZ": 2, "SX": 1},
    "RX": {"RZ": 3, "SX": 2},
    "X": {"X": 1},
    "SX": {"SX": 1},
    "RZ": {"RZ": 1},
    "MEASURE": {"MEASURE": 1},
    # CX -> ECR plus dressing: X on control, RZ on control, RX on target
    "CX": {"ECR": 1, "X": 1, "RZ": 4, "SX": 2},
}


def native_counts(circuit: Circuit) -> dict[str, int]:
    """Gate totals after translation to {X, SX, RZ, ECR, MEASURE}."""
    out: dict[str, int] = {}
    for g in circuit.ops:
        if g.kind == "BARRIER":
            continue
        if g.kind == "ECR":
            exp = {"ECR": 1}
        elif g.kind == "SWAP":
            exp = {k: 3 * v for k, v in _NATIVE_EXPANSION["CX"].items()}
        elif g.kind == "RZZ":
            exp = {
                k: 2 * _NATIVE_EXPANSION["CX"].get(k, 0) for k in ("ECR", "X", "SX")
            }
            exp["RZ"] = 2 * _NATIVE_EXPANSION["CX"]["RZ"] + 1
        else:
            exp = _NATIVE_EXPANSION[g.kind]
        for k, v in exp.items():
            out[k] = out.get(k, 0) + v
    return out


# -- dense matrices (oracle-grade, used by simulators and tests) -------------

_SQ2 = 1.0 / math.sqrt(2.0)
_I2 = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_H = _SQ2 * np.array([[1, 1], [1, -1]], dtype=complex)
_SX = 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]])
_CX = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)
_SWAP = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
)
# ECR = RZX(pi/2) (X (x) I); RZX(t) = exp(-i t/2 Z(x)X)
_ZX = np.kron(np.diag([1.0, -1.0]).astype(complex), _X)
_ECR = (
    math.cos(math.pi / 4) * np.eye(4) - 1j * math.sin(math.pi / 4) * _ZX
) @ np.kron(_X, _I2)


def gate_matrix(gate: Gate) -> np.ndarray:
    """Unitary of a concrete gate on its own operands (big-endian order)."""
    if gate.is_symbolic:
        raise ValueError("bind symbolic parameters before asking for a matrix")
    k, a = gate.kind, gate.param
    if k == "X":
        return _X
    if k == "SX":
        return _SX
    if k == "H":
        return _H
    if k == "RZ":
        return np.diag([np.exp(-0.5j * a), np.exp(0.5j * a)])
    if k == "RX":
        c, s = math.cos(a / 2), math.sin(a / 2)
        return np.array([[c, -1j * s], [-1j * s, c]])
    if k == "CX":
        return _CX
    if k == "SWAP":
        return _SWAP
    if k == "ECR":
        return _ECR
    if k == "RZZ":
        ph = np.exp(-0.5j * a)
        return np.diag([ph, ph.conjugate(), ph.conjugate(), ph])
    if k in ("BARRIER", "MEASURE"):
        return _I2
    raise ValueError(f"no matrix for {k}")


def circuit_unitary(circuit: Circuit, ops: Iterable[Gate] | None = None) -> np.ndarray:
    """Dense unitary of a small circuit (oracle use only, n <= ~10)."""
    n = circuit.num_qubits
    u = np.eye(2**n, dtype=complex)
    for g in ops if ops is not None else circuit.ops:
        if g.kind in ("BARRIER", "MEASURE"):
            continue
        m = gate_matrix(g)
        full = _embed(m, g.qubits, n)
        u = full @ u
    return u


def _embed(m: np.ndarray, qubits: tuple[int, ...], n: int) -> np.ndarray:
    """Expand a 1- or 2-qubit matrix to the full 2^n space (big-endian)."""
    dim = 2**n
    t = np.eye(dim, dtype=complex).reshape((2,) * (2 * n))
    k = len(qubits)
    mt = m.reshape((2,) * (2 * k))
    in_axes = list(range(k, 2 * k))
    t = np.tensordot(mt, t, axes=(in_axes, list(qubits)))
    # tensordot puts the k output axes of mt first; move them back to the
    # operand positions, keeping every other axis in its original order.
    rest = iter(range(k, 2 * n))
    order = []
    for axis in range(2 * n):
        if axis in qubits:
            order.append(qubits.index(axis))
        else:
            order.append(next(rest))
    return t.transpose(order).reshape(dim, dim)
