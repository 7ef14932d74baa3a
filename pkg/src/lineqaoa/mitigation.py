"""Learned error mitigation: training data, FFNN and linear regressors.

Training rows are Clifford-reducible variants of the routed circuit:
random initial cuts propagated through the cost-layer CNOT structure (all
phase rotations barred out) and mixer layers at random angles. Noisy
observable vectors from simulating those rows form the inputs; the exact
product-state correlators form the targets. A trained model then maps
noisy QAOA observables to mitigated edge correlators whose weighted sum
estimates the cost energy.
"""
from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .graphs import Graph
from .routing import RoutedQaoa, training_variant
from .simulator import (
    NoiseModel,
    ObservableVector,
    observables_from_counts,
    simulate,
)

__all__ = [
    "TrainingSet",
    "MitigatorModel",
    "classical_targets",
    "generate_training_set",
    "train",
    "mitigate",
    "compare_models",
]


def classical_targets(
    bits: Sequence[int],
    betas: Sequence[float],
    edges: Sequence[tuple[int, int]],
) -> np.ndarray:
    """Exact edge correlators of a barred training row.

    With every cost rotation barred out, the circuit is a wire permutation
    and node v keeps spin s_v = (-1)**bits[v] rotated by the total mixer
    angle, so <Z_v> = s_v cos(2 sum(beta)) and pair correlators factorize.
    The permutation cancels against measurement relabeling, so targets only
    need node-indexed bits.
    """
    s = 1.0 - 2.0 * np.asarray(bits, dtype=float)
    c = float(np.cos(2.0 * np.sum(betas)))
    return np.array([s[u] * s[v] * c * c for (u, v) in edges])


@dataclass
class TrainingSet:
    """Noisy observable inputs X against exact correlator targets Y."""

    inputs: np.ndarray  # (M, n(n+1)/2)
    targets: np.ndarray  # (M, |E|)
    n: int
    edges: list[tuple[int, int]]
    bits: np.ndarray  # (M, n)
    betas: np.ndarray  # (M, p)
    shots: int
    seed: int

    def __post_init__(self) -> None:
        m = self.inputs.shape[0]
        if self.targets.shape[0] != m or self.bits.shape[0] != m or self.betas.shape[0] != m:
            raise ValueError("row counts disagree")
        if self.inputs.shape[1] != self.n * (self.n + 1) // 2:
            raise ValueError("input width must be n(n+1)/2")
        if self.targets.shape[1] != len(self.edges):
            raise ValueError("target width must be |E|")
        if np.any(np.abs(self.inputs) > 1 + 1e-9) or np.any(np.abs(self.targets) > 1 + 1e-9):
            raise ValueError("observables must lie in [-1, 1]")

    @property
    def num_rows(self) -> int:
        return self.inputs.shape[0]

    def save(self, path: str | Path) -> None:
        np.savez_compressed(
            path,
            inputs=self.inputs,
            targets=self.targets,
            bits=self.bits,
            betas=self.betas,
            meta=json.dumps(
                {
                    "n": self.n,
                    "edges": [list(e) for e in self.edges],
                    "shots": self.shots,
                    "seed": self.seed,
                }
            ),
        )

    @classmethod
    def load(cls, path: str | Path) -> "TrainingSet":
        with np.load(path, allow_pickle=False) as z:
            meta = json.loads(str(z["meta"]))
            return cls(
                inputs=z["inputs"],
                targets=z["targets"],
                n=int(meta["n"]),
                edges=[tuple(e) for e in meta["edges"]],
                bits=z["bits"],
                betas=z["betas"],
                shots=int(meta["shots"]),
                seed=int(meta["seed"]),
            )


def _training_row(args) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    routed, noise, shots, seed, row = args
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(row,)))
    bits = rng.integers(0, 2, routed.n)
    betas = rng.uniform(0.0, 2.0 * np.pi, routed.p)
    circuit = training_variant(routed, bits.tolist(), betas.tolist())
    result = simulate(
        circuit, noise, shots=shots,
        seed=int(rng.integers(2**63)), logical_map=routed.logical_map,
    )
    x = observables_from_counts(result).vector()
    y = classical_targets(bits, betas, routed.graph.edges)
    return x, y, bits, betas


def generate_training_set(
    routed: RoutedQaoa,
    num_rows: int,
    shots: int,
    noise: NoiseModel | None,
    seed: int,
    workers: int = 1,
) -> TrainingSet:
    """Sample random-cut training rows and simulate them under noise.

    Each row draws its bits (fair coin per qubit) and mixer angles
    (uniform over [0, 2pi)) from a stream keyed by (seed, row), so results
    do not depend on worker count or completion order.
    """
    if num_rows < 1:
        raise ValueError("need at least one row")
    jobs = [(routed, noise, shots, seed, r) for r in range(num_rows)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_training_row, jobs, chunksize=8))
    else:
        rows = [_training_row(j) for j in jobs]
    return TrainingSet(
        inputs=np.array([r[0] for r in rows]),
        targets=np.array([r[1] for r in rows]),
        n=routed.n,
        edges=list(routed.graph.edges),
        bits=np.array([r[2] for r in rows]),
        betas=np.array([r[3] for r in rows]),
        shots=shots,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# models
# ---------------------------------------------------------------------------


@dataclass
class MitigatorModel:
    """Trained regressor from noisy observable vectors to edge correlators."""

    kind: str  # "ffnn" or "linear"
    n: int
    edges: list[tuple[int, int]]
    weights: list[np.ndarray]  # ffnn: [W1, b1, W2, b2]; linear: [W, b]
    training_log: list[float] = field(default_factory=list)
    validation_r2: float = float("nan")

    def __post_init__(self) -> None:
        d_in = self.n * (self.n + 1) // 2
        d_out = len(self.edges)
        if self.kind == "ffnn":
            w1, b1, w2, b2 = self.weights
            if w1.shape[0] != d_in or w1.shape[1] != b1.shape[0]:
                raise ValueError("hidden layer shape mismatch")
            if w2.shape != (w1.shape[1], d_out) or b2.shape != (d_out,):
                raise ValueError("output layer shape mismatch")
        elif self.kind == "linear":
            w, b = self.weights
            if w.shape != (d_in, d_out) or b.shape != (d_out,):
                raise ValueError("linear shape mismatch")
        else:
            raise ValueError(f"unknown model kind {self.kind!r}")

    @property
    def hidden_width(self) -> int:
        return self.weights[0].shape[1] if self.kind == "ffnn" else 0

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Forward pass with outputs clamped to the physical range."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.kind == "ffnn":
            w1, b1, w2, b2 = self.weights
            h = np.maximum(x @ w1 + b1, 0.0)
            y = h @ w2 + b2
        else:
            w, b = self.weights
            y = x @ w + b
        return np.clip(y, -1.0, 1.0)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "n": self.n,
            "edges": [list(e) for e in self.edges],
            "weights": [w.tolist() for w in self.weights],
            "validation_r2": self.validation_r2,
            "training_log": list(self.training_log),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "MitigatorModel":
        return cls(
            kind=doc["kind"],
            n=int(doc["n"]),
            edges=[tuple(e) for e in doc["edges"]],
            weights=[np.asarray(w, dtype=float) for w in doc["weights"]],
            training_log=list(doc.get("training_log", [])),
            validation_r2=float(doc.get("validation_r2", "nan")),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))

    @classmethod
    def load(cls, path: str | Path) -> "MitigatorModel":
        return cls.from_json(json.loads(Path(path).read_text()))


def default_hidden_width(d_in: int, d_out: int) -> int:
    return int(round((d_in + d_out) / 2))


def _fit_ffnn(
    x: np.ndarray,
    y: np.ndarray,
    hidden: int,
    seed: int,
    lr: float = 1e-3,
    batch_size: int = 32,
    max_epochs: int = 400,
    patience: int = 20,
    es_fraction: float = 0.1,
) -> tuple[list[np.ndarray], list[float]]:
    """Adam-trained single-hidden-layer network with early stopping.

    A 10% slice of the rows is held out to stop training; the best weights
    seen on that slice are restored.
    """
    rng = np.random.default_rng(seed)
    m, d_in = x.shape
    d_out = y.shape[1]
    n_es = max(1, int(round(es_fraction * m))) if m >= 10 else 0
    perm = rng.permutation(m)
    es_idx, fit_idx = perm[:n_es], perm[n_es:]
    x_fit, y_fit = x[fit_idx], y[fit_idx]
    x_es, y_es = x[es_idx], y[es_idx]

    w1 = rng.normal(0.0, np.sqrt(2.0 / d_in), size=(d_in, hidden))
    b1 = np.zeros(hidden)
    w2 = rng.normal(0.0, np.sqrt(1.0 / hidden), size=(hidden, d_out))
    b2 = np.zeros(d_out)
    params = [w1, b1, w2, b2]
    mom = [np.zeros_like(p) for p in params]
    vel = [np.zeros_like(p) for p in params]
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0
    best = [p.copy() for p in params]
    best_es = np.inf
    since_best = 0
    log: list[float] = []

    for epoch in range(max_epochs):
        order = rng.permutation(len(x_fit))
        for lo in range(0, len(order), batch_size):
            idx = order[lo : lo + batch_size]
            xb, yb = x_fit[idx], y_fit[idx]
            z1 = xb @ params[0] + params[1]
            h = np.maximum(z1, 0.0)
            pred = h @ params[2] + params[3]
            err = 2.0 * (pred - yb) / (yb.size)
            g_w2 = h.T @ err
            g_b2 = err.sum(axis=0)
            dh = err @ params[2].T
            dz = dh * (z1 > 0)
            g_w1 = xb.T @ dz
            g_b1 = dz.sum(axis=0)
            step += 1
            for p, g, mo, ve in zip(params, (g_w1, g_b1, g_w2, g_b2), mom, vel):
                mo += (1 - beta1) * (g - mo)
                ve += (1 - beta2) * (g * g - ve)
                mhat = mo / (1 - beta1**step)
                vhat = ve / (1 - beta2**step)
                p -= lr * mhat / (np.sqrt(vhat) + eps)
        train_mse = float(np.mean((np.maximum(x_fit @ params[0] + params[1], 0) @ params[2] + params[3] - y_fit) ** 2))
        log.append(train_mse)
        if n_es:
            es_mse = float(np.mean((np.maximum(x_es @ params[0] + params[1], 0) @ params[2] + params[3] - y_es) ** 2))
            if es_mse < best_es - 1e-12:
                best_es = es_mse
                best = [p.copy() for p in params]
                since_best = 0
            else:
                since_best += 1
                if since_best >= patience:
                    break
    if n_es:
        params = best
    return params, log


def _fit_linear(x: np.ndarray, y: np.ndarray) -> list[np.ndarray]:
    xa = np.hstack([x, np.ones((x.shape[0], 1))])
    coef, *_ = np.linalg.lstsq(xa, y, rcond=None)
    return [coef[:-1], coef[-1]]


def _r2_per_output(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    """Coefficient of determination averaged uniformly over outputs."""
    ss_res = np.sum((y_true - y_pred) ** 2, axis=0)
    ss_tot = np.sum((y_true - y_true.mean(axis=0)) ** 2, axis=0)
    if np.any(ss_tot == 0):
        return float("nan")
    return float(np.mean(1.0 - ss_res / ss_tot))


def split_indices(m: int, split: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic shuffled (train, holdout) row indices."""
    n_train = int(round(split * m))
    if n_train < 1:
        raise ValueError("split leaves no training rows")
    perm = np.random.default_rng(seed).permutation(m)
    return perm[:n_train], perm[n_train:]


def train(
    ts: TrainingSet,
    kind: str = "ffnn",
    split: float = 0.9,
    seed: int = 0,
    hidden: int | None = None,
    **fit_kwargs,
) -> MitigatorModel:
    """Fit a mitigator on ``split`` of the rows; score R^2 on the rest."""
    tr, va = split_indices(ts.num_rows, split, seed)
    x_tr, y_tr = ts.inputs[tr], ts.targets[tr]
    log: list[float] = []
    if kind == "ffnn":
        d_in = ts.inputs.shape[1]
        d_out = ts.targets.shape[1]
        width = hidden if hidden is not None else default_hidden_width(d_in, d_out)
        weights, log = _fit_ffnn(x_tr, y_tr, width, seed=seed, **fit_kwargs)
    elif kind == "linear":
        weights = _fit_linear(x_tr, y_tr)
    else:
        raise ValueError(f"unknown model kind {kind!r}")
    model = MitigatorModel(
        kind=kind, n=ts.n, edges=list(ts.edges), weights=weights, training_log=log
    )
    if len(va):
        model.validation_r2 = _r2_per_output(ts.targets[va], model.predict(ts.inputs[va]))
    return model


def training_mse(model: MitigatorModel, ts: TrainingSet, rows: np.ndarray | None = None) -> float:
    x = ts.inputs if rows is None else ts.inputs[rows]
    y = ts.targets if rows is None else ts.targets[rows]
    return float(np.mean((model.predict(x) - y) ** 2))


def mitigate(
    model: MitigatorModel,
    obs: ObservableVector,
    weights: np.ndarray | None = None,
) -> tuple[np.ndarray, float]:
    """Mitigated edge correlators and their weighted-sum energy."""
    if obs.n != model.n:
        raise ValueError(f"observables are for {obs.n} qubits, model wants {model.n}")
    pred = model.predict(obs.vector())[0]
    w = np.ones(len(model.edges)) if weights is None else np.asarray(weights, dtype=float)
    return pred, float(np.dot(w, pred))


def unmitigated_energy(
    obs: ObservableVector,
    edges: Sequence[tuple[int, int]],
    weights: np.ndarray | None = None,
) -> float:
    corr = obs.edge_correlators(edges)
    w = np.ones(len(corr)) if weights is None else np.asarray(weights, dtype=float)
    return float(np.dot(w, corr))


def compare_models(
    ts: TrainingSet,
    resamples: int = 10,
    split: float = 0.8,
    seed: int = 0,
    hidden: int | None = None,
) -> dict:
    """Repeated-split FFNN vs linear comparison on per-row holdout MSE.

    Each resample reshuffles the rows into a ``split`` training part and a
    holdout; both models are fit on the same part and scored per holdout
    row. Summary statistics are means with standard deviations of the mean
    across resamples.
    """
    if ts.num_rows < 10:
        raise ValueError("need at least 10 rows to resample")
    per_model: dict[str, list[float]] = {"ffnn": [], "linear": []}
    for r in range(resamples):
        _, hold = split_indices(ts.num_rows, split, seed + r)
        for kind in ("ffnn", "linear"):
            model = train(ts, kind=kind, split=split, seed=seed + r, hidden=hidden)
            mse = float(
                np.mean((model.predict(ts.inputs[hold]) - ts.targets[hold]) ** 2)
            )
            per_model[kind].append(mse)
    out: dict = {"resamples": resamples, "split": split}
    for kind, vals in per_model.items():
        arr = np.asarray(vals)
        out[kind] = {
            "mse": vals,
            "mean": float(arr.mean()),
            "sem": float(arr.std(ddof=1) / np.sqrt(len(arr))) if len(arr) > 1 else 0.0,
        }
    out["mean_difference"] = out["ffnn"]["mean"] - out["linear"]["mean"]
    return out
