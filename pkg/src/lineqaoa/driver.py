"""Closed-loop variational optimization of routed QAOA circuits.

The optimizer minimizes either the mitigated energy E_M (model given) or
the raw noisy energy E_N; both are recorded at every evaluation from the
same shot data. Derivative-free methods only: COBYLA by default with a
Nelder-Mead fallback, both behind one entry point.
"""
from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .graphs import Graph, approximation_ratio, energies_of_bitstrings
from .mitigation import (
    MitigatorModel,
    generate_training_set,
    mitigate,
    train,
    unmitigated_energy,
)
from .routing import RoutedQaoa, route
from .mapping import solve_min_layers
from .simulator import (
    NoiseModel,
    observables_from_counts,
    sample_noise_model,
    simulate,
)

__all__ = [
    "OptimizationTrace",
    "tqa_init",
    "optimize",
    "energy_distribution",
    "repeat_study",
]


@dataclass
class OptimizationTrace:
    """Per-evaluation record of one optimization run."""

    p: int
    thetas: list[list[float]] = field(default_factory=list)
    e_mitigated: list[float] = field(default_factory=list)
    e_noisy: list[float] = field(default_factory=list)
    shots: int = 0
    objective: str = "noisy"
    theta0: list[float] | None = None
    theta_star: list[float] | None = None
    converged: bool = False
    timestamps: list[float] = field(default_factory=list)

    def best_index(self) -> int:
        key = self.e_mitigated if self.objective == "mitigated" else self.e_noisy
        return int(np.argmin(key))

    def final_energies(self) -> tuple[float, float]:
        """(E_M, E_N) at the accepted optimum."""
        k = self.best_index()
        return self.e_mitigated[k], self.e_noisy[k]

    def to_jsonl(self) -> str:
        lines = []
        for k in range(len(self.thetas)):
            lines.append(
                json.dumps(
                    {
                        "iter": k,
                        "theta": self.thetas[k],
                        "e_mitigated": self.e_mitigated[k],
                        "e_noisy": self.e_noisy[k],
                        "shots": self.shots,
                        "timestamp": self.timestamps[k] if k < len(self.timestamps) else None,
                    },
                    sort_keys=True,
                )
            )
        return "\n".join(lines) + "\n"

    def save(self, path: str | Path) -> None:
        head = {
            "p": self.p,
            "objective": self.objective,
            "theta0": self.theta0,
            "theta_star": self.theta_star,
            "converged": self.converged,
            "shots": self.shots,
        }
        Path(path).write_text(json.dumps(head, sort_keys=True) + "\n" + self.to_jsonl())

    @classmethod
    def load(cls, path: str | Path) -> "OptimizationTrace":
        lines = Path(path).read_text().strip().split("\n")
        head = json.loads(lines[0])
        tr = cls(p=head["p"], objective=head["objective"], shots=head["shots"])
        tr.theta0 = head["theta0"]
        tr.theta_star = head["theta_star"]
        tr.converged = head["converged"]
        for line in lines[1:]:
            row = json.loads(line)
            tr.thetas.append(row["theta"])
            tr.e_mitigated.append(row["e_mitigated"])
            tr.e_noisy.append(row["e_noisy"])
            if row.get("timestamp") is not None:
                tr.timestamps.append(row["timestamp"])
        return tr


def tqa_init(p: int, dt: float = 0.75) -> np.ndarray:
    """Linear annealing-ramp start: theta = (gamma_1..gamma_p, beta_1..beta_p).

    gamma ramps up to dt while beta ramps down to 0, mimicking a Trotterized
    annealing schedule.
    """
    if p < 1:
        raise ValueError("depth must be at least 1")
    if dt <= 0:
        raise ValueError("time step must be positive")
    k = np.arange(1, p + 1)
    gammas = (k / p) * dt
    betas = (1.0 - k / p) * dt
    return np.concatenate([gammas, betas])


def split_theta(theta: Sequence[float], p: int) -> tuple[list[float], list[float]]:
    theta = list(theta)
    if len(theta) != 2 * p:
        raise ValueError(f"theta must have length {2 * p}")
    return theta[:p], theta[p:]


def _measure_energies(
    routed: RoutedQaoa,
    theta: np.ndarray,
    noise: NoiseModel | None,
    model: MitigatorModel | None,
    shots: int,
    seed: int,
) -> tuple[float, float]:
    gammas, betas = split_theta(theta, routed.p)
    circuit = routed.bind(gammas, betas)
    result = simulate(circuit, noise, shots=shots, seed=seed, logical_map=routed.logical_map)
    obs = observables_from_counts(result)
    w = routed.graph.weight_array()
    e_n = unmitigated_energy(obs, routed.graph.edges, w)
    if model is not None:
        _, e_m = mitigate(model, obs, w)
    else:
        e_m = e_n
    return e_m, e_n


def optimize(
    routed: RoutedQaoa,
    noise: NoiseModel | None,
    model: MitigatorModel | None,
    shots: int = 4096,
    max_iter: int = 50,
    seed: int = 0,
    theta0: np.ndarray | None = None,
    method: str = "cobyla",
    rhobeg: float = 0.1,
    rhoend: float = 1e-3,
    record_timestamps: bool = True,
) -> OptimizationTrace:
    """Minimize E_M (model given) or E_N with a derivative-free method.

    Every evaluation simulates once and records both energies; evaluation
    seeds derive from (seed, evaluation index) so a trace is reproducible.
    """
    if theta0 is None:
        theta0 = tqa_init(routed.p)
    theta0 = np.asarray(theta0, dtype=float)
    trace = OptimizationTrace(
        p=routed.p,
        shots=shots,
        objective="mitigated" if model is not None else "noisy",
        theta0=theta0.tolist(),
    )
    counter = {"k": 0}

    def objective(theta: np.ndarray) -> float:
        k = counter["k"]
        counter["k"] = k + 1
        e_m, e_n = _measure_energies(routed, theta, noise, model, shots, seed + 7919 * k)
        trace.thetas.append([float(x) for x in theta])
        trace.e_mitigated.append(e_m)
        trace.e_noisy.append(e_n)
        if record_timestamps:
            trace.timestamps.append(time.time())
        return e_m if model is not None else e_n

    if method == "cobyla":
        res = minimize(
            objective,
            theta0,
            method="COBYLA",
            options={"rhobeg": rhobeg, "maxiter": max_iter, "tol": rhoend},
        )
    elif method == "nelder-mead":
        res = minimize(
            objective,
            theta0,
            method="Nelder-Mead",
            options={"maxfev": max_iter, "xatol": rhoend, "fatol": 1e-4},
        )
    else:
        raise ValueError(f"unknown optimizer {method!r}")
    trace.converged = bool(res.success)
    trace.theta_star = trace.thetas[trace.best_index()]
    return trace


def energy_distribution(
    routed: RoutedQaoa,
    theta: Sequence[float],
    noise: NoiseModel | None,
    shots: int = 4096,
    seed: int = 0,
) -> dict:
    """Sample bitstrings at theta and histogram their cut energies."""
    gammas, betas = split_theta(theta, routed.p)
    circuit = routed.bind(gammas, betas)
    result = simulate(circuit, noise, shots=shots, seed=seed, logical_map=routed.logical_map)
    rows, weights = result.bit_matrix()
    energies = energies_of_bitstrings(routed.graph, rows)
    hist: dict[float, int] = {}
    for e, w in zip(energies, weights):
        hist[float(e)] = hist.get(float(e), 0) + int(w)
    mean = float(np.dot(energies, weights) / weights.sum())
    best_k = int(np.argmin(energies))
    total_w = float(routed.graph.weight_array().sum())
    best_energy = float(energies[best_k])
    out = {
        "histogram": dict(sorted(hist.items())),
        "mean": mean,
        "shots": shots,
        "best_energy": best_energy,
        "best_cut": (total_w - best_energy) / 2.0,
        "best_count": int(sum(w for e, w in zip(energies, weights) if e == best_energy)),
    }
    try:
        out["alpha"] = approximation_ratio(routed.graph, mean)
        out["best_alpha"] = approximation_ratio(routed.graph, best_energy)
    except ValueError:
        pass
    return out


def _one_repeat(args) -> dict:
    (graph, p, shots_opt, shots_train, train_rows, max_iter, seed, rep) = args
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(rep,))
    seeds = ss.generate_state(6)
    mapping = solve_min_layers(graph)
    routed = route(graph, mapping, p)
    noise = sample_noise_model(graph.n, seed=int(seeds[0]))
    ts = generate_training_set(routed, train_rows, shots_train, noise, seed=int(seeds[1]))
    model = train(ts, kind="ffnn", split=0.9, seed=int(seeds[2]))
    tr_m = optimize(routed, noise, model, shots=shots_opt, max_iter=max_iter,
                    seed=int(seeds[3]), record_timestamps=False)
    tr_n = optimize(routed, noise, None, shots=shots_opt, max_iter=max_iter,
                    seed=int(seeds[3]), record_timestamps=False)
    dist_m = energy_distribution(routed, tr_m.theta_star, None, shots=4096, seed=int(seeds[4]))
    dist_n = energy_distribution(routed, tr_n.theta_star, None, shots=4096, seed=int(seeds[5]))
    e_m_final, e_n_final = tr_m.final_energies()
    return {
        "repeat": rep,
        "noiseless_mean_mitigated": dist_m["mean"],
        "noiseless_mean_unmitigated": dist_n["mean"],
        "validation_r2": model.validation_r2,
        "final_e_mitigated": e_m_final,
        "final_e_noisy": e_n_final,
        "theta_star_mitigated": tr_m.theta_star,
        "theta_star_unmitigated": tr_n.theta_star,
    }


def repeat_study(
    graph: Graph,
    p: int = 2,
    repeats: int = 20,
    seed: int = 0,
    shots_opt: int = 4096,
    shots_train: int = 1024,
    train_rows: int = 300,
    max_iter: int = 50,
    workers: int = 1,
) -> dict:
    """Paired mitigated-vs-unmitigated optimization over fresh noise draws.

    Each repeat samples a new noise model, builds a fresh training set,
    trains an FFNN, optimizes E_M and E_N separately from the same start,
    then scores both arms by the mean energy of 4096 noiselessly sampled
    bitstrings at their optimized angles.
    """
    if graph.n > 12:
        raise ValueError("repeat study needs noisy-simulable sizes (n <= 12)")
    jobs = [
        (graph, p, shots_opt, shots_train, train_rows, max_iter, seed, r)
        for r in range(repeats)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_one_repeat, jobs))
    else:
        rows = [_one_repeat(j) for j in jobs]
    mit = np.array([r["noiseless_mean_mitigated"] for r in rows])
    unm = np.array([r["noiseless_mean_unmitigated"] for r in rows])
    return {
        "repeats": rows,
        "mean_mitigated": float(mit.mean()),
        "std_mitigated": float(mit.std(ddof=1)) if repeats > 1 else 0.0,
        "mean_unmitigated": float(unm.mean()),
        "std_unmitigated": float(unm.std(ddof=1)) if repeats > 1 else 0.0,
        "mitigated_wins": int(np.sum(mit < unm)),
        "final_em_below_en": int(
            sum(1 for r in rows if r["final_e_mitigated"] < r["final_e_noisy"])
        ),
    }
