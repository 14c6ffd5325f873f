"""Model-space probe by evolution strategy, synthetic worst-case data, timing bench."""

from __future__ import annotations

import csv
import math
import statistics
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dataset import NEGATIVE, POSITIVE, Case, Dataset, FeatureInterner
from .errors import ConfigurationError, ProbeError
from .hypergraph import build_partition
from .metrics import mcc_from_labels
from .model import HCBRModel, compute_strengths


@dataclass(frozen=True)
class ProbeConfig:
    population: int = 100
    offspring: int = 100
    generations: int = 200
    penalty: float = 0.1
    alpha: float = 10.0
    seed: int = 0
    crossover_prob: float = 0.5
    nu_init: float = 0.1
    jitter: float = 1.0  # initial population std, in units of sigma
    sigma: float | None = None  # overrides the derived step size
    sigma_rule: str = "range"  # "range" or "min_gap", see strength_scale

    def __post_init__(self):
        if self.sigma_rule not in ("range", "min_gap"):
            raise ConfigurationError(f"unknown sigma rule {self.sigma_rule!r}")
        if self.population < 1 or self.offspring < 1 or self.generations < 0:
            raise ConfigurationError("population and offspring must be >= 1, generations >= 0")
        if self.alpha <= 0 or self.penalty < 0:
            raise ConfigurationError("alpha must be > 0 and penalty >= 0")
        if not 0 < self.nu_init <= 1:
            raise ConfigurationError("nu_init must lie in (0, 1]")


@dataclass
class ProbeIndividual:
    delta: np.ndarray
    nu: np.ndarray
    fitness: float = float("nan")


@dataclass
class ProbeResult:
    best_delta: np.ndarray
    best_fitness: float
    history: list[tuple[int, float, float]]  # (generation, max, mean)
    sigma: float
    base_train_mcc: float
    final_train_mcc: float
    base_test_mcc: float | None = None
    final_test_mcc: float | None = None
    best_nu: np.ndarray | None = None

    @property
    def best_individual(self) -> ProbeIndividual:
        return ProbeIndividual(self.best_delta, self.best_nu, self.best_fitness)

    @property
    def train_mcc_gain(self) -> float:
        return self.final_train_mcc - self.base_train_mcc

    @property
    def test_mcc_gain(self) -> float | None:
        if self.base_test_mcc is None:
            return None
        return self.final_test_mcc - self.base_test_mcc

    def report(self) -> dict:
        return {
            "sigma": self.sigma,
            "best_fitness": self.best_fitness,
            "delta_norm_sq": float(self.best_delta @ self.best_delta),
            "base_train_mcc": self.base_train_mcc,
            "final_train_mcc": self.final_train_mcc,
            "train_mcc_gain": self.train_mcc_gain,
            "base_test_mcc": self.base_test_mcc,
            "final_test_mcc": self.final_test_mcc,
            "test_mcc_gain": self.test_mcc_gain,
            "generations": len(self.history) - 1,
        }


def min_strength_gap(mu: np.ndarray, rel_tol: float = 1e-12) -> float:
    """Smallest positive gap between distinct strength values.

    Gaps below ``rel_tol`` times the largest magnitude are floating-point
    noise between values that are equal in exact arithmetic and are ignored.
    """
    vals = np.unique(np.asarray(mu, dtype=float))
    if len(vals) < 2:
        raise ProbeError("all strengths are equal; pass an explicit sigma to the probe")
    gaps = np.diff(vals)
    floor = rel_tol * max(float(np.max(np.abs(vals))), 1e-300)
    gaps = gaps[gaps > floor]
    if len(gaps) == 0:
        raise ProbeError("all strengths are equal up to rounding; pass an explicit sigma to the probe")
    return float(gaps.min())


def strength_scale(mu: np.ndarray, rule: str = "range") -> float:
    """Reference spread of the strengths that the mutation step is a fraction of.

    ``range`` is max(mu) - min(mu); ``min_gap`` is the smallest positive gap
    between two distinct values, which can be vanishingly small after
    training.
    """
    if rule == "min_gap":
        return min_strength_gap(mu)
    spread = float(np.max(mu) - np.min(mu)) if len(mu) else 0.0
    if spread <= 0:
        raise ProbeError("all strengths are equal; pass an explicit sigma to the probe")
    return spread


class _Fitness:
    def __init__(self, weights, mu: np.ndarray, labels: np.ndarray, penalty: float):
        self.weights = weights
        self.mu = mu
        self.labels = labels
        self.penalty = penalty

    def predictions(self, deltas: np.ndarray) -> np.ndarray:
        """Rule R1 on W(mu + delta) for each column of ``deltas`` (M x P)."""
        s = self.weights @ (self.mu[:, None] + deltas)
        return np.where(s > 0, POSITIVE, NEGATIVE)

    def __call__(self, deltas: np.ndarray) -> np.ndarray:
        preds = self.predictions(deltas)
        mcc = np.array([mcc_from_labels(self.labels, preds[:, j]) for j in range(preds.shape[1])])
        return mcc - self.penalty * np.einsum("ij,ij->j", deltas, deltas)

    def mcc(self, delta: np.ndarray) -> float:
        return mcc_from_labels(self.labels, self.predictions(delta[:, None])[:, 0])


def _two_point(a: np.ndarray, b: np.ndarray, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    n = len(a)
    if n < 2:
        return a.copy(), b.copy()
    i, j = sorted(rng.choice(n + 1, size=2, replace=False).tolist())
    c1, c2 = a.copy(), b.copy()
    c1[i:j], c2[i:j] = b[i:j], a[i:j]
    return c1, c2


def probe_model_space(model: HCBRModel, cases: Sequence[Case], config: ProbeConfig = ProbeConfig(),
                      test_cases: Sequence[Case] | None = None) -> ProbeResult:
    """Search perturbations of the block strengths that raise training MCC.

    Fitness is MCC(labels, sign(W(mu + delta))) minus ``penalty * |delta|^2``.
    Each individual carries a per-component mutation probability vector nu,
    which is adapted log-normally alongside delta.
    """
    labels = np.array([c.label for c in cases])
    if not (labels == POSITIVE).any() or not (labels == NEGATIVE).any():
        raise ProbeError("the probe needs both classes among the training cases")
    mu = model.mu.astype(float)
    m = len(mu)
    sigma = config.sigma if config.sigma is not None else strength_scale(mu, config.sigma_rule) / config.alpha
    if sigma <= 0:
        raise ConfigurationError("sigma must be positive")
    fit = _Fitness(model.weight_matrix(cases), mu, labels, config.penalty)
    rng = np.random.default_rng(config.seed)
    tau = 1.0 / math.sqrt(2.0 * m)
    nu_lo, nu_hi = min(1.0 / m, config.nu_init), 1.0

    # genomes stacked as columns: deltas (m x P), nus (m x P)
    deltas = rng.normal(0.0, config.jitter * sigma, size=(m, config.population))
    deltas[:, 0] = 0.0
    nus = np.full((m, config.population), config.nu_init)
    fitness = fit(deltas)
    history = [(0, float(fitness.max()), float(fitness.mean()))]

    for gen in range(1, config.generations + 1):
        kids_d = np.empty((m, config.offspring))
        kids_n = np.empty((m, config.offspring))
        for k in range(0, config.offspring, 2):
            p1, p2 = rng.choice(config.population, size=2, replace=config.population < 2)
            g1 = np.concatenate([deltas[:, p1], nus[:, p1]])
            g2 = np.concatenate([deltas[:, p2], nus[:, p2]])
            if rng.random() < config.crossover_prob:
                g1, g2 = _two_point(g1, g2, rng)
            for slot, g in ((k, g1), (k + 1, g2)):
                if slot >= config.offspring:
                    break
                kids_d[:, slot], kids_n[:, slot] = g[:m], g[m:]
        kids_n = np.clip(kids_n * np.exp(tau * rng.standard_normal(kids_n.shape)), nu_lo, nu_hi)
        gate = rng.random(kids_d.shape) < kids_n
        kids_d = kids_d + gate * rng.normal(0.0, sigma, size=kids_d.shape)
        kid_fit = fit(kids_d)

        # elitist (mu + lambda): parents listed first so ties keep incumbents
        pool_fit = np.concatenate([fitness, kid_fit])
        order = np.argsort(-pool_fit, kind="stable")[: config.population]
        pool_d = np.concatenate([deltas, kids_d], axis=1)
        pool_n = np.concatenate([nus, kids_n], axis=1)
        deltas, nus, fitness = pool_d[:, order], pool_n[:, order], pool_fit[order]
        history.append((gen, float(fitness.max()), float(fitness.mean())))

    best = int(np.argmax(fitness))
    best_delta = deltas[:, best].copy()
    zero = np.zeros(m)
    result = ProbeResult(best_delta, float(fitness[best]), history, sigma,
                         fit.mcc(zero), fit.mcc(best_delta), best_nu=nus[:, best].copy())
    if test_cases:
        tfit = _Fitness(model.weight_matrix(test_cases), mu, np.array([c.label for c in test_cases]), 0.0)
        result.base_test_mcc = tfit.mcc(zero)
        result.final_test_mcc = tfit.mcc(best_delta)
    return result


def write_history_csv(history: Sequence[tuple[int, float, float]], stream) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["generation", "max_fitness", "mean_fitness"])
    for g, mx, mn in history:
        w.writerow([g, repr(mx), repr(mn)])


# ----------------------------------------------------------------------------
# synthetic worst case and timing
# ----------------------------------------------------------------------------


def gen_worst_case(n: int, m: int) -> Dataset:
    """Case i (1-based) holds features i..i+m; even i are positive."""
    if n < 1 or m < 1:
        raise ConfigurationError("generator needs N >= 1 and m >= 1")
    interner = FeatureInterner(str(f) for f in range(1, n + m + 1))
    cases = [
        Case(i - 1, tuple(range(i - 1, i + m)), POSITIVE if i % 2 == 0 else NEGATIVE)
        for i in range(1, n + 1)
    ]
    return Dataset(cases, interner, {"source": "worst-case generator", "N": n, "m": m})


def expected_partition_size(n: int, m: int) -> int:
    """Number of distinct membership signatures of the generator's features."""
    return n + m if n > m else 2 * n - 1


@dataclass
class BenchRecord:
    n: int
    m: int
    build_time: float
    strength_time: float
    partition_size: int
    expected_size: int = field(default=0)

    def row(self) -> list:
        return [self.n, self.m, f"{self.build_time:.6f}", f"{self.strength_time:.6f}",
                self.partition_size, self.expected_size]


def bench_build(n_list: Sequence[int], m_list: Sequence[int], repetitions: int = 3) -> list[BenchRecord]:
    """Median wall-clock of partition build and strength computation per (N, m)."""
    if not n_list or not m_list or repetitions < 1:
        raise ConfigurationError("bench needs non-empty N and m lists and repetitions >= 1")
    out = []
    for n in n_list:
        for m in m_list:
            cases = gen_worst_case(n, m).cases
            build_t, strength_t = [], []
            size = 0
            for _ in range(repetitions):
                t0 = time.perf_counter()
                part = build_partition(cases)
                t1 = time.perf_counter()
                compute_strengths(part, cases)
                t2 = time.perf_counter()
                build_t.append(t1 - t0)
                strength_t.append(t2 - t1)
                size = len(part)
            out.append(BenchRecord(n, m, statistics.median(build_t), statistics.median(strength_t),
                                   size, expected_partition_size(n, m)))
    return out


def write_bench_csv(records: Sequence[BenchRecord], stream) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["N", "m", "build_time", "strength_time", "partition_size", "expected_size"])
    for r in records:
        w.writerow(r.row())
