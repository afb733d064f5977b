"""Covariance matrix adaptation evolution strategy, maximizing.

Self-contained ask/tell implementation with cumulative step-size
adaptation and the rank-one plus rank-mu covariance update, using the
widely published default strategy parameters. Sampling goes through a
cached eigendecomposition that is refreshed lazily.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

EIGEN_FLOOR = 1e-20


@dataclass
class CmaConfig:
    dimension: int
    population: int | None = None  # default 4 + floor(3 ln n)
    sigma0: float = 0.01
    mean0: np.ndarray | None = None  # default all zeros
    seed: int = 0

    def resolved_population(self) -> int:
        if self.population is not None:
            return self.population
        return 4 + int(3 * math.log(self.dimension))


@dataclass
class CmaState:
    config: CmaConfig
    weights: np.ndarray
    mu: int
    mu_eff: float
    c_sigma: float
    d_sigma: float
    c_c: float
    c_1: float
    c_mu: float
    chi_n: float
    mean: np.ndarray
    sigma: float
    cov: np.ndarray
    p_sigma: np.ndarray
    p_c: np.ndarray
    eig_vectors: np.ndarray
    eig_scales: np.ndarray
    inv_sqrt: np.ndarray
    eig_generation: int
    eig_gap: int
    generation: int = 0
    evaluations: int = 0
    rng: np.random.Generator = field(default_factory=np.random.default_rng)

    @property
    def population(self) -> int:
        return self.config.resolved_population()


def cma_init(config: CmaConfig) -> CmaState:
    n = config.dimension
    if n <= 0:
        raise ValueError("dimension must be positive")
    lam = config.resolved_population()
    if lam < 2:
        raise ValueError("population must be at least 2")
    if config.sigma0 <= 0:
        raise ValueError("sigma0 must be positive")

    mu = lam // 2
    raw = np.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
    weights = raw / raw.sum()
    mu_eff = 1.0 / float(np.sum(weights**2))

    c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0)
    d_sigma = 1.0 + 2.0 * max(0.0, math.sqrt((mu_eff - 1.0) / (n + 1.0)) - 1.0) + c_sigma
    c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n)
    c_1 = 2.0 / ((n + 1.3) ** 2 + mu_eff)
    c_mu = min(1.0 - c_1, 2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((n + 2.0) ** 2 + mu_eff))
    chi_n = math.sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n))
    eig_gap = max(1, math.ceil(1.0 / (10.0 * n * (c_1 + c_mu))))

    mean = np.zeros(n) if config.mean0 is None else np.asarray(config.mean0, dtype=np.float64).copy()
    if mean.shape != (n,):
        raise ValueError(f"mean0 must have shape ({n},)")

    return CmaState(
        config=config,
        weights=weights,
        mu=mu,
        mu_eff=mu_eff,
        c_sigma=c_sigma,
        d_sigma=d_sigma,
        c_c=c_c,
        c_1=c_1,
        c_mu=c_mu,
        chi_n=chi_n,
        mean=mean,
        sigma=config.sigma0,
        cov=np.eye(n),
        p_sigma=np.zeros(n),
        p_c=np.zeros(n),
        eig_vectors=np.eye(n),
        eig_scales=np.ones(n),
        inv_sqrt=np.eye(n),
        eig_generation=-(10**9),  # force a refresh on first use
        eig_gap=eig_gap,
        rng=np.random.default_rng(config.seed),
    )


def _refresh_eigen(state: CmaState) -> None:
    cov = (state.cov + state.cov.T) / 2.0
    vals, vecs = np.linalg.eigh(cov)
    if np.min(vals) < EIGEN_FLOOR:
        warnings.warn(
            "covariance lost positive definiteness; flooring eigenvalues",
            RuntimeWarning,
            stacklevel=3,
        )
        vals = np.maximum(vals, EIGEN_FLOOR)
        state.cov = (vecs * vals) @ vecs.T
    state.eig_vectors = vecs
    state.eig_scales = np.sqrt(vals)
    state.inv_sqrt = (vecs / state.eig_scales) @ vecs.T
    state.eig_generation = state.generation


def ask(state: CmaState) -> np.ndarray:
    """Sample a population, rows mean + sigma * B (D z)."""
    if state.generation - state.eig_generation >= state.eig_gap:
        _refresh_eigen(state)
    lam = state.population
    z = state.rng.standard_normal((lam, state.config.dimension))
    samples = state.mean + state.sigma * (z * state.eig_scales) @ state.eig_vectors.T
    if not np.all(np.isfinite(samples)):
        raise FloatingPointError("sampled non-finite candidates; covariance degenerate")
    return samples


def tell(state: CmaState, genomes: np.ndarray, fitnesses: np.ndarray) -> CmaState:
    """Rank by descending fitness and update mean, paths, covariance, sigma."""
    genomes = np.asarray(genomes, dtype=np.float64)
    fitnesses = np.asarray(fitnesses, dtype=np.float64)
    lam = state.population
    if genomes.shape != (lam, state.config.dimension) or fitnesses.shape != (lam,):
        raise ValueError("tell expects the full population and one fitness each")
    if np.any(np.isnan(fitnesses)):
        raise ValueError("NaN fitness")

    order = np.argsort(-fitnesses, kind="stable")
    selected = genomes[order[: state.mu]]

    old_mean = state.mean
    y = (selected - old_mean) / state.sigma
    y_w = state.weights @ y
    state.mean = old_mean + state.sigma * y_w

    # C^(-1/2) from the cached decomposition (refreshed lazily in ask).
    state.p_sigma = (1.0 - state.c_sigma) * state.p_sigma + math.sqrt(
        state.c_sigma * (2.0 - state.c_sigma) * state.mu_eff
    ) * (state.inv_sqrt @ y_w)

    gen1 = state.generation + 1
    ps_norm = float(np.linalg.norm(state.p_sigma))
    h_sigma = (
        ps_norm / math.sqrt(1.0 - (1.0 - state.c_sigma) ** (2 * gen1)) / state.chi_n
        < 1.4 + 2.0 / (state.config.dimension + 1.0)
    )
    state.p_c = (1.0 - state.c_c) * state.p_c + (
        math.sqrt(state.c_c * (2.0 - state.c_c) * state.mu_eff) * y_w if h_sigma else 0.0
    )

    delta_h = (1.0 - float(h_sigma)) * state.c_c * (2.0 - state.c_c)
    rank_mu = (state.weights[:, None] * y).T @ y
    state.cov = (
        (1.0 + state.c_1 * delta_h - state.c_1 - state.c_mu) * state.cov
        + state.c_1 * np.outer(state.p_c, state.p_c)
        + state.c_mu * rank_mu
    )
    state.cov = (state.cov + state.cov.T) / 2.0

    state.sigma *= math.exp((state.c_sigma / state.d_sigma) * (ps_norm / state.chi_n - 1.0))
    if not math.isfinite(state.sigma) or state.sigma <= 0:
        raise FloatingPointError(f"step size degenerated to {state.sigma}")

    state.generation = gen1
    state.evaluations += lam
    return state


def state_to_arrays(state: CmaState) -> dict[str, np.ndarray]:
    """Flat array dict for checkpointing; inverse of state_from_arrays."""
    return {
        "mean": state.mean,
        "sigma": np.array([state.sigma]),
        "cov": state.cov,
        "p_sigma": state.p_sigma,
        "p_c": state.p_c,
        "eig_vectors": state.eig_vectors,
        "eig_scales": state.eig_scales,
        "inv_sqrt": state.inv_sqrt,
        "counters": np.array(
            [state.generation, state.evaluations, state.eig_generation], dtype=np.int64
        ),
        "config": np.frombuffer(
            json.dumps(
                {
                    "dimension": state.config.dimension,
                    "population": state.config.population,
                    "sigma0": state.config.sigma0,
                    "seed": state.config.seed,
                }
            ).encode(),
            dtype=np.uint8,
        ),
        "rng": np.frombuffer(
            json.dumps(state.rng.bit_generator.state).encode(), dtype=np.uint8
        ),
    }


def state_from_arrays(arrays: dict[str, np.ndarray]) -> CmaState:
    meta = json.loads(bytes(arrays["config"]).decode())
    config = CmaConfig(
        dimension=int(meta["dimension"]),
        population=meta["population"],
        sigma0=float(meta["sigma0"]),
        seed=int(meta["seed"]),
    )
    state = cma_init(config)
    state.mean = np.array(arrays["mean"], dtype=np.float64)
    state.sigma = float(arrays["sigma"][0])
    state.cov = np.array(arrays["cov"], dtype=np.float64)
    state.p_sigma = np.array(arrays["p_sigma"], dtype=np.float64)
    state.p_c = np.array(arrays["p_c"], dtype=np.float64)
    state.eig_vectors = np.array(arrays["eig_vectors"], dtype=np.float64)
    state.eig_scales = np.array(arrays["eig_scales"], dtype=np.float64)
    state.inv_sqrt = np.array(arrays["inv_sqrt"], dtype=np.float64)
    counters = arrays["counters"]
    state.generation = int(counters[0])
    state.evaluations = int(counters[1])
    state.eig_generation = int(counters[2])
    state.rng.bit_generator.state = json.loads(bytes(arrays["rng"]).decode())
    return state
