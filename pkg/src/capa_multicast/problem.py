"""Backend-neutral optimization problem built from pairwise channel inner products.

Both solvers only ever touch channel inner products, noise powers, floors, and
the power budget, so continuous-surface and discrete-array channels reduce to
the same structure: a Hermitian Gram matrix plus bookkeeping. Beams live as
coefficient vectors over the conjugated user channels; `basis` and `weights`
retain the raw samples so metrics can cross-check every quadratic form against
a direct per-node evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import Scenario


@dataclass(frozen=True, eq=False)
class MulticastProblem:
    gram: np.ndarray          # (K, K) complex, [i, j] = <h_i, h_j>
    sigma2: np.ndarray        # (K,) noise variance per user
    group_of: np.ndarray      # (K,) int, group id per flat user index
    group_sizes: np.ndarray   # (G,) int
    power_budget: float
    rate_floors: np.ndarray   # (G,) bit/s/Hz
    basis: np.ndarray         # (K, N) raw channel samples
    weights: np.ndarray       # (N,) integration weights (all ones for arrays)
    backend: str = "capa"

    @property
    def num_users(self) -> int:
        return self.gram.shape[0]

    @property
    def num_groups(self) -> int:
        return len(self.group_sizes)

    @property
    def sinr_floors(self) -> np.ndarray:
        return 2.0 ** self.rate_floors - 1.0

    def group_indices(self, g: int) -> np.ndarray:
        return np.flatnonzero(self.group_of == g)

    def out_group_indices(self, g: int) -> np.ndarray:
        return np.flatnonzero(self.group_of != g)


def gram_from_samples(samples: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Hermitian Gram matrix [i, j] = sum_n w_n h_i[n] conj(h_j[n])."""
    weighted = samples * weights[None, :]
    gram = weighted @ samples.conj().T
    return 0.5 * (gram + gram.conj().T)


def from_scenario(scenario: Scenario) -> MulticastProblem:
    """Continuous-aperture problem: quadrature weights carry the surface measure."""
    c = scenario.config
    samples = np.array([ch.values for ch in scenario.channels])
    weights = scenario.grid.weights.copy()
    return MulticastProblem(
        gram=gram_from_samples(samples, weights),
        sigma2=np.array([ch.noise_variance for ch in scenario.channels]),
        group_of=np.array([g for g, _, _ in scenario.users], dtype=np.int64),
        group_sizes=np.full(c.num_groups, c.users_per_group, dtype=np.int64),
        power_budget=c.transmit_power_budget,
        rate_floors=np.array(c.rate_floors, dtype=float),
        basis=samples,
        weights=weights,
        backend="capa",
    )


def from_discrete_channels(scenario: Scenario, vectors: np.ndarray) -> MulticastProblem:
    """Discrete-array problem: unit weights, <a, b> = b^H a."""
    c = scenario.config
    weights = np.ones(vectors.shape[1])
    return MulticastProblem(
        gram=gram_from_samples(vectors, weights),
        sigma2=np.array([ch.noise_variance for ch in scenario.channels]),
        group_of=np.array([g for g, _, _ in scenario.users], dtype=np.int64),
        group_sizes=np.full(c.num_groups, c.users_per_group, dtype=np.int64),
        power_budget=c.transmit_power_budget,
        rate_floors=np.array(c.rate_floors, dtype=float),
        basis=vectors,
        weights=weights,
        backend="spda",
    )
