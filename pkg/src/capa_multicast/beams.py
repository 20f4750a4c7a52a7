"""Beam representation and the performance functionals shared by all solvers.

A beam for group g is stored as complex coefficients over the conjugated user
channels (the optimal pattern provably lies in that span), with an optional
cached evaluation on the raw sample grid. SINR, rates, power, and energy
efficiency are defined here once and reused by both optimizers, the discrete
baseline, and the experiment harness.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .problem import MulticastProblem

FEASIBILITY_RTOL = 1e-6


@dataclass(eq=False)
class BeamCoefficients:
    """Per-group expansion J_g = sum_m coeffs[g, m] * conj(h_m)."""

    coeffs: np.ndarray  # (G, K) complex
    _cache: np.ndarray | None = field(default=None, repr=False)

    @property
    def num_groups(self) -> int:
        return self.coeffs.shape[0]

    def grid_values(self, problem: MulticastProblem) -> np.ndarray:
        """Evaluate all beams on the sample grid, caching the result."""
        if self._cache is None:
            self._cache = self.coeffs @ problem.basis.conj()
        return self._cache

    def refresh_cache(self, problem: MulticastProblem) -> None:
        self._cache = self.coeffs @ problem.basis.conj()

    def cache_residual(self, problem: MulticastProblem) -> float:
        """Max deviation of the cache from the coefficient expansion (0 if absent)."""
        if self._cache is None:
            return 0.0
        fresh = self.coeffs @ problem.basis.conj()
        scale = max(1.0, float(np.max(np.abs(fresh))))
        return float(np.max(np.abs(self._cache - fresh))) / scale

    def scaled(self, factor: float) -> "BeamCoefficients":
        return BeamCoefficients(self.coeffs * factor)

    @staticmethod
    def zeros(problem: MulticastProblem) -> "BeamCoefficients":
        return BeamCoefficients(np.zeros((problem.num_groups, problem.num_users), dtype=complex))


def beam_user_responses(beams: BeamCoefficients, problem: MulticastProblem) -> np.ndarray:
    """T[i, g] = integral of h_i * J_g, computed in coefficient space."""
    # integral h_i J_g = sum_m coeffs[g, m] <h_i, h_m> = (gram @ coeffs^T)[i, g]
    return problem.gram @ beams.coeffs.T  # (K, G)


def sinr(beams: BeamCoefficients, problem: MulticastProblem, g: int, k: int) -> float:
    """SINR of user k in group g under the current beams."""
    i = int(np.flatnonzero(problem.group_of == g)[k])
    t = beam_user_responses(beams, problem)[i]  # (G,)
    sig = abs(t[g]) ** 2
    interference = float(np.sum(np.abs(t) ** 2) - abs(t[g]) ** 2)
    return sig / (interference + problem.sigma2[i])


def all_sinr(beams: BeamCoefficients, problem: MulticastProblem) -> np.ndarray:
    """SINR of every user (flat index order)."""
    t = beam_user_responses(beams, problem)  # (K, G)
    powers = np.abs(t) ** 2
    own = powers[np.arange(problem.num_users), problem.group_of]
    interference = powers.sum(axis=1) - own
    return own / (interference + problem.sigma2)


def group_rate(beams: BeamCoefficients, problem: MulticastProblem, g: int) -> float:
    """Multicast rate of group g: log2(1 + min-user SINR)."""
    gamma = all_sinr(beams, problem)
    return float(np.log2(1.0 + np.min(gamma[problem.group_of == g])))


def group_rates(beams: BeamCoefficients, problem: MulticastProblem) -> np.ndarray:
    gamma = all_sinr(beams, problem)
    return np.array(
        [np.log2(1.0 + np.min(gamma[problem.group_of == g])) for g in range(problem.num_groups)]
    )


def total_power(beams: BeamCoefficients, problem: MulticastProblem) -> float:
    """Sum over groups of the radiated power, as a Gram quadratic form."""
    acc = 0.0
    for g in range(beams.num_groups):
        c = beams.coeffs[g]
        acc += float(np.real(c.conj() @ problem.gram @ c))
    return acc


def total_power_grid(beams: BeamCoefficients, problem: MulticastProblem) -> float:
    """Same power through the raw sample grid; agreement is a standing self-check."""
    values = beams.grid_values(problem)
    return float(np.sum(problem.weights[None, :] * np.abs(values) ** 2))


@dataclass(frozen=True, eq=False)
class PerfReport:
    sinr: np.ndarray          # (K,)
    rates: np.ndarray         # (G,) bit/s/Hz
    power: float
    ee: float
    rate_feasible: np.ndarray  # (G,) bool
    power_feasible: bool

    @property
    def feasible(self) -> bool:
        return bool(self.power_feasible and np.all(self.rate_feasible))

    @property
    def sum_rate(self) -> float:
        return float(np.sum(self.rates))


def energy_efficiency(beams: BeamCoefficients, problem: MulticastProblem) -> PerfReport:
    """Assemble rates, power, EE, and feasibility flags for the current beams."""
    gamma = all_sinr(beams, problem)
    rates = np.array(
        [np.log2(1.0 + np.min(gamma[problem.group_of == g])) for g in range(problem.num_groups)]
    )
    power = total_power(beams, problem)
    ee = float(np.sum(rates) / power) if power > 0 else 0.0
    floors = problem.rate_floors
    rate_ok = rates >= floors - FEASIBILITY_RTOL * np.maximum(1.0, np.abs(floors))
    power_ok = power <= problem.power_budget * (1.0 + FEASIBILITY_RTOL)
    return PerfReport(gamma, rates, power, ee, rate_ok, bool(power_ok))
