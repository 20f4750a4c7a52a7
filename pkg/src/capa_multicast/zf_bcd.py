"""Low-complexity solver: representative users, zero-forcing patterns, power BCD.

One user per group is selected by the largest sum of normalized intra-group
channel-correlation magnitudes (ties: smallest inter-group sum, then lowest
index). The per-group patterns are the rows of the inverse representative Gram
matrix expanded over conjugated representative channels, which nulls every
other group's representative exactly. What remains is a per-group power
allocation, alternated with closed-form auxiliary updates.

The power-allocation machinery works for any fixed unit-power direction set
described by its user-response table, so it is reused to re-optimize group
powers along arbitrary beam directions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .beams import BeamCoefficients
from .errors import ConditioningError, InfeasibleProblemError
from .problem import MulticastProblem

CONDITION_LIMIT = 1e12
TIE_RTOL = 1e-9


@dataclass(eq=False)
class RepresentativeSet:
    indices: np.ndarray      # (G,) flat index of the selected user per group
    correlation: np.ndarray  # (K, K) normalized |<h_i, h_j>| table
    intra: np.ndarray        # (K,) sum of intra-group correlations per user
    inter: np.ndarray        # (K,) sum of inter-group correlations per user


def correlation_table(problem: MulticastProblem) -> np.ndarray:
    norms = np.sqrt(np.real(np.diag(problem.gram)))
    return np.abs(problem.gram) / np.outer(norms, norms)


def select_representatives(problem: MulticastProblem) -> RepresentativeSet:
    """Pick one user per group: argmax intra-group correlation sum, ties broken
    by argmin inter-group sum, then by lowest flat index."""
    corr = correlation_table(problem)
    K = problem.num_users
    same = problem.group_of[:, None] == problem.group_of[None, :]
    off_diag = ~np.eye(K, dtype=bool)
    intra = np.sum(np.where(same & off_diag, corr, 0.0), axis=1)
    inter = np.sum(np.where(~same, corr, 0.0), axis=1)
    indices = np.empty(problem.num_groups, dtype=np.int64)
    for g in range(problem.num_groups):
        members = problem.group_indices(g)
        o = intra[members]
        best = np.max(o)
        tied = members[o >= best - TIE_RTOL * max(1.0, abs(best))]
        if tied.size > 1:
            ot = inter[tied]
            low = np.min(ot)
            tied = tied[ot <= low + TIE_RTOL * max(1.0, abs(low))]
        indices[g] = tied[0]
    return RepresentativeSet(indices, corr, intra, inter)


@dataclass(eq=False)
class ZfBasis:
    rep: RepresentativeSet
    beta: np.ndarray          # (G, G) column g = unnormalized pattern coefficients
    pattern_power: np.ndarray  # (G,) power of each unnormalized pattern
    cross: np.ndarray         # (K, G) c[u, i] = integral h_u * Z_i
    directions: BeamCoefficients  # unit-power patterns in global coefficients


def build_zf_basis(rep: RepresentativeSet, problem: MulticastProblem) -> ZfBasis:
    """Invert the representative Gram matrix and tabulate all cross terms."""
    idx = rep.indices
    h_ot = problem.gram[np.ix_(idx, idx)]
    cond = float(np.linalg.cond(h_ot))
    if cond > CONDITION_LIMIT:
        raise ConditioningError(
            f"representative channels are near-collinear (condition number {cond:.3e})"
        )
    beta = np.linalg.inv(h_ot)  # column g solves H_ot beta_g = e_g
    power = np.real(np.einsum("jg,jk,kg->g", beta.conj(), h_ot, beta))
    cross = problem.gram[:, idx] @ beta  # (K, G)
    coeffs = np.zeros((problem.num_groups, problem.num_users), dtype=complex)
    for g in range(problem.num_groups):
        coeffs[g, idx] = beta[:, g] / np.sqrt(power[g])
    return ZfBasis(rep, beta, power, cross, BeamCoefficients(coeffs))


@dataclass(eq=False)
class DirectionSet:
    """Unit-power beam directions described by their user-response table."""

    response: np.ndarray      # (K, G) t[u, i] = integral h_u * direction_i
    directions: BeamCoefficients

    @staticmethod
    def from_zf(basis: ZfBasis) -> "DirectionSet":
        response = basis.cross / np.sqrt(basis.pattern_power)[None, :]
        return DirectionSet(response, basis.directions)

    @staticmethod
    def from_beams(beams: BeamCoefficients, problem: MulticastProblem) -> "DirectionSet":
        """Normalize arbitrary nonzero beams to unit power."""
        from .beams import beam_user_responses

        power = np.array(
            [np.real(c.conj() @ problem.gram @ c) for c in beams.coeffs]
        )
        if np.any(power <= 0):
            raise ValueError("all beams must carry power to define directions")
        scale = 1.0 / np.sqrt(power)
        unit = BeamCoefficients(beams.coeffs * scale[:, None])
        response = beam_user_responses(unit, problem)
        return DirectionSet(response, unit)


def direction_sinr(rho: np.ndarray, dirs: DirectionSet, problem: MulticastProblem) -> np.ndarray:
    """Exact per-user SINR when group i transmits with power rho_i along its direction."""
    gains = np.abs(dirs.response) ** 2  # (K, G)
    own = gains[np.arange(problem.num_users), problem.group_of]
    sig = rho[problem.group_of] * own
    interference = gains @ rho - sig
    return sig / (interference + problem.sigma2)


def zf_mu_update(rho: np.ndarray, dirs: DirectionSet, problem: MulticastProblem) -> np.ndarray:
    """Real nonnegative auxiliary: sqrt(signal) over interference-plus-noise."""
    gains = np.abs(dirs.response) ** 2
    own_amp = np.abs(dirs.response[np.arange(problem.num_users), problem.group_of])
    interference = gains @ rho - rho[problem.group_of] * own_amp**2
    return np.sqrt(rho[problem.group_of]) * own_amp / (interference + problem.sigma2)


def zf_r_update(rho: np.ndarray, dirs: DirectionSet, problem: MulticastProblem) -> np.ndarray:
    gamma = direction_sinr(rho, dirs, problem)
    return np.array([np.min(gamma[problem.group_of == g]) for g in range(problem.num_groups)])


def floors_met(rho: np.ndarray, dirs: DirectionSet, problem: MulticastProblem) -> bool:
    # slack strictly looser than the 1e-9*(1+floor) kept by the power iteration,
    # so a returned allocation always re-enters cleanly
    r = zf_r_update(rho, dirs, problem)
    return bool(np.all(r >= problem.sinr_floors - 1e-8 * (1.0 + problem.sinr_floors)))


def min_floor_power_allocation(
    dirs: DirectionSet,
    problem: MulticastProblem,
    max_iter: int = 5000,
    rtol: float = 1e-13,
) -> np.ndarray:
    """Minimal group powers meeting every SINR floor along the given directions.

    Monotone interference-function iteration from zero power; diverging past
    the budget (or any dead own-channel gain) means the floors are unattainable
    with these directions.
    """
    gains = np.abs(dirs.response) ** 2  # (K, G)
    users = np.arange(problem.num_users)
    own = gains[users, problem.group_of]
    floors_u = problem.sinr_floors[problem.group_of]
    if np.any((own <= 0) & (floors_u > 0)):
        raise InfeasibleProblemError(
            "a group's beam direction carries no gain toward one of its users"
        )
    cross = gains.copy()
    cross[users, problem.group_of] = 0.0
    rho = np.zeros(problem.num_groups)
    for _ in range(max_iter):
        need = floors_u * (cross @ rho + problem.sigma2) / np.where(own > 0, own, 1.0)
        new = np.array(
            [np.max(need[problem.group_of == g], initial=0.0) for g in range(problem.num_groups)]
        )
        if np.sum(new) > problem.power_budget * (1 + 1e-9):
            raise InfeasibleProblemError(
                "rate floors cannot be met within the power budget on these directions"
            )
        if np.all(np.abs(new - rho) <= rtol * np.maximum(new, 1e-300)):
            rho = new
            break
        rho = new
    # nudge off the boundary so downstream floor checks see clean feasibility
    scale = min(1.0 + 1e-6, problem.power_budget / max(np.sum(rho), 1e-300))
    rho = rho * max(scale, 1.0)
    if not floors_met(rho, dirs, problem):
        raise InfeasibleProblemError(
            "floor-meeting power iteration failed to converge to a feasible point"
        )
    return rho


def feasible_start_rho(dirs: DirectionSet, problem: MulticastProblem) -> np.ndarray:
    """Evenly split budget when that meets the floors, else the minimal
    floor-meeting allocation."""
    uniform = np.full(problem.num_groups, problem.power_budget / problem.num_groups)
    if floors_met(uniform, dirs, problem):
        return uniform
    return min_floor_power_allocation(dirs, problem)


def transform_values(
    mu_t: np.ndarray, rho: np.ndarray, dirs: DirectionSet, problem: MulticastProblem
) -> np.ndarray:
    """y per user for the power-allocation reformulation at fixed auxiliaries."""
    gains = np.abs(dirs.response) ** 2
    own_amp = np.abs(dirs.response[np.arange(problem.num_users), problem.group_of])
    interference = gains @ rho - rho[problem.group_of] * own_amp**2
    return (
        2.0 * mu_t * np.sqrt(rho[problem.group_of]) * own_amp
        - mu_t**2 * (interference + problem.sigma2)
    )


def solve_power_allocation(
    mu_t: np.ndarray,
    eta: float,
    dirs: DirectionSet,
    problem: MulticastProblem,
    rho0: np.ndarray,
    tol: float = 1e-9,
    max_iter: int = 5000,
    backend: str | None = None,
) -> tuple:
    """Projected supergradient ascent in q = sqrt(rho) from a floor-feasible start.

    Returns (rho, r, iterations).
    """
    from .cov_bcd import group_offsets

    gains = np.abs(dirs.response) ** 2  # (K, G)
    own_amp = np.abs(dirs.response[np.arange(problem.num_users), problem.group_of])
    lsig = 2.0 * mu_t * own_amp
    bq = mu_t[:, None] ** 2 * gains
    bq[np.arange(problem.num_users), problem.group_of] = 0.0
    nq = mu_t**2 * problem.sigma2
    q, phi, status, iters = kernels.power_alloc_loop(
        np.ascontiguousarray(lsig, dtype=np.float64),
        np.ascontiguousarray(bq, dtype=np.float64),
        np.ascontiguousarray(nq, dtype=np.float64),
        group_offsets(problem),
        np.ascontiguousarray(problem.sinr_floors, dtype=np.float64),
        float(problem.power_budget),
        float(eta),
        np.sqrt(np.maximum(np.asarray(rho0, dtype=np.float64), 0.0)),
        float(tol),
        int(max_iter),
        backend=backend,
    )
    if status == kernels.PGA_INFEASIBLE_START:
        raise InfeasibleProblemError(
            "power allocation started from a point violating the rate floors"
        )
    rho = q**2
    y = transform_values(mu_t, rho, dirs, problem)
    r = np.array(
        [np.min(y[problem.group_of == g]) for g in range(problem.num_groups)]
    )
    return rho, r, int(iters)


@dataclass(eq=False)
class ZfAuxState:
    rho: np.ndarray
    mu_t: np.ndarray
    r: np.ndarray


@dataclass(eq=False)
class ZfTrace:
    objective: list = field(default_factory=list)
    r: list = field(default_factory=list)
    power: list = field(default_factory=list)
    inner_iters: list = field(default_factory=list)

    def append(self, objective, r, power, iters):
        self.objective.append(float(objective))
        self.r.append(np.asarray(r, dtype=float).copy())
        self.power.append(float(power))
        self.inner_iters.append(int(iters))

    def __len__(self):
        return len(self.objective)


@dataclass(eq=False)
class ZfResult:
    rho: np.ndarray
    aux: ZfAuxState
    trace: ZfTrace
    beams: BeamCoefficients
    converged: bool
    warning: str | None = None


def power_objective(rho: np.ndarray, r: np.ndarray, eta: float) -> float:
    return float(np.sum(np.log2(1.0 + r)) - eta * np.sum(rho))


def solve_power_dinkelbach_subproblem(
    eta: float,
    dirs: DirectionSet,
    problem: MulticastProblem,
    rho0: np.ndarray,
    tol: float = 1e-4,
    max_iter: int = 200,
    backend: str | None = None,
) -> ZfResult:
    """Alternate the convex power step with closed-form auxiliary updates."""
    rho = np.asarray(rho0, dtype=float).copy()
    r = zf_r_update(rho, dirs, problem)
    if not floors_met(rho, dirs, problem):
        raise InfeasibleProblemError("initial power allocation violates the rate floors")
    mu_t = zf_mu_update(rho, dirs, problem)
    f_prev = power_objective(rho, r, eta)
    trace = ZfTrace()
    converged = False
    warning = None
    for _ in range(max_iter):
        rho_new, _, iters = solve_power_allocation(
            mu_t, eta, dirs, problem, rho, backend=backend
        )
        mu_new = zf_mu_update(rho_new, dirs, problem)
        r_new = zf_r_update(rho_new, dirs, problem)
        f_new = power_objective(rho_new, r_new, eta)
        if f_new < f_prev:
            converged = True
            break
        rho, mu_t, r = rho_new, mu_new, r_new
        trace.append(f_new, r, float(np.sum(rho)), iters)
        if abs(f_new - f_prev) <= tol:
            f_prev = f_new
            converged = True
            break
        f_prev = f_new
    else:
        warning = f"power-allocation descent stopped at max_iter={max_iter}"
    beams = BeamCoefficients(np.sqrt(rho)[:, None] * dirs.directions.coeffs)
    return ZfResult(
        rho=rho,
        aux=ZfAuxState(rho=rho, mu_t=mu_t, r=r),
        trace=trace,
        beams=beams,
        converged=converged,
        warning=warning,
    )
