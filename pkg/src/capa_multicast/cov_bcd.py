"""Optimal-beamformer BCD solver for the fixed-ratio subproblem.

For a fixed energy-efficiency ratio `eta`, the subproblem is solved by block
coordinate descent over two blocks:

* {beams, r}: jointly convex once the quadratic transform auxiliaries mu are
  frozen; solved exactly through Lagrangian duality. The dual over the
  per-user multipliers lambda and the power multiplier xi is minimized with
  the ellipsoid method; at each dual point the primal is recovered in closed
  form (r from the log-stationarity expression, beams as a combination of all
  users' conjugated channels obtained from the inverse-kernel coefficients).
* {r, mu}: closed-form updates (mu from the quadratic-transform optimum,
  r from the resulting exact per-group minimum SINR).

The objective R(r) - eta*P(J) is nondecreasing across accepted iterations by
construction: a block step that fails to improve it rolls back and stops.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .beams import BeamCoefficients, all_sinr, beam_user_responses, total_power
from .errors import ConditioningError, InfeasibleProblemError
from .problem import MulticastProblem

LN2 = float(np.log(2.0))

CONDITION_LIMIT = 1e12
LAMBDA_SUM_CLAMP = 1e-12

ELLIPSOID_RADIUS = 1e3
DIAG_BURNIN = 200
DIAG_WINDOW = 200


@dataclass(eq=False)
class DualState:
    lam: np.ndarray        # (K,) multipliers of the per-user SINR constraints
    xi: float              # multiplier of the power budget
    center: np.ndarray     # (K+1,) final ellipsoid center
    shape: np.ndarray      # (K+1, K+1) final ellipsoid shape matrix


@dataclass(eq=False)
class AuxState:
    r: np.ndarray          # (G,) per-group auxiliary SINR targets
    mu: np.ndarray         # (K,) quadratic-transform auxiliaries


@dataclass(eq=False)
class CovTrace:
    objective: list = field(default_factory=list)
    r: list = field(default_factory=list)
    power: list = field(default_factory=list)
    ellipsoid_iters: list = field(default_factory=list)

    def append(self, objective, r, power, ell_iters):
        self.objective.append(float(objective))
        self.r.append(np.asarray(r, dtype=float).copy())
        self.power.append(float(power))
        self.ellipsoid_iters.append(int(ell_iters))

    def __len__(self):
        return len(self.objective)


def group_offsets(problem: MulticastProblem) -> np.ndarray:
    return np.concatenate([[0], np.cumsum(problem.group_sizes)]).astype(np.int64)


def mu_update(beams: BeamCoefficients, problem: MulticastProblem) -> np.ndarray:
    """Closed-form optimal quadratic-transform auxiliary per user."""
    t = beam_user_responses(beams, problem)  # (K, G)
    powers = np.abs(t) ** 2
    own = t[np.arange(problem.num_users), problem.group_of]
    interference = powers.sum(axis=1) - np.abs(own) ** 2
    return own / (interference + problem.sigma2)


def r_update(beams: BeamCoefficients, problem: MulticastProblem) -> np.ndarray:
    """Per-group auxiliary target: the exact minimum SINR in the group."""
    gamma = all_sinr(beams, problem)
    return np.array([np.min(gamma[problem.group_of == g]) for g in range(problem.num_groups)])


def r_dual_opt(lam: np.ndarray, problem: MulticastProblem) -> np.ndarray:
    """Per-group target maximizing log2(1+r) - r*sum(lambda) above the floor."""
    lam = np.asarray(lam, dtype=float)
    offs = group_offsets(problem)
    sums = np.array([np.sum(lam[offs[g]:offs[g + 1]]) for g in range(problem.num_groups)])
    stationary = 1.0 / (LN2 * np.maximum(sums, LAMBDA_SUM_CLAMP)) - 1.0
    return np.maximum(problem.sinr_floors, stationary)


def scaled_gram(mu: np.ndarray, problem: MulticastProblem) -> np.ndarray:
    """Gram matrix of the mu-scaled channels g_i = conj(mu_i) h_i."""
    return np.conj(mu)[:, None] * mu[None, :] * problem.gram


def beam_dual_opt(
    mu: np.ndarray,
    lam: np.ndarray,
    xi: float,
    eta: float,
    problem: MulticastProblem,
    diagnostics: dict | None = None,
) -> BeamCoefficients:
    """Closed-form beams at fixed duals: p-weighted conjugate channels minus the
    inverse-kernel correction over out-of-group users."""
    sc = xi + eta
    if sc <= 0:
        raise ValueError("xi + eta must be positive for the beam closed form")
    lam = np.asarray(lam, dtype=float)
    p = lam / sc
    hg = scaled_gram(mu, problem)
    K = problem.num_users
    coeffs = np.zeros((problem.num_groups, K), dtype=complex)
    worst_resid = 0.0
    worst_cond = 1.0
    for g in range(problem.num_groups):
        ing = problem.group_indices(g)
        out = problem.out_group_indices(g)
        coeffs[g, ing] = p[ing] * mu[ing]
        if out.size:
            corr = np.eye(out.size) + p[out, None] * hg[np.ix_(out, out)]
            cond = float(np.linalg.cond(corr))
            worst_cond = max(worst_cond, cond)
            if cond > CONDITION_LIMIT:
                raise ConditioningError(
                    f"inverse-kernel system for group {g} has condition number {cond:.3e}"
                )
            cmat = np.linalg.inv(corr)
            worst_resid = max(
                worst_resid, float(np.max(np.abs(cmat @ corr - np.eye(out.size))))
            )
            t = hg[np.ix_(out, ing)] @ p[ing]
            beta = cmat @ (p[out] * t)
            coeffs[g, out] = -beta * mu[out]
    if diagnostics is not None:
        diagnostics["identity_residual"] = worst_resid
        diagnostics["condition_number"] = worst_cond
    return BeamCoefficients(coeffs)


def lagrangian_value(
    beams: BeamCoefficients,
    r: np.ndarray,
    mu: np.ndarray,
    lam: np.ndarray,
    xi: float,
    eta: float,
    problem: MulticastProblem,
) -> float:
    """Partial Lagrangian of the {beams, r} subproblem at the given point."""
    y = quadratic_transform_values(beams, mu, problem)
    power = total_power(beams, problem)
    value = float(np.sum(np.log2(1.0 + r))) - eta * power
    value += float(np.sum(lam * (y - r[problem.group_of])))
    value += xi * (problem.power_budget - power)
    return value


def quadratic_transform_values(
    beams: BeamCoefficients, mu: np.ndarray, problem: MulticastProblem
) -> np.ndarray:
    """y per user: 2 Re{conj(mu) * signal} - |mu|^2 (interference + noise)."""
    t = beam_user_responses(beams, problem)
    powers = np.abs(t) ** 2
    own = t[np.arange(problem.num_users), problem.group_of]
    interference = powers.sum(axis=1) - np.abs(own) ** 2
    return 2.0 * np.real(np.conj(mu) * own) - np.abs(mu) ** 2 * (interference + problem.sigma2)


def subgradient(
    beams: BeamCoefficients,
    r: np.ndarray,
    mu: np.ndarray,
    problem: MulticastProblem,
) -> tuple:
    """Dual subgradient: per-user constraint slack and the power slack."""
    y = quadratic_transform_values(beams, mu, problem)
    dlam = y - np.asarray(r, dtype=float)[problem.group_of]
    dxi = problem.power_budget - total_power(beams, problem)
    return dlam, float(dxi)


def dual_value(
    mu: np.ndarray, lam: np.ndarray, xi: float, eta: float, problem: MulticastProblem
) -> float:
    """Dual function: Lagrangian at the closed-form inner maximizers."""
    r = r_dual_opt(lam, problem)
    beams = beam_dual_opt(mu, lam, xi, eta, problem)
    return lagrangian_value(beams, r, mu, lam, xi, eta, problem)


@dataclass(eq=False)
class JrResult:
    beams: BeamCoefficients
    r: np.ndarray
    dual: DualState
    status: int
    iterations: int
    gap: float
    dual_objective: float
    warning: str | None = None


def solve_jr_subproblem(
    mu: np.ndarray,
    eta: float,
    problem: MulticastProblem,
    tol: float = 1e-4,
    max_iter: int = 60_000,
    backend: str | None = None,
) -> JrResult:
    """Solve the convex {beams, r} subproblem at fixed mu via the dual ellipsoid.

    `tol` is the target constraint residual of the recovered primal. The
    primal-from-dual error scales like the square root of the dual gap, so the
    ellipsoid runs to a gap of about tol^2.
    """
    K = problem.num_users
    offs = group_offsets(problem)
    gap_tol = min(max(1e-2 * tol * tol, 1e-13), 1e-6)
    x0 = np.full(K + 1, 1.0 / K)
    x0[K] = 1.0
    q0 = np.eye(K + 1) * ELLIPSOID_RADIUS**2
    xbest, xfin, qfin, gbest, gap, status, iters = kernels.ellipsoid_loop(
        np.ascontiguousarray(problem.gram, dtype=np.complex128),
        np.ascontiguousarray(scaled_gram(mu, problem), dtype=np.complex128),
        np.ascontiguousarray(mu, dtype=np.complex128),
        np.ascontiguousarray(problem.sigma2, dtype=np.float64),
        offs,
        np.ascontiguousarray(problem.sinr_floors, dtype=np.float64),
        float(problem.power_budget),
        float(eta),
        x0,
        q0,
        float(gap_tol),
        int(max_iter),
        DIAG_BURNIN,
        DIAG_WINDOW,
        backend=backend,
    )
    if status == kernels.ELL_INFEASIBLE:
        raise InfeasibleProblemError(
            "rate floors appear unattainable: constraint multipliers grew across a "
            f"{DIAG_WINDOW}-iteration diagnosis window with power to spare"
        )
    lam = xbest[:K]
    xi = float(xbest[K]) / problem.power_budget  # kernel runs in xi*pt coordinates
    r = r_dual_opt(lam, problem)
    beams = beam_dual_opt(mu, lam, xi, eta, problem)
    # certificate-independent sanity check on the recovered primal: a wildly
    # violated constraint set means the fixed-mu subproblem had no feasible
    # point, which the gap bound cannot see
    y = quadratic_transform_values(beams, mu, problem)
    viol = float(np.max((r[problem.group_of] - y) / (1.0 + np.abs(r[problem.group_of]))))
    power = total_power(beams, problem)
    pviol = max(0.0, (power - problem.power_budget) / problem.power_budget)
    if viol > 0.25 or pviol > 0.25:
        raise InfeasibleProblemError(
            f"dual solve returned a primal with constraint violation {max(viol, pviol):.3e}; "
            "the subproblem is infeasible at the supplied auxiliaries"
        )
    warning = None
    if status == kernels.ELL_MAX_ITER:
        warning = f"ellipsoid stopped at max_iter={max_iter} with gap {gap:.3e}"
    elif status == kernels.ELL_DEGENERATE:
        warning = "ellipsoid cut degenerated; returning best center"
    elif max(viol, pviol) > tol:
        warning = f"primal residual {max(viol, pviol):.3e} above target {tol:.1e}"
    return JrResult(
        beams=beams,
        r=r,
        dual=DualState(lam=lam.copy(), xi=xi, center=xfin, shape=qfin),
        status=int(status),
        iterations=int(iters),
        gap=float(gap),
        dual_objective=float(gbest),
        warning=warning,
    )


@dataclass(eq=False)
class CovResult:
    beams: BeamCoefficients
    aux: AuxState
    trace: CovTrace
    converged: bool
    warning: str | None = None


def bcd_objective(beams: BeamCoefficients, r: np.ndarray, eta: float, problem: MulticastProblem) -> float:
    return float(np.sum(np.log2(1.0 + r)) - eta * total_power(beams, problem))


def solve_dinkelbach_subproblem(
    eta: float,
    problem: MulticastProblem,
    warm_beams: BeamCoefficients,
    tol: float = 1e-4,
    ell_tol: float | None = None,
    max_iter: int = 200,
    backend: str | None = None,
    check_warm_start: bool = True,
) -> CovResult:
    """Block-coordinate descent on {beams, r} / {r, mu} until the objective stalls."""
    from .beams import energy_efficiency

    if ell_tol is None:
        ell_tol = min(1e-6, tol * 1e-2)
    if check_warm_start:
        report = energy_efficiency(warm_beams, problem)
        if not report.feasible:
            raise InfeasibleProblemError(
                "warm start violates the rate floors or the power budget"
            )
    beams = warm_beams
    mu = mu_update(beams, problem)
    r = r_update(beams, problem)
    f_prev = bcd_objective(beams, r, eta, problem)
    trace = CovTrace()
    converged = False
    warning = None
    for _ in range(max_iter):
        jr = solve_jr_subproblem(mu, eta, problem, tol=ell_tol, backend=backend)
        if jr.warning and warning is None:
            warning = jr.warning
        mu_new = mu_update(jr.beams, problem)
        r_new = r_update(jr.beams, problem)
        f_new = bcd_objective(jr.beams, r_new, eta, problem)
        if f_new < f_prev:
            # inexact dual solve can no longer improve: keep the incumbent
            converged = True
            break
        beams, mu, r = jr.beams, mu_new, r_new
        trace.append(f_new, r, total_power(beams, problem), jr.iterations)
        if abs(f_new - f_prev) <= tol:
            f_prev = f_new
            converged = True
            break
        f_prev = f_new
    else:
        warning = warning or f"block descent stopped at max_iter={max_iter}"
    return CovResult(beams=beams, aux=AuxState(r=r, mu=mu), trace=trace, converged=converged, warning=warning)
