"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

The two inner loops that dominate runtime live here:

* `ellipsoid_loop` - cutting-plane search over the dual multipliers of the
  beam design subproblem. Each iteration recovers the primal (auxiliary SINR
  targets from the log-stationarity closed form, beams from the
  inverse-kernel closed form), builds a subgradient, and shrinks the
  ellipsoid. Central cuts; nonnegativity handled by feasibility cuts.
* `power_alloc_loop` - projected supergradient ascent in amplitude variables
  q_g = sqrt(rho_g) for the per-group power allocation subproblem on fixed
  beam directions.

Both are written once in an njit-compatible numpy subset. The numba path
compiles that same body; setting CAPA_KERNELS=numpy (or a failed numba
import) selects the interpreted twin. `bench/kernel_bench.py` compares the
two.
"""

from __future__ import annotations

import os

import numpy as np

LN2 = 0.6931471805599453

# ellipsoid_loop status codes
ELL_CONVERGED = 0
ELL_MAX_ITER = 1
ELL_DEGENERATE = 2
ELL_INFEASIBLE = 3

# power_alloc_loop status codes
PGA_CONVERGED = 0
PGA_MAX_ITER = 1
PGA_INFEASIBLE_START = 3


def _ellipsoid_loop_impl(
    H, Hg, mu, sigma2, offs, gfloor, pt, eta,
    x0, Q0, tol, max_iter, diag_burnin, diag_window,
):
    """Minimize the dual function over (lambda, xi) >= 0 with the ellipsoid method.

    H      : (K, K) complex channel Gram matrix <h_i, h_j>
    Hg     : (K, K) complex scaled Gram <g_i, g_j> = conj(mu_i) mu_j H[i, j]
    mu     : (K,) complex quadratic-transform auxiliaries (fixed)
    offs   : (G+1,) int64 group start offsets into the flat user index
    gfloor : (G,) SINR floors 2^rate_floor - 1
    x0, Q0 : initial center (K+1,) and shape matrix (K+1, K+1)

    The last coordinate is the power multiplier in budget-normalized form,
    xi' = xi * pt, cut by the fractional slack 1 - P/pt; this keeps all cut
    components on comparable scales.

    Returns (x_best, x_final, Q_final, g_best, gap, status, iters).
    """
    K = H.shape[0]
    G = offs.shape[0] - 1
    n = K + 1
    x = x0.copy()
    Q = Q0.copy()
    xbest = x0.copy()
    gbest = np.inf
    a = np.empty(n)
    r = np.empty(G)
    alphaT = np.empty((K, G), np.complex128)
    win_evals = 0
    win_neg = 0
    win_pslack = 0
    win_start_maxlam = 0.0
    evals = 0
    status = ELL_MAX_ITER
    gap = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        objective_cut = False
        jmin = 0
        vmin = x[0]
        for j in range(1, n):
            if x[j] < vmin:
                vmin = x[j]
                jmin = j
        if vmin < 0.0:
            for j in range(n):
                a[j] = 0.0
            a[jmin] = -1.0
        elif x[K] / pt + eta < 1e-100:
            for j in range(n):
                a[j] = 0.0
            a[K] = -1.0
        else:
            objective_cut = True
            xi = x[K] / pt
            sc = xi + eta
            # per-group auxiliary SINR target: stationary point of the
            # log-utility vs. the multiplier mass, clipped at the floor
            for g in range(G):
                ssum = 0.0
                for i in range(offs[g], offs[g + 1]):
                    ssum += x[i]
                if ssum < 1e-12:
                    ssum = 1e-12
                rg = 1.0 / (LN2 * ssum) - 1.0
                if rg < gfloor[g]:
                    rg = gfloor[g]
                r[g] = rg
            # per-group beams: weighted conjugate channels minus the
            # out-of-group correction obtained from the inverse kernel
            for g in range(G):
                i0 = offs[g]
                i1 = offs[g + 1]
                nin = i1 - i0
                nout = K - nin
                if nout > 0:
                    A = np.empty((nout, nout), np.complex128)
                    rhs = np.empty(nout, np.complex128)
                    oa = 0
                    for ia in range(K):
                        if i0 <= ia < i1:
                            continue
                        t = 0.0 + 0.0j
                        for l in range(i0, i1):
                            t += Hg[ia, l] * (x[l] / sc)
                        rhs[oa] = (x[ia] / sc) * t
                        ob = 0
                        for ib in range(K):
                            if i0 <= ib < i1:
                                continue
                            v = (x[ia] / sc) * Hg[ia, ib]
                            if oa == ob:
                                v = v + 1.0
                            A[oa, ob] = v
                            ob += 1
                        oa += 1
                    beta = np.linalg.solve(A, rhs)
                else:
                    beta = np.empty(0, np.complex128)
                oa = 0
                for ia in range(K):
                    if i0 <= ia < i1:
                        alphaT[ia, g] = (x[ia] / sc) * mu[ia]
                    else:
                        alphaT[ia, g] = -beta[oa] * mu[ia]
                        oa += 1
            T = np.dot(H, alphaT)  # T[i, g] = integral h_i J_g
            P = 0.0
            for g in range(G):
                for i in range(K):
                    z = np.conj(alphaT[i, g]) * T[i, g]
                    P += z.real
            gval = xi * (pt - P) - eta * P
            for g in range(G):
                gval += np.log2(1.0 + r[g])
                for i in range(offs[g], offs[g + 1]):
                    own = T[i, g]
                    tot = 0.0
                    for j in range(G):
                        tj = T[i, j]
                        tot += tj.real * tj.real + tj.imag * tj.imag
                    interf = tot - (own.real * own.real + own.imag * own.imag)
                    m2 = mu[i].real * mu[i].real + mu[i].imag * mu[i].imag
                    yv = 2.0 * (np.conj(mu[i]) * own).real - m2 * (interf + sigma2[i])
                    a[i] = yv - r[g]
                    gval += x[i] * a[i]
            a[K] = 1.0 - P / pt
            if gval < gbest:
                gbest = gval
                for j in range(n):
                    xbest[j] = x[j]
            # rate floors that no beam can meet show up as multiplier mass
            # that keeps growing while power stays slack
            evals += 1
            if evals > diag_burnin:
                neg = False
                for i in range(K):
                    if a[i] < 0.0:
                        neg = True
                        break
                maxlam = x[0]
                for i in range(1, K):
                    if x[i] > maxlam:
                        maxlam = x[i]
                if win_evals == 0:
                    win_start_maxlam = maxlam
                win_evals += 1
                if neg:
                    win_neg += 1
                if a[K] > 0.0:
                    win_pslack += 1
                if win_evals >= diag_window:
                    if (
                        2 * win_neg > win_evals
                        and 2 * win_pslack > win_evals
                        and maxlam > 2.0 * win_start_maxlam
                        and maxlam > 10.0
                    ):
                        status = ELL_INFEASIBLE
                        break
                    win_evals = 0
                    win_neg = 0
                    win_pslack = 0
        Qa = np.dot(Q, a)
        den = 0.0
        for j in range(n):
            den += a[j] * Qa[j]
        if not np.isfinite(den) or den <= 0.0:
            status = ELL_DEGENERATE
            break
        sd = np.sqrt(den)
        if objective_cut:
            gap = sd
            if gap < tol:
                status = ELL_CONVERGED
                break
        c1 = 1.0 / ((n + 1.0) * sd)
        for j in range(n):
            x[j] = x[j] - c1 * Qa[j]
        c2 = (n * n) / (n * n - 1.0)
        c3 = 2.0 / ((n + 1.0) * den)
        for jj in range(n):
            for kk in range(n):
                Q[jj, kk] = c2 * (Q[jj, kk] - c3 * Qa[jj] * Qa[kk])
        for jj in range(n):
            for kk in range(jj + 1, n):
                v = 0.5 * (Q[jj, kk] + Q[kk, jj])
                Q[jj, kk] = v
                Q[kk, jj] = v
    return xbest, x, Q, gbest, gap, status, it


def _power_alloc_loop_impl(
    lsig, bq, nq, offs, gfloor, pt, eta, q0, tol, max_iter,
):
    """Maximize sum log2(1+r_g(q)) - eta*|q|^2 over the power amplitudes.

    lsig   : (K,) linear signal coefficient of y for each user
    bq     : (K, G) interference quadratic coefficients (own column zero)
    nq     : (K,) noise term of y per user
    gfloor : (G,) SINR floors; iterates stay floor-feasible throughout

    Returns (q, phi, status, iters).
    """
    K = lsig.shape[0]
    G = offs.shape[0] - 1
    slackv = np.empty(G)
    for g in range(G):
        slackv[g] = 1e-9 * (1.0 + gfloor[g])

    def rates_of(q):
        r = np.empty(G)
        for g in range(G):
            rmin = np.inf
            for u in range(offs[g], offs[g + 1]):
                acc = lsig[u] * q[g] - nq[u]
                for i in range(G):
                    acc -= bq[u, i] * q[i] * q[i]
                if acc < rmin:
                    rmin = acc
            r[g] = rmin
        return r

    def is_feasible(r):
        for g in range(G):
            if r[g] < gfloor[g] - slackv[g]:
                return False
        return True

    def phi_of(q, r):
        s = 0.0
        for g in range(G):
            s += np.log2(1.0 + r[g])
            s -= eta * q[g] * q[g]
        return s

    def project(v):
        out = np.empty(G)
        ss = 0.0
        for g in range(G):
            w = v[g] if v[g] > 0.0 else 0.0
            out[g] = w
            ss += w * w
        if ss > pt:
            scl = np.sqrt(pt / ss)
            for g in range(G):
                out[g] *= scl
        return out

    q = project(q0)
    r = rates_of(q)
    if not is_feasible(r):
        return q, phi_of(q, r), PGA_INFEASIBLE_START, 0
    phi = phi_of(q, r)
    status = PGA_MAX_ITER
    stall = 0
    tprev = -1.0
    it = 0
    for it in range(1, max_iter + 1):
        # supergradient: average the gradients of all near-minimal users
        grad = np.zeros(G)
        for g in range(G):
            thresh = r[g] + 1e-12 * (1.0 + abs(r[g]))
            tmp = np.zeros(G)
            cnt = 0
            for u in range(offs[g], offs[g + 1]):
                yu = lsig[u] * q[g] - nq[u]
                for i in range(G):
                    yu -= bq[u, i] * q[i] * q[i]
                if yu <= thresh:
                    cnt += 1
                    tmp[g] += lsig[u]
                    for i in range(G):
                        tmp[i] -= 2.0 * bq[u, i] * q[i]
            gw = 1.0 / ((1.0 + r[g]) * LN2)
            for i in range(G):
                grad[i] += gw * tmp[i] / cnt
        for g in range(G):
            grad[g] -= 2.0 * eta * q[g]
        gnorm = 0.0
        qnorm = 0.0
        for g in range(G):
            gnorm += grad[g] * grad[g]
            qnorm += q[g] * q[g]
        gnorm = np.sqrt(gnorm)
        qnorm = np.sqrt(qnorm)
        # stationarity probe (ignores floors; floor-bound optima stop via stall)
        tau = 1e-6 * (1.0 + qnorm) / (1.0 + gnorm)
        probe = project(q + tau * grad)
        res = 0.0
        for g in range(G):
            res += (probe[g] - q[g]) * (probe[g] - q[g])
        res = np.sqrt(res) / tau
        if res <= tol * (1.0 + gnorm):
            status = PGA_CONVERGED
            break
        t = tprev * 2.0 if tprev > 0.0 else (1.0 + qnorm) / (1.0 + gnorm)
        accepted = False
        improvement = 0.0
        for _ in range(60):
            cand = project(q + t * grad)
            theta = 1.0
            ok = False
            candt = cand
            rc = r
            for _ in range(50):
                candt = q + theta * (cand - q)
                rc = rates_of(candt)
                if is_feasible(rc):
                    ok = True
                    break
                theta *= 0.5
            if ok:
                phic = phi_of(candt, rc)
                dirdot = 0.0
                for g in range(G):
                    dirdot += grad[g] * (candt[g] - q[g])
                bound = dirdot if dirdot > 0.0 else 0.0
                if phic >= phi + 1e-4 * bound and phic >= phi:
                    improvement = phic - phi
                    q = candt
                    r = rc
                    phi = phic
                    accepted = True
                    tprev = t
                    break
            t *= 0.5
        if not accepted:
            stall += 1
            tprev = -1.0
        elif improvement <= tol * (1.0 + abs(phi)):
            stall += 1
        else:
            stall = 0
        if stall >= 5:
            status = PGA_CONVERGED
            break
    return q, phi, status, it


_IMPLS = {
    "ellipsoid": _ellipsoid_loop_impl,
    "power": _power_alloc_loop_impl,
}

_COMPILED: dict = {}


def available_backends() -> tuple:
    try:
        import numba  # noqa: F401
        return ("numba", "numpy")
    except ImportError:
        return ("numpy",)


def active_backend() -> str:
    """Backend selected by the CAPA_KERNELS env var (default: numba if importable)."""
    choice = os.environ.get("CAPA_KERNELS", "").strip().lower()
    if choice in ("numpy", "python"):
        return "numpy"
    if choice == "numba":
        return "numba"
    return available_backends()[0]


def get_kernel(name: str, backend: str | None = None):
    backend = backend or active_backend()
    if backend == "numpy":
        return _IMPLS[name]
    if backend != "numba":
        raise ValueError(f"unknown kernel backend {backend!r}")
    key = (name, "numba")
    if key not in _COMPILED:
        from numba import njit

        _COMPILED[key] = njit(cache=True)(_IMPLS[name])
    return _COMPILED[key]


def ellipsoid_loop(*args, backend: str | None = None):
    return get_kernel("ellipsoid", backend)(*args)


def power_alloc_loop(*args, backend: str | None = None):
    return get_kernel("power", backend)(*args)
