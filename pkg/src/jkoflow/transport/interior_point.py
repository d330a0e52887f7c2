"""Barrier Newton solver for the discrete dynamic transport problem.

The problem is

    minimize   coef * sum_faces |w|^2 / m(rho_bar)  [+ 1/2 rho_T' R rho_T]
    subject to (rho_{j+1} - rho_j)/dt + div w_j = 0,  rho > 0,

with ``rho_0`` fixed and ``rho_T`` either fixed (distance computation) or
free with the quadratic terminal cost ``R`` (one minimizing-movement
step). Positivity is handled by a logarithmic barrier whose weight is
driven to zero; each barrier subproblem is solved by equality-constrained
Newton on the sparse KKT system. The constraint multiplier is the
space-time potential.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import ConvergenceError, NumericalError
from ..mobility import MOBILITY_FLOOR, MobilitySpec
from ..spectral import TorusGrid
from .operators import SpaceTimeOperators

log = logging.getLogger(__name__)

FRACTION_TO_BOUNDARY = 0.995
ARMIJO = 1e-4
MU_DECREASE = 0.1


@dataclass
class BarrierResult:
    x: np.ndarray
    potential: np.ndarray
    iterations: int
    gap: float
    objective: float


class DynamicProblem:
    """Discrete dynamic problem with a fixed initial slice.

    ``terminal`` is ``None`` for a fixed final slice ``rho1`` or a dense
    symmetric matrix ``R`` for a free final slice with cost
    ``1/2 rho_T' R rho_T``.
    """

    def __init__(self, grid: TorusGrid, n_time: int, spec: MobilitySpec, rho0,
                 rho1=None, terminal=None, coef=None):
        if (rho1 is None) == (terminal is None):
            raise ValueError("give exactly one of rho1 and terminal")
        self.grid, self.n_time, self.spec = grid, n_time, spec
        n = grid.size
        self.n = n
        self.rho0 = np.asarray(rho0, dtype=float).ravel()
        self.rho1 = None if rho1 is None else np.asarray(rho1, dtype=float).ravel()
        self.terminal = terminal
        self.free_end = terminal is not None
        self.nr = n_time if self.free_end else n_time - 1
        dt = 1.0 / n_time
        self.weight = dt * grid.cell_volume
        self.coef = self.weight if coef is None else coef

        ops = SpaceTimeOperators.build(grid, n_time)
        cols = slice(n, (self.nr + 1) * n)
        self.avg_var = ops.avg[:, cols].tocsr()
        self.avg_fix = ops.avg[:, :n] @ self.rho0
        self.dtime_var = ops.dtime[:, cols]
        b = -(ops.dtime[:, :n] @ self.rho0)
        if not self.free_end:
            self.avg_fix = self.avg_fix + ops.avg[:, -n:] @ self.rho1
            b = b - ops.dtime[:, -n:] @ self.rho1
        D = sp.hstack([self.dtime_var, ops.div_w], format="csr")
        if not self.free_end:
            # Summing all rows telescopes to the (fixed) mass difference, so
            # one row is redundant; drop it to keep the KKT matrix regular.
            D, b = D[:-1], b[:-1]
        self.b = b
        self.D = D
        self.ops = ops
        self.n_rho = self.nr * n
        self.n_w = n_time * grid.dim * n

    # -- path <-> vector ------------------------------------------------
    def pack(self, rho_path, w):
        return np.concatenate([np.asarray(rho_path)[1:self.nr + 1].ravel(),
                               np.asarray(w).ravel()])

    def potential_field(self, nu):
        full = np.zeros(self.n_time * self.n)
        full[:nu.size] = nu
        return full.reshape((self.n_time,) + self.grid.shape)

    def unpack(self, x):
        g = self.grid
        rho = np.empty((self.n_time + 1, self.n))
        rho[0] = self.rho0
        rho[1:self.nr + 1] = x[:self.n_rho].reshape(self.nr, self.n)
        if not self.free_end:
            rho[-1] = self.rho1
        w = x[self.n_rho:].reshape((self.n_time, g.dim) + g.shape)
        return rho.reshape((self.n_time + 1,) + g.shape), w

    # -- objective pieces -----------------------------------------------
    def _mobility(self, rho_var):
        rb = np.maximum(self.avg_var @ rho_var + self.avg_fix, 0.0)
        spec = self.spec
        m = spec.evaluate(rb)
        m1 = spec.evaluate(rb, 1)
        m2 = spec.evaluate(rb, 2)
        low = m < MOBILITY_FLOOR
        if np.any(low):
            m = np.where(low, MOBILITY_FLOOR, m)
            m1 = np.where(low, 0.0, m1)
            m2 = np.where(low, 0.0, m2)
        return m, m1, m2

    def objective(self, x):
        rho_var, w = x[:self.n_rho], x[self.n_rho:]
        m = self._mobility(rho_var)[0]
        f = self.coef * np.sum(w * w / m)
        if self.free_end:
            rt = rho_var[-self.n:]
            f += 0.5 * rt @ (self.terminal @ rt)
        return float(f)

    def merit(self, x, mu):
        rho_var = x[:self.n_rho]
        if np.any(rho_var <= 0):
            return np.inf
        return self.objective(x) - mu * self.weight * np.sum(np.log(rho_var))

    def newton_system(self, x, mu, shift=0.0):
        c = self.coef
        rho_var, w = x[:self.n_rho], x[self.n_rho:]
        m, m1, m2 = self._mobility(rho_var)
        g_w = 2.0 * c * w / m
        g_rb = -c * w * w * m1 / m ** 2
        g_rho = self.avg_var.T @ g_rb - mu * self.weight / rho_var
        h_ww = 2.0 * c / m + shift
        h_wr = -2.0 * c * w * m1 / m ** 2
        h_rr = c * w * w * (2.0 * m1 ** 2 - m * m2) / m ** 3
        A = self.avg_var
        H_rr = A.T @ sp.diags(h_rr) @ A + sp.diags(mu * self.weight / rho_var ** 2 + shift)
        if self.free_end:
            rt = rho_var[-self.n:]
            g_rho[-self.n:] += self.terminal @ rt
            tail = sp.csr_matrix(self.terminal)
            pad = sp.block_diag([sp.csr_matrix((self.n_rho - self.n, self.n_rho - self.n)),
                                 tail], format="csr")
            H_rr = H_rr + pad
        H_rw = A.T @ sp.diags(h_wr)
        H = sp.bmat([[H_rr, H_rw], [H_rw.T, sp.diags(h_ww)]], format="csr")
        grad = np.concatenate([g_rho, g_w])
        return grad, H


def _solve_kkt(H, D, grad, resid):
    K = sp.bmat([[H, D.T], [D, None]], format="csc")
    rhs = np.concatenate([-grad, resid])
    try:
        sol = spla.splu(K).solve(rhs)
    except RuntimeError as exc:  # exactly singular factor
        raise NumericalError("singular KKT matrix") from exc
    nx = H.shape[0]
    return sol[:nx], sol[nx:]


def solve_barrier(problem: DynamicProblem, x0, tol_gap=1e-7, tol_residual=1e-6,
                  max_iters=500, start_gap=1e-3) -> BarrierResult:
    """Follow the barrier path from a strictly positive feasible ``x0``.

    ``start_gap`` is the initial barrier duality gap relative to the
    objective; the weight is reduced tenfold per level until the gap is
    below ``tol_gap`` relative.
    """
    x = np.array(x0, dtype=float)
    if np.any(x[:problem.n_rho] <= 0):
        raise NumericalError("barrier start is not strictly positive")
    n_bar = problem.n_rho * problem.weight
    f0 = problem.objective(x)
    potential = np.zeros(problem.D.shape[0])
    if f0 <= 0:
        return BarrierResult(x, potential, 0, 0.0, f0)
    mu = start_gap * f0 / n_bar
    iters = 0
    while True:
        lam_half = np.inf
        # Newton on the current barrier subproblem.
        while True:
            fval = problem.objective(x)
            inner_tol = max(0.1 * mu * n_bar, 1e-14 * abs(fval))
            grad, H = problem.newton_system(x, mu)
            resid = problem.b - problem.D @ x
            dx, nu = _solve_kkt(H, problem.D, grad, resid)
            slope = grad @ dx
            shift = 0.0
            while slope > inner_tol:
                # Indefinite reduced Hessian (convex mobility): regularize.
                shift = 1e-8 * abs(H.diagonal()).max() if shift == 0.0 else 100.0 * shift
                _, Hs = problem.newton_system(x, mu, shift)
                dx, nu = _solve_kkt(Hs, problem.D, grad, resid)
                slope = grad @ dx
                if shift > 1e6 * abs(H.diagonal()).max():
                    raise NumericalError("could not obtain a descent direction")
            potential = nu
            lam_half = -0.5 * slope
            if abs(lam_half) <= inner_tol:
                break
            iters += 1
            if iters > max_iters:
                raise ConvergenceError(
                    "barrier Newton iteration cap reached", iterations=iters,
                    residual=float(np.max(np.abs(resid))),
                    gap=float((mu * n_bar + lam_half) / max(fval, 1e-300)))
            drho = dx[:problem.n_rho]
            neg = drho < 0
            step = 1.0
            if np.any(neg):
                step = min(1.0, FRACTION_TO_BOUNDARY
                           * np.min(-x[:problem.n_rho][neg] / drho[neg]))
            phi = problem.merit(x, mu)
            for _ in range(60):
                trial = x + step * dx
                if problem.merit(trial, mu) <= phi + ARMIJO * step * slope:
                    break
                step *= 0.5
            else:
                log.debug("line search stalled at mu=%g", mu)
                break
            x = trial
        fval = problem.objective(x)
        gap = (mu * n_bar + max(lam_half, 0.0)) / max(fval, 1e-300)
        if gap <= tol_gap:
            resid = float(np.max(np.abs(problem.b - problem.D @ x)))
            if resid > tol_residual:
                raise ConvergenceError("continuity residual above tolerance",
                                       residual=resid, gap=gap)
            return BarrierResult(x, potential, iters, gap, fval)
        if mu * n_bar < 1e-3 * tol_gap * max(fval, 1e-300):
            raise ConvergenceError("barrier path stalled", iterations=iters, gap=gap)
        mu *= MU_DECREASE


def feasible_momentum(grid: TorusGrid, rho_path: np.ndarray, spec: MobilitySpec):
    """Momenta ``w_j = m(rho_bar_j) grad psi_j`` that satisfy the continuity
    equation for a given density path, from one weighted Poisson solve per
    slice."""
    n_time = rho_path.shape[0] - 1
    n = grid.size
    ops = SpaceTimeOperators.build(grid, 1)
    div = ops.div_space
    grad = -div.T
    from .path import face_average
    rb = face_average(rho_path, grid.dim)
    w = np.zeros((n_time, grid.dim) + grid.shape)
    for j in range(n_time):
        m = np.maximum(spec.evaluate(np.maximum(rb[j], 0.0)), MOBILITY_FLOOR).ravel()
        rhs = -(rho_path[j + 1] - rho_path[j]).ravel() * n_time
        if not np.any(rhs):
            continue
        L = (div @ sp.diags(m) @ grad).tolil()
        L[0, :] = np.ones(n)
        rhs = rhs.copy()
        rhs[0] = 0.0
        psi = spla.spsolve(L.tocsc(), rhs)
        w[j] = (m * (grad @ psi)).reshape((grid.dim,) + grid.shape)
    return w
