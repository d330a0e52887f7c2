"""First-order primal-dual (Chambolle-Pock) alternative to the barrier solver.

The stacked operator ``K = [continuity; face averaging; identity on w]``
splits the problem into an affine constraint, the separable action density
(handled cell by cell with :func:`prox_action_batch`) and the optional
quadratic terminal cost. Slow to reach tight tolerances; kept for
cross-checking and experimentation.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from ..errors import ConfigError, ConvergenceError
from .interior_point import BarrierResult, DynamicProblem
from .prox import prox_action_batch

CHECK_EVERY = 50


def operator_norm(K, n_iter=50, seed=0) -> float:
    """Largest singular value of ``K`` by power iteration on ``K'K``."""
    v = np.random.default_rng(seed).standard_normal(K.shape[1])
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(n_iter):
        u = K.T @ (K @ v)
        est = np.linalg.norm(u)
        v = u / est
    return float(np.sqrt(est))


def solve_pdhg(problem: DynamicProblem, x0, tol_gap=1e-7, tol_residual=1e-6,
               max_iters=20000, step_primal=None, step_dual=None,
               newton_tol=1e-12, newton_max=50) -> BarrierResult:
    n_rho, n_w = problem.n_rho, problem.n_w
    A, D = problem.avg_var, problem.D
    n_faces = A.shape[0]
    K = sp.vstack([D,
                   sp.hstack([A, sp.csr_matrix((n_faces, n_w))]),
                   sp.hstack([sp.csr_matrix((n_w, n_rho)), sp.identity(n_w)])],
                  format="csr")
    norm = operator_norm(K)
    tau = 0.9 / norm if step_primal is None else step_primal
    sigma = 0.9 / norm if step_dual is None else step_dual
    if tau * sigma * norm ** 2 > 1.0 + 1e-12:
        raise ConfigError(
            f"step sizes violate step_primal*step_dual*|K|^2 <= 1 (|K|={norm:.4g})")

    n_c = D.shape[0]
    solve_terminal = None
    if problem.free_end:
        n = problem.n
        solve_terminal = np.linalg.inv(np.eye(n) + tau * problem.terminal)

    x = np.array(x0, dtype=float)
    x_bar = x.copy()
    y = np.zeros(K.shape[0])
    c0 = problem.avg_fix
    prev = problem.objective(x)
    gap = np.inf
    for it in range(1, max_iters + 1):
        v = y + sigma * (K @ x_bar)
        y_new = np.empty_like(v)
        y_new[:n_c] = v[:n_c] - sigma * problem.b
        va = v[n_c:n_c + n_faces]
        vb = v[n_c + n_faces:]
        za, zb = prox_action_batch(va / sigma + c0, (vb / sigma)[:, None],
                                   problem.coef / sigma, problem.spec,
                                   newton_tol, newton_max)
        y_new[n_c:n_c + n_faces] = va - sigma * (za - c0)
        y_new[n_c + n_faces:] = vb - sigma * zb[:, 0]
        y = y_new
        x_new = x - tau * (K.T @ y)
        if solve_terminal is not None:
            x_new[n_rho - problem.n:n_rho] = solve_terminal @ x_new[n_rho - problem.n:n_rho]
        x_bar = 2.0 * x_new - x
        x = x_new
        if it % CHECK_EVERY == 0:
            fval = problem.objective(x)
            resid = float(np.max(np.abs(D @ x - problem.b)))
            gap = abs(fval - prev) / max(abs(fval), 1e-300)
            prev = fval
            if resid <= tol_residual and gap <= tol_gap:
                return BarrierResult(x, y[:n_c], it, gap, fval)
    raise ConvergenceError("primal-dual iteration cap reached", iterations=max_iters,
                           residual=float(np.max(np.abs(D @ x - problem.b))), gap=gap)
