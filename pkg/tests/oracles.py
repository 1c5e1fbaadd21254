"""Independent reference solvers used by the tests."""

import cvxpy as cp
import numpy as np


def let_primal_cvxpy(mu1, mu2, cost):
    """Logarithmic Entropy-Transport value by a generic conic solver.

    ``mu1``, ``mu2`` are positive weight vectors and ``cost`` may hold ``inf``.
    """
    n, m = cost.shape
    fin = np.isfinite(cost)
    g = cp.Variable((n, m), nonneg=True)
    cons = [g[~fin] == 0] if (~fin).any() else []
    c = np.where(fin, cost, 0.0)
    m1 = cp.sum(g, axis=1)
    m2 = cp.sum(g, axis=0)
    obj = (cp.sum(cp.rel_entr(m1, mu1)) - cp.sum(m1) + mu1.sum()
           + cp.sum(cp.rel_entr(m2, mu2)) - cp.sum(m2) + mu2.sum()
           + cp.sum(cp.multiply(c, g)))
    prob = cp.Problem(cp.Minimize(obj), cons)
    prob.solve(solver=cp.CLARABEL)
    return float(prob.value)


def bl_cvxpy(w, dist):
    """Bounded-Lipschitz norm of the signed weights ``w`` by an LP in ``(ζ, s, L)``."""
    n = len(w)
    z = cp.Variable(n)
    s = cp.Variable(nonneg=True)
    lip = cp.Variable(nonneg=True)
    cons = [cp.abs(z) <= s, s + lip <= 1]
    for i in range(n):
        for j in range(i + 1, n):
            cons.append(cp.abs(z[i] - z[j]) <= lip * dist[i, j])
    prob = cp.Problem(cp.Maximize(w @ z), cons)
    prob.solve(solver=cp.CLARABEL)
    return float(prob.value)
