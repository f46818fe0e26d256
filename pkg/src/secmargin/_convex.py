"""Small log-barrier interior-point solver for KL-type convex programs.

Every problem in the attack and exponent modules has the form

    minimize    sum of KL(U x + a || V x + b) terms
    subject to  A x = b_eq,  G x <= h,  (KL terms) <= lam,  x > 0

over the entries of a coupling (plus, sometimes, an extra pmf). The
barrier method gives a certified duality gap of (#inequalities)/t, and
its central-path objective values are non-increasing in t.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

LN2 = np.log(2.0)


@dataclass
class KLTerm:
    """weight * sum_r [u_r log(u_r / v_r) - u_r + v_r], u = U x + a, v = V x + c."""

    weight: float
    U: np.ndarray
    a: np.ndarray
    V: np.ndarray
    c: np.ndarray

    def args(self, x):
        return self.U @ x + self.a, self.V @ x + self.c

    def in_domain(self, x) -> bool:
        u, v = self.args(x)
        return bool(np.all(u >= 0) and np.all(v > 0))

    def value(self, x) -> float:
        u, v = self.args(x)
        pos = u > 0
        val = np.sum(u[pos] * np.log(u[pos] / v[pos])) - u.sum() + v.sum()
        return self.weight * float(val)

    def grad_hess(self, x):
        u, v = self.args(x)
        safe_u = np.where(u > 0, u, 1.0)
        lu = np.where(u > 0, np.log(safe_u / v), 0.0)
        g = self.U.T @ lu + self.V.T @ (1.0 - u / v)
        Uw = self.U / safe_u[:, None]
        Vw = self.V / v[:, None]
        H = self.U.T @ Uw - self.U.T @ Vw - Vw.T @ self.U + self.V.T @ (self.V * (u / v**2)[:, None])
        return self.weight * g, self.weight * H


def kl_term(weight, n, U=None, a=None, V=None, c=None) -> KLTerm:
    """Build a term, filling absent linear parts with zeros."""
    r = next(len(z) for z in (a, c) if z is not None) if U is None or V is None else U.shape[0]
    U = np.zeros((r, n)) if U is None else np.asarray(U, float)
    V = np.zeros((r, n)) if V is None else np.asarray(V, float)
    a = np.zeros(r) if a is None else np.asarray(a, float)
    c = np.zeros(r) if c is None else np.asarray(c, float)
    return KLTerm(float(weight), U, a, V, c)


def _sum_value(terms, x):
    return sum(t.value(x) for t in terms)


def _sum_grad_hess(terms, x, n):
    g = np.zeros(n)
    H = np.zeros((n, n))
    for t in terms:
        tg, tH = t.grad_hess(x)
        g += tg
        H += tH
    return g, H


@dataclass
class ConvexProblem:
    n: int
    objective: list
    A: np.ndarray
    b: np.ndarray
    G: np.ndarray = None
    h: np.ndarray = None
    constraints: list = field(default_factory=list)  # (terms, bound) pairs, nats

    def __post_init__(self):
        if self.G is None:
            self.G = np.zeros((0, self.n))
            self.h = np.zeros(0)

    @property
    def n_ineq(self) -> int:
        return self.n + self.G.shape[0] + len(self.constraints)

    def strictly_feasible(self, x) -> bool:
        if np.any(x <= 0) or np.any(self.h - self.G @ x <= 0):
            return False
        if not all(t.in_domain(x) for t in self.objective):
            return False
        for terms, bound in self.constraints:
            if not all(t.in_domain(x) for t in terms) or _sum_value(terms, x) >= bound:
                return False
        return True


@dataclass
class ConvexResult:
    x: np.ndarray
    objective: float  # nats
    gap: float  # nats, certified bound on objective - optimum
    iterations: int
    converged: bool
    history: list  # objective (nats) at each central point


# centering stops at this Newton decrement (squared, halved)
DEC_TOL = 1e-11
# smallest line-search step worth taking
MIN_STEP = 1e-6


def _barrier_parts(prob: ConvexProblem, x, t):
    g, H = _sum_grad_hess(prob.objective, x, prob.n)
    g = t * g
    H = t * H
    g -= 1.0 / x
    H[np.diag_indices_from(H)] += 1.0 / x**2
    if prob.G.shape[0]:
        s = prob.h - prob.G @ x
        Gs = prob.G / s[:, None]
        g += Gs.sum(axis=0)
        H += Gs.T @ Gs
    for terms, bound in prob.constraints:
        cg, cH = _sum_grad_hess(terms, x, prob.n)
        s = bound - _sum_value(terms, x)
        g += cg / s
        H += cH / s + np.outer(cg, cg) / s**2
    return g, H


def _barrier_value(prob: ConvexProblem, x, t) -> float:
    if not prob.strictly_feasible(x):
        return np.inf
    val = t * _sum_value(prob.objective, x) - np.sum(np.log(x))
    if prob.G.shape[0]:
        val -= np.sum(np.log(prob.h - prob.G @ x))
    for terms, bound in prob.constraints:
        val -= np.log(bound - _sum_value(terms, x))
    return float(val)


def _newton_direction(H, g, A, r):
    n = H.shape[0]
    p = A.shape[0]
    scale = 1.0 / np.sqrt(np.maximum(np.abs(np.diag(H)), 1e-300))
    Hs = H * scale[:, None] * scale[None, :]
    As = A * scale[None, :]
    K = np.zeros((n + p, n + p))
    K[:n, :n] = Hs
    K[:n, n:] = As.T
    K[n:, :n] = As
    rhs = np.concatenate([-g * scale, r])
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    return sol[:n] * scale


def solve(
    prob: ConvexProblem,
    x0: np.ndarray,
    gap_tol: float = 1e-10,
    mu: float = 20.0,
    max_newton: int = 200,
    max_outer: int = 100,
) -> ConvexResult:
    """Run the barrier method from a strictly feasible ``x0``."""
    x = np.asarray(x0, dtype=float).copy()
    if not prob.strictly_feasible(x):
        raise ValueError("barrier solver needs a strictly feasible starting point")
    m = prob.n_ineq
    t = max(1.0, m / max(abs(_sum_value(prob.objective, x)), 1.0))
    history = []
    iterations = 0
    converged = False
    for _ in range(max_outer):
        for _ in range(max_newton):
            iterations += 1
            g, H = _barrier_parts(prob, x, t)
            dx = _newton_direction(H, g, prob.A, prob.b - prob.A @ x)
            dec = -g @ dx
            if dec / 2 <= DEC_TOL:
                break
            f0 = _barrier_value(prob, x, t)
            step = 1.0
            while step > MIN_STEP:
                xn = x + step * dx
                fn = _barrier_value(prob, xn, t)
                if fn < f0 and fn <= f0 - 0.25 * step * dec:
                    break
                step *= 0.5
            else:
                # at large t the barrier value loses the digits needed to see
                # further decrease; the point is as central as floats allow
                break
            x = xn
        history.append(_sum_value(prob.objective, x))
        if m / t < gap_tol:
            converged = True
            break
        t *= mu
    return ConvexResult(
        x=x,
        objective=_sum_value(prob.objective, x),
        gap=m / t,
        iterations=iterations,
        converged=converged,
        history=history,
    )
