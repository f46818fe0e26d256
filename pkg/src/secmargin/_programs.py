"""Coupling programs shared by the attack and exponent modules.

Two shapes occur:

* fixed-marginal projections: one marginal of the coupling is pinned and a
  divergence of the other marginal is minimized under a budget (the
  attacker's problem, and the lambda -> 0 exponent after transposition);
* free couplings: both marginals move, coupled through divergence terms
  and possibly a divergence-ball constraint (exponents with lambda > 0 and
  the training-data exponents).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ._convex import LN2, ConvexProblem, kl_term, solve

#: Certified gap targets, in bits.
GAP_TOL = 1e-10
DEGENERATE_TOL = 1e-12


class ConvergenceWarning(RuntimeWarning):
    """The interior-point solver stopped before reaching its gap target."""


@dataclass
class CouplingSolution:
    flow: np.ndarray | None  # full k x m matrix (or None when infeasible)
    extra: np.ndarray | None  # auxiliary pmf (training-side R), full length
    objective_bits: float
    gap_bits: float
    iterations: int
    converged: bool
    history_bits: list


class _Layout:
    """Index bookkeeping between a k x m mask and the solver's vector."""

    def __init__(self, mask: np.ndarray):
        self.shape = mask.shape
        self.ii, self.jj = np.nonzero(mask)
        self.n = self.ii.size
        k, m = mask.shape
        self.R = np.zeros((k, self.n))
        self.R[self.ii, np.arange(self.n)] = 1.0
        self.C = np.zeros((m, self.n))
        self.C[self.jj, np.arange(self.n)] = 1.0

    def vec(self, S: np.ndarray) -> np.ndarray:
        return S[self.ii, self.jj]

    def mat(self, x: np.ndarray) -> np.ndarray:
        S = np.zeros(self.shape)
        S[self.ii, self.jj] = x
        return S


def _finish(res, layout, nvars_s, extra_len=None, extra_idx=None) -> CouplingSolution:
    if not res.converged:
        warnings.warn(
            f"interior-point solver stopped with gap {res.gap / LN2:.3g} bits "
            f"after {res.iterations} Newton steps",
            ConvergenceWarning,
            stacklevel=3,
        )
    extra = None
    if extra_len is not None:
        extra = np.zeros(extra_len)
        extra[extra_idx] = res.x[nvars_s:]
    return CouplingSolution(
        flow=layout.mat(res.x[:nvars_s]),
        extra=extra,
        objective_bits=max(res.objective, 0.0) / LN2,
        gap_bits=res.gap / LN2,
        iterations=res.iterations,
        converged=res.converged,
        history_bits=[h / LN2 for h in res.history],
    )


def _trivial(flow, objective_bits, extra=None) -> CouplingSolution:
    return CouplingSolution(flow, extra, objective_bits, 0.0, 0, True, [objective_bits])


def _row_min_plan(fixed, d, mask):
    """Cheapest plan moving each row's mass to its cheapest allowed cell."""
    dm = np.where(mask, d, np.inf)
    best = dm.argmin(axis=1)
    S = np.zeros(d.shape)
    rows = np.nonzero(fixed > 0)[0]
    S[rows, best[rows]] = fixed[rows]
    return S, float(np.sum(fixed[rows] * dm[rows, best[rows]]))


def _restrict_budget(fixed, d, mask, l_max):
    """Shrink the mask when the budget leaves no strict interior.

    Returns ``(mask, use_budget)`` or ``None`` when no plan fits the budget.
    """
    if l_max is None:
        return mask, False
    if not np.all(mask[fixed > 0].any(axis=1)):
        return None
    _, c_min = _row_min_plan(fixed, d, mask)
    slack = l_max - c_min
    if slack > DEGENERATE_TOL * (1.0 + abs(l_max)):
        return mask, True
    if slack < -DEGENERATE_TOL * (1.0 + abs(l_max)):
        return None
    # budget exactly consumed: each row may only use its cheapest cells
    dm = np.where(mask, d, np.inf)
    rowmin = dm.min(axis=1, keepdims=True)
    return mask & (dm <= rowmin + DEGENERATE_TOL), False


def project_fixed_marginal(
    fixed: np.ndarray,
    ref: np.ndarray,
    d: np.ndarray,
    l_max: float | None,
    mask: np.ndarray,
    c: float | None = None,
) -> CouplingSolution:
    """Minimize a divergence of the free (column) marginal of a coupling.

    The rows of the coupling are pinned to ``fixed``. With ``c is None`` the
    objective is D(S_col || ref); otherwise it is h_c(S_col, ref). The
    budget ``sum d * S <= l_max`` applies when ``l_max`` is not None; the
    support is limited to ``mask``.
    """
    k, m = d.shape
    mask = mask & (fixed[:, None] > 0)
    if c is None:
        mask = mask & (ref[None, :] > 0)
    restricted = _restrict_budget(fixed, d, mask, l_max)
    if restricted is None or not np.all(mask[fixed > 0].any(axis=1)):
        S = None
        if np.all(mask[fixed > 0].any(axis=1)):
            S = _row_min_plan(fixed, d, mask)[0]
        return _trivial(S, np.inf)
    mask, use_budget = restricted

    lay = _Layout(mask)
    n = lay.n
    rows = np.nonzero(fixed > 0)[0]
    A = lay.R[rows]
    b = fixed[rows]
    G = h = None
    if use_budget:
        G = lay.vec(d)[None, :]
        h = np.array([l_max])

    # a single allowed cell per row leaves nothing to optimize
    if n == rows.size:
        S = lay.mat(b @ A)
        z = S.sum(axis=0)
        return _trivial(S, _objective_bits(z, ref, c))

    if c is None:
        keep = ref > 0
        objective = [kl_term(1.0, n, U=lay.C[keep], c=ref[keep])]
    else:
        keep = (ref > 0) | mask.any(axis=0)
        V = lay.C[keep] / (1.0 + c)
        cv = c * ref[keep] / (1.0 + c)
        objective = [
            kl_term(1.0, n, U=lay.C[keep], V=V, c=cv),
            kl_term(c, n, a=ref[keep], V=V, c=cv),
        ]
    prob = ConvexProblem(n, objective, A, b, G, h)

    S_min, c_min = _row_min_plan(fixed, d, mask)
    counts = mask.sum(axis=1)
    S_uni = np.where(mask, (fixed / np.maximum(counts, 1))[:, None], 0.0)
    theta = 1.0
    if use_budget:
        c_uni = float(np.sum(S_uni * d))
        if c_uni >= l_max:
            theta = 0.5 * (l_max - c_min) / (c_uni - c_min)
    x0 = lay.vec((1.0 - theta) * S_min + theta * S_uni)
    res = solve(prob, x0, gap_tol=GAP_TOL * LN2)
    sol = _finish(res, lay, n)
    sol.objective_bits = _objective_bits(sol.flow.sum(axis=0), ref, c)
    return sol


def _objective_bits(z, ref, c):
    from .divergence import h_c_bits, kl_bits

    return kl_bits(z, ref) if c is None else h_c_bits(z, ref, c)


def free_coupling(
    p_x: np.ndarray,
    p_y: np.ndarray,
    d: np.ndarray,
    l_max: float | None,
    band: np.ndarray,
    lam: float | None = None,
    c: float | None = None,
) -> CouplingSolution:
    """Exponent programs where both marginals of the coupling are free.

    Rows index the attacked pmf P (objective D(P || p_y)), columns index the
    pmf Q it is moved onto. Cases:

    * ``c is None``: Q is tied to p_x through D(Q || p_x) <= lam;
    * ``c`` given, ``lam is None``: objective gains c D(Q || p_x);
    * ``c`` and ``lam`` given: an extra pmf R enters with c D(R || p_x)
      and the constraint h_c(Q, R) <= lam.
    """
    k, m = d.shape
    rows_ok = p_y > 0
    cols_ok = p_x > 0 if (c is None or lam is None) else np.ones(m, dtype=bool)
    mask = band & rows_ok[:, None] & cols_ok[None, :]
    use_budget = l_max is not None
    if use_budget and l_max <= DEGENERATE_TOL:
        mask = mask & (d <= DEGENERATE_TOL)
        use_budget = False
    if not mask.any():
        return _trivial(None, np.inf)

    # start from Q = p_x restricted to columns that can be reached
    reach = mask.any(axis=0) & (p_x > 0)
    q0 = np.where(reach, p_x, 0.0)
    kept = q0.sum()
    if kept <= 0:
        return _trivial(None, np.inf)
    q0 = q0 / kept
    sub = mask & reach[None, :]
    S_min, c_min = _row_min_plan(q0, d.T, sub.T)
    S_min = S_min.T
    counts = sub.sum(axis=0)
    S_uni = np.where(sub, (q0 / np.maximum(counts, 1))[None, :], 0.0)
    theta = 1.0
    if use_budget:
        if c_min >= l_max:
            warnings.warn("no strictly feasible starting point found", ConvergenceWarning, stacklevel=2)
            return CouplingSolution(None, None, np.nan, np.inf, 0, False, [])
        c_uni = float(np.sum(S_uni * d))
        if c_uni >= l_max:
            theta = 0.5 * (l_max - c_min) / (c_uni - c_min)
    base = (1.0 - theta) * S_min + theta * S_uni
    spread = np.where(mask, 1.0, 0.0) / mask.sum()

    lay = _Layout(mask)
    ns = lay.n
    objective = [kl_term(1.0, ns, U=lay.R[rows_ok], c=p_y[rows_ok])]
    constraints = []
    G = h = None
    extra_len = extra_idx = None

    if c is None:
        colk = p_x > 0
        constraints.append(([kl_term(1.0, ns, U=lay.C[colk], c=p_x[colk])], lam * LN2))
        n = ns
        A = np.ones((1, n))
        b = np.array([1.0])
    elif lam is None:
        colk = p_x > 0
        objective.append(kl_term(c, ns, U=lay.C[colk], c=p_x[colk]))
        n = ns
        A = np.ones((1, n))
        b = np.array([1.0])
    else:
        ridx = np.nonzero(p_x > 0)[0]
        nr = ridx.size
        n = ns + nr
        extra_len, extra_idx = m, ridx
        Rsel = np.zeros((m, nr))
        Rsel[ridx, np.arange(nr)] = 1.0
        CQ = np.hstack([lay.C, np.zeros((m, nr))])
        CR = np.hstack([np.zeros((m, ns)), Rsel])
        objective = [
            kl_term(1.0, n, U=np.hstack([lay.R[rows_ok], np.zeros((rows_ok.sum(), nr))]), c=p_y[rows_ok]),
            kl_term(c, n, U=CR[ridx], c=p_x[ridx]),
        ]
        keep = mask.any(axis=0) | (p_x > 0)
        V = (CQ[keep] + c * CR[keep]) / (1.0 + c)
        constraints.append(
            ([kl_term(1.0, n, U=CQ[keep], V=V), kl_term(c, n, U=CR[keep], V=V)], lam * LN2)
        )
        A = np.zeros((2, n))
        A[0, :ns] = 1.0
        A[1, ns:] = 1.0
        b = np.array([1.0, 1.0])
    if use_budget:
        G = np.zeros((1, n))
        G[0, :ns] = lay.vec(d)
        h = np.array([l_max])

    prob = ConvexProblem(n, objective, A, b, G, h, constraints)
    # cells outside the support of the base plan get a vanishing share
    needs_spread = bool(np.any(mask & (base <= 0)))
    eps = 1e-3 if needs_spread else 0.0
    while True:
        S0 = (1.0 - eps) * base + eps * spread
        x0 = lay.vec(S0)
        if c is not None and lam is not None:
            x0 = np.concatenate([x0, p_x[extra_idx]])
        if prob.strictly_feasible(x0) or eps < 1e-14 or not needs_spread:
            break
        eps *= 0.1
    if not prob.strictly_feasible(x0):
        warnings.warn("no strictly feasible starting point found", ConvergenceWarning, stacklevel=2)
        return CouplingSolution(None, None, np.nan, np.inf, 0, False, [])
    res = solve(prob, x0, gap_tol=GAP_TOL * LN2)
    return _finish(res, lay, ns, extra_len, extra_idx)
