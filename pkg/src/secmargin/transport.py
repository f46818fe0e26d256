"""Discrete optimal transport on the integer line.

Two solvers live here: the north-west corner (NWC) rule, optimal for every
cost with the Monge property (in particular ``|i - j|**p``, p >= 1), and a
successive-shortest-paths min-cost-flow solver that handles any finite cost
matrix and doubles as the reference oracle for the greedy path.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .pmf import SUM_TOL, Pmf, align

#: A bin whose residual mass falls below this is exhausted.
EXHAUST_TOL = 1e-12
#: Flow entries above this count as support (for L-infinity distances).
SUPPORT_TOL = 1e-12
#: Largest k*m for which a cost matrix is checked for the Monge property.
MONGE_GUARD = 10**6
#: Guards for the brute-force plan enumerator.
ENUM_MAX_TOTAL = 12
ENUM_MAX_ALPHABET = 5


@dataclass(frozen=True, eq=False)
class CostSpec:
    """Per-symbol distortion d(i, j).

    ``kind`` is ``"lp"`` (``|i - j|**p``), ``"hamming"`` (``i != j``) or
    ``"matrix"`` (explicit k x m array indexed relative to the two alphabets).
    """

    kind: str
    p: float = 1.0
    matrix: np.ndarray | None = None

    def __post_init__(self):
        if self.kind == "lp":
            if not self.p >= 1:
                raise ValueError(f"lp cost needs p >= 1, got {self.p}")
        elif self.kind == "matrix":
            mat = np.array(self.matrix, dtype=float)
            if mat.ndim != 2 or mat.size == 0:
                raise ValueError("cost matrix must be a non-empty 2-D array")
            if not np.all(np.isfinite(mat)) or np.any(mat < 0):
                raise ValueError("cost matrix entries must be finite and >= 0")
            mat.setflags(write=False)
            object.__setattr__(self, "matrix", mat)
        elif self.kind != "hamming":
            raise ValueError(f"unknown cost kind {self.kind!r}")

    @classmethod
    def lp(cls, p: float = 1.0) -> CostSpec:
        return cls("lp", p=float(p))

    @classmethod
    def hamming(cls) -> CostSpec:
        return cls("hamming")

    @classmethod
    def from_matrix(cls, matrix) -> CostSpec:
        return cls("matrix", matrix=matrix)

    @property
    def symmetric(self) -> bool:
        if self.kind != "matrix":
            return True
        m = self.matrix
        return m.shape[0] == m.shape[1] and np.array_equal(m, m.T)

    def transpose(self) -> CostSpec:
        if self.kind != "matrix":
            return self
        return CostSpec.from_matrix(self.matrix.T)

    def grid(self, k: int, m: int, source_offset: int = 0, sink_offset: int = 0) -> np.ndarray:
        """The k x m array d(source_offset + i, sink_offset + j)."""
        if self.kind == "matrix":
            if self.matrix.shape != (k, m):
                raise ValueError(
                    f"cost matrix is {self.matrix.shape}, transport grid is {(k, m)}"
                )
            return np.array(self.matrix)
        diff = (source_offset + np.arange(k))[:, None] - (sink_offset + np.arange(m))[None, :]
        if self.kind == "hamming":
            return (diff != 0).astype(float)
        return np.abs(diff).astype(float) ** self.p

    def describe(self) -> str:
        if self.kind == "lp":
            return f"lp({self.p:g})"
        return self.kind


def load_cost_matrix(path) -> CostSpec:
    """Read a row-major CSV cost matrix (k rows, m columns)."""
    with open(path, newline="") as fh:
        rows = [[float(v) for v in row] for row in csv.reader(fh) if row]
    if not rows or len({len(r) for r in rows}) != 1:
        raise ValueError(f"{path}: ragged or empty cost matrix")
    return CostSpec.from_matrix(np.array(rows))


@dataclass(frozen=True, eq=False)
class TransportMap:
    """Coupling matrix; ``flow[i, j]`` is the mass moved from symbol
    ``source_offset + i`` to symbol ``sink_offset + j``."""

    source_offset: int
    sink_offset: int
    flow: np.ndarray

    def __post_init__(self):
        flow = np.array(self.flow, dtype=float)
        if flow.ndim != 2:
            raise ValueError("flow must be a 2-D array")
        if np.any(flow < -SUM_TOL):
            raise ValueError("flow entries must be nonnegative")
        flow = np.maximum(flow, 0.0)
        if abs(flow.sum() - 1.0) > SUM_TOL:
            raise ValueError(f"transport map carries mass {flow.sum()!r}, not 1")
        flow.setflags(write=False)
        object.__setattr__(self, "flow", flow)

    @property
    def shape(self) -> tuple[int, int]:
        return self.flow.shape

    @property
    def row_marginal(self) -> Pmf:
        return Pmf(self.source_offset, self.flow.sum(axis=1))

    @property
    def col_marginal(self) -> Pmf:
        return Pmf(self.sink_offset, self.flow.sum(axis=0))

    def transpose(self) -> TransportMap:
        return TransportMap(self.sink_offset, self.source_offset, self.flow.T)

    def triplets(self, tol: float = 0.0) -> list[tuple[int, int, float]]:
        """Nonzero entries as ``(source_symbol, sink_symbol, mass)``."""
        ii, jj = np.nonzero(self.flow > tol)
        return [
            (int(i + self.source_offset), int(j + self.sink_offset), float(self.flow[i, j]))
            for i, j in zip(ii, jj)
        ]

    def to_dict(self) -> dict:
        return {
            "source_offset": self.source_offset,
            "sink_offset": self.sink_offset,
            "flow": [list(t) for t in self.triplets()],
        }


def nwc_map(p: Pmf, q: Pmf) -> TransportMap:
    """North-west corner coupling of ``p`` (rows) and ``q`` (columns).

    Mass is shipped greedily from the lowest non-empty source bin to the
    lowest unfilled sink bin. The result ignores any cost function; it is
    optimal for every Monge cost and minimizes the largest shipping distance.
    """
    sup = np.array(p.probs, dtype=float)
    dem = np.array(q.probs, dtype=float)
    k, m = sup.size, dem.size
    flow = np.zeros((k, m))
    i = j = 0
    last = None
    while True:
        while i < k and sup[i] < EXHAUST_TOL:
            i += 1
        while j < m and dem[j] < EXHAUST_TOL:
            j += 1
        if i == k or j == m:
            break
        amt = min(sup[i], dem[j])
        flow[i, j] += amt
        sup[i] -= amt
        dem[j] -= amt
        last = (i, j)
        # exact ties exhaust the source first; the sink is skipped next pass
        if sup[i] < EXHAUST_TOL:
            i += 1
        elif dem[j] < EXHAUST_TOL:
            j += 1
    leftover = sup[sup > 0].sum()
    if last is not None and leftover > 0:
        flow[last] += leftover
    return TransportMap(p.offset, q.offset, flow)


def map_cost(tmap: TransportMap, cost: CostSpec) -> float:
    """Average per-symbol distortion sum_ij flow(i, j) d(i, j)."""
    k, m = tmap.shape
    d = cost.grid(k, m, tmap.source_offset, tmap.sink_offset)
    return float(np.sum(tmap.flow * d))


def linf_cost(tmap: TransportMap, tol: float = SUPPORT_TOL) -> int:
    """Largest |i - j| over the support of the map."""
    ii, jj = np.nonzero(tmap.flow > tol)
    if ii.size == 0:
        return 0
    return int(np.max(np.abs((ii + tmap.source_offset) - (jj + tmap.sink_offset))))


def monge_violations(d: np.ndarray) -> int:
    """Number of adjacent 2x2 minors breaking d[i,j] + d[i+1,j+1] <= d[i,j+1] + d[i+1,j]."""
    lhs = d[:-1, :-1] + d[1:, 1:]
    rhs = d[:-1, 1:] + d[1:, :-1]
    return int(np.count_nonzero(lhs > rhs + 1e-12 * (1.0 + np.abs(rhs))))


def is_monge(cost: CostSpec, k: int, m: int, source_offset: int = 0, sink_offset: int = 0) -> bool:
    """Whether d(i,j) + d(r,s) <= d(i,s) + d(r,j) for all i < r, j < s.

    ``lp`` costs are Monge analytically. Other costs are checked on their
    adjacent 2x2 minors, which is equivalent to checking every quadruple.
    """
    if cost.kind == "lp":
        return True
    if k * m > MONGE_GUARD:
        return False
    if k < 2 or m < 2:
        return True
    return monge_violations(cost.grid(k, m, source_offset, sink_offset)) == 0


def _ssp_transport(supply: np.ndarray, demand: np.ndarray, cost: np.ndarray) -> np.ndarray:
    """Min-cost transportation by successive shortest paths with potentials.

    Dense Dijkstra over the bipartite residual graph; reduced costs stay
    nonnegative through the usual potential update, so every augmentation
    follows a cheapest path. Works directly on float masses.
    """
    k, m = cost.shape
    flow = np.zeros((k, m))
    sup = supply.astype(float).copy()
    dem = demand.astype(float).copy()
    tol = 1e-14
    pot_s = np.zeros(k)
    pot_t = cost.min(axis=0).astype(float)
    inf = np.inf
    while True:
        active = sup > tol
        if not active.any() or not (dem > tol).any():
            break
        rc = cost + pot_s[:, None] - pot_t[None, :]
        dist_s = np.where(active, 0.0, inf)
        dist_t = np.full(m, inf)
        pred_t = np.full(m, -1)
        pred_s = np.full(k, -1)
        done_s = np.zeros(k, dtype=bool)
        done_t = np.zeros(m, dtype=bool)
        target = -1
        reach = inf
        while True:
            ds = np.where(done_s, inf, dist_s)
            dt = np.where(done_t, inf, dist_t)
            i = int(ds.argmin())
            j = int(dt.argmin())
            if ds[i] == inf and dt[j] == inf:
                break
            if ds[i] <= dt[j]:
                done_s[i] = True
                nd = ds[i] + rc[i]
                better = (nd < dist_t) & ~done_t
                dist_t[better] = nd[better]
                pred_t[better] = i
            else:
                done_t[j] = True
                if dem[j] > tol:
                    target, reach = j, dt[j]
                    break
                nd = dt[j] - rc[:, j]
                better = (flow[:, j] > 0) & (nd < dist_s) & ~done_s & ~active
                dist_s[better] = nd[better]
                pred_s[better] = j
        if target < 0:
            raise RuntimeError("min-cost flow: no augmenting path (unbalanced masses?)")
        pot_s += np.minimum(dist_s, reach)
        pot_t += np.minimum(dist_t, reach)

        # walk back from the target sink to an active source
        path = []
        j = target
        while True:
            i = int(pred_t[j])
            path.append((i, j, +1))
            if active[i]:
                break
            jb = int(pred_s[i])
            path.append((i, jb, -1))
            j = jb
        start = path[-1][0]
        delta = min(sup[start], dem[target])
        for i, j, sign in path:
            if sign < 0:
                delta = min(delta, flow[i, j])
        for i, j, sign in path:
            if sign > 0:
                flow[i, j] += delta
            else:
                flow[i, j] = 0.0 if flow[i, j] <= delta else flow[i, j] - delta
        sup[start] -= delta
        dem[target] -= delta
    return flow


def min_cost_flow_emd(p: Pmf, q: Pmf, cost: CostSpec) -> tuple[float, TransportMap]:
    """Exact EMD for an arbitrary finite cost via min-cost flow."""
    d = cost.grid(p.size, q.size, p.offset, q.offset)
    flow = _ssp_transport(p.probs, q.probs, d)
    # mass left by the 1e-9 sum tolerance of the inputs goes to the last cell
    gap = 1.0 - flow.sum()
    if abs(gap) > 0:
        nz = np.argwhere(flow > 0)
        i, j = nz[-1]
        flow[i, j] = max(flow[i, j] + gap, 0.0)
    tmap = TransportMap(p.offset, q.offset, flow)
    return float(np.sum(flow * d)), tmap


def optimal_map(p: Pmf, q: Pmf, cost: CostSpec) -> tuple[float, TransportMap, str]:
    """EMD value, an optimal coupling, and the solver used (``"nwc"`` or ``"min-cost-flow"``)."""
    if is_monge(cost, p.size, q.size, p.offset, q.offset):
        tmap = nwc_map(p, q)
        return map_cost(tmap, cost), tmap, "nwc"
    value, tmap = min_cost_flow_emd(p, q, cost)
    return value, tmap, "min-cost-flow"


def emd(p: Pmf, q: Pmf, cost: CostSpec) -> float:
    """Earth mover distance between ``p`` and ``q`` under ``cost``.

    Monge costs go through the linear-time NWC rule; everything else is
    solved exactly as a transportation LP.
    """
    return optimal_map(p, q, cost)[0]


def emd_l1_closed_form(p: Pmf, q: Pmf) -> float:
    """EMD under |i - j|: the summed absolute difference of the two CDFs."""
    _, a, b = align(p, q)
    return float(np.sum(np.abs(np.cumsum(a - b))))


class UniformFormulaWarning(UserWarning):
    """The double-sum uniform-source formula disagrees with the NWC value."""


def uniform_double_sum(size_x: int, size_y: int, offset_x: int, offset_y: int, p_exp: float) -> float:
    """Literal evaluation of a double-sum formula for uniform sources.

    (1/|Y|) sum_{i<|X|} sum_{j<alpha} (|i_low - j_low| - j - (alpha-1) i)^p.
    Kept for comparison only; see :func:`sm_uniform_closed_form`.
    """
    alpha = size_x // size_y
    i = np.arange(size_x)[:, None]
    j = np.arange(alpha)[None, :]
    with np.errstate(invalid="ignore"):
        terms = np.power((abs(offset_x - offset_y) - j - (alpha - 1) * i).astype(float), p_exp)
    return float(terms.sum() / size_y)


def sm_uniform_closed_form(
    size_x: int, size_y: int, offset_x: int = 0, offset_y: int = 0, p_exp: float = 1.0
) -> float:
    """Margin between uniform sources with ``size_x = alpha * size_y``.

    The value returned is the NWC transport cost, which is exact. The
    double-sum formula is evaluated alongside and any disagreement is
    reported through :class:`UniformFormulaWarning`.
    """
    if size_x < 1 or size_y < 1 or size_x % size_y:
        raise ValueError(f"size_x={size_x} is not an integer multiple of size_y={size_y}")
    px = Pmf(offset_x, np.full(size_x, 1.0 / size_x))
    py = Pmf(offset_y, np.full(size_y, 1.0 / size_y))
    cost = CostSpec.lp(p_exp)
    value = map_cost(nwc_map(px, py), cost)
    formula = uniform_double_sum(size_x, size_y, offset_x, offset_y, p_exp)
    if not np.isclose(formula, value, rtol=1e-9, atol=1e-9):
        warnings.warn(
            f"double-sum formula gives {formula!r}, NWC transport gives {value!r}",
            UniformFormulaWarning,
            stacklevel=2,
        )
    return value


def enumerate_integer_plans(
    p_counts, q_counts, max_distance: int | None = None, source_offset: int = 0, sink_offset: int = 0
) -> Iterator[np.ndarray]:
    """Yield every nonnegative integer matrix with row sums ``p_counts`` and
    column sums ``q_counts``.

    With ``max_distance`` only plans supported on ``|i - j| <= max_distance``
    are produced. Exhaustive DFS; meant as a brute-force oracle on tiny
    instances.
    """
    rows = [int(v) for v in p_counts]
    cols = [int(v) for v in q_counts]
    if any(v < 0 for v in rows + cols):
        raise ValueError("counts must be nonnegative")
    if sum(rows) != sum(cols):
        raise ValueError("row and column totals differ")
    if sum(rows) > ENUM_MAX_TOTAL or len(rows) > ENUM_MAX_ALPHABET or len(cols) > ENUM_MAX_ALPHABET:
        raise ValueError(
            f"instance too large for enumeration (total <= {ENUM_MAX_TOTAL}, "
            f"alphabets <= {ENUM_MAX_ALPHABET})"
        )
    k, m = len(rows), len(cols)
    allowed = [[True] * m for _ in range(k)]
    if max_distance is not None:
        allowed = [
            [abs(source_offset + i - sink_offset - j) <= max_distance for j in range(m)]
            for i in range(k)
        ]
    plan = [[0] * m for _ in range(k)]
    row_rem = rows[:]
    col_rem = cols[:]

    def fill(cell: int):
        if cell == k * m:
            if not any(col_rem):
                yield np.array(plan, dtype=np.int64)
            return
        i, j = divmod(cell, m)
        if j == m - 1:
            amounts = [row_rem[i]] if row_rem[i] <= col_rem[j] else []
        else:
            amounts = range(min(row_rem[i], col_rem[j]) + 1)
        for a in amounts:
            if a and not allowed[i][j]:
                break
            plan[i][j] = a
            row_rem[i] -= a
            col_rem[j] -= a
            yield from fill(cell + 1)
            row_rem[i] += a
            col_rem[j] += a
        plan[i][j] = 0

    yield from fill(0)
