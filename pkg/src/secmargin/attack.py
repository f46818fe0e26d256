"""The attacker's optimal transportation map and its application to sequences."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import _programs
from .pmf import Pmf, same_alphabet, type_counts
from .transport import CostSpec, TransportMap

LINF = "linf"


@dataclass(frozen=True)
class DistortionBudget:
    """Attack budget: an additive cost with per-letter bound ``l_max``, or
    ``metric="linf"`` for a bound on the largest per-symbol change."""

    metric: CostSpec | str
    l_max: float

    def __post_init__(self):
        if not self.l_max >= 0:
            raise ValueError(f"l_max must be >= 0, got {self.l_max}")
        if isinstance(self.metric, str) and self.metric != LINF:
            raise ValueError(f"unknown metric {self.metric!r}")

    @property
    def is_linf(self) -> bool:
        return isinstance(self.metric, str)

    def with_l_max(self, l_max: float) -> DistortionBudget:
        return DistortionBudget(self.metric, l_max)

    def describe(self) -> str:
        return LINF if self.is_linf else self.metric.describe()


@dataclass
class AttackSolution:
    map: TransportMap
    objective_bits: float
    iterations: int
    gap: float
    converged: bool = True
    history: list = field(default_factory=list)

    @property
    def attacked_type(self) -> Pmf:
        return self.map.col_marginal

    def to_dict(self) -> dict:
        return {
            "objective_bits": self.objective_bits,
            "gap": self.gap,
            "converged": self.converged,
            "iterations": self.iterations,
            "flow": [list(t) for t in self.map.triplets()],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _band(k: int, m: int, width: float, src_off: int = 0, dst_off: int = 0) -> np.ndarray:
    diff = (src_off + np.arange(k))[:, None] - (dst_off + np.arange(m))[None, :]
    return np.abs(diff) <= width


def _solution(p_y: Pmf, sol) -> AttackSolution:
    flow = sol.flow
    if flow is None:
        flow = np.diag(p_y.probs)
    return AttackSolution(
        map=TransportMap(p_y.offset, p_y.offset, flow),
        objective_bits=sol.objective_bits,
        iterations=sol.iterations,
        gap=sol.gap_bits,
        converged=sol.converged,
        history=sol.history_bits,
    )


def optimal_attack_map(p_y: Pmf, p_x: Pmf, budget: DistortionBudget) -> AttackSolution:
    """Admissible map minimizing D(S_Z || p_x) for an observed type ``p_y``.

    The map's rows are pinned to ``p_y`` and its average distortion is at
    most ``budget.l_max``. Columns where ``p_x`` vanishes are closed off,
    as any mass there makes the divergence infinite.
    """
    same_alphabet(p_y, p_x)
    if budget.is_linf:
        return optimal_attack_map_linf(p_y, p_x, int(np.floor(budget.l_max + 1e-12)))
    k = p_y.size
    d = budget.metric.grid(k, k, p_y.offset, p_x.offset)
    sol = _programs.project_fixed_marginal(
        p_y.probs, p_x.probs, d, budget.l_max, np.ones((k, k), dtype=bool)
    )
    return _solution(p_y, sol)


def optimal_attack_map_tr(p_y: Pmf, p_t: Pmf, budget: DistortionBudget, c: float) -> AttackSolution:
    """Admissible map minimizing h_c(S_Z, p_t), the training-data variant."""
    same_alphabet(p_y, p_t)
    if c <= 0:
        raise ValueError(f"training ratio c must be positive, got {c}")
    k = p_y.size
    if budget.is_linf:
        d = np.zeros((k, k))
        mask = _band(k, k, np.floor(budget.l_max + 1e-12))
        l_max = None
    else:
        d = budget.metric.grid(k, k, p_y.offset, p_t.offset)
        mask = np.ones((k, k), dtype=bool)
        l_max = budget.l_max
    sol = _programs.project_fixed_marginal(p_y.probs, p_t.probs, d, l_max, mask, c=c)
    return _solution(p_y, sol)


def optimal_attack_map_linf(p_y: Pmf, p_x: Pmf, l_max: int) -> AttackSolution:
    """Minimize D(S_Z || p_x) over maps that move no symbol further than ``l_max``."""
    same_alphabet(p_y, p_x)
    if l_max < 0:
        raise ValueError("l_max must be >= 0")
    k = p_y.size
    sol = _programs.project_fixed_marginal(
        p_y.probs, p_x.probs, np.zeros((k, k)), None, _band(k, k, l_max)
    )
    return _solution(p_y, sol)


def round_map_counts(flow: np.ndarray, row_counts: np.ndarray) -> np.ndarray:
    """Integer transformation counts n(i, j) from a real-valued map.

    Each row is rounded by largest remainder so that its total equals
    ``row_counts[i]`` exactly.
    """
    flow = np.asarray(flow, dtype=float)
    row_counts = np.asarray(row_counts, dtype=np.int64)
    n = int(row_counts.sum())
    target = n * flow
    counts = np.floor(target).astype(np.int64)
    for i in range(flow.shape[0]):
        short = int(row_counts[i] - counts[i].sum())
        if short > 0:
            order = np.argsort(-(target[i] - counts[i]), kind="stable")
            counts[i, order[:short]] += 1
        elif short < 0:
            # floor overshoot only happens through round-off in the row total
            order = np.argsort(target[i] - counts[i], kind="stable")
            for j in order:
                take = min(-short, counts[i, j])
                counts[i, j] -= take
                short += take
                if short == 0:
                    break
    return counts


def apply_map_to_sequence(y, tmap: TransportMap, seed) -> np.ndarray:
    """Rewrite ``y`` according to ``tmap``.

    Symbol ``i`` is turned into ``j`` exactly n(i, j) times, with n(i, j)
    from :func:`round_map_counts`; which occurrences of ``i`` go where is
    decided by a seeded shuffle.
    """
    y = np.asarray(y)
    k, m = tmap.shape
    counts_y = type_counts(y, k, tmap.source_offset)
    n = y.size
    row = tmap.flow.sum(axis=1)
    if np.max(np.abs(row - counts_y / n)) > 1e-9:
        raise ValueError("map row marginal does not match the type of the sequence")
    counts = round_map_counts(tmap.flow, counts_y)
    rng = np.random.default_rng(seed)
    z = np.empty_like(y)
    sinks = tmap.sink_offset + np.arange(m)
    for i in range(k):
        pos = np.nonzero(y == tmap.source_offset + i)[0]
        if pos.size == 0:
            continue
        pos = rng.permutation(pos)
        z[pos] = np.repeat(sinks, counts[i])
    return z
