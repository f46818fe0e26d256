"""Defender tests, false-negative error exponents and the Monte Carlo game."""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _programs
from .attack import (
    DistortionBudget,
    _band,
    optimal_attack_map,
    optimal_attack_map_tr,
    round_map_counts,
)
from .divergence import h_c_bits, kl_bits
from .margin import security_margin, security_margin_linf
from .pmf import Pmf, same_alphabet
from .transport import TransportMap

MEMBERSHIP_TOL = 1e-12
TR_MAX_ALPHABET = 3


class ScaleGuardError(ValueError):
    """The requested computation is outside the supported problem size."""


def ks_threshold(alphabet_size: int, lam: float, n: int) -> float:
    return lam - alphabet_size * np.log2(n + 1) / n


def tr_threshold(alphabet_size: int, lam: float, n: int, N: int) -> float:
    return lam - alphabet_size * np.log2((n + 1) * (N + 1)) / n


def defender_accepts_ks(type_x: Pmf, p_x: Pmf, lam: float, n: int) -> bool:
    """Accept H0 when the type is close enough to p_x in divergence."""
    same_alphabet(type_x, p_x)
    thr = ks_threshold(p_x.size, lam, n)
    return bool(thr > 0 and kl_bits(type_x.probs, p_x.probs) < thr)


def defender_accepts_tr(type_x: Pmf, type_t: Pmf, lam: float, n: int, N: int) -> bool:
    """Accept H0 when test and training types are close in h_c, c = N/n."""
    same_alphabet(type_x, type_t)
    thr = tr_threshold(type_x.size, lam, n, N)
    return bool(thr > 0 and h_c_bits(type_x.probs, type_t.probs, N / n) < thr)


@dataclass
class ExponentResult:
    epsilon_bits: float
    argmin_pmf: Pmf | None
    witness_map: TransportMap | None
    gap: float
    converged: bool
    iterations: int = 0
    training_pmf: Pmf | None = None
    history: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        out = {
            "epsilon_bits": self.epsilon_bits,
            "gap": self.gap,
            "converged": self.converged,
            "iterations": self.iterations,
            "argmin_pmf": None if self.argmin_pmf is None else self.argmin_pmf.to_dict(),
            "witness_map": None if self.witness_map is None else self.witness_map.to_dict(),
        }
        if self.training_pmf is not None:
            out["training_pmf"] = self.training_pmf.to_dict()
        return out


def _geometry(p_x: Pmf, budget: DistortionBudget):
    """Cost grid, allowed cells and budget for couplings from P to the x side."""
    k = p_x.size
    if budget.is_linf:
        return np.zeros((k, k)), _band(k, k, np.floor(budget.l_max + 1e-12)), None
    d = budget.metric.grid(k, k, p_x.offset, p_x.offset)
    return d, np.ones((k, k), dtype=bool), budget.l_max


def _result(sol, offset: int, flow_rows_are_p: bool = True) -> ExponentResult:
    if sol.flow is None:
        return ExponentResult(sol.objective_bits, None, None, sol.gap_bits, sol.converged,
                              sol.iterations, None, sol.history_bits)
    flow = sol.flow if flow_rows_are_p else sol.flow.T
    tmap = TransportMap(offset, offset, flow)
    extra = None if sol.extra is None else Pmf(offset, sol.extra / sol.extra.sum())
    return ExponentResult(sol.objective_bits, tmap.row_marginal, tmap, sol.gap_bits,
                          sol.converged, sol.iterations, extra, sol.history_bits)


def fn_error_exponent(p_x: Pmf, p_y: Pmf, budget: DistortionBudget) -> ExponentResult:
    """Smallest D(P || p_y) over pmfs P the attacker can reach from p_x.

    This is the false-negative exponent in the limit of a vanishing
    false-positive exponent. ``witness_map`` carries P (rows) onto p_x
    (columns) within budget.
    """
    same_alphabet(p_x, p_y)
    d, mask, l_max = _geometry(p_x, budget)
    # rows of the program are pinned to p_x, columns are the free P
    sol = _programs.project_fixed_marginal(p_x.probs, p_y.probs, d.T, l_max, mask.T)
    return _result(sol, p_x.offset, flow_rows_are_p=False)


def fn_error_exponent_lambda(p_x: Pmf, p_y: Pmf, lam: float, budget: DistortionBudget) -> ExponentResult:
    """False-negative exponent for a false-positive exponent ``lam`` > 0.

    Minimizes D(P || p_y) over P that the budget can carry onto some Q with
    D(Q || p_x) <= lam. ``witness_map`` carries P onto that Q.
    """
    same_alphabet(p_x, p_y)
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    d, mask, l_max = _geometry(p_x, budget)
    sol = _programs.free_coupling(p_x.probs, p_y.probs, d, l_max, mask, lam=lam)
    return _result(sol, p_x.offset)


def tr_error_exponent(
    p_x: Pmf,
    p_y: Pmf,
    budget: DistortionBudget,
    c: float,
    lam: float = 0.0,
    max_alphabet: int | None = TR_MAX_ALPHABET,
) -> ExponentResult:
    """False-negative exponent when the defender only sees training data.

    The outer minimization over the training-side pmf R and the inner one
    over P are solved together as a single convex program; ``training_pmf``
    is the minimizing R. ``lam = 0`` gives the vanishing-``lam`` limit.
    """
    same_alphabet(p_x, p_y)
    if max_alphabet is not None and p_x.size > max_alphabet:
        raise ScaleGuardError(f"alphabet size {p_x.size} exceeds the limit of {max_alphabet}")
    if not c > 0:
        raise ValueError(f"training ratio c must be positive, got {c}")
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    d, mask, l_max = _geometry(p_x, budget)
    if lam == 0:
        sol = _programs.free_coupling(p_x.probs, p_y.probs, d, l_max, mask, c=c)
        res = _result(sol, p_x.offset)
        if res.witness_map is not None:
            res.training_pmf = res.witness_map.col_marginal
        return res
    sol = _programs.free_coupling(p_x.probs, p_y.probs, d, l_max, mask, lam=lam, c=c)
    return _result(sol, p_x.offset)


def indistinguishable(p_x: Pmf, p_y: Pmf, budget: DistortionBudget) -> bool:
    """True when the budget reaches the security margin of the pair."""
    if budget.is_linf:
        margin = security_margin_linf(p_y, p_x).value
    else:
        margin = security_margin(p_y, p_x, budget.metric).value
    return bool(margin <= budget.l_max + MEMBERSHIP_TOL)


@dataclass(frozen=True)
class GameConfig:
    p_x: Pmf
    p_y: Pmf
    n: int
    lam: float
    budget: DistortionBudget
    trials: int = 1000
    seed: int = 0
    mode: str = "ks"
    c: float = 1.0

    def __post_init__(self):
        same_alphabet(self.p_x, self.p_y)
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.mode not in ("ks", "tr"):
            raise ValueError(f"mode must be 'ks' or 'tr', got {self.mode!r}")
        if self.mode == "tr" and not (self.c > 0 and self.N >= 1):
            raise ValueError("training length N = round(c n) must be >= 1")

    @property
    def N(self) -> int:
        return int(round(self.c * self.n))


@dataclass
class GameOutcome:
    fp_count: int
    fn_count: int
    trials: int
    fp_rate: float
    fn_rate: float
    empirical_fn_exponent: float
    theoretical_exponent: float
    fp_bound: float

    def to_dict(self) -> dict:
        return {
            "fp_count": self.fp_count,
            "fn_count": self.fn_count,
            "trials": self.trials,
            "fp_rate": self.fp_rate,
            "fn_rate": self.fn_rate,
            "empirical_fn_exponent": self.empirical_fn_exponent,
            "theoretical_exponent": self.theoretical_exponent,
            "fp_bound": self.fp_bound,
            "estimator": "add-one: -log2((fn_count+1)/(trials+1))/n",
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("SMTK_THREADS", "1")))
    except ValueError:
        return 1


def _draw(cfg: GameConfig, lo: int, hi: int) -> np.ndarray:
    """Per-trial type counts: H0 test, H0 training, H1 test, H1 training."""
    px = cfg.p_x.probs / cfg.p_x.probs.sum()
    py = cfg.p_y.probs / cfg.p_y.probs.sum()
    k = px.size
    out = np.zeros((hi - lo, 4, k), dtype=np.int64)
    for r, trial in enumerate(range(lo, hi)):
        rng = np.random.default_rng([cfg.seed, trial])
        out[r, 0] = rng.multinomial(cfg.n, px)
        out[r, 2] = rng.multinomial(cfg.n, py)
        if cfg.mode == "tr":
            out[r, 1] = rng.multinomial(cfg.N, px)
            out[r, 3] = rng.multinomial(cfg.N, px)
    return out


def _sample_all(cfg: GameConfig) -> np.ndarray:
    workers = min(_threads(), cfg.trials)
    if workers == 1:
        return _draw(cfg, 0, cfg.trials)
    bounds = np.linspace(0, cfg.trials, workers + 1).astype(int)
    with ThreadPoolExecutor(workers) as pool:
        parts = pool.map(lambda ab: _draw(cfg, *ab), zip(bounds[:-1], bounds[1:]))
        return np.concatenate(list(parts))


def _accepts(cfg: GameConfig, x_counts: np.ndarray, t_counts: np.ndarray) -> bool:
    off = cfg.p_x.offset
    tx = Pmf(off, x_counts / cfg.n)
    if cfg.mode == "ks":
        return defender_accepts_ks(tx, cfg.p_x, cfg.lam, cfg.n)
    return defender_accepts_tr(tx, Pmf(off, t_counts / cfg.N), cfg.lam, cfg.n, cfg.N)


def _attacked_counts(cfg: GameConfig, y_counts: np.ndarray, t_counts: np.ndarray) -> np.ndarray:
    off = cfg.p_x.offset
    ty = Pmf(off, y_counts / cfg.n)
    if cfg.mode == "ks":
        sol = optimal_attack_map(ty, cfg.p_x, cfg.budget)
    else:
        sol = optimal_attack_map_tr(ty, Pmf(off, t_counts / cfg.N), cfg.budget, cfg.c)
    return round_map_counts(sol.map.flow, y_counts).sum(axis=0)


def theoretical_exponent(cfg: GameConfig) -> float:
    if cfg.mode == "ks":
        return fn_error_exponent_lambda(cfg.p_x, cfg.p_y, cfg.lam, cfg.budget).epsilon_bits
    try:
        return tr_error_exponent(cfg.p_x, cfg.p_y, cfg.budget, cfg.c, cfg.lam).epsilon_bits
    except ScaleGuardError:
        return float("nan")


def simulate_game(cfg: GameConfig, with_theory: bool = True) -> GameOutcome:
    """Play the game ``cfg.trials`` times under each hypothesis.

    Types are a sufficient statistic for both players, so each trial draws
    type counts directly. Trial ``i`` uses the generator seeded with
    ``(seed, i)``; attack maps and defender decisions are cached per type.
    """
    draws = _sample_all(cfg)
    tr = cfg.mode == "tr"

    h0 = draws[:, 0:2].reshape(cfg.trials, -1)
    keys, inv = np.unique(h0, axis=0, return_inverse=True)
    k = cfg.p_x.size
    acc = np.array([_accepts(cfg, key[:k], key[k:]) for key in keys])
    fp = int(np.sum(~acc[inv.ravel()]))

    h1 = draws[:, 2:4].reshape(cfg.trials, -1)
    keys, inv = np.unique(h1, axis=0, return_inverse=True)
    acc = np.empty(keys.shape[0], dtype=bool)
    for r, key in enumerate(keys):
        y, t = key[:k], key[k:]
        z = _attacked_counts(cfg, y, t if tr else None)
        acc[r] = _accepts(cfg, z, t)
    fn = int(np.sum(acc[inv.ravel()]))

    theory = theoretical_exponent(cfg) if with_theory else float("nan")
    return GameOutcome(
        fp_count=fp,
        fn_count=fn,
        trials=cfg.trials,
        fp_rate=fp / cfg.trials,
        fn_rate=fn / cfg.trials,
        empirical_fn_exponent=float(-np.log2((fn + 1) / (cfg.trials + 1)) / cfg.n) + 0.0,
        theoretical_exponent=float(theory),
        fp_bound=float(2.0 ** (-cfg.lam * cfg.n)),
    )
