"""KL divergence and the training-data statistic h_c, in bits."""

from __future__ import annotations

import numpy as np

from .pmf import Pmf, same_alphabet

LN2 = np.log(2.0)
#: Entries below this are treated as exact zeros (0 log 0 = 0).
ZERO = 1e-300


def kl_bits(p: np.ndarray, q: np.ndarray) -> float:
    """D(p||q) in bits for aligned arrays; +inf when p puts mass where q has none."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    mask = p > ZERO
    if np.any(q[mask] <= ZERO):
        return float("inf")
    pm = p[mask]
    return max(float(np.sum(pm * np.log(pm / q[mask]))) / LN2, 0.0)


def h_c_bits(p: np.ndarray, q: np.ndarray, c: float) -> float:
    if c <= 0:
        raise ValueError(f"training ratio c must be positive, got {c}")
    u = (np.asarray(p, float) + c * np.asarray(q, float)) / (1.0 + c)
    return kl_bits(p, u) + c * kl_bits(q, u)


def kl_divergence(p: Pmf, q: Pmf) -> float:
    """Kullback-Leibler divergence D(p||q) in bits.

    Uses 0 log 0 = 0 and p log(p/0) = +inf for p > 0; the infinity is
    returned as ``float('inf')`` rather than clamped.
    """
    same_alphabet(p, q)
    return kl_bits(p.probs, q.probs)


def h_c(p: Pmf, q: Pmf, c: float) -> float:
    """Generalized log-likelihood ratio D(p||U) + c D(q||U), U = (p + c q)/(1 + c).

    For empirical types of a test sequence (length n) and a training sequence
    (length N = c n) this is the defender's statistic in the training-data game.
    """
    same_alphabet(p, q)
    return h_c_bits(p.probs, q.probs, c)
