"""Probability mass functions over contiguous integer alphabets.

A :class:`Pmf` lives on the alphabet ``{offset, ..., offset + len(probs) - 1}``.
Sequences are plain integer numpy arrays; the helpers here turn them into
empirical types and back.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

#: Tolerance for the unit-sum invariant of a pmf.
SUM_TOL = 1e-9
#: Tolerance accepted when ingesting (and renormalizing) external data.
INGEST_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class Pmf:
    """A pmf over the contiguous alphabet ``offset .. offset + size - 1``."""

    offset: int
    probs: np.ndarray

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float).reshape(-1)
        if probs.size == 0:
            raise ValueError("pmf needs at least one symbol")
        if not np.all(np.isfinite(probs)):
            raise ValueError("pmf entries must be finite")
        if np.any(probs < 0):
            raise ValueError(f"pmf has negative entries: {probs[probs < 0]}")
        total = probs.sum()
        if abs(total - 1.0) > SUM_TOL:
            raise ValueError(f"pmf sums to {total!r}, not 1 (tol {SUM_TOL})")
        probs.setflags(write=False)
        object.__setattr__(self, "offset", int(self.offset))
        object.__setattr__(self, "probs", probs)

    @property
    def size(self) -> int:
        return self.probs.size

    @property
    def symbols(self) -> np.ndarray:
        return np.arange(self.offset, self.offset + self.size)

    @property
    def support(self) -> np.ndarray:
        """Symbols carrying positive mass."""
        return self.symbols[self.probs > 0]

    def __len__(self) -> int:
        return self.size

    def __eq__(self, other):
        if not isinstance(other, Pmf):
            return NotImplemented
        return self.offset == other.offset and np.array_equal(self.probs, other.probs)

    def __repr__(self):
        return f"Pmf(offset={self.offset}, probs={np.array2string(self.probs, precision=6)})"

    def __call__(self, symbol: int) -> float:
        k = int(symbol) - self.offset
        if 0 <= k < self.size:
            return float(self.probs[k])
        return 0.0

    def allclose(self, other: Pmf, atol: float = 1e-9) -> bool:
        lo, a, b = align(self, other)
        return bool(np.allclose(a, b, rtol=0.0, atol=atol))

    def mean(self) -> float:
        return float(self.symbols @ self.probs)

    def var(self) -> float:
        return float(((self.symbols - self.mean()) ** 2) @ self.probs)

    def to_dict(self) -> dict:
        return {"offset": self.offset, "probs": self.probs.tolist()}


def bernoulli(p: float) -> Pmf:
    """Bern(p) on the alphabet {0, 1}; ``p`` is the probability of symbol 1."""
    return Pmf(0, [1.0 - p, p])


def uniform(size: int, offset: int = 0) -> Pmf:
    return Pmf(offset, np.full(size, 1.0 / size))


def point_mass(symbol: int, size: int, offset: int = 0) -> Pmf:
    probs = np.zeros(size)
    probs[symbol - offset] = 1.0
    return Pmf(offset, probs)


def validate_pmf(p, renormalize: bool = False, offset: int | None = None) -> Pmf:
    """Check raw pmf data and optionally fix round-off in its sum.

    ``p`` may be a :class:`Pmf` or any array-like of probabilities (then
    ``offset`` defaults to 0). With ``renormalize`` a sum within
    ``INGEST_TOL`` of one is rescaled to an exact unit sum; without it the sum
    must already be within ``SUM_TOL``.
    """
    if isinstance(p, Pmf):
        probs, off = p.probs, p.offset
    else:
        probs, off = p, 0
    if offset is not None:
        off = offset
    probs = np.asarray(probs, dtype=float).reshape(-1)
    if probs.size == 0 or not np.all(np.isfinite(probs)):
        raise ValueError("pmf entries must be finite and non-empty")
    if np.any(probs < 0):
        raise ValueError(f"pmf has negative entries: {probs[probs < 0]}")
    total = probs.sum()
    if total <= 0:
        raise ValueError("pmf has no positive entry")
    if renormalize:
        if abs(total - 1.0) > INGEST_TOL:
            raise ValueError(f"pmf sums to {total!r}; too far from 1 to renormalize")
        probs = probs / total
    elif abs(total - 1.0) > SUM_TOL:
        raise ValueError(f"pmf sums to {total!r}, not 1")
    return Pmf(off, probs)


def align(*pmfs: Pmf) -> tuple:
    """Embed several pmfs into their common alphabet span.

    Returns ``(offset, arr0, arr1, ...)`` where each array covers the symbols
    ``offset .. offset + len - 1`` shared by all outputs.
    """
    lo = min(p.offset for p in pmfs)
    hi = max(p.offset + p.size for p in pmfs)
    out = []
    for p in pmfs:
        a = np.zeros(hi - lo)
        a[p.offset - lo : p.offset - lo + p.size] = p.probs
        out.append(a)
    return (lo, *out)


def same_alphabet(p: Pmf, q: Pmf) -> None:
    if p.offset != q.offset or p.size != q.size:
        raise ValueError(
            f"alphabet mismatch: [{p.offset}, {p.offset + p.size - 1}] vs "
            f"[{q.offset}, {q.offset + q.size - 1}]"
        )


@dataclass(frozen=True, eq=False)
class Cdf:
    """Cumulative mass function; ``cums[k]`` is P(X <= offset + k)."""

    offset: int
    cums: np.ndarray

    def __post_init__(self):
        cums = np.array(self.cums, dtype=float).reshape(-1)
        if np.any(np.diff(cums) < -SUM_TOL) or cums[0] < -SUM_TOL:
            raise ValueError("cdf must be nondecreasing and nonnegative")
        if abs(cums[-1] - 1.0) > SUM_TOL:
            raise ValueError(f"cdf ends at {cums[-1]!r}, not 1")
        cums.setflags(write=False)
        object.__setattr__(self, "cums", cums)

    def __call__(self, x) -> np.ndarray:
        """Evaluate C(x) for real x (right-continuous step function)."""
        k = np.floor(np.asarray(x, dtype=float)).astype(int) - self.offset
        padded = np.concatenate([[0.0], self.cums])
        return padded[np.clip(k + 1, 0, self.cums.size)]

    def ppf(self, u) -> np.ndarray:
        """Generalized inverse inf{x : C(x) >= u}, returned as symbols."""
        u = np.asarray(u, dtype=float)
        k = np.searchsorted(self.cums, u - 1e-15, side="left")
        return self.offset + np.minimum(k, self.cums.size - 1)


def cdf(p: Pmf) -> Cdf:
    cums = np.cumsum(p.probs)
    # absorb round-off so the invariant holds exactly
    cums[-1] = 1.0
    return Cdf(p.offset, np.minimum(cums, 1.0))


def _check_symbols(seq: np.ndarray, alphabet_size: int, offset: int) -> np.ndarray:
    seq = np.asarray(seq)
    if seq.ndim != 1 or seq.size == 0:
        raise ValueError("sequence must be a non-empty 1-D array")
    if not np.issubdtype(seq.dtype, np.integer):
        if not np.all(np.mod(seq, 1) == 0):
            raise ValueError("sequence symbols must be integers")
        seq = seq.astype(np.int64)
    bad = (seq < offset) | (seq >= offset + alphabet_size)
    if np.any(bad):
        raise ValueError(
            f"symbols outside alphabet [{offset}, {offset + alphabet_size - 1}]: "
            f"{np.unique(seq[bad])[:10]}"
        )
    return seq


def type_counts(seq, alphabet_size: int, offset: int = 0) -> np.ndarray:
    """Per-symbol counts of ``seq`` (the n(a) of its type)."""
    seq = _check_symbols(seq, alphabet_size, offset)
    return np.bincount(seq - offset, minlength=alphabet_size)


def empirical_type(seq, alphabet_size: int, offset: int = 0) -> Pmf:
    counts = type_counts(seq, alphabet_size, offset)
    return Pmf(offset, counts / counts.sum())


def sample_sequence(p: Pmf, n: int, rng_seed) -> np.ndarray:
    """Draw ``n`` i.i.d. symbols from ``p``; identical seeds give identical output."""
    if n < 1:
        raise ValueError("sequence length must be >= 1")
    rng = np.random.default_rng(rng_seed)
    idx = rng.choice(p.size, size=n, p=p.probs)
    return idx.astype(np.int64) + p.offset


# -- file interchange ---------------------------------------------------------


def load_pmf(path, renormalize: bool = True) -> Pmf:
    with open(path) as fh:
        d = json.load(fh)
    if not isinstance(d, dict) or "probs" not in d:
        raise ValueError(f"{path}: expected a JSON object with 'offset' and 'probs'")
    return validate_pmf(d["probs"], renormalize, offset=int(d.get("offset", 0)))


def save_pmf(p: Pmf, path) -> None:
    Path(path).write_text(json.dumps(p.to_dict()) + "\n")


def load_sequence(path) -> np.ndarray:
    text = Path(path).read_text()
    try:
        vals = [int(tok) for tok in text.split()]
    except ValueError as exc:
        raise ValueError(f"{path}: sequence files hold whitespace-separated integers") from exc
    if not vals:
        raise ValueError(f"{path}: empty sequence")
    return np.array(vals, dtype=np.int64)


def save_sequence(seq, path) -> None:
    Path(path).write_text("\n".join(str(int(s)) for s in seq) + "\n")
