"""Nested Halton designs, keyed pseudorandom blocks and Saltelli matrices."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53)
HALTON_OFFSET = 20

_TWO53 = float(2**53)


@dataclass(frozen=True)
class Design:
    points: np.ndarray
    scheme: str
    start_index: int | None = None

    def __len__(self):
        return self.points.shape[0]


def radical_inverse(indices, base: int) -> np.ndarray:
    n = np.array(indices, dtype=np.int64, copy=True)
    out = np.zeros(n.shape, dtype=float)
    f = 1.0 / base
    while np.any(n > 0):
        n, digit = np.divmod(n, base)
        out += digit * f
        f /= base
    return out


def _check_nd(nd: int):
    if not 1 <= nd <= len(PRIMES):
        raise ValueError(f"Halton dimension must be in [1, {len(PRIMES)}], got {nd}")


def halton_point(index: int, nd: int, offset: int = HALTON_OFFSET) -> np.ndarray:
    """Point number ``index`` (1-based) of the Halton sequence, after skipping ``offset`` points."""
    _check_nd(nd)
    if index < 1:
        raise ValueError("Halton index must be >= 1")
    return np.array([radical_inverse(index + offset, b) for b in PRIMES[:nd]], dtype=float)


def halton_block(start: int, count: int, nd: int, offset: int = HALTON_OFFSET,
                 scramble: bool = False, seed=None) -> Design:
    """Rows ``halton_point(start) .. halton_point(start + count - 1)``.

    With ``scramble=True`` every base gets a seeded random digit permutation
    (zero digit fixed). Scrambled blocks are not accepted by the adaptive driver.
    """
    _check_nd(nd)
    if start < 1:
        raise ValueError("Halton start index must be >= 1")
    idx = np.arange(start, start + count, dtype=np.int64) + offset
    if not scramble:
        pts = np.column_stack([radical_inverse(idx, b) for b in PRIMES[:nd]]) if count else np.empty((0, nd))
        return Design(pts, "halton", start)

    rng = np.random.default_rng(seed)
    cols = []
    for b in PRIMES[:nd]:
        perm = np.concatenate([[0], 1 + rng.permutation(b - 1)])
        n = idx.copy()
        col = np.zeros(count)
        f = 1.0 / b
        while np.any(n > 0):
            n, digit = np.divmod(n, b)
            col += perm[digit] * f
            f /= b
        cols.append(col)
    pts = np.column_stack(cols) if count else np.empty((0, nd))
    return Design(pts, "halton-scrambled", start)


def _generator(seed) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def mc_block(n: int, nd: int, seed: int | Sequence[int]) -> Design:
    """``n x nd`` independent uniforms on the open cube, from a counter-based PRNG.

    ``seed`` may be an int or a tuple of ints (e.g. ``(run_seed, level, stream)``).
    """
    rng = _generator(seed)
    k = rng.integers(0, 2**53, size=(n, nd), dtype=np.int64)
    return Design((k.astype(float) + 0.5) / _TWO53, "pseudorandom")


@dataclass(frozen=True)
class SaltelliDesign:
    A: np.ndarray
    B: np.ndarray
    AB: np.ndarray  # (nd, N, nd): AB[i] = A with column i taken from B
    BA: np.ndarray  # (nd, N, nd): BA[i] = B with column i taken from A

    @property
    def N(self) -> int:
        return self.A.shape[0]

    @property
    def nd(self) -> int:
        return self.A.shape[1]

    def stacked(self) -> np.ndarray:
        """All rows, ordered A, B, AB_1..AB_nd, BA_1..BA_nd; ``N * (2 nd + 2)`` rows."""
        return np.concatenate([self.A, self.B, *self.AB, *self.BA], axis=0)


def saltelli_design(N: int, nd: int, seed) -> SaltelliDesign:
    if N < 2:
        raise ValueError("Saltelli base sample count must be >= 2")
    M = mc_block(N, 2 * nd, seed).points
    A, B = M[:, :nd], M[:, nd:]
    AB = np.repeat(A[None], nd, axis=0)
    BA = np.repeat(B[None], nd, axis=0)
    for i in range(nd):
        AB[i, :, i] = B[:, i]
        BA[i, :, i] = A[:, i]
    return SaltelliDesign(A, B, AB, BA)


def split_stacked(Y: np.ndarray, N: int, nd: int):
    """Inverse of :meth:`SaltelliDesign.stacked` for model outputs (leading axis)."""
    Y = np.asarray(Y)
    fA, fB = Y[:N], Y[N:2 * N]
    fAB = Y[2 * N:(2 + nd) * N].reshape(nd, N, *Y.shape[1:])
    fBA = Y[(2 + nd) * N:(2 + 2 * nd) * N].reshape(nd, N, *Y.shape[1:])
    return fA, fB, fAB, fBA
