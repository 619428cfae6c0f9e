"""Variance-based sensitivity: Saltelli first-order, Jansen total, closed second-order indices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .param_space import ParamSpace, to_physical
from .sampling import saltelli_design, split_stacked
from .surrogate import SurrogateBank, predict_bank

DEFAULT_N = 2**13
REL_VAR_FLOOR = 1e-12


class UndefinedIndexError(ZeroDivisionError):
    """The output variance is zero, so no index is defined."""


def _prep(fA, fB, *others):
    arrays = [np.asarray(a, dtype=float) for a in (fA, fB, *others)]
    n = len(arrays[0])
    if n < 2 or any(len(a) != n for a in arrays):
        raise ValueError("estimator inputs must be equal-length vectors with N >= 2")
    both = np.concatenate(arrays[:2])
    var_y = float(np.var(both, ddof=1))
    # spread below ~1e-12 of the output magnitude is rounding noise, not variance
    if not var_y > (REL_VAR_FLOOR * np.max(np.abs(both))) ** 2:
        raise UndefinedIndexError("output variance is zero; Sobol indices are undefined")
    # centring leaves the estimators' expectations unchanged and cuts their variance
    mean = both.mean()
    return [a - mean for a in arrays], var_y


def first_order(fA, fB, fABi) -> float:
    """``S_i = mean(fB * (fABi - fA)) / Var_Y``."""
    (fA, fB, fABi), var_y = _prep(fA, fB, fABi)
    return float(np.mean(fB * (fABi - fA)) / var_y)


def total_order(fA, fB, fABi) -> float:
    """Jansen: ``S_Ti = mean((fA - fABi)^2) / (2 Var_Y)``."""
    (fA, fB, fABi), var_y = _prep(fA, fB, fABi)
    return float(0.5 * np.mean((fA - fABi) ** 2) / var_y)


def second_order(fA, fB, fABi, fABj, fBAi) -> float:
    """``S_ij = [mean(fBAi * fABj) - mean(fA * fB)] / Var_Y - S_i - S_j``."""
    (fA, fB, fABi, fABj, fBAi), var_y = _prep(fA, fB, fABi, fABj, fBAi)
    closed = (np.mean(fBAi * fABj) - np.mean(fA * fB)) / var_y
    s_i = np.mean(fB * (fABi - fA)) / var_y
    s_j = np.mean(fB * (fABj - fA)) / var_y
    return float(closed - s_i - s_j)


@dataclass(frozen=True)
class SobolResult:
    component: int            # 1-based
    first: np.ndarray         # (nd,)
    second: np.ndarray        # (nd, nd), upper triangle filled, NaN elsewhere
    total: np.ndarray         # (nd,)
    var_y: float
    n: int

    @property
    def nd(self) -> int:
        return len(self.first)

    def pairs(self):
        i, j = np.triu_indices(self.nd, k=1)
        return [((a, b), float(self.second[a, b])) for a, b in zip(i, j)]


def indices_from_outputs(f, N: int, nd: int, component: int = 1) -> SobolResult:
    """All first, second and total indices from outputs on a stacked Saltelli design."""
    fA, fB, fAB, fBA = split_stacked(np.asarray(f, dtype=float), N, nd)
    (fA, fB, *rest), var_y = _prep(fA, fB, *fAB, *fBA)
    fAB, fBA = rest[:nd], rest[nd:]
    first = np.array([np.mean(fB * (fAB[i] - fA)) for i in range(nd)]) / var_y
    total = np.array([0.5 * np.mean((fA - fAB[i]) ** 2) for i in range(nd)]) / var_y
    f0sq = np.mean(fA * fB)
    second = np.full((nd, nd), np.nan)
    for i in range(nd):
        for j in range(i + 1, nd):
            closed = (np.mean(fBA[i] * fAB[j]) - f0sq) / var_y
            second[i, j] = closed - first[i] - first[j]
    return SobolResult(component, first, second, total, var_y, N)


def sobol_indices(func, nd: int, N: int, seed, transform=None) -> SobolResult:
    """Estimate indices of a vectorised scalar ``func`` of unit-cube rows (after optional ``transform``)."""
    design = saltelli_design(N, nd, seed)
    rows = design.stacked()
    if transform is not None:
        rows = transform(rows)
    return indices_from_outputs(func(rows), N, nd)


def sobol_analysis(bank: SurrogateBank, space: ParamSpace, N: int = DEFAULT_N, seed=0) -> list[SobolResult]:
    """Indices for every reduced component, evaluated through the surrogate bank only."""
    design = saltelli_design(N, space.nd, seed)
    H = to_physical(design.stacked(), space)
    Z = predict_bank(bank, H)
    return [indices_from_outputs(Z[m], N, space.nd, component=m + 1) for m in range(bank.k)]
