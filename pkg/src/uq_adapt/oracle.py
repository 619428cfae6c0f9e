"""Brute-force reference computations on the built-in benchmark.

These never touch the surrogate path: plain Monte Carlo with i.i.d. Gaussian
inputs and nested-loop conditional variances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .evaluator import BenchmarkSpec, benchmark_terms, builtin_benchmark
from .param_space import ParamSpace
from .reduction import ReducedModel


@dataclass(frozen=True)
class OracleSummary:
    n: int
    left_share: float
    right_share: float
    qoi_mean: float
    qoi_variance: float
    qoi_std: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def analytic_left_share(spec: BenchmarkSpec = BenchmarkSpec()) -> float:
    """P(z4 - z6 < t) with z4, z6 independent standard normals, in percent."""
    return 100.0 * 0.5 * (1.0 + math.erf(spec.threshold / 2.0))


def benchmark_mc(space: ParamSpace, n: int, seed: int = 0, spec: BenchmarkSpec = BenchmarkSpec(),
                 chunk: int = 100_000) -> OracleSummary:
    """Mode shares and QoI statistics of the true benchmark by direct Monte Carlo."""
    rng = np.random.default_rng(seed)
    n_left = 0
    qoi = np.empty(n)
    for lo in range(0, n, chunk):
        m = min(chunk, n - lo)
        H = space.means + space.stds * rng.standard_normal((m, space.nd))
        _, right, _ = benchmark_terms(H, spec)
        n_left += int(np.count_nonzero(~right))
        qoi[lo:lo + m] = builtin_benchmark(H, spec).mean(axis=1)
    left = 100.0 * n_left / n
    return OracleSummary(n, left, 100.0 - left, float(qoi.mean()), float(qoi.var()), float(qoi.std()))


def double_loop_first_order(func, space: ParamSpace, dims, n_outer: int = 10_000, n_inner: int = 1_000,
                            seed: int = 0, chunk_rows: int = 200_000) -> dict[int, float]:
    """First-order indices ``Var(E[Y | h_i]) / Var(Y)`` by nested Monte Carlo.

    ``func`` maps physical input rows to scalar outputs. ``dims`` are 0-based.
    The total variance comes from an independent sample of ``n_outer * n_inner`` rows.
    """
    rng = np.random.default_rng(seed)
    nd = space.nd

    def draw(m):
        return space.means + space.stds * rng.standard_normal((m, nd))

    per_block = max(1, chunk_rows // n_inner)
    # total variance, streamed (Welford merge of chunk moments)
    total_n, mean, m2 = 0, 0.0, 0.0
    remaining = n_outer * n_inner
    while remaining:
        m = min(chunk_rows, remaining)
        y = func(draw(m))
        bm, bv = float(y.mean()), float(y.var()) * m
        delta = bm - mean
        tot = total_n + m
        mean += delta * m / tot
        m2 += bv + delta**2 * total_n * m / tot
        total_n = tot
        remaining -= m
    var_y = m2 / (total_n - 1)

    out = {}
    for i in dims:
        cond = np.empty(n_outer)
        for lo in range(0, n_outer, per_block):
            b = min(per_block, n_outer - lo)
            fixed = space.means[i] + space.stds[i] * rng.standard_normal(b)
            H = draw(b * n_inner)
            H[:, i] = np.repeat(fixed, n_inner)
            cond[lo:lo + b] = func(H).reshape(b, n_inner).mean(axis=1)
        # Var(cond) = V_i + (V - V_i) / n_inner; undo the inner-loop noise term
        v_i = (np.var(cond, ddof=1) - var_y / n_inner) / (1.0 - 1.0 / n_inner)
        out[i] = float(v_i / var_y)
    return out


def benchmark_score_fn(model: ReducedModel, component: int = 0, spec: BenchmarkSpec = BenchmarkSpec()):
    """Exact kPCA score of the true benchmark output, without forming the ``d``-vectors.

    Every benchmark field is ``A * bump(c) + e`` with ``c`` one of two centres, so
    inner products with the training outputs reduce to a handful of precomputed
    dot products. Returns ``func(H) -> scores`` for input rows ``H``.
    """
    if model.d != spec.d:
        raise ValueError("model was not trained on benchmark outputs of this size")
    Xt = model.X_train
    gl, gr = spec.bump(spec.c_left), spec.bump(spec.c_right)
    ones = np.ones(spec.d)
    dot_l, dot_r, dot_1 = gl @ Xt, gr @ Xt, ones @ Xt
    sq_train = np.sum(Xt * Xt, axis=0)
    alpha = model.alphas[:, component]
    kern = model.kernel

    def func(H):
        amp, right, off = benchmark_terms(H, spec)
        g_dot = np.where(right[:, None], dot_r[None, :], dot_l[None, :])
        inner = amp[:, None] * g_dot + off[:, None] * dot_1[None, :]     # n x ns
        if kern.type == "linear":
            Kq = inner
        elif kern.type == "polynomial":
            Kq = (inner + kern.b) ** kern.p
        else:
            g_sq = np.where(right, gr @ gr, gl @ gl)
            g_sum = np.where(right, gr.sum(), gl.sum())
            sq = amp**2 * g_sq + 2.0 * amp * off * g_sum + off**2 * spec.d
            Kq = np.exp(-kern.beta * np.maximum(sq[:, None] + sq_train[None, :] - 2.0 * inner, 0.0))
        Kc = Kq - model.col_means[None, :] - Kq.mean(axis=1)[:, None] + model.grand_mean
        return Kc @ alpha

    return func
