"""Stochastic input space, run configuration and the unit-cube -> physical map."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Sequence

import numpy as np
from scipy.special import erfc

from .reduction import KernelDescriptor


class ConfigError(ValueError):
    """Raised for malformed configuration documents or invariant violations."""


# Tapered-specimen benchmark: means and relative standard deviations (percent).
TABLE1_MEANS = (20.0, 70.0, 120.0, 212.0, 360.0, 460.0)
TABLE1_STD_PCT = (5.5, 5.5, 3.0, 5.5, 2.5, 3.0)


# ---------------------------------------------------------------------------
# standard normal CDF / quantile

_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549671010229528e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def norm_cdf(x):
    return 0.5 * erfc(-np.asarray(x, dtype=float) / math.sqrt(2.0))


def norm_ppf(p):
    """Standard normal quantile.

    Rational approximation (|rel. error| < 1.2e-9) followed by one Halley
    step against ``erfc``; accurate to a few ulp on (0, 1).
    """
    p = np.asarray(p, dtype=float)
    scalar = p.ndim == 0
    p = np.atleast_1d(p)
    if np.any((p <= 0.0) | (p >= 1.0)) or not np.all(np.isfinite(p)):
        raise ValueError("quantile argument must lie in the open interval (0, 1)")

    x = np.empty_like(p)
    lo = p < _P_LOW
    hi = p > 1.0 - _P_LOW
    mid = ~(lo | hi)

    q = p[mid] - 0.5
    r = q * q
    x[mid] = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / (
        ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0)

    for mask, sign, tail in ((lo, 1.0, p[lo]), (hi, -1.0, 1.0 - p[hi])):
        q = np.sqrt(-2.0 * np.log(tail))
        x[mask] = sign * (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / (
            (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)

    # Halley refinement; upper tail handled via the complement to avoid cancellation
    e = np.where(hi, -(0.5 * erfc(x / math.sqrt(2.0)) - (1.0 - p)), norm_cdf(x) - p)
    u = e * math.sqrt(2.0 * math.pi) * np.exp(0.5 * x * x)
    x = x - u / (1.0 + 0.5 * x * u)
    return float(x[0]) if scalar else x


# ---------------------------------------------------------------------------
# configuration types


@dataclass(frozen=True)
class Marginal:
    mean: float
    std: float


@dataclass(frozen=True)
class ParamSpace:
    """Independent Gaussian marginals, one per input dimension."""

    marginals: tuple[Marginal, ...]

    def __post_init__(self):
        if len(self.marginals) < 1:
            raise ConfigError("space: at least one marginal is required")
        for i, m in enumerate(self.marginals, start=1):
            if not (math.isfinite(m.mean) and math.isfinite(m.std)):
                raise ConfigError(f"marginal {i}: mean and std must be finite")
            if m.std <= 0:
                raise ConfigError(f"marginal {i}: std must be positive")

    @classmethod
    def from_arrays(cls, means: Sequence[float], stds: Sequence[float]) -> "ParamSpace":
        return cls(tuple(Marginal(float(m), float(s)) for m, s in zip(means, stds, strict=True)))

    @classmethod
    def benchmark(cls) -> "ParamSpace":
        return cls.from_arrays(TABLE1_MEANS, [m * p / 100.0 for m, p in zip(TABLE1_MEANS, TABLE1_STD_PCT)])

    @property
    def nd(self) -> int:
        return len(self.marginals)

    @property
    def means(self) -> np.ndarray:
        return np.array([m.mean for m in self.marginals])

    @property
    def stds(self) -> np.ndarray:
        return np.array([m.std for m in self.marginals])

    def standardize(self, h) -> np.ndarray:
        return (np.asarray(h, dtype=float) - self.means) / self.stds


def to_physical(u, space: ParamSpace) -> np.ndarray:
    """Map unit-hypercube points (rows) to physical inputs, h = mu + sigma * Phi^-1(u)."""
    u = np.asarray(u, dtype=float)
    if u.shape[-1] != space.nd:
        raise ValueError(f"expected {space.nd} coordinates, got {u.shape[-1]}")
    if np.any((u <= 0.0) | (u >= 1.0)):
        raise ValueError("unit-cube coordinates must lie strictly inside (0, 1)")
    return space.means + space.stds * norm_ppf(u)


def to_unit(h, space: ParamSpace) -> np.ndarray:
    return norm_cdf(space.standardize(h))


@dataclass(frozen=True)
class EvaluatorConfig:
    kind: str = "builtin"
    command: str | None = None
    workdir: str | None = None
    skip_failed: bool = False

    def __post_init__(self):
        if self.kind not in ("builtin", "external"):
            raise ConfigError(f"evaluator.kind: unknown kind {self.kind!r}")
        if self.kind == "external" and not self.command:
            raise ConfigError("evaluator.command: required for external evaluators")


@dataclass(frozen=True)
class RunConfig:
    space: ParamSpace
    evaluator: EvaluatorConfig = field(default_factory=EvaluatorConfig)
    ncon: int = 10
    s: int = 5
    var_s: float = 1e-4
    var_m: float = 1.0
    max_levels: int = 100
    retain_fraction: float = 0.90
    kernel: KernelDescriptor = field(default_factory=lambda: KernelDescriptor("polynomial", b=0.1, p=3))
    auto_select: bool = False
    candidates: tuple[KernelDescriptor, ...] = ()
    n_mc: int = 100_000
    n_clusters: int = 2
    seed: int = 0
    sobol_n: int = 2**13
    fixed_design: bool = True
    halton_offset: int = 20
    scramble: bool = False
    variogram_bins: int = 15
    name: str = "run"
    parallelism: int = 1

    def __post_init__(self):
        checks = [
            ("adaptive.ncon", self.ncon >= 1, "must be >= 1"),
            ("adaptive.s", self.s >= 2, "must be >= 2"),
            ("adaptive.max_levels", self.max_levels >= self.s, "must be >= s"),
            ("adaptive.var_s", self.var_s >= 0, "must be >= 0"),
            ("adaptive.var_m", self.var_m >= 0, "must be >= 0"),
            ("analysis.n_mc", self.n_mc >= 1000, "must be >= 1000"),
            ("analysis.n_clusters", self.n_clusters >= 1, "must be >= 1"),
            ("analysis.sobol_n", self.sobol_n >= 2, "must be >= 2"),
            ("reduction.retain_fraction", 0 < self.retain_fraction <= 1, "must lie in (0, 1]"),
            ("sampling.halton_offset", self.halton_offset >= 0, "must be >= 0"),
            ("surrogate.variogram_bins", self.variogram_bins >= 3, "must be >= 3"),
            ("run.parallelism", self.parallelism >= 1, "must be >= 1"),
        ]
        for name, ok, msg in checks:
            if not ok:
                raise ConfigError(f"{name}: {msg}")

    @property
    def nd(self) -> int:
        return self.space.nd

    def with_overrides(self, **changes) -> "RunConfig":
        return replace(self, **changes)


# ---------------------------------------------------------------------------
# config document <-> RunConfig

_SECTIONS = {
    "adaptive": {"ncon", "s", "var_s", "var_m", "max_levels"},
    "reduction": {"kernel", "retain_fraction", "auto_select", "candidates"},
    "analysis": {"n_mc", "n_clusters", "seed", "sobol_n", "fixed_design"},
    "sampling": {"halton_offset", "scramble"},
    "surrogate": {"variogram_bins"},
    "run": {"name", "parallelism"},
}


def _kernel_from(doc: Any, where: str) -> KernelDescriptor:
    if not isinstance(doc, dict) or "type" not in doc:
        raise ConfigError(f"{where}: expected an object with a 'type' key")
    unknown = set(doc) - {"type", "b", "p", "beta"}
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    kw = {k: doc[k] for k in ("b", "p", "beta") if k in doc}
    try:
        return KernelDescriptor(doc["type"], **kw)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _kernel_to(k: KernelDescriptor) -> dict:
    if k.type == "gaussian":
        return {"type": k.type, "beta": k.beta}
    if k.type == "polynomial":
        return {"type": k.type, "b": k.b, "p": k.p}
    return {"type": k.type}


def config_from_dict(doc: dict) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    unknown = set(doc) - {"space", "evaluator", *_SECTIONS}
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    if "space" not in doc or not isinstance(doc["space"], list):
        raise ConfigError("space: required list of {mean, std_pct | std_abs} records")

    marginals = []
    for i, rec in enumerate(doc["space"], start=1):
        if not isinstance(rec, dict) or "mean" not in rec:
            raise ConfigError(f"marginal {i}: expected {{mean, std_pct | std_abs}}")
        if ("std_pct" in rec) == ("std_abs" in rec):
            raise ConfigError(f"marginal {i}: give exactly one of std_pct, std_abs")
        mean = float(rec["mean"])
        std = float(rec["std_abs"]) if "std_abs" in rec else mean * float(rec["std_pct"]) / 100.0
        if std <= 0:
            raise ConfigError(f"marginal {i}: std must be positive")
        marginals.append(Marginal(mean, std))

    kw: dict[str, Any] = {"space": ParamSpace(tuple(marginals))}

    ev = doc.get("evaluator", {"kind": "builtin"})
    if not isinstance(ev, dict):
        raise ConfigError("evaluator: expected an object")
    unknown = set(ev) - {"kind", "command", "workdir", "skip_failed"}
    if unknown:
        raise ConfigError(f"evaluator: unknown keys {sorted(unknown)}")
    kw["evaluator"] = EvaluatorConfig(
        kind=ev.get("kind", "builtin"),
        command=ev.get("command"),
        workdir=ev.get("workdir"),
        skip_failed=bool(ev.get("skip_failed", False)),
    )

    for section, keys in _SECTIONS.items():
        body = doc.get(section, {})
        if not isinstance(body, dict):
            raise ConfigError(f"{section}: expected an object")
        extra = set(body) - keys
        if extra:
            raise ConfigError(f"{section}: unknown keys {sorted(extra)}")
        for key, value in body.items():
            if key == "kernel":
                kw["kernel"] = _kernel_from(value, "reduction.kernel")
            elif key == "candidates":
                kw["candidates"] = tuple(
                    _kernel_from(c, f"reduction.candidates[{j}]") for j, c in enumerate(value))
            else:
                kw[key] = value
    for key in ("ncon", "s", "max_levels", "n_mc", "n_clusters", "seed", "sobol_n",
                "halton_offset", "variogram_bins", "parallelism"):
        if key in kw:
            if isinstance(kw[key], bool) or int(kw[key]) != kw[key]:
                raise ConfigError(f"{key}: must be an integer")
            kw[key] = int(kw[key])
    for key in ("var_s", "var_m", "retain_fraction"):
        if key in kw:
            kw[key] = float(kw[key])
    return RunConfig(**kw)


def parse_config(text: str) -> RunConfig:
    """Parse and validate a JSON configuration document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed configuration document: {exc}") from None
    return config_from_dict(doc)


def config_to_dict(cfg: RunConfig) -> dict:
    ev = {k: v for k, v in asdict(cfg.evaluator).items() if v is not None}
    return {
        "space": [{"mean": m.mean, "std_abs": m.std} for m in cfg.space.marginals],
        "evaluator": ev,
        "adaptive": {"ncon": cfg.ncon, "s": cfg.s, "var_s": cfg.var_s, "var_m": cfg.var_m,
                     "max_levels": cfg.max_levels},
        "reduction": {"kernel": _kernel_to(cfg.kernel), "retain_fraction": cfg.retain_fraction,
                      "auto_select": cfg.auto_select,
                      "candidates": [_kernel_to(c) for c in cfg.candidates]},
        "analysis": {"n_mc": cfg.n_mc, "n_clusters": cfg.n_clusters, "seed": cfg.seed,
                     "sobol_n": cfg.sobol_n, "fixed_design": cfg.fixed_design},
        "sampling": {"halton_offset": cfg.halton_offset, "scramble": cfg.scramble},
        "surrogate": {"variogram_bins": cfg.variogram_bins},
        "run": {"name": cfg.name, "parallelism": cfg.parallelism},
    }


def serialize_config(cfg: RunConfig) -> str:
    return json.dumps(config_to_dict(cfg), indent=2, sort_keys=True) + "\n"


def benchmark_config(**overrides) -> RunConfig:
    """Default configuration for the built-in six-input benchmark."""
    return RunConfig(space=ParamSpace.benchmark(), name="benchmark", **overrides)
