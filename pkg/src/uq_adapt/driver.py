"""Adaptive level loop, stopping rule, final UQ step, and run persistence."""

from __future__ import annotations

import datetime as _dt
import functools
import json
import logging
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .clustering import ClusterResult, align_labels, kmeans, order_by_share
from .evaluator import BenchmarkSpec, EvaluationRecord, EvaluatorError, evaluate_batch
from .param_space import ConfigError, RunConfig, config_from_dict, config_to_dict, to_physical
from .reduction import KernelDescriptor, ReducedModel, fit_kpca, gram, backward_map, select_kernel
from .rundir import FORMAT, RunDirectory, RunDirectoryError, csv_matrix, csv_text, fmt, read_csv, sha256
from .sampling import halton_block, mc_block, saltelli_design
from .sensitivity import SobolResult, UndefinedIndexError, indices_from_outputs
from .surrogate import SurrogateBank, Variogram, VariogramBins, fit_ok, predict_bank

log = logging.getLogger(__name__)

# PRNG stream tags, combined with (seed, level) into a SeedSequence key
STREAM_SOBOL, STREAM_MC, STREAM_KMEANS, STREAM_REPORT = 1, 2, 3, 4
SPARE_BASE = 1_000_000
HIST_BINS = 50

Evaluate = Callable[..., list]


@dataclass
class LevelRecord:
    level: int
    ns: int
    k_retained: int
    kernel: str
    tracked: dict[str, float | None]
    retained_fraction: float = 0.0
    wall_time: float = field(default=0.0, compare=False)
    finished_at: str = field(default="", compare=False)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "LevelRecord":
        return cls(**json.loads(text))


@dataclass
class LevelFit:
    model: ReducedModel
    bank: SurrogateBank
    sobol: list[SobolResult]
    clusters: ClusterResult   # assignments dropped after the level finishes


@dataclass
class RunState:
    config: RunConfig
    H: np.ndarray                       # ns x nd physical inputs
    X: np.ndarray                       # ns x d outputs
    sample_ids: list[int]
    records: list[LevelRecord] = field(default_factory=list)
    status: str = "running"
    replacements: dict[int, int] = field(default_factory=dict)
    journal: dict[int, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)
    level_files: dict[int, dict[str, str]] = field(default_factory=dict)
    fit: LevelFit | None = None
    n_evaluations: int = 0              # expensive calls made by this process

    @property
    def ns(self) -> int:
        return len(self.sample_ids)

    @property
    def level(self) -> int:
        return len(self.records)

    @classmethod
    def new(cls, config: RunConfig) -> "RunState":
        return cls(config, np.empty((0, config.nd)), np.empty((0, 0)), [])


@dataclass
class Convergence:
    converged: bool
    variances: dict[str, float]
    reason: str = ""


@dataclass
class UQReport:
    status: str
    levels: int
    ns: int
    k: int
    mode_shares: list[float]
    mode_centroids: list[list[float]]
    sobol: list[dict]
    qoi_mean: float
    qoi_variance: float
    qoi_std: float
    histogram_counts: list[int]
    histogram_edges: list[float]
    traces: dict[str, list[float]]
    reconstructions: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# small pure helpers


def level_seed(cfg: RunConfig, level: int, stream: int) -> tuple[int, int, int]:
    return (cfg.seed, 0 if cfg.fixed_design else level, stream)


def qoi_average(x) -> np.ndarray | float:
    """Element-average of an output field (``d``-vector, or ``d x n`` columns)."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] == 0:
        raise ValueError("empty output vector")
    return float(x.mean()) if x.ndim == 1 else x.mean(axis=0)


def _value(v) -> float | None:
    # undefined indices (flat component) are stored as None so records stay comparable and valid JSON
    v = float(v)
    return v if np.isfinite(v) else None


def tracker_values(sobol: Sequence[SobolResult], clusters: ClusterResult) -> dict[str, float | None]:
    out: dict[str, float | None] = {}
    for res in sobol:
        m = res.component
        for i in range(res.nd):
            out[f"c{m}.S{i + 1}"] = _value(res.first[i])
        for i in range(res.nd):
            out[f"c{m}.ST{i + 1}"] = _value(res.total[i])
        for (i, j), v in res.pairs():
            out[f"c{m}.S{i + 1}_{j + 1}"] = _value(v)
    for c, share in enumerate(clusters.shares):
        out[f"mode{c}"] = float(share)
    return out


def check_convergence(records: Sequence[LevelRecord], s: int, var_s: float, var_m: float) -> Convergence:
    """Trailing-window sample variance of every tracker against its threshold."""
    if len(records) < s:
        raise ValueError(f"need at least s={s} completed levels, have {len(records)}")
    window = list(records)[-s:]
    keys = set(window[0].tracked)
    if any(r.k_retained != window[0].k_retained or set(r.tracked) != keys for r in window):
        return Convergence(False, {}, "retained component count changed inside the window")
    variances = {}
    ok = True
    for key in sorted(keys):
        vals = np.array([np.nan if r.tracked[key] is None else r.tracked[key] for r in window], dtype=float)
        v = float(np.var(vals, ddof=1))
        variances[key] = v
        limit = var_m if key.startswith("mode") else var_s
        if not (v <= limit):
            ok = False
    return Convergence(ok, variances, "" if ok else "variance above threshold")


def _orient(model: ReducedModel, prev: ReducedModel | None) -> ReducedModel:
    """Flip component signs to agree with the previous level's scores on shared samples."""
    if prev is None:
        return model
    n = prev.ns
    signs = np.ones(model.k)
    for m in range(min(model.k, prev.k)):
        if float(np.dot(model.Z[m, :n], prev.Z[m])) < 0:
            signs[m] = -1.0
    return model.flip(signs) if np.any(signs < 0) else model


def _sobol_per_component(bank: SurrogateBank, space, N: int, seed) -> list[SobolResult]:
    """Indices for each component; a constant component gets NaN indices instead of aborting the level."""
    design = saltelli_design(N, space.nd, seed)
    Z = predict_bank(bank, to_physical(design.stacked(), space))
    out = []
    for m in range(bank.k):
        try:
            out.append(indices_from_outputs(Z[m], N, space.nd, component=m + 1))
        except UndefinedIndexError:
            nan = np.full(space.nd, np.nan)
            out.append(SobolResult(m + 1, nan, np.full((space.nd, space.nd), np.nan), nan.copy(), 0.0, N))
    return out


# ---------------------------------------------------------------------------
# level files


def _journal_header(nd: int) -> str:
    return f"# sample_id, h_1..h_{nd}, x_1..x_d"


def _journal_line(sid: int, h, x) -> str:
    return ",".join([str(sid), *(fmt(v) for v in h), *(fmt(v) for v in x)])


def _journal_text(state: RunState) -> str:
    lines = [_journal_header(state.config.nd)]
    lines += [_journal_line(sid, h, x) for sid, (h, x) in state.journal.items()]
    return "\n".join(lines) + "\n"


def _parse_journal(text: str, nd: int) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    out = {}
    lines = text.splitlines()
    for ln in lines[1:]:
        parts = ln.split(",")
        try:
            sid = int(parts[0])
            vals = np.array([float(v) for v in parts[1:]])
        except ValueError:
            continue   # torn final line from an interrupted write
        if len(vals) <= nd:
            continue
        out[sid] = (vals[:nd], vals[nd:])
    if out:
        lengths = [len(x) for _, x in out.values()]
        d = max(set(lengths), key=lengths.count)
        out = {sid: hx for sid, hx in out.items() if len(hx[1]) == d}
    return out


def _level_files(state: RunState, rec: LevelRecord, fit: LevelFit, new: slice) -> dict[str, str]:
    cfg, model = state.config, fit.model
    nd, k = cfg.nd, model.k
    ids = state.sample_ids
    files = {
        "inputs.csv": csv_text(["sample_id", *[f"h{i + 1}" for i in range(nd)]],
                               [[str(ids[r]), *state.H[r]] for r in range(new.start, new.stop)]),
        "outputs.csv": csv_text(["sample_id", *[f"x{j + 1}" for j in range(state.X.shape[1])]],
                                [[str(ids[r]), *state.X[r]] for r in range(new.start, new.stop)]),
        "scores.csv": csv_text(["sample_id", *[f"z{m + 1}" for m in range(k)]],
                               [[str(ids[r]), *model.Z[:, r]] for r in range(model.ns)]),
        "eigvals.csv": csv_text(["index", "eigval"], [[str(i + 1), v] for i, v in enumerate(model.eigvals)]),
        "alphas.csv": csv_text(["sample_id", *[f"alpha{m + 1}" for m in range(k)]],
                               [[str(ids[r]), *model.alphas[r]] for r in range(model.ns)]),
        "centering.csv": csv_text(["sample_id", "col_mean"],
                                  [[str(ids[r]), model.col_means[r]] for r in range(model.ns)]
                                  + [["grand", model.grand_mean]]),
        "kpca.json": json.dumps({"kernel": asdict(model.kernel), "k": k}, sort_keys=True) + "\n",
    }
    vrows, brows = [], []
    for m, km in enumerate(fit.bank.models):
        v = km.variogram
        b = km.bins
        vrows.append([str(m + 1), v.nugget, v.psill, v.range,
                      b.max_lag if b is not None else float("nan"),
                      b.y_var if b is not None else float("nan"), km.jitter])
        if b is not None:
            for lag, g, n in zip(b.lags, b.semivariance, b.counts):
                brows.append([str(m + 1), lag, g, str(int(n)), float(v(lag))])
    files["variogram.csv"] = csv_text(["component", "nugget", "psill", "range", "max_lag", "y_var", "jitter"], vrows)
    files["variogram_bins.csv"] = csv_text(["component", "lag", "semivariance", "pairs", "fitted"], brows)

    srows = []
    for res in fit.sobol:
        m = str(res.component)
        srows.append([m, "var_y", "", "", res.var_y])
        srows += [[m, "first", str(i + 1), "", res.first[i]] for i in range(res.nd)]
        srows += [[m, "total", str(i + 1), "", res.total[i]] for i in range(res.nd)]
        srows += [[m, "second", str(i + 1), str(j + 1), v] for (i, j), v in res.pairs()]
    files["sobol.csv"] = csv_text(["component", "kind", "i", "j", "value"], srows)
    files["clusters.csv"] = csv_text(["cluster", "share", *[f"c{m + 1}" for m in range(k)]],
                                     [[str(c), fit.clusters.shares[c], *fit.clusters.centroids[c]]
                                      for c in range(fit.clusters.K)])
    files["record.json"] = rec.to_json()
    return files


def _manifest(state: RunState) -> dict:
    return {
        "format": FORMAT,
        "config": config_to_dict(state.config),
        "status": state.status,
        "levels": [{"level": lvl, "files": {n: sha256(t) for n, t in sorted(files.items())}}
                   for lvl, files in sorted(state.level_files.items())],
        "replacements": {str(a): b for a, b in sorted(state.replacements.items())},
        "seeds": {str(r.level): {"sobol": list(level_seed(state.config, r.level, STREAM_SOBOL)),
                                 "mc": list(level_seed(state.config, r.level, STREAM_MC)),
                                 "kmeans": list(level_seed(state.config, r.level, STREAM_KMEANS))}
                  for r in state.records},
    }


def _sobol_from_csv(text: str, nd: int, N: int) -> list[SobolResult]:
    _, rows = read_csv(text)
    comps: dict[int, dict] = {}
    for comp, kind, i, j, value in rows:
        c = comps.setdefault(int(comp), {"first": np.full(nd, np.nan), "total": np.full(nd, np.nan),
                                         "second": np.full((nd, nd), np.nan), "var_y": 0.0})
        v = float(value)
        if kind == "var_y":
            c["var_y"] = v
        elif kind == "second":
            c["second"][int(i) - 1, int(j) - 1] = v
        else:
            c[kind][int(i) - 1] = v
    return [SobolResult(m, c["first"], c["second"], c["total"], c["var_y"], N) for m, c in sorted(comps.items())]


def _fit_from_files(state: RunState, files: dict[str, str]) -> LevelFit:
    """Rebuild the last level's models exactly from its persisted artifacts."""
    cfg = state.config
    info = json.loads(files["kpca.json"])
    kernel = KernelDescriptor(**info["kernel"])
    k = int(info["k"])
    Xc = state.X.T.copy()
    _, crow = read_csv(files["centering.csv"])
    col_means = np.array([float(r[1]) for r in crow[:-1]])
    grand = float(crow[-1][1])
    eig = csv_matrix(files["eigvals.csv"], skip=1)[:, 0]
    alphas = csv_matrix(files["alphas.csv"], skip=1).reshape(-1, k)
    Z = csv_matrix(files["scores.csv"], skip=1).reshape(-1, k).T.copy()
    model = ReducedModel(kernel, Xc, gram(Xc, Xc, kernel), col_means, grand, eig, alphas, k, Z)

    vg = csv_matrix(files["variogram.csv"], skip=1)
    bins_all = csv_matrix(files["variogram_bins.csv"])
    models = []
    for m in range(k):
        nug, ps, rng, max_lag, y_var, _jit = vg[m]
        km = fit_ok(state.H, Z[m], Variogram(nug, ps, rng), cfg.space.means, cfg.space.stds)
        sel = bins_all[bins_all[:, 0] == m + 1] if len(bins_all) else np.empty((0, 5))
        bins = VariogramBins(sel[:, 1], sel[:, 2], sel[:, 3].astype(int), max_lag, y_var) if len(sel) else None
        models.append(replace(km, bins=bins))
    sobol = _sobol_from_csv(files["sobol.csv"], cfg.nd, cfg.sobol_n)
    cl = csv_matrix(files["clusters.csv"])
    clusters = ClusterResult(np.empty(0, dtype=int), cl[:, 2:].reshape(len(cl), k), cl[:, 1], float("nan"))
    return LevelFit(model, SurrogateBank(tuple(models)), sobol, clusters)


# ---------------------------------------------------------------------------
# level execution


def _default_evaluate(cfg: RunConfig, benchmark: BenchmarkSpec):
    return functools.partial(evaluate_batch, evaluator=cfg.evaluator, parallelism=cfg.parallelism,
                             benchmark=benchmark)


def _halton_rows(cfg: RunConfig, ids: Sequence[int]) -> np.ndarray:
    return np.vstack([halton_block(i, 1, cfg.nd, offset=cfg.halton_offset).points for i in ids])


def _acquire(state: RunState, ids: list[int], evaluate: Evaluate, store: RunDirectory | None):
    """Evaluate (or recover from the journal) the samples ``ids``; returns (H, X, final ids)."""
    cfg = state.config
    final_ids = [state.replacements.get(i, i) for i in ids]
    H = to_physical(_halton_rows(cfg, final_ids), cfg.space)
    todo = [r for r, sid in enumerate(final_ids) if sid not in state.journal]

    def journal(rec: EvaluationRecord):
        if rec.ok:
            state.journal[rec.sample_id] = (rec.h, rec.x)
            if store is not None:
                store.append_journal(_journal_line(rec.sample_id, rec.h, rec.x), _journal_header(cfg.nd))

    attempts = 0
    while todo:
        d = state.X.shape[1] if state.ns else None
        recs = evaluate(H[todo], sample_ids=[final_ids[r] for r in todo], d=d, on_record=journal)
        state.n_evaluations += len(todo)
        failed = [r for r, rec in zip(todo, recs) if not rec.ok]
        if not failed:
            break
        if not cfg.evaluator.skip_failed:
            bad = ", ".join(f"{final_ids[r]} ({rec.message})" for r, rec in zip(todo, recs) if not rec.ok)
            raise EvaluatorError(f"expensive evaluation failed for sample(s) {bad}")
        attempts += len(failed)
        if attempts > 10 * cfg.ncon:
            raise EvaluatorError("too many failed evaluations while resampling replacements")
        for r in failed:
            spare = SPARE_BASE + len(state.replacements) + 1
            state.replacements[ids[r]] = spare
            final_ids[r] = spare
            log.warning("sample %d failed; replaced by Halton index %d", ids[r], spare)
        H = to_physical(_halton_rows(cfg, final_ids), cfg.space)
        todo = failed

    X = np.vstack([state.journal[sid][1] for sid in final_ids])
    H = np.vstack([state.journal[sid][0] for sid in final_ids])
    return H, X, final_ids


def fit_level(state: RunState, level: int) -> LevelFit:
    """Steps B-D on the current training set: kPCA, kriging bank, Sobol indices, clustering."""
    cfg = state.config
    Xc = state.X.T
    kernel = cfg.kernel
    if cfg.auto_select:
        cands = list(cfg.candidates) or [cfg.kernel]
        if state.ns >= 5:
            kernel = select_kernel(Xc, cands, cfg.retain_fraction, seed=cfg.seed)
    model = fit_kpca(Xc, kernel, cfg.retain_fraction)
    model = _orient(model, state.fit.model if state.fit else None)

    bank = SurrogateBank(tuple(fit_ok(state.H, model.Z[m], center=cfg.space.means, scale=cfg.space.stds,
                                      n_bins=cfg.variogram_bins) for m in range(model.k)))
    sobol = _sobol_per_component(bank, cfg.space, cfg.sobol_n, level_seed(cfg, level, STREAM_SOBOL))

    U = mc_block(cfg.n_mc, cfg.nd, level_seed(cfg, level, STREAM_MC)).points
    Zmc = predict_bank(bank, to_physical(U, cfg.space))
    K = min(cfg.n_clusters, cfg.n_mc)
    clusters = kmeans(Zmc.T, K, seed=level_seed(cfg, level, STREAM_KMEANS))
    prev = state.fit.clusters if state.fit else None
    if prev is not None and prev.centroids.shape == clusters.centroids.shape:
        clusters = clusters.relabel(align_labels(prev.centroids, clusters.centroids))
    else:
        clusters = order_by_share(clusters)
    return LevelFit(model, bank, sobol, clusters)


def run_level(state: RunState, level: int, evaluate: Evaluate | None = None,
              store: RunDirectory | None = None, benchmark: BenchmarkSpec = BenchmarkSpec()) -> LevelRecord:
    """Run level ``level`` (A-D): add ``ncon`` samples, refit everything, record trackers."""
    cfg = state.config
    if level != state.level + 1:
        raise ValueError(f"level {level} requested but {state.level} levels are complete")
    t0 = time.perf_counter()
    evaluate = evaluate or _default_evaluate(cfg, benchmark)
    ids = list(range(cfg.ncon * (level - 1) + 1, cfg.ncon * level + 1))
    Hn, Xn, final_ids = _acquire(state, ids, evaluate, store)

    first = state.ns
    state.H = np.vstack([state.H, Hn])
    state.X = Xn if first == 0 else np.vstack([state.X, Xn])
    state.sample_ids = state.sample_ids + final_ids

    fit = fit_level(state, level)
    rec = LevelRecord(level=level, ns=state.ns, k_retained=fit.model.k, kernel=str(fit.model.kernel),
                      tracked=tracker_values(fit.sobol, fit.clusters),
                      retained_fraction=fit.model.retained_fraction,
                      wall_time=time.perf_counter() - t0,
                      finished_at=_dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"))
    fit.clusters = ClusterResult(np.empty(0, dtype=int), fit.clusters.centroids, fit.clusters.shares,
                                 fit.clusters.inertia, fit.clusters.restart_inertias)
    state.fit = fit
    state.records.append(rec)
    state.level_files[level] = _level_files(state, rec, fit, slice(first, state.ns))
    if store is not None:
        store.write_level(level, state.level_files[level])
        store.write_manifest(_manifest(state))
    log.info("level %d: ns=%d k=%d %s", level, state.ns, fit.model.k,
             " ".join(f"{k}={v:.4g}" for k, v in rec.tracked.items() if k.startswith("mode")))
    return rec


# ---------------------------------------------------------------------------
# final UQ step


def uq_report(state: RunState, at=None, n_mc: int | None = None) -> UQReport:
    """Step E: fresh Monte Carlo through surrogate + pre-image, QoI statistics and tables."""
    if state.fit is None or not state.records:
        raise ValueError("no completed level to report on")
    cfg, fit = state.config, state.fit
    n = cfg.n_mc if n_mc is None else n_mc
    U = mc_block(n, cfg.nd, (cfg.seed, 0, STREAM_REPORT)).points
    Z = predict_bank(fit.bank, to_physical(U, cfg.space))
    qoi = np.empty(n)
    for lo in range(0, n, 5000):
        qoi[lo:lo + 5000] = qoi_average(backward_map(fit.model, Z[:, lo:lo + 5000]))

    K = min(cfg.n_clusters, n)
    cl = kmeans(Z.T, K, seed=(cfg.seed, 0, STREAM_KMEANS))
    if fit.clusters.centroids.shape == cl.centroids.shape:
        cl = cl.relabel(align_labels(fit.clusters.centroids, cl.centroids))
    counts, edges = np.histogram(qoi, bins=HIST_BINS)

    traces: dict[str, list[float]] = {}
    for rec in state.records:
        for key, v in rec.tracked.items():
            traces.setdefault(key, []).append(v)

    sobol_tables = []
    for res in fit.sobol:
        sobol_tables.append({
            "component": res.component,
            "var_y": res.var_y,
            "first": [_value(v) for v in np.clip(res.first, 0, 1)],
            "total": [_value(v) for v in np.clip(res.total, 0, 1)],
            "second": {f"{i + 1},{j + 1}": _value(np.clip(v, 0, 1)) for (i, j), v in res.pairs()},
        })

    recon = []
    if at is not None:
        Hq = np.atleast_2d(np.asarray(at, dtype=float))
        if len(Hq):
            Zq = predict_bank(fit.bank, Hq)
            Xq = backward_map(fit.model, Zq)
            for r in range(len(Hq)):
                recon.append({"h": Hq[r].tolist(), "z": Zq[:, r].tolist(), "x": Xq[:, r].tolist(),
                              "qoi": float(qoi_average(Xq[:, r]))})

    return UQReport(
        status=state.status, levels=state.level, ns=state.ns, k=fit.model.k,
        mode_shares=cl.shares.tolist(), mode_centroids=cl.centroids.tolist(), sobol=sobol_tables,
        qoi_mean=float(qoi.mean()), qoi_variance=float(qoi.var()), qoi_std=float(qoi.std()),
        histogram_counts=counts.tolist(), histogram_edges=edges.tolist(), traces=traces,
        reconstructions=recon,
    )


# ---------------------------------------------------------------------------
# whole run, snapshot / resume


def _check_compatible(cfg: RunConfig, saved: RunConfig):
    if cfg.ncon != saved.ncon:
        raise RunDirectoryError(f"config ncon={cfg.ncon} differs from the run's ncon={saved.ncon}; "
                                "resuming would break sample nesting")
    if cfg.halton_offset != saved.halton_offset or cfg.space != saved.space:
        raise RunDirectoryError("config changes the input space or Halton offset of an existing run")


def snapshot(state: RunState, path) -> RunDirectory:
    """Write the complete run state (all levels, journal, manifest) to ``path``."""
    store = RunDirectory(path)
    for lvl, files in sorted(state.level_files.items()):
        store.write_level(lvl, files)
    store.write_journal(_journal_text(state))
    store.write_manifest(_manifest(state))
    return store


def resume(path, config: RunConfig | None = None) -> RunState:
    """Rebuild a :class:`RunState` from a run directory.

    Levels missing from the manifest (interrupted mid-level) are discarded; their
    journaled evaluations are kept and reused.
    """
    store = RunDirectory(path)
    manifest = store.read_manifest()
    saved = config_from_dict(manifest["config"])
    if config is not None:
        _check_compatible(config, saved)
        cfg = config
    else:
        cfg = saved
    levels = sorted(manifest["levels"], key=lambda e: e["level"])
    if [e["level"] for e in levels] != list(range(1, len(levels) + 1)):
        raise RunDirectoryError("manifest levels are not contiguous from 1")
    store.discard_incomplete({e["level"] for e in levels})

    state = RunState.new(cfg)
    state.status = manifest["status"] if config is None or config == saved else "running"
    state.replacements = {int(a): int(b) for a, b in manifest.get("replacements", {}).items()}
    jt = store.read_journal()
    if jt is not None:
        state.journal = _parse_journal(jt, cfg.nd)

    Hs, Xs, ids = [], [], []
    for e in levels:
        files = store.read_level(e["level"], e["files"])
        state.level_files[e["level"]] = files
        state.records.append(LevelRecord.from_json(files["record.json"]))
        _, rows = read_csv(files["inputs.csv"])
        ids += [int(r[0]) for r in rows]
        Hs.append(csv_matrix(files["inputs.csv"], skip=1))
        Xs.append(csv_matrix(files["outputs.csv"], skip=1))
    if levels:
        state.H = np.vstack(Hs)
        state.X = np.vstack(Xs)
        state.sample_ids = ids
        for sid, h, x in zip(ids, state.H, state.X):
            if sid not in state.journal:
                state.journal[sid] = (h.copy(), x.copy())
        state.fit = _fit_from_files(state, state.level_files[levels[-1]["level"]])
    return state


def run_adaptive(config: RunConfig, out=None, evaluate: Evaluate | None = None,
                 state: RunState | None = None, benchmark: BenchmarkSpec = BenchmarkSpec(),
                 progress: Callable[[LevelRecord, Convergence | None], None] | None = None,
                 max_levels: int | None = None):
    """Iterate levels until the stopping rule holds or ``max_levels`` is reached; then run step E.

    Returns ``(state, report)``. ``out`` (optional) is the run directory; with
    ``state`` given, the loop continues from its last completed level.
    ``max_levels`` overrides the config's cap for this call (it may be below ``s``).
    """
    cap = config.max_levels if max_levels is None else max_levels
    if config.scramble:
        raise ConfigError("sampling.scramble breaks Halton nesting and is not allowed in adaptive runs")
    store = RunDirectory(out) if out is not None else None
    if state is None:
        state = RunState.new(config)
        if store is not None:
            store.write_manifest(_manifest(state))
    state.config = config
    if state.status == "exhausted" and state.level < cap:
        state.status = "running"

    while state.status == "running":
        if state.level >= cap:
            state.status = "exhausted"
            break
        rec = run_level(state, state.level + 1, evaluate, store, benchmark)
        conv = None
        if state.level >= config.s:
            conv = check_convergence(state.records, config.s, config.var_s, config.var_m)
            if conv.converged:
                state.status = "converged"
        if progress:
            progress(rec, conv)
    if store is not None:
        store.write_manifest(_manifest(state))

    report = uq_report(state)
    if store is not None:
        store.write_file("report.json", json.dumps(report.to_dict(), indent=1) + "\n")
    return state, report
