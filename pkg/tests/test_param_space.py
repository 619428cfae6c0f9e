import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uq_adapt.param_space import (
    ConfigError,
    ParamSpace,
    RunConfig,
    benchmark_config,
    config_to_dict,
    norm_cdf,
    norm_ppf,
    parse_config,
    serialize_config,
    to_physical,
    to_unit,
)
from uq_adapt.reduction import KernelDescriptor


def erf_cdf(x):
    # independent reference: math.erf rather than scipy's erfc
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


TABLE1_DOC = {
    "space": [{"mean": m, "std_pct": p} for m, p in
              [(20, 5.5), (70, 5.5), (120, 3), (212, 5.5), (360, 2.5), (460, 3)]],
}


def test_table1_document_std_as_percent_of_mean():
    cfg = parse_config(json.dumps(TABLE1_DOC))
    np.testing.assert_allclose(cfg.space.means, [20, 70, 120, 212, 360, 460])
    np.testing.assert_allclose(cfg.space.stds, [1.1, 3.85, 3.6, 11.66, 9.0, 13.8], rtol=1e-14)
    assert cfg.space == ParamSpace.benchmark()


def test_defaults_applied():
    cfg = parse_config(json.dumps(TABLE1_DOC))
    assert (cfg.ncon, cfg.s, cfg.var_s, cfg.var_m) == (10, 5, 1e-4, 1.0)
    assert (cfg.retain_fraction, cfg.n_mc, cfg.n_clusters, cfg.max_levels) == (0.90, 100_000, 2, 100)
    assert cfg.kernel == KernelDescriptor("polynomial", b=0.1, p=3)
    assert cfg.evaluator.kind == "builtin"


def test_zero_std_reports_marginal():
    doc = json.loads(json.dumps(TABLE1_DOC))
    doc["space"][0] = {"mean": 20, "std_abs": 0.0}
    with pytest.raises(ConfigError, match="marginal 1: std must be positive"):
        parse_config(json.dumps(doc))


@pytest.mark.parametrize("section, body, field", [
    ("adaptive", {"ncon": 0}, "adaptive.ncon"),
    ("adaptive", {"s": 1}, "adaptive.s"),
    ("adaptive", {"max_levels": 3}, "adaptive.max_levels"),
    ("analysis", {"n_mc": 10}, "analysis.n_mc"),
    ("reduction", {"retain_fraction": 1.5}, "reduction.retain_fraction"),
])
def test_invariant_violations_name_the_field(section, body, field):
    doc = dict(TABLE1_DOC, **{section: body})
    with pytest.raises(ConfigError, match=field):
        parse_config(json.dumps(doc))


def test_malformed_documents():
    with pytest.raises(ConfigError, match="malformed"):
        parse_config("{not json")
    with pytest.raises(ConfigError, match="unknown"):
        parse_config(json.dumps(dict(TABLE1_DOC, adaptive={"nconn": 3})))
    with pytest.raises(ConfigError, match="exactly one"):
        parse_config(json.dumps({"space": [{"mean": 1, "std_pct": 1, "std_abs": 1}]}))
    with pytest.raises(ConfigError, match="integer"):
        parse_config(json.dumps(dict(TABLE1_DOC, adaptive={"ncon": 2.5})))
    with pytest.raises(ConfigError, match="kernel"):
        parse_config(json.dumps(dict(TABLE1_DOC, reduction={"kernel": {"type": "gaussian"}})))


def test_median_maps_to_mean():
    space = ParamSpace.benchmark()
    np.testing.assert_array_equal(to_physical(np.full(6, 0.5), space), space.means)


def test_phi_of_one_maps_to_mean_plus_sigma():
    space = ParamSpace.benchmark()
    u = np.full(6, erf_cdf(1.0))
    np.testing.assert_allclose(to_physical(u, space), space.means + space.stds, rtol=1e-13)


@pytest.mark.parametrize("bad", [0.0, 1.0])
def test_endpoints_rejected(bad):
    u = np.full(6, 0.3)
    u[2] = bad
    with pytest.raises(ValueError):
        to_physical(u, ParamSpace.benchmark())


def test_norm_ppf_against_erf_reference():
    p = np.concatenate([np.logspace(-12, -1, 30), np.linspace(0.05, 0.95, 31), 1 - np.logspace(-1, -12, 30)])
    x = norm_ppf(p)
    # erfc keeps full relative precision in each tail (1 + erf would cancel)
    lower = p < 0.5
    lower_ref = np.array([0.5 * math.erfc(-v / math.sqrt(2.0)) for v in x[lower]])
    np.testing.assert_allclose(lower_ref, p[lower], rtol=1e-13)
    upper_ref = np.array([0.5 * math.erfc(v / math.sqrt(2.0)) for v in x[~lower]])
    np.testing.assert_allclose(upper_ref, 1 - p[~lower], rtol=1e-9)


def test_norm_ppf_scalar_and_errors():
    assert norm_ppf(0.5) == 0.0
    assert isinstance(norm_ppf(0.25), float)
    with pytest.raises(ValueError):
        norm_ppf(1.0)
    with pytest.raises(ValueError):
        norm_ppf(np.nan)


@given(st.floats(1e-8, 1 - 1e-8))
def test_round_trip_unit_coordinate(u):
    space = ParamSpace.benchmark()
    h = to_physical(np.full(6, u), space)
    np.testing.assert_allclose(to_unit(h, space), u, atol=1e-12, rtol=0)


@given(st.floats(1e-6, 1 - 1e-6), st.floats(1e-6, 1 - 1e-6))
def test_monotone_in_each_coordinate(a, b):
    space = ParamSpace.from_arrays([0.0], [2.0])
    lo, hi = sorted((a, b))
    assert to_physical([[lo]], space)[0, 0] <= to_physical([[hi]], space)[0, 0]


kernels = st.one_of(
    st.just(KernelDescriptor("linear")),
    st.builds(lambda b, p: KernelDescriptor("polynomial", b=b, p=p), st.floats(0, 5), st.integers(1, 5)),
    st.builds(lambda beta: KernelDescriptor("gaussian", beta=beta), st.floats(1e-3, 1e3)),
)


@settings(max_examples=60)
@given(
    means=st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=8),
    ncon=st.integers(1, 50),
    s=st.integers(2, 10),
    var_s=st.floats(0, 1),
    kernel=kernels,
    seed=st.integers(0, 2**31),
    fixed=st.booleans(),
)
def test_serialize_parse_identity(means, ncon, s, var_s, kernel, seed, fixed):
    space = ParamSpace.from_arrays(means, [abs(m) * 0.05 + 0.1 for m in means])
    cfg = RunConfig(space=space, ncon=ncon, s=s, max_levels=s + 3, var_s=var_s, kernel=kernel,
                    seed=seed, fixed_design=fixed, candidates=(kernel,))
    assert parse_config(serialize_config(cfg)) == cfg


def test_benchmark_config_round_trip():
    cfg = benchmark_config()
    assert parse_config(json.dumps(config_to_dict(cfg))) == cfg
    assert cfg.nd == 6


def test_norm_cdf_symmetry():
    x = np.linspace(-8, 8, 101)
    np.testing.assert_allclose(norm_cdf(x) + norm_cdf(-x), 1.0, atol=1e-15)
