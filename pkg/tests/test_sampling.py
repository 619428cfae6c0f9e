import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uq_adapt.sampling import (
    PRIMES,
    halton_block,
    halton_point,
    mc_block,
    radical_inverse,
    saltelli_design,
    split_stacked,
)


def test_radical_inverse_zero_offset_examples():
    np.testing.assert_array_equal(halton_point(1, 2, offset=0), [0.5, 1 / 3])
    assert halton_point(3, 1, offset=0)[0] == 0.75


def test_default_offset_skips_twenty():
    np.testing.assert_array_equal(halton_point(1, 6), halton_point(21, 6, offset=0))


def digits_reference(n, base):
    # plain-Python digit expansion, independent of the vectorised version
    x, f = 0.0, 1.0 / base
    while n:
        n, d = divmod(n, base)
        x += d * f
        f /= base
    return x


@given(st.integers(0, 10**9), st.sampled_from(PRIMES))
def test_radical_inverse_matches_reference(n, base):
    assert radical_inverse([n], base)[0] == digits_reference(n, base)


def test_block_equals_points():
    B = halton_block(11, 10, 6).points
    np.testing.assert_array_equal(B, halton_block(1, 20, 6).points[10:])
    np.testing.assert_array_equal(B[3], halton_point(14, 6))


@settings(max_examples=50)
@given(st.integers(1, 500), st.integers(0, 300), st.integers(0, 300), st.integers(1, 16))
def test_prefix_nesting(start, m, extra, nd):
    long = halton_block(start, m + extra, nd).points
    short = halton_block(start, m, nd).points
    np.testing.assert_array_equal(long[:m], short)


def test_open_unit_cube():
    P = halton_block(1, 1000, 6).points
    assert P.min() > 0 and P.max() < 1
    U = mc_block(10_000, 16, 3).points
    assert U.min() > 0 and U.max() < 1


def test_dimension_limits():
    with pytest.raises(ValueError):
        halton_point(1, 17)
    with pytest.raises(ValueError):
        halton_block(0, 5, 3)


def test_scrambled_block_differs_but_stays_in_cube():
    plain = halton_block(1, 50, 4).points
    scr = halton_block(1, 50, 4, scramble=True, seed=1).points
    assert not np.array_equal(plain, scr)
    assert scr.min() > 0 and scr.max() < 1
    np.testing.assert_array_equal(scr, halton_block(1, 50, 4, scramble=True, seed=1).points)


def test_mc_block_determinism_and_seeds():
    a = mc_block(100, 6, 7).points
    np.testing.assert_array_equal(a, mc_block(100, 6, 7).points)
    assert not np.array_equal(a, mc_block(100, 6, 8).points)
    np.testing.assert_array_equal(mc_block(5, 2, (1, 2, 3)).points, mc_block(5, 2, (1, 2, 3)).points)


def test_mc_block_mean_clt_band():
    m = mc_block(100_000, 1, 0).points.mean()
    assert 0.497 <= m <= 0.503


def box_discrepancy(P, rng, n_boxes=2000):
    a = rng.uniform(0, 1, (n_boxes, P.shape[1]))
    frac = np.all(P[None] < a[:, None], axis=2).mean(axis=1)
    return np.max(np.abs(frac - a.prod(axis=1)))


def test_halton_lower_box_discrepancy_than_pseudorandom():
    H = halton_block(1, 240, 6).points
    wins = sum(box_discrepancy(H, np.random.default_rng(s)) < box_discrepancy(mc_block(240, 6, s).points,
                                                                              np.random.default_rng(s))
               for s in range(10))
    assert wins >= 9


def test_saltelli_structure():
    d = saltelli_design(1000, 6, 0)
    assert d.stacked().shape == (14_000, 6)
    for i in range(6):
        for j in range(6):
            src_ab = d.B if j == i else d.A
            src_ba = d.A if j == i else d.B
            np.testing.assert_array_equal(d.AB[i][:, j], src_ab[:, j])
            np.testing.assert_array_equal(d.BA[i][:, j], src_ba[:, j])
    assert not np.array_equal(d.A, d.B)


def test_saltelli_split_inverts_stack():
    d = saltelli_design(8, 3, 1)
    fA, fB, fAB, fBA = split_stacked(d.stacked(), 8, 3)
    np.testing.assert_array_equal(fA, d.A)
    np.testing.assert_array_equal(fB, d.B)
    np.testing.assert_array_equal(fAB, d.AB)
    np.testing.assert_array_equal(fBA, d.BA)


def test_saltelli_needs_two_rows():
    with pytest.raises(ValueError):
        saltelli_design(1, 3, 0)
