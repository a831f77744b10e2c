import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from optstop import mcsim
from optstop.rng import PathStreams, mix64

seeds = st.integers(0, 2**64 - 1)


@settings(max_examples=30, deadline=None)
@given(seed=seeds, counter=st.integers(0, 10**9))
def test_streams_are_pure_functions(seed, counter):
    a, b = PathStreams(seed, 8), PathStreams(seed, 8)
    idx = np.arange(8)
    np.testing.assert_array_equal(a.bits(idx, counter), b.bits(idx, counter))


@settings(max_examples=20, deadline=None)
@given(seed=seeds, n=st.integers(1, 50))
def test_adding_paths_leaves_existing_streams_alone(seed, n):
    small, big = PathStreams(seed, n), PathStreams(seed, n + 17)
    np.testing.assert_array_equal(small.keys, big.keys[:n])


def test_uniforms_are_open_and_flat():
    s = PathStreams(7, 200_000)
    u = s.uniform(np.arange(200_000), 3)
    assert u.min() > 0.0 and u.max() < 1.0
    hist, _ = np.histogram(u, bins=20, range=(0.0, 1.0))
    expected = 10_000
    chi2 = float(((hist - expected) ** 2 / expected).sum())
    assert chi2 < 45.0  # 19 dof, p ~ 1e-3


def test_normals_have_unit_moments():
    s = PathStreams(11, 100_000)
    z = s.increment(np.arange(100_000), 5)
    assert abs(z.mean()) < 0.02 and abs(z.std() - 1.0) < 0.02
    z0, z1 = s.normal_pair(np.arange(100_000), 0)
    assert abs(np.corrcoef(z0, z1)[0, 1]) < 0.02


def test_mix64_is_a_bijection_on_a_sample():
    x = np.arange(100_000, dtype=np.uint64)
    assert np.unique(mix64(x)).size == x.size


def test_seeds_give_different_streams():
    a, b = PathStreams(1, 4), PathStreams(2, 4)
    assert not np.any(a.keys == b.keys)


@settings(max_examples=20, deadline=None)
@given(seed=seeds, counter=st.integers(0, 10**6))
def test_compiled_uniform_matches(seed, counter):
    s = PathStreams(seed, 3)
    for p in range(3):
        assert mcsim._uniform(s.keys[p], counter) == s.uniform(np.array([p]), counter)[0]


def test_kernel_walk_replays_from_python_draws():
    n_paths, step = 40, 0.01
    a, b = -0.3, 0.25
    s = PathStreams(5, n_paths)
    grid = 64
    wcuts = np.zeros(0)
    arrays = (wcuts, np.array([-1.0]), np.array([2.0 / grid]), np.array([grid]), np.array([0]),
              np.ones(grid + 1), np.ones(grid + 1))
    pay, u, t = np.zeros(n_paths), np.zeros(n_paths), np.zeros(n_paths)
    trunc = np.zeros(n_paths, dtype=np.bool_)
    steps = np.zeros(n_paths, dtype=np.int64)
    mcsim._kernel(s.keys, 0.0, a, b, step, 0.0, np.inf, False, False, -1.0, 1.0, *arrays,
                  100_000, pay, u, t, trunc, steps)
    sq = np.sqrt(step)
    for p in range(n_paths):
        w, k = 0.0, 0
        while a < w < b:
            w += sq * s.increment(np.array([p]), k)[0]
            k += 1
        assert steps[p] == k
    assert not trunc.any()
