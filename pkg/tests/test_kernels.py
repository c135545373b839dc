import numpy as np
import pytest

from calweight import _core
from calweight.design import FinitePopulation, unrank_combination
from calweight.experiment import MonteCarloConfig, exact_enumeration_re, monte_carlo_re
from calweight.rng import CounterNormalStream

BACKENDS = _core.available_backends()
needs_both = pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled extension not built")


def test_backend_selection():
    assert _core.BACKEND in BACKENDS
    assert _core.kernels.BACKEND == _core.BACKEND


@needs_both
@pytest.mark.parametrize("seed", range(6))
def test_enumeration_backends_agree(seed):
    rng = np.random.default_rng(seed)
    N = int(rng.integers(8, 16))
    n = int(rng.integers(3, 6))
    x = rng.uniform(1.0, 30.0, N)
    pop = FinitePopulation(20.0 + x + rng.normal(0, 3, N), x)
    q = rng.uniform(0.5, 2.0, N)
    qs = rng.uniform(0.5, 2.0, N)
    a = exact_enumeration_re(pop, n, q_star=qs, q=q, kernels=BACKENDS["compiled"])
    b = exact_enumeration_re(pop, n, q_star=qs, q=q, kernels=BACKENDS["python"])
    assert a.sample_count == b.sample_count and a.skipped == b.skipped
    assert a.mse_lr == pytest.approx(b.mse_lr, rel=1e-12)
    assert a.mse_ds == pytest.approx(b.mse_ds, rel=1e-12)


@needs_both
def test_partial_range_backends_agree():
    rng = np.random.default_rng(9)
    y, x = rng.normal(50, 5, 12), rng.uniform(1, 9, 12)
    ones = np.ones(12)
    first = np.array(unrank_combination(12, 4, 101), dtype=np.int64)
    out = [k.enum_sq_errors(y, x, ones, ones, first, 200, x.mean(), y.mean(), False)
           for k in (BACKENDS["compiled"], BACKENDS["python"])]
    assert out[0][2:] == out[1][2:] == (200, 0)
    np.testing.assert_allclose(out[0][:2], out[1][:2], rtol=1e-12)


@needs_both
@pytest.mark.parametrize("fallback", [False, True])
def test_monte_carlo_kernels_agree(fallback):
    z = CounterNormalStream(5, 20).block(0, 300)
    ys, xs = np.ascontiguousarray(z[:, :10]), np.ascontiguousarray(z[:, 10:])
    xs[7] = 0.0  # constant x in one replicate
    a = BACKENDS["compiled"].mc_sq_errors(ys, xs, 0.4, 50.0, 50.0, 100.0, 90.0, fallback)
    b = BACKENDS["python"].mc_sq_errors(ys, xs, 0.4, 50.0, 50.0, 100.0, 90.0, fallback)
    np.testing.assert_array_equal(np.asarray(a[2], bool), np.asarray(b[2], bool))
    assert bool(a[2][7])
    np.testing.assert_allclose(a[0], b[0], rtol=1e-10, atol=1e-20)
    np.testing.assert_allclose(a[1], b[1], rtol=1e-10, atol=1e-20)


@needs_both
def test_monte_carlo_reports_agree():
    cfg = MonteCarloConfig(rho=0.7, n=30, replicates=1000, seed=21)
    a = monte_carlo_re(cfg, kernels=BACKENDS["compiled"])
    b = monte_carlo_re(cfg, kernels=BACKENDS["python"])
    assert a.re_percent == pytest.approx(b.re_percent, rel=1e-10)


def test_stream_blocks_are_addressable():
    s = CounterNormalStream(123, 7)
    whole = s.block(0, 40)
    np.testing.assert_array_equal(whole[13:29], s.block(13, 29))
    np.testing.assert_array_equal(whole[5], s.replicate(5))
    assert s.block(3, 3).shape == (0, 7)


def test_stream_distinct_seeds():
    assert not np.array_equal(CounterNormalStream(1, 6).block(0, 4),
                              CounterNormalStream(2, 6).block(0, 4))


def test_stream_values_are_finite_normals():
    z = CounterNormalStream(77, 8).block(0, 20000).ravel()
    assert np.all(np.isfinite(z))
    assert abs(z.mean()) < 0.02 and abs(z.std() - 1.0) < 0.02


def test_stream_rejects_bad_arguments():
    with pytest.raises(ValueError):
        CounterNormalStream(-1, 3)
    with pytest.raises(ValueError):
        CounterNormalStream(1, 0)
