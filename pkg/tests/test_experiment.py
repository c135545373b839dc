import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from calweight.calibrate import CalibrationSpec, ConstraintMode, greg_total, lr_total
from calweight.design import FinitePopulation
from calweight.errors import DegenerateDesignError, DomainError, ParseError, PreconditionError
from calweight.experiment import (
    DegeneratePolicy,
    ExperimentReport,
    MonteCarloConfig,
    TransformMap,
    Transformation,
    apply_transformation,
    exact_enumeration_re,
    format_number,
    generate_correlated_pair_sample,
    monte_carlo_re,
    read_reports,
    relative_efficiency,
    simulate_grid,
    transform_pairs,
    write_reports,
)
from conftest import random_srswor
from oracles import brute_force_mses


def test_transformation_parse():
    t = Transformation.parse("sqrt:y")
    assert t.map is TransformMap.SQRT and t.target == "y" and t.label == "sqrt:y"
    assert Transformation.parse("LOG:X").label == "log:x"
    assert Transformation.parse("id").label == "id:y"
    with pytest.raises(PreconditionError):
        Transformation.parse("cube:y")
    with pytest.raises(PreconditionError):
        Transformation.parse("sqrt:z")


def test_apply_transformation():
    pop = FinitePopulation([4.0, 9.0], [1.0, 2.0])
    assert apply_transformation(pop, Transformation()) == pop
    out = apply_transformation(pop, Transformation.parse("sqrt:y"))
    np.testing.assert_array_equal(out.y, [2.0, 3.0])
    np.testing.assert_array_equal(out.x, pop.x)
    out = apply_transformation(pop, Transformation.parse("log:x"))
    np.testing.assert_allclose(out.x, [0.0, math.log(2.0)])


def test_transformation_domain_errors():
    pop = FinitePopulation([4.0, -9.0, 1.0], [1.0, 0.0, 3.0])
    with pytest.raises(DomainError, match="unit 1"):
        apply_transformation(pop, Transformation.parse("sqrt:y"))
    with pytest.raises(DomainError, match="unit 1") as exc:
        apply_transformation(pop, Transformation.parse("log:x"))
    assert exc.value.code == "domain"


def test_relative_efficiency_sentinels():
    assert relative_efficiency(2.0, 1.0) == 200.0
    assert relative_efficiency(1.0, 0.0) == math.inf
    assert math.isnan(relative_efficiency(0.0, 0.0))
    assert format_number(math.inf) == "inf"
    assert format_number(math.nan) == "undef"
    assert format_number(1 / 3) == "0.33333333333333331"
    assert format_number(1 / 3, human=True) == "0.33"


def test_enumeration_affine_population_is_infinite(kernels):
    x = np.arange(1.0, 11.0)
    rep = exact_enumeration_re(FinitePopulation(5.0 + 2.0 * x, x), 4, kernels=kernels)
    assert rep.mse_lr == 0.0 and rep.mse_ds > 0.0
    assert rep.re_percent == math.inf


def test_enumeration_proportional_population_sentinel(kernels):
    x = np.array([1.0, 2.0, 4.0, 8.0, 16.0, 32.0])
    pop = FinitePopulation(2.0 * x, x)
    rep = exact_enumeration_re(pop, 3, kernels=kernels)
    assert rep.mse_lr == 0.0 and rep.mse_ds == 0.0
    assert math.isnan(rep.re_percent)


def test_report_sentinels_from_zero_mses():
    r = ExperimentReport.build("enumerate", 3, "id:y", 0.0, 1.5, 0, 10)
    assert r.re_percent == math.inf
    buf = io.StringIO()
    write_reports([r], buf)
    assert buf.getvalue().splitlines()[1].split(",")[5] == "inf"


@pytest.mark.parametrize("seed", range(8))
def test_enumeration_matches_brute_force(seed, kernels):
    rng = np.random.default_rng(seed)
    N = int(rng.integers(6, 13))
    n = int(rng.integers(3, min(6, N - 1) + 1))
    x = rng.uniform(1.0, 20.0, N)
    y = 10.0 + 1.2 * x + rng.normal(0.0, 2.0, N)
    rep = exact_enumeration_re(FinitePopulation(y, x), n, kernels=kernels)
    lr, ds = brute_force_mses(y, x, n)
    assert rep.mse_lr == pytest.approx(lr, rel=1e-12)
    assert rep.mse_ds == pytest.approx(ds, rel=1e-12)
    assert rep.sample_count == math.comb(N, n) and rep.skipped == 0


def test_enumeration_partitions_agree(kernels):
    rng = np.random.default_rng(5)
    x = rng.uniform(1.0, 20.0, 16)
    pop = FinitePopulation(3.0 + x + rng.normal(0, 1, 16), x)
    one = exact_enumeration_re(pop, 5, kernels=kernels)
    again = exact_enumeration_re(pop, 5, kernels=kernels)
    assert one == again
    many = exact_enumeration_re(pop, 5, workers=7, kernels=kernels)
    assert many.mse_lr == pytest.approx(one.mse_lr, rel=1e-12)
    assert many.mse_ds == pytest.approx(one.mse_ds, rel=1e-12)
    assert many.sample_count == one.sample_count


def test_enumeration_degenerate_policy(kernels):
    x = np.array([1.0, 1.0, 1.0, 2.0, 3.0])
    pop = FinitePopulation(np.array([2.0, 3.0, 4.0, 5.0, 9.0]), x)
    skip = exact_enumeration_re(pop, 3, kernels=kernels)
    assert skip.skipped == 1 and skip.sample_count == 10
    fb = exact_enumeration_re(pop, 3, policy=DegeneratePolicy.FALLBACK, kernels=kernels)
    assert fb.skipped == 0
    const = FinitePopulation([1.0, 2.0, 3.0], [4.0, 4.0, 4.0])
    with pytest.raises(DegenerateDesignError):
        exact_enumeration_re(const, 2, kernels=kernels)


@pytest.mark.parametrize("seed", range(10))
def test_mean_scale_matches_total_scale(seed):
    rng = np.random.default_rng(700 + seed)
    pop, _, s = random_srswor(rng)
    lr, _ = lr_total(s, CalibrationSpec(pop.X, mode=ConstraintMode.AUX_AND_WEIGHT_SUM))
    greg, b_ds = greg_total(s, CalibrationSpec(pop.X))
    b_ols = np.polyfit(s.x, s.y, 1)[0]
    lr_mean = s.y.mean() + b_ols * (pop.Xbar - s.x.mean())
    ds_mean = s.y.mean() + b_ds * (pop.Xbar - s.x.mean())
    assert pop.N * lr_mean == pytest.approx(lr, rel=1e-12)
    assert pop.N * ds_mean == pytest.approx(greg, rel=1e-12)


def test_generator_transformation_identity():
    cfg = MonteCarloConfig(rho=0.4, n=6, Sy2=0.0)
    y, x = generate_correlated_pair_sample(cfg, 3)
    np.testing.assert_array_equal(y, np.full(6, 100.0))
    assert x.shape == (6,)


@pytest.mark.slow
@pytest.mark.parametrize("rho", [0.0, 0.9])
def test_generator_moments(rho):
    cfg = MonteCarloConfig(rho=rho, n=5, replicates=200_000)
    z = cfg.stream().block(0, cfg.replicates)
    y, x = transform_pairs(cfg, z[:, :5].ravel(), z[:, 5:].ravel())
    assert y.size == 10**6
    assert abs(np.corrcoef(x, y)[0, 1] - rho) < 0.005
    assert abs(y.mean() - 100.0) < 0.05 and abs(x.mean() - 90.0) < 0.05
    assert abs(y.var() / 50.0 - 1.0) < 0.01 and abs(x.var() / 50.0 - 1.0) < 0.01


def test_monte_carlo_single_replicate(kernels):
    cfg = MonteCarloConfig(rho=0.5, n=10, replicates=1, seed=7)
    rep = monte_carlo_re(cfg, kernels=kernels)
    y, x = generate_correlated_pair_sample(cfg, 0)
    b_ols = np.polyfit(x, y, 1)[0]
    b_ds = np.dot(x, y) / np.dot(x, x)
    lr = (y.mean() + b_ols * (90.0 - x.mean()) - 100.0) ** 2
    ds = (y.mean() + b_ds * (90.0 - x.mean()) - 100.0) ** 2
    assert rep.mse_lr == pytest.approx(lr, rel=1e-10)
    assert rep.mse_ds == pytest.approx(ds, rel=1e-10)
    assert rep.re_percent == pytest.approx(100.0 * ds / lr, rel=1e-12)


def test_monte_carlo_determinism_and_workers(kernels):
    cfg = MonteCarloConfig(rho=0.3, n=25, replicates=2000, seed=99)
    a = monte_carlo_re(cfg, kernels=kernels)
    assert a == monte_carlo_re(cfg, kernels=kernels)
    assert a == monte_carlo_re(cfg, workers=4, kernels=kernels)
    other = monte_carlo_re(MonteCarloConfig(rho=0.3, n=25, replicates=2000, seed=100),
                           kernels=kernels)
    assert other != a


def test_monte_carlo_prefix_consistency():
    """Replicate r draws the same sample whatever the total replicate count."""
    small = MonteCarloConfig(rho=0.3, n=8, replicates=5, seed=3).stream().block(0, 5)
    big = MonteCarloConfig(rho=0.3, n=8, replicates=50, seed=3).stream().block(0, 50)
    np.testing.assert_array_equal(small, big[:5])


def test_re_definition_invariant():
    for rep in simulate_grid([0.2, 0.8], [10], replicates=500, seed=4):
        assert rep.re_percent * rep.mse_lr == pytest.approx(100.0 * rep.mse_ds, rel=1e-12)
        assert rep.re_percent > 100.0


def test_config_validation():
    for bad in (dict(rho=1.0, n=5), dict(rho=0.1, n=2), dict(rho=0.1, n=5, replicates=0),
                dict(rho=0.1, n=5, Sx2=0.0), dict(rho=0.1, n=5, seed=-1)):
        with pytest.raises(PreconditionError):
            MonteCarloConfig(**bad)


def test_report_round_trip():
    reps = simulate_grid([0.1, 0.5], [5, 9], replicates=200, seed=11)
    reps.append(ExperimentReport.build("enumerate", 3, "sqrt:y", 0.0, 0.0, 2, 10))
    reps.append(ExperimentReport.build("enumerate", 3, "log:x", 0.0, 1.0, 0, 10))
    for delim in (",", ";", "\t"):
        buf = io.StringIO()
        write_reports(reps, buf, delimiter=delim)
        back = read_reports(io.StringIO(buf.getvalue()), delimiter=delim)
        assert len(back) == len(reps)
        assert all(a.same_as(b) for a, b in zip(reps, back))


def test_read_reports_errors():
    with pytest.raises(ParseError):
        read_reports(io.StringIO("a,b\n"))
    text = "scenario,n,rho_or_transform,mse_lr,mse_ds,re_percent,skipped,sample_count\nx,1\n"
    with pytest.raises(ParseError) as exc:
        read_reports(io.StringIO(text))
    assert exc.value.line == 2


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 1e6), st.floats(1e-6, 1e6))
def test_re_times_mse_lr(mse_ds, mse_lr):
    r = ExperimentReport.build("simulate", 5, "0.5", mse_lr, mse_ds, 0, 1)
    assert r.re_percent * r.mse_lr == pytest.approx(100.0 * r.mse_ds, rel=1e-12, abs=1e-300)
