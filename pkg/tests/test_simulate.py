import numpy as np
import pytest

from ratealloc.allocation import RateAllocation, closed_form_allocation, uniform_allocation
from ratealloc.experiments import coefficients_for
from ratealloc.lqr import GainSchedule, SystemSpec, synthesize_gains
from ratealloc.noise import accumulated_variance, deviation_gains
from ratealloc.simulate import (
    estimate_costs,
    ratio_estimate,
    replication_costs,
    simulate_batch,
    simulate_pair,
)
from ratealloc.streams import replication_rng, standard_draws
from ratealloc.validation import variance_law_zscore


def plant(a=1.2, horizon=6, **kw):
    params = dict(b=1.0, q=2.0, d=5.0, x0=100.0, sigma_z2=1.0, c2=4.0)
    params.update(kw)
    return SystemSpec.constant(a, horizon, **params)


def test_no_compression_noise_means_identical_paths():
    spec = plant(c2=0.0)
    gains = synthesize_gains(spec)
    pair = simulate_pair(spec, gains, uniform_allocation(3.0, 6), replication_rng(1, 0))
    np.testing.assert_array_equal(pair.x_c, pair.x_p)
    np.testing.assert_array_equal(pair.u_c, pair.u_p)
    report = estimate_costs(spec, gains, uniform_allocation(3.0, 6), 500, 3)
    assert report.j_rcost.mean == 0.0
    assert report.excess.mean == 0.0


def test_noiseless_constant_gain_decays_geometrically():
    spec = plant(a=1.0, sigma_z2=0.0, c2=0.0, horizon=8)
    gains = GainSchedule.constant(-0.4, 8)
    pair = simulate_pair(spec, gains, uniform_allocation(1.0, 8), replication_rng(0, 0))
    np.testing.assert_allclose(pair.x_p, 100.0 * 0.6 ** np.arange(9), rtol=1e-14)


def test_trajectory_invariants():
    spec = plant()
    gains = synthesize_gains(spec)
    pair = simulate_pair(spec, gains, uniform_allocation(2.0, 6), replication_rng(9, 4))
    assert pair.x_p[0] == pair.x_c[0] == spec.x0
    assert len(pair.x_p) == 7 and len(pair.u_c) == 6 and len(pair.n_c) == 6 and len(pair.z) == 6
    np.testing.assert_array_equal(pair.u_c, gains.f_seq[:6] * (pair.x_c[:6] + pair.n_c))


def test_single_pair_matches_batch_row():
    spec = plant()
    gains = synthesize_gains(spec)
    alloc = uniform_allocation(2.0, 6)
    draws = standard_draws(42, 5, 6)
    batch = simulate_batch(spec, gains, alloc, draws)
    pair = simulate_pair(spec, gains, alloc, replication_rng(42, 3))
    np.testing.assert_array_equal(pair.x_c, batch["x_c"][3])
    np.testing.assert_array_equal(pair.n_c, batch["n_c"][3])


def test_draws_do_not_depend_on_thread_count():
    np.testing.assert_array_equal(standard_draws(5, 1001, 4, threads=1),
                                  standard_draws(5, 1001, 4, threads=4))


def test_reports_are_deterministic():
    spec = plant()
    gains = synthesize_gains(spec)
    alloc = closed_form_allocation(coefficients_for(spec, gains), 6.0)
    assert estimate_costs(spec, gains, alloc, 2000, 8) == estimate_costs(spec, gains, alloc, 2000, 8)


def test_two_stage_gap_against_analytic_at_one_million():
    spec = SystemSpec.constant(1.0, 2, b=1.0, q=2.0, d=5.0, x0=100.0, sigma_z2=0.0, c2=1.0)
    gains = synthesize_gains(spec)
    alloc = RateAllocation([1.0, 0.5, 0.0], 1.5)
    f0 = 24 / 59
    a0 = (2 + 20 / 49) * f0**2 + 5 * f0**2
    a1 = 20 / 49
    predicted = (a0 / 4 + a1 / 2) / 2
    report = estimate_costs(spec, gains, alloc, 10**6, 2024, threads=4)
    assert report.analytic_gap == pytest.approx(predicted, rel=1e-14)
    assert abs(report.excess.mean - predicted) <= 5 * report.excess.se


def test_standard_error_scales_with_root_n():
    spec = plant()
    gains = synthesize_gains(spec)
    alloc = uniform_allocation(3.0, 6)
    small = estimate_costs(spec, gains, alloc, 10**4, 1)
    big = estimate_costs(spec, gains, alloc, 4 * 10**4, 2)
    ratio = small.j_c.se / big.j_c.se
    assert 2 / 1.5 <= ratio <= 2 * 1.5


def test_deviation_variance_law():
    spec = plant(a=1.6, horizon=7, c2=9.0)
    gains = synthesize_gains(spec)
    alloc = closed_form_allocation(coefficients_for(spec, gains), 5.0)
    draws = standard_draws(77, 10**5, 7)
    paths = simulate_batch(spec, gains, alloc, draws)
    sigma2 = accumulated_variance(deviation_gains(spec, gains), alloc, spec.c2).sigma2
    assert variance_law_zscore(paths["x_c"] - paths["x_p"], sigma2) <= 5


def test_deviation_independent_of_perfect_state():
    # the excess-cost derivation drops E[x_p * e]; check it is zero empirically
    spec = plant(a=1.6, horizon=7, c2=9.0)
    gains = synthesize_gains(spec)
    alloc = uniform_allocation(4.0, 7)
    paths = simulate_batch(spec, gains, alloc, standard_draws(3, 10**5, 7))
    dev = paths["x_c"] - paths["x_p"]
    for t in range(1, 8):
        prod = paths["x_p"][:, t] * dev[:, t]
        assert abs(prod.mean()) <= 5 * prod.std() / np.sqrt(prod.size)


def test_common_random_numbers_reduce_variance():
    spec = plant(a=1.5, horizon=8)
    gains = synthesize_gains(spec)
    alloc = uniform_allocation(4.0, 8)
    draws = standard_draws(10, 10**4, 8)
    jp, jc = replication_costs(spec, gains, alloc, draws)
    indep = draws.copy()
    indep[:, 0, :] = standard_draws(11, 10**4, 8)[:, 0, :]
    _, jc_indep = replication_costs(spec, gains, alloc, indep)
    assert np.var(jc - jp) < np.var(jc_indep - jp)


def test_relative_cost_not_negative():
    spec = plant(a=2.0, horizon=8)
    gains = synthesize_gains(spec)
    for alloc in (uniform_allocation(4.0, 8),
                  closed_form_allocation(coefficients_for(spec, gains), 4.0)):
        rep = estimate_costs(spec, gains, alloc, 20000, 5)
        assert rep.j_rcost.mean >= -5 * rep.j_rcost.se
        assert rep.j_p.mean > 0


def test_ratio_estimate_matches_delta_method_by_hand():
    rng = np.random.default_rng(0)
    den = rng.normal(10, 1, 400)
    num = 0.3 * den + rng.normal(0, 0.5, 400)
    est = ratio_estimate(num, den)
    r = num.mean() / den.mean()
    grad = np.array([1 / den.mean(), -num.mean() / den.mean() ** 2])
    cov = np.cov(np.vstack([num, den])) / num.size
    assert est.mean == pytest.approx(r)
    assert est.se == pytest.approx(np.sqrt(grad @ cov @ grad), rel=1e-10)


def test_argument_checks():
    spec = plant()
    gains = synthesize_gains(spec)
    with pytest.raises(ValueError):
        estimate_costs(spec, gains, uniform_allocation(1.0, 6), 0, 1)
    with pytest.raises(ValueError):
        simulate_pair(spec, GainSchedule.constant(-0.1, 5), uniform_allocation(1.0, 6),
                      replication_rng(0, 0))
    with pytest.raises(ValueError):
        replication_costs(spec, gains, uniform_allocation(1.0, 6), np.zeros((3, 2, 5)))
