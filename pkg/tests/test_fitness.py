import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from econplex import fitness
from econplex.errors import InvariantViolation, SingularUpdate
from econplex.fixtures import NESTED2, all_ones, random_incidence
from econplex.rca import incidence_from_bits
from oracles import fitness_steps

NESTED = incidence_from_bits(NESTED2)


@pytest.mark.parametrize("method", [fitness.fcm, fitness.mfcm])
def test_all_ones_fixed_point(method):
    res = method(all_ones(3))
    assert res.verdict == fitness.CONVERGED and res.iterations == 1
    np.testing.assert_array_equal(res.country_scores.values, 1.0)
    np.testing.assert_array_equal(res.product_scores.values, 1.0)


def test_mfcm_all_ones_raw_product():
    res = fitness.mfcm(all_ones(3))
    np.testing.assert_allclose(res.raw_product, 1 / 6, rtol=1e-15)


def test_first_iterates_match_hand_values():
    for method in (fitness.fcm, fitness.mfcm):
        res = method(NESTED, max_iter=2)
        (n1, lo1, hi1, _), (n2, lo2, hi2, _) = res.trajectory[:2]
        assert abs(hi1 - 4 / 3) < 1e-12 and abs(lo1 - 2 / 3) < 1e-12
        assert abs(hi2 - 8 / 5) < 1e-12 and abs(lo2 - 2 / 5) < 1e-12


def test_fcm_and_mfcm_trajectories_agree_on_nested_fixture():
    a = fitness.fcm(NESTED, max_iter=50).trajectory
    b = fitness.mfcm(NESTED, max_iter=50, boundary_margin=1e-9).trajectory
    for ra, rb in zip(a[:20], b[:20]):
        assert ra[1:3] == pytest.approx(rb[1:3], abs=1e-12)


def test_loop_oracle_agrees():
    for seed in range(5):
        M = random_incidence(seed, (7, 5), 0.5)
        for method, modified in ((fitness.fcm, False), (fitness.mfcm, True)):
            steps = fitness_steps(M.bits, 15, modified)
            res = method(M, max_iter=15, tol=1e-300)
            c, p = steps[-1]
            np.testing.assert_allclose(res.country_scores.values, c, rtol=1e-12)
            np.testing.assert_allclose(res.product_scores.values, p, rtol=1e-12)


def test_fcm_zero_convergence():
    res = fitness.fcm(NESTED, max_iter=10_000, zero_floor=1e-3)
    assert res.verdict == fitness.ZERO_CONVERGENCE
    assert res.country_scores.values.min() < 1e-3
    assert res.iterations <= 10_000


def test_fcm_weak_country_decays_like_inverse_n():
    res = fitness.fcm(NESTED, max_iter=2000, zero_floor=1e-12)
    for n, lo, _, _ in res.trajectory:
        if n in (10, 100, 1000):
            assert lo == pytest.approx(1 / (n + 0.5), rel=1e-2)


def test_fcm_default_floor_reaches_iteration_limit():
    res = fitness.fcm(NESTED, max_iter=500)
    assert res.verdict == fitness.MAX_ITERATIONS


def test_mfcm_boundary_drift_recurrence():
    res = fitness.mfcm(NESTED)
    assert res.verdict == fitness.BOUNDARY_DRIFT
    x = 4 / 3
    for n, _, hi, _ in res.trajectory[:50]:
        assert abs(hi - x) < 1e-10
        x = (4 - x) / (3 - x)
    assert res.country_scores.values.max() > (1 - 1e-3) * 2


def test_mfcm_random_bounds_hundred_seeds():
    for seed in range(100):
        M = random_incidence(seed)
        res = fitness.mfcm(M)
        c = res.country_scores.values
        nc = M.shape[0]
        assert res.verdict == fitness.CONVERGED
        assert res.residual < 1e-10 and res.iterations <= 100_000
        assert c.min() > 0 and c.max() < nc
        assert np.all(res.raw_product >= 1.0 / (nc * M.m.sum(axis=0)))


def test_mfcm_symmetry_sizes():
    for n in range(2, 11):
        res = fitness.mfcm(all_ones(n))
        assert res.iterations == 1
        assert abs(math.fsum(res.country_scores.values) - n) < 1e-12
        assert abs(math.fsum(res.product_scores.values) - n) < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["fcm", "mfcm"]))
def test_normalization_sums_every_step(seed, method):
    M = random_incidence(seed, (9, 7), 0.5)
    fn = getattr(fitness, method)
    for steps in (1, 2, 5, 40):
        res = fn(M, max_iter=steps, tol=1e-300)
        c, p = res.country_scores.values, res.product_scores.values
        assert abs(math.fsum(c) - M.shape[0]) <= 1e-12 * M.shape[0]
        assert abs(math.fsum(p) - M.shape[1]) <= 1e-12 * M.shape[1]
        assert c.min() > 0 and p.min() > 0


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.randoms(use_true_random=False))
def test_permutation_invariance(seed, rnd):
    M = random_incidence(seed)
    ro, co = list(range(M.shape[0])), list(range(M.shape[1]))
    rnd.shuffle(ro)
    rnd.shuffle(co)
    P = M.permuted(ro, co)
    for fn in (lambda X: fitness.fcm(X, max_iter=3000), fitness.mfcm):
        a, b = fn(M), fn(P)
        assert a.verdict == b.verdict
        da, db = a.country_scores.as_dict(), b.country_scores.as_dict()
        assert max(abs(da[k] - db[k]) for k in da) < 1e-12


def test_fault_hook_trips_normalization_invariant():
    with pytest.raises(InvariantViolation) as e:
        fitness.mfcm(random_incidence(0), _normalize=lambda x: x / x.mean() * (1 + 1e-6))
    assert e.value.prop == "normalization_sum"


def test_singular_update_past_boundary():
    # a normaliser that pushes the top country beyond N_c makes a denominator negative
    def push(x):
        y = x / x.mean()
        return y * 3 if len(y) == 2 else y

    with pytest.raises((SingularUpdate, InvariantViolation)):
        fitness.mfcm(NESTED, _normalize=push)


def test_argument_validation():
    with pytest.raises(ValueError):
        fitness.fcm(NESTED, tol=0)
    with pytest.raises(ValueError):
        fitness.fcm(NESTED, max_iter=0)
    with pytest.raises(ValueError):
        fitness.fcm(NESTED, zero_floor=0)
    with pytest.raises(ValueError):
        fitness.mfcm(NESTED, boundary_margin=1.0)


def test_result_serializes():
    res = fitness.mfcm(random_incidence(1))
    d = json.loads(json.dumps(res.to_dict()))
    assert d["verdict"] == "converged" and d["iterations"] == res.iterations
    assert d["trajectory"][-1]["iteration"] == res.iterations


def test_taylor_examples():
    exact, approx, err = fitness.taylor_consistency(5, 10)
    assert exact == approx == 0.2 and err == 0
    _, _, err = fitness.taylor_consistency(5.5, 10)
    assert err == pytest.approx(0.01 / 1.1, rel=1e-12)
    assert err <= 0.01
    with pytest.raises(ValueError):
        fitness.taylor_consistency(20, 10)


@given(st.floats(-0.9, 0.9), st.integers(1, 500))
def test_taylor_identity(delta, n_c):
    c = (1 + delta) * n_c / 2
    _, _, err = fitness.taylor_consistency(c, n_c)
    d = 2 * c / n_c - 1
    assert err == pytest.approx(d * d / (1 + d), rel=1e-9, abs=1e-15)


@given(st.floats(0, 0.5))
def test_taylor_bound_for_nonnegative_offsets(delta):
    _, _, err = fitness.taylor_consistency((1 + delta) * 5, 10)
    assert err <= 1.1 * delta * delta + 1e-15
