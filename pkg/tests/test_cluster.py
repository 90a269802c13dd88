import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fragility import cluster as cl
from fragility import dnorm as dn
from fragility import exceedance as ex
from fragility.schemas import validate

from oracles import random_gamma, random_norm, subsets


def survival_bruteforce(norm, gamma, kappa, k):
    acc = 0.0
    for T in subsets(range(kappa, kappa + k + 1)):
        if not T:
            continue
        x = np.zeros(norm.d)
        x[list(T)] = np.asarray(gamma)[list(T)]
        acc += (-1) ** (len(T) + 1) * norm(x)
    return acc


@pytest.mark.parametrize("theta", [0.0, 0.3, 0.5, 1.0])
@pytest.mark.parametrize("d", [1, 2, 5, 8])
def test_marshall_olkin_mean(theta, d):
    norm = dn.MarshallOlkinNorm(d, theta)
    for kappa in range(d):
        tr = ex.TailRatios.ones(d, kappa)
        expect = (1 - theta) * (d - kappa - 1)
        assert cl.mean_cluster_length(norm, tr) == pytest.approx(expect, abs=1e-12)
        assert cl.exchangeable_mean(norm, d, kappa) == pytest.approx(expect, abs=1e-12)
        assert cl.mean_cluster_length(norm, tr, exchangeable=True) == pytest.approx(expect, abs=1e-12)


def test_mo_example_mean():
    dist = cl.cluster_pmf(dn.MarshallOlkinNorm(5, 0.3), ex.TailRatios.ones(5, 1))
    assert dist.mean == pytest.approx(2.1, abs=1e-12)
    assert dist.to_dict()["kappa"] == 2


@pytest.mark.parametrize("d", [2, 4, 7])
def test_iid_uniform_cdf(d):
    for kappa in range(d):
        dist = cl.cluster_pmf(dn.IIDUniformNorm(d), ex.TailRatios.ones(d, kappa))
        top = d - kappa - 1
        assert dist.max_length == top
        for k in range(top):
            assert dist.cdf[k] == pytest.approx(1 - 2 / (k + 3), abs=1e-12)
        assert dist.cdf[top] == 1.0


def test_last_index_is_point_mass():
    for norm in (dn.MaxNorm(4), dn.LambdaNorm(4, 1), dn.IIDUniformNorm(4)):
        dist = cl.cluster_pmf(norm, ex.TailRatios.ones(4, 3))
        assert dist.pmf.tolist() == [1.0]
        assert dist.mean == 0.0
        assert cl.mean_cluster_length(norm, ex.TailRatios.ones(4, 3)) == 0.0


def test_independence_gives_zero_length():
    tr = ex.TailRatios.from_gamma([0.4, 1, 0.7, 2.0])
    dist = cl.cluster_pmf(dn.LambdaNorm(4, 1), tr)
    np.testing.assert_allclose(dist.pmf, [1, 0, 0], atol=1e-12)
    assert dist.mean == pytest.approx(0.0, abs=1e-12)


def test_max_norm_runs_to_the_end():
    d = 6
    for kappa in range(d):
        dist = cl.cluster_pmf(dn.MaxNorm(d), ex.TailRatios.ones(d, kappa))
        assert dist.mean == pytest.approx(d - kappa - 1, abs=1e-12)
        assert dist.pmf[-1] == pytest.approx(1.0, abs=1e-12)


def test_first_step_with_unequal_ratio():
    # pmf(0) = ||e_kappa + g e_{kappa+1}|| - g for the next ratio g
    g = np.array([0.3, 1.0, 0.6, 1.4])
    tr = ex.TailRatios(g, 1)
    for norm in (dn.LambdaNorm(4, 2), dn.MarshallOlkinNorm(4, 0.4), dn.IIDUniformNorm(4)):
        x = np.zeros(4)
        x[1], x[2] = 1.0, g[2]
        assert cl.cluster_pmf(norm, tr).pmf[0] == pytest.approx(norm(x) - g[2], abs=1e-12)


def test_survival_examples(rng):
    norm = dn.MarshallOlkinNorm(5, 0.2)
    g, _ = random_gamma(rng, 5)
    g[2] = 1.0
    tr = ex.TailRatios(g, 2)
    vals = cl.survival_values(norm, tr)
    for k in range(vals.size):
        assert vals[k] == pytest.approx(survival_bruteforce(norm, g, 2, k), abs=1e-12)
        assert cl.survival(norm, tr, k) == pytest.approx(vals[k], abs=1e-12)
    assert vals[0] == 1.0
    with pytest.raises(dn.DNormError):
        cl.survival(norm, tr, 3)


def test_generator_route_matches_subset_route(rng):
    for _ in range(20):
        d = int(rng.integers(2, 7))
        norm = random_norm(rng, d)
        gen = norm.generator
        if gen is None:
            continue
        g, k = random_gamma(rng, d)
        tr = ex.TailRatios(g, k)
        vals = cl.survival_values(norm, tr)
        for j in range(vals.size):
            assert cl.survival_from_generator(gen, tr, j) == pytest.approx(vals[j], abs=1e-10)


def test_case_split_agrees(rng):
    for _ in range(60):
        d = int(rng.integers(1, 7))
        norm = random_norm(rng, d)
        g, k = random_gamma(rng, d)
        tr = ex.TailRatios(g, k)
        np.testing.assert_allclose(cl.pmf_case_split(norm, tr), cl.cluster_pmf(norm, tr).pmf, atol=1e-9)


@settings(max_examples=150, deadline=None)
@given(st.integers(1, 9), st.integers(0, 2**32 - 1))
def test_monotone_survival_and_duality(d, seed):
    rng = np.random.default_rng(seed)
    norm = random_norm(rng, d)
    g, k = random_gamma(rng, d)
    dist = cl.cluster_pmf(norm, ex.TailRatios(g, k))
    s = dist.survival
    assert s[0] == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.diff(s) <= 1e-9) and np.all(s >= -1e-9)
    assert np.all(dist.pmf >= 0) and dist.pmf.sum() == pytest.approx(1.0, abs=1e-9)
    np.testing.assert_allclose(np.cumsum(dist.pmf), dist.cdf, atol=1e-9)
    np.testing.assert_allclose(dist.cdf[:-1], 1 - s[1:], atol=1e-12)
    lengths = np.arange(dist.pmf.size)
    assert dist.mean == pytest.approx(lengths @ dist.pmf, abs=1e-9)


def test_zero_mean_iff_next_margin_is_tail_independent():
    tr = ex.TailRatios.ones(3, 0)
    # Marshall-Olkin with theta = 1 is L1: no run; anything stronger keeps s(1) > 0
    assert cl.mean_cluster_length(dn.MarshallOlkinNorm(3, 1.0), tr) == pytest.approx(0.0, abs=1e-12)
    assert cl.mean_cluster_length(dn.MarshallOlkinNorm(3, 0.9), tr) > 0.05


def test_exchangeable_needs_unit_ratios():
    with pytest.raises(dn.DNormError):
        cl.mean_cluster_length(dn.MaxNorm(3), ex.TailRatios.from_gamma([1, 0.5, 1]), exchangeable=True)
    with pytest.raises(dn.DNormError):
        cl.exchangeable_mean(dn.MaxNorm(3), 4, 0)
    with pytest.raises(dn.DNormError):
        cl.cluster_pmf(dn.MaxNorm(3), ex.TailRatios.ones(2))


def test_cluster_json():
    dist = cl.cluster_pmf(dn.IIDUniformNorm(4), ex.TailRatios.ones(4, 0))
    obj = json.loads(json.dumps(dist.to_dict()))
    validate("cluster", obj)
    assert obj["kappa"] == 1 and len(obj["pmf"]) == 4
