import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fragility import dnorm as dn
from fragility.exceedance import alternating_unit_sums, popcounts
from fragility.schemas import validate

from oracles import exact_max, exact_min, iid_uniform_max_quad, random_discrete_generator, random_norm, xi_atoms


def all_families(d):
    return [
        dn.LambdaNorm(d, 1.0),
        dn.LambdaNorm(d, 2.5),
        dn.MaxNorm(d),
        dn.MarshallOlkinNorm(d, 0.4),
        dn.IIDUniformNorm(d),
        dn.DiscreteGeneratorNorm(random_discrete_generator(np.random.default_rng(d), d, 5)),
        dn.MonteCarloNorm(d, "iid_uniform", 20_000, seed=1),
    ]


def test_euclidean():
    assert dn.evaluate(dn.LambdaNorm(2, 2), [3, 4]) == 5.0


def test_max_unit_vector():
    assert dn.evaluate(dn.MaxNorm(3), [0, 1, 0]) == 1.0


def test_marshall_olkin_by_hand():
    assert dn.evaluate(dn.MarshallOlkinNorm(3, 0.5), [1, 1, 1]) == pytest.approx(2.0, abs=1e-15)


def test_xi_generator_values():
    gen = dn.make_xi_generator()
    norm = dn.DiscreteGeneratorNorm(gen)
    atoms = xi_atoms()
    assert [float(exact_max(atoms, [i])) for i in range(3)] == [1.0, 1.0, 1.0]
    assert exact_max(atoms, [0, 1, 2]) == Fraction(7, 4)
    assert norm([1, 1, 1]) == pytest.approx(1.75, abs=1e-15)
    assert dn.max_moment(gen, None, [0, 1]) == pytest.approx(float(exact_max(atoms, [0, 1])), abs=1e-15)
    assert dn.max_moment(gen, None, [0, 1]) == pytest.approx(1.4, abs=1e-15)
    assert dn.max_moment(gen, None, [0, 2]) == pytest.approx(1.6, abs=1e-15)
    assert dn.min_moment(gen, None, [0, 1, 2]) == 0.0
    np.testing.assert_allclose(gen.probs @ gen.atoms, 1.0, atol=1e-15)
    for i, j in [(0, 1), (0, 2), (1, 2)]:
        assert dn.max_moment(gen, None, [i, j]) < 2.0


@pytest.mark.parametrize("i", range(3))
def test_singleton_moments_are_one(i):
    gen = random_discrete_generator(np.random.default_rng(7), 3)
    assert dn.max_moment(gen, None, [i]) == pytest.approx(1.0, abs=1e-12)
    assert dn.min_moment(gen, None, [i]) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("m", range(1, 9))
def test_iid_uniform_min_moment(m):
    gen = dn.IIDUniformGenerator(10)
    assert dn.min_moment(gen, None, range(m)) == pytest.approx(2 / (m + 1), abs=1e-13)


@pytest.mark.parametrize("m", range(1, 9))
def test_iid_uniform_equal_weights(m):
    norm = dn.IIDUniformNorm(8)
    x = np.zeros(8)
    x[:m] = 3.0
    assert norm(x) == pytest.approx(3.0 * 2 * m / (m + 1), rel=1e-13)


def test_iid_uniform_general_weights_against_quadrature(rng):
    norm = dn.IIDUniformNorm(5)
    for _ in range(20):
        x = rng.random(5) * (rng.random(5) > 0.2)
        assert norm(x) == pytest.approx(iid_uniform_max_quad(2 * x), abs=1e-10)
        table = norm.subset_norms(x)
        for mask in (3, 10, 21, 31):
            sub = np.where((mask >> np.arange(5)) & 1, x, 0.0)
            assert table[mask] == pytest.approx(iid_uniform_max_quad(2 * sub), abs=1e-10)


def test_iid_uniform_general_weights_against_monte_carlo():
    x = np.array([1.0, 0.3, 0.7, 0.0])
    draws = dn.IIDUniformGenerator(4).sample(np.random.default_rng(5), 1_000_000)
    v = (draws * x).max(axis=1)
    assert abs(dn.IIDUniformNorm(4)(x) - v.mean()) < 3 * v.std() / math.sqrt(v.size)


@pytest.mark.parametrize("norm", all_families(4), ids=lambda n: n.family)
def test_unit_normalization(norm):
    for i in range(norm.d):
        e = np.zeros(norm.d)
        e[i] = 1.0
        assert norm(e) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("norm", all_families(4), ids=lambda n: n.family)
def test_sandwich_homogeneity_monotonicity(norm, rng):
    for _ in range(200):
        x = rng.exponential(size=4) * (rng.random(4) > 0.2)
        v = norm(x)
        assert x.max() - 1e-12 <= v <= x.sum() + 1e-12
        t = rng.exponential()
        assert norm(t * x) == pytest.approx(t * v, rel=1e-12, abs=1e-15)
        y = x + rng.exponential(size=4)
        assert norm(y) >= v - 1e-12


@pytest.mark.parametrize("norm", all_families(5), ids=lambda n: n.family)
def test_subset_table_matches_direct_evaluation(norm, rng):
    w = rng.random(5)
    table = norm.subset_norms(w)
    for mask in range(32):
        x = np.where((mask >> np.arange(5)) & 1, w, 0.0)
        assert table[mask] == pytest.approx(norm(x), rel=1e-12, abs=1e-14)


def test_subset_table_on_coordinates(rng):
    norm = dn.DiscreteGeneratorNorm(random_discrete_generator(rng, 5))
    w = rng.random(5)
    coords = [4, 1, 2]
    table = norm.subset_norms(w, coords)
    for mask in range(8):
        x = np.zeros(5)
        for j, c in enumerate(coords):
            if mask >> j & 1:
                x[c] = w[c]
        assert table[mask] == pytest.approx(norm(x), rel=1e-12)


def test_zero_vector_is_zero():
    assert dn.LambdaNorm(3, 2)([0, 0, 0]) == 0.0
    assert dn.IIDUniformNorm(3)([0, 0, 0]) == 0.0


def test_consistency_with_max_moment(rng):
    gen = random_discrete_generator(rng, 4)
    norm = dn.DiscreteGeneratorNorm(gen)
    for K in ([0], [1, 3], [0, 2, 3], [0, 1, 2, 3]):
        x = np.zeros(4)
        x[K] = 1.0
        assert norm(x) == pytest.approx(dn.max_moment(gen, None, K), rel=1e-14)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6), st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_min_max_inclusion_exclusion(d, n_atoms, seed):
    rng = np.random.default_rng(seed)
    gen = random_discrete_generator(rng, d, n_atoms)
    norm = dn.DiscreteGeneratorNorm(gen)
    f = alternating_unit_sums(norm, range(d))
    for mask in range(1, 1 << d):
        K = [i for i in range(d) if mask >> i & 1]
        assert f[mask] == pytest.approx(dn.min_moment(gen, None, K), abs=1e-12)


def test_exact_rational_min_max_identity():
    atoms = xi_atoms()
    for K in ([0, 1], [0, 2], [1, 2], [0, 1, 2]):
        from oracles import subsets

        alt = sum((-1) ** (len(T) - 1) * exact_max(atoms, T) for T in subsets(K) if T)
        assert alt == exact_min(atoms, K)


def test_monte_carlo_vs_exact_xi():
    mc = dn.MonteCarloNorm(3, "xi", 1_000_000, seed=11)
    exact = dn.DiscreteGeneratorNorm(dn.make_xi_generator())
    for K in ([0, 1], [0, 2], [1, 2], [0, 1, 2]):
        w = np.ones(3)
        se = mc.gen.max_moment_se(w, np.array(K))
        assert abs(dn.max_moment(mc.gen, w, K) - dn.max_moment(exact.gen, w, K)) <= 3 * se


def test_monte_carlo_is_reproducible():
    a = dn.MonteCarloNorm(3, "iid_uniform", 5000, seed=3)
    b = dn.MonteCarloNorm(3, "iid_uniform", 5000, seed=3)
    x = [0.2, 1.0, 0.7]
    assert a(x) == b(x)
    assert dn.MonteCarloNorm(3, "iid_uniform", 5000, seed=4)(x) != a(x)


@pytest.mark.parametrize(
    "bad",
    [
        lambda: dn.LambdaNorm(3, 0.5),
        lambda: dn.MarshallOlkinNorm(3, 1.5),
        lambda: dn.MaxNorm(25),
        lambda: dn.DiscreteGenerator([0.5, 0.5], [[1.0, 2.0], [1.0, 0.5]]),
        lambda: dn.DiscreteGenerator([0.5, 0.5], [[2.0, -1.0], [0.0, 3.0]]),
        lambda: dn.DiscreteGenerator([0.6, 0.6], [[1.0], [1.0]]),
        lambda: dn.MonteCarloNorm(2, "xi", 100),
        lambda: dn.MaxNorm(3)([1.0, 2.0]),
        lambda: dn.max_moment(dn.make_xi_generator(), None, []),
        lambda: dn.min_moment(dn.make_xi_generator(), None, []),
    ],
)
def test_invalid_inputs(bad):
    with pytest.raises(dn.DNormError):
        bad()


def test_generator_mean_error_names_index():
    with pytest.raises(dn.DNormError, match="index 2"):
        dn.DiscreteGenerator([0.5, 0.5], [[1.0, 2.0], [1.0, 0.5]])


@pytest.mark.parametrize("norm", all_families(3), ids=lambda n: n.family)
def test_json_round_trip(norm):
    obj = json.loads(json.dumps(norm.to_dict()))
    validate("norm", obj)
    back = dn.norm_from_dict(obj)
    x = [0.3, 1.2, 0.5]
    assert back(x) == norm(x)
    assert back.to_dict() == norm.to_dict()


def test_named_family_generators_reproduce_norm(rng):
    for norm in (dn.LambdaNorm(4, 1.0), dn.MaxNorm(4), dn.MarshallOlkinNorm(4, 0.35)):
        gnorm = dn.DiscreteGeneratorNorm(norm.generator)
        for _ in range(20):
            x = rng.random(4)
            assert gnorm(x) == pytest.approx(norm(x), rel=1e-13)


def test_random_norm_suite_is_valid(rng):
    for _ in range(50):
        d = int(rng.integers(2, 7))
        norm = random_norm(rng, d)
        assert norm.subset_norms()[popcounts(d) == 1] == pytest.approx(np.ones(d), abs=1e-12)
