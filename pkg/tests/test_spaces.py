import numpy as np
import pytest

from banach_sgd import (
    ConfigurationError,
    DimensionMismatchError,
    InvalidInputError,
    SpaceDescriptor,
    bregman_distance,
    dual_pairing,
    duality_map,
    inverse_duality_map,
    lr_norm,
)

# Shared parameter grid: dimensions, norm exponents, and both gauge choices.
DIMS = [1, 2, 3, 8, 17, 64]
EXPONENTS = [1.1, 1.5, 2.0, 3.0, 4.0]


def descriptor_grid():
    for r in EXPONENTS:
        for p in {2.0, r}:
            yield SpaceDescriptor(r, p)


def random_vectors(dim, count, seed):
    rng = np.random.Generator(np.random.Philox(key=seed))
    for _ in range(count):
        v = rng.normal(size=dim) * np.exp(rng.uniform(-2, 2))
        if np.any(v != 0):
            yield v


class TestSpaceDescriptor:
    def test_conjugates_are_exact(self):
        for desc in descriptor_grid():
            assert abs(1.0 / desc.r + 1.0 / desc.r_conj - 1.0) < 1e-14
            assert abs(1.0 / desc.p + 1.0 / desc.p_conj - 1.0) < 1e-14

    def test_dual_of_dual_is_identity(self):
        d = SpaceDescriptor(1.5, 2.0)
        dd = d.dual.dual
        assert abs(dd.r - d.r) < 1e-12 and abs(dd.p - d.p) < 1e-12

    @pytest.mark.parametrize("r,p", [(1.0, 2.0), (0.5, 2.0), (np.inf, 2.0), (2.0, 1.0), (2.0, 0.0)])
    def test_rejects_out_of_range_exponents(self, r, p):
        with pytest.raises(ConfigurationError):
            SpaceDescriptor(r, p)

    def test_for_norm_uses_convexity_power(self):
        assert SpaceDescriptor.for_norm(1.1).p == 2.0
        assert SpaceDescriptor.for_norm(3.0).p == 3.0


class TestLrNorm:
    def test_euclidean_example(self):
        assert lr_norm([3.0, 4.0], 2.0) == pytest.approx(5.0, abs=1e-15)

    def test_cube_norm_example(self):
        # Frozen from the summation oracle: (1^3 + 2^3)^(1/3).
        assert lr_norm([1.0, -2.0], 3.0) == pytest.approx(9.0 ** (1.0 / 3.0), rel=1e-14)
        assert lr_norm([1.0, -2.0], 3.0) == pytest.approx(2.0800838230519041, rel=1e-12)

    def test_zero_vector(self):
        assert lr_norm(np.zeros(5), 1.7) == 0.0

    def test_matches_summation_oracle(self):
        for r in EXPONENTS:
            for v in random_vectors(9, 20, seed=1):
                direct = float(np.sum(np.abs(v) ** r) ** (1.0 / r))
                assert lr_norm(v, r) == pytest.approx(direct, rel=1e-12)

    def test_rejects_non_finite(self):
        with pytest.raises(InvalidInputError):
            lr_norm([1.0, np.nan], 2.0)
        with pytest.raises(InvalidInputError):
            lr_norm([np.inf, 0.0], 2.0)

    def test_definite(self):
        assert lr_norm([0.0, 1e-300], 1.5) > 0.0


class TestDualityMap:
    def test_hilbert_identity(self):
        x = np.array([3.0, 4.0])
        assert np.allclose(duality_map(x, SpaceDescriptor(2, 2)), x, atol=1e-15)

    def test_frozen_example_r3_p2(self):
        # Oracle: central differences of x -> 0.5 ||x||_3^2 at step 1e-6.
        got = duality_map(np.array([1.0, -2.0]), SpaceDescriptor(3, 2))
        assert got == pytest.approx([0.4807498567691362, -1.9229994270765447], rel=1e-10)

    def test_zero_maps_to_zero(self):
        for desc in descriptor_grid():
            assert np.all(duality_map(np.zeros(4), desc) == 0.0)

    def test_defining_identities_on_grid(self):
        # <J_p(x), x> = ||x||^p and ||J_p(x)||_{r*} = ||x||^(p-1).
        checked = 0
        for desc in descriptor_grid():
            for dim in DIMS:
                for v in random_vectors(dim, 4, seed=10 + dim):
                    j = duality_map(v, desc)
                    nx = lr_norm(v, desc.r)
                    assert dual_pairing(j, v) == pytest.approx(nx ** desc.p, rel=1e-12)
                    assert lr_norm(j, desc.r_conj) == pytest.approx(nx ** (desc.p - 1.0), rel=1e-12)
                    checked += 1
        assert checked >= 200

    def test_gradient_of_norm_power(self):
        # Central finite differences of x -> ||x||_r^p / p, step 1e-6, away from kinks.
        step = 1e-6
        for desc in descriptor_grid():
            rng = np.random.Generator(np.random.Philox(key=3))
            for _ in range(5):
                v = rng.uniform(0.05, 2.0, size=6) * rng.choice([-1.0, 1.0], size=6)
                assert np.all(np.abs(v) > 1e-2)
                j = duality_map(v, desc)
                for idx in range(v.size):
                    e = np.zeros_like(v)
                    e[idx] = step
                    fd = (
                        lr_norm(v + e, desc.r) ** desc.p - lr_norm(v - e, desc.r) ** desc.p
                    ) / (2 * step * desc.p)
                    assert j[idx] == pytest.approx(fd, rel=1e-5, abs=1e-8)


class TestInverseDualityMap:
    def test_hilbert_identity(self):
        xs = np.array([3.0, 4.0])
        assert np.allclose(inverse_duality_map(xs, SpaceDescriptor(2, 2)), xs, atol=1e-15)

    def test_round_trip_example(self):
        x = np.array([1.0, -2.0])
        desc = SpaceDescriptor(3, 2)
        assert np.allclose(inverse_duality_map(duality_map(x, desc), desc), x, rtol=1e-12)

    def test_zero(self):
        assert np.all(inverse_duality_map(np.zeros(3), SpaceDescriptor(1.5, 2)) == 0.0)

    def test_round_trip_on_grid(self):
        for desc in descriptor_grid():
            for dim in DIMS:
                for v in random_vectors(dim, 3, seed=77 + dim):
                    back = inverse_duality_map(duality_map(v, desc), desc)
                    assert np.linalg.norm(back - v) <= 1e-10 * max(1.0, np.linalg.norm(v))


class TestDualPairing:
    def test_orthogonal(self):
        assert dual_pairing([1.0, 0.0], [0.0, 1.0]) == 0.0

    def test_plain_sum(self):
        assert dual_pairing([2.0, 3.0], [1.0, 1.0]) == 5.0

    def test_pairing_with_duality_map_gives_norm_power(self):
        x = np.array([1.0, -2.0])
        desc = SpaceDescriptor(3, 2)
        assert dual_pairing(duality_map(x, desc), x) == pytest.approx(
            lr_norm(x, 3) ** 2, rel=1e-12
        )
        assert dual_pairing(duality_map(x, desc), x) == pytest.approx(4.3267487109222245, rel=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            dual_pairing([1.0], [1.0, 2.0])

    def test_cauchy_schwarz(self):
        for desc in descriptor_grid():
            for v in random_vectors(7, 5, seed=5):
                for w in random_vectors(7, 2, seed=6):
                    lhs = abs(dual_pairing(w, v))
                    assert lhs <= lr_norm(w, desc.r_conj) * lr_norm(v, desc.r) * (1 + 1e-12)


class TestBregmanDistance:
    def test_hilbert_example(self):
        assert bregman_distance([1.0, 0.0], [0.0, 1.0], SpaceDescriptor(2, 2)) == pytest.approx(
            1.0, abs=1e-14
        )

    def test_zero_at_equal_points(self):
        z = np.array([0.3, -0.7])
        for desc in descriptor_grid():
            assert abs(bregman_distance(z, z, desc)) < 1e-13

    def test_r3_p3_example(self):
        # Direct evaluation oracle: (1/p*)*1 + (1/p)*1 - 0 with p = 3, p* = 3/2.
        desc = SpaceDescriptor(3, 3)
        expected = 1.0 / desc.p_conj + 1.0 / desc.p
        assert expected == pytest.approx(1.0, abs=1e-15)
        assert bregman_distance([1.0, 0.0], [0.0, 1.0], desc) == pytest.approx(expected, rel=1e-14)

    def test_nonnegative_and_definite_on_grid(self):
        for desc in descriptor_grid():
            for dim in DIMS:
                rng = np.random.Generator(np.random.Philox(key=100 + dim))
                for _ in range(4):
                    z = rng.normal(size=dim)
                    w = rng.normal(size=dim)
                    d = bregman_distance(z, w, desc)
                    assert d >= -1e-12
                    if d < 1e-12:
                        assert np.linalg.norm(z - w) < 1e-6

    def test_three_point_identity(self):
        for desc in descriptor_grid():
            rng = np.random.Generator(np.random.Philox(key=200))
            for _ in range(10):
                z, v, w = (rng.normal(size=5) for _ in range(3))
                lhs = bregman_distance(z, w, desc)
                rhs = (
                    bregman_distance(z, v, desc)
                    + bregman_distance(v, w, desc)
                    + dual_pairing(duality_map(v, desc) - duality_map(z, desc), w - v)
                )
                assert lhs == pytest.approx(rhs, abs=1e-10)

    def test_hilbert_two_convexity_is_equality(self):
        desc = SpaceDescriptor(2, 2)
        rng = np.random.Generator(np.random.Philox(key=300))
        for _ in range(20):
            z = rng.normal(size=6)
            w = rng.normal(size=6)
            d = bregman_distance(z, w, desc)
            assert d == pytest.approx(0.5 * np.sum((w - z) ** 2), rel=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            bregman_distance([1.0], [1.0, 2.0], SpaceDescriptor(2, 2))
