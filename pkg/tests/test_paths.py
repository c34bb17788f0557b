import numpy as np
import pytest

from stochfem.paths import coarsen_path, sample_path, sample_seed, splitmix64, WienerPath


def test_same_seed_identical():
    a = sample_path(100, 1e-3, 42)
    b = sample_path(100, 1e-3, 42)
    np.testing.assert_array_equal(a.increments, b.increments)
    assert a.increments.tobytes() == b.increments.tobytes()


def test_different_seeds_differ():
    assert not np.array_equal(sample_path(10, 1.0, 1).increments, sample_path(10, 1.0, 2).increments)


def test_mean_and_variance():
    tau, n = 1e-4, 100_000
    inc = sample_path(n, tau, 2024).increments
    assert abs(inc.mean()) <= 4 * np.sqrt(tau / n)
    assert abs(inc.var() / tau - 1) <= 0.05


def test_bad_arguments():
    with pytest.raises(ValueError):
        sample_path(0, 1.0, 1)
    with pytest.raises(ValueError):
        sample_path(5, 0.0, 1)


def test_coarsen_identity():
    p = sample_path(8, 0.1, 3)
    assert coarsen_path(p, 1) is p


def test_coarsen_sums():
    inc = np.array([0.5, 0.25, -1.0, 0.125])
    p = WienerPath(0.1, inc, 0)
    c = coarsen_path(p, 2)
    np.testing.assert_array_equal(c.increments, [0.75, -0.875])
    assert c.tau == pytest.approx(0.2)
    assert c.factor == 2 and c.seed == 0


def test_coarsen_random_sums():
    p = sample_path(12, 0.01, 9)
    c = coarsen_path(p, 3)
    np.testing.assert_allclose(c.increments, p.increments.reshape(4, 3).sum(axis=1), rtol=0, atol=1e-15)


@pytest.mark.parametrize("factor", [1, 2, 3, 4, 6, 12, 24])
def test_displacement_preserved(factor):
    p = sample_path(24, 0.01, 77)
    assert coarsen_path(p, factor).displacement == p.displacement


def test_nested_coarsening_exact():
    p = sample_path(48, 0.01, 5)
    for a, b in [(2, 3), (3, 4), (4, 2), (6, 8)]:
        x = coarsen_path(coarsen_path(p, a), b)
        y = coarsen_path(p, a * b)
        assert x.increments.tobytes() == y.increments.tobytes()
        assert x.tau == y.tau and x.factor == y.factor


def test_non_divisible_factor():
    with pytest.raises(ValueError):
        coarsen_path(sample_path(10, 0.1, 1), 3)


def test_independence_across_indices():
    n = 1000
    x = np.array([sample_path(50, 1.0, sample_seed(11, 2 * i)).increments for i in range(n)])
    y = np.array([sample_path(50, 1.0, sample_seed(11, 2 * i + 1)).increments for i in range(n)])
    # lag-0 cross-correlation per step across path pairs
    xc, yc = x - x.mean(axis=0), y - y.mean(axis=0)
    r = (xc * yc).sum(axis=0) / np.sqrt((xc**2).sum(axis=0) * (yc**2).sum(axis=0))
    assert np.max(np.abs(r)) < 0.1
    assert abs(np.corrcoef(x.ravel(), y.ravel())[0, 1]) < 0.1


def test_seed_derivation():
    assert sample_seed(0, 0) != sample_seed(0, 1)
    assert sample_seed(1, 0) != sample_seed(0, 1)
    assert splitmix64(0) == 0xE220A8397B1DCDAF
    seeds = {sample_seed(123, i) for i in range(10_000)}
    assert len(seeds) == 10_000
