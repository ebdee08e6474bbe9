import numpy as np
import pytest

from crossreg import add_noise, baart, baart2d, get_problem, gravity, phillips
from crossreg.problems import baart_g_analytic


def test_gravity_symmetry_and_positivity():
    core = gravity(32)
    a = core.dense()
    np.testing.assert_allclose(a, a.T, rtol=1e-14)
    assert np.all(a > 0)


def test_gravity_singular_decay():
    # fast decay: sigma_16/sigma_1 < 1e-4 already at n = 16, and the
    # 1e-12 level is crossed well inside the spectrum at n = 64
    s16 = np.linalg.svd(gravity(16).dense(), compute_uv=False)
    assert s16[15] / s16[0] < 1e-4
    s64 = np.linalg.svd(gravity(64).dense(), compute_uv=False)
    assert np.any(s64 / s64[0] < 1e-12)
    assert int(np.argmax(s64 / s64[0] < 1e-12)) + 1 <= 45


def test_gravity_consistent_data():
    core = gravity(64)
    a = core.dense()
    np.testing.assert_allclose(core.g_exact, a @ core.x_exact, atol=1e-12 * np.linalg.norm(a))


def test_gravity_size_validation():
    with pytest.raises(ValueError):
        gravity(4)


def test_baart_entries_positive_and_severely_ill_posed():
    core = baart(64)
    a = core.dense()
    assert np.all(a > 0)
    s = np.linalg.svd(a, compute_uv=False)
    assert int(np.sum(s >= 1e-12 * s[0])) <= 15


def test_baart_quadrature_matches_analytic():
    n = 256
    core = baart(n)
    s = (np.arange(n) + 0.5) * (0.5 * np.pi / n)
    g_true = baart_g_analytic(s)
    err = np.max(np.abs(core.g_exact - g_true)) / np.max(np.abs(g_true))
    assert err < 2e-5  # O(n^-2) midpoint error at n = 256
    # second-order convergence: quadrupling n cuts the error ~16x
    core2 = baart(4 * n)
    s2 = (np.arange(4 * n) + 0.5) * (0.5 * np.pi / (4 * n))
    err2 = np.max(np.abs(core2.g_exact - baart_g_analytic(s2))) / np.max(np.abs(g_true))
    assert err2 < err / 10


def test_phillips_band_structure_and_symmetry():
    n = 64
    core = phillips(n)
    a = core.dense()
    t = -6.0 + (np.arange(n) + 0.5) * (12.0 / n)
    for i in range(0, n, 7):
        for j in range(0, n, 7):
            if abs(t[i] - t[j]) >= 3.0:
                assert a[i, j] == 0.0
    np.testing.assert_allclose(a, a.T, atol=1e-15)


def test_phillips_decays_slower_than_gravity():
    sg = np.linalg.svd(gravity(256).dense(), compute_uv=False)
    sp = np.linalg.svd(phillips(256).dense(), compute_uv=False)
    assert sp[19] / sp[0] > sg[19] / sg[0]


def test_baart2d_kronecker_structure():
    core = baart2d(6)
    b = baart(6).dense()
    assert core.oracle.entry(0, 0) == pytest.approx(b[0, 0] ** 2, rel=1e-15)
    dense = core.dense()
    np.testing.assert_allclose(dense, np.kron(b, b), rtol=1e-14)
    # oracle agrees with the dense Kronecker product at every entry
    ii, jj = np.meshgrid(np.arange(36), np.arange(36), indexing="ij")
    vals = core.oracle.entries(ii.ravel(), jj.ravel())
    np.testing.assert_allclose(vals, dense.ravel(), rtol=1e-14)


def test_baart2d_exact_solution_and_data():
    core = baart2d(6)
    np.testing.assert_allclose(core.g_exact, core.dense() @ core.x_exact, atol=1e-13)


def test_baart2d_size():
    assert baart2d(40).n == 1600


def test_add_noise_exact_norm():
    core = gravity(64)
    inst = add_noise(core, delta=1e-2, seed=5)
    assert np.linalg.norm(inst.g_noisy - inst.g_exact) == pytest.approx(1e-2, rel=1e-14)
    assert inst.delta == 1e-2


def test_add_noise_relative():
    core = gravity(64)
    inst = add_noise(core, delta_rel=5e-3, seed=5)
    ratio = np.linalg.norm(inst.g_noisy - inst.g_exact) / np.linalg.norm(inst.g_exact)
    assert ratio == pytest.approx(5e-3, rel=1e-14)


def test_add_noise_deterministic():
    core = gravity(32)
    a = add_noise(core, delta=1e-3, seed=9)
    b = add_noise(core, delta=1e-3, seed=9)
    np.testing.assert_array_equal(a.g_noisy, b.g_noisy)


def test_add_noise_validation():
    core = gravity(16)
    with pytest.raises(ValueError):
        add_noise(core)
    with pytest.raises(ValueError):
        add_noise(core, delta=1e-2, delta_rel=1e-2)
    with pytest.raises(ValueError):
        add_noise(core, delta=-1.0)


def test_get_problem_dispatch():
    assert get_problem("gravity", 16).name == "gravity"
    assert get_problem("baart2d", 36).n == 36
    with pytest.raises(ValueError):
        get_problem("baart2d", 37)
    with pytest.raises(ValueError):
        get_problem("unknown", 16)


def test_oracle_dense_agreement_all_generators():
    for name, n in (("gravity", 16), ("baart", 16), ("phillips", 16), ("baart2d", 16)):
        core = get_problem(name, n)
        dense = core.dense()
        for i in range(0, n, 5):
            np.testing.assert_allclose(core.oracle.row(i), dense[i], rtol=1e-13, atol=1e-15)
