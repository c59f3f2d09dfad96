import warnings

import numpy as np
import pytest
from scipy import integrate

from fincorr import spectra
from fincorr.errors import ConvergenceError, DataWarning, InputError
from fincorr.linalg import fix_signs, jacobi_eigh, off_norm
from fincorr.panel import ReturnPanel

from conftest import random_corr


def _rp(R):
    d = np.arange(R.shape[1]).astype("datetime64[D]")
    return ReturnPanel.from_log_returns([f"i{k}" for k in range(R.shape[0])], d, R)


def test_perfect_correlations(rng):
    x = rng.standard_normal(200)
    C = spectra.correlation(_rp(np.vstack([x, 3 * x + 1, -x]))).C
    assert C[0, 1] == pytest.approx(1.0, abs=1e-12)
    assert C[0, 2] == pytest.approx(-1.0, abs=1e-12)


def test_corr_invariants(rng):
    C = spectra.correlation(_rp(rng.standard_normal((12, 80)))).C
    assert np.all(np.diag(C) == 1.0)
    assert np.array_equal(C, C.T)
    assert C.min() >= -1 and C.max() <= 1
    assert np.trace(C) == 12


def test_correlation_matches_numpy(rng):
    R = rng.standard_normal((6, 300))
    np.testing.assert_allclose(spectra.correlation_from_returns(R), np.corrcoef(R), atol=1e-13)


def test_correlation_window_renormalizes(rng):
    R = rng.standard_normal((4, 100))
    rp = _rp(R)
    sub = spectra.correlation(rp, (rp.dates[10], rp.dates[60]))
    np.testing.assert_allclose(sub.C, np.corrcoef(R[:, 10:60]), atol=1e-13)
    assert sub.window[2] == 50


def test_mp_bounds():
    law = spectra.mp_bounds(20, 387)
    assert law.Q == pytest.approx(19.35)
    assert round(law.lambda_min, 3) == 0.597
    assert round(law.lambda_max, 3) == 1.506
    law = spectra.mp_bounds(5, 5)
    assert (law.lambda_min, law.lambda_max) == (0.0, 4.0)
    law = spectra.mp_bounds(10, 40)
    assert (law.lambda_min, law.lambda_max) == pytest.approx((0.25, 2.25))
    with pytest.raises(InputError):
        spectra.mp_bounds(20, 10)


def test_mp_density_support_and_mass():
    law = spectra.mp_bounds(20, 387)
    d = spectra.mp_density(law, [law.lambda_min, law.lambda_max, 0.1, 3.0, -1.0])
    assert np.all(d == 0)
    grid = np.linspace(law.lambda_min, law.lambda_max, 10_000)
    assert integrate.trapezoid(spectra.mp_density(law, grid), grid) == pytest.approx(1.0, abs=1e-3)
    # adaptive quadrature as an independent oracle
    val, _ = integrate.quad(lambda x: spectra.mp_density(law, [x])[0], law.lambda_min, law.lambda_max)
    assert val == pytest.approx(1.0, abs=1e-6)


def test_eigen_identity():
    sp = spectra.eigendecompose(np.eye(6))
    np.testing.assert_allclose(sp.eigenvalues, 1.0)
    v = sp.eigenvectors
    np.testing.assert_allclose(v.T @ v, np.eye(6), atol=1e-14)


@pytest.mark.parametrize("rho", [-0.7, 0.2, 0.9])
def test_eigen_2x2(rho):
    sp = spectra.eigendecompose(np.array([[1.0, rho], [rho, 1.0]]))
    lo, hi = sorted([1 - rho, 1 + rho])
    np.testing.assert_allclose(sp.eigenvalues, [lo, hi], atol=1e-14)
    u = sp.eigenvectors[:, 1 if rho > 0 else 0]
    # eigenvector of 1+rho is (1,1)/sqrt2 under the sign convention
    np.testing.assert_allclose(u, [2**-0.5, 2**-0.5], atol=1e-14)


def test_eigen_reconstruction_and_trace(rng):
    for _ in range(20):
        C = random_corr(rng)
        sp = spectra.eigendecompose(C)
        U, lam = sp.eigenvectors, sp.eigenvalues
        assert np.max(np.abs(C - U @ np.diag(lam) @ U.T)) < 1e-10
        assert abs(lam.sum() - 20) < 1e-8
        assert np.all(np.diff(lam) >= 0)
        assert np.all(sp.ipr >= 1 / 20 - 1e-12) and np.all(sp.ipr <= 1 + 1e-12)


def test_jacobi_agrees_with_lapack(rng):
    C = random_corr(rng, 15)
    a = spectra.eigendecompose(C, "jacobi")
    b = spectra.eigendecompose(C, "lapack")
    np.testing.assert_allclose(a.eigenvalues, b.eigenvalues, atol=1e-12)
    # compare projectors, which are basis independent
    for k in range(15):
        pa = np.outer(a.eigenvectors[:, k], a.eigenvectors[:, k])
        pb = np.outer(b.eigenvectors[:, k], b.eigenvectors[:, k])
        np.testing.assert_allclose(pa, pb, atol=1e-9)


def test_sign_convention():
    v = fix_signs(np.array([[0.1, -0.9], [-0.8, 0.2]]))
    assert v[1, 0] > 0 and v[0, 1] > 0


@pytest.mark.parametrize("rho", np.round(np.arange(0.1, 1.0, 0.1), 1))
def test_equicorrelated_top(rho):
    N = 20
    C = np.full((N, N), rho)
    np.fill_diagonal(C, 1.0)
    sp = spectra.eigendecompose(C)
    assert sp.eigenvalues[-1] == pytest.approx(1 + (N - 1) * rho, abs=1e-8)
    np.testing.assert_allclose(sp.top, np.full(N, N**-0.5), atol=1e-10)


def test_jacobi_rejects_asymmetric():
    with pytest.raises(InputError):
        jacobi_eigh(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_jacobi_rotation_cap(rng):
    C = random_corr(rng, 10)
    with pytest.raises(ConvergenceError) as info:
        jacobi_eigh(C, max_rotations=5)
    assert info.value.residual > 0


def test_jacobi_odd_and_tiny(rng):
    for n in (1, 2, 3, 7):
        A = rng.standard_normal((n, n))
        A = A + A.T
        w, v = jacobi_eigh(A)
        np.testing.assert_allclose(w, np.linalg.eigvalsh(A), atol=1e-12)
        assert off_norm(v.T @ A @ v) < 1e-10


def test_ipr_values():
    assert spectra.ipr(np.full(20, 20**-0.5)) == pytest.approx(0.05)
    assert spectra.ipr(np.eye(20)[0]) == 1.0
    assert spectra.ipr(np.array([2**-0.5, 2**-0.5, 0.0])) == pytest.approx(0.5)


def test_sliding_window_count(rng):
    rp = _rp(rng.standard_normal((5, 3088)))
    traces = spectra.sliding_spectra(rp, 25, 25)
    assert len(traces) == 123
    t = traces[0]
    assert t.largest[0] >= t.largest[1] >= t.largest[2]
    assert t.ci == pytest.approx(t.X.sum())
    assert t.end_date == rp.dates[24]


def test_sliding_skips_constant_window(rng):
    R = rng.standard_normal((3, 100))
    R[1, 25:50] = 0.01
    with pytest.warns(DataWarning, match="window 1 skipped"):
        traces = spectra.sliding_spectra(_rp(R), 25, 25)
    assert [t.window_index for t in traces] == [0, 2, 3]


def test_ci_cases():
    ci, X, S = spectra.correlation_index(np.eye(5), np.full(5, 5**-0.5))
    assert ci == 0.0
    s = 0.3
    C = np.full((5, 5), s)
    np.fill_diagonal(C, 1.0)
    ci, X, S = spectra.correlation_index(C, np.full(5, 5**-0.5))
    assert ci == pytest.approx(s)
    np.testing.assert_allclose(S, s)


def test_ci_permutation_invariant(rng):
    C = random_corr(rng, 10)
    perm = rng.permutation(10)
    a = spectra.eigendecompose(C)
    Cp = C[np.ix_(perm, perm)]
    b = spectra.eigendecompose(Cp)
    ci_a = spectra.correlation_index(C, a.top)[0]
    ci_b = spectra.correlation_index(Cp, b.top)[0]
    assert ci_a == pytest.approx(ci_b, abs=1e-12)


def test_mp_compare_counts_and_mass(rng):
    R = rng.standard_normal((20, 387))
    sp = spectra.eigendecompose(spectra.correlation_from_returns(R))
    law = spectra.mp_bounds(20, 387)
    cmp = spectra.mp_compare(sp, law, bins=10)
    assert cmp.below + cmp.inside + cmp.above == 20
    assert np.sum(cmp.empirical * np.diff(cmp.bin_edges)) == pytest.approx(1.0, abs=1e-6)
    assert np.all(cmp.theoretical[(cmp.grid < law.lambda_min) | (cmp.grid > law.lambda_max)] == 0)
    with pytest.raises(InputError):
        spectra.mp_compare(sp, law, bins=0)


def test_mp_compare_all_ones():
    sp = spectra.Spectrum(np.ones(20), np.eye(20), np.ones(20))
    cmp = spectra.mp_compare(sp, spectra.mp_bounds(20, 20_000))
    assert cmp.inside == 20
