import numpy as np
import pytest

from hmmforget.cocycle import expected_log_det, lyapunov_spectrum
from hmmforget.errors import (
    ContractionFailure,
    DegenerateParameters,
    InvalidEpsilon,
    OutsideValidity,
    WindowTooShort,
)
from hmmforget.model import observation_matrices
from hmmforget.perturb2 import (
    binary_entropy,
    binary_rate_bound,
    build_perturb,
    lambda1_birkhoff,
    lambda1_zeroth,
    rho_eval,
    rho_zeroth,
    rigorous_eps0,
    solve_h,
    to_binary,
    to_hmm,
    verify_eigenrelation,
)
from hmmforget.simulate import ObservationWindow, future_window, sample_path


def _fw(pm, n, seed=7):
    return future_window(sample_path(to_hmm(pm), n + 10, seed), n)


def test_derived_objects():
    pm = build_perturb(0.9, 0.2, 0.1)
    assert pm.beta == pytest.approx(0.1)
    assert pm.D == pytest.approx(1.6e6)
    np.testing.assert_allclose(pm.e[0], [0.9, 0.2])
    np.testing.assert_allclose(pm.f[0], [-0.2, 0.9])
    np.testing.assert_allclose(pm.pi, [2 / 3, 1 / 3])


@pytest.mark.parametrize("eps", [0.0, 1e-3, 0.1, 0.3, 0.7])
def test_decomposition_matches_generic_matrices(eps):
    pm = build_perturb(0.9, 0.2, eps)
    L = observation_matrices(to_hmm(pm))
    for b in (0, 1):
        np.testing.assert_allclose(pm.L(b), L[b], atol=1e-14, rtol=0)
    assert pm.L(0)[0, 0] == pytest.approx((1 - eps) * 0.9)


@pytest.mark.parametrize("p0,p1", [(0.9, 0.2), (0.3, 0.6), (0.05, 0.99)])
def test_kernel_and_norm_bounds(p0, p1):
    pm = build_perturb(p0, p1, 0.01)
    for b in (0, 1):
        assert np.abs(pm.M[b].T @ pm.f[b]).max() <= 1e-15
        assert abs(pm.e[b] @ pm.f[b]) <= 1e-15
        for v in (pm.e[b], pm.f[b]):
            assert pm.beta - 1e-15 <= np.linalg.norm(v) <= np.sqrt(2)


@pytest.mark.parametrize("args,err", [
    ((0.4, 0.4, 0.1), DegenerateParameters),
    ((1.0, 0.4, 0.1), DegenerateParameters),
    ((0.9, 0.2, 0.5), InvalidEpsilon),
    ((0.9, 0.2, 1.0), InvalidEpsilon),
    ((0.9, 0.2, -0.1), InvalidEpsilon),
])
def test_build_errors(args, err):
    with pytest.raises(err):
        build_perturb(*args)


def test_adapter_symbols():
    np.testing.assert_array_equal(to_binary([1, 2, 2]), [0, 1, 1])
    with pytest.raises(ValueError):
        to_binary([3])


def _inequalities(beta, eps):
    D = 16 / beta**5
    den = beta**3 - 4 * eps * D - 4 * eps - 4 * eps**2
    return den > 0 and (2 / beta**2) * (4 + 4 * eps * D) / den <= D and \
        eps * (2 / beta**2) * 16 / den**2 <= 0.5


@pytest.mark.parametrize("beta", [0.1, 0.2, 0.45])
def test_eps0_is_the_threshold(beta):
    e0 = rigorous_eps0(beta)
    assert e0 > 0
    assert _inequalities(beta, e0)
    assert not _inequalities(beta, e0 * (1 + 1e-9))


def test_rho_at_zero_eps():
    pm = build_perturb(0.9, 0.2, 0.0)
    # M_0 v = v_1 e_0 and M_1 v = v_2 e_1, so rho collapses to a component of e_{z2}
    assert rho_eval(pm, 0, 0, 0.0) == pytest.approx(0.9)
    assert rho_eval(pm, 0, 1, 0.0) == pytest.approx(0.1)
    assert rho_eval(pm, 1, 0, 0.0) == pytest.approx(0.2)
    assert rho_eval(pm, 1, 1, 5.0) == pytest.approx(0.8)


def test_rho_linear_in_eps():
    ratios = []
    for eps in (1e-3, 1e-2):
        pm = build_perturb(0.9, 0.2, eps)
        w = _fw(pm, 50)
        h = solve_h(pm, ObservationWindow(w.symbols[1:], 2), 40).h_value
        z1, z2 = to_binary(w.symbols[:2])
        ratios.append(abs(rho_eval(pm, z1, z2, h) - rho_zeroth(pm, z1, z2)) / eps)
    assert max(ratios) < 10 and ratios[0] == pytest.approx(ratios[1], rel=0.2)


def test_zero_eps_fixed_point():
    pm = build_perturb(0.9, 0.2, 0.0)
    w = _fw(pm, 41)
    r = solve_h(pm, w, 40)
    z1, z2 = to_binary(w.symbols[:2])
    u1, _, u3, _ = pm.U[z1, z2]
    assert np.all(r.iterates[1:] == u1 / u3) and r.contraction_estimate == 0
    assert verify_eigenrelation(pm, _fw(pm, 42), 40).residual <= 1e-14


def test_empirical_mode_small_eps():
    pm = build_perturb(0.9, 0.2, 1e-3)
    r = solve_h(pm, _fw(pm, 41), 40)
    assert r.contraction_estimate < 1
    assert np.all(np.abs(r.iterates) <= pm.D) and r.max_abs_iterate <= pm.D
    assert len(r.window_used) == 41 and r.mode == "empirical"
    chk = verify_eigenrelation(pm, _fw(pm, 42), 40)
    assert chk.residual <= 1e-8
    g = np.array(chk.g)
    assert np.all(g > 0)


def test_rigorous_mode_halves():
    pm = build_perturb(0.9, 0.2, 0.0)
    pm = build_perturb(0.9, 0.2, pm.eps0 / 2)
    r = solve_h(pm, _fw(pm, 41), 40, mode="rigorous")
    assert r.contraction_estimate <= 0.5
    assert r.error_bound == pytest.approx(pm.D * 2.0**-40)


def test_rigorous_mode_outside_validity():
    pm = build_perturb(0.9, 0.2, 1e-3)
    with pytest.raises(OutsideValidity):
        solve_h(pm, _fw(pm, 41), 40, mode="rigorous")


def test_contraction_failure_reported():
    # near-deterministic chain at large eps: single steps expand somewhere along the window
    pm = build_perturb(0.99, 0.01, 0.3)
    with pytest.raises(ContractionFailure):
        solve_h(pm, future_window(sample_path(to_hmm(pm), 41, 0), 41), 40)


def test_window_length_checked():
    pm = build_perturb(0.9, 0.2, 0.01)
    with pytest.raises(WindowTooShort):
        solve_h(pm, _fw(pm, 40), 40)
    with pytest.raises(WindowTooShort):
        verify_eigenrelation(pm, _fw(pm, 41), 40)


def test_zeroth_order_value():
    h = lambda x: x * np.log(x) + (1 - x) * np.log(1 - x)
    pm = build_perturb(0.9, 0.2, 0.05)
    assert lambda1_zeroth(pm) == pytest.approx(2 / 3 * h(0.9) + 1 / 3 * h(0.8))
    assert lambda1_zeroth(pm) == pytest.approx(-0.3835, abs=1e-4)
    assert binary_entropy(0.5) == pytest.approx(np.log(0.5))


def test_birkhoff_zero_eps():
    pm = build_perturb(0.9, 0.2, 0.0)
    b = lambda1_birkhoff(pm, 200_000, 11)
    assert abs(b.value - lambda1_zeroth(pm)) <= 3 * b.std_error


def test_birkhoff_matches_qr():
    pm = build_perturb(0.9, 0.2, 0.02)
    b = lambda1_birkhoff(pm, 200_000, 12)
    hmm = to_hmm(pm)
    qr = lyapunov_spectrum(hmm, sample_path(hmm, 200_000, 12))
    assert abs(b.value - qr.lambdas[0]) < 1e-2
    assert b.min_rho > 0


def test_rho_positive_below_guard():
    pm = build_perturb(0.9, 0.2, 0.9 * 0.1**3 / 8)
    assert lambda1_birkhoff(pm, 20_000, 3).min_rho > 0


def test_ledet_value_and_cross_check():
    pm = build_perturb(0.9, 0.2, 0.1)
    rb = binary_rate_bound(pm)
    assert rb.ledet == pytest.approx(-2.7646, abs=1e-4)
    assert rb.ledet == pytest.approx(expected_log_det(to_hmm(pm)), abs=1e-14)


def test_rate_bound_relabel_symmetry():
    a = binary_rate_bound(build_perturb(0.9, 0.2, 0.03))
    b = binary_rate_bound(build_perturb(1 - 0.2, 1 - 0.9, 0.03))
    assert a.bound == pytest.approx(b.bound, abs=1e-14)


def test_rate_bound_at_zero_eps():
    assert np.isneginf(binary_rate_bound(build_perturb(0.9, 0.2, 0.0)).bound)
