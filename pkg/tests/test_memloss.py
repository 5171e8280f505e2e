import io

import numpy as np
import pytest

from hmmforget.errors import (
    DegenerateDirection,
    InsufficientData,
    TooLarge,
    WindowTooShort,
)
from hmmforget.memloss import (
    DecayCurve,
    RateEstimate,
    best_rate,
    decompose_psi,
    delta_bruteforce,
    delta_curve,
    delta_tilde_bruteforce,
    delta_tilde_curve,
    estimate_rate,
    filter_vectors,
    gamma_ratios,
    matched_gap,
    write_curves_csv,
)
from hmmforget.cocycle import estimate_codim1_direction
from hmmforget.model import check_hypotheses
from hmmforget.simulate import derive_seed, past_window, sample_path


def _window(model, n, seed=1):
    return past_window(sample_path(model, n, derive_seed(seed, 1)), n)


def _forward_filter(model, b, symbols):
    """Textbook normalised forward filter: law of X_0 given Z_{-n} = b and the later symbols."""
    alpha = model.pi * model.q[:, b - 1]
    alpha /= alpha.sum()
    for z in symbols:
        alpha = (alpha @ model.p) * model.q[:, z - 1]
        alpha /= alpha.sum()
    return alpha @ model.p


def test_first_value_by_hand(test_model):
    # P(X_0=1 | Z_{-1}=1) - P(X_0=1 | Z_{-1}=2) with pi = (2/3, 1/3)
    up = (2 / 3 * 0.9 * 0.9 + 1 / 3 * 0.1 * 0.2) / (2 / 3 * 0.9 + 1 / 3 * 0.1)
    down = (2 / 3 * 0.1 * 0.9 + 1 / 3 * 0.9 * 0.2) / (2 / 3 * 0.1 + 1 / 3 * 0.9)
    w = _window(test_model, 5)
    assert delta_bruteforce(test_model, w, 1, 1, 2, 1) == pytest.approx(up - down, rel=1e-15)
    assert delta_curve(test_model, w, triples=[(1, 1, 2)], n_max=1)[0].values[0] == \
        pytest.approx(0.5358851674641146, rel=1e-14)


def test_matches_forward_filter(three_state_model):
    m = three_state_model
    w = _window(m, 12, seed=4)
    curves = {c.triple: c for c in delta_curve(m, w, n_max=8)}
    for n in range(1, 9):
        later = list(w.symbols[len(w) - (n - 1):]) if n > 1 else []
        for b in (1, 2, 3):
            for c in (1, 2, 3):
                ref = _forward_filter(m, b, later) - _forward_filter(m, c, later)
                for a in (1, 2, 3):
                    assert curves[(a, b, c)].values[n - 1] == pytest.approx(ref[a - 1], abs=1e-13)


def test_oracle_three_states(three_state_model):
    m = three_state_model
    w = _window(m, 8, seed=2)
    curves = delta_curve(m, w, n_max=7)
    for cv in curves[::4]:
        for n in range(1, 8):
            ref = delta_bruteforce(m, w, *cv.triple, n)
            assert cv.values[n - 1] == pytest.approx(ref, rel=1e-10, abs=1e-300)


def test_tilde_oracle(test_model):
    w = _window(test_model, 10, seed=3)
    for cv in delta_tilde_curve(test_model, w, n_max=9):
        for n in range(1, 10):
            ref = delta_tilde_bruteforce(test_model, w, *cv.triple, n)
            assert cv.values[n - 1] == pytest.approx(ref, rel=1e-10, abs=1e-300)


def test_tilde_is_q_mixture(test_model):
    w = _window(test_model, 60)
    d = {c.triple: c.values for c in delta_curve(test_model, w, n_max=30)}
    for cv in delta_tilde_curve(test_model, w, n_max=30):
        e, b, c = cv.triple
        mix = sum(test_model.q[a - 1, e - 1] * d[(a, b, c)] for a in (1, 2))
        np.testing.assert_allclose(cv.values, mix, rtol=1e-9, atol=1e-300)


def test_scale_invariance(test_model):
    w = _window(test_model, 200)
    rng = np.random.default_rng(0)
    plain = delta_curve(test_model, w, n_max=150)
    scaled = delta_curve(test_model, w, n_max=150, rescale=np.exp(rng.uniform(-30, 30, 150)))
    for a, b in zip(plain, scaled):
        np.testing.assert_allclose(a.log_abs, b.log_abs, rtol=1e-12, atol=1e-12)


def test_identical_conditionings_vanish(test_model):
    for cv in delta_curve(test_model, _window(test_model, 50), n_max=40):
        if cv.triple[1] == cv.triple[2]:
            assert np.all(cv.values == 0) and cv.censored.all()


def test_sum_over_a_vanishes(test_model):
    # probabilities of X_0 sum to one under either conditioning
    curves = {c.triple: c.values for c in delta_curve(test_model, _window(test_model, 30), n_max=10)}
    np.testing.assert_allclose(curves[(1, 1, 2)] + curves[(2, 1, 2)], 0, atol=1e-15)


def test_uniform_emissions_curves_zero(uniform_model):
    for cv in delta_curve(uniform_model, _window(uniform_model, 50), n_max=40):
        assert np.all(cv.values == 0)
        assert estimate_rate(cv).all_censored


def test_log_accuracy_far_below_epsilon(test_model):
    w = _window(test_model, 400)
    cv = delta_curve(test_model, w, triples=[(1, 1, 2)], n_max=399)[0]
    assert cv.log_abs[-1] < -600
    assert np.all(np.isfinite(cv.log_abs))


def test_gamma_ratios_within_R(test_model):
    R = check_hypotheses(test_model).R
    g = gamma_ratios(test_model, _window(test_model, 300), n_max=300)
    assert np.all(g >= 1 / R - 1e-12) and np.all(g <= R + 1e-12)


def test_window_requirements(test_model):
    w = _window(test_model, 10)
    with pytest.raises(WindowTooShort):
        delta_curve(test_model, w, n_max=12)
    with pytest.raises(ValueError):
        delta_curve(test_model, w.shifted(1), n_max=5)
    with pytest.raises(TooLarge):
        delta_bruteforce(test_model, _window(test_model, 20), 1, 1, 2, 15)


def _synthetic(slope, n_max=100, floor=1e-290):
    n = np.arange(1, n_max + 1)
    la = 0.3 + slope * n
    return DecayCurve((1, 1, 2), "delta", n, np.exp(la), la, la < np.log(floor), floor)


def test_regression_recovers_slope():
    r = estimate_rate(_synthetic(-1.25))
    assert r.tau_hat == pytest.approx(-1.25, abs=1e-12)
    assert r.window == (50, 100) and r.r_squared == pytest.approx(1)


def test_tail_max_recovers_slope():
    assert estimate_rate(_synthetic(-0.5), method="tail-max").tau_hat == pytest.approx(-0.5)


def test_default_window_follows_censoring():
    r = estimate_rate(_synthetic(-10.0))  # passes the floor near n = 67
    assert r.window[1] < 70 and r.tau_hat == pytest.approx(-10.0)


def test_rate_errors():
    with pytest.raises(InsufficientData):
        estimate_rate(_synthetic(-1.0), n_min=98)
    with pytest.raises(ValueError):
        estimate_rate(_synthetic(-1.0), method="median")


def test_best_rate_tie_breaks_lexicographically():
    rs = [RateEstimate((2, 1, 2), -1.0, (1, 2), 1.0, "regression", 5),
          RateEstimate((1, 2, 1), -1.0, (1, 2), 1.0, "regression", 5),
          RateEstimate((1, 1, 2), -2.0, (1, 2), 1.0, "regression", 5)]
    assert best_rate(rs).triple == (1, 2, 1)


def test_matched_gap_tracks_rate(test_model):
    w = _window(test_model, 399, seed=7)
    rates = [estimate_rate(c) for c in delta_curve(test_model, w, n_max=400)]
    best = best_rate(rates)
    assert abs(best.tau_hat - matched_gap(test_model, w, best)) < 0.05


def test_decompose_psi_orthogonal(binary_model):
    f = estimate_codim1_direction(binary_model, _window(binary_model, 100))
    for a in (1, 2):
        u, xi = decompose_psi(binary_model, a, f)
        assert abs(f @ xi) < 1e-12
        np.testing.assert_allclose(u + xi, filter_vectors(binary_model).psi[a - 1])
        assert xi.min() < 0 < xi.max()


def test_decompose_psi_constant(three_state_model):
    import dataclasses

    from hmmforget.model import build_model

    p = np.tile([0.2, 0.5, 0.3], (3, 1))  # rows identical: psi_a is a multiple of 1
    m = build_model(p, three_state_model.q)
    _, xi = decompose_psi(m, 2, np.array([0.6, 0.0, 0.8]))
    np.testing.assert_allclose(xi, 0, atol=1e-15)
    assert dataclasses.is_dataclass(filter_vectors(m))


def test_decompose_psi_degenerate(test_model):
    with pytest.raises(DegenerateDirection):
        decompose_psi(test_model, 1, np.array([1.0, -1.0]) / np.sqrt(2))


def test_curves_csv(test_model):
    buf = io.StringIO()
    write_curves_csv(delta_curve(test_model, _window(test_model, 5), triples=[(1, 1, 2)], n_max=3), buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "triple,n,delta,log_abs_delta,censored"
    assert lines[1].startswith("1-1-2,1,0.53588516746411")
