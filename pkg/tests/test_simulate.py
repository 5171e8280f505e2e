import io

import numpy as np
import pytest

from hmmforget.errors import WindowTooLong
from hmmforget.model import build_model
from hmmforget.simulate import (
    ObservationWindow,
    derive_seed,
    future_window,
    past_window,
    sample_path,
    splitmix64,
    uniforms,
    write_path_csv,
)


def test_splitmix_reference_values():
    # reference outputs of the SplitMix64 generator seeded with 0 (state advanced by the golden gamma)
    g = 0x9E3779B97F4A7C15
    assert splitmix64(g) == 0xE220A8397B1DCDAF
    assert splitmix64(2 * g) == 0x6E789E6AA1B965F4


def test_derive_seed_distinct_and_stable():
    seeds = [derive_seed(7, i) for i in range(100)]
    assert len(set(seeds)) == 100
    assert derive_seed(7, 3) == derive_seed(7, 3)
    assert all(0 <= s < 2**64 for s in seeds)


def test_uniforms_match_raw_words():
    raw = np.random.PCG64(11).random_raw(5)
    expected = [(int(w) >> 11) / 2**53 for w in raw]
    np.testing.assert_array_equal(uniforms(11, 5), expected)


def test_same_seed_same_path(test_model):
    a = sample_path(test_model, 500, 42)
    b = sample_path(test_model, 500, 42)
    np.testing.assert_array_equal(a.x, b.x)
    np.testing.assert_array_equal(a.z, b.z)


def test_paths_coupled_across_emissions(test_model):
    other = build_model(test_model.p, [[0.6, 0.4], [0.3, 0.7]])
    a = sample_path(test_model, 300, 5)
    b = sample_path(other, 300, 5)
    np.testing.assert_array_equal(a.x, b.x)


def test_identity_emissions_reveal_states():
    m = build_model([[0.9, 0.1], [0.2, 0.8]], np.eye(2))
    path = sample_path(m, 1000, 1)
    np.testing.assert_array_equal(path.x, path.z)


def test_empirical_frequencies(test_model):
    path = sample_path(test_model, 200_000, 3)
    freq = np.bincount(path.x, minlength=3)[1:] / len(path)
    np.testing.assert_allclose(freq, test_model.pi, atol=0.01)
    x = path.x - 1
    trans = np.zeros((2, 2))
    np.add.at(trans, (x[:-1], x[1:]), 1)
    np.testing.assert_allclose(trans / trans.sum(axis=1, keepdims=True), test_model.p, atol=0.01)


def test_past_window_times(test_model):
    path = sample_path(test_model, 50, 2)
    w = past_window(path, 10)
    np.testing.assert_array_equal(w.times, np.arange(-10, 0))
    assert w.at(-1) == path.z[-1]
    np.testing.assert_array_equal(w.past_stream()[:3], path.z[::-1][:3])


def test_future_window_times(test_model):
    path = sample_path(test_model, 50, 2)
    w = future_window(path, 5)
    np.testing.assert_array_equal(w.times, [1, 2, 3, 4, 5])
    assert w.at(1) == path.z[0]


def test_window_bounds(test_model):
    path = sample_path(test_model, 10, 2)
    with pytest.raises(WindowTooLong):
        past_window(path, 11)
    with pytest.raises(WindowTooLong):
        past_window(path, 0)
    with pytest.raises(IndexError):
        ObservationWindow(np.array([1, 2]), 1).at(3)


def test_shifted_window():
    w = ObservationWindow(np.array([1, 2, 1]), -3).shifted(4)
    assert w.origin == 1 and w.at(2) == 2


def test_csv(test_model):
    buf = io.StringIO()
    write_path_csv(sample_path(test_model, 3, 9), buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "t,x,z" and len(lines) == 4
