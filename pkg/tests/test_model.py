import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fsanm.model import (
    DimsSpec,
    ObservationMask,
    SpectralModel,
    apply_mask,
    match_frequencies,
    nmse,
    random_mask,
    steering_matrix,
    steering_vector,
    synthesize,
    torus_distance,
)


@pytest.mark.parametrize(
    "sizes, f, expected",
    [
        ((2,), [0.0], [1, 1]),
        ((2,), [0.5], [1, -1]),
        ((2, 2), [0.25, 0.0], [1, 1, 1j, 1j]),
    ],
)
def test_steering_vector_examples(sizes, f, expected):
    np.testing.assert_allclose(steering_vector(f, DimsSpec(sizes)), expected, atol=1e-15)


def test_steering_vector_dimension_one_is_outermost():
    dims = DimsSpec((3, 4))
    f = (0.13, 0.71)
    a = steering_vector(f, dims).reshape(3, 4)
    m, n = np.meshgrid(np.arange(3), np.arange(4), indexing="ij")
    np.testing.assert_allclose(a, np.exp(2j * np.pi * (m * f[0] + n * f[1])), atol=1e-14)


def test_steering_matrix_columns():
    dims = DimsSpec((3, 2))
    F = np.array([[0.1, 0.2], [0.7, 0.9]])
    A = steering_matrix(F, dims)
    for l in range(2):
        np.testing.assert_allclose(A[:, l], steering_vector(F[l], dims))
    Ar = steering_matrix(F, dims, reduced=True)
    assert Ar.shape == (2, 2)
    # reduced grid is 2 x 1: only the first-axis phase varies
    np.testing.assert_allclose(Ar[:, 1], [1, np.exp(2j * np.pi * 0.7)], atol=1e-15)


def test_synthesize_trivial_cases():
    dims = DimsSpec((3, 2))
    x = synthesize(SpectralModel.create([[0.0, 0.0]], [1.0]), dims)
    np.testing.assert_allclose(x, np.ones(6))
    cancel = SpectralModel.create([[0.2, 0.3], [0.2, 0.3]], [1.0, -1.0], validate=False)
    np.testing.assert_allclose(synthesize(cancel, dims), 0, atol=1e-15)


def test_synthesize_fig1_direct_sum(dims88, fig1_model):
    x = synthesize(fig1_model, dims88)
    assert x.shape == (64,)
    m1, m2 = np.meshgrid(np.arange(8), np.arange(8), indexing="ij")
    direct = np.zeros((8, 8), complex)
    for f, s in zip(fig1_model.frequencies, fig1_model.gains):
        direct += s * np.exp(2j * np.pi * (m1 * f[0] + m2 * f[1]))
    np.testing.assert_allclose(x, direct.ravel(), atol=1e-13)
    assert abs(np.vdot(x, x).real - np.sum(np.abs(direct) ** 2)) < 1e-10


def test_model_validation():
    with pytest.raises(ValueError):
        SpectralModel.create([[0.25, 0.2], [1.25, 0.2]], [1, 1])
    with pytest.raises(ValueError):
        SpectralModel.create([[0.1, 0.2]], [0])
    with pytest.raises(ValueError):
        DimsSpec((1, 4))


def test_model_json_round_trip(fig1_model):
    back = SpectralModel.from_json(json.loads(json.dumps(fig1_model.to_json())))
    np.testing.assert_array_equal(back.frequencies, fig1_model.frequencies)
    np.testing.assert_array_equal(back.gains, fig1_model.gains)


def test_apply_mask_examples():
    x = np.arange(6) + 1j
    np.testing.assert_array_equal(apply_mask(x, ObservationMask.full(6)), x)
    assert apply_mask(x, ObservationMask.from_indices(6, [])).size == 0
    y = apply_mask(np.ones(4), ObservationMask.from_indices(4, [0], [2.0]))
    np.testing.assert_array_equal(y, [2.0])
    with pytest.raises(IndexError):
        apply_mask(np.ones(5), ObservationMask.full(4))


def test_mask_rejects_bad_input():
    with pytest.raises(ValueError):
        ObservationMask.from_indices(4, [1, 1])
    with pytest.raises(IndexError):
        ObservationMask.from_indices(4, [4])
    with pytest.raises(ValueError):
        ObservationMask.from_indices(4, [0], [0.0])


def test_mask_json_round_trip():
    m = ObservationMask.from_indices(10, [7, 2, 5], [1, 2j, 3])
    back = ObservationMask.from_json(json.loads(json.dumps(m.to_json())))
    np.testing.assert_array_equal(back.indices, [2, 5, 7])
    np.testing.assert_array_equal(back.weights, m.weights)


def test_random_mask_examples(dims88):
    assert random_mask(dims88, 64, 3).n_observed == 64
    np.testing.assert_array_equal(random_mask(dims88, 64, 3).indices, np.arange(64))
    assert random_mask(dims88, 0, 3).n_observed == 0
    a, b = random_mask(dims88, 12, 99), random_mask(dims88, 12, 99)
    np.testing.assert_array_equal(a.indices, b.indices)
    assert not np.array_equal(a.indices, random_mask(dims88, 12, 100).indices)
    with pytest.raises(ValueError):
        random_mask(dims88, 65, 0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 24), st.integers(0, 2**31))
def test_random_mask_is_a_subset(ns, seed):
    m = random_mask(DimsSpec((4, 6)), ns, seed)
    assert m.n_observed == ns
    assert np.all(np.diff(m.indices) > 0)
    assert m.indices.size == 0 or (m.indices[0] >= 0 and m.indices[-1] < 24)


def test_nmse_examples():
    x = np.array([1 + 1j, 2, -3j])
    assert nmse(x, x) == 0.0
    assert nmse(np.zeros(3), x) == pytest.approx(1.0)
    assert nmse(2 * x, x) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        nmse(x, np.zeros(3))


def test_torus_distance_wraps():
    np.testing.assert_allclose(torus_distance(0.95, 0.05), 0.1)
    np.testing.assert_allclose(torus_distance([0.2, 0.0], [0.7, 0.999]), [0.5, 0.001], atol=1e-15)


def test_match_frequencies_permutation():
    truth = np.array([[0.1, 0.2], [0.5, 0.5], [0.9, 0.05]])
    est = truth[[2, 0, 1]] + 1e-4
    perm, err = match_frequencies(est, truth)
    np.testing.assert_array_equal(perm, [1, 2, 0])
    assert err.max() < 2e-4
    perm, err = match_frequencies(est[:2], truth)
    assert (perm == -1).sum() == 1
    assert err.max() == 0.5
