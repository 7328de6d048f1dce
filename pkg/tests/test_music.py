import warnings

import numpy as np
import pytest

from fsanm.bands import BandSystem
from fsanm.model import (
    DimsSpec,
    SpectralModel,
    apply_mask,
    match_frequencies,
    random_mask,
    steering_vector,
    synthesize,
)
from fsanm.music import (
    IllConditionedWarning,
    MusicError,
    MusicOptions,
    estimate_gains,
    model_order,
    music_frequencies,
    noise_residual,
    noise_residual_grid,
    noise_subspace,
    pseudospectrum,
    retrieve,
)
from fsanm.sdp import SolverOptions, assemble, solve
from fsanm.toeplitz import build_level_toeplitz, model_tensor


def _T(model, dims):
    return build_level_toeplitz(model_tensor(model, dims, use_magnitudes=True))


def test_model_order_examples(dims88, fig1_model):
    assert model_order([4, 3, 1e-12, 0], 1e-6) == 2
    assert model_order(np.zeros(5)) == 0
    w = np.linalg.eigvalsh(_T(fig1_model, dims88))[::-1]
    assert model_order(w) == 3


def test_noise_residual_grid_matches_pointwise(rng):
    dims = DimsSpec((4, 3))
    A = rng.normal(size=(12, 12)) + 1j * rng.normal(size=(12, 12))
    En = noise_subspace(A @ A.conj().T, 4)
    g0, g1 = np.array([0.1, 0.5]), np.array([0.2, 0.33, 0.9])
    grid = noise_residual_grid(En, [g0, g1], dims)
    for i, a in enumerate(g0):
        for j, b in enumerate(g1):
            assert grid[i, j] == pytest.approx(noise_residual(En, (a, b), dims), rel=1e-12)


def test_rank1_recovery(dims88, fig1_bands):
    a = steering_vector((0.35, 0.51), dims88)
    est = music_frequencies(np.outer(a, a.conj()), dims88, fig1_bands)
    assert est.r_hat == 1 and not est.degraded
    np.testing.assert_allclose(est.frequencies[0], [0.35, 0.51], atol=1e-6)


@pytest.mark.parametrize("use_bands", [True, False])
def test_three_atom_recovery(dims88, fig1_bands, fig1_model, use_bands):
    est = music_frequencies(_T(fig1_model, dims88), dims88, fig1_bands if use_bands else None)
    assert est.r_hat == 3
    _, err = match_frequencies(est.frequencies, fig1_model.frequencies)
    assert err.max() <= 1e-6


def test_wrap_band_recovery():
    dims = DimsSpec((6, 5))
    model = SpectralModel.create([[0.97, 0.4], [0.05, 0.45]], [1.0, 2.0])
    bands = BandSystem.single((0.9, 0.1), (0.3, 0.5))
    est = music_frequencies(_T(model, dims), dims, bands)
    _, err = match_frequencies(est.frequencies, model.frequencies)
    assert err.max() <= 1e-6


def test_zero_T_gives_nothing(dims88):
    est = music_frequencies(np.zeros((64, 64)), dims88)
    assert est.r_hat == 0 and est.frequencies.shape == (0, 2)


def test_full_rank_raises():
    with pytest.raises(MusicError):
        music_frequencies(np.eye(4), DimsSpec((2, 2)))


def test_pseudospectrum_peaks_and_csv(dims88, fig1_bands, fig1_model, tmp_path):
    ps = pseudospectrum(_T(fig1_model, dims88), dims88, fig1_bands)
    assert ps.r_hat == 3
    assert ps.values.shape == tuple(len(g) for g in ps.grids)
    peaks = ps.local_maxima()
    assert len(peaks) >= 3
    top = np.array([f for _, f in peaks[:3]])
    _, err = match_frequencies(top, fig1_model.frequencies)
    assert err.max() <= max(ps.steps)
    path = tmp_path / "ps.csv"
    ps.to_csv(path)
    rows = path.read_text().strip().splitlines()
    assert len(rows) == 1 + ps.values.size


def test_estimate_gains_examples(dims88, fig1_model):
    f = (0.2, 0.7)
    g, cond = estimate_gains(2j * steering_vector(f, dims88), [f], dims88)
    assert g[0] == pytest.approx(2j, abs=1e-12)
    assert cond == pytest.approx(1.0)
    g, _ = estimate_gains(synthesize(fig1_model, dims88), fig1_model.frequencies, dims88)
    np.testing.assert_allclose(g, fig1_model.gains, atol=1e-8)
    g, _ = estimate_gains(np.ones(64), np.zeros((0, 2)), dims88)
    assert g.size == 0


def test_estimate_gains_warns_when_ill_conditioned():
    dims = DimsSpec((4,))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        estimate_gains(np.ones(4), [[0.1], [0.1 + 1e-4]], dims, cond_limit=1e3)
    assert any(issubclass(w.category, IllConditionedWarning) for w in caught)


def test_retrieve_from_solution():
    dims = DimsSpec((6, 6))
    model = SpectralModel.create([[0.36, 0.56]], [np.exp(0.3j)])
    x = synthesize(model, dims)
    bands = BandSystem.single((0.3, 0.4), (0.5, 0.6))
    mask = random_mask(dims, dims.n_total, 0)
    sol = solve(assemble(apply_mask(x, mask), mask, dims, bands), SolverOptions())
    res = retrieve(sol, dims, bands, MusicOptions(r=1))
    np.testing.assert_allclose(res.model.frequencies[0], [0.36, 0.56], atol=1e-6)
    assert res.model.gains[0] == pytest.approx(np.exp(0.3j), abs=1e-6)
    assert res.fit_residual < 1e-6 and not res.ill_conditioned
    assert '"source": "from-T"' in res.dumps()


# Two atoms 0.004 apart on axis 1 merge into a single coarse peak at the
# default grid; the finer retry separates them.
def test_close_pair_on_full_torus(dims88):
    # two tuples 0.004 / 0.03 apart: a spurious broad peak outranks one true
    # peak on the coarse grid, refinement by residual recovers the truth
    F = np.array([[0.39119778, 0.53998451], [0.38731101, 0.50831411], [0.31792761, 0.58744597]])
    model = SpectralModel.create(F, [0.93214384, 0.7226467, 0.84805788])
    est = music_frequencies(_T(model, dims88), dims88, None, r=3)
    _, err = match_frequencies(est.frequencies, F)
    assert err.max() <= 1e-6
    assert est.residuals.max() < 1e-8
