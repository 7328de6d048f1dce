import json

import numpy as np
import pytest

from fsanm.bands import BandSystem
from fsanm.model import DimsSpec, ObservationMask, SpectralModel, apply_mask, random_mask, synthesize
from fsanm.sdp import (
    SDPInstance,
    SDPSolution,
    SolverOptions,
    assemble,
    feasible_value_from_model,
    psd_projection,
    psd_projection_real,
    real_embedding,
    real_unembedding,
    solve,
)
from fsanm.vandermonde import verify_fs_certificate

BANDS = BandSystem.single((0.3, 0.4), (0.5, 0.6))


def _instance(dims, model, ns, seed, bands=BANDS):
    x = synthesize(model, dims)
    mask = random_mask(dims, ns, seed)
    return assemble(apply_mask(x, mask), mask, dims, bands), x


def _rand_herm(n, rng):
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return A + A.conj().T


def test_block_sizes(dims88):
    mask = random_mask(dims88, 12, 0)
    y = np.ones(12)
    assert assemble(y, mask, dims88, BANDS).block_sizes == [65, 49, 49]
    assert assemble(y, mask, dims88).block_sizes == [65]
    assert assemble(y, mask, dims88, BandSystem.single((0.3, 0.4), None)).block_sizes == [65, 49]


def test_assemble_validation(dims88):
    mask = random_mask(dims88, 12, 0)
    with pytest.raises(ValueError):
        assemble(np.ones(11), mask, dims88)
    with pytest.raises(ValueError):
        assemble(np.ones(12), mask, DimsSpec((4, 4)))
    with pytest.raises(ValueError):
        assemble(np.ones(12), mask, dims88, BandSystem.single((0.3, 0.4)))


def test_empty_mask_gives_zero():
    dims = DimsSpec((4, 3))
    sol = solve(assemble([], ObservationMask.from_indices(12, []), dims, BandSystem.single((0.3, 0.4), (0.5, 0.6))))
    assert abs(sol.objective) < 1e-7
    assert np.abs(sol.x_hat).max() < 1e-6


@pytest.mark.parametrize("bands", [BANDS, None], ids=["fs", "an"])
def test_single_atom_full_mask(bands):
    dims = DimsSpec((5, 4))
    model = SpectralModel.create([[0.35, 0.52]], [np.exp(0.7j)])
    inst, x = _instance(dims, model, dims.n_total, 0, bands)
    sol = solve(inst)
    assert sol.status in ("solved", "inaccurate")
    assert sol.objective == pytest.approx(1.0, abs=1e-6)
    np.testing.assert_array_equal(sol.x_hat, x)


def test_observed_entries_exact_and_feasible():
    dims = DimsSpec((5, 5))
    model = SpectralModel.create([[0.33, 0.55], [0.38, 0.52]], [1.0, 0.6j])
    inst, x = _instance(dims, model, 9, 4)
    sol = solve(inst)
    np.testing.assert_array_equal(sol.x_hat[inst.mask.indices], x[inst.mask.indices])
    assert min(sol.diagnostics.min_eigs) > -1e-8
    assert len(sol.diagnostics.min_eigs) == 3
    assert sol.B_hat.is_conjugate_symmetric()


def test_objective_sandwich():
    # AN optimum <= FS optimum <= value of the true atomic decomposition
    dims = DimsSpec((5, 5))
    model = SpectralModel.create([[0.33, 0.55], [0.38, 0.59]], [1.0, np.exp(2.0j)])
    inst, _ = _instance(dims, model, 8, 11)
    fs = solve(inst).objective
    an = solve(assemble(inst.y, inst.mask, dims, None)).objective
    upper = feasible_value_from_model(model, dims, BANDS).value
    assert an <= fs + 1e-7
    assert fs <= upper + 1e-7


def test_deterministic():
    dims = DimsSpec((4, 4))
    model = SpectralModel.create([[0.36, 0.57]], [1.0])
    inst, _ = _instance(dims, model, 6, 3)
    a, b = solve(inst), solve(inst)
    np.testing.assert_array_equal(a.x_hat, b.x_hat)
    assert a.objective == b.objective


@pytest.mark.parametrize("ns", [9, 6])
def test_admm_agrees_with_ipm(ns):
    dims = DimsSpec((3, 3))
    model = SpectralModel.create([[0.35, 0.55]], [1j])
    inst, _ = _instance(dims, model, ns, 2)
    ref = solve(inst)
    sol = solve(inst, SolverOptions(method="admm", eps_abs=1e-5, eps_rel=1e-5, max_iter=5000))
    assert sol.status == "solved"
    assert sol.objective == pytest.approx(ref.objective, abs=1e-5)
    assert np.abs(sol.x_hat - ref.x_hat).max() < 1e-5
    assert sol.diagnostics.method == "admm"


def test_solver_options_validation_and_json():
    with pytest.raises(ValueError):
        SolverOptions(method="simplex")
    with pytest.raises(ValueError):
        SolverOptions(eps_abs=-1.0)
    opts = SolverOptions(method="admm", rho=3.0)
    assert SolverOptions.from_json(json.loads(json.dumps(opts.to_json()))) == opts


def test_instance_and_solution_json():
    dims = DimsSpec((4, 3))
    model = SpectralModel.create([[0.35, 0.55]], [1.0])
    inst, _ = _instance(dims, model, 5, 1)
    back = SDPInstance.from_json(json.loads(json.dumps(inst.to_json())))
    np.testing.assert_array_equal(back.y, inst.y)
    assert back.block_sizes == inst.block_sizes
    sol = solve(inst)
    sol2 = SDPSolution.from_json(json.loads(json.dumps(sol.to_json())))
    np.testing.assert_array_equal(sol2.x_hat, sol.x_hat)
    np.testing.assert_array_equal(sol2.toeplitz(), sol.toeplitz())
    assert sol2.status == sol.status


@pytest.mark.parametrize("r", [1, 3])
def test_feasible_point(r, dims88):
    F = np.array([[0.35, 0.51], [0.31, 0.59], [0.37, 0.57]])[:r]
    model = SpectralModel.create(F, np.exp(1j * np.arange(r)))
    pt = feasible_value_from_model(model, dims88, BANDS)
    assert pt.value == pytest.approx(r)
    assert verify_fs_certificate(pt.B, BANDS).passed
    for blk in pt.blocks(BANDS):
        w = np.linalg.eigvalsh(blk)
        assert w[0] >= -1e-10 * w[-1]
    np.testing.assert_allclose(pt.x, synthesize(model, dims88), atol=1e-13)
    with pytest.raises(ValueError):
        feasible_value_from_model(SpectralModel.create([[0.45, 0.55]], [1]), dims88, BANDS)


def test_real_embedding_examples(rng):
    np.testing.assert_array_equal(real_embedding([[1]]), np.eye(2))
    w = np.linalg.eigvalsh(real_embedding(np.array([[0, 1j], [-1j, 0]])))
    np.testing.assert_allclose(w, [-1, -1, 1, 1], atol=1e-15)
    with pytest.raises(ValueError):
        real_embedding([[0, 1], [2, 0]])
    H = _rand_herm(6, rng)
    np.testing.assert_allclose(real_unembedding(real_embedding(H)), H)
    np.testing.assert_allclose(psd_projection_real(H), psd_projection(H), atol=1e-12 * np.abs(H).max())


def test_psd_projection_properties(rng):
    H = _rand_herm(7, rng)
    P = psd_projection(H)
    assert np.linalg.eigvalsh(P)[0] > -1e-12
    np.testing.assert_allclose(psd_projection(P), P, atol=1e-12)
    # residual is negative semidefinite and orthogonal to P
    assert np.linalg.eigvalsh(H - P)[-1] < 1e-12
    assert abs(np.vdot(P, H - P)) < 1e-10


@pytest.mark.parametrize("sizes, bands", [((3, 4), BANDS), ((5,), BandSystem.single((0.9, 0.2))), ((2, 3, 2), None)])
def test_structure_map_adjoint_and_schur(sizes, bands, rng):
    dims = DimsSpec(sizes)
    mask = random_mask(dims, dims.n_total // 2, 5)
    inst = assemble(rng.normal(size=mask.n_observed), mask, dims, bands)
    smap = inst.structure()
    v = rng.normal(size=smap.n_params)
    Z = [_rand_herm(n, rng) for n in smap.block_sizes]
    lhs = sum(np.vdot(z, f).real for z, f in zip(Z, smap.forward(v)))
    assert lhs == pytest.approx(v @ smap.adjoint(Z), rel=1e-12)

    Rs = [rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)) for n in smap.block_sizes]
    Ws = [R @ R.conj().T for R in Rs]
    basis = np.eye(smap.n_params)
    brute = np.array([smap.adjoint([W @ F @ W for W, F in zip(Ws, smap.forward(e))]) for e in basis]).T
    scale = np.abs(brute).max()
    assert np.abs(smap.schur(Ws) - brute).max() <= 1e-12 * scale
    assert np.abs(smap.schur_factored(Rs) - brute).max() <= 1e-12 * scale


def test_one_dimensional_recovery():
    dims = DimsSpec((12,))
    bands = BandSystem.single((0.2, 0.4))
    inst, x = _instance(dims, SpectralModel.create([[0.25], [0.33]], [1.0, 1j]), 7, 3, bands)
    sol = solve(inst)
    assert np.linalg.norm(sol.x_hat - x) / np.linalg.norm(x) < 1e-5


def test_qr_schur_solver_agrees():
    from fsanm.sdp.ipm import solve_ipm

    dims = DimsSpec((4, 4))
    model = SpectralModel.create([[0.33, 0.55], [0.38, 0.52]], [1.0, 0.6j])
    inst, _ = _instance(dims, model, 9, 4)
    smap = inst.structure()
    a = solve_ipm(smap, eps=1e-9)
    b = solve_ipm(smap, eps=1e-9, schur="qr")
    assert b.status in ("solved", "inaccurate")
    assert smap.objective @ a.v == pytest.approx(smap.objective @ b.v, abs=1e-7)
