"""Finite-difference reference: spectra, projectors, and time steppers."""

import numpy as np
import pytest

from halfline.exceptions import DomainError, GridMismatchError
from halfline.field import WaveField, gaussian_packet
from halfline.oracle import (build_hamiltonian, crank_nicolson, evolve_oracle,
                             negative_eigenvalue_count)
from halfline.potential import preset, square_well
from halfline.scattering import eigenfunctions_on, find_bound_states

FREE = square_well(0.0, 1.0)

# independently bracketed root of q cos(q a) + kappa sin(q a) = 0 for the
# depth-20 unit well (same frozen value the scattering tests check against)
DEEP_KAPPA = 3.6821352559


@pytest.fixture(scope="module")
def small_free():
    return build_hamiltonian(FREE, L_box=20.0, h=20.0 / 1024, cache=False)


@pytest.fixture(scope="module")
def free_40():
    return build_hamiltonian(FREE, L_box=40.0, h=40.0 / 2048, cache=False)


@pytest.fixture(scope="module")
def small_deep():
    return build_hamiltonian(preset("deep-well"), L_box=20.0, h=20.0 / 2048,
                             cache=False)


@pytest.fixture(scope="module")
def deep_default():
    return build_hamiltonian(preset("deep-well"))


def test_free_spectrum_matches_box_closed_form(small_free):
    h, L = small_free.h, small_free.L_box
    n = np.arange(1, 11)
    # the 3-point scheme diagonalizes exactly in the free box
    lam_scheme = 2.0 / h**2 * (1.0 - np.cos(n * np.pi * h / L))
    assert np.max(np.abs(small_free.eigenvalues[:10] - lam_scheme)) < 1e-9
    lam_box = (n * np.pi / L) ** 2
    rel = np.abs(small_free.eigenvalues[:10] / lam_box - 1.0)
    assert np.max(rel) < 1e-3


def test_free_has_no_negative_eigenvalues(small_free):
    assert small_free.negative_count == 0
    assert negative_eigenvalue_count(FREE, L_box=20.0, h=20.0 / 1024) == 0


def test_eigenvectors_orthonormal(small_free):
    v = small_free.eigenvectors
    gram = v.T @ v
    assert np.max(np.abs(gram - np.eye(v.shape[1]))) < 1e-10


def test_zero_time_is_identity(small_free):
    phi = gaussian_packet(small_free.wave_grid, width=1.0, momentum=3.0)
    out = evolve_oracle(small_free, phi, 0.0)
    assert out.time == 0.0
    assert np.max(np.abs(out.values - phi.values)) < 1e-12


def test_spectral_evolution_conserves_l2(small_free):
    phi = gaussian_packet(small_free.wave_grid, width=1.0, momentum=3.0)
    ref = np.linalg.norm(phi.values)
    for t in (0.5, 8.0):
        out = evolve_oracle(small_free, phi, t)
        assert abs(np.linalg.norm(out.values) / ref - 1.0) < 1e-12


def test_subspaces_split_the_identity(small_deep):
    phi = gaussian_packet(small_deep.wave_grid, width=1.0, momentum=2.0)
    full = evolve_oracle(small_deep, phi, 1.0)
    pp = evolve_oracle(small_deep, phi, 1.0, subspace="pp")
    ct = evolve_oracle(small_deep, phi, 1.0, subspace="continuous")
    assert np.max(np.abs(pp.values + ct.values - full.values)) < 1e-13


def test_pp_subspace_empty_for_free(small_free):
    phi = gaussian_packet(small_free.wave_grid, width=1.0, momentum=3.0)
    pp = evolve_oracle(small_free, phi, 1.0, subspace="pp")
    assert np.max(np.abs(pp.values)) == 0.0


def test_spectral_projector_idempotent(small_deep):
    phi = gaussian_packet(small_deep.wave_grid, width=1.0, momentum=1.0)
    once = evolve_oracle(small_deep, phi, 0.0, subspace="pp")
    twice = evolve_oracle(small_deep, once, 0.0, subspace="pp")
    assert np.max(np.abs(twice.values - once.values)) < 1e-12


def test_cayley_conserves_l2_per_step(small_free):
    phi = gaussian_packet(small_free.wave_grid, width=1.0, momentum=3.0)
    ref = np.linalg.norm(phi.values)
    out = crank_nicolson(small_free, phi, 0.7, 7)
    assert abs(np.linalg.norm(out.values) / ref - 1.0) < 1e-12


def test_cayley_matches_spectral_on_gaussian(free_40):
    # zero-momentum packet: odd about the wall, so its sine spectrum decays
    # fast and the stated tolerance is meaningful (a moving packet keeps
    # k^-3 wall tails whose high modes saturate the Cayley phase error)
    phi = gaussian_packet(free_40.wave_grid, width=2.0, momentum=0.0)
    ref = evolve_oracle(free_40, phi, 1.0)
    cn = crank_nicolson(free_40, phi, 1.0, 4096)
    rel = np.linalg.norm(cn.values - ref.values) / np.linalg.norm(phi.values)
    assert rel < 1e-6


def test_cayley_is_second_order(free_40):
    phi = gaussian_packet(free_40.wave_grid, width=2.0, momentum=0.0)
    ref = evolve_oracle(free_40, phi, 1.0)
    errs = []
    for steps in (1024, 2048):
        cn = crank_nicolson(free_40, phi, 1.0, steps)
        errs.append(np.linalg.norm(cn.values - ref.values))
    assert 3.7 < errs[0] / errs[1] < 4.3


def test_cayley_second_order_with_potential(small_deep):
    # bandlimited start, so every mode sits in the quadratic error regime
    rng = np.random.default_rng(11)
    c = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    vals = np.concatenate([[0.0], small_deep.eigenvectors[:, :4] @ c])
    phi = WaveField(small_deep.wave_grid, vals, 0.0)
    ref = evolve_oracle(small_deep, phi, 1.0)
    e1 = np.linalg.norm(crank_nicolson(small_deep, phi, 1.0, 128).values
                        - ref.values)
    e2 = np.linalg.norm(crank_nicolson(small_deep, phi, 1.0, 256).values
                        - ref.values)
    assert 3.7 < e1 / e2 < 4.3


@pytest.mark.parametrize("name,count", [
    ("shallow-well", 0), ("deep-well", 1), ("two-state-well", 2)])
def test_negative_counts_match_bound_state_finder(name, count):
    pot = preset(name)
    assert find_bound_states(pot).count == count
    assert negative_eigenvalue_count(pot, L_box=40.0, h=40.0 / 4096) == count
    # grid-converged: refining the mesh does not change the count
    assert negative_eigenvalue_count(pot, L_box=40.0, h=40.0 / 8192) == count


def test_default_box_deep_well(deep_default):
    assert deep_default.n_points == 8191
    assert deep_default.negative_count == 1
    lam0 = deep_default.eigenvalues[0]
    assert abs(lam0 + DEEP_KAPPA**2) / DEEP_KAPPA**2 < 5e-4


def test_projector_consistency_deep_default(deep_default):
    bound = find_bound_states(preset("deep-well"))
    fhat = eigenfunctions_on(bound, deep_default.wave_grid)[0]
    phi = WaveField(deep_default.wave_grid, fhat.astype(complex), 0.0)
    proj = evolve_oracle(deep_default, phi, 0.0, subspace="pp")
    rel = np.linalg.norm(proj.values - phi.values) / np.linalg.norm(phi.values)
    assert rel < 1e-3


def test_projector_consistency_two_state():
    pot = preset("two-state-well")
    ham = build_hamiltonian(pot, L_box=40.0, h=40.0 / 4096, cache=False)
    bound = find_bound_states(pot)
    funcs = eigenfunctions_on(bound, ham.wave_grid)
    for j in range(2):
        phi = WaveField(ham.wave_grid, funcs[j].astype(complex), 0.0)
        proj = evolve_oracle(ham, phi, 0.0, subspace="pp")
        rel = (np.linalg.norm(proj.values - phi.values)
               / np.linalg.norm(phi.values))
        assert rel < 1e-3


def test_cell_averages_handle_jumps_exactly():
    # depth-20 well ends at a node; the straddling cell must get the
    # half-weight average, not a one-sided sample
    h = 1.0 / 16.0
    ham = build_hamiltonian(preset("deep-well"), L_box=4.0, h=h, cache=False)
    i = int(round(1.0 / h)) - 1
    assert abs((ham.diagonal[i] - 2.0 / h**2) - (-10.0)) < 1e-10
    assert abs((ham.diagonal[i - 1] - 2.0 / h**2) - (-20.0)) < 1e-10
    assert abs(ham.diagonal[i + 1] - 2.0 / h**2) < 1e-10


def test_argument_validation(small_free):
    phi = gaussian_packet(small_free.wave_grid + 0.5)
    with pytest.raises(GridMismatchError):
        evolve_oracle(small_free, phi, 1.0)
    good = gaussian_packet(small_free.wave_grid)
    with pytest.raises(DomainError):
        evolve_oracle(small_free, good, 1.0, subspace="bound")
    with pytest.raises(DomainError):
        crank_nicolson(small_free, good, 1.0, 0)
    with pytest.raises(DomainError):
        build_hamiltonian(preset("exp-decay"), L_box=7.0)
    with pytest.raises(DomainError):
        build_hamiltonian(FREE, L_box=20.0, h=-0.1)


def test_decomposition_cache_hits():
    a = build_hamiltonian(FREE, L_box=24.0, h=24.0 / 512)
    b = build_hamiltonian(FREE, L_box=24.0, h=24.0 / 512)
    assert a is b
