"""Scattering data against closed-form and transcendental oracles.

Flat-well boundary values give S in closed form. Bound states of the
flat well solve q cot(qa) = -kappa with q^2 + kappa^2 = V0, rewritten
as q cos(qa) + kappa sin(qa) = 0 for bracketing; the roots are found
here independently with Brent's method and compared against the
package's sign-scan-plus-bisection route.
"""

from __future__ import annotations

import numpy as np
import pytest
from scipy.optimize import brentq

from halfline import (
    DataError,
    DomainError,
    GridMismatchError,
    ResonanceError,
    preset,
)
from halfline.field import WaveField, gaussian_packet
from halfline.scattering import (
    apply_pp_projector,
    default_k_grid,
    find_bound_states,
    load_scattering,
    save_scattering,
    scattering_matrix,
    window_doubling_check,
)


def _flat_well_f0(V0: float, a: float, k: complex) -> complex:
    q = np.sqrt(complex(k * k + V0))
    return np.exp(1j * k * a) * (np.cos(q * a) - (1j * k / q) * np.sin(q * a))


def _flat_well_kappas(V0: float, a: float = 1.0) -> list:
    """Roots of q cos(qa) + kappa sin(qa) = 0, one per cot branch."""
    def g(q):
        return q * np.cos(q * a) + np.sqrt(V0 - q * q) * np.sin(q * a)

    roots = []
    m = 0
    while (m + 0.5) * np.pi / a < np.sqrt(V0):
        q_lo = (m + 0.5) * np.pi / a + 1e-9
        q_hi = min((m + 1.0) * np.pi / a, np.sqrt(V0)) - 1e-9
        if q_hi > q_lo and g(q_lo) * g(q_hi) < 0:
            q = brentq(g, q_lo, q_hi, xtol=1e-13)
            roots.append(float(np.sqrt(V0 - q * q)))
        m += 1
    return sorted(roots)


@pytest.fixture(scope="module")
def deep_bound():
    return find_bound_states(preset("deep-well"))


def test_free_scattering_is_trivial():
    sd = scattering_matrix(preset("free"))
    assert np.max(np.abs(sd.S_values - 1.0)) == 0.0
    assert np.max(np.abs(sd.T_values)) == 0.0
    assert np.max(np.abs(sd.t_hat)) == 0.0
    assert sd.t_hat_l1 == 0.0
    assert sd.bound_states.count == 0


def test_unimodularity_and_conjugation():
    for name in ("shallow-well", "gauss-bump"):
        sd = scattering_matrix(preset(name), with_bound_states=False)
        assert np.max(np.abs(np.abs(sd.S_values) - 1.0)) < 1e-8
        assert np.max(np.abs(sd.S_values - np.conj(sd.S_values[::-1]))) < 1e-10
        assert sd.t_hat.dtype == np.float64
        assert np.isfinite(sd.t_hat_l1)


def test_flat_well_S_matches_closed_form():
    grid = np.array([-2.0, -1.0, -0.5, 0.5, 1.0, 2.0])
    sd = scattering_matrix(preset("shallow-well"), k_grid=grid,
                           with_bound_states=False)
    for i, k in enumerate(grid):
        f_pos = _flat_well_f0(1.0, 1.0, abs(k))
        want = np.conj(f_pos) / f_pos
        if k < 0:
            want = np.conj(want)
        assert abs(sd.S_values[i] - want) < 1e-6


def test_edge_decay_recorded():
    sd = scattering_matrix(preset("shallow-well"), with_bound_states=False)
    mid = np.argmin(np.abs(sd.k_grid - 2.0))
    assert sd.edge_t_abs < abs(sd.T_values[mid])
    assert sd.edge_t_abs < 10.0 / np.max(sd.k_grid)


def test_k_grid_validation():
    v = preset("shallow-well")
    with pytest.raises(DomainError):
        scattering_matrix(v, k_grid=np.array([-1.0, 0.5, 1.0]))
    with pytest.raises(DomainError):
        scattering_matrix(v, k_grid=np.array([-1.0, -1e-9, 1e-9, 1.0]))


def test_resonant_potential_rejected():
    with pytest.raises(ResonanceError):
        scattering_matrix(preset("resonant-well"))


def test_no_bound_states_below_threshold():
    # V0 a^2 < pi^2/4 admits no Dirichlet bound state
    assert find_bound_states(preset("shallow-well")).count == 0
    assert find_bound_states(preset("resonant-well")).count == 0
    assert find_bound_states(preset("free")).count == 0
    assert _flat_well_kappas(1.0) == []


def test_deep_well_bound_state(deep_bound):
    oracle = _flat_well_kappas(20.0)
    assert len(oracle) == 1
    assert deep_bound.count == 1
    assert abs(deep_bound.kappas[0] - oracle[0]) < 1e-6
    assert deep_bound.energies[0] == pytest.approx(-oracle[0] ** 2, rel=1e-6)
    assert deep_bound.warnings == ()


def test_two_state_well_bound_states():
    bs = find_bound_states(preset("two-state-well"))
    oracle = _flat_well_kappas(60.0)
    assert bs.count == len(oracle) == 2
    assert np.max(np.abs(bs.kappas - oracle)) < 1e-6
    # distinct eigenvalues of a self-adjoint operator: orthogonal
    gram = np.trapezoid(bs.eigenfunctions[:, None, :]
                        * bs.eigenfunctions[None, :, :], bs.x_grid, axis=2)
    assert abs(gram[0, 1]) < 1e-6


def test_eigenfunctions_normalized_and_dirichlet(deep_bound):
    f = deep_bound.eigenfunctions
    norms = np.trapezoid(f**2, deep_bound.x_grid, axis=1)
    assert np.max(np.abs(norms - 1.0)) < 1e-8
    assert np.max(np.abs(f[:, 0])) < 1e-8
    # tail cut where e^{-kappa x} is negligible
    assert np.max(np.abs(f[:, -1])) < 1e-10


def test_projector_properties(deep_bound):
    rng = np.random.default_rng(7)
    x = deep_bound.x_grid
    phi = WaveField(x, rng.standard_normal(x.size)
                    + 1j * rng.standard_normal(x.size))
    p1 = apply_pp_projector(deep_bound, phi)
    p2 = apply_pp_projector(deep_bound, p1)
    assert np.max(np.abs(p2.values - p1.values)) < 1e-6 * phi.sup_norm()
    rest = phi.with_values(phi.values - p1.values)
    pyth = abs(p1.l2_norm() ** 2 + rest.l2_norm() ** 2 - phi.l2_norm() ** 2)
    assert pyth < 1e-6 * phi.l2_norm() ** 2
    # eigenvector fixed point
    e1 = WaveField(x, deep_bound.eigenfunctions[0])
    pe = apply_pp_projector(deep_bound, e1)
    assert np.max(np.abs(pe.values - e1.values)) < 1e-6


def test_projector_without_bound_states_is_zero():
    bs = find_bound_states(preset("shallow-well"))
    x = np.linspace(0.0, 10.0, 641)
    phi = gaussian_packet(x)
    out = apply_pp_projector(bs, phi)
    assert np.max(np.abs(out.values)) == 0.0


def test_projector_resamples_on_covering_grid(deep_bound):
    nat = deep_bound.x_grid
    coarse = np.arange(0.0, nat[-1] + 1.0, 1.0 / 32.0)
    p_nat = apply_pp_projector(deep_bound, gaussian_packet(nat, width=1.3))
    p_coarse = apply_pp_projector(deep_bound,
                                  gaussian_packet(coarse, width=1.3))
    assert abs(p_nat.l2_norm() - p_coarse.l2_norm()) < 1e-4
    with pytest.raises(GridMismatchError):
        apply_pp_projector(deep_bound,
                           gaussian_packet(np.linspace(0.0, 2.0, 129)))


def test_scattering_round_trip(tmp_path):
    sd = scattering_matrix(preset("deep-well"))
    path = tmp_path / "scatter.json"
    save_scattering(sd, path)
    back = load_scattering(path)
    assert np.max(np.abs(back.S_values - sd.S_values)) == 0.0
    assert np.max(np.abs(back.t_hat - sd.t_hat)) == 0.0
    assert back.potential.name == "deep-well"
    assert back.bound_states.count == sd.bound_states.count
    assert np.array_equal(back.bound_states.kappas, sd.bound_states.kappas)
    assert back.t_hat_l1 == sd.t_hat_l1


def test_load_rejects_malformed(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{\"schema_version\": 1}")
    with pytest.raises(DataError):
        load_scattering(path)


def test_window_effect_is_small():
    report = window_doubling_check(preset("shallow-well"))
    # the profile's z = 0 step makes its pointwise change O(1) by
    # nature; the integrable mass and the smoothed action must be stable
    assert report["max_abs_change"] < 1.0
    assert abs(report["t_hat_l1"] - report["t_hat_l1_wide"]) < 1e-2
    assert report["convolved_change"] < 1e-5


def test_default_grid_shape():
    k = default_k_grid()
    assert k.size == 8192
    assert np.min(np.abs(k)) == pytest.approx(1e-3)
    assert np.max(k) == pytest.approx(32.0)
    assert np.max(np.abs(k + k[::-1])) == 0.0
