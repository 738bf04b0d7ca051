"""Jost solutions and transformation kernel against closed forms.

The flat-well oracle used throughout: inside a well of depth V0 and
width a, with q = sqrt(k^2 + V0),

    f(k, x) = e^{ika} [cos(q(x-a)) + (ik/q) sin(q(x-a))],   0 <= x <= a,

obtained by matching the plane wave e^{ikx} and its derivative at x = a.
It holds for complex k (q taken as the principal square root; the
combination is even in q, so the branch does not matter).
"""

from __future__ import annotations

import numpy as np
import pytest

from halfline import DomainError, preset, square_well
from halfline.jost import (
    default_x_grid,
    jost_from_kernel,
    kernel_bound_check,
    load_kernel_field,
    solve_jost_batch,
    solve_jost_ode,
    solve_marchenko_kernel,
)
from halfline.potential import moment_profile


def _flat_well_f(V0: float, a: float, k: complex, x):
    x = np.asarray(x, dtype=float)
    q = np.sqrt(complex(k * k + V0))
    inside = x <= a
    out = np.exp(1j * k * x).astype(complex)
    xi = x[inside]
    out[inside] = np.exp(1j * k * a) * (
        np.cos(q * (xi - a)) + (1j * k / q) * np.sin(q * (xi - a)))
    return out


@pytest.fixture(scope="module")
def kernels():
    names = ("shallow-well", "deep-well", "exp-decay", "gauss-bump")
    return {name: solve_marchenko_kernel(preset(name)) for name in names}


# -- ODE route ----------------------------------------------------------------


def test_free_jost_is_plane_wave():
    free = preset("free")
    x = default_x_grid(free)
    sol = solve_jost_ode(free, 1.0, x)
    assert np.max(np.abs(sol.f_values - np.exp(1j * x))) < 1e-10
    sol_i = solve_jost_ode(free, 1j, x)
    assert np.max(np.abs(sol_i.f_values - np.exp(-x))) < 1e-10
    assert np.max(np.abs(sol_i.f_values.imag)) == 0.0


@pytest.mark.parametrize("V0,a", [(1.0, 1.0), (20.0, 1.0)])
@pytest.mark.parametrize("k", [0.5, 1.0, 2.0, 7.0, 0.8j, 1.0 + 0.0j])
def test_flat_well_matches_transfer_matrix(V0, a, k):
    v = square_well(V0, a)
    x = np.linspace(0.0, 1.5 * a, 31)
    sol = solve_jost_ode(v, k, x)
    want = _flat_well_f(V0, a, k, x)
    assert np.max(np.abs(sol.f_values - want)) < 1e-8


def test_conjugation_symmetry():
    v = preset("gauss-bump")
    x = default_x_grid(v)
    ks = [0.3, 1.0, 2.7, 9.0]
    f_pos, _ = solve_jost_batch(v, ks, x)
    f_neg, _ = solve_jost_batch(v, [-k for k in ks], x)
    assert np.max(np.abs(f_neg - np.conj(f_pos))) < 1e-10


def test_wronskian_constant_in_x():
    v = preset("exp-decay")
    x = default_x_grid(v)
    for k in (0.5, 2.0):
        fp_, dp_ = solve_jost_batch(v, [k], x)
        fm_, dm_ = solve_jost_batch(v, [-k], x)
        w = fp_[0] * dm_[0] - dp_[0] * fm_[0]
        assert np.max(np.abs(w - (-2j * k))) < 1e-9 * max(1.0, abs(k))


def test_plane_wave_beyond_support_is_exact():
    v = preset("deep-well")
    x = np.array([1.0, 2.0, 5.0, 11.0])
    sol = solve_jost_ode(v, 1.7, x)
    assert np.array_equal(sol.f_values, np.exp(1.7j * x))


def test_lower_half_plane_rejected():
    with pytest.raises(DomainError):
        solve_jost_ode(preset("shallow-well"), 1.0 - 0.1j)


# -- kernel route -------------------------------------------------------------


def test_trivial_potential_gives_zero_kernel():
    field = solve_marchenko_kernel(preset("free"))
    assert np.all(field.h_values == 0.0)
    assert np.all(field.K_values == 0.0)
    assert jost_from_kernel(field, 0.7, 0.5) == pytest.approx(
        np.exp(0.7j * 0.5), abs=1e-14)


def test_h_at_zero_width_is_half_tail_integral(kernels):
    # h(u, 0) = (1/2) int_u^inf V exactly; exp tail integrates by hand
    field = kernels["exp-decay"]
    u = 1.0
    iu = int(round(u / field.delta))
    want = -(2.5 / 6.0) * (np.exp(-3.0) - np.exp(-3.0 * 6.5))
    assert field.h_values[iu, 0] == pytest.approx(want, rel=1e-9)
    # flat well: h(u,0) = -V0(a-u)/2 on the lattice
    fw = kernels["shallow-well"]
    iu = int(round(0.25 / fw.delta))
    assert fw.h_values[iu, 0] == pytest.approx(-0.375, abs=1e-12)


def test_kernel_is_real_and_triangular(kernels):
    for field in kernels.values():
        h = field.h_values
        assert h.dtype == np.float64
        n = field.n
        upper = np.triu_indices(n + 1, k=1)
        assert np.all(h[upper[1], upper[0]] == h[upper[1], upper[0]])
        assert np.all(h[np.triu_indices(n + 1, k=1)] == 0.0)


def test_picard_contraction_recorded(kernels):
    for field in kernels.values():
        assert field.converged
        d = field.update_sizes
        assert d.size >= 2
        # geometric decay defeats the tolerance well before max_iter
        ratios = field.contraction_ratios
        assert np.nanmax(ratios[-3:]) < 1.0


@pytest.mark.parametrize("name", ["shallow-well", "deep-well",
                                  "exp-decay", "gauss-bump"])
def test_representation_consistency(kernels, name):
    # |f_kernel - f_ode| < 1e-6 on >= 20 real and 5 imaginary k
    v = preset(name)
    field = kernels[name]
    k_real = np.linspace(0.25, 24.0, 20)
    k_imag = 1j * np.array([0.3, 0.9, 1.7, 2.6, 3.4])
    ks = np.concatenate([k_real, k_imag])
    step = field.delta_K * max(1, int(round(0.25 / field.delta_K)))
    x_nodes = np.arange(0.0, v.L_V + step / 2, step)
    f_ode, _ = solve_jost_batch(v, ks, x_nodes)
    worst = 0.0
    for i, k in enumerate(ks):
        for j, x in enumerate(x_nodes):
            fk = jost_from_kernel(field, k, x)
            worst = max(worst, abs(fk - f_ode[i, j]))
    assert worst < 1e-6


def test_kernel_route_on_bound_state_ray(kernels):
    # k = i: value must be real and agree with the ODE oracle
    field = kernels["shallow-well"]
    val = jost_from_kernel(field, 1j, 0.0)
    assert abs(val.imag) < 1e-10
    sol = solve_jost_ode(preset("shallow-well"), 1j, np.array([0.0]))
    assert abs(val - sol.f_values[0]) < 1e-6


def test_jost_from_kernel_rejects_off_lattice(kernels):
    field = kernels["shallow-well"]
    with pytest.raises(DomainError):
        jost_from_kernel(field, 1.0, 0.1234567)
    with pytest.raises(DomainError):
        jost_from_kernel(field, 1.0, field.x_max + 1.0)


def test_x_max_must_cover_support():
    with pytest.raises(DomainError):
        solve_marchenko_kernel(preset("exp-decay"), X_max=2.0)


# -- pointwise bounds ---------------------------------------------------------


@pytest.mark.parametrize("name", ["shallow-well", "exp-decay"])
def test_kernel_bounds_hold_on_lattice(kernels, name):
    field = kernels[name]
    prof = moment_profile(preset(name), delta=field.delta)
    report = kernel_bound_check(field, prof)
    assert report.h_violations == 0
    assert report.K_violations == 0
    assert report.h_margin_min > -1e-6
    assert report.K_margin_min > -1e-6
    # derivative estimates stay within bounds plus the reported slack
    assert report.du_violations == 0
    assert report.dv_violations == 0


def test_bound_check_requires_matching_lattice(kernels):
    from halfline import GridMismatchError

    field = kernels["shallow-well"]
    prof = moment_profile(preset("shallow-well"), delta=field.delta / 2)
    with pytest.raises(GridMismatchError):
        kernel_bound_check(field, prof)


# -- serialization ------------------------------------------------------------


def test_kernel_round_trip(tmp_path, kernels):
    field = kernels["shallow-well"]
    path = tmp_path / "kernel.npz"
    field.save(path)
    back = load_kernel_field(path)
    assert np.array_equal(back.h_values, field.h_values)
    assert back.delta == field.delta
    assert back.x_max == field.x_max
    assert back.potential.name == "shallow-well"


def test_kernel_csv_dump(tmp_path, kernels):
    field = kernels["shallow-well"]
    path = tmp_path / "kernel.csv"
    field.save_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# X_max=")
    assert lines[1].startswith("# dx=")
    assert lines[2] == "x,y,K"
    first = lines[3].split(",")
    assert float(first[0]) == 0.0
    assert float(first[2]) == pytest.approx(field.h_values[0, 0])
