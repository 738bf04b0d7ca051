"""Scattering matrix, bound states, and the pure-point projector.

For real k the boundary values of the Jost solution give the reflection
coefficient S(k) = f(-k,0)/f(k,0), computed here from one sweep over the
positive half-grid (the negative half follows from conjugation symmetry,
which the Jost module verifies independently). The reduced matrix
T = S - 1 is transformed to position space with a windowed discrete
Fourier integral; its profile is real and its measured L1 mass is
recorded on the result.

Bound states live at the zeros of the real-valued map kappa -> f(i kappa, 0).
They are bracketed by a sign scan and refined by bisection, and their
normalized eigenfunctions assemble the finite-rank pure-point projector.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import log

import numpy as np

from .exceptions import (
    AccuracyError,
    ConditioningError,
    DataError,
    DomainError,
    GridMismatchError,
    ResonanceError,
)
from .field import WaveField
from .jost import solve_jost_batch
from .potential import Potential, potential_document, potential_from_document

__all__ = [
    "ScatteringData",
    "BoundStateSet",
    "default_k_grid",
    "scattering_matrix",
    "find_bound_states",
    "eigenfunctions_on",
    "apply_pp_projector",
    "window_doubling_check",
    "save_scattering",
    "load_scattering",
]

_SCHEMA_VERSION = 1
_K_MIN = 1e-3
_K_MAX = 32.0
_NK_PER_SIGN = 4096
_Z_MAX = 40.0
_DZ = 1.0 / 32.0
_WINDOW_FRACTION = 0.10
_RESONANCE_TOL = 1e-8
_CONDITION_TOL = 1e-12
_KAPPA_EPS = 1e-3
_BISECT_TOL = 1e-10
_TAIL_LOG = -log(1e-12)
_X_STEP = 1.0 / 64.0


def default_k_grid(k_min: float = _K_MIN, k_max: float = _K_MAX,
                   n_per_sign: int = _NK_PER_SIGN) -> np.ndarray:
    """Symmetric grid +-[k_min, k_max], uniform on each sign."""
    pos = np.linspace(k_min, k_max, n_per_sign)
    return np.concatenate([-pos[::-1], pos])


@dataclass(frozen=True, eq=False)
class BoundStateSet:
    """Discrete spectrum: kappas increasing, energies -kappa_j^2.

    ``eigenfunctions[j]`` samples the L2-normalized (real) eigenfunction
    on ``x_grid``, which extends far enough that the e^{-kappa x} tail
    is below 1e-12.
    """

    potential: Potential
    kappas: np.ndarray
    x_grid: np.ndarray
    eigenfunctions: np.ndarray
    warnings: tuple = ()

    @property
    def count(self) -> int:
        return int(self.kappas.size)

    @property
    def energies(self) -> np.ndarray:
        return -self.kappas**2


@dataclass(frozen=True, eq=False)
class ScatteringData:
    """S and T = S - 1 on a symmetric k-grid, with T's position profile.

    ``t_hat`` samples (1/2 pi) int T(k) e^{ikz} dk on ``z_grid`` (real by
    conjugation symmetry); ``t_hat_l1`` is its measured L1 mass and
    ``edge_t_abs`` records |T| at the grid edge, where S -> 1.
    """

    potential: Potential
    k_grid: np.ndarray
    S_values: np.ndarray
    T_values: np.ndarray
    z_grid: np.ndarray
    t_hat: np.ndarray
    t_hat_l1: float
    edge_t_abs: float
    bound_states: BoundStateSet | None = None


def _check_symmetric(k: np.ndarray) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    if k.ndim != 1 or k.size < 2:
        raise DomainError("k_grid must be a 1-d grid")
    k = np.sort(k)
    if np.min(np.abs(k)) < 1e-6:
        raise DomainError("k_grid must exclude a punctured neighborhood of 0")
    if np.max(np.abs(k + k[::-1])) > 1e-12 * np.max(np.abs(k)):
        raise DomainError("k_grid must be symmetric about 0")
    return k


def _trapezoid_weights(x: np.ndarray) -> np.ndarray:
    w = np.zeros_like(x)
    w[1:-1] = (x[2:] - x[:-2]) / 2.0
    w[0] = (x[1] - x[0]) / 2.0
    w[-1] = (x[-1] - x[-2]) / 2.0
    return w


def _edge_window(k: np.ndarray, fraction: float = _WINDOW_FRACTION):
    """Raised cosine rolling off over the outer ``fraction`` of |k|."""
    kmax = np.max(np.abs(k))
    knee = (1.0 - fraction) * kmax
    w = np.ones_like(k)
    outer = np.abs(k) > knee
    w[outer] = 0.5 * (1.0 + np.cos(
        np.pi * (np.abs(k[outer]) - knee) / (fraction * kmax)))
    return w


def _transform_t(k: np.ndarray, T: np.ndarray, z: np.ndarray) -> np.ndarray:
    weights = T * _edge_window(k) * _trapezoid_weights(k) / (2.0 * np.pi)
    out = np.empty(z.size, dtype=complex)
    chunk = 256
    for lo in range(0, z.size, chunk):
        zc = z[lo:lo + chunk]
        out[lo:lo + chunk] = np.exp(1j * np.outer(zc, k)) @ weights
    scale = 1.0 + float(np.max(np.abs(out.real)))
    if float(np.max(np.abs(out.imag))) > 1e-10 * scale:
        raise AccuracyError(
            "transformed T picked up an imaginary part",
            achieved=float(np.max(np.abs(out.imag))))
    return out.real.copy()


def scattering_matrix(potential: Potential, k_grid=None,
                      with_bound_states: bool = True) -> ScatteringData:
    """S, T on the grid and T's windowed position-space profile.

    Zero-energy resonances (|f(0,0)| < 1e-8) are rejected; a Jost
    boundary value with magnitude below 1e-12 anywhere on the grid is a
    conditioning failure naming the offending k.
    """
    k = default_k_grid() if k_grid is None else _check_symmetric(k_grid)
    f00, _ = solve_jost_batch(potential, [0.0], np.array([0.0]))
    if abs(f00[0, 0]) < _RESONANCE_TOL:
        raise ResonanceError(
            f"zero-energy resonance: |f(0,0)| = {abs(f00[0, 0]):.3e}; "
            "the continuous-spectrum decomposition used here assumes "
            "f(0,0) != 0")
    k_pos = k[k > 0]
    f0, _ = solve_jost_batch(potential, k_pos, np.array([0.0]))
    f0 = f0[:, 0]
    bad = np.abs(f0) < _CONDITION_TOL
    if np.any(bad):
        raise ConditioningError(
            f"|f(k,0)| < {_CONDITION_TOL} at k = {k_pos[bad][0]:.6g}")
    S_pos = np.conj(f0) / f0
    S = np.concatenate([np.conj(S_pos[::-1]), S_pos])
    T = S - 1.0
    nz = int(round(2 * _Z_MAX / _DZ))
    z = -_Z_MAX + np.arange(nz + 1) * _DZ
    t_hat = _transform_t(k, T, z)
    bound = find_bound_states(potential) if with_bound_states else None
    return ScatteringData(
        potential=potential, k_grid=k, S_values=S, T_values=T,
        z_grid=z, t_hat=t_hat,
        t_hat_l1=float(np.trapezoid(np.abs(t_hat), z)),
        edge_t_abs=float(np.abs(T[-1])),
        bound_states=bound)


def window_doubling_check(potential: Potential, t: float = 1.0) -> dict:
    """Effect of the edge window, measured by doubling k_max.

    The transformed profile carries a genuine step at z = 0 (height
    proportional to int V), so its pointwise change under doubling stays
    O(1) near the step no matter the cutoff; it is reported but only the
    L1 mass and the Fresnel-convolved action, which is how the profile
    enters the propagator, are expected to be stable.
    """
    from ._fresnel import free_kernel_1d

    base = scattering_matrix(potential, with_bound_states=False)
    wide = scattering_matrix(
        potential,
        k_grid=default_k_grid(k_max=2 * _K_MAX, n_per_sign=2 * _NK_PER_SIGN),
        with_bound_states=False)
    z = base.z_grid
    probes = z[::40]
    kern = free_kernel_1d(t, np.subtract.outer(probes, z))
    conv_b = np.trapezoid(base.t_hat[None, :] * kern, z, axis=1)
    conv_w = np.trapezoid(wide.t_hat[None, :] * kern, z, axis=1)
    return {
        "max_abs_change": float(np.max(np.abs(base.t_hat - wide.t_hat))),
        "t_hat_l1": base.t_hat_l1,
        "t_hat_l1_wide": wide.t_hat_l1,
        "convolved_change": float(np.max(np.abs(conv_b - conv_w))),
    }


# -- bound states ------------------------------------------------------------


def _f_on_ray(potential: Potential, kappas: np.ndarray) -> np.ndarray:
    """Real values f(i kappa, 0); the imaginary part must vanish."""
    f, _ = solve_jost_batch(potential, 1j * np.asarray(kappas, dtype=float),
                            np.array([0.0]))
    f = f[:, 0]
    if float(np.max(np.abs(f.imag), initial=0.0)) > 1e-9:
        raise AccuracyError("f(i kappa, 0) drifted off the real axis",
                            achieved=float(np.max(np.abs(f.imag))))
    return f.real.copy()


def find_bound_states(potential: Potential,
                      kappa_max: float | None = None) -> BoundStateSet:
    """All zeros of f(i kappa, 0) on (eps, kappa_max], bisected to 1e-10.

    kappa_max defaults to sqrt(sup|V|), the hard spectral bound for the
    energies E_j = -kappa_j^2 > -sup|V|.
    """
    if kappa_max is None:
        kappa_max = max(np.sqrt(potential.sup_abs), 0.5)
    if kappa_max <= 0:
        raise DomainError("kappa_max must be positive")
    warnings: list[str] = []
    n_scan = 800
    grid = np.linspace(_KAPPA_EPS, kappa_max, n_scan + 1)
    vals = _f_on_ray(potential, grid)
    scale = float(np.max(np.abs(vals)))
    sign_change = vals[:-1] * vals[1:] < 0
    lo = grid[:-1][sign_change].copy()
    hi = grid[1:][sign_change].copy()
    flo = vals[:-1][sign_change].copy()

    if sign_change.any() and sign_change[-1]:
        warnings.append(
            f"root within one scan cell of the window edge {kappa_max:.6g}")
    if abs(vals[-1]) < 1e-8 * scale:
        warnings.append(f"|f(i kappa_max, 0)| nearly vanishes at "
                        f"kappa_max = {kappa_max:.6g}; enlarge the window")
    interior_min = ((np.abs(vals[1:-1]) < 1e-6 * scale)
                    & (np.abs(vals[1:-1]) <= np.abs(vals[:-2]))
                    & (np.abs(vals[1:-1]) <= np.abs(vals[2:]))
                    & ~sign_change[:-1] & ~sign_change[1:])
    for kk in grid[1:-1][interior_min]:
        warnings.append(f"possible double root near kappa = {kk:.6g}: "
                        "no sign change but small magnitude; refine the scan")

    while lo.size and float(np.max(hi - lo)) > _BISECT_TOL:
        mid = 0.5 * (lo + hi)
        fm = _f_on_ray(potential, mid)
        left = flo * fm > 0
        lo = np.where(left, mid, lo)
        flo = np.where(left, fm, flo)
        hi = np.where(left, hi, mid)
    kappas = 0.5 * (lo + hi)

    if kappas.size:
        x_max = max(potential.L_V + 1.0, _TAIL_LOG / float(np.min(kappas)))
        nx = int(np.ceil(x_max / _X_STEP))
        x = np.arange(nx + 1) * _X_STEP
        f, _ = solve_jost_batch(potential, 1j * kappas, x)
        if float(np.max(np.abs(f.imag))) > 1e-9:
            raise AccuracyError("eigenfunction drifted off the real axis",
                                achieved=float(np.max(np.abs(f.imag))))
        fr = f.real
        norms = np.sqrt(np.trapezoid(fr**2, x, axis=1))
        funcs = fr / norms[:, None]
    else:
        x = np.arange(int(np.ceil(potential.L_V / _X_STEP)) + 1) * _X_STEP
        funcs = np.zeros((0, x.size))
    return BoundStateSet(potential=potential, kappas=kappas, x_grid=x,
                         eigenfunctions=funcs, warnings=tuple(warnings))


def eigenfunctions_on(bound: BoundStateSet, x: np.ndarray) -> np.ndarray:
    """Normalized eigenfunction samples on a caller grid."""
    if x[-1] + 1e-9 < bound.x_grid[-1]:
        raise GridMismatchError(
            "field grid cannot resample the eigenfunctions: it ends at "
            f"{x[-1]:g} but their tails need {bound.x_grid[-1]:g}")
    f, _ = solve_jost_batch(bound.potential, 1j * bound.kappas, x)
    fr = f.real
    norms = np.sqrt(np.trapezoid(fr**2, x, axis=1))
    return fr / norms[:, None]


def apply_pp_projector(bound_states: BoundStateSet,
                       phi: WaveField) -> WaveField:
    """Finite-rank projection sum_j e_j (phi, e_j) on phi's grid."""
    x = phi.x_grid
    if bound_states.count == 0:
        return phi.with_values(np.zeros_like(phi.values))
    if (x.shape == bound_states.x_grid.shape
            and float(np.max(np.abs(x - bound_states.x_grid))) < 1e-12):
        funcs = bound_states.eigenfunctions
    else:
        funcs = eigenfunctions_on(bound_states, x)
    coeff = np.trapezoid(funcs * phi.values[None, :], x, axis=1)
    return phi.with_values(coeff @ funcs)


# -- serialization -----------------------------------------------------------


def save_scattering(data: ScatteringData, path) -> None:
    doc = {
        "schema_version": _SCHEMA_VERSION,
        "potential": potential_document(data.potential),
        "k_grid": data.k_grid.tolist(),
        "S_real": data.S_values.real.tolist(),
        "S_imag": data.S_values.imag.tolist(),
        "z_grid": data.z_grid.tolist(),
        "t_hat": data.t_hat.tolist(),
        "t_hat_l1": data.t_hat_l1,
        "edge_t_abs": data.edge_t_abs,
    }
    if data.bound_states is not None:
        bs = data.bound_states
        doc["bound_states"] = {
            "kappas": bs.kappas.tolist(),
            "energies": bs.energies.tolist(),
            "x_grid_step": float(bs.x_grid[1] - bs.x_grid[0]),
            "x_grid_len": int(bs.x_grid.size),
            "eigenfunctions": bs.eigenfunctions.tolist(),
            "warnings": list(bs.warnings),
        }
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_scattering(path) -> ScatteringData:
    try:
        with open(path) as fh:
            doc = json.load(fh)
        potential = potential_from_document(doc["potential"])
        S = np.asarray(doc["S_real"]) + 1j * np.asarray(doc["S_imag"])
        bound = None
        if "bound_states" in doc:
            bs = doc["bound_states"]
            step = float(bs["x_grid_step"])
            x = np.arange(int(bs["x_grid_len"])) * step
            bound = BoundStateSet(
                potential=potential,
                kappas=np.asarray(bs["kappas"], dtype=float),
                x_grid=x,
                eigenfunctions=np.asarray(bs["eigenfunctions"],
                                          dtype=float).reshape(
                    len(bs["kappas"]), x.size),
                warnings=tuple(bs["warnings"]))
        return ScatteringData(
            potential=potential,
            k_grid=np.asarray(doc["k_grid"], dtype=float),
            S_values=S, T_values=S - 1.0,
            z_grid=np.asarray(doc["z_grid"], dtype=float),
            t_hat=np.asarray(doc["t_hat"], dtype=float),
            t_hat_l1=float(doc["t_hat_l1"]),
            edge_t_abs=float(doc["edge_t_abs"]),
            bound_states=bound)
    except (OSError, KeyError, ValueError, TypeError,
            json.JSONDecodeError) as exc:
        raise DataError(f"cannot read scattering data: {exc}") from exc
