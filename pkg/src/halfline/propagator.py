"""Continuous-spectrum propagator assembled from scattering structure.

The Dirichlet half-line evolution restricted to the continuous subspace
splits into an image-method free part plus corrections that carry all
the potential dependence:

    u = [free part] + [kernel corrections b, c, e and their mirror
        images] + [reflection family weighted by the transformed
        coefficient T = S - 1].

Every correction is a convolution of the free kernel f_t against
piecewise-linear kernel lines, so it inherits the exact complex-Gaussian
antiderivatives of the Fresnel helpers; no oscillatory k-quadrature
appears anywhere in the assembled route. An independent direct mode
computes the same evolution as a spectral integral

    u(x) = (1/2pi) int e^{-itk^2} f(k,x) [F-(k) - S(k) F+(k)] dk

with Gaussian regularization and exact cell moments for the quadratic
phase. The two routes share the Jost solver and nothing else, which
makes their agreement a strong end-to-end check; if they ever disagree,
the spectral form wins.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve
from scipy.special import erf

from . import _backend
from ._fresnel import (
    _curvature_masses,
    free_kernel_1d,
    fresnel_pair,
    fresnel_transform_grid,
    fresnel_transform_points,
)
from ._quad import RICHARDSON_EPS, RICHARDSON_WEIGHTS, ft_pwlinear
from .exceptions import (
    AccuracyError,
    ConditioningError,
    CoverageError,
    DomainError,
    GridMismatchError,
)
from .field import WaveField
from .jost import KernelField, solve_jost_batch, solve_marchenko_kernel
from .potential import Potential, potential_document
from .scattering import ScatteringData, apply_pp_projector, scattering_matrix

__all__ = [
    "DEFAULT_TIMES",
    "PropagatorKernelSample",
    "default_lattice",
    "fresnel_kernel",
    "free_kernel",
    "correction_b",
    "correction_c",
    "correction_e",
    "apply_t_term",
    "kernel_sample",
    "direct_kernel_values",
    "evolve_continuous",
]

_SQRT_PI = np.sqrt(np.pi)

DEFAULT_TIMES = (0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0)
_LATTICE_STEP = 1.0 / 32.0
_LATTICE_MAX = 40.0
_SAMPLE_MAX = 8.0

_PHASE_BUDGET = 0.1    # max linear-phase advance per k-cell (radians)
_K_CUTOFF = 64.0       # |k| cutoff; the combined damping there is ~1e-4
_K_CHUNK = 4096        # spectral nodes per streamed Jost solve
_EXTRAP_REL_TOL = 5e-3
_COVERAGE_REL = 1e-4   # admissible relative size of T-hat at its edge
_TAIL_REL = 1e-13
_MODES = ("assembled", "direct")


def default_lattice(x_max: float = _LATTICE_MAX,
                    step: float = _LATTICE_STEP) -> np.ndarray:
    """Default evaluation positions [0, x_max] at the module step."""
    return np.arange(int(round(x_max / step)) + 1) * step


def fresnel_kernel(t: float, z):
    """Whole-line free kernel f_t(z), principal branch, either sign of t."""
    out = free_kernel_1d(t, z)
    return complex(out[()]) if np.ndim(z) == 0 else out


def free_kernel(t: float, x, y):
    """Dirichlet free propagator f_t(x - y) - f_t(x + y) for x, y >= 0."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x < -1e-12) or np.any(y < -1e-12):
        raise DomainError("free_kernel needs x, y >= 0")
    out = free_kernel_1d(t, x - y) - free_kernel_1d(t, x + y)
    return complex(out[()]) if out.ndim == 0 else out


# -- kernel-line transforms --------------------------------------------------


def _line_targets(kernel: KernelField, x: float, t: float,
                  w: np.ndarray) -> np.ndarray:
    """int f_t(w - z) K(x, z) dz at arbitrary real targets w."""
    z, line = kernel.kernel_line(x)
    if z.size < 2:
        return np.zeros(w.shape, dtype=complex)
    d = kernel.delta_K
    if w.size >= 8:
        steps = np.diff(w)
        if np.max(np.abs(steps - steps[0])) < 1e-9 * abs(steps[0]):
            m = int(round(steps[0] / d))
            if m > 0 and abs(steps[0] - m * d) < 1e-9:
                nw = (w.size - 1) * m + 1
                full = fresnel_transform_grid(line, z[0], d, t, float(w[0]),
                                              nw)
                return full[::m]
    return fresnel_transform_points(line, z[0], d, t, w)


def _line_rows(kernel: KernelField, rows_x: np.ndarray, t: float,
               w0: float, nw: int) -> np.ndarray:
    """Stack of line transforms on a shared target lattice.

    All rows reuse one antiderivative table: every needed offset
    w_j - z lies on the master lattice w0 - 2 L_V + p * delta_K, so the
    expensive complex erf is evaluated once and each row reduces to a
    short convolution against its curvature masses.
    """
    dk = kernel.delta_K
    span = kernel.n  # 2 L_V in lattice units
    tau0 = w0 - span * dk
    phi_m, psi_m = fresnel_pair(t, tau0 + np.arange(nw + span) * dk)

    def one(xi):
        z, line = kernel.kernel_line(xi)
        out = np.zeros(nw, dtype=complex)
        if z.size < 2:
            return out
        M = z.size - 1
        p0 = int(round(xi / dk))
        gamma = _curvature_masses(np.asarray(line, dtype=complex), dk)
        seg = psi_m[p0:p0 + M + nw]
        out[:] = fftconvolve(gamma, seg)[M:M + nw]
        out += line[0] * phi_m[p0 + M:p0 + M + nw]
        out -= line[-1] * phi_m[p0:p0 + nw]
        return out

    rows = _backend.parallel_map(one, [float(v) for v in rows_x])
    return np.array(rows) if rows else np.zeros((0, nw), dtype=complex)


# -- correction kernels ------------------------------------------------------


def _check_line_position(kernel: KernelField, x: float) -> float:
    x = float(x)
    if x < -1e-12:
        raise DomainError("kernel line position must be nonnegative")
    if x > kernel.x_max + 1e-9:
        raise CoverageError(
            f"kernel field stops at x = {kernel.x_max:g}, got x = {x:g}")
    return x


def correction_b(kernel: KernelField, t: float, x: float, y):
    """First correction b_t(x, y) = int_x f_t(y - z) K(x, z) dz.

    Exact for the stored kernel line; y may be an array (a commensurate
    uniform target family collapses to one lattice transform). Positions
    beyond the support give exactly zero, positions beyond the stored
    extent are a coverage error, and x must sit on the kernel lattice.
    """
    if t == 0.0:
        raise DomainError("corrections are undefined at t = 0")
    x = _check_line_position(kernel, x)
    y_arr = np.atleast_1d(np.asarray(y, dtype=float))
    if x > kernel.potential.L_V + 1e-12:
        out = np.zeros(y_arr.shape, dtype=complex)
    else:
        out = _line_targets(kernel, x, t, y_arr)
    return complex(out[0]) if np.ndim(y) == 0 else out


def correction_c(kernel: KernelField, t: float, x, y: float):
    """Second correction c_t(x, y) = int_y f_t(x - z) K(y, z) dz = b_t(y, x)."""
    return correction_b(kernel, t, y, x)


def correction_e(kernel: KernelField, t: float, x: float, y: float) -> complex:
    """Double correction: f_t integrated against K(x,.) (x) K(y,.).

    Evaluated as the line transform b_t(x, .) integrated against the
    K(y, .) line; trapezoid on the kernel lattice with half weight at
    the diagonal, where K jumps on.
    """
    if t == 0.0:
        raise DomainError("corrections are undefined at t = 0")
    y = _check_line_position(kernel, y)
    if y > kernel.potential.L_V + 1e-12:
        return 0j
    zy, line_y = kernel.kernel_line(y)
    if zy.size < 2:
        return 0j
    bx = correction_b(kernel, t, x, zy)
    w = np.full(zy.size, kernel.delta_K)
    w[0] *= 0.5
    w[-1] *= 0.5
    return complex(np.dot(bx * w, line_y))


# -- grids -------------------------------------------------------------------


def _uniform_grid(x) -> tuple:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise DomainError("need a one-dimensional grid with >= 2 nodes")
    steps = np.diff(x)
    h = float(steps[0])
    if h <= 0.0 or np.max(np.abs(steps - h)) > 1e-9 * max(h, 1.0):
        raise GridMismatchError("grid must be uniform and increasing")
    return x, h


def _lattice_units(values: np.ndarray, step: float, what: str) -> np.ndarray:
    units = np.rint(np.asarray(values, dtype=float) / step).astype(int)
    if np.max(np.abs(values - units * step)) > 1e-9:
        raise GridMismatchError(
            f"{what} must lie on the step-{step:g} lattice")
    return units


def _exact_refine(values: np.ndarray, r: int) -> np.ndarray:
    """Insert r-1 equally spaced nodes per cell (exact for the interpolant)."""
    if r == 1:
        return np.asarray(values, dtype=complex)
    v = np.asarray(values, dtype=complex)
    frac = (np.arange(r) / r)[None, :]
    seg = v[:-1, None] * (1.0 - frac) + v[1:, None] * frac
    out = np.empty((v.size - 1) * r + 1, dtype=complex)
    out[:-1] = seg.reshape(-1)
    out[-1] = v[-1]
    return out


def _profile_weights(scattering: ScatteringData) -> np.ndarray:
    """Trapezoid-weighted T-hat samples, gated on edge decay."""
    t_hat = scattering.t_hat
    peak = float(np.max(np.abs(t_hat))) if t_hat.size else 0.0
    edge = max(abs(float(t_hat[0])), abs(float(t_hat[-1])))
    if edge > _COVERAGE_REL * peak:
        raise CoverageError(
            "transformed coefficient has not decayed at its grid edge "
            f"(|edge|/|peak| = {edge / peak:.2e}); enlarge the profile grid")
    z = scattering.z_grid
    w = np.full(z.size, z[1] - z[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    return t_hat * w


def apply_t_term(scattering: ScatteringData, phi: WaveField,
                 t: float) -> WaveField:
    """Reflection operator u(x) = -int T_hat(z) F_phi(z - x) dz.

    F_phi is the free-kernel transform of phi, evaluated exactly on the
    common refinement of the field and profile lattices. The position
    profile must have decayed at its grid edge, else the truncated z
    integral is unsound.
    """
    if t == 0.0:
        raise DomainError("the reflection kernel is undefined at t = 0")
    x, h = _uniform_grid(phi.x_grid)
    tw = _profile_weights(scattering)
    z = scattering.z_grid
    dz = float(z[1] - z[0])
    r = _common_refine(h, dz)
    hw = h / r
    m_z = int(round(dz / hw))
    vals = _exact_refine(phi.values, r)
    nx = x.size
    nxw = (nx - 1) * r + 1
    # F on the lattice of all z_j - x_i, anchored at z[0] - x[-1]
    w0 = float(z[0] - x[-1])
    nw = (z.size - 1) * m_z + nxw
    F = fresnel_transform_grid(vals, float(x[0]), hw, t, w0, nw)
    out = np.empty(nx, dtype=complex)
    base = np.arange(z.size) * m_z
    for i in range(nx):
        out[i] = F[base + (nxw - 1 - i * r)] @ tw
    return WaveField(x_grid=x, values=-out, time=phi.time + t)


def _common_refine(h: float, s: float) -> int:
    """Refine factor r with both h/r dividing h and s = m * (h/r)."""
    if s >= h - 1e-12:
        r = 1
    else:
        r = int(round(h / s))
        if r < 1 or abs(h - r * s) > 1e-9:
            raise GridMismatchError(
                f"field step {h:g} and profile step {s:g} are incommensurate")
    hw = h / r
    m = int(round(s / hw))
    if m < 1 or abs(s - m * hw) > 1e-9:
        raise GridMismatchError(
            f"field step {h:g} and profile step {s:g} are incommensurate")
    return r


# -- regularized spectral quadrature ----------------------------------------


def _gauss_cell_weights(k: np.ndarray, gamma: complex) -> np.ndarray:
    """Node weights integrating the piecewise-linear interpolant of g
    against e^{-gamma k^2} exactly over [k[0], k[-1]]."""
    sg = np.sqrt(gamma)
    ek = erf(sg * k.astype(complex))
    xk = np.exp(-gamma * k * k)
    a = k[:-1]
    dk = np.diff(k)
    I0 = (_SQRT_PI / (2.0 * sg)) * (ek[1:] - ek[:-1])
    I1 = (xk[:-1] - xk[1:]) / (2.0 * gamma)
    J = (I1 - a * I0) / dk
    w = np.zeros(k.size, dtype=complex)
    w[:-1] += I0 - J
    w[1:] += J
    return w


def _oscillatory_weights(k_pos: np.ndarray, t: float) -> tuple:
    """Positive-half node weights for (1/2pi) int g(k) e^{-itk^2} dk.

    Returns the production combination (three regularization levels,
    second-order extrapolation) and a two-level check combination whose
    disagreement estimates the extrapolation error. Mirror symmetry is
    exact by construction: negative nodes reuse w[1:], the k = 0 node
    weight is doubled.
    """
    per_eps = [_gauss_cell_weights(k_pos, eps + 1j * t)
               for eps in RICHARDSON_EPS]
    w3 = sum(wt * w for wt, w in zip(RICHARDSON_WEIGHTS, per_eps))
    w2 = -per_eps[1] + 2.0 * per_eps[2]
    for w in (w3, w2):
        w[0] *= 2.0
    scale = 1.0 / (2.0 * np.pi)
    return w3 * scale, w2 * scale


def _mirror_dot(w_pos, c_pos, c_neg, table) -> np.ndarray:
    """sum_k w c table over the symmetric grid, table(-k) = conj table(k).

    c_neg holds the coefficient at -k for k > 0, aligned with c_pos[1:].
    The weights are even in k but complex, so the reflected half is the
    conjugate of a conj(w)-weighted sum.
    """
    head = (w_pos * c_pos) @ table
    tail = np.conj(np.conj(w_pos[1:] * c_neg) @ table[1:])
    return head + tail


def _mirror_bilinear(w_pos, c_pos, A, B) -> np.ndarray:
    """sum_k w c A(k,x) B(k,y), all factors conjugate-mirror symmetric."""
    head = (A * (w_pos * c_pos)[:, None]).T @ B
    ct = np.conj(w_pos[1:]) * c_pos[1:]
    tail = np.conj((A[1:] * ct[:, None]).T @ B[1:])
    return head + tail


def _phase_dots(k_pos: np.ndarray, x: np.ndarray, pairs) -> list:
    """sum_k w c e^{ikx} over the symmetric grid for several (c+, c-) pairs.

    Each pair is (cp, cn) with cp including the quadrature weight on
    k >= 0 and cn the weighted coefficient at -k aligned with k_pos[1:].
    Phases are materialized once per k-chunk and shared by all pairs.
    """
    acc = [(np.zeros(x.size, dtype=complex), np.zeros(x.size, dtype=complex))
           for _ in pairs]
    tails = [np.concatenate([[0.0], np.conj(cn)]) for _, cn in pairs]
    chunk = max(1, (1 << 22) // max(x.size, 1))
    for lo in range(0, k_pos.size, chunk):
        ph = np.exp(1j * np.outer(k_pos[lo:lo + chunk], x))
        for (head, tail), (cp, _), ct in zip(acc, pairs, tails):
            head += cp[lo:lo + chunk] @ ph
            tail += ct[lo:lo + chunk] @ ph
    return [head + np.conj(tail) for head, tail in acc]


# -- shared per-potential context --------------------------------------------


@dataclass(frozen=True, eq=False)
class _Context:
    potential: Potential
    kernel: KernelField
    scattering: ScatteringData
    tables: dict


_CONTEXT: dict = {}


def _context(potential: Potential) -> _Context:
    key = repr(sorted(potential_document(potential).items()))
    hit = _CONTEXT.get(key)
    if hit is not None:
        return hit
    kernel = solve_marchenko_kernel(potential)
    scattering = scattering_matrix(potential)
    ctx = _Context(potential=potential, kernel=kernel, scattering=scattering,
                   tables={})
    _CONTEXT.clear()
    _CONTEXT[key] = ctx
    return ctx


def _spectral_grid(L: float, reach: float) -> np.ndarray:
    """k >= 0 nodes resolving every linear phase up to the cutoff.

    reach bounds the total position content of the integrand factors
    (kernel spans plus evaluation extent), so the per-cell phase advance
    stays below the budget everywhere.
    """
    f_max = max(8.0 * L + reach, 1.0)
    dk = _PHASE_BUDGET / f_max
    n_half = int(np.ceil(_K_CUTOFF / dk))
    return np.arange(n_half + 1) * (_K_CUTOFF / n_half)


@dataclass(frozen=True, eq=False)
class _SpectralTables:
    k_pos: np.ndarray
    x_nodes: np.ndarray
    d_pos: np.ndarray   # f(k, x) - e^{ikx} on k_pos (x) x_nodes
    S_pos: np.ndarray
    T_pos: np.ndarray


def _jost_block(potential: Potential, k_pos: np.ndarray,
                x_nodes: np.ndarray) -> _SpectralTables:
    grid = x_nodes
    lead = 0
    if grid.size == 0 or abs(grid[0]) > 1e-15:
        grid = np.concatenate([[0.0], grid])
        lead = 1
    f, _ = solve_jost_batch(potential, k_pos, grid)
    f0 = f[:, 0]
    if np.min(np.abs(f0)) < 1e-12:
        j = int(np.argmin(np.abs(f0)))
        raise ConditioningError(
            f"|f(k,0)| = {abs(f0[j]):.3e} at k = {k_pos[j]:.6g}")
    d = f - np.exp(1j * np.outer(k_pos, grid))
    S = np.conj(f0) / f0
    return _SpectralTables(k_pos=k_pos, x_nodes=x_nodes,
                           d_pos=d[:, lead:], S_pos=S, T_pos=S - 1.0)


def _spectral_tables(ctx: _Context, x_nodes: np.ndarray,
                     reach: float) -> _SpectralTables:
    k_pos = _spectral_grid(ctx.potential.L_V, reach)
    key = ("spectral", k_pos.size, x_nodes.tobytes())
    hit = ctx.tables.get(key)
    if hit is not None:
        return hit
    tables = _jost_block(ctx.potential, k_pos, x_nodes)
    if len(ctx.tables) > 3:
        ctx.tables.clear()
    ctx.tables[key] = tables
    return tables


# -- kernel samples ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PropagatorKernelSample:
    """Propagator kernel values at one time with their decomposition.

    ``k_t`` is the assembled total; the pieces sum to it exactly by
    construction, so the meaningful invariants are symmetry and the
    agreement of ``k_t`` with the independent spectral route. Mirror
    collects the three image terms (the reflected single lines and the
    reflected double term), cross the T-weighted line products, and
    t_part the pure reflection term driven by the transformed
    coefficient alone.
    """

    potential: Potential
    t: float
    x_grid: np.ndarray
    y_grid: np.ndarray
    free_part: np.ndarray
    b_part: np.ndarray
    c_part: np.ndarray
    e_part: np.ndarray
    mirror_part: np.ndarray
    cross_part: np.ndarray
    t_part: np.ndarray
    k_t: np.ndarray

    @property
    def k_t1(self) -> np.ndarray:
        return self.k_t - self.free_part

    @property
    def k_t2(self) -> np.ndarray:
        return self.k_t1 - self.t_part


def _sample_grid(x_grid, x_max: float) -> np.ndarray:
    if x_grid is None:
        return default_lattice(x_max)
    x, _ = _uniform_grid(x_grid)
    if x[0] < -1e-12:
        raise DomainError("sample grid must lie in [0, infinity)")
    return x


def kernel_sample(potential: Potential, t: float, x_grid=None,
                  y_grid=None) -> PropagatorKernelSample:
    """Assembled kernel values and all decomposition pieces on a grid.

    Grids must share a common step that is a multiple of the kernel
    lattice step. The default extent is deliberately smaller than the
    module evaluation lattice: samples exist to be compared against the
    direct spectral route, whose cost grows with the grid, while the
    individual correction kernels remain cheap on wide grids through
    ``correction_b`` and friends.
    """
    if t == 0.0:
        raise DomainError("kernel samples are undefined at t = 0")
    ctx = _context(potential)
    kernel = ctx.kernel
    x = _sample_grid(x_grid, _SAMPLE_MAX)
    y = _sample_grid(y_grid, _SAMPLE_MAX)
    hx = float(x[1] - x[0])
    hy = float(y[1] - y[0])
    if abs(hx - hy) > 1e-12:
        raise GridMismatchError("sample grids must share one step")
    L = potential.L_V
    dK = kernel.delta_K
    n = kernel.n
    x_units = _lattice_units(x, dK, "sample positions")
    y_units = _lattice_units(y, dK, "sample positions")
    _check_line_position(kernel, float(x[-1]))
    _check_line_position(kernel, float(y[-1]))

    nxL = int(np.sum(x <= L + 1e-12))
    nyL = int(np.sum(y <= L + 1e-12))
    rows_units = np.unique(np.concatenate([x_units[:nxL], y_units[:nyL]]))
    row_of = {u: i for i, u in enumerate(rows_units)}

    # one master target lattice covering [-wmax, wmax] serves every row
    wmax_units = int(max(x_units[-1], y_units[-1], n))
    nw = 2 * wmax_units + 1
    w0 = -wmax_units * dK
    B = _line_rows(kernel, rows_units * dK, t, w0, nw)
    xrow = np.array([row_of[u] for u in x_units[:nxL]], dtype=int)
    yrow = np.array([row_of[u] for u in y_units[:nyL]], dtype=int)

    shape = (x.size, y.size)
    b_part = np.zeros(shape, dtype=complex)
    c_part = np.zeros(shape, dtype=complex)
    e_part = np.zeros(shape, dtype=complex)
    mirror = np.zeros(shape, dtype=complex)
    if nxL:
        b_part[:nxL] = B[np.ix_(xrow, wmax_units + y_units)]
        mirror[:nxL] -= B[np.ix_(xrow, wmax_units - y_units)]
    if nyL:
        c_part[:, :nyL] = B[np.ix_(yrow, wmax_units + x_units)].T
        mirror[:, :nyL] -= B[np.ix_(yrow, wmax_units - x_units)].T
    if nxL and nyL:
        # K(y, .) rows against the forward and reflected transforms
        We = kernel.K_values[y_units[:nyL]] * dK
        ar = np.arange(nyL)
        We[ar, y_units[:nyL]] *= 0.5
        We[ar, n - y_units[:nyL]] *= 0.5
        We[2 * y_units[:nyL] == n, :] = 0.0  # zero-length line at y = L_V
        pos = B[np.ix_(xrow, wmax_units + np.arange(n + 1))]
        neg = B[np.ix_(xrow, wmax_units - np.arange(n + 1))]
        e_part[:nxL, :nyL] = pos @ We.T
        mirror[:nxL, :nyL] -= neg @ We.T

    # T-weighted line products, evaluated spectrally; a trivial potential
    # scatters nothing and skips the spectral solves outright
    if potential.is_trivial():
        cross = np.zeros(shape, dtype=complex)
    else:
        in_nodes = rows_units * dK
        tables = _spectral_tables(ctx, in_nodes, float(x[-1] + y[-1]))
        w3, _ = _oscillatory_weights(tables.k_pos, t)
        nk = tables.k_pos.size
        D_x = np.zeros((nk, x.size), dtype=complex)
        D_y = np.zeros((nk, y.size), dtype=complex)
        if nxL:
            D_x[:, :nxL] = tables.d_pos[:, [row_of[u] for u in x_units[:nxL]]]
        if nyL:
            D_y[:, :nyL] = tables.d_pos[:, [row_of[u] for u in y_units[:nyL]]]
        E_x = np.exp(1j * np.outer(tables.k_pos, x))
        E_y = np.exp(1j * np.outer(tables.k_pos, y))
        cT = -tables.T_pos
        cross = _mirror_bilinear(w3, cT, D_x, E_y)
        cross += _mirror_bilinear(w3, cT, E_x, D_y)
        cross += _mirror_bilinear(w3, cT, D_x, D_y)

    t_part = _reflection_values(ctx.scattering, t, x, y)
    free_part = free_kernel(t, x[:, None], y[None, :])
    k_t = free_part + b_part + c_part + e_part + mirror + cross + t_part
    return PropagatorKernelSample(
        potential=potential, t=float(t), x_grid=x, y_grid=y,
        free_part=free_part, b_part=b_part, c_part=c_part, e_part=e_part,
        mirror_part=mirror, cross_part=cross, t_part=t_part, k_t=k_t)


def _reflection_values(scattering: ScatteringData, t: float, x: np.ndarray,
                       y: np.ndarray) -> np.ndarray:
    """-(f_t * T_hat)(x + y) on the grid, via the shared sum lattice."""
    tw = _profile_weights(scattering)
    if not np.any(tw):
        return np.zeros((x.size, y.size), dtype=complex)
    g = float(x[1] - x[0])
    s0 = float(x[0] + y[0])
    ns = x.size + y.size - 1
    z = scattering.z_grid
    J = np.empty(ns, dtype=complex)
    chunk = max(1, (1 << 21) // z.size)
    for lo in range(0, ns, chunk):
        s = s0 + np.arange(lo, min(lo + chunk, ns)) * g
        J[lo:lo + chunk] = free_kernel_1d(t, s[:, None] - z[None, :]) @ tw
    return -J[np.arange(x.size)[:, None] + np.arange(y.size)[None, :]]


def direct_kernel_values(potential: Potential, t: float, x_grid=None,
                         y_grid=None) -> np.ndarray:
    """Kernel values by the spectral route, sharing nothing with assembly
    beyond the Jost solver: regularized quadrature of

        (1/2pi) int e^{-itk^2} f(k,x) [conj f(k,y) - S(k) f(k,y)] dk

    with the improper free part replaced by its closed form.
    """
    if t == 0.0:
        raise DomainError("kernel values are undefined at t = 0")
    ctx = _context(potential)
    x = _sample_grid(x_grid, _SAMPLE_MAX)
    y = _sample_grid(y_grid, _SAMPLE_MAX)
    if potential.is_trivial():
        return free_kernel(t, x[:, None], y[None, :])
    L = potential.L_V
    nxL = int(np.sum(x <= L + 1e-12))
    nyL = int(np.sum(y <= L + 1e-12))
    nodes = np.unique(np.concatenate([x[:nxL], y[:nyL]]))
    tables = _spectral_tables(ctx, nodes, float(x[-1] + y[-1]))
    k_pos = tables.k_pos
    nk = k_pos.size
    w3, _ = _oscillatory_weights(k_pos, t)

    def cols(v, count):
        out = np.zeros((nk, v.size), dtype=complex)
        if count:
            idx = np.searchsorted(nodes, v[:count])
            out[:, :count] = tables.d_pos[:, idx]
        return out

    D_x = cols(x, nxL)
    D_y = cols(y, nyL)
    E_x = np.exp(1j * np.outer(k_pos, x))
    E_y = np.exp(1j * np.outer(k_pos, y))
    one = np.ones(nk)
    out = free_kernel(t, x[:, None], y[None, :])
    out += _mirror_bilinear(w3, one, D_x, np.conj(E_y))
    out += _mirror_bilinear(w3, one, E_x, np.conj(D_y))
    out += _mirror_bilinear(w3, one, D_x, np.conj(D_y))
    mS = -tables.S_pos
    out += _mirror_bilinear(w3, mS, D_x, E_y)
    out += _mirror_bilinear(w3, mS, E_x, D_y)
    out += _mirror_bilinear(w3, mS, D_x, D_y)
    out += _mirror_bilinear(w3, -tables.T_pos, E_x, E_y)
    return out


# -- evolution ---------------------------------------------------------------


def evolve_continuous(potential: Potential, phi: WaveField, t: float,
                      mode: str = "assembled") -> WaveField:
    """e^{-itH} P_c phi on phi's grid.

    mode "assembled" builds the output from exact Fresnel transforms of
    the data and its kernel image (free part, corrections, reflection
    family); mode "direct" computes the spectral integral with
    regularized quadrature. t = 0 returns the continuous projection.
    Resonant potentials are rejected by the scattering layer.
    """
    if mode not in _MODES:
        raise DomainError(f"mode must be one of {_MODES}")
    ctx = _context(potential)
    x, h = _uniform_grid(phi.x_grid)
    if abs(x[0]) > 1e-12:
        raise DomainError("evolution data must start at the wall x = 0")
    if t == 0.0:
        pp = apply_pp_projector(ctx.scattering.bound_states, phi)
        return phi.with_values(phi.values - pp.values)
    if mode == "assembled":
        values = _evolve_assembled(ctx, phi.values, x, h, t)
    else:
        values = _evolve_direct(ctx, phi.values, x, h, t)
    return WaveField(x_grid=x, values=values, time=phi.time + t)


def _kernel_image(ctx: _Context, rows: np.ndarray) -> np.ndarray:
    """(K^T phi)(z) on the kernel lattice from data rows on that lattice.

    Trapezoid in the line direction with half weights where the kernel
    jumps (the wall row and the diagonal); columns whose line degenerates
    to a point vanish identically.
    """
    K = ctx.kernel.K_values
    dK = ctx.kernel.delta_K
    n = ctx.kernel.n
    j = np.arange(n + 1)
    top = np.minimum(j, n - j)
    out = dK * (K.T @ rows)
    out -= 0.5 * dK * (K[0, :] * rows[0] + K[top, j] * rows[top])
    return out


def _evolve_assembled(ctx: _Context, phi_values: np.ndarray, x: np.ndarray,
                      h: float, t: float) -> np.ndarray:
    kernel = ctx.kernel
    trivial = ctx.potential.is_trivial()
    tw = None
    if not trivial:
        tw = _profile_weights(ctx.scattering)
        if not np.any(tw):
            tw = None

    if trivial:
        hw, ref = h, 1
    else:
        dK = kernel.delta_K
        ref = int(round(h / dK))
        if ref < 1 or abs(h - ref * dK) > 1e-9:
            raise GridMismatchError(
                f"grid step {h:g} must be a positive multiple of the kernel "
                f"lattice step {dK:g}")
        hw = dK
    vals = _exact_refine(phi_values, ref)
    n = kernel.n
    L2_units = 0 if trivial else n
    X_units = (x.size - 1) * ref
    amax_units = max(X_units, L2_units)

    # psi = phi + K^T phi on [0, max(X, 2 L_V)]
    psi = np.zeros(max(X_units, L2_units) + 1, dtype=complex)
    psi[:vals.size] = vals
    if not trivial:
        rows = np.zeros(n // 2 + 1, dtype=complex)
        take = min(rows.size, vals.size)
        rows[:take] = vals[:take]
        psi[:n + 1] += _kernel_image(ctx, rows)

    # transform window: +-amax, extended left when the reflection acts
    z = ctx.scattering.z_grid
    if tw is not None:
        mz = int(_lattice_units(np.array([z[1] - z[0]]), hw,
                                "profile step")[0])
        z0_units = int(_lattice_units(np.array([z[0]]), hw,
                                      "profile grid")[0])
        z1_units = z0_units + (z.size - 1) * mz
        w0_units = z0_units - amax_units
        top_units = max(amax_units, z1_units)
    else:
        w0_units = -amax_units
        top_units = amax_units
    nwF = top_units - w0_units + 1
    F = fresnel_transform_grid(psi, 0.0, hw, t, w0_units * hw, nwF)

    # needed positions: the output nodes and the kernel column lattice
    a_units = np.arange(0, X_units + 1, ref)
    if not trivial:
        a_units = np.unique(np.concatenate([a_units, np.arange(n + 1)]))
    base = -w0_units
    W = F[base + a_units] - F[base - a_units]
    if tw is not None:
        # G(a) = int T_hat(z) F_psi(z - a) dz on the needed positions
        zi = base + z0_units + np.arange(z.size) * mz
        chunk = max(1, (1 << 21) // z.size)
        for lo in range(0, a_units.size, chunk):
            au = a_units[lo:lo + chunk]
            W[lo:lo + chunk] -= F[zi[None, :] - au[:, None]] @ tw

    pos = np.searchsorted(a_units, np.arange(0, X_units + 1, ref))
    u = W[pos].copy()
    if not trivial:
        nxL = int(np.sum(x <= ctx.potential.L_V + 1e-12))
        if nxL:
            cols = np.searchsorted(a_units, np.arange(n + 1))
            Wcols = W[cols]
            ri = np.arange(nxL) * ref
            K = kernel.K_values[ri]
            dK = kernel.delta_K
            contrib = dK * (K @ Wcols)
            contrib -= 0.5 * dK * (K[np.arange(nxL), ri] * Wcols[ri]
                                   + K[np.arange(nxL), n - ri] * Wcols[n - ri])
            u[:nxL] += contrib
    return u


def _evolve_direct(ctx: _Context, phi_values: np.ndarray, x: np.ndarray,
                   h: float, t: float) -> np.ndarray:
    # exact free part: F_phi(x) - F_phi(-x) from one transform
    nx = x.size
    F = fresnel_transform_grid(phi_values, 0.0, h, t, -float(x[-1]),
                               2 * nx - 1)
    u_free = F[nx - 1 + np.arange(nx)] - F[nx - 1 - np.arange(nx)]
    if ctx.potential.is_trivial():
        return u_free

    dK = ctx.kernel.delta_K
    if int(round(h / dK)) < 1 or abs(h - round(h / dK) * dK) > 1e-9:
        raise GridMismatchError(
            f"grid step {h:g} must be a positive multiple of the kernel "
            f"lattice step {dK:g} (direct mode resolves the same lattice)")

    sup = float(np.max(np.abs(phi_values)))
    keep = np.nonzero(np.abs(phi_values) > _TAIL_REL * sup)[0]
    y_eff = float(x[min(int(keep[-1]) + 1, nx - 1)]) if keep.size else h
    spec = _direct_spectra(ctx, phi_values, x, h, y_eff)
    (k_pos, S, T, P_pos, P_neg, Dp, Dm, d_out, nxL) = spec

    w3, w2 = _oscillatory_weights(k_pos, t)
    phm = P_neg + Dm
    php = P_pos + Dp
    A_pos = phm - S * php
    A_neg = php - np.conj(S) * phm
    Bc_pos = Dm - S * Dp - T * P_pos
    Bc_neg = Dp - np.conj(S) * Dm - np.conj(T) * P_neg

    u = u_free.copy()
    parts = []
    for w in (w3, w2):
        u_d = _mirror_dot(w, A_pos, A_neg[1:], d_out)
        pair = (w * Bc_pos, w[1:] * Bc_neg[1:])
        u_p = _phase_dots(k_pos, x, [pair])[0]
        out = np.zeros(nx, dtype=complex)
        out[:nxL] = u_d
        out += u_p
        parts.append(out)
    est = float(np.max(np.abs(parts[0] - parts[1])))
    scale = float(np.max(np.abs(u_free + parts[0]))) or 1.0
    if est > _EXTRAP_REL_TOL * scale:
        raise AccuracyError(
            "regularization extrapolation has not converged",
            achieved=est / scale)
    u += parts[0]
    return u


def _direct_spectra(ctx: _Context, phi_values: np.ndarray, x: np.ndarray,
                    h: float, y_eff: float) -> tuple:
    """Spectral coefficients for the direct mode, streamed in k-chunks.

    The data moments int conj(f) phi and int f phi are resolved on the
    kernel-step lattice (dense Jost output is cheap along one sweep), so
    their trapezoid error stays harmless at the spectral cutoff.
    """
    L = ctx.potential.L_V
    dK = ctx.kernel.delta_K
    nx = x.size
    nxL = int(np.sum(x <= L + 1e-12))
    key = ("direct", nx, nxL, float(x[-1]), float(h),
           phi_values.tobytes())
    hit = ctx.tables.get(key)
    if hit is not None:
        return hit

    k_pos = _spectral_grid(L, float(x[-1]) + y_eff)
    nk = k_pos.size
    y_fine = np.arange(int(round(min(L, x[-1]) / dK)) + 1) * dK
    ref = int(round(h / dK))
    phi_fine = _exact_refine(phi_values, ref)[:y_fine.size]
    if phi_fine.size < y_fine.size:
        phi_fine = np.pad(phi_fine, (0, y_fine.size - phi_fine.size))
    wy = np.full(y_fine.size, dK)
    wy[0] *= 0.5
    wy[-1] *= 0.5
    moments = wy * phi_fine
    out_pos = np.arange(nxL) * ref

    P_pos = ft_pwlinear(phi_values, 0.0, h, k_pos)
    P_neg = np.empty_like(P_pos)
    P_neg[0] = P_pos[0]
    P_neg[1:] = ft_pwlinear(phi_values, 0.0, h, -k_pos[1:])

    S = np.empty(nk, dtype=complex)
    Dp = np.empty(nk, dtype=complex)
    Dm = np.empty(nk, dtype=complex)
    d_out = np.empty((nk, nxL), dtype=complex)
    for lo in range(0, nk, _K_CHUNK):
        block = _jost_block(ctx.potential, k_pos[lo:lo + _K_CHUNK], y_fine)
        S[lo:lo + _K_CHUNK] = block.S_pos
        Dp[lo:lo + _K_CHUNK] = block.d_pos @ moments
        Dm[lo:lo + _K_CHUNK] = np.conj(block.d_pos) @ moments
        d_out[lo:lo + _K_CHUNK] = block.d_pos[:, out_pos]
    spec = (k_pos, S, S - 1.0, P_pos, P_neg, Dp, Dm, d_out, nxL)
    if len(ctx.tables) > 3:
        ctx.tables.clear()
    ctx.tables[key] = spec
    return spec
