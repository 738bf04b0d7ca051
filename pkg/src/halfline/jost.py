"""Jost solutions and the triangular transformation kernel.

Two independent routes to the Jost solution f(k, .) of -u'' + Vu = k^2 u
with f(k,x) ~ e^{ikx} as x -> infinity, Im k >= 0:

* backward integration of the reduced system g = f e^{-ikx} from the
  support edge (the decaying mode is integrated in its growing
  direction, so the sweep is stable on the imaginary axis),
* the representation f(k,x) = e^{ikx} + int_x^inf K(x,z) e^{ikz} dz
  through the real transformation kernel K, itself obtained from the
  fixed-point iteration for h(u,v) = K(u-v, u+v) on a triangular
  lattice.

Their agreement on real and imaginary rays is the package's primary
correctness oracle, and the pointwise kernel bounds with explicit
moment constants are checked on the full lattice by kernel_bound_check.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _backend
from .exceptions import (
    DataError,
    DomainError,
    GridMismatchError,
    IterationError,
)
from .potential import (
    MomentProfile,
    Potential,
    potential_document,
    potential_from_document,
)

__all__ = [
    "JostSolution",
    "KernelField",
    "KernelBoundReport",
    "default_x_grid",
    "solve_jost_ode",
    "solve_jost_batch",
    "solve_marchenko_kernel",
    "jost_from_kernel",
    "kernel_bound_check",
    "load_kernel_field",
]

_X_STEP = 1.0 / 64.0
_X_MARGIN = 10.0
_IM_TOL = 1e-12
# cell width for the sweep's piecewise-linear potential model; linear
# storage, so much finer than the quadratic kernel lattice
_ODE_DELTA = 1.0 / 2048.0


def default_x_grid(potential: Potential, step: float = _X_STEP,
                   x_max: float | None = None) -> np.ndarray:
    """Evaluation grid [0, X_max]; X_max defaults to L_V plus a margin."""
    if x_max is None:
        x_max = potential.L_V + _X_MARGIN
    n = int(round(x_max / step))
    return np.arange(n + 1) * step


def _require_upper_half_plane(k: complex) -> complex:
    k = complex(k)
    if k.imag < -_IM_TOL:
        raise DomainError(
            f"spectral parameter k={k} lies below the real axis")
    return k


@dataclass(frozen=True, eq=False)
class JostSolution:
    """Jost solution samples for one spectral parameter.

    ``f_values[i]`` approximates f(k, x_grid[i]); beyond the support the
    values are the exact plane wave e^{ikx}.
    """

    potential: Potential
    k: complex
    x_grid: np.ndarray
    f_values: np.ndarray
    f_prime_values: np.ndarray

    def at_origin(self) -> tuple:
        if abs(self.x_grid[0]) > 1e-12:
            raise DomainError("solution grid does not include x = 0")
        return complex(self.f_values[0]), complex(self.f_prime_values[0])


def _chunk_by_magnitude(k_values: np.ndarray, max_chunk: int = 512) -> list:
    """Index chunks with bounded |k| spread, for lockstep efficiency."""
    order = np.argsort(np.abs(k_values), kind="stable")
    chunks = []
    start = 0
    mags = np.abs(k_values)[order]
    for i in range(1, order.size + 1):
        if (i == order.size or i - start >= max_chunk
                or mags[i] > 2.0 * max(mags[start], 1e-3)):
            chunks.append(order[start:i])
            start = i
    return chunks


def solve_jost_batch(potential: Potential, k_values, x_grid=None,
                     rtol: float = 1e-10):
    """f and f' for many spectral parameters on a shared grid.

    Returns complex arrays of shape (len(k_values), len(x_grid)). The
    sweep fans out over magnitude-banded chunks of k; results do not
    depend on the worker count.
    """
    k_arr = np.asarray(k_values, dtype=complex)
    for kk in k_arr:
        _require_upper_half_plane(kk)
    if x_grid is None:
        x_grid = default_x_grid(potential)
    x = np.asarray(x_grid, dtype=float)
    if np.any(x < -1e-12):
        raise DomainError("x_grid must lie in [0, infinity)")
    L = potential.L_V

    phase = np.exp(1j * np.outer(k_arr, x))
    f = phase.copy()
    fp = 1j * k_arr[:, None] * phase
    if potential.is_trivial() or k_arr.size == 0:
        return f, fp

    inside = x <= L + 1e-12
    x_in = np.minimum(x[inside], L)
    if x_in.size:
        tab = potential.tabulation(_ODE_DELTA)
        chunks = _chunk_by_magnitude(k_arr)

        def run(idx):
            return _backend.jost_reduced_sweep(
                tab.vl, tab.vr, tab.delta, k_arr[idx], x_in,
                rtol=rtol, atol=1e-12, hard_nodes=tab.hard_nodes)

        results = _backend.parallel_map(run, chunks)
        g = np.empty((k_arr.size, x_in.size), dtype=complex)
        p = np.empty_like(g)
        for idx, (gc, pc) in zip(chunks, results):
            g[idx] = gc
            p[idx] = pc
        ph_in = phase[:, inside]
        f[:, inside] = g * ph_in
        fp[:, inside] = (p + 1j * k_arr[:, None] * g) * ph_in
    return f, fp


def solve_jost_ode(potential: Potential, k: complex, x_grid=None,
                   rtol: float = 1e-10) -> JostSolution:
    """Jost solution by backward integration from the support edge."""
    k = _require_upper_half_plane(k)
    if x_grid is None:
        x_grid = default_x_grid(potential)
    x = np.asarray(x_grid, dtype=float)
    f, fp = solve_jost_batch(potential, [k], x, rtol=rtol)
    return JostSolution(potential=potential, k=k, x_grid=x,
                        f_values=f[0], f_prime_values=fp[0])


# -- transformation kernel -------------------------------------------------


@dataclass(frozen=True, eq=False)
class KernelField:
    """Transformation kernel on a triangular lattice.

    ``h_values[i, j]`` holds h(u, v) at u = i*delta, v = j*delta for
    v <= u <= L_V (zero above the diagonal and beyond the support).
    K lives on the doubled lattice: K(x, z) = h((x+z)/2, (z-x)/2) is
    nonzero only for x <= z <= 2 L_V - x. ``x_max`` is the nominal grid
    extent; everything between 2 L_V and x_max is exactly zero and is
    stored implicitly.
    """

    potential: Potential
    delta: float
    h_values: np.ndarray
    x_max: float
    update_sizes: np.ndarray
    converged: bool

    @property
    def n(self) -> int:
        return self.h_values.shape[0] - 1

    @property
    def delta_K(self) -> float:
        """Lattice step of the (x, z) kernel view (twice the h step)."""
        return 2.0 * self.delta

    @property
    def contraction_ratios(self) -> np.ndarray:
        d = self.update_sizes
        good = d[:-1] > 0
        out = np.full(max(d.size - 1, 0), np.nan)
        out[good] = d[1:][good] / d[:-1][good]
        return out

    def x_nodes(self) -> np.ndarray:
        """K-lattice positions 0, delta_K, ..., L_V."""
        return np.arange(self.n // 2 + 1) * self.delta_K

    @cached_property
    def K_values(self) -> np.ndarray:
        """K on the (x, z) lattice, shape (n/2 + 1, n + 1); zero for z < x."""
        nK = self.n // 2
        K = np.zeros((nK + 1, self.n + 1))
        for ix in range(nK + 1):
            j = np.arange(0, 2 * (nK - ix) + 1)
            K[ix, ix + j] = self.h_values[2 * ix + j, j]
        return K

    def kernel_line(self, x: float) -> tuple:
        """(z nodes, K(x, z)) over the nonzero span [x, 2 L_V - x]."""
        ix = self._x_index(x)
        nK = self.n // 2
        j = np.arange(0, 2 * (nK - ix) + 1)
        z = (ix + j) * self.delta_K
        return z, self.h_values[2 * ix + j, j]

    def _x_index(self, x: float) -> int:
        ix = int(round(x / self.delta_K))
        if abs(x - ix * self.delta_K) > 1e-9 or ix < 0 or ix > self.n // 2:
            raise DomainError(
                f"x={x} is not on the kernel lattice (step {self.delta_K})")
        return ix

    # -- serialization ----------------------------------------------------

    def save(self, path) -> None:
        np.savez_compressed(
            path,
            h_values=self.h_values,
            delta=self.delta,
            x_max=self.x_max,
            update_sizes=self.update_sizes,
            converged=np.asarray(self.converged),
            potential_json=np.asarray(json.dumps(
                potential_document(self.potential))),
        )

    def save_csv(self, path) -> None:
        """Triangular (x, y, K) dump; omitted nodes are exactly zero."""
        nK = self.n // 2
        with open(path, "w") as fh:
            fh.write(f"# X_max={self.x_max!r}\n")
            fh.write(f"# dx={self.delta_K!r}\n")
            fh.write("x,y,K\n")
            for ix in range(nK + 1):
                j = np.arange(0, 2 * (nK - ix) + 1)
                z = (ix + j) * self.delta_K
                vals = self.h_values[2 * ix + j, j]
                x = ix * self.delta_K
                for zz, vv in zip(z.tolist(), vals.tolist()):
                    fh.write(f"{x!r},{zz!r},{vv!r}\n")


def load_kernel_field(path) -> KernelField:
    try:
        with np.load(path, allow_pickle=False) as data:
            pot = potential_from_document(json.loads(str(data["potential_json"])))
            return KernelField(
                potential=pot,
                delta=float(data["delta"]),
                h_values=data["h_values"],
                x_max=float(data["x_max"]),
                update_sizes=data["update_sizes"],
                converged=bool(data["converged"]),
            )
    except (OSError, KeyError, ValueError, json.JSONDecodeError) as exc:
        if isinstance(exc, DataError):
            raise
        raise DataError(f"cannot read kernel file {path}: {exc}") from exc


def solve_marchenko_kernel(potential: Potential, X_max: float | None = None,
                           tol: float = 1e-10, max_iter: int = 200,
                           delta: float | None = None) -> KernelField:
    """Transformation kernel by Picard iteration on the (u, v) triangle.

    The infinite upper limits truncate exactly at L_V (V vanishes
    beyond, and with it every iterate). X_max only records the nominal
    grid extent for consumers; the kernel is identically zero between
    2 L_V and x_max and is not stored there.
    """
    if X_max is None:
        X_max = potential.L_V + _X_MARGIN
    if X_max < potential.L_V:
        raise DomainError("X_max must cover the support")
    tab = potential.tabulation(delta)
    if tab.n % 2 != 0:
        raise GridMismatchError(
            "kernel lattice needs an even cell count over [0, L_V]")
    if not np.all(np.isfinite(tab.cell_abs)):
        raise DataError("potential moments are not finite")

    # h0(u) = (1/2) int_u^inf V: exact suffix sums of signed cell masses
    h0 = np.zeros(tab.n + 1)
    h0[:-1] = 0.5 * np.cumsum(tab.cell_int[::-1])[::-1]

    h, diffs, converged = _backend.picard_sweep(
        h0, tab.v_node, tab.delta, tol=tol, max_iter=max_iter)
    if not converged:
        tail = diffs[-5:]
        ratio = float(np.exp(np.mean(np.log(tail[1:] / tail[:-1])))) \
            if np.all(tail > 0) and tail.size > 1 else float("nan")
        raise IterationError(
            f"kernel iteration did not reach {tol} in {max_iter} steps "
            f"(last update {diffs[-1]:.3e})", contraction_ratio=ratio)
    return KernelField(potential=potential, delta=tab.delta, h_values=h,
                       x_max=float(X_max), update_sizes=diffs,
                       converged=converged)


def jost_from_kernel(kernel: KernelField, k: complex, x: float) -> complex:
    """f(k,x) from the kernel representation, by product quadrature.

    The smooth factor K(x, .) is integrated against e^{ikz} with
    Filon-Simpson panels aligned to the lattice, so the oscillation is
    handled exactly and the kernel's piecewise-quadratic reconstruction
    sets the error.
    """
    k = _require_upper_half_plane(k)
    x = float(x)
    if x > kernel.x_max + 1e-9 or x < 0:
        raise DomainError(f"x={x} outside the kernel grid [0, {kernel.x_max}]")
    L = kernel.potential.L_V
    if x >= L - 1e-12:
        return complex(np.exp(1j * k * x))
    z, vals = kernel.kernel_line(x)
    from ._quad import filon_simpson_kernel_integral

    integral = filon_simpson_kernel_integral(vals, float(z[0]),
                                             kernel.delta_K, k)
    return complex(np.exp(1j * k * x) + integral)


# -- bound checks ------------------------------------------------------------


@dataclass(frozen=True)
class KernelBoundReport:
    """Worst-case margins of the pointwise kernel bounds on the lattice.

    Margins are bound minus |value|: nonnegative means satisfied.
    Derivative margins include the reported finite-difference slack.
    """

    delta: float
    h_margin_min: float
    h_violations: int
    K_margin_min: float
    K_violations: int
    du_margin_min: float
    du_violations: int
    dv_margin_min: float
    dv_violations: int
    fd_slack_max: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.h_violations == 0 and self.K_violations == 0


def kernel_bound_check(kernel: KernelField, moments: MomentProfile,
                       tol: float = 1e-6) -> KernelBoundReport:
    """Check |h| <= q and the K bound at every node; report margins.

    Derivative estimates (centered differences on interior nodes) are
    compared against their bounds up to a discretization slack derived
    from third differences; violations are counted beyond slack + tol.
    """
    if moments.potential is not kernel.potential and (
            moments.potential.kind != kernel.potential.kind
            or moments.potential.L_V != kernel.potential.L_V):
        raise GridMismatchError("moments built from a different potential")
    tab = moments._tab
    if abs(tab.delta - kernel.delta) > 1e-15:
        raise GridMismatchError(
            f"moment lattice {tab.delta} does not match kernel {kernel.delta}")

    h = kernel.h_values
    n = kernel.n
    delta = kernel.delta
    sig = tab.sigma_node
    sig1 = tab.sigma1_node

    iu = np.arange(n + 1)
    tri = iu[None, :] <= iu[:, None]
    # q(u,v) = (1/2) sigma(u) exp(sigma1(u-v) - sigma1(u)) on the triangle
    dvi = iu[:, None] - iu[None, :]
    dvi_c = np.clip(dvi, 0, n)
    q = 0.5 * sig[:, None] * np.exp(sig1[dvi_c] - sig1[:, None])
    h_margin = np.where(tri, q - np.abs(h), np.inf)
    h_margin_min = float(np.min(h_margin))
    h_violations = int(np.sum(h_margin < -tol))

    # K(x,y) bound is the same inequality in (x, y) variables; evaluate on
    # the K lattice, where (x+y)/2 and x are both h-lattice nodes
    nK = n // 2
    K = kernel.K_values
    ix = np.arange(nK + 1)
    iz = np.arange(n + 1)
    mid = (ix[:, None] + iz[None, :])  # (x+y)/2 in h-lattice units
    valid = (iz[None, :] >= ix[:, None]) & (mid <= n)
    mid_c = np.clip(mid, 0, n)
    Kb = 0.5 * sig[mid_c] * np.exp(sig1[np.minimum(2 * ix, n)][:, None]
                                   - sig1[mid_c])
    K_margin = np.where(valid, Kb - np.abs(K), np.inf)
    K_margin_min = float(np.min(K_margin))
    K_violations = int(np.sum(K_margin < -tol))

    # derivative bounds on interior nodes, centered differences
    vmax = np.maximum(np.abs(tab.vl), np.abs(tab.vr))
    vnode_max = np.zeros(n + 1)
    vnode_max[:-1] = vmax
    vnode_max[1:] = np.maximum(vnode_max[1:], vmax)

    du = (h[2:, :] - h[:-2, :]) / (2 * delta)
    slack_u = np.abs(h[3:, :] - 3 * h[2:-1, :] + 3 * h[1:-2, :] - h[:-3, :])
    slack_u = np.pad(slack_u, ((0, 1), (0, 0)), mode="edge") / (6 * delta)
    bound_u = 0.5 * vnode_max[1:-1, None] + sig[dvi_c[1:-1, :]] * q[1:-1, :]
    tri_u = tri[:-2, :]  # lower neighbor u - delta must stay in the triangle
    mu = np.where(tri_u, bound_u + slack_u - np.abs(du), np.inf)
    du_margin_min = float(np.min(mu))
    du_violations = int(np.sum(mu < -tol))

    dv = (h[:, 2:] - h[:, :-2]) / (2 * delta)
    slack_v = np.abs(h[:, 3:] - 3 * h[:, 2:-1] + 3 * h[:, 1:-2] - h[:, :-3])
    slack_v = np.pad(slack_v, ((0, 0), (0, 1)), mode="edge") / (6 * delta)
    bound_v = sig[dvi_c[:, 1:-1]] * q[:, 1:-1]
    tri_v = tri[:, 2:]
    mv = np.where(tri_v, bound_v + slack_v - np.abs(dv), np.inf)
    dv_margin_min = float(np.min(mv))
    dv_violations = int(np.sum(mv < -tol))

    fd_slack_max = float(max(np.max(np.where(tri_u, slack_u, 0.0), initial=0),
                             np.max(np.where(tri_v, slack_v, 0.0), initial=0)))
    return KernelBoundReport(
        delta=delta,
        h_margin_min=h_margin_min, h_violations=h_violations,
        K_margin_min=K_margin_min, K_violations=K_violations,
        du_margin_min=du_margin_min, du_violations=du_violations,
        dv_margin_min=dv_margin_min, dv_violations=dv_violations,
        fd_slack_max=fd_slack_max, tolerance=tol,
    )
