"""Quadrature helpers shared across modules.

Three tools live here:

* exact Fourier transforms of piecewise-linear functions on uniform
  lattices (no truncation or discretization error beyond the linear
  interpolant itself),
* Filon-Simpson product integration of lattice samples against e^{ikz}
  for complex k with Im k >= 0 (used by the kernel route to the Jost
  function, where plain trapezoid would cap accuracy),
* a Gaussian-regularized, Richardson-extrapolated evaluator for improper
  oscillatory integrals, used as an independent oracle for the closed
  Fresnel forms.

All routines are pure and thread-safe.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "ft_pwlinear",
    "filon_simpson_kernel_integral",
    "regularized_oscillatory",
    "RICHARDSON_EPS",
    "RICHARDSON_WEIGHTS",
]

# epsilon ladder and weights for eps, eps/2, eps/4 assuming an error
# analytic in eps; the combination cancels the eps and eps^2 terms
RICHARDSON_EPS = (1e-2, 5e-3, 2.5e-3)
RICHARDSON_WEIGHTS = (1.0 / 3.0, -2.0, 8.0 / 3.0)

_CHUNK = 1 << 18  # bound on outer-product sizes in chunked transforms


def ft_pwlinear(values: np.ndarray, y0: float, d: float, z) -> np.ndarray:
    """Exact integral of the piecewise-linear interpolant against e^{izy}.

    ``values`` are samples on y_m = y0 + m*d; the interpolant is integrated
    over its span only (zero outside). ``z`` may be complex with
    Im z >= 0; for arrays the computation is chunked to bound memory.

    Returns F(z) = int phi(y) e^{izy} dy with phi the interpolant.
    """
    phi = np.asarray(values, dtype=complex)
    z_in = np.asarray(z, dtype=complex)
    scalar = z_in.ndim == 0
    z_arr = np.atleast_1d(z_in)
    M = phi.size - 1
    if M < 1:
        out = np.zeros_like(z_arr)
        return out[0] if scalar else out
    y_m = y0 + d * np.arange(M + 1)

    # interior second differences divided by d; endpoint samples and
    # one-sided slopes enter through explicit boundary terms
    c_int = (phi[:-2] - 2.0 * phi[1:-1] + phi[2:]) / d if M >= 2 else None
    s_first = (phi[1] - phi[0]) / d
    s_last = (phi[-1] - phi[-2]) / d

    out = np.empty(z_arr.shape, dtype=complex)
    small = np.abs(z_arr) < 1e-8
    if np.any(small):
        w = np.full(M + 1, d)
        w[0] = w[-1] = 0.5 * d
        mu0 = np.sum(w * phi)
        mu1 = np.sum(w * phi * y_m)
        out[small] = mu0 + 1j * z_arr[small] * mu1
    big = ~small
    if np.any(big):
        zb = z_arr[big]
        res = np.empty(zb.shape, dtype=complex)
        step = max(1, _CHUNK // (M + 1))
        for lo in range(0, zb.size, step):
            zc = zb[lo:lo + step]
            e_first = np.exp(1j * zc * y_m[0])
            e_last = np.exp(1j * zc * y_m[-1])
            zc2 = zc * zc
            val = (phi[-1] * e_last - phi[0] * e_first) / (1j * zc)
            val = val + (s_last * e_last - s_first * e_first) / zc2
            if c_int is not None:
                ph = np.exp(1j * np.outer(zc, y_m[1:-1]))
                val = val - (ph @ c_int) / zc2
            res[lo:lo + step] = val
        out[big] = res
    return out[0] if scalar else out


def _filon_moments(theta: np.ndarray) -> tuple:
    """Normalized panel moments m_p = int_0^2 s^p e^{i theta s} ds."""
    theta = np.asarray(theta, dtype=complex)
    m0 = np.empty(theta.shape, dtype=complex)
    m1 = np.empty_like(m0)
    m2 = np.empty_like(m0)
    small = np.abs(theta) < 0.05
    if np.any(small):
        th = theta[small]
        # Taylor: m_p = sum_j (i th)^j 2^(p+j+1) / (j! (p+j+1))
        for p, target in ((0, m0), (1, m1), (2, m2)):
            acc = np.zeros(th.shape, dtype=complex)
            term = np.ones(th.shape, dtype=complex)
            for j in range(0, 16):
                acc = acc + term * (2.0 ** (p + j + 1)) / (p + j + 1)
                term = term * (1j * th) / (j + 1)
            target[small] = acc
    big = ~small
    if np.any(big):
        th = theta[big]
        ith = 1j * th
        e2 = np.exp(2.0 * ith)
        m0b = (e2 - 1.0) / ith
        m1b = 2.0 * e2 / ith - (e2 - 1.0) / (ith * ith)
        m2b = 4.0 * e2 / ith - 2.0 * m1b / ith
        m0[big], m1[big], m2[big] = m0b, m1b, m2b
    return m0, m1, m2


def filon_simpson_kernel_integral(values: np.ndarray, z0: float, delta: float,
                                  k: complex) -> complex:
    """int f(z) e^{ikz} dz for samples on z0 + j*delta, j = 0..2J.

    The integrand's smooth factor f is reconstructed piecewise
    quadratically on panels of two cells (Filon-Simpson); panels must be
    aligned with f's kinks by the caller. Exact for piecewise-quadratic f,
    stable for complex k with Im k >= 0.
    """
    f = np.asarray(values, dtype=float)
    n = f.size - 1
    if n <= 0:
        return 0.0 + 0.0j
    if n % 2 != 0:
        raise ValueError("Filon-Simpson needs an even number of cells")
    theta = k * delta
    m0, m1, m2 = _filon_moments(np.asarray(theta))
    w0 = delta * (m2 - 3.0 * m1 + 2.0 * m0) / 2.0
    w1 = delta * (2.0 * m1 - m2)
    w2 = delta * (m2 - m1) / 2.0
    j = np.arange(0, n, 2)
    phase = np.exp(1j * k * (z0 + j * delta))
    panel = w0 * f[j] + w1 * f[j + 1] + w2 * f[j + 2]
    return complex(np.sum(phase * panel))


def regularized_oscillatory(g_values: np.ndarray, k_grid: np.ndarray,
                            t: float, prefactor: float = 1.0 / (2.0 * np.pi),
                            eps_set=RICHARDSON_EPS,
                            weights=RICHARDSON_WEIGHTS) -> complex:
    """prefactor * int g(k) e^{-itk^2} dk by Gaussian regularization.

    Evaluates the absolutely convergent integrals with damping e^{-eps k^2}
    on the given dense uniform grid (trapezoid; spectrally accurate for
    analytic decaying integrands) and Richardson-extrapolates eps -> 0
    with the folded weight combination.
    """
    g = np.asarray(g_values, dtype=complex)
    k = np.asarray(k_grid, dtype=float)
    dk = k[1] - k[0]
    damp = np.zeros(k.shape, dtype=float)
    for eps, w in zip(eps_set, weights):
        damp += w * np.exp(-eps * k * k)
    integrand = g * damp * np.exp(-1j * t * k * k)
    total = np.sum(integrand) - 0.5 * (integrand[0] + integrand[-1])
    return complex(prefactor * total * dk)
