"""Closed forms for the free Schrodinger propagator on a lattice.

The free kernel in one dimension is

    f_t(s) = (4 pi i t)^{-1/2} e^{i s^2 / 4t},

a Gaussian with complex width. Its first and second antiderivatives are
expressible through the error function of complex argument, which lets a
piecewise-linear density be propagated exactly: no oscillatory quadrature,
no frequency truncation. Everything here works for t of either sign
(principal branch throughout).
"""

from __future__ import annotations

import numpy as np
from scipy.signal import fftconvolve
from scipy.special import erf

from .exceptions import DomainError

__all__ = [
    "fresnel_scale",
    "free_kernel_1d",
    "fresnel_phi",
    "fresnel_psi",
    "fresnel_pair",
    "fresnel_transform_grid",
    "fresnel_transform_points",
    "fresnel_transform_lattice",
]

_SQRT_PI = np.sqrt(np.pi)


def fresnel_scale(t: float) -> complex:
    """beta with f_t(s) = (beta/sqrt(pi)) e^{-(beta s)^2}; beta = (4it)^{-1/2}."""
    if t == 0.0:
        raise DomainError("free kernel is singular at t = 0")
    return 1.0 / np.sqrt(4.0j * t)


def free_kernel_1d(t: float, s) -> np.ndarray:
    """Whole-line free propagator kernel f_t(s)."""
    beta = fresnel_scale(t)
    s = np.asarray(s, dtype=float)
    return (beta / _SQRT_PI) * np.exp(-((beta * s) ** 2))


def fresnel_phi(t: float, tau) -> np.ndarray:
    """First antiderivative: d/dtau fresnel_phi = f_t(tau), odd, -> 1/2."""
    beta = fresnel_scale(t)
    return 0.5 * erf(beta * np.asarray(tau, dtype=complex))


def fresnel_psi(t: float, tau) -> np.ndarray:
    """Second antiderivative of f_t vanishing with zero slope at tau = 0.

    fresnel_psi'' = f_t; grows like |tau|/2 at infinity.
    """
    beta = fresnel_scale(t)
    tau = np.asarray(tau, dtype=complex)
    g = np.exp(-((beta * tau) ** 2))
    return tau * 0.5 * erf(beta * tau) + (g - 1.0) / (2.0 * beta * _SQRT_PI)


def fresnel_pair(t: float, tau) -> tuple[np.ndarray, np.ndarray]:
    """(fresnel_phi, fresnel_psi) at the same points, sharing the erf call."""
    beta = fresnel_scale(t)
    tau = np.asarray(tau, dtype=complex)
    e = erf(beta * tau)
    g = np.exp(-((beta * tau) ** 2))
    phi = 0.5 * e
    psi = tau * phi + (g - 1.0) / (2.0 * beta * _SQRT_PI)
    return phi, psi


def _curvature_masses(g: np.ndarray, d: float) -> np.ndarray:
    # second distributional derivative of the interpolant restricted to
    # its segment: slope jumps at every node, no zero extension implied
    s = np.diff(g) / d
    gamma = np.empty(g.size, dtype=complex)
    gamma[0] = s[0]
    gamma[-1] = -s[-1]
    gamma[1:-1] = s[1:] - s[:-1]
    return gamma


def fresnel_transform_grid(phi_values: np.ndarray, y0: float, d: float,
                           t: float, w0: float, nw: int) -> np.ndarray:
    """F(w) = int f_t(w - y) phi(y) dy on the lattice w = w0 + j*d.

    phi is the piecewise-linear interpolant of ``phi_values`` on
    y = y0 + m*d and the integral runs over that segment only, so
    nonzero endpoint samples are fine (they contribute first-
    antiderivative boundary terms). Exact for the interpolant: two
    integrations by parts trade f_t for its antiderivatives against the
    curvature measure, and the node/evaluation lattices being
    commensurate collapses the sum to one discrete correlation.
    """
    phi = np.asarray(phi_values, dtype=complex)
    if phi.size < 2:
        raise DomainError("need at least two samples")
    if d <= 0.0:
        raise DomainError("lattice step must be positive")
    gamma = _curvature_masses(phi, d)
    M = phi.size - 1
    # needed offsets w_j - y_m = (w0 - y0) + (j - m) d, j-m in [-M, nw-1]
    q = np.arange(-M, nw)
    phi_at, psi_at = fresnel_pair(t, (w0 - y0) + q * d)
    full = fftconvolve(gamma, psi_at)
    out = full[M:M + nw]
    out += phi[0] * phi_at[M:M + nw] - phi[-1] * phi_at[:nw]
    return out


def fresnel_transform_points(phi_values: np.ndarray, y0: float, d: float,
                             t: float, w) -> np.ndarray:
    """Same transform at arbitrary points w; O(len(phi) * len(w))."""
    g = np.asarray(phi_values, dtype=complex)
    if g.size < 2:
        raise DomainError("need at least two samples")
    w = np.atleast_1d(np.asarray(w, dtype=float))
    gamma = _curvature_masses(g, d)
    nodes = y0 + np.arange(g.size) * d
    phi_at, psi_at = fresnel_pair(t, w[:, None] - nodes[None, :])
    return psi_at @ gamma + g[0] * phi_at[:, 0] - g[-1] * phi_at[:, -1]


def fresnel_transform_lattice(phi_values: np.ndarray, y0: float, d: float,
                              t: float, w0: float, nw: int) -> np.ndarray:
    """fresnel_transform_grid for densities with vanishing endpoints.

    Keeps the zero-extension contract: endpoint samples must vanish so
    the interpolant continues by zero without a jump.
    """
    phi = np.asarray(phi_values, dtype=complex)
    if phi.size < 3:
        raise DomainError("need at least three samples")
    tip = max(abs(complex(phi[0])), abs(complex(phi[-1])))
    if tip > 1e-12 * max(1.0, float(np.max(np.abs(phi)))):
        raise DomainError("endpoint samples must vanish (zero extension)")
    return fresnel_transform_grid(phi, y0, d, t, w0, nw)
