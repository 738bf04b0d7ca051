"""Pure numpy backend for the two hot kernels.

``jost_reduced_sweep`` integrates the reduced wave system backward from
the support edge for a whole batch of spectral parameters in lockstep
(one adaptive step controller driven by the worst member of the batch),
``picard_sweep`` runs the kernel fixed-point iteration with the double
integral expressed as cumulative sums. The compiled extension mirrors
both signatures exactly; see _backend for selection.
"""

from __future__ import annotations

import numpy as np

from .exceptions import StiffnessError

__all__ = ["jost_reduced_sweep", "picard_sweep"]

# Dormand-Prince 5(4) tableau
_C = (0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0)
_A = (
    (),
    (1.0 / 5.0,),
    (3.0 / 40.0, 9.0 / 40.0),
    (44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0),
    (19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0),
    (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0,
     -5103.0 / 18656.0),
    (35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0,
     11.0 / 84.0),
)
_B5 = (35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0,
       11.0 / 84.0, 0.0)
_E = (71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0,
      -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)

_MIN_STEP_FRAC = 1e-13


def _v_linear(vl, vr, delta, i_lo, i_hi, xi):
    """Potential value at xi, clamped to the cells of the active segment."""
    i = int(xi / delta)
    if i < i_lo:
        i = i_lo
    elif i > i_hi:
        i = i_hi
    frac = xi / delta - i
    return vl[i] + (vr[i] - vl[i]) * frac


def _segment(g, p, k2i, x_hi, x_lo, vl, vr, delta, rtol, atol, h0):
    """Advance the batch from x_hi down to x_lo; returns final step size."""
    span = x_hi - x_lo
    i_lo = int(np.floor(x_lo / delta + 1e-9))
    i_hi = int(np.ceil(x_hi / delta - 1e-9)) - 1
    i_hi = max(i_hi, i_lo)
    x = x_hi
    h = -min(abs(h0), span)
    kg = [None] * 7
    kp = [None] * 7
    while x - x_lo > 1e-14 * max(1.0, x_hi):
        if x + h < x_lo:
            h = x_lo - x
        for s in range(7):
            xs = x + _C[s] * h
            gs = g
            ps = p
            if s:
                arow = _A[s]
                gs = g + h * sum(a * kg[j] for j, a in enumerate(arow) if a)
                ps = p + h * sum(a * kp[j] for j, a in enumerate(arow) if a)
            v = _v_linear(vl, vr, delta, i_lo, i_hi, xs)
            kg[s] = ps
            kp[s] = v * gs - k2i * ps
        g_new = g + h * sum(b * kg[j] for j, b in enumerate(_B5) if b)
        p_new = p + h * sum(b * kp[j] for j, b in enumerate(_B5) if b)
        eg = h * sum(e * kg[j] for j, e in enumerate(_E) if e)
        ep = h * sum(e * kp[j] for j, e in enumerate(_E) if e)
        sc_g = atol + rtol * np.maximum(np.abs(g), np.abs(g_new))
        sc_p = atol + rtol * np.maximum(np.abs(p), np.abs(p_new))
        err = max(np.max(np.abs(eg) / sc_g), np.max(np.abs(ep) / sc_p))
        if err <= 1.0:
            x += h
            g, p = g_new, p_new
            fac = 5.0 if err == 0.0 else min(5.0, 0.9 * err ** -0.2)
            h *= fac
        else:
            h *= max(0.2, 0.9 * err ** -0.2)
        if abs(h) < _MIN_STEP_FRAC * max(1.0, abs(x)):
            raise StiffnessError(
                "step size collapsed at x = %.6g" % x)
    return g, p, h


def jost_reduced_sweep(vl, vr, delta, k_values, x_out,
                       rtol=1e-10, atol=1e-12, hard_nodes=None):
    """Reduced wave amplitudes (g, g') at the requested positions.

    The system g' = q, q' = V g - 2ik q is integrated from the right
    edge of the support (g = 1, q = 0 there) down to each x in ``x_out``.
    V is the piecewise-linear cell reconstruction given by left/right
    values ``vl``/``vr`` on cells of width ``delta``; discontinuity
    positions must be passed as ``hard_nodes`` so no step straddles one.

    Returns complex arrays of shape (len(k_values), len(x_out)).
    """
    vl = np.asarray(vl, dtype=float)
    vr = np.asarray(vr, dtype=float)
    k = np.asarray(k_values, dtype=complex)
    x_out = np.asarray(x_out, dtype=float)
    L = vl.size * delta
    nk, nx = k.size, x_out.size
    g_out = np.empty((nk, nx), dtype=complex)
    p_out = np.empty((nk, nx), dtype=complex)
    if nx == 0 or nk == 0:
        return g_out, p_out

    if np.any(x_out < -1e-12) or np.any(x_out > L + 1e-12):
        raise ValueError("x_out must lie within the support [0, L]")

    order = np.argsort(x_out)[::-1]
    targets = np.clip(x_out[order], 0.0, L)
    breaks = list(targets)
    if hard_nodes is not None:
        breaks.extend(b for b in hard_nodes if 0.0 < b < L)
    breaks = np.unique(np.asarray(breaks, dtype=float))[::-1]

    g = np.ones(nk, dtype=complex)
    p = np.zeros(nk, dtype=complex)
    k2i = 2.0j * k
    kmax = float(np.max(np.abs(k))) if nk else 0.0
    h = 0.05 / max(1.0, kmax)
    x_cur = L
    t_idx = 0
    for b in breaks:
        if b < x_cur - 1e-14 * max(1.0, L):
            g, p, h = _segment(g, p, k2i, x_cur, b, vl, vr, delta,
                               rtol, atol, h)
            x_cur = b
        while t_idx < nx and targets[t_idx] >= x_cur - 1e-12:
            col = order[t_idx]
            g_out[:, col] = g
            p_out[:, col] = p
            t_idx += 1
    return g_out, p_out


def picard_sweep(h0, v_node, delta, tol=1e-10, max_iter=200):
    """Fixed-point iteration for the triangular transformation kernel.

    Axis 0 is the offset variable u, axis 1 the width variable v, both on
    the same lattice of spacing ``delta``; only v <= u is meaningful and
    the returned array is zeroed above that diagonal. ``h0`` is the
    inhomogeneity (a function of u alone), ``v_node`` the potential on the
    lattice with jump nodes already averaged.

    Returns (h, diffs, converged): diffs holds the sup-norm update sizes.
    """
    h0 = np.asarray(h0, dtype=float)
    v_node = np.asarray(v_node, dtype=float)
    n = h0.size - 1
    vpad = np.zeros(2 * n + 1)
    vpad[n:] = v_node
    s = vpad.strides[0]
    vmat = np.lib.stride_tricks.as_strided(vpad[n:], shape=(n + 1, n + 1),
                                           strides=(s, -s), writeable=False)
    iu = np.arange(n + 1)
    tri = iu[None, :] <= iu[:, None]  # v-index <= u-index

    h = np.repeat(h0[:, None], n + 1, axis=1)
    diffs = []
    converged = False
    for _ in range(max_iter):
        prod = vmat * h
        inner = np.cumsum(prod, axis=1)
        inner -= 0.5 * (prod + prod[:, :1])
        inner *= delta
        suff = inner[::-1].cumsum(axis=0)[::-1]
        suff -= 0.5 * (inner + inner[-1:, :])
        suff *= delta
        h_new = h0[:, None] + suff
        diff = float(np.max(np.abs(np.where(tri, h_new - h, 0.0))))
        diffs.append(diff)
        h = h_new
        if diff < tol:
            converged = True
            break
    h = np.where(tri, h, 0.0)
    return h, np.asarray(diffs), converged
