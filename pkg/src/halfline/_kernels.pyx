# cython: boundscheck=False, wraparound=False, cdivision=True
# cython: language_level=3
"""Compiled backend for the two hot kernels.

Mirrors _kernels_py exactly in semantics; the integrator here adapts its
step per spectral parameter instead of in lockstep, which is what the
compilation buys (no batch-wide step rejections). See _backend for how
one of the two implementations is chosen at import time.
"""

import numpy as np

cimport cython
from libc.math cimport fabs, floor, ceil, pow

ctypedef double complex zdouble

__all__ = ["jost_reduced_sweep", "picard_sweep"]

cdef double _C1 = 1.0 / 5.0
cdef double _C2 = 3.0 / 10.0
cdef double _C3 = 4.0 / 5.0
cdef double _C4 = 8.0 / 9.0

cdef double _A21 = 1.0 / 5.0
cdef double _A31 = 3.0 / 40.0, _A32 = 9.0 / 40.0
cdef double _A41 = 44.0 / 45.0, _A42 = -56.0 / 15.0, _A43 = 32.0 / 9.0
cdef double _A51 = 19372.0 / 6561.0, _A52 = -25360.0 / 2187.0
cdef double _A53 = 64448.0 / 6561.0, _A54 = -212.0 / 729.0
cdef double _A61 = 9017.0 / 3168.0, _A62 = -355.0 / 33.0
cdef double _A63 = 46732.0 / 5247.0, _A64 = 49.0 / 176.0
cdef double _A65 = -5103.0 / 18656.0
cdef double _B1 = 35.0 / 384.0, _B3 = 500.0 / 1113.0, _B4 = 125.0 / 192.0
cdef double _B5c = -2187.0 / 6784.0, _B6 = 11.0 / 84.0
cdef double _E1 = 71.0 / 57600.0, _E3 = -71.0 / 16695.0, _E4 = 71.0 / 1920.0
cdef double _E5 = -17253.0 / 339200.0, _E6 = 22.0 / 525.0, _E7 = -1.0 / 40.0

cdef double _MIN_STEP_FRAC = 1e-13


cdef inline double _v_lin(const double[::1] vl, const double[::1] vr,
                          double delta, Py_ssize_t i_lo, Py_ssize_t i_hi,
                          double xi) noexcept nogil:
    cdef Py_ssize_t i = <Py_ssize_t>(xi / delta)
    if i < i_lo:
        i = i_lo
    elif i > i_hi:
        i = i_hi
    return vl[i] + (vr[i] - vl[i]) * (xi / delta - i)


cdef inline double _zabs(zdouble z) noexcept nogil:
    cdef double re = z.real, im = z.imag
    return (re * re + im * im) ** 0.5


cdef int _seg(zdouble* gio, zdouble* pio, zdouble k2i,
              double x_hi, double x_lo,
              const double[::1] vl, const double[::1] vr, double delta,
              double rtol, double atol, double* hio) noexcept nogil:
    cdef double span = x_hi - x_lo
    cdef Py_ssize_t i_lo = <Py_ssize_t>floor(x_lo / delta + 1e-9)
    cdef Py_ssize_t i_hi = <Py_ssize_t>ceil(x_hi / delta - 1e-9) - 1
    if i_hi < i_lo:
        i_hi = i_lo
    cdef double x = x_hi
    cdef double h = -min(fabs(hio[0]), span)
    cdef zdouble g = gio[0], p = pio[0]
    cdef zdouble g1, p1, g2, p2, g3, p3, g4, p4, g5, p5, g6, p6
    cdef zdouble kg1, kg2, kg3, kg4, kg5, kg6, kg7
    cdef zdouble kp1, kp2, kp3, kp4, kp5, kp6, kp7
    cdef zdouble gn, pn, eg, ep
    cdef double v, err, sg, sp, fac
    while x - x_lo > 1e-14 * max(1.0, x_hi):
        if x + h < x_lo:
            h = x_lo - x
        v = _v_lin(vl, vr, delta, i_lo, i_hi, x)
        kg1 = p
        kp1 = v * g - k2i * p

        g1 = g + h * (_A21 * kg1)
        p1 = p + h * (_A21 * kp1)
        v = _v_lin(vl, vr, delta, i_lo, i_hi, x + _C1 * h)
        kg2 = p1
        kp2 = v * g1 - k2i * p1

        g2 = g + h * (_A31 * kg1 + _A32 * kg2)
        p2 = p + h * (_A31 * kp1 + _A32 * kp2)
        v = _v_lin(vl, vr, delta, i_lo, i_hi, x + _C2 * h)
        kg3 = p2
        kp3 = v * g2 - k2i * p2

        g3 = g + h * (_A41 * kg1 + _A42 * kg2 + _A43 * kg3)
        p3 = p + h * (_A41 * kp1 + _A42 * kp2 + _A43 * kp3)
        v = _v_lin(vl, vr, delta, i_lo, i_hi, x + _C3 * h)
        kg4 = p3
        kp4 = v * g3 - k2i * p3

        g4 = g + h * (_A51 * kg1 + _A52 * kg2 + _A53 * kg3 + _A54 * kg4)
        p4 = p + h * (_A51 * kp1 + _A52 * kp2 + _A53 * kp3 + _A54 * kp4)
        v = _v_lin(vl, vr, delta, i_lo, i_hi, x + _C4 * h)
        kg5 = p4
        kp5 = v * g4 - k2i * p4

        g5 = g + h * (_A61 * kg1 + _A62 * kg2 + _A63 * kg3 + _A64 * kg4
                      + _A65 * kg5)
        p5 = p + h * (_A61 * kp1 + _A62 * kp2 + _A63 * kp3 + _A64 * kp4
                      + _A65 * kp5)
        v = _v_lin(vl, vr, delta, i_lo, i_hi, x + h)
        kg6 = p5
        kp6 = v * g5 - k2i * p5

        gn = g + h * (_B1 * kg1 + _B3 * kg3 + _B4 * kg4 + _B5c * kg5
                      + _B6 * kg6)
        pn = p + h * (_B1 * kp1 + _B3 * kp3 + _B4 * kp4 + _B5c * kp5
                      + _B6 * kp6)
        kg7 = pn
        kp7 = v * gn - k2i * pn

        eg = h * (_E1 * kg1 + _E3 * kg3 + _E4 * kg4 + _E5 * kg5
                  + _E6 * kg6 + _E7 * kg7)
        ep = h * (_E1 * kp1 + _E3 * kp3 + _E4 * kp4 + _E5 * kp5
                  + _E6 * kp6 + _E7 * kp7)
        sg = atol + rtol * max(_zabs(g), _zabs(gn))
        sp = atol + rtol * max(_zabs(p), _zabs(pn))
        err = max(_zabs(eg) / sg, _zabs(ep) / sp)
        if err <= 1.0:
            x += h
            g = gn
            p = pn
            fac = 5.0 if err == 0.0 else min(5.0, 0.9 * pow(err, -0.2))
            h *= fac
        else:
            h *= max(0.2, 0.9 * pow(err, -0.2))
        if fabs(h) < _MIN_STEP_FRAC * max(1.0, fabs(x)):
            return -1
    gio[0] = g
    pio[0] = p
    hio[0] = h
    return 0


def jost_reduced_sweep(vl, vr, double delta, k_values, x_out,
                       double rtol=1e-10, double atol=1e-12,
                       hard_nodes=None):
    """Reduced wave amplitudes (g, g') at the requested positions.

    Same contract as the pure backend; see _kernels_py.jost_reduced_sweep.
    """
    from .exceptions import StiffnessError

    cdef const double[::1] vl_v = np.ascontiguousarray(vl, dtype=float)
    cdef const double[::1] vr_v = np.ascontiguousarray(vr, dtype=float)
    k_arr = np.ascontiguousarray(k_values, dtype=complex)
    x_arr = np.asarray(x_out, dtype=float)
    cdef double L = vl_v.shape[0] * delta
    cdef Py_ssize_t nk = k_arr.shape[0], nx = x_arr.shape[0]
    g_out = np.empty((nk, nx), dtype=complex)
    p_out = np.empty((nk, nx), dtype=complex)
    if nx == 0 or nk == 0:
        return g_out, p_out
    if np.any(x_arr < -1e-12) or np.any(x_arr > L + 1e-12):
        raise ValueError("x_out must lie within the support [0, L]")

    order_arr = np.argsort(x_arr)[::-1].copy()
    targets_arr = np.clip(x_arr[order_arr], 0.0, L)
    br = list(targets_arr)
    if hard_nodes is not None:
        br.extend(b for b in hard_nodes if 0.0 < b < L)
    breaks_arr = np.unique(np.asarray(br, dtype=float))[::-1].copy()

    cdef Py_ssize_t[::1] order = np.ascontiguousarray(order_arr,
                                                      dtype=np.intp)
    cdef double[::1] targets = np.ascontiguousarray(targets_arr)
    cdef double[::1] breaks = np.ascontiguousarray(breaks_arr)
    cdef zdouble[::1] kv = k_arr
    cdef zdouble[:, ::1] gv = g_out
    cdef zdouble[:, ::1] pv = p_out
    cdef Py_ssize_t nb = breaks.shape[0]
    cdef Py_ssize_t ik, t_idx, ib
    cdef zdouble g, p, k2i
    cdef double h, x_cur, b
    cdef int status = 0
    with nogil:
        for ik in range(nk):
            g = 1.0
            p = 0.0
            k2i = 2.0j * kv[ik]
            h = 0.05 / max(1.0, _zabs(kv[ik]))
            x_cur = L
            t_idx = 0
            for ib in range(nb):
                b = breaks[ib]
                if b < x_cur - 1e-14 * max(1.0, L):
                    if _seg(&g, &p, k2i, x_cur, b, vl_v, vr_v, delta,
                            rtol, atol, &h) != 0:
                        status = -1
                        break
                    x_cur = b
                while t_idx < nx and targets[t_idx] >= x_cur - 1e-12:
                    gv[ik, order[t_idx]] = g
                    pv[ik, order[t_idx]] = p
                    t_idx += 1
            if status != 0:
                break
    if status != 0:
        raise StiffnessError("step size collapsed during sweep")
    return g_out, p_out


def picard_sweep(h0, v_node, double delta, double tol=1e-10,
                 int max_iter=200):
    """Fixed-point iteration for the triangular transformation kernel.

    Same contract as the pure backend; see _kernels_py.picard_sweep.
    """
    h0_arr = np.ascontiguousarray(h0, dtype=float)
    vn_arr = np.ascontiguousarray(v_node, dtype=float)
    cdef const double[::1] h0v = h0_arr
    cdef const double[::1] vn = vn_arr
    cdef Py_ssize_t n = h0_arr.shape[0] - 1
    h_arr = np.empty((n + 1, n + 1), dtype=float)
    inner_arr = np.empty((n + 1, n + 1), dtype=float)
    hn_arr = np.empty((n + 1, n + 1), dtype=float)
    suf_arr = np.empty(n + 1, dtype=float)
    cdef double[:, ::1] h = h_arr
    cdef double[:, ::1] inner = inner_arr
    cdef double[:, ::1] hn = hn_arr
    cdef double[::1] suf = suf_arr
    cdef Py_ssize_t i, m, j, it
    cdef double acc, prev, cur, diff, d, vi
    cdef bint converged = False
    diffs = []

    for i in range(n + 1):
        for m in range(n + 1):
            h[i, m] = h0v[i]

    for it in range(max_iter):
        with nogil:
            # inner cumulative trapezoid along the width axis
            for i in range(n + 1):
                prev = vn[i] * h[i, 0]
                acc = 0.0
                inner[i, 0] = 0.0
                for m in range(1, n + 1):
                    if m <= i:
                        cur = vn[i - m] * h[i, m]
                    else:
                        cur = 0.0
                    acc += 0.5 * (prev + cur) * delta
                    inner[i, m] = acc
                    prev = cur
            # suffix trapezoid along the offset axis, rows swept upward
            for j in range(n + 1):
                suf[j] = 0.0
                hn[n, j] = h0v[n]
            for i in range(n - 1, -1, -1):
                for j in range(n + 1):
                    suf[j] += 0.5 * (inner[i + 1, j] + inner[i, j]) * delta
                    hn[i, j] = h0v[i] + suf[j]
            diff = 0.0
            for i in range(n + 1):
                for j in range(i + 1):
                    d = fabs(hn[i, j] - h[i, j])
                    if d > diff:
                        diff = d
            for i in range(n + 1):
                for j in range(n + 1):
                    h[i, j] = hn[i, j]
        diffs.append(diff)
        if diff < tol:
            converged = True
            break

    for i in range(n + 1):
        for j in range(i + 1, n + 1):
            h_arr[i, j] = 0.0
    return h_arr, np.asarray(diffs), converged
