# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernel evaluation and Hermite interpolation.

Same signatures and results as ``_pycore``; see that module for the maths.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, sin, cos

cnp.import_array()

cdef enum:
    AS_PRINTED = 0
    VALUE = 0
    DT_PRINTED = 1


cdef inline double _coef(int mode, double s, double k, double freq,
                         const double[::1] xis, const double[::1] alphas,
                         double denom) nogil:
    cdef Py_ssize_t i
    cdef double acc = 0.0, arg, tau
    for i in range(xis.shape[0]):
        if xis[i] > s:
            if mode == AS_PRINTED:
                arg = freq * (s - xis[i])
                acc += alphas[i] * exp(-k * xis[i] / 2) * (-(k / 2) * sin(arg) + freq * cos(arg))
            else:
                tau = xis[i] - s
                acc -= alphas[i] * exp(-k * tau / 2) * (
                    -(k / 2) * sin(freq * tau) + freq * cos(freq * tau)) / freq
    return acc / denom


def interior_coef(int mode, s, double k, double freq, xis, alphas, double denom):
    cdef const double[::1] sv = np.ascontiguousarray(s, dtype=np.float64).ravel()
    cdef const double[::1] xv = np.ascontiguousarray(xis, dtype=np.float64)
    cdef const double[::1] av = np.ascontiguousarray(alphas, dtype=np.float64)
    out = np.empty(sv.shape[0])
    cdef double[::1] ov = out
    cdef Py_ssize_t j
    for j in range(sv.shape[0]):
        ov[j] = _coef(mode, sv[j], k, freq, xv, av, denom)
    return out.reshape(np.shape(s))


def kernel_matrix(int mode, int which, t, s, double k, double freq, xis, alphas, double denom):
    cdef const double[::1] tv = np.ascontiguousarray(t, dtype=np.float64).ravel()
    cdef const double[::1] sv = np.ascontiguousarray(s, dtype=np.float64).ravel()
    cdef const double[::1] xv = np.ascontiguousarray(xis, dtype=np.float64)
    cdef const double[::1] av = np.ascontiguousarray(alphas, dtype=np.float64)
    cdef Py_ssize_t nt = tv.shape[0], ns = sv.shape[0], i, j
    out = np.empty((nt, ns))
    cdef double[:, ::1] ov = out
    cdef double[::1] cs = np.empty(ns)
    cdef double[::1] es = np.empty(ns)
    cdef double ti, sj, c, st, ct, et, d, pref, part, cos_scale, tau
    cos_scale = 1.0 if which == DT_PRINTED else freq
    with nogil:
        for j in range(ns):
            cs[j] = _coef(mode, sv[j], k, freq, xv, av, denom)
            es[j] = exp(-k * sv[j] / 2)
        for i in range(nt):
            ti = tv[i]
            st = sin(freq * ti)
            ct = cos(freq * ti)
            et = exp(-k * ti / 2)
            for j in range(ns):
                sj = sv[j]
                c = cs[j]
                if mode == AS_PRINTED:
                    pref = et * es[j] / freq
                    d = sj - ti
                    if which == VALUE:
                        part = sin(freq * d) if sj < ti else 0.0
                        ov[i, j] = pref * (-st * c + part)
                    else:
                        part = (-(k / 2) * sin(freq * d) - cos_scale * cos(freq * d)) if sj <= ti else 0.0
                        ov[i, j] = pref * (((k / 2) * st - freq * ct) * c + part)
                else:
                    tau = ti - sj
                    if which == VALUE:
                        part = exp(-k * tau / 2) * sin(freq * tau) / freq if sj < ti else 0.0
                        ov[i, j] = part + c * et * st
                    else:
                        part = (exp(-k * tau / 2) * (-(k / 2) * sin(freq * tau)
                                + freq * cos(freq * tau)) / freq) if sj <= ti else 0.0
                        ov[i, j] = part + c * et * (-(k / 2) * st + freq * ct)
    return out


def hermite_eval(nodes, u, du, x, double decay):
    cdef const double[::1] nv = np.ascontiguousarray(nodes, dtype=np.float64)
    cdef const double[::1] uv = np.ascontiguousarray(u, dtype=np.float64)
    cdef const double[::1] dv = np.ascontiguousarray(du, dtype=np.float64)
    xa = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[::1] xv = xa.ravel()
    cdef Py_ssize_t n = nv.shape[0], m = xv.shape[0], q, lo, hi, mid
    val = np.empty(m)
    der = np.empty(m)
    cdef double[::1] vv = val
    cdef double[::1] ddv = der
    cdef double T = nv[n - 1], xq, h, z, z2, z3, damp
    with nogil:
        for q in range(m):
            xq = xv[q]
            if xq > T:
                damp = exp(-decay * (xq - T))
                vv[q] = uv[n - 1] * damp
                ddv[q] = dv[n - 1] * damp
                continue
            lo = 0
            hi = n - 1
            while hi - lo > 1:
                mid = (lo + hi) // 2
                if nv[mid] <= xq:
                    lo = mid
                else:
                    hi = mid
            h = nv[lo + 1] - nv[lo]
            z = (xq - nv[lo]) / h
            if z < 0.0:
                z = 0.0
            elif z > 1.0:
                z = 1.0
            z2 = z * z
            z3 = z2 * z
            vv[q] = ((2 * z3 - 3 * z2 + 1) * uv[lo] + (z3 - 2 * z2 + z) * h * dv[lo]
                     + (-2 * z3 + 3 * z2) * uv[lo + 1] + (z3 - z2) * h * dv[lo + 1])
            ddv[q] = ((6 * z2 - 6 * z) / h * uv[lo] + (3 * z2 - 4 * z + 1) * dv[lo]
                      + (-6 * z2 + 6 * z) / h * uv[lo + 1] + (3 * z2 - 2 * z) * dv[lo + 1])
    shape = np.shape(x)
    return val.reshape(shape), der.reshape(shape)
