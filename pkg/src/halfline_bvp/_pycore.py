"""Pure-numpy implementations of the hot kernels.

Signatures mirror the compiled ``_ckernel`` module exactly; ``backend.py``
chooses one of the two at import time.
"""

import numpy as np

AS_PRINTED = 0
DERIVED = 1

VALUE = 0
DT_PRINTED = 1
DT_ANALYTIC = 2


def interior_coef(mode, s, k, freq, xis, alphas, denom):
    """Per-s coefficient of the homogeneous part of the kernel.

    as_printed: h(s) from the displayed formula (zero once s >= last node).
    derived:    c1(s) from the variation-of-parameters construction.
    """
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    for xi, a in zip(xis, alphas):
        active = xi > s
        if mode == AS_PRINTED:
            arg = freq * (s - xi)
            term = a * np.exp(-k * xi / 2) * (-(k / 2) * np.sin(arg) + freq * np.cos(arg))
        else:
            tau = xi - s
            term = -a * np.exp(-k * tau / 2) * (
                -(k / 2) * np.sin(freq * tau) + freq * np.cos(freq * tau)
            ) / freq
        out += np.where(active, term, 0.0)
    return out / denom


def kernel_matrix(mode, which, t, s, k, freq, xis, alphas, denom):
    """Matrix ``K[i, j]`` of G(t_i, s_j) or one of its t-derivatives."""
    t = np.asarray(t, dtype=float).ravel()[:, None]
    s = np.asarray(s, dtype=float).ravel()[None, :]
    return kernel_values(mode, which, t, s, k, freq, xis, alphas, denom)


def kernel_values(mode, which, t, s, k, freq, xis, alphas, denom):
    """Elementwise kernel values for broadcastable ``t`` and ``s``."""
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    c = interior_coef(mode, s, k, freq, xis, alphas, denom)
    if mode == AS_PRINTED:
        pref = np.exp(-k * (t + s) / 2) / freq
        st, ct = np.sin(freq * t), np.cos(freq * t)
        d = s - t
        if which == VALUE:
            return pref * (-st * c + np.where(s < t, np.sin(freq * d), 0.0))
        cos_scale = 1.0 if which == DT_PRINTED else freq
        part = -(k / 2) * np.sin(freq * d) - cos_scale * np.cos(freq * d)
        return pref * (((k / 2) * st - freq * ct) * c + np.where(s <= t, part, 0.0))
    # derived: G = [t > s] K(t - s) + c1(s) y1(t)
    tau = t - s
    et = np.exp(-k * t / 2)
    if which == VALUE:
        y1 = et * np.sin(freq * t)
        # clip keeps exp() finite on the inactive side
        part = np.exp(-k * np.maximum(tau, 0.0) / 2) * np.sin(freq * tau) / freq
        return np.where(s < t, part, 0.0) + c * y1
    dy1 = et * (-(k / 2) * np.sin(freq * t) + freq * np.cos(freq * t))
    taup = np.maximum(tau, 0.0)
    part = np.exp(-k * taup / 2) * (-(k / 2) * np.sin(freq * tau) + freq * np.cos(freq * tau)) / freq
    return np.where(s <= t, part, 0.0) + c * dy1


def hermite_eval(nodes, u, du, x, decay):
    """Cubic Hermite interpolation with exponential tail beyond the last node.

    Returns ``(value, derivative)`` arrays at ``x``.
    """
    nodes = np.asarray(nodes, dtype=float)
    u = np.asarray(u, dtype=float)
    du = np.asarray(du, dtype=float)
    x = np.asarray(x, dtype=float)
    T = nodes[-1]
    idx = np.clip(np.searchsorted(nodes, x, side="right") - 1, 0, nodes.size - 2)
    x0 = nodes[idx]
    h = nodes[idx + 1] - x0
    z = np.clip((x - x0) / h, 0.0, 1.0)
    z2, z3 = z * z, z * z * z
    h00 = 2 * z3 - 3 * z2 + 1
    h10 = z3 - 2 * z2 + z
    h01 = -2 * z3 + 3 * z2
    h11 = z3 - z2
    val = h00 * u[idx] + h10 * h * du[idx] + h01 * u[idx + 1] + h11 * h * du[idx + 1]
    d00 = (6 * z2 - 6 * z) / h
    d10 = 3 * z2 - 4 * z + 1
    d01 = (-6 * z2 + 6 * z) / h
    d11 = 3 * z2 - 2 * z
    der = d00 * u[idx] + d10 * du[idx] + d01 * u[idx + 1] + d11 * du[idx + 1]
    tail = x > T
    if np.any(tail):
        damp = np.exp(-decay * (x[tail] - T))
        val = np.where(tail, 0.0, val)
        der = np.where(tail, 0.0, der)
        val[tail] = u[-1] * damp
        der[tail] = du[-1] * damp
    return val, der
