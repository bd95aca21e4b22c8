"""Pure NumPy implementations of the hot kernels.

This module is the reference (fallback) backend. The compiled backend in
``_kernels`` mirrors every function here with the same signature and is
tested against it.
"""
import math

import numpy as np

# Switchover points for the Bessel evaluation.
SERIES_MAX = 4.0
ASYMPTOTIC_MIN = 25.0

_TWO_OVER_PI = 2.0 / math.pi


def _series(order, z):
    # sum_m (-1)^m (z/2)^(2m+order) / (m! (m+order)!)
    q = -0.25 * z * z
    term = np.ones_like(z) if order == 0 else 0.5 * z
    out = term.copy()
    for m in range(1, 40):
        term = term * q / (m * (m + order))
        out = out + term
    return out


def _miller(z):
    # Backward recurrence normalised by J0 + 2 sum J_2k = 1.
    nstart = int(np.max(z)) + 40
    nstart += nstart % 2
    jp1 = np.zeros_like(z)
    jn = np.full_like(z, 1e-300)
    norm = np.zeros_like(z)
    j0 = j1 = None
    for n in range(nstart, 0, -1):
        jm1 = (2.0 * n / z) * jn - jp1
        jp1, jn = jn, jm1
        # jn now holds J_{n-1} (unnormalised)
        if (n - 1) % 2 == 0 and n - 1 > 0:
            norm = norm + 2.0 * jn
        if n - 1 == 1:
            j1 = jn.copy()
        big = np.abs(jn) > 1e250
        if np.any(big):
            s = np.where(big, 1e-250, 1.0)
            jn = jn * s
            jp1 = jp1 * s
            norm = norm * s
            if j1 is not None:
                j1 = j1 * s
    j0 = jn
    norm = norm + j0
    return j0 / norm, j1 / norm


def _asymptotic(order, z):
    # Hankel expansion J_nu(z) = sqrt(2/(pi z)) (P cos chi - Q sin chi)
    mu = 4.0 * order * order
    chi = z - (0.5 * order + 0.25) * math.pi
    p = np.ones_like(z)
    q = np.zeros_like(z)
    term = np.ones_like(z)
    eightz = 8.0 * z
    for k in range(1, 30):
        term = term * (mu - (2 * k - 1) ** 2) / (k * eightz)
        if k % 2 == 1:
            q = q + (term if (k // 2) % 2 == 0 else -term)
        else:
            p = p + (-term if (k // 2) % 2 == 1 else term)
    return np.sqrt(_TWO_OVER_PI / z) * (p * np.cos(chi) - q * np.sin(chi))


def bessel_j01(z):
    """Return ``(J0(z), J1(z))`` for an array of nonnegative arguments."""
    z = np.asarray(z, dtype=float)
    if np.any(z < 0):
        raise ValueError("bessel_j requires z >= 0")
    shape = z.shape
    z = z.ravel()
    j0 = np.empty_like(z)
    j1 = np.empty_like(z)
    small = z < SERIES_MAX
    large = z >= ASYMPTOTIC_MIN
    mid = ~(small | large)
    if np.any(small):
        j0[small] = _series(0, z[small])
        j1[small] = _series(1, z[small])
    if np.any(mid):
        j0[mid], j1[mid] = _miller(z[mid])
    if np.any(large):
        j0[large] = _asymptotic(0, z[large])
        j1[large] = _asymptotic(1, z[large])
    return j0.reshape(shape), j1.reshape(shape)


def remainder(omega, N, beta, apex, h, pts, nodes, weights, deriv):
    """Remainder of the Vekua-transformed exponential and its derivatives.

    Evaluates ``R(x) = -int_0^1 w r J1(w r s) exp(rho(x) ((1-s^2)^N - 1)/h) ds``
    with a fixed Gauss-Legendre rule on [0, 1].

    Returns ``(R, grad, hess)``; ``grad``/``hess`` are None when ``deriv``
    is below 1/2.
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    n = pts.shape[0]
    y1 = pts[:, 0] - apex[0]
    y2 = pts[:, 1] - apex[1]
    zc = y1 + 1j * y2
    r = np.abs(zc)
    rho = beta * zc**N
    R = np.zeros(n, dtype=complex)
    grad = np.zeros((n, 2), dtype=complex) if deriv >= 1 else None
    hess = np.zeros((n, 2, 2), dtype=complex) if deriv >= 2 else None
    if omega == 0.0:
        return R, grad, hess

    s = np.asarray(nodes)[None, :]
    w = np.asarray(weights)[None, :]
    g = (1.0 - s * s) ** N - 1.0
    rr = r[:, None]
    zarg = omega * rr * s
    J0, J1 = bessel_j01(zarg)
    ex = np.exp(rho[:, None] * g / h)
    f = rr * J1
    R = -omega * np.sum(w * f * ex, axis=1)
    if deriv < 1:
        return R, grad, hess

    safe = np.where(r > 0, r, 1.0)
    nvec = np.stack([y1 / safe, y2 / safe], axis=1)
    drho = np.stack([beta * N * zc ** (N - 1), 1j * beta * N * zc ** (N - 1)], axis=1)
    fp = zarg * J0  # d/dr of r J1(w r s)
    gh = g / h
    for j in range(2):
        integrand = fp * nvec[:, j:j + 1] + f * gh * drho[:, j:j + 1]
        grad[:, j] = -omega * np.sum(w * integrand * ex, axis=1)
    if deriv < 2:
        return R, grad, hess

    if N >= 2:
        d2 = beta * N * (N - 1) * zc ** (N - 2)
    else:
        d2 = np.zeros_like(zc)
    ddrho = np.empty((n, 2, 2), dtype=complex)
    ddrho[:, 0, 0] = d2
    ddrho[:, 0, 1] = 1j * d2
    ddrho[:, 1, 0] = 1j * d2
    ddrho[:, 1, 1] = -d2
    fpp = omega * s * J0 - omega * omega * rr * s * s * J1
    inv_r = (1.0 / safe)[:, None]
    for j in range(2):
        for k in range(j, 2):
            nj = nvec[:, j:j + 1]
            nk = nvec[:, k:k + 1]
            djk = 1.0 if j == k else 0.0
            integrand = (
                fpp * nj * nk
                + fp * (djk - nj * nk) * inv_r
                + fp * gh * (nj * drho[:, k:k + 1] + nk * drho[:, j:j + 1])
                + f * gh * gh * drho[:, j:j + 1] * drho[:, k:k + 1]
                + f * gh * ddrho[:, j, k][:, None]
            )
            hess[:, j, k] = -omega * np.sum(w * integrand * ex, axis=1)
            hess[:, k, j] = hess[:, j, k]
    return R, grad, hess


def p1_element_gradients(xy, tri):
    """Constant basis gradients and areas for P1 triangles.

    Returns ``(grads, area)`` with ``grads[e, a, :]`` the gradient of the
    hat function of local node ``a`` on element ``e``.
    """
    p0 = xy[tri[:, 0]]
    p1 = xy[tri[:, 1]]
    p2 = xy[tri[:, 2]]
    det = (p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1]) - (p2[:, 0] - p0[:, 0]) * (p1[:, 1] - p0[:, 1])
    area = 0.5 * det
    grads = np.empty((tri.shape[0], 3, 2))
    grads[:, 0, 0] = p1[:, 1] - p2[:, 1]
    grads[:, 0, 1] = p2[:, 0] - p1[:, 0]
    grads[:, 1, 0] = p2[:, 1] - p0[:, 1]
    grads[:, 1, 1] = p0[:, 0] - p2[:, 0]
    grads[:, 2, 0] = p0[:, 1] - p1[:, 1]
    grads[:, 2, 1] = p1[:, 0] - p0[:, 0]
    grads /= det[:, None, None]
    return grads, area


def elasticity_blocks(grads, area, lam, mu):
    """Element stiffness matrices (6x6, interleaved dofs) for P1 elasticity."""
    ne = grads.shape[0]
    Ke = np.empty((ne, 6, 6))
    gg = np.einsum("eak,ebk->eab", grads, grads)
    for i in range(2):
        for j in range(2):
            blk = lam[:, None, None] * grads[:, :, i, None] * grads[:, None, :, j]
            blk = blk + mu[:, None, None] * grads[:, :, j, None] * grads[:, None, :, i]
            if i == j:
                blk = blk + mu[:, None, None] * gg
            Ke[:, i::2, j::2] = blk * area[:, None, None]
    return Ke
