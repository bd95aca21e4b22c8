# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels; same signatures and results as ``_kernels_py``."""
import numpy as np

from libc.math cimport cos, sin, exp, sqrt, fabs, hypot, M_PI

cdef double SERIES_MAX = 4.0
cdef double ASYMPTOTIC_MIN = 25.0


cdef inline double complex _cexp(double complex z) nogil:
    cdef double e = exp(z.real)
    return e * cos(z.imag) + 1j * (e * sin(z.imag))


cdef inline double complex _cpow(double complex z, int n) nogil:
    cdef double complex out = 1.0
    cdef int i
    for i in range(n):
        out = out * z
    return out


cdef double INV_SQ[41]
cdef double INV_PR[41]
cdef double INV_K[31]
cdef int _m
for _m in range(1, 41):
    INV_SQ[_m] = 1.0 / (_m * _m)
    INV_PR[_m] = 1.0 / (_m * (_m + 1))
for _m in range(1, 31):
    INV_K[_m] = 1.0 / _m


cdef inline void _series(double z, double* j0, double* j1) nogil:
    cdef double q = -0.25 * z * z
    cdef double t0 = 1.0, t1 = 0.5 * z
    cdef double s0 = t0, s1 = t1
    cdef int m
    for m in range(1, 40):
        t0 = t0 * q * INV_SQ[m]
        t1 = t1 * q * INV_PR[m]
        s0 += t0
        s1 += t1
        if fabs(t0) < 1e-18 and fabs(t1) < 1e-18:
            break
    j0[0] = s0
    j1[0] = s1


cdef inline void _miller(double z, double* j0, double* j1) nogil:
    cdef int nstart = <int>z + 40
    cdef int n
    cdef double two_over_z = 2.0 / z
    cdef double jp1 = 0.0, jn = 1e-300, jm1, norm = 0.0, J1 = 0.0
    nstart += nstart % 2
    # unrolled in pairs so the parity bookkeeping leaves the loop body
    n = nstart
    while n > 2:
        jm1 = (n * two_over_z) * jn - jp1
        jp1 = jn
        jn = jm1
        n -= 1
        jm1 = (n * two_over_z) * jn - jp1
        jp1 = jn
        jn = jm1
        norm += 2.0 * jn
        n -= 1
        if fabs(jn) > 1e250:
            jn *= 1e-250
            jp1 *= 1e-250
            norm *= 1e-250
    # n == 2: produce J1 then J0
    jm1 = (2 * two_over_z) * jn - jp1
    jp1 = jn
    jn = jm1
    J1 = jn
    jm1 = two_over_z * jn - jp1
    jn = jm1
    norm += jn
    j0[0] = jn / norm
    j1[0] = J1 / norm


cdef inline double _asymptotic(int order, double z) nogil:
    cdef double mu = 4.0 * order * order
    cdef double chi = z - (0.5 * order + 0.25) * M_PI
    cdef double p = 1.0, q = 0.0, term = 1.0, inv8z = 0.125 / z
    cdef int k
    for k in range(1, 30):
        term = term * (mu - (2 * k - 1) * (2 * k - 1)) * INV_K[k] * inv8z
        if k % 2 == 1:
            if (k // 2) % 2 == 0:
                q += term
            else:
                q -= term
        else:
            if (k // 2) % 2 == 1:
                p -= term
            else:
                p += term
        if fabs(term) < 1e-18:
            break
    return sqrt(2.0 / (M_PI * z)) * (p * cos(chi) - q * sin(chi))


cdef inline void _j01(double z, double* j0, double* j1) nogil:
    if z < SERIES_MAX:
        _series(z, j0, j1)
    elif z >= ASYMPTOTIC_MIN:
        j0[0] = _asymptotic(0, z)
        j1[0] = _asymptotic(1, z)
    else:
        _miller(z, j0, j1)


def bessel_j01(z):
    """Return ``(J0(z), J1(z))`` for an array of nonnegative arguments."""
    za = np.asarray(z, dtype=float)
    if np.any(za < 0):
        raise ValueError("bessel_j requires z >= 0")
    shape = za.shape
    cdef const double[::1] zz = np.ascontiguousarray(za.ravel())
    cdef Py_ssize_t n = zz.shape[0], i
    o0 = np.empty(n)
    o1 = np.empty(n)
    cdef double[::1] a0 = o0
    cdef double[::1] a1 = o1
    with nogil:
        for i in range(n):
            _j01(zz[i], &a0[i], &a1[i])
    return o0.reshape(shape), o1.reshape(shape)


def remainder(double omega, int N, beta, apex, double h, pts, nodes, weights, int deriv):
    """Remainder of the Vekua-transformed exponential and its derivatives.

    See ``_kernels_py.remainder``.
    """
    cdef const double[:, ::1] P = np.ascontiguousarray(np.atleast_2d(np.asarray(pts, dtype=float)))
    cdef const double[::1] S = np.ascontiguousarray(nodes, dtype=float)
    cdef const double[::1] W = np.ascontiguousarray(weights, dtype=float)
    cdef Py_ssize_t n = P.shape[0], nq = S.shape[0], i, q
    cdef double complex b = complex(beta)
    cdef double a1 = float(apex[0]), a2 = float(apex[1])
    Ra = np.zeros(n, dtype=complex)
    Ga = np.zeros((n, 2), dtype=complex) if deriv >= 1 else None
    Ha = np.zeros((n, 2, 2), dtype=complex) if deriv >= 2 else None
    if omega == 0.0:
        return Ra, Ga, Ha
    cdef double complex[::1] R = Ra
    cdef double complex[:, ::1] G
    cdef double complex[:, :, ::1] H
    if deriv >= 1:
        G = Ga
    if deriv >= 2:
        H = Ha
    cdef double y1, y2, r, safe, n1, n2, s, w, g, gh, zarg, J0, J1, f, fp, fpp, base
    cdef double complex zc, rho, d1, d2, dr1, dr2, ex, sR, sg1, sg2, s11, s12, s22, wex
    with nogil:
        for i in range(n):
            y1 = P[i, 0] - a1
            y2 = P[i, 1] - a2
            zc = y1 + 1j * y2
            r = hypot(y1, y2)
            rho = b * _cpow(zc, N)
            safe = r if r > 0 else 1.0
            n1 = y1 / safe
            n2 = y2 / safe
            d1 = b * N * _cpow(zc, N - 1)
            dr1 = d1
            dr2 = 1j * d1
            if N >= 2:
                d2 = b * N * (N - 1) * _cpow(zc, N - 2)
            else:
                d2 = 0.0
            sR = 0.0
            sg1 = 0.0
            sg2 = 0.0
            s11 = 0.0
            s12 = 0.0
            s22 = 0.0
            for q in range(nq):
                s = S[q]
                w = W[q]
                base = 1.0 - s * s
                g = 1.0
                for _ in range(N):
                    g = g * base
                g = g - 1.0
                zarg = omega * r * s
                _j01(zarg, &J0, &J1)
                ex = _cexp(rho * g / h)
                f = r * J1
                wex = w * ex
                sR = sR + f * wex
                if deriv >= 1:
                    fp = zarg * J0
                    gh = g / h
                    sg1 = sg1 + (fp * n1 + f * gh * dr1) * wex
                    sg2 = sg2 + (fp * n2 + f * gh * dr2) * wex
                    if deriv >= 2:
                        fpp = omega * s * J0 - omega * omega * r * s * s * J1
                        s11 = s11 + (fpp * n1 * n1 + fp * (1.0 - n1 * n1) / safe + fp * gh * (2.0 * n1 * dr1)
                                     + f * gh * gh * dr1 * dr1 + f * gh * d2) * wex
                        s12 = s12 + (fpp * n1 * n2 + fp * (-n1 * n2) / safe + fp * gh * (n1 * dr2 + n2 * dr1)
                                     + f * gh * gh * dr1 * dr2 + f * gh * (1j * d2)) * wex
                        s22 = s22 + (fpp * n2 * n2 + fp * (1.0 - n2 * n2) / safe + fp * gh * (2.0 * n2 * dr2)
                                     + f * gh * gh * dr2 * dr2 - f * gh * d2) * wex
            R[i] = -omega * sR
            if deriv >= 1:
                G[i, 0] = -omega * sg1
                G[i, 1] = -omega * sg2
            if deriv >= 2:
                H[i, 0, 0] = -omega * s11
                H[i, 0, 1] = -omega * s12
                H[i, 1, 0] = -omega * s12
                H[i, 1, 1] = -omega * s22
    return Ra, Ga, Ha


def p1_element_gradients(xy, tri):
    """Constant basis gradients and areas for P1 triangles."""
    cdef const double[:, ::1] X = np.ascontiguousarray(xy, dtype=float)
    cdef const long long[:, ::1] T = np.ascontiguousarray(tri, dtype=np.int64)
    cdef Py_ssize_t m = T.shape[0], e
    ga = np.empty((m, 3, 2))
    aa = np.empty(m)
    cdef double[:, :, ::1] G = ga
    cdef double[::1] A = aa
    cdef double x0, y0, x1, y1, x2, y2, det
    with nogil:
        for e in range(m):
            x0 = X[T[e, 0], 0]
            y0 = X[T[e, 0], 1]
            x1 = X[T[e, 1], 0]
            y1 = X[T[e, 1], 1]
            x2 = X[T[e, 2], 0]
            y2 = X[T[e, 2], 1]
            det = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
            A[e] = 0.5 * det
            G[e, 0, 0] = (y1 - y2) / det
            G[e, 0, 1] = (x2 - x1) / det
            G[e, 1, 0] = (y2 - y0) / det
            G[e, 1, 1] = (x0 - x2) / det
            G[e, 2, 0] = (y0 - y1) / det
            G[e, 2, 1] = (x1 - x0) / det
    return ga, aa


def elasticity_blocks(grads, area, lam, mu):
    """Element stiffness matrices (6x6, interleaved dofs) for P1 elasticity."""
    cdef const double[:, :, ::1] G = np.ascontiguousarray(grads, dtype=float)
    cdef const double[::1] A = np.ascontiguousarray(area, dtype=float)
    cdef const double[::1] L = np.ascontiguousarray(lam, dtype=float)
    cdef const double[::1] M = np.ascontiguousarray(mu, dtype=float)
    cdef Py_ssize_t m = G.shape[0], e
    cdef int a, bb, i, j
    ka = np.empty((m, 6, 6))
    cdef double[:, :, ::1] K = ka
    cdef double gg, v
    with nogil:
        for e in range(m):
            for a in range(3):
                for bb in range(3):
                    gg = G[e, a, 0] * G[e, bb, 0] + G[e, a, 1] * G[e, bb, 1]
                    for i in range(2):
                        for j in range(2):
                            v = L[e] * G[e, a, i] * G[e, bb, j] + M[e] * G[e, a, j] * G[e, bb, i]
                            if i == j:
                                v = v + M[e] * gg
                            K[e, 2 * a + i, 2 * bb + j] = v * A[e]
    return ka
