# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: truncated-Green spectrum sampling and the
per-voxel symmetric 3x3 spectral-ball projection.

Must match odtls._accel._ref to float tolerance.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport acos, cos, fabs, sin, sqrt

cnp.import_array()

cdef double ONSHELL_RTOL = 1e-9
cdef double TWO_PI_THIRDS = 2.0943951023931953


def green_spectrum_from_w2(w2, double radius, double k_b):
    """See odtls._accel._ref.green_spectrum_from_w2."""
    if radius <= 0 or k_b <= 0:
        raise ValueError("radius and k_b must be positive")
    w2_arr = np.ascontiguousarray(w2, dtype=np.float64)
    out = np.empty(w2_arr.shape, dtype=np.complex128)

    cdef double[::1] w2v = w2_arr.reshape(-1)
    cdef double complex[::1] ov = out.reshape(-1)
    cdef Py_ssize_t i, npts = w2v.shape[0]
    cdef double w, rw, s, d
    cdef double complex phase = cos(radius * k_b) + 1j * sin(radius * k_b)
    cdef double complex onshell = 1j * (
        radius / (2.0 * k_b) - phase * sin(radius * k_b) / (2.0 * k_b * k_b)
    )
    cdef double kb2 = k_b * k_b
    cdef double window = ONSHELL_RTOL * k_b

    for i in range(npts):
        w = sqrt(w2v[i])
        if fabs(w - k_b) < window:
            ov[i] = onshell
        else:
            rw = radius * w
            s = sin(rw) / rw if rw != 0.0 else 1.0
            d = w2v[i] - kb2
            ov[i] = (1.0 - phase * (cos(rw) + 1j * k_b * radius * s)) / d
    return out


cdef inline double _clip1(double x) nogil:
    if x > 1.0:
        return 1.0
    if x < -1.0:
        return -1.0
    return x


cdef inline double _clip1_deriv(double x) nogil:
    return 1.0 if fabs(x) < 1.0 else 0.0


def project_spectral_ball_sym3(mats):
    """See odtls._accel._ref.project_spectral_ball_sym3.

    Uses closed-form eigenvalues and a Newton divided-difference matrix
    polynomial; the interpolation property makes the result accurate even
    for clustered eigenvalues.
    """
    mats_arr = np.ascontiguousarray(mats, dtype=np.float64)
    if mats_arr.shape[-1] != 3 or mats_arr.shape[-2] != 3:
        raise ValueError("expected (..., 3, 3) input")
    out = np.empty_like(mats_arr)

    cdef double[:, :, ::1] mv = mats_arr.reshape(-1, 3, 3)
    cdef double[:, :, ::1] ov = out.reshape(-1, 3, 3)
    cdef Py_ssize_t n = mv.shape[0], i
    cdef double a11, a22, a33, a12, a13, a23
    cdef double q, p1, p2, p, r, phi, l1, l2, l3
    cdef double b11, b22, b33, b12, b13, b23
    cdef double c0, c1, c2, dd23, g1, g2, g3
    cdef double m1_11, m1_22, m1_33, m2_11, m2_22, m2_33
    cdef double p11, p12, p13, p22, p23, p33
    cdef double scale, tol

    with nogil:
        for i in range(n):
            a11 = mv[i, 0, 0]
            a22 = mv[i, 1, 1]
            a33 = mv[i, 2, 2]
            a12 = 0.5 * (mv[i, 0, 1] + mv[i, 1, 0])
            a13 = 0.5 * (mv[i, 0, 2] + mv[i, 2, 0])
            a23 = 0.5 * (mv[i, 1, 2] + mv[i, 2, 1])

            q = (a11 + a22 + a33) / 3.0
            p1 = a12 * a12 + a13 * a13 + a23 * a23
            p2 = ((a11 - q) * (a11 - q) + (a22 - q) * (a22 - q)
                  + (a33 - q) * (a33 - q) + 2.0 * p1)
            scale = fabs(a11) + fabs(a22) + fabs(a33) + fabs(a12) + fabs(a13) + fabs(a23)

            if p2 <= 1e-30 * (scale * scale + 1e-300):
                # essentially a multiple of the identity
                c0 = _clip1(q)
                c1 = _clip1_deriv(q)
                ov[i, 0, 0] = c0 + c1 * (a11 - q)
                ov[i, 1, 1] = c0 + c1 * (a22 - q)
                ov[i, 2, 2] = c0 + c1 * (a33 - q)
                ov[i, 0, 1] = ov[i, 1, 0] = c1 * a12
                ov[i, 0, 2] = ov[i, 2, 0] = c1 * a13
                ov[i, 1, 2] = ov[i, 2, 1] = c1 * a23
                continue

            p = sqrt(p2 / 6.0)
            b11 = (a11 - q) / p
            b22 = (a22 - q) / p
            b33 = (a33 - q) / p
            b12 = a12 / p
            b13 = a13 / p
            b23 = a23 / p
            r = 0.5 * (b11 * (b22 * b33 - b23 * b23)
                       - b12 * (b12 * b33 - b23 * b13)
                       + b13 * (b12 * b23 - b22 * b13))
            if r > 1.0:
                r = 1.0
            elif r < -1.0:
                r = -1.0
            phi = acos(r) / 3.0
            l3 = q + 2.0 * p * cos(phi)
            l1 = q + 2.0 * p * cos(phi + TWO_PI_THIRDS)
            l2 = 3.0 * q - l1 - l3

            if l1 >= -1.0 and l3 <= 1.0:
                ov[i, 0, 0] = a11
                ov[i, 1, 1] = a22
                ov[i, 2, 2] = a33
                ov[i, 0, 1] = ov[i, 1, 0] = a12
                ov[i, 0, 2] = ov[i, 2, 0] = a13
                ov[i, 1, 2] = ov[i, 2, 1] = a23
                continue

            # Newton form of the matrix function clip(M): interpolates the
            # clipped values at the actual eigenvalues, so clustered
            # eigenvalues stay accurate.
            g1 = _clip1(l1)
            g2 = _clip1(l2)
            g3 = _clip1(l3)
            tol = 1e-300 + 1e-15 * (fabs(l1) + fabs(l3))
            c0 = g1
            c1 = (g2 - g1) / (l2 - l1) if l2 - l1 > tol else _clip1_deriv(0.5 * (l1 + l2))
            dd23 = (g3 - g2) / (l3 - l2) if l3 - l2 > tol else _clip1_deriv(0.5 * (l2 + l3))
            c2 = (dd23 - c1) / (l3 - l1) if l3 - l1 > tol else 0.0

            m1_11 = a11 - l1
            m1_22 = a22 - l1
            m1_33 = a33 - l1
            m2_11 = a11 - l2
            m2_22 = a22 - l2
            m2_33 = a33 - l2

            # P = (M - l1 I)(M - l2 I), symmetric part only
            p11 = m1_11 * m2_11 + a12 * a12 + a13 * a13
            p22 = a12 * a12 + m1_22 * m2_22 + a23 * a23
            p33 = a13 * a13 + a23 * a23 + m1_33 * m2_33
            p12 = 0.5 * ((m1_11 * a12 + a12 * m2_22 + a13 * a23)
                         + (a12 * m2_11 + m1_22 * a12 + a23 * a13))
            p13 = 0.5 * ((m1_11 * a13 + a12 * a23 + a13 * m2_33)
                         + (a13 * m2_11 + a23 * a12 + m1_33 * a13))
            p23 = 0.5 * ((a12 * a13 + m1_22 * a23 + a23 * m2_33)
                         + (a23 * m2_22 + a13 * a12 + m1_33 * a23))

            ov[i, 0, 0] = c0 + c1 * m1_11 + c2 * p11
            ov[i, 1, 1] = c0 + c1 * m1_22 + c2 * p22
            ov[i, 2, 2] = c0 + c1 * m1_33 + c2 * p33
            ov[i, 0, 1] = ov[i, 1, 0] = c1 * a12 + c2 * p12
            ov[i, 0, 2] = ov[i, 2, 0] = c1 * a13 + c2 * p13
            ov[i, 1, 2] = ov[i, 2, 1] = c1 * a23 + c2 * p23

    return out
