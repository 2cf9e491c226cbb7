"""Pure-numpy reference implementations of the accelerated kernels.

Semantics are the contract; the Cython twin must match these to float
tolerance (see tests/test_accel.py).
"""

import numpy as np

# Relative half-width of the window around the on-shell frequency where the
# removable-singularity limit value is substituted for the generic formula.
ONSHELL_RTOL = 1e-9


def green_spectrum_from_w2(w2, radius, k_b):
    """Spectrum of the ball-truncated outgoing Helmholtz kernel.

    Evaluates, for each squared angular frequency in ``w2`` (rad^2/m^2),
    the analytic Fourier transform of exp(j*k_b*r)/(4*pi*r) truncated to a
    ball of the given radius. The expression has a removable singularity at
    ``w == k_b``; inside a narrow relative window the continuity value is
    used instead.

    :param w2: array of squared frequency norms, any shape, float64
    :param radius: truncation radius (m), > 0
    :param k_b: background wavenumber (rad/m), > 0
    :return: complex128 array of the same shape
    """
    if radius <= 0 or k_b <= 0:
        raise ValueError("radius and k_b must be positive")
    w2 = np.asarray(w2, dtype=np.float64)
    w = np.sqrt(w2)
    phase = np.exp(1j * radius * k_b)

    onshell = 1j * (
        radius / (2.0 * k_b) - phase * np.sin(radius * k_b) / (2.0 * k_b**2)
    )

    near = np.abs(w - k_b) < ONSHELL_RTOL * k_b
    denom = np.where(near, 1.0, w2 - k_b**2)
    rw = radius * w
    # sin(x)/x with the x=0 limit
    sinc = np.ones_like(w)
    nz = rw != 0
    sinc[nz] = np.sin(rw[nz]) / rw[nz]
    generic = (1.0 - phase * (np.cos(rw) + 1j * k_b * radius * sinc)) / denom

    out = np.where(near, onshell, generic)
    return np.ascontiguousarray(out, dtype=np.complex128)


def project_spectral_ball_sym3(mats):
    """Project symmetric 3x3 matrices onto the spectral-norm unit ball.

    Eigenvalues are clipped to [-1, 1]; eigenvectors are kept. Input shape
    (..., 3, 3); symmetry of each matrix is assumed, not checked.
    """
    mats = np.asarray(mats, dtype=np.float64)
    vals, vecs = np.linalg.eigh(mats)
    np.clip(vals, -1.0, 1.0, out=vals)
    return np.einsum("...ij,...j,...kj->...ik", vecs, vals, vecs)
