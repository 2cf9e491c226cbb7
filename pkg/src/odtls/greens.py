"""Discretized truncated Green function for the volume operator.

Two interchangeable kernel forms are provided:

* ``SpectralKernel`` samples the analytic spectrum of the ball-truncated
  outgoing Helmholtz kernel on the p-fold padded DFT grid; convolution
  zero-pads the field p-fold.
* ``ReducedKernel`` folds the p-fold kernel onto the twofold grid
  (shift-and-modulate decimation), so convolutions of p-fold accuracy run
  with twofold padding only. Construction never materializes the p-fold
  grid; peak memory is a small multiple of the (2n)^3 result.

Both produce identical convolutions on the retained grid up to rounding.
"""

from dataclasses import dataclass

import numpy as np

from . import _fft
from ._accel import green_spectrum_from_w2
from .grids import ComplexField3D, crop_dft, embed_dft

DEFAULT_PADDING = 4
# refuse spectral-kernel allocations beyond this unless overridden
DEFAULT_MEMORY_LIMIT = 4 << 30


def truncated_green_spectrum(omega_norm, L, k_b):
    """Spectrum of the Green function truncated to a ball of radius sqrt(3)*L.

    Returns the analytic transform at frequency norm ``omega_norm``
    (rad/m); the removable singularity at ``omega_norm == k_b`` is filled
    with its continuity value. Scalar in, scalar out; arrays broadcast.
    """
    if L <= 0 or k_b <= 0:
        raise ValueError("L and k_b must be positive")
    w = np.asarray(omega_norm, dtype=np.float64)
    if np.any(w < 0):
        raise ValueError("frequency norm must be nonnegative")
    out = green_spectrum_from_w2(w * w, np.sqrt(3.0) * L, k_b)
    return complex(out) if np.isscalar(omega_norm) else out


def _dft_component_freqs(n_pad, step):
    """Frequency components step*q in DFT order, q in [-n_pad/2+1, n_pad/2]."""
    j = np.arange(n_pad)
    q = np.where(j <= n_pad // 2, j, j - n_pad)
    return step * q


@dataclass(frozen=True)
class SpectralKernel:
    """Analytic kernel spectrum sampled on the p-fold padded DFT grid."""

    samples: np.ndarray  # complex128, shape (n*p,)*3, DFT layout
    n: tuple
    p: int
    spacing: float
    k_b: float

    @property
    def padded_shape(self):
        return tuple(v * self.p for v in self.n)


@dataclass(frozen=True)
class ReducedKernel:
    """DFT of the folded (memory-reduced) kernel on the twofold grid."""

    spectral_folded: np.ndarray  # complex128, shape (2n,)*3, DFT layout
    n: tuple
    p: int
    spacing: float
    k_b: float

    @property
    def padded_shape(self):
        return tuple(2 * v for v in self.n)


def _check_geometry(geometry, p):
    if int(p) != p or p < 2:
        raise ValueError("padding factor must be an integer >= 2")
    # k_b*h < pi is enforced by Geometry itself; re-check defensively for
    # callers that constructed geometry through other means.
    if geometry.k_b * geometry.spacing >= np.pi:
        raise ValueError("geometry violates k_b*h < pi")


def build_spectral_kernel(geometry, p=DEFAULT_PADDING, memory_limit=DEFAULT_MEMORY_LIMIT):
    """Sample the truncated-Green spectrum on the p-fold padded grid.

    The sample at padded-grid index q is the analytic spectrum at
    ``delta*q`` with per-axis frequency step ``delta_i = 2*pi/(p*L_i)``.
    Refuses to allocate beyond ``memory_limit`` bytes; use the reduced
    kernel for large volumes.
    """
    _check_geometry(geometry, p)
    p = int(p)
    shape = tuple(v * p for v in geometry.n)
    nbytes = 16 * shape[0] * shape[1] * shape[2]
    if nbytes > memory_limit:
        raise MemoryError(
            f"spectral kernel of shape {shape} needs {nbytes/2**30:.1f} GiB; "
            "build_reduced_kernel avoids the p-fold grid"
        )
    radius = geometry.truncation_radius
    steps = [2.0 * np.pi / (p * Li) for Li in geometry.L]
    f0, f1, f2 = (_dft_component_freqs(s, st) for s, st in zip(shape, steps))
    w2_t = f1[:, None] ** 2 + f2[None, :] ** 2
    samples = np.empty(shape, dtype=np.complex128)
    for i in range(shape[0]):
        samples[i] = green_spectrum_from_w2(f0[i] ** 2 + w2_t, radius, geometry.k_b)
    return SpectralKernel(samples, geometry.n, p, geometry.spacing, geometry.k_b)


def _decimated_spectrum_slice(geometry, p, shift):
    """Samples of the kernel spectrum at p-grid indices (p/2)*q - s, q on the 2n grid."""
    radius = geometry.truncation_radius
    freqs = []
    for ax in range(3):
        n_i = geometry.n[ax]
        step = 2.0 * np.pi / (p * geometry.L[ax])
        two_n = 2 * n_i
        j = np.arange(two_n)
        q = np.where(j <= n_i, j, j - two_n)
        t = ((p // 2) * q - shift[ax]) % (n_i * p)
        c = np.where(t <= n_i * p // 2, t, t - n_i * p)
        freqs.append(step * c)
    f0, f1, f2 = freqs
    w2_t = f1[:, None] ** 2 + f2[None, :] ** 2
    out = np.empty(tuple(2 * v for v in geometry.n), dtype=np.complex128)
    for i in range(out.shape[0]):
        out[i] = green_spectrum_from_w2(f0[i] ** 2 + w2_t, radius, geometry.k_b)
    return out


def _modulation(n_axis, p, s_axis):
    """exp(-2j*pi*k*s/(n*p)) over the 2n grid, k in [-n+1, n]."""
    two_n = 2 * n_axis
    j = np.arange(two_n)
    k = np.where(j <= n_axis, j, j - two_n)
    return np.exp(-2j * np.pi * k * s_axis / (n_axis * p))


def build_reduced_kernel(geometry, p=DEFAULT_PADDING, naive=False):
    """Fold the p-fold kernel onto the twofold grid.

    Accumulates, shift by shift, the inverse DFT of a decimated slice of
    the p-grid spectrum modulated by the matching phase ramp; stores the
    forward DFT of the folded kernel. ``naive=True`` builds the same
    kernel by materializing the full p-fold grid (debug/equivalence path).
    """
    _check_geometry(geometry, p)
    p = int(p)
    if p % 2:
        raise ValueError("reduced kernel requires an even padding factor")

    if naive:
        full = build_spectral_kernel(geometry, p)
        dense = _fft.ifftn(full.samples)
        folded = crop_dft(dense, tuple(2 * v for v in geometry.n))
        # crop_dft gathers grid indices [-n+1, n] of the 2n target, which
        # are exactly the representatives the folded kernel lives on
        return ReducedKernel(
            _fft.fftn(embed_dft_identity(folded)),
            geometry.n, p, geometry.spacing, geometry.k_b,
        )

    shape = tuple(2 * v for v in geometry.n)
    folded = np.zeros(shape, dtype=np.complex128)
    half = p // 2
    weight = 8.0 / p**3
    for s0 in range(half):
        for s1 in range(half):
            for s2 in range(half):
                term = _fft.ifftn(_decimated_spectrum_slice(geometry, p, (s0, s1, s2)))
                if (s0, s1, s2) != (0, 0, 0):
                    term *= _modulation(geometry.n[0], p, s0)[:, None, None]
                    term *= _modulation(geometry.n[1], p, s1)[None, :, None]
                    term *= _modulation(geometry.n[2], p, s2)[None, None, :]
                folded += weight * term
    return ReducedKernel(
        _fft.fftn(folded), geometry.n, p, geometry.spacing, geometry.k_b
    )


def embed_dft_identity(folded_centered):
    """Re-wrap a crop_dft result of the full 2n grid back into DFT layout."""
    shape = folded_centered.shape
    shifts = tuple(-(s // 2 - 1) for s in shape)
    return np.roll(folded_centered, shifts, axis=(0, 1, 2))


def _kernel_spectrum(kernel):
    if isinstance(kernel, SpectralKernel):
        return kernel.samples
    if isinstance(kernel, ReducedKernel):
        return kernel.spectral_folded
    raise TypeError(f"not a kernel: {type(kernel)!r}")


def convolve_volume(kernel, v, adjoint=False, single_precision=False):
    """Apply the discrete Green operator to a volume.

    Zero-pads to the kernel's padded grid, multiplies in the DFT domain
    and crops back to the retained grid. ``adjoint=True`` applies the
    conjugate-spectrum (adjoint) operator. ``single_precision`` runs the
    transforms in complex64; the kernel itself is always built in double.
    """
    field = isinstance(v, ComplexField3D)
    values = v.values if field else np.asarray(v)
    if field:
        g = v.geometry
        if g.n != kernel.n or abs(g.spacing - kernel.spacing) > 1e-15 * kernel.spacing:
            raise ValueError("kernel geometry does not match the field")
    elif values.shape != tuple(kernel.n):
        raise ValueError(f"volume shape {values.shape} != kernel grid {kernel.n}")

    spec = _kernel_spectrum(kernel)
    if adjoint:
        spec = np.conj(spec)
    work_dtype = np.complex64 if single_precision else np.complex128
    padded = embed_dft(values.astype(work_dtype, copy=False), kernel.padded_shape)
    out = _fft.ifftn(_fft.fftn(padded) * (spec.astype(work_dtype) if single_precision else spec))
    result = np.ascontiguousarray(crop_dft(out, tuple(kernel.n)), dtype=np.complex128)
    return ComplexField3D(result, v.geometry) if field else result


def save_kernel(path, kernel):
    """Persist a reduced kernel together with its identity key."""
    np.savez_compressed(
        path,
        spectral_folded=kernel.spectral_folded,
        n=np.array(kernel.n, dtype=np.int64),
        p=np.int64(kernel.p),
        spacing=np.float64(kernel.spacing),
        k_b=np.float64(kernel.k_b),
    )


def load_kernel(path, geometry=None, p=None):
    """Load a reduced kernel, optionally checking it against a geometry/p key."""
    with np.load(path) as data:
        kernel = ReducedKernel(
            np.ascontiguousarray(data["spectral_folded"]),
            tuple(int(v) for v in data["n"]),
            int(data["p"]),
            float(data["spacing"]),
            float(data["k_b"]),
        )
    if geometry is not None:
        same = (
            kernel.n == geometry.n
            and abs(kernel.spacing - geometry.spacing) <= 1e-15 * geometry.spacing
            and abs(kernel.k_b - geometry.k_b) <= 1e-12 * geometry.k_b
            and (p is None or kernel.p == int(p))
        )
        if not same:
            raise ValueError("cached kernel does not match the requested geometry")
    return kernel
