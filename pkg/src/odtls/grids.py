"""Physical and discrete geometry, field containers, unit conventions.

Conventions used throughout the package:

* 3D arrays are C-ordered with the optical (axial) axis first and therefore
  slowest-varying in memory: ``values[axial, t1, t2]``.
* Along each axis of length ``n`` the array position ``i`` carries the grid
  index ``k = i - (n//2 - 1)``, so ``k`` runs over ``[-n/2+1, n/2]`` and the
  physical coordinate is ``x = h*k``; the origin voxel ``k = 0`` sits at
  position ``i = n//2 - 1``.
* All physical quantities are SI (meters, rad/m) in memory; unit suffixes
  exist only at the CLI/config boundary.
"""

from dataclasses import dataclass, field

import numpy as np


def _as_triple(value, name):
    if np.isscalar(value):
        return (value, value, value)
    t = tuple(value)
    if len(t) != 3:
        raise ValueError(f"{name} must be a scalar or a length-3 sequence")
    return t


def grid_indices(n):
    """Grid indices k for array positions 0..n-1 (k in [-n/2+1, n/2])."""
    return np.arange(n) - (n // 2 - 1)


def axis_coords(n, h):
    """Physical coordinates h*k along one axis."""
    return grid_indices(n) * h


def embed_dft(values, padded_shape):
    """Embed a centered-layout array at wrapped DFT positions k mod size.

    The result is laid out so that an unshifted FFT implements the DFT over
    grid indices, matching the index convention above.
    """
    out = np.zeros(padded_shape, dtype=values.dtype)
    out[tuple(slice(0, s) for s in values.shape)] = values
    shifts = tuple(-(s // 2 - 1) for s in values.shape)
    return np.roll(out, shifts, axis=(0, 1, 2)[: values.ndim])


def crop_dft(values, shape):
    """Gather grid indices [-n/2+1, n/2] out of a wrapped DFT-layout array."""
    idx = [
        (np.arange(n) - (n // 2 - 1)) % big
        for n, big in zip(shape, values.shape)
    ]
    return values[np.ix_(*idx)]


@dataclass(frozen=True)
class Geometry:
    """Shared physical/discrete geometry of the volume and the detector.

    :param n: samples per axis of the volume, even; scalar or (axial, t1, t2)
    :param spacing: voxel pitch h (m), identical on all axes
    :param wavelength: vacuum wavelength (m)
    :param eta_b: background refractive index
    :param m: detector samples per axis (even); defaults to transverse n
    :param det_pitch: detector pixel pitch (m), must be an integer multiple
        q*h; defaults to h
    :param x_gamma: axial position of the detector plane (m), beyond the
        axial half-extent of the volume; defaults to the axial side length
    """

    n: tuple
    spacing: float
    wavelength: float
    eta_b: float
    m: int = 0
    det_pitch: float = 0.0
    x_gamma: float = 0.0

    def __post_init__(self):
        n = tuple(int(v) for v in _as_triple(self.n, "n"))
        object.__setattr__(self, "n", n)
        if any(v <= 0 or v % 2 for v in n):
            raise ValueError("samples per axis must be positive and even")
        if self.spacing <= 0 or self.wavelength <= 0:
            raise ValueError("spacing and wavelength must be positive")
        if self.eta_b <= 0:
            raise ValueError("background index must be positive")
        if self.k_b * self.spacing >= np.pi:
            raise ValueError(
                "grid too coarse: k_b*h must stay below pi "
                f"(got {self.k_b * self.spacing:.4f})"
            )
        if self.m == 0:
            object.__setattr__(self, "m", n[1])
        if self.m <= 0 or self.m % 2:
            raise ValueError("detector samples must be positive and even")
        if self.det_pitch == 0.0:
            object.__setattr__(self, "det_pitch", self.spacing)
        ratio = self.det_pitch / self.spacing
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ValueError("detector pitch must be an integer multiple of h")
        if self.m * self.det_pitch < max(self.L[1], self.L[2]) - 1e-12:
            raise ValueError("detector must cover the transverse extent of the volume")
        if self.x_gamma == 0.0:
            object.__setattr__(self, "x_gamma", self.L[0])
        if self.x_gamma <= self.L[0] / 2:
            raise ValueError("detector plane must lie outside the volume")

    @property
    def h(self):
        return self.spacing

    @property
    def L(self):
        """Physical side lengths (axial, t1, t2)."""
        return tuple(v * self.spacing for v in self.n)

    @property
    def k_b(self):
        """Background wavenumber 2*pi*eta_b/lambda (rad/m)."""
        return 2.0 * np.pi * self.eta_b / self.wavelength

    @property
    def pitch_ratio(self):
        """Integer detector-pitch / voxel-pitch ratio q."""
        return int(round(self.det_pitch / self.spacing))

    @property
    def truncation_radius(self):
        """Radius of the Green-kernel truncation ball, the diameter of the volume."""
        return float(np.sqrt(sum(l * l for l in self.L)))

    def coords(self, axis):
        """Physical coordinates along one volume axis (0 = axial)."""
        return axis_coords(self.n[axis], self.spacing)

    def det_coords(self):
        """Transverse coordinates of the detector pixels."""
        return axis_coords(self.m, self.det_pitch)


def _freeze(a):
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ScatteringPotential:
    """Real contrast volume f = k_b^2 (eta^2/eta_b^2 - 1), units rad^2/m^2."""

    values: np.ndarray
    geometry: Geometry
    boundary_support: bool = field(default=False)

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        if v.shape != self.geometry.n:
            raise ValueError(f"potential shape {v.shape} != grid {self.geometry.n}")
        if not np.all(np.isfinite(v)):
            raise ValueError("potential contains non-finite values")
        object.__setattr__(self, "values", _freeze(v))
        # The volume-kernel equivalence assumes supp(f) inside the grid;
        # content on the outermost shell is legal but flagged.
        shell = np.zeros(v.shape, dtype=bool)
        for ax in range(3):
            sl = [slice(None)] * 3
            sl[ax] = [0, -1]
            shell[tuple(sl)] = True
        object.__setattr__(self, "boundary_support", bool(np.any(v[shell] != 0.0)))


@dataclass(frozen=True)
class ComplexField3D:
    """Complex sampled field on the volume grid."""

    values: np.ndarray
    geometry: Geometry

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.complex128)
        if v.shape != self.geometry.n:
            raise ValueError(f"field shape {v.shape} != grid {self.geometry.n}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite values")
        object.__setattr__(self, "values", _freeze(v))


@dataclass(frozen=True)
class ComplexField2D:
    """Complex sampled field on a transverse plane (detector layout)."""

    values: np.ndarray
    pitch: float
    z_pos: float

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.complex128)
        if v.ndim != 2:
            raise ValueError("plane field must be 2D")
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite values")
        if self.pitch <= 0:
            raise ValueError("pitch must be positive")
        object.__setattr__(self, "values", _freeze(v))


def potential_from_ri(ri, geometry):
    """Scattering potential of a refractive-index volume.

    f = k_b^2 (ri^2/eta_b^2 - 1), elementwise; ri below the background is
    legal and yields negative contrast.
    """
    ri = np.asarray(ri, dtype=np.float64)
    if ri.shape != geometry.n:
        raise ValueError(f"ri shape {ri.shape} != grid {geometry.n}")
    if np.any(ri < 0):
        raise ValueError("refractive index must be nonnegative")
    f = geometry.k_b**2 * (ri**2 / geometry.eta_b**2 - 1.0)
    return ScatteringPotential(f, geometry)


def ri_from_potential(f):
    """Refractive-index volume of a scattering potential (inverse map)."""
    kb2 = f.geometry.k_b**2
    arg = f.values / kb2 + 1.0
    if np.any(arg < 0):
        raise ValueError("potential below -k_b^2: no real refractive index")
    return f.geometry.eta_b * np.sqrt(arg)
