"""Two-step discrete forward model and its adjoint building blocks.

Step one solves the volume multiple-scattering equation
``u = u_in + G (f . u)`` with a matrix-free Krylov method; step two
radiates the contrast source ``f . u`` to the detector plane slab by slab
and applies the microscope pupil/refocus filter. The Jacobian adjoint
needed by reconstruction back-projects a detector residual through the
same chain, including one adjoint Krylov solve.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.sparse.linalg import LinearOperator, bicgstab, cg

from . import _fft
from .grids import ComplexField2D, ComplexField3D, axis_coords
from .greens import convolve_volume
from .incident import angular_spectrum_transfer


class NumericsError(RuntimeError):
    """Non-finite values appeared inside an iterative solve."""


@dataclass
class SolverConfig:
    """Krylov configuration for the total-field (and adjoint) solves."""

    method: str = "bicgstab"  # or "cg-normal"
    tol: float = 1e-6
    max_iter: int = 500
    warm_start: np.ndarray | None = None

    def __post_init__(self):
        if self.method not in ("bicgstab", "cg-normal"):
            raise ValueError(f"unknown solver method {self.method!r}")
        if not 0.0 < self.tol < 1.0:
            raise ValueError("tolerance must lie in (0, 1)")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass(frozen=True)
class SensorModel:
    """Pupil filter and optional free-space refocus at the detector."""

    na: float
    wavelength: float
    pitch: float
    defocus: float = 0.0
    pupil: str = "ideal-disk"  # or "none"
    k_b: float = 0.0  # background wavenumber used by the refocus transfer

    def __post_init__(self):
        if self.pupil not in ("ideal-disk", "none"):
            raise ValueError(f"unknown pupil kind {self.pupil!r}")
        if self.pupil == "ideal-disk" and self.na <= 0:
            raise ValueError("numerical aperture must be positive")
        if self.k_b == 0.0:
            object.__setattr__(self, "k_b", 2.0 * np.pi / self.wavelength)


@dataclass
class ForwardState:
    """Result of a total-field solve."""

    u: ComplexField3D
    source: ComplexField3D  # contrast source f . u
    iterations: int
    residual: float
    converged: bool


def _green_op(kernel, f_values, adjoint=False):
    """Matrix-free I - G diag(f) (or its adjoint I - diag(f) G*)."""
    shape = tuple(kernel.n)
    size = int(np.prod(shape))

    if not adjoint:
        def mv(x):
            v = x.reshape(shape)
            return (v - convolve_volume(kernel, f_values * v)).ravel()
    else:
        def mv(x):
            v = x.reshape(shape)
            return (v - f_values * convolve_volume(kernel, v, adjoint=True)).ravel()

    return LinearOperator((size, size), matvec=mv, dtype=np.complex128)


def _krylov_solve(op, op_adj, b, cfg):
    """Solve op(x) = b; returns (x, iterations, relative residual)."""
    x0 = None if cfg.warm_start is None else np.asarray(cfg.warm_start).ravel()
    counter = {"n": 0}

    def cb(_):
        counter["n"] += 1

    if cfg.method == "bicgstab":
        x, _ = bicgstab(op, b, x0=x0, rtol=cfg.tol, atol=0.0,
                        maxiter=cfg.max_iter, callback=cb)
    else:
        normal = LinearOperator(
            op.shape, matvec=lambda v: op_adj.matvec(op.matvec(v)), dtype=op.dtype
        )
        rhs = op_adj.matvec(b)
        x, _ = cg(normal, rhs, x0=x0, rtol=cfg.tol**2, atol=0.0,
                  maxiter=cfg.max_iter, callback=cb)
    if not np.all(np.isfinite(x)):
        raise NumericsError("solver produced non-finite values")
    res = np.linalg.norm(op.matvec(x) - b) / np.linalg.norm(b)
    return x, counter["n"], float(res)


def solve_total_field(f, u_in, kernel, cfg=None):
    """Total field inside the volume for one incident field.

    Applies the scattering operator only through FFT convolutions and
    elementwise products; the system matrix is never formed. On
    non-convergence the best iterate is returned with ``converged=False``
    so that callers tolerant of inexact solves can proceed.
    """
    cfg = cfg or SolverConfig()
    geometry = f.geometry
    if u_in.geometry is not geometry and u_in.geometry != geometry:
        raise ValueError("potential and incident field use different geometries")

    if not np.any(f.values):
        u = ComplexField3D(u_in.values.copy(), geometry)
        src = ComplexField3D(np.zeros(geometry.n, dtype=np.complex128), geometry)
        return ForwardState(u, src, 0, 0.0, True)

    op = _green_op(kernel, f.values)
    op_adj = _green_op(kernel, f.values, adjoint=True)
    x, iters, res = _krylov_solve(op, op_adj, u_in.values.ravel(), cfg)
    u = x.reshape(geometry.n)
    return ForwardState(
        ComplexField3D(u, geometry),
        ComplexField3D(f.values * u, geometry),
        iters,
        res,
        res <= cfg.tol,
    )


class PlaneRadiator:
    """Slab-summed aperiodic convolution onto the detector plane.

    Per axial slab the free-space kernel at that slab's axial offset is
    sampled in space (smooth: the plane lies outside the volume) and the
    2D convolution runs on a zero-padded FFT grid large enough to keep
    every retained output alias-free. Transforms of the per-slab kernels
    depend only on the geometry and are precomputed once.
    """

    def __init__(self, geometry):
        self.geometry = geometry
        n_ax, n1, n2 = geometry.n
        q = geometry.pitch_ratio
        m_full = geometry.m * q
        self.m_full = m_full
        self.fft_shape = (
            _fft.next_fast_len(m_full + n1 - 1),
            _fft.next_fast_len(m_full + n2 - 1),
        )
        h = geometry.spacing
        off1 = (np.arange(m_full + n1 - 1) - (m_full // 2 + n1 // 2 - 1)) * h
        off2 = (np.arange(m_full + n2 - 1) - (m_full // 2 + n2 // 2 - 1)) * h
        z = geometry.coords(0)
        dz = geometry.x_gamma - z
        if np.any(dz <= 0):
            raise ValueError("detector plane intersects the volume")

        r = np.sqrt(off1[:, None] ** 2 + off2[None, :] ** 2 + dz[:, None, None] ** 2)
        kern = np.exp(1j * geometry.k_b * r) / (4.0 * np.pi * r)
        buf = np.zeros((n_ax,) + self.fft_shape, dtype=np.complex128)
        buf[:, : kern.shape[1], : kern.shape[2]] = kern
        self.kernel_hat = _fft.fftn(buf, axes=(1, 2))
        # output window start inside the full linear convolution
        self.win = (n1 - 1, n2 - 1)

    def apply(self, source_values):
        """Field on the detector grid radiated by a volume source (scaled h^3)."""
        g = self.geometry
        n_ax, n1, n2 = g.n
        q = g.pitch_ratio
        buf = np.zeros((n_ax,) + self.fft_shape, dtype=np.complex128)
        buf[:, :n1, :n2] = source_values
        spec = _fft.fftn(buf, axes=(1, 2))
        spec *= self.kernel_hat
        acc = _fft.ifftn(spec.sum(axis=0))
        w0, w1 = self.win
        full = acc[w0 : w0 + self.m_full, w1 : w1 + self.m_full]
        out = full[q - 1 :: q, q - 1 :: q] * g.spacing**3
        return np.ascontiguousarray(out)

    def adjoint(self, det_values):
        """Adjoint map from a detector-plane field back into the volume."""
        g = self.geometry
        n_ax, n1, n2 = g.n
        q = g.pitch_ratio
        up = np.zeros((self.m_full, self.m_full), dtype=np.complex128)
        up[q - 1 :: q, q - 1 :: q] = det_values
        buf = np.zeros(self.fft_shape, dtype=np.complex128)
        w0, w1 = self.win
        buf[w0 : w0 + self.m_full, w1 : w1 + self.m_full] = up
        spec = _fft.fft2(buf)
        slabs = _fft.ifftn(np.conj(self.kernel_hat) * spec, axes=(1, 2))
        return np.ascontiguousarray(slabs[:, :n1, :n2]) * g.spacing**3


@lru_cache(maxsize=4)
def _radiator(geometry):
    return PlaneRadiator(geometry)


def radiate_to_plane(source, geometry=None):
    """Radiate a contrast-source volume to the detector plane."""
    if isinstance(source, ComplexField3D):
        geometry = source.geometry
        values = source.values
    else:
        values = np.asarray(source)
    rad = _radiator(geometry)
    out = rad.apply(values)
    return ComplexField2D(out, geometry.det_pitch, geometry.x_gamma)


def radiate_adjoint(det_field, geometry):
    """Adjoint of radiate_to_plane, detector plane -> volume."""
    values = det_field.values if isinstance(det_field, ComplexField2D) else np.asarray(det_field)
    return _radiator(geometry).adjoint(values)


def _sensor_transfer(sensor, m):
    w1 = 2.0 * np.pi * np.fft.fftfreq(m, d=sensor.pitch)
    w2sq = w1[:, None] ** 2 + w1[None, :] ** 2
    h = angular_spectrum_transfer(np.sqrt(w2sq), sensor.defocus, sensor.k_b)
    if sensor.pupil == "ideal-disk":
        cutoff = 2.0 * np.pi * 2.0 * sensor.na / sensor.wavelength
        h = np.where(w2sq <= cutoff**2, h, 0.0)
    return h


def apply_sensor(det_field, sensor, adjoint=False):
    """Pupil filter plus free-space refocus on the detector grid."""
    values = det_field.values if isinstance(det_field, ComplexField2D) else np.asarray(det_field)
    transfer = _sensor_transfer(sensor, values.shape[0])
    if adjoint:
        transfer = np.conj(transfer)
    out = _fft.ifft2(_fft.fft2(values) * transfer)
    if isinstance(det_field, ComplexField2D):
        return ComplexField2D(out, det_field.pitch, det_field.z_pos)
    return out


def forward_view(f, u_in, kernel, sensor, cfg=None):
    """Scattered field at the detector for one incident field."""
    state = solve_total_field(f, u_in, kernel, cfg)
    y = radiate_to_plane(state.source)
    return apply_sensor(y, sensor), state


def born_forward_view(f, u_in, sensor):
    """Single-scattering (Born) detector field: total field replaced by u_in."""
    src = f.values * u_in.values
    y = radiate_to_plane(ComplexField3D(src, f.geometry))
    return apply_sensor(y, sensor)


def jacobian_adjoint_apply(f, state, kernel, sensor, residual, cfg=None):
    """Real gradient contribution of one view's detector residual.

    Back-projects the residual through the sensor and far-field adjoints,
    solves the adjoint volume system, and combines with the stored total
    field. Returns ``(gradient, info)`` where info carries the adjoint
    solver's iteration count, residual and convergence flag.
    """
    cfg = cfg or SolverConfig()
    geometry = f.geometry
    w = radiate_adjoint(apply_sensor(residual, sensor, adjoint=True), geometry)

    if not np.any(f.values):
        grad = np.real(np.conj(state.u.values) * w)
        return grad, {"iterations": 0, "residual": 0.0, "converged": True}

    op_adj = _green_op(kernel, f.values, adjoint=True)
    op = _green_op(kernel, f.values)
    adj_cfg = SolverConfig(cfg.method, cfg.tol, cfg.max_iter, cfg.warm_start)
    # solve (I - diag(f) G*) psi = f . w
    if adj_cfg.method == "bicgstab":
        x0 = None if adj_cfg.warm_start is None else np.asarray(adj_cfg.warm_start).ravel()
        counter = {"n": 0}

        def cb(_):
            counter["n"] += 1

        psi, _ = bicgstab(op_adj, (f.values * w).ravel(), x0=x0,
                          rtol=adj_cfg.tol, atol=0.0, maxiter=adj_cfg.max_iter,
                          callback=cb)
        iters = counter["n"]
    else:
        psi, iters, _ = _krylov_solve(op_adj, op, (f.values * w).ravel(), adj_cfg)
    if not np.all(np.isfinite(psi)):
        raise NumericsError("adjoint solve produced non-finite values")
    rhs = (f.values * w).ravel()
    res = float(np.linalg.norm(op_adj.matvec(psi) - rhs) / np.linalg.norm(rhs))
    psi = psi.reshape(geometry.n)
    grad = np.real(np.conj(state.u.values) * (w + convolve_volume(kernel, psi, adjoint=True)))
    return grad, {"iterations": iters, "residual": res, "converged": res <= adj_cfg.tol}
