"""Periodic grid and Fourier-side linear operators.

Scalar fields are complex arrays of shape ``(N, N, N)``; vector fields carry a
leading component axis, shape ``(3, N, N, N)``.  Arrays are indexed ``[x, y, z]``
and every transform acts on the last three axes.

Normalisation: the forward transform carries the ``1/N**3`` factor, so ``fft``
returns Fourier coefficients and ``ifft`` is the plain synthesis sum.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft as sfft

from .parallel import num_threads

_AXES = (-3, -2, -1)


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform periodic grid on the cube ``[0, L)^3``."""

    N: int
    L: float
    workers: int = field(default_factory=num_threads)

    def __post_init__(self):
        if int(self.N) != self.N or self.N % 2 or self.N < 4:
            raise ValueError(f"N must be an even integer >= 4, got {self.N}")
        if not np.isfinite(self.L) or self.L <= 0:
            raise ValueError(f"L must be positive, got {self.L}")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "L", float(self.L))

    def __eq__(self, other):
        return isinstance(other, Grid) and (self.N, self.L) == (other.N, other.L)

    def __hash__(self):
        return hash((self.N, self.L))

    # -- geometry -------------------------------------------------------
    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.N, self.N, self.N)

    @property
    def dx(self) -> float:
        return self.L / self.N

    @property
    def cell_volume(self) -> float:
        return self.dx**3

    @property
    def volume(self) -> float:
        return self.L**3

    @cached_property
    def mode_index(self) -> np.ndarray:
        """Integer mode numbers in FFT storage order."""
        return np.fft.fftfreq(self.N, d=1.0 / self.N).astype(int)

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Per-axis wavenumbers ``2 pi m / L``, sorted ``m = -N/2 .. N/2-1``."""
        m = np.arange(-self.N // 2, self.N // 2)
        return 2 * np.pi * m / self.L

    @cached_property
    def x(self) -> np.ndarray:
        return np.arange(self.N) * self.dx

    def coords(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable coordinate arrays ``(X, Y, Z)``."""
        x = self.x
        return x[:, None, None], x[None, :, None], x[None, None, :]

    # -- Fourier symbols --------------------------------------------------
    @cached_property
    def k1d(self) -> np.ndarray:
        return 2 * np.pi * self.mode_index / self.L

    @cached_property
    def k(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable wavenumber arrays in storage order."""
        k = self.k1d
        return k[:, None, None], k[None, :, None], k[None, None, :]

    @cached_property
    def kd(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Wavenumbers for first derivatives: Nyquist entry zeroed."""
        k = self.k1d.copy()
        k[self.N // 2] = 0.0
        return k[:, None, None], k[None, :, None], k[None, None, :]

    @cached_property
    def k2(self) -> np.ndarray:
        kx, ky, kz = self.k
        return kx**2 + ky**2 + kz**2

    @cached_property
    def inv_k2(self) -> np.ndarray:
        k2 = self.k2.copy()
        k2[0, 0, 0] = 1.0
        out = 1.0 / k2
        out[0, 0, 0] = 0.0
        return out

    @cached_property
    def inv_kd2(self) -> np.ndarray:
        """``1/|kd|^2`` with zeros where ``kd`` vanishes."""
        kx, ky, kz = self.kd
        kd2 = kx**2 + ky**2 + kz**2
        out = np.zeros_like(kd2)
        np.divide(1.0, kd2, out=out, where=kd2 > 0)
        return out

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """Two-thirds rule: keep modes with every ``|m_axis| <= N/3``."""
        keep = np.abs(self.mode_index) <= self.N / 3
        return keep[:, None, None] & keep[None, :, None] & keep[None, None, :]

    def max_k2(self, dealias: bool = False) -> float:
        if dealias:
            return float(self.k2[self.dealias_mask].max())
        return float(self.k2.max())

    # -- transforms -------------------------------------------------------
    def fft(self, f: np.ndarray) -> np.ndarray:
        return sfft.fftn(f, axes=_AXES, norm="forward", workers=self.workers)

    def ifft(self, fh: np.ndarray) -> np.ndarray:
        return sfft.ifftn(fh, axes=_AXES, norm="forward", workers=self.workers)

    def check(self, f: np.ndarray, ncomp: int | None = None) -> None:
        expected = self.shape if ncomp is None else (ncomp, *self.shape)
        if f.shape != expected:
            raise ValueError(f"field shape {f.shape} does not match grid {expected}")

    # -- quadrature -------------------------------------------------------
    def integrate(self, f: np.ndarray) -> float | np.ndarray:
        return self.cell_volume * f.sum(axis=_AXES)

    def inner(self, f: np.ndarray, g: np.ndarray) -> complex:
        """Discrete ``L^2`` inner product, linear in the first slot."""
        return complex(self.cell_volume * np.vdot(g, f))

    def l2(self, f: np.ndarray) -> float:
        return float(np.sqrt(self.cell_volume * np.sum(np.abs(f) ** 2)))


def make_grid(N: int, L: float) -> Grid:
    return Grid(N, L)


def _real_if(f: np.ndarray, out: np.ndarray) -> np.ndarray:
    return out.real.copy() if np.isrealobj(f) else out


# -- differential operators ----------------------------------------------

def gradient(grid: Grid, f: np.ndarray) -> np.ndarray:
    fh = grid.fft(f)
    out = grid.ifft(np.stack([1j * kj * fh for kj in grid.kd]))
    return _real_if(f, out)


def divergence(grid: Grid, F: np.ndarray) -> np.ndarray:
    grid.check(F, 3)
    Fh = grid.fft(F)
    out = grid.ifft(sum(1j * kj * Fh[j] for j, kj in enumerate(grid.kd)))
    return _real_if(F, out)


def curl(grid: Grid, F: np.ndarray) -> np.ndarray:
    grid.check(F, 3)
    Fh = grid.fft(F)
    kx, ky, kz = grid.kd
    out = grid.ifft(1j * np.stack([
        ky * Fh[2] - kz * Fh[1],
        kz * Fh[0] - kx * Fh[2],
        kx * Fh[1] - ky * Fh[0],
    ]))
    return _real_if(F, out)


def laplacian(grid: Grid, f: np.ndarray) -> np.ndarray:
    out = grid.ifft(-grid.k2 * grid.fft(f))
    return _real_if(f, out)


def inv_laplacian_zero_mean(grid: Grid, f: np.ndarray) -> np.ndarray:
    """Solve ``-lap g = f - mean(f)`` with ``mean(g) = 0``."""
    out = grid.ifft(grid.inv_k2 * grid.fft(f))
    return _real_if(f, out)


def bessel_symbol(grid: Grid, s: float) -> np.ndarray:
    return (1.0 + grid.k2) ** (0.5 * s)


def bessel(grid: Grid, f: np.ndarray, s: float) -> np.ndarray:
    """Apply ``(1 - lap)^(s/2)`` to a scalar or vector field."""
    if s == 0:
        return f.copy()
    out = grid.ifft(bessel_symbol(grid, s) * grid.fft(f))
    return _real_if(f, out)


def apply_multiplier(grid: Grid, f: np.ndarray, symbol, zero_mode=None) -> np.ndarray:
    """Apply an arbitrary Fourier multiplier.

    ``symbol`` is a callable of ``(kx, ky, kz)`` or a precomputed array.
    ``zero_mode`` overrides the value at ``k = 0``; the string ``"annihilate"``
    sets it to zero.
    """
    sym = symbol(*grid.k) if callable(symbol) else symbol
    sym = np.broadcast_to(sym, grid.shape).astype(complex)
    if zero_mode is not None:
        sym = sym.copy()
        sym[0, 0, 0] = 0.0 if zero_mode == "annihilate" else zero_mode
    return grid.ifft(sym * grid.fft(f))


def project_hat(grid: Grid, Fh: np.ndarray) -> np.ndarray:
    """Leray projection of Fourier coefficients; the mean mode is kept.

    Built from the derivative wavenumbers (Nyquist entry zeroed), so it is
    exact against the discrete divergence and maps real fields to real fields.
    """
    kx, ky, kz = grid.kd
    kdotF = (kx * Fh[0] + ky * Fh[1] + kz * Fh[2]) * grid.inv_kd2
    return np.stack([Fh[0] - kx * kdotF, Fh[1] - ky * kdotF, Fh[2] - kz * kdotF])


def helmholtz_project(grid: Grid, F: np.ndarray) -> np.ndarray:
    grid.check(F, 3)
    out = grid.ifft(project_hat(grid, grid.fft(F)))
    return _real_if(F, out)


def divergence_residual(grid: Grid, F: np.ndarray) -> float:
    """``max |k . F_hat| / max |F_hat|`` with derivative wavenumbers."""
    Fh = grid.fft(F)
    scale = np.abs(Fh).max()
    if scale == 0:
        return 0.0
    kx, ky, kz = grid.kd
    return float(np.abs(kx * Fh[0] + ky * Fh[1] + kz * Fh[2]).max() / scale)


def dealias(grid: Grid, f: np.ndarray) -> np.ndarray:
    out = grid.ifft(grid.dealias_mask * grid.fft(f))
    return _real_if(f, out)


# -- free propagators -------------------------------------------------------

def free_schrodinger_step(grid: Grid, u: np.ndarray, dt: float) -> np.ndarray:
    """Exact flow of ``i u_t = -lap u`` over ``dt``."""
    if not np.isfinite(dt):
        raise ValueError("dt must be finite")
    if dt == 0:
        return u.copy()
    return grid.ifft(np.exp(-1j * dt * grid.k2) * grid.fft(u))


def kg_symbols(grid: Grid, dt: float, mass: float):
    """Per-mode ``cos(w dt)``, ``sin(w dt)/w`` and ``w sin(w dt)``."""
    w = np.sqrt(mass + grid.k2)
    c = np.cos(w * dt)
    wsafe = np.where(w > 0, w, 1.0)
    s_over_w = np.where(w > 0, np.sin(w * dt) / wsafe, dt)
    w_s = w * np.sin(w * dt)
    return c, s_over_w, w_s


def free_kg_step_hat(grid: Grid, Ah, Ath, dt: float, mass: float):
    c, s_over_w, w_s = kg_symbols(grid, dt, mass)
    return c * Ah + s_over_w * Ath, -w_s * Ah + c * Ath


def free_kg_step(grid: Grid, A: np.ndarray, At: np.ndarray, dt: float,
                 mass: float = 0.0, check: bool = True):
    """Exact flow of ``(dtt - lap + mass) A = 0`` on divergence-free fields."""
    if mass not in (0, 1):
        raise ValueError(f"mass must be 0 or 1, got {mass}")
    if check:
        for name, F in (("A", A), ("At", At)):
            r = divergence_residual(grid, F)
            if r > 1e-8:
                raise ValueError(f"{name} is not divergence-free (residual {r:.3e})")
    if dt == 0:
        return A.copy(), At.copy()
    Ah, Ath = free_kg_step_hat(grid, grid.fft(A), grid.fft(At), dt, mass)
    return _real_if(A, grid.ifft(Ah)), _real_if(At, grid.ifft(Ath))


def wave_energy(grid: Grid, A: np.ndarray, At: np.ndarray, mass: float = 0.0) -> float:
    """``1/2 (|At|^2 + |grad A|^2 + mass |A|^2)`` with the gradient via Parseval."""
    Ah = grid.fft(A)
    grad2 = grid.volume * float(np.sum(grid.k2 * np.abs(Ah) ** 2))
    return 0.5 * (grid.l2(At) ** 2 + grad2 + mass * grid.l2(A) ** 2)
