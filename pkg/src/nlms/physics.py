"""State, parameters and the right-hand side of the Maxwell-Schroedinger system.

The evolved system (Coulomb gauge, defocusing)::

    i u_t   = -lap_A u + phi u + |u|^(gamma-1) u
    A_tt    = lap A + P J
    lap_A   = (grad - iA)^2,  phi = (-lap)^-1 |u|^2,  J = 2 Im(conj(u) (grad - iA) u)

``lap_A`` is evaluated in the skew-symmetric form
``lap u - i (A.grad u + div(A u)) - |A|^2 u``, which coincides with the
textbook expansion when ``div A = 0`` and keeps ``-lap_A`` exactly
self-adjoint on the grid.  With ``dealias=True`` each right-hand side is
Galerkin-truncated by the two-thirds mask.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from . import kernels
from .spectral import (
    Grid,
    curl,
    divergence_residual,
    gradient,
    inv_laplacian_zero_mean,
    laplacian,
    project_hat,
)

SOLENOIDAL_TOL = 1e-10


@dataclass(frozen=True)
class PhysParams:
    gamma: float
    sigma: float = 4.0 / 3.0

    def __post_init__(self):
        if not self.gamma > 1:
            raise ValueError(f"gamma must exceed 1, got {self.gamma}")


@dataclass(frozen=True, eq=False)
class State:
    grid: Grid
    t: float
    u: np.ndarray
    A: np.ndarray
    At: np.ndarray

    def __post_init__(self):
        self.grid.check(self.u)
        self.grid.check(self.A, 3)
        self.grid.check(self.At, 3)
        object.__setattr__(self, "u", np.asarray(self.u, dtype=np.complex128))
        for name in ("A", "At"):
            F = getattr(self, name)
            if np.iscomplexobj(F):
                scale = max(np.abs(F).max(), 1e-300)
                if np.abs(F.imag).max() > 1e-12 * scale:
                    raise ValueError(f"{name} must be real-valued")
                F = F.real
            object.__setattr__(self, name, np.asarray(F, dtype=np.float64))

    @classmethod
    def zero(cls, grid: Grid, t: float = 0.0) -> "State":
        return cls(grid, t, np.zeros(grid.shape, complex),
                   np.zeros((3, *grid.shape)), np.zeros((3, *grid.shape)))

    def with_(self, **kw) -> "State":
        return replace(self, **kw)

    def copy(self) -> "State":
        return State(self.grid, self.t, self.u.copy(), self.A.copy(), self.At.copy())

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.u).all() and np.isfinite(self.A).all()
                    and np.isfinite(self.At).all())

    def validate(self, tol: float = SOLENOIDAL_TOL) -> None:
        """Raise if the Coulomb-gauge constraint is violated."""
        for name in ("A", "At"):
            r = divergence_residual(self.grid, getattr(self, name))
            if r > tol:
                raise ValueError(f"div {name} != 0 (relative residual {r:.3e})")


def _require_solenoidal(grid: Grid, A: np.ndarray, tol: float = 1e-8) -> None:
    r = divergence_residual(grid, A)
    if r > tol:
        raise ValueError(f"A is not divergence-free (relative residual {r:.3e})")


def solve_phi(grid: Grid, u: np.ndarray) -> np.ndarray:
    """Electric potential ``(-lap)^-1 |u|^2`` (jellium convention, zero mean)."""
    rho = u.real**2 + u.imag**2
    return inv_laplacian_zero_mean(grid, rho)


def magnetic_gradient(grid: Grid, u: np.ndarray, A: np.ndarray) -> np.ndarray:
    grid.check(u)
    grid.check(A, 3)
    return gradient(grid, u.astype(complex)) - 1j * A * u[None]


def magnetic_laplacian(grid: Grid, u: np.ndarray, A: np.ndarray,
                       dealias: bool = True, check: bool = True) -> np.ndarray:
    grid.check(u)
    grid.check(A, 3)
    if check:
        _require_solenoidal(grid, A)
    uh = grid.fft(u)
    du = grid.ifft(np.stack([1j * kj * uh for kj in grid.kd]))
    pointwise = -1j * np.einsum("j...,j...->...", A, du) - np.sum(A * A, axis=0) * u
    Auh = grid.fft(A * u[None])
    out_h = -grid.k2 * uh + sum(kj * Auh[j] for j, kj in enumerate(grid.kd)) \
        + grid.fft(pointwise)
    if dealias:
        out_h *= grid.dealias_mask
    return grid.ifft(out_h)


def nonlinearity(u: np.ndarray, gamma: float) -> np.ndarray:
    """Pointwise ``|u|^(gamma-1) u``."""
    if not gamma > 1:
        raise ValueError(f"gamma must exceed 1, got {gamma}")
    return kernels.power_nonlinearity(u, gamma)


def current_J(grid: Grid, u: np.ndarray, A: np.ndarray, project: bool = False) -> np.ndarray:
    du = gradient(grid, u.astype(complex))
    J = kernels.current(u, du, A)
    if project:
        J = grid.ifft(project_hat(grid, grid.fft(J))).real
    return J


class _Rhs(NamedTuple):
    ut: np.ndarray
    At_t: np.ndarray


def system_rhs(grid: Grid, u, A, gamma: float, dealias: bool = True,
               with_power: bool = True, with_phi: bool = True) -> _Rhs:
    """``(u_t, (A_t)_t)`` sharing one gradient of ``u`` between both equations.

    ``A_t`` itself is the trivial first slot of the wave system and is not
    returned.
    """
    kd = grid.kd
    uh = grid.fft(u)
    du = grid.ifft(np.stack([1j * kj * uh for kj in kd]))
    # G = -lap_A u + phi u + |u|^(g-1) u, Fourier side assembled in one pass
    V = np.sum(A * A, axis=0)
    if with_phi:
        V = V + solve_phi(grid, u)
    if with_power:
        V = V + kernels.abs_power(u, gamma - 1.0)
    pointwise = 1j * np.einsum("j...,j...->...", A, du) + V * u
    batch = grid.fft(np.concatenate([(A * u[None]), pointwise[None]]))
    Gh = grid.k2 * uh - sum(kj * batch[j] for j, kj in enumerate(kd)) + batch[3]
    J = kernels.current(u, du, A)
    Wh = grid.fft(np.concatenate([A, J]))
    Ath = -grid.k2 * Wh[:3] + project_hat(grid, Wh[3:])
    if dealias:
        Gh *= grid.dealias_mask
        Ath *= grid.dealias_mask
    return _Rhs(-1j * grid.ifft(Gh), grid.ifft(Ath).real)


def schrodinger_rhs(s: State, p: PhysParams, dealias: bool = True) -> np.ndarray:
    """``u_t`` from the equation."""
    return system_rhs(s.grid, s.u, s.A, p.gamma, dealias).ut


dt_u_from_equation = schrodinger_rhs


def wave_rhs(s: State, dealias: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """``(A_t, (A_t)_t) = (At, lap A + P J)``."""
    grid = s.grid
    J = current_J(grid, s.u, s.A)
    Wh = grid.fft(np.concatenate([s.A, J]))
    Ath = -grid.k2 * Wh[:3] + project_hat(grid, Wh[3:])
    if dealias:
        Ath *= grid.dealias_mask
    return s.At.copy(), grid.ifft(Ath).real


def electric_field(s: State) -> np.ndarray:
    return -s.At - gradient(s.grid, solve_phi(s.grid, s.u))


def magnetic_field(grid: Grid, A: np.ndarray) -> np.ndarray:
    return curl(grid, A)


def lorentz_force(s: State) -> np.ndarray:
    """``rho E + J x B`` pointwise, with the unprojected current."""
    rho = np.abs(s.u) ** 2
    E = electric_field(s)
    J = current_J(s.grid, s.u, s.A)
    B = magnetic_field(s.grid, s.A)
    return rho[None] * E + np.cross(J, B, axis=0)


class GaugeResult(NamedTuple):
    u: np.ndarray
    phi: np.ndarray
    A: np.ndarray
    invariants: dict


def gauge_transform(s: State, lam: np.ndarray, lam_t: np.ndarray | float = 0.0) -> GaugeResult:
    """``(u, phi, A) -> (e^{i lam} u, phi - lam_t, A + grad lam)``.

    ``phi`` is the Coulomb-gauge potential derived from ``u``.  The returned
    ``invariants`` hold the maximal pointwise changes of ``|u|``, ``rho`` and
    ``B``; the first two vanish identically, the last to spectral precision.
    """
    grid = s.grid
    if np.iscomplexobj(lam) and np.abs(np.imag(lam)).max() > 0:
        raise ValueError("gauge function must be real")
    lam = np.real(lam)
    if np.iscomplexobj(lam_t) and np.abs(np.imag(lam_t)).max() > 0:
        raise ValueError("gauge rate must be real")
    lam_t = np.real(lam_t)
    u2 = np.exp(1j * lam) * s.u
    A2 = s.A + gradient(grid, lam)
    phi = solve_phi(grid, s.u)
    phi2 = phi - lam_t
    B, B2 = magnetic_field(grid, s.A), magnetic_field(grid, A2)
    inv = {
        "abs_u": float(np.abs(np.abs(u2) - np.abs(s.u)).max()),
        "rho": float(np.abs(np.abs(u2) ** 2 - np.abs(s.u) ** 2).max()),
        "B": float(np.abs(B2 - B).max()),
        "B_scale": float(np.abs(B).max()),
    }
    return GaugeResult(u2, phi2, A2, inv)


def lorenz_residual(s: State, p: PhysParams, lam: np.ndarray,
                    lam_tt: np.ndarray | float = 0.0, dealias: bool = True) -> np.ndarray:
    """``d_t phi' + div A'`` for the gauge-transformed potentials.

    ``d_t phi = (-lap)^-1 d_t rho`` uses ``u_t`` from the equation; since
    ``div A = 0`` the divergence reduces to ``lap lam``.
    """
    grid = s.grid
    ut = schrodinger_rhs(s, p, dealias)
    phi_t = inv_laplacian_zero_mean(grid, 2.0 * (np.conj(s.u) * ut).real)
    return phi_t - lam_tt + laplacian(grid, np.real(lam))
