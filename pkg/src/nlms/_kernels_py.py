"""Pure-numpy pointwise kernels (fallback for the compiled ``_kernels``)."""
import numpy as np


def power_nonlinearity(u, gamma):
    return np.abs(u) ** (gamma - 1.0) * u


def abs_power(u, p):
    return np.abs(u) ** p


def phase_rotate(u, V, dt):
    return u * np.exp(-1j * dt * V)


def current(u, du, A):
    rho = u.real**2 + u.imag**2
    return 2.0 * (np.conj(u)[None] * du).imag - 2.0 * A * rho[None]


def magnetic_grad_sq(u, du, A):
    g = du - 1j * A * u[None]
    return np.sum(g.real**2 + g.imag**2, axis=0)


def abs_rate(u, ut, floor):
    a = np.abs(u)
    num = (np.conj(u) * ut).real
    out = np.zeros_like(a)
    mask = a > floor
    out[mask] = num[mask] / a[mask]
    return out
