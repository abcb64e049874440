"""Conserved quantities, norms and monitoring diagnostics."""
from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import NamedTuple, Sequence

import numpy as np

from . import kernels
from .physics import (
    PhysParams,
    State,
    _require_solenoidal,
    lorentz_force,
    magnetic_gradient,
    magnetic_laplacian,
    schrodinger_rhs,
    solve_phi,
)
from .spectral import Grid, bessel, gradient, inv_laplacian_zero_mean

# relative floor below which d_t|u| is treated as zero
ABS_FLOOR = 1e-12


def charge(grid: Grid, u: np.ndarray) -> float:
    return float(grid.cell_volume * np.sum(u.real**2 + u.imag**2))


def _grad_sq_parseval(grid: Grid, f: np.ndarray) -> float:
    fh = grid.fft(f)
    return grid.volume * float(np.sum(grid.k2 * np.abs(fh) ** 2))


def energy_terms(s: State, p: PhysParams) -> dict:
    grid = s.grid
    du = gradient(grid, s.u)
    kinetic = grid.integrate(kernels.magnetic_grad_sq(s.u, du, s.A))
    phi = solve_phi(grid, s.u)
    return {
        "kinetic": float(kinetic),
        "wave": 0.5 * (grid.l2(s.At) ** 2 + _grad_sq_parseval(grid, s.A)),
        "electric": 0.5 * _grad_sq_parseval(grid, phi),
        "power": 2.0 / (p.gamma + 1.0) * float(grid.integrate(kernels.abs_power(s.u, p.gamma + 1.0))),
    }


def energy(s: State, p: PhysParams) -> float:
    return sum(energy_terms(s, p).values())


class ModifiedEnergy(NamedTuple):
    e2: float
    r_part: float
    s_part: float


def modified_energy(s: State, p: PhysParams, dealias: bool = True,
                    ut: np.ndarray | None = None) -> ModifiedEnergy:
    """Higher-order energy ``|u_t|^2 - (g-1)|u|^(g-1)|grad|u||^2 - (g-1)/g |u|^(2g)``."""
    g = p.gamma
    grid = s.grid
    if ut is None:
        ut = schrodinger_rhs(s, p, dealias)
    a = np.abs(s.u)
    grad_a = gradient(grid, a)
    r_part = (g - 1.0) * grid.integrate(a ** (g - 1.0) * np.sum(grad_a**2, axis=0)) \
        + (g - 1.0) / g * grid.integrate(a ** (2.0 * g))
    phi = solve_phi(grid, s.u)
    s_part = grid.l2((phi + a ** (g - 1.0)) * s.u)
    return ModifiedEnergy(charge(grid, ut) - float(r_part), float(r_part), s_part)


def modified_energy_rhs_terms(s: State, p: PhysParams, dealias: bool = True,
                              ut: np.ndarray | None = None) -> dict:
    """The five integrals whose sum is ``dE2/dt``.

    Keys ``transport``, ``curvature``, ``magnetic``, ``electric``,
    ``potential_rate``.  ``curvature`` carries the factor ``(g-1)(g-3)`` and is
    skipped (exactly zero) at ``g = 3``.
    """
    g = p.gamma
    if not g > 2:
        raise ValueError(f"the modified-energy identity requires gamma > 2, got {g}")
    grid = s.grid
    u = s.u
    if ut is None:
        ut = schrodinger_rhs(s, p, dealias)
    a = np.abs(u)
    floor = ABS_FLOOR * a.max() if a.size else 0.0
    a_t = kernels.abs_rate(u, ut, floor)
    du = gradient(grid, u)
    grad_A_u = du - 1j * s.A * u[None]
    w = a ** (g - 2.0) * a_t

    terms = {}
    terms["transport"] = 4.0 * grid.integrate(
        np.einsum("j...,j...->...", s.At, grad_A_u * np.conj(ut)[None]).real)
    coef = (g - 1.0) * (g - 3.0)
    if coef == 0.0:
        terms["curvature"] = 0.0
    else:
        grad_a = gradient(grid, a)
        terms["curvature"] = coef * grid.integrate(w * np.sum(grad_a**2, axis=0))
    terms["magnetic"] = 2.0 * (g - 1.0) * grid.integrate(
        w * kernels.magnetic_grad_sq(u, du, s.A))
    phi = solve_phi(grid, u)
    terms["electric"] = 2.0 * (g - 1.0) * grid.integrate(phi * a**g * a_t)
    phi_t = inv_laplacian_zero_mean(grid, 2.0 * (np.conj(u) * ut).real)
    terms["potential_rate"] = 2.0 * grid.integrate((u * phi_t * np.conj(ut)).imag)
    return {k: float(v) for k, v in terms.items()}


def modified_energy_rhs(s: State, p: PhysParams, dealias: bool = True,
                        ut: np.ndarray | None = None) -> float:
    return sum(modified_energy_rhs_terms(s, p, dealias, ut).values())


# -- norms -------------------------------------------------------------------

def sobolev_norm(grid: Grid, f: np.ndarray, s: float) -> float:
    """``|| (1 - lap)^(s/2) f ||_L2``, evaluated by Parseval."""
    fh = grid.fft(f)
    w = (1.0 + grid.k2) ** s
    return math.sqrt(grid.volume * float(np.sum(w * np.abs(fh) ** 2)))


def wsp_norm(grid: Grid, f: np.ndarray, s: float, p: float) -> float:
    """Bessel-potential norm ``|| (1 - lap)^(s/2) f ||_Lp`` on the grid."""
    if not (1 <= p <= math.inf):
        raise ValueError(f"p must lie in [1, inf], got {p}")
    g = np.abs(bessel(grid, f, s))
    if f.ndim == 4:
        g = np.sqrt(np.sum(g**2, axis=0))
    if math.isinf(p):
        return float(g.max())
    return float((grid.cell_volume * np.sum(g**p)) ** (1.0 / p))


def magnetic_sobolev_norm(grid: Grid, u: np.ndarray, A: np.ndarray, s: int) -> float:
    """``|| (-lap_A + 1)^(s/2) u ||_L2`` for ``s`` in {1, 2}."""
    if s == 2:
        Lu = magnetic_laplacian(grid, u, A, dealias=False)
        return grid.l2(u - Lu)
    if s == 1:
        _require_solenoidal(grid, A)
        form = -grid.inner(magnetic_laplacian(grid, u, A, dealias=False, check=False), u).real
        return math.sqrt(max(form, 0.0) + grid.l2(u) ** 2)
    raise ValueError(f"magnetic Sobolev order must be 1 or 2, got {s}")


def m_norm(s: State, reg_s: float = 2.0, sigma: float = 4.0 / 3.0) -> float:
    """Component-sum norm on ``H^reg_s x H^sigma x H^(sigma-1)``."""
    g = s.grid
    return sobolev_norm(g, s.u, reg_s) + sobolev_norm(g, s.A, sigma) \
        + sobolev_norm(g, s.At, sigma - 1.0)


@dataclass(frozen=True)
class MixedNormSpec:
    """Exponents of ``L^q_t W^{s,r}_x``."""

    q: float
    s: float
    r: float

    def __post_init__(self):
        for name in ("q", "r"):
            v = getattr(self, name)
            if not (1 <= v <= math.inf):
                raise ValueError(f"{name} must lie in [1, inf], got {v}")

    @property
    def kg_admissible(self) -> bool:
        """``1/q + 1/r = 1/2``."""
        return self.q >= 2 and math.isclose(1 / self.q + 1 / self.r, 0.5, abs_tol=1e-12)

    @property
    def schrodinger_admissible(self) -> bool:
        """``2/q + 3/r = 3/2`` with ``2 <= r <= 6``."""
        return 2 <= self.r <= 6 and math.isclose(2 / self.q + 3 / self.r, 1.5, abs_tol=1e-12)


def time_norm(times: Sequence[float], values: Sequence[float], q: float) -> float:
    """``L^q`` norm in time of nonnegative samples by the trapezoidal rule."""
    t = np.asarray(times, dtype=float)
    v = np.abs(np.asarray(values, dtype=float))
    if t.size < 2:
        raise ValueError("a time series needs at least 2 samples")
    if np.any(np.diff(t) <= 0):
        raise ValueError("time samples must be strictly increasing")
    if math.isinf(q):
        return float(v.max())
    vq = v**q
    return float(np.sum(0.5 * (vq[1:] + vq[:-1]) * np.diff(t)) ** (1.0 / q))


def mixed_norm(grid: Grid, series, spec: MixedNormSpec) -> float:
    """``|| f ||_{L^q_t W^{s,r}_x}`` over a list of ``(t, field)`` samples."""
    series = list(series)
    if not series:
        raise ValueError("empty series")
    times = [t for t, _ in series]
    vals = [wsp_norm(grid, f, spec.s, spec.r) for _, f in series]
    return time_norm(times, vals, spec.q)


class DiamagneticReport(NamedTuple):
    max_violation: float
    refinement_slope: float | None


def diamagnetic_violation(grid: Grid, u: np.ndarray, A: np.ndarray) -> float:
    """``max (|grad|u|| - |grad_A u|)_+`` over grid points."""
    lhs = np.sqrt(np.sum(gradient(grid, np.abs(u)) ** 2, axis=0))
    rhs = np.sqrt(np.sum(np.abs(magnetic_gradient(grid, u, A)) ** 2, axis=0))
    return float(max(0.0, (lhs - rhs).max()))


def diamagnetic_report(grid: Grid, u: np.ndarray, A: np.ndarray,
                       refined: tuple[Grid, np.ndarray, np.ndarray] | None = None
                       ) -> DiamagneticReport:
    """Violation on ``grid``; with ``refined = (grid2, u2, A2)`` also the slope
    of ``log(violation)`` against ``log(N)`` between the two resolutions."""
    v1 = diamagnetic_violation(grid, u, A)
    slope = None
    if refined is not None:
        g2, u2, A2 = refined
        v2 = diamagnetic_violation(g2, u2, A2)
        if v1 > 0 and v2 > 0:
            slope = math.log(v2 / v1) / math.log(g2.N / grid.N)
        else:
            slope = -math.inf
    return DiamagneticReport(v1, slope)


def lorentz_l1(s: State) -> float:
    F = lorentz_force(s)
    return float(s.grid.integrate(np.sqrt(np.sum(F**2, axis=0))))


def lorentz_l2t_l1(traj) -> float:
    """``|| F_L ||_{L^2_t L^1_x}`` over the samples of a trajectory."""
    times = list(traj.times)
    if traj.diagnostics and len(traj.diagnostics) == len(times):
        vals = [r.lorentz_l1 for r in traj.diagnostics]
    else:
        vals = [lorentz_l1(s) for s in traj.samples]
    return time_norm(times, vals, 2.0)


# -- growth monitoring -------------------------------------------------------

class GrowthFit(NamedTuple):
    poly_exponent: float
    exp_rate: float
    residuals: dict


def running_sup(values: Sequence[float]) -> np.ndarray:
    return np.maximum.accumulate(np.asarray(values, dtype=float))


def growth_fit(series) -> GrowthFit:
    """Least-squares growth laws for a running-sup series ``[(T, sup), ...]``.

    ``poly_exponent`` is the slope of ``log(sup)`` against ``log(1 + T)``;
    ``exp_rate`` the slope of ``log(sup)`` against ``T``.  ``residuals`` holds
    the residual vectors and their RMS for both fits.
    """
    arr = np.asarray(list(series), dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 4:
        raise ValueError("growth_fit needs at least 4 (T, sup) samples")
    T, y = arr[:, 0], arr[:, 1]
    if np.any(np.diff(T) <= 0):
        raise ValueError("times must be strictly increasing")
    if np.any(np.diff(y) < 0):
        raise ValueError("input must be a running supremum (nondecreasing)")
    if np.any(y <= 0):
        raise ValueError("norms must be positive")
    logy = np.log(y)
    out = {}
    slopes = []
    for name, x in (("poly", np.log1p(T)), ("exp", T)):
        X = np.column_stack([np.ones_like(x), x])
        coef, *_ = np.linalg.lstsq(X, logy, rcond=None)
        res = logy - X @ coef
        out[name] = res
        out[f"{name}_rms"] = float(np.sqrt(np.mean(res**2)))
        slopes.append(float(coef[1]))
    return GrowthFit(slopes[0], slopes[1], out)


# -- per-sample record -------------------------------------------------------

@dataclass
class DiagnosticRecord:
    t: float
    charge: float
    energy: float
    e2: float
    e2_rhs: float
    h1_u: float
    h2_u: float
    sigma_A: float
    sigma_minus1_At: float
    m_norm: float
    lorentz_l1: float
    diamag_violation: float

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def values(self) -> list[float]:
        return [getattr(self, c) for c in self.columns()]

    @property
    def sobolev(self) -> dict:
        return {1: self.h1_u, 2: self.h2_u}


def record(s: State, p: PhysParams, dealias: bool = True) -> DiagnosticRecord:
    grid = s.grid
    ut = schrodinger_rhs(s, p, dealias)
    e2 = modified_energy(s, p, dealias, ut=ut).e2
    e2_rhs = modified_energy_rhs(s, p, dealias, ut=ut) if p.gamma > 2 else math.nan
    h1, h2 = sobolev_norm(grid, s.u, 1), sobolev_norm(grid, s.u, 2)
    sa = sobolev_norm(grid, s.A, p.sigma)
    sat = sobolev_norm(grid, s.At, p.sigma - 1.0)
    return DiagnosticRecord(
        t=s.t,
        charge=charge(grid, s.u),
        energy=energy(s, p),
        e2=e2,
        e2_rhs=e2_rhs,
        h1_u=h1,
        h2_u=h2,
        sigma_A=sa,
        sigma_minus1_At=sat,
        m_norm=h2 + sa + sat,
        lorentz_l1=lorentz_l1(s),
        diamag_violation=diamagnetic_violation(grid, s.u, s.A),
    )


__all__ = [
    "charge", "energy", "energy_terms", "modified_energy", "modified_energy_rhs",
    "modified_energy_rhs_terms", "sobolev_norm", "wsp_norm", "magnetic_sobolev_norm",
    "m_norm", "MixedNormSpec", "mixed_norm", "time_norm", "diamagnetic_report",
    "diamagnetic_violation", "lorentz_l1", "lorentz_l2t_l1", "growth_fit", "running_sup",
    "DiagnosticRecord", "record",
]
