"""Time integrators, the magnetic propagator and the Picard fixed-point mode."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .diagnostics import DiagnosticRecord, record, sobolev_norm, time_norm
from .physics import PhysParams, State, solve_phi, system_rhs
from .spectral import Grid, divergence_residual, free_kg_step_hat, project_hat

log = logging.getLogger(__name__)

INTEGRATORS = ("rk4", "splitting")


class BlowUpError(FloatingPointError):
    """Non-finite values appeared during a step."""


@dataclass
class Trajectory:
    samples: list[State]
    diagnostics: list[DiagnosticRecord] = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    blowup_time: float | None = None

    @property
    def times(self) -> np.ndarray:
        if self.samples:
            return np.array([s.t for s in self.samples])
        return np.array([r.t for r in self.diagnostics])

    @property
    def grid(self) -> Grid:
        return self.samples[0].grid


def _check_finite(*arrays) -> None:
    for a in arrays:
        if not np.isfinite(a).all():
            raise BlowUpError("non-finite values in state")


def _reproject(grid: Grid, A: np.ndarray, At: np.ndarray, dealias: bool):
    Wh = grid.fft(np.concatenate([A, At]))
    Wh = np.concatenate([project_hat(grid, Wh[:3]), project_hat(grid, Wh[3:])])
    if dealias:
        Wh *= grid.dealias_mask
    W = grid.ifft(Wh).real
    return W[:3], W[3:]


def _band_limited(s: State, tol: float = 1e-13) -> bool:
    grid = s.grid
    out = ~grid.dealias_mask
    for f in (s.u, s.A, s.At):
        fh = np.abs(grid.fft(f))
        if np.any(fh[..., out] > tol * max(fh.max(), 1e-300)):
            return False
    return True


def galerkin_truncate(s: State) -> State:
    """Restrict a state to the two-thirds band.

    A state whose discarded modes are already at roundoff level is returned
    unchanged, so truncating twice is the identity.
    """
    if _band_limited(s):
        return s
    grid = s.grid
    m = grid.dealias_mask
    u = grid.ifft(m * grid.fft(s.u))
    A, At = _reproject(grid, s.A, s.At, True)
    return State(grid, s.t, u, A, At)


# -- RK4 ---------------------------------------------------------------------

def rk4_step(s: State, dt: float, p: PhysParams, dealias: bool = True) -> State:
    """Classical four-stage step on ``(u, A, At)``."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    grid, g = s.grid, p.gamma
    u0, A0, B0 = s.u, s.A, s.At

    def f(u, A, B):
        r = system_rhs(grid, u, A, g, dealias)
        return r.ut, B, r.At_t

    k1 = f(u0, A0, B0)
    k2 = f(u0 + 0.5 * dt * k1[0], A0 + 0.5 * dt * k1[1], B0 + 0.5 * dt * k1[2])
    k3 = f(u0 + 0.5 * dt * k2[0], A0 + 0.5 * dt * k2[1], B0 + 0.5 * dt * k2[2])
    k4 = f(u0 + dt * k3[0], A0 + dt * k3[1], B0 + dt * k3[2])
    c = dt / 6.0
    u = u0 + c * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    A = A0 + c * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    B = B0 + c * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
    _check_finite(u, A, B)
    A, B = _reproject(grid, A, B, dealias)
    return State(grid, s.t + dt, u, A, B)


# -- splitting -----------------------------------------------------------------

def _transport(grid: Grid, u: np.ndarray, A: np.ndarray, dealias: bool) -> np.ndarray:
    """``A.grad u + div(A u)``: the skew-adjoint cross term of ``lap_A``."""
    uh = grid.fft(u)
    du = grid.ifft(np.stack([1j * kj * uh for kj in grid.kd]))
    Auh = grid.fft(A * u[None])
    out = grid.fft(np.einsum("j...,j...->...", A, du)) \
        + sum(1j * kj * Auh[j] for j, kj in enumerate(grid.kd))
    if dealias:
        out *= grid.dealias_mask
    return grid.ifft(out)


def _cross_substep(grid, u, A, dt, dealias, order):
    """Truncated Taylor series of ``exp(dt T)`` for the transport term ``T``.

    Returns the advanced field and the first-order midpoint ``u + dt/2 T u``.
    ``order=2`` is the explicit midpoint rule.
    """
    term = u
    out = u.copy()
    mid = None
    for n in range(1, order + 1):
        term = (dt / n) * _transport(grid, term, A, dealias)
        if n == 1:
            mid = u + 0.5 * term
        out = out + term
    return out, mid


def _mask(grid, f, dealias):
    return grid.ifft(grid.dealias_mask * grid.fft(f)) if dealias else f


def _free_half(grid: Grid, u, A, At, dt: float, mass: float = 0.0):
    uh = grid.fft(u) * np.exp(-1j * dt * grid.k2)
    W = grid.fft(np.concatenate([A, At]))
    Ah, Ath = free_kg_step_hat(grid, W[:3], W[3:], dt, mass)
    W = grid.ifft(np.concatenate([Ah, Ath])).real
    return grid.ifft(uh), W[:3], W[3:]


def splitting_step(s: State, dt: float, p: PhysParams, dealias: bool = True,
                   cross_order: int = 4) -> State:
    """Strang step: free half-flows around a frozen-``A`` coupling step.

    The coupling step applies the potential ``phi + |u|^(g-1) + |A|^2`` as an
    exact phase over two half steps enclosing the transport term, and kicks
    ``At`` by ``dt P J`` evaluated at the transport midpoint.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    grid, g = s.grid, p.gamma
    u, A, At = _free_half(grid, s.u, s.A, s.At, 0.5 * dt)
    A2 = np.sum(A * A, axis=0)

    def potential(v):
        return solve_phi(grid, v) + kernels.abs_power(v, g - 1.0) + A2

    u = _mask(grid, kernels.phase_rotate(u, potential(u), 0.5 * dt), dealias)
    u, u_mid = _cross_substep(grid, u, A, dt, dealias, cross_order)
    du = grid.ifft(np.stack([1j * kj * grid.fft(u_mid) for kj in grid.kd]))
    Jh = project_hat(grid, grid.fft(kernels.current(u_mid, du, A)))
    if dealias:
        Jh *= grid.dealias_mask
    At = At + dt * grid.ifft(Jh).real
    u = _mask(grid, kernels.phase_rotate(u, potential(u), 0.5 * dt), dealias)
    u, A, At = _free_half(grid, u, A, At, 0.5 * dt)
    _check_finite(u, A, At)
    return State(grid, s.t + dt, u, A, At)


STEPPERS: dict[str, Callable] = {"rk4": rk4_step, "splitting": splitting_step}


# -- time loop -----------------------------------------------------------------

def evolve(s0: State, p: PhysParams, dt: float, T: float, integrator: str = "rk4",
           snapshot_every: int = 10, dealias: bool = True, diagnostics: bool = True,
           store_states: bool = True, cfl_limit: float = 2.8,
           on_sample: Callable[[State, DiagnosticRecord | None], None] | None = None,
           ) -> Trajectory:
    """Advance ``s0`` to ``t0 + T`` with a fixed step.

    ``T`` is split into ``ceil(T/dt)`` equal steps (``dt`` is shortened if it
    does not divide ``T``).  A sample is emitted every ``snapshot_every`` steps
    and at the final step.  Non-finite values stop the loop; the partial
    trajectory is returned with ``blowup_time`` set.
    """
    if integrator not in STEPPERS:
        raise ValueError(f"unknown integrator {integrator!r}; choose from {INTEGRATORS}")
    if T < 0 or not math.isfinite(T):
        raise ValueError(f"T must be finite and nonnegative, got {T}")
    if snapshot_every < 1:
        raise ValueError("snapshot_every must be >= 1")
    s0.validate(1e-8)
    if not s0.is_finite():
        raise ValueError("initial data is not finite")
    grid = s0.grid
    if dealias:
        s0 = galerkin_truncate(s0)

    n_steps = 0
    if T > 0:
        if not dt > 0:
            raise ValueError(f"dt must be positive, got {dt}")
        n_steps = max(1, round(T / dt))
        if abs(n_steps * dt - T) > 1e-9 * T:
            n_steps = math.ceil(T / dt)
        dt = T / n_steps
        if integrator == "rk4" and dt * grid.max_k2(dealias) > cfl_limit:
            raise ValueError(
                f"dt*max|k|^2 = {dt * grid.max_k2(dealias):.3g} exceeds the stability "
                f"bound {cfl_limit}")
    step = STEPPERS[integrator]
    traj = Trajectory([], [], {"integrator": integrator, "dt": dt, "N": grid.N, "L": grid.L,
                               "gamma": p.gamma, "sigma": p.sigma, "dealias": dealias,
                               "steps": n_steps})

    def emit(s):
        rec = record(s, p, dealias) if diagnostics else None
        if store_states:
            traj.samples.append(s)
        if rec is not None:
            traj.diagnostics.append(rec)
        if on_sample is not None:
            on_sample(s, rec)

    s = s0
    t0 = s0.t
    emit(s)
    for n in range(1, n_steps + 1):
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                s = step(s, dt, p, dealias)
        except BlowUpError:
            traj.blowup_time = t0 + n * dt
            log.warning("blow-up signalled at t=%.6g", traj.blowup_time)
            break
        # keep t on the uniform lattice
        s = s.with_(t=t0 + n * dt)
        if n % snapshot_every == 0 or n == n_steps:
            emit(s)
    return traj


# -- magnetic propagator -------------------------------------------------------

def linear_interpolant(times: Sequence[float], fields: Sequence[np.ndarray]):
    """Piecewise-linear time interpolant through sampled fields."""
    times = np.asarray(times, dtype=float)

    def A_of_t(t):
        if t <= times[0]:
            return fields[0]
        if t >= times[-1]:
            return fields[-1]
        i = int(np.searchsorted(times, t, side="right")) - 1
        w = (t - times[i]) / (times[i + 1] - times[i])
        return (1.0 - w) * fields[i] + w * fields[i + 1]

    return A_of_t


def magnetic_propagator(grid: Grid, u0: np.ndarray, A_of_t, t0: float, t1: float,
                        substeps: int = 1, dealias: bool = False,
                        cross_order: int = 4, check: bool = True) -> np.ndarray:
    """Solve ``i u_t = -lap_A u`` from ``t0`` to ``t1``.

    Each substep is a symmetric splitting with ``A`` frozen at the substep
    midpoint: free half step, half phase ``exp(-i h |A|^2 / 2)``, transport
    step, half phase, free half step.  ``A_of_t`` is a callable or a constant
    field.
    """
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    if t1 == t0:
        return u0.copy()
    get_A = A_of_t if callable(A_of_t) else (lambda t: A_of_t)
    h = (t1 - t0) / substeps
    free = np.exp(-0.5j * h * grid.k2)
    if dealias:
        free = free * grid.dealias_mask
    u = u0
    for n in range(substeps):
        A = get_A(t0 + (n + 0.5) * h)
        if check:
            r = divergence_residual(grid, A)
            if r > 1e-8:
                raise ValueError(f"A is not divergence-free at t={t0 + (n + 0.5) * h} "
                                 f"(relative residual {r:.3e})")
        A2 = np.sum(A * A, axis=0)
        u = grid.ifft(free * grid.fft(u))
        u = _mask(grid, kernels.phase_rotate(u, A2, 0.5 * h), dealias)
        u, _ = _cross_substep(grid, u, A, h, dealias, cross_order)
        u = kernels.phase_rotate(u, A2, 0.5 * h)
        u = grid.ifft(free * grid.fft(u))
    return u


# -- Picard mode ---------------------------------------------------------------

@dataclass
class PicardReport:
    iterates: int = 0
    d_distances: list[float] = field(default_factory=list)
    contraction_factors: list[float] = field(default_factory=list)
    radii: list[tuple[float, float]] = field(default_factory=list)
    converged: bool = False
    diverged: bool = False

    def as_dict(self) -> dict:
        return {
            "iterates": self.iterates,
            "d_distances": self.d_distances,
            "contraction_factors": self.contraction_factors,
            "radii": [{"R1": a, "R2": b} for a, b in self.radii],
            "converged": self.converged,
            "diverged": self.diverged,
        }


def _uniform_times(T: float, samples: int) -> np.ndarray:
    return np.linspace(0.0, T, samples + 1)


def constant_candidate(grid: Grid, data, T: float, samples: int) -> Trajectory:
    u0, A0, A1 = data
    states = [State(grid, t, u0, A0, A1) for t in _uniform_times(T, samples)]
    return Trajectory(states, meta={"kind": "constant"})


def picard_map(cand: Trajectory, data, p: PhysParams, substeps: int = 4,
               dealias: bool = True, cross_order: int = 4,
               with_sources: bool = True) -> Trajectory:
    """One application of the Duhamel solution map.

    Schroedinger part: ``v(t) = U_A(t,0) u0 - i int_0^t U_A(t,tau) N(u)(tau) dtau``
    with ``N(u) = phi u + |u|^(g-1) u``.  Wave part: the mass-one Klein-Gordon
    Duhamel formula with source ``P J(u, A) + A``.  Time integrals use the
    composite trapezoidal rule on the candidate's sample times, propagated
    interval by interval.  ``with_sources=False`` drops both Duhamel integrals,
    leaving the linear flows of the data.
    """
    grid = cand.grid
    times = cand.times
    if len(times) < 2:
        raise ValueError("candidate needs at least 2 samples")
    h = np.diff(times)
    if not np.allclose(h, h[0], rtol=1e-9, atol=0):
        raise ValueError("candidate sampling must be uniform")
    h = float(h[0])
    u0, A0, A1 = data
    g = p.gamma

    def N_of(st):
        if not with_sources:
            return np.zeros(grid.shape, complex)
        n = solve_phi(grid, st.u) * st.u + kernels.power_nonlinearity(st.u, g)
        return _mask(grid, n, dealias)

    def F_hat(st):
        if not with_sources:
            return np.zeros((3, *grid.shape), complex)
        du = grid.ifft(np.stack([1j * kj * grid.fft(st.u) for kj in grid.kd]))
        Fh = project_hat(grid, grid.fft(kernels.current(st.u, du, st.A))) + grid.fft(st.A)
        if dealias:
            Fh *= grid.dealias_mask
        return Fh

    A_of_t = linear_interpolant(times, [st.A for st in cand.samples])
    Ns = [N_of(st) for st in cand.samples]
    v = u0.astype(complex)
    Bh, Bth = grid.fft(A0), grid.fft(A1)
    F_prev = F_hat(cand.samples[0])
    out = [State(grid, times[0], v, A0, A1)]
    for n in range(len(times) - 1):
        w = v - 0.5j * h * Ns[n]
        v = magnetic_propagator(grid, w, A_of_t, times[n], times[n + 1], substeps,
                                dealias=dealias, cross_order=cross_order, check=False)
        v = v - 0.5j * h * Ns[n + 1]
        Bh, Bth = free_kg_step_hat(grid, Bh, Bth + 0.5 * h * F_prev, h, 1.0)
        F_next = F_hat(cand.samples[n + 1])
        Bth = Bth + 0.5 * h * F_next
        F_prev = F_next
        W = grid.ifft(np.concatenate([Bh, Bth])).real
        out.append(State(grid, times[n + 1], v, W[:3], W[3:]))
    return Trajectory(out, meta={"kind": "picard"})


def picard_distance(a: Trajectory, b: Trajectory) -> float:
    """``sup_t |u1 - u2|_L2 + |A1 - A2|_{L^4_t L^4_x}`` on common samples."""
    if len(a.samples) != len(b.samples) or not np.allclose(a.times, b.times):
        raise ValueError("trajectories are sampled at different times")
    grid = a.grid
    du = max(grid.l2(x.u - y.u) for x, y in zip(a.samples, b.samples))
    l4 = [float((grid.cell_volume * np.sum(np.sqrt(np.sum((x.A - y.A) ** 2, axis=0)) ** 4))
                ** 0.25) for x, y in zip(a.samples, b.samples)]
    return du + time_norm(a.times, l4, 4.0)


def _radii(traj: Trajectory, sigma: float) -> tuple[float, float]:
    grid = traj.grid
    t = traj.times
    us = [s.u for s in traj.samples]
    h2 = max(sobolev_norm(grid, u, 2.0) for u in us)
    l2 = max(grid.l2(u) for u in us)
    dudt = max(grid.l2(us[i + 1] - us[i]) / (t[i + 1] - t[i]) for i in range(len(us) - 1))
    r2 = max(sobolev_norm(grid, s.A, sigma) for s in traj.samples) \
        + max(sobolev_norm(grid, s.At, sigma - 1.0) for s in traj.samples)
    return max(h2, l2 + dudt), r2


def picard_solve(grid: Grid, data, p: PhysParams, T: float, samples: int = 20,
                 tol: float = 1e-10, max_iter: int = 50, substeps: int = 4,
                 dealias: bool = True, cross_order: int = 4,
                 diverge_patience: int = 3) -> tuple[Trajectory, PicardReport]:
    """Iterate the solution map from the constant-in-time extension of the data.

    Stops when the distance between successive iterates drops below ``tol``,
    after ``max_iter`` iterates, or once ``diverge_patience`` consecutive
    contraction factors are ``>= 1`` (reported as ``diverged``).
    """
    if T <= 0:
        raise ValueError("T must be positive")
    u0, A0, A1 = data
    for name, F in (("A0", A0), ("A1", A1)):
        r = divergence_residual(grid, F)
        if r > 1e-8:
            raise ValueError(f"{name} is not divergence-free (relative residual {r:.3e})")
    cand = constant_candidate(grid, data, T, samples)
    rep = PicardReport()
    bad = 0
    for _ in range(max_iter):
        # a diverging iteration may overflow; that is reported, not raised
        with np.errstate(over="ignore", invalid="ignore"):
            new = picard_map(cand, data, p, substeps, dealias, cross_order)
            d = picard_distance(new, cand)
        rep.iterates += 1
        if rep.d_distances and rep.d_distances[-1] > 1e-14:
            f = d / rep.d_distances[-1]
            rep.contraction_factors.append(f)
            bad = bad + 1 if f >= 1 else 0
        rep.d_distances.append(d)
        with np.errstate(over="ignore", invalid="ignore"):
            rep.radii.append(_radii(new, p.sigma))
        cand = new
        if not math.isfinite(d):
            rep.diverged = True
            break
        if d < tol:
            rep.converged = True
            break
        if bad >= diverge_patience:
            rep.diverged = True
            break
    cand.meta.update({"T": T, "samples": samples, "substeps": substeps})
    return cand, rep
