"""Refinement studies: conservation drift, the modified-energy identity and
Richardson self-convergence."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .diagnostics import (charge, energy, lorentz_l1, modified_energy,
                          modified_energy_rhs, time_norm)
from .integrators import STEPPERS, evolve, galerkin_truncate, rk4_step
from .physics import PhysParams, State


def fit_order(dts: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of ``log(error)`` against ``log(dt)``.

    Returns NaN when fewer than two errors are positive (exact methods).
    """
    dts = np.asarray(dts, float)
    errors = np.asarray(errors, float)
    ok = errors > 0
    if ok.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(dts[ok]), np.log(errors[ok]), 1)[0])


@dataclass
class ConservationStudy:
    dts: list[float]
    charge_drift: list[float]
    energy_drift: list[float]
    e2_residual: list[float] = field(default_factory=list)
    probe_times: list[float] = field(default_factory=list)

    @property
    def charge_order(self) -> float:
        return fit_order(self.dts, self.charge_drift)

    @property
    def energy_order(self) -> float:
        return fit_order(self.dts, self.energy_drift)

    @property
    def e2_order(self) -> float:
        return fit_order(self.dts, self.e2_residual) if self.e2_residual else math.nan

    def as_dict(self) -> dict:
        d = asdict(self)
        d.update(charge_order=self.charge_order, energy_order=self.energy_order,
                 e2_order=self.e2_order)
        return d


def _on_lattice(t: float, dt: float) -> int:
    n = round(t / dt)
    if abs(n * dt - t) > 1e-9 * max(t, dt):
        raise ValueError(f"time {t} is not a multiple of dt={dt}")
    return n


def rk4_drift_run(s0: State, p: PhysParams, dt: float, T: float,
                  sample_every: float = 0.04, probe_times: Sequence[float] = (),
                  dealias: bool = True) -> tuple[float, float, list[float]]:
    """One RK4 run; returns (charge drift, energy drift, E2 residuals).

    Drifts are ``max_t |X(t) - X(0)| / |X(0)|`` over the times
    ``0, sample_every, 2 sample_every, ..., T``.  The E2 residual at a probe
    time ``t`` is ``|(E2(t+dt) - E2(t-dt)) / (2 dt) - rhs(t)|``.
    """
    if dealias:
        s0 = galerkin_truncate(s0)
    n_steps = _on_lattice(T, dt)
    stride = _on_lattice(sample_every, dt)
    probes = [_on_lattice(t, dt) for t in probe_times]
    if any(q < 1 or q + 1 > n_steps for q in probes):
        raise ValueError("probe times need one step of room on each side inside (0, T)")
    need_e2 = {q + d for q in probes for d in (-1, 1)}

    q0, e0 = charge(s0.grid, s0.u), energy(s0, p)
    dq = de = 0.0
    e2: dict[int, float] = {}
    rhs: dict[int, float] = {}
    s = s0
    for n in range(1, n_steps + 1):
        s = rk4_step(s, dt, p, dealias)
        if n % stride == 0 or n == n_steps:
            dq = max(dq, abs(charge(s.grid, s.u) - q0) / abs(q0))
            de = max(de, abs(energy(s, p) - e0) / abs(e0))
        if n in need_e2:
            e2[n] = modified_energy(s, p, dealias).e2
        if n in probes:
            rhs[n] = modified_energy_rhs(s, p, dealias)
    res = [abs((e2[q + 1] - e2[q - 1]) / (2 * dt) - rhs[q]) for q in probes]
    return dq, de, res


def conservation_study(s0: State, p: PhysParams, dts: Sequence[float], T: float,
                       sample_every: float = 0.04, probe_times: Sequence[float] = (),
                       dealias: bool = True) -> ConservationStudy:
    """RK4 drift of charge and energy, and the E2 identity residual, per dt.

    The E2 residual reported per dt is the maximum over the probe times.
    """
    out = ConservationStudy(list(map(float, dts)), [], [], [], list(map(float, probe_times)))
    for dt in dts:
        dq, de, res = rk4_drift_run(s0, p, dt, T, sample_every, probe_times, dealias)
        out.charge_drift.append(dq)
        out.energy_drift.append(de)
        if res:
            out.e2_residual.append(max(res))
    if not probe_times:
        out.e2_residual = []
    return out


def state_distance(a: State, b: State) -> float:
    g = a.grid
    return g.l2(a.u - b.u) + g.l2(a.A - b.A) + g.l2(a.At - b.At)


@dataclass
class SelfConvergence:
    integrator: str
    dts: list[float]
    differences: list[float]

    @property
    def order(self) -> float:
        return fit_order(self.dts, self.differences)

    def as_dict(self) -> dict:
        return {"integrator": self.integrator, "dts": self.dts,
                "differences": self.differences, "order": self.order}


def self_convergence(s0: State, p: PhysParams, integrator: str, dt: float, T: float,
                     levels: int = 2, dealias: bool = True) -> SelfConvergence:
    """Richardson study: runs at ``dt, dt/2, ..., dt/2^levels``.

    ``differences[i]`` is the distance at time ``T`` between the runs with
    ``dts[i]`` and ``dts[i]/2``; its slope against ``dts`` is the observed order.
    """
    if levels < 2:
        raise ValueError("levels must be >= 2 for a fitted order")
    if integrator not in STEPPERS:
        raise ValueError(f"unknown integrator {integrator!r}")
    dts = [dt / 2**j for j in range(levels + 1)]
    finals = []
    for h in dts:
        tr = evolve(s0, p, h, T, integrator, snapshot_every=10**9, dealias=dealias,
                    diagnostics=False, cfl_limit=math.inf)
        if tr.blowup_time is not None:
            raise FloatingPointError(f"blow-up at t={tr.blowup_time} with dt={h}")
        finals.append(tr.samples[-1])
    diffs = [state_distance(finals[i], finals[i + 1]) for i in range(levels)]
    return SelfConvergence(integrator, dts[:-1], diffs)


def cadence_study(s0: State, p: PhysParams, dt: float, T: float, integrator: str = "rk4",
                  levels: int = 3, dealias: bool = True) -> dict:
    """Sensitivity of the time-integrated Lorentz norm to the sampling cadence.

    One run samples ``|F_L|_{L^1}`` every step; the L^2-in-time norm is then
    recomputed from every ``2^j``-th sample.
    """
    times: list[float] = []
    vals: list[float] = []

    def grab(s, _rec):
        times.append(s.t)
        vals.append(lorentz_l1(s))

    evolve(s0, p, dt, T, integrator, snapshot_every=1, dealias=dealias, diagnostics=False,
           store_states=False, on_sample=grab)
    out = []
    for j in range(levels + 1):
        stride = 2**j
        idx = list(range(0, len(times), stride))
        if idx[-1] != len(times) - 1:
            idx.append(len(times) - 1)
        if len(idx) < 2:
            break
        out.append({"cadence_steps": stride,
                    "lorentz_l2t_l1": time_norm([times[i] for i in idx],
                                                [vals[i] for i in idx], 2.0)})
    return {"dt": dt, "T": T, "levels": out}
