import math

import numpy as np
import pytest

from nlms import integrators
from nlms.config import random_solenoidal
from nlms.diagnostics import energy
from nlms.integrators import (BlowUpError, PicardReport, Trajectory, constant_candidate,
                              evolve, linear_interpolant, magnetic_propagator, picard_distance,
                              picard_map, picard_solve, rk4_step, splitting_step)
from nlms.physics import PhysParams, State
from nlms.spectral import Grid, divergence_residual, free_kg_step, free_schrodinger_step
from nlms.studies import self_convergence, state_distance

from conftest import TWO_PI, random_state, standard_state

P = PhysParams(2.5)


def free_wave_state(grid, seed=1):
    A = random_solenoidal(grid, seed, 3.0, 0.5)
    At = random_solenoidal(grid, seed + 1, 3.0, 0.5)
    return integrators.galerkin_truncate(State(grid, 0.0, np.zeros(grid.shape, complex), A, At))


# -- single steps -------------------------------------------------------------

@pytest.mark.parametrize("step", [rk4_step, splitting_step])
def test_zero_state_fixed(g8, step):
    s = step(State.zero(g8), 0.01, P)
    assert np.all(s.u == 0) and np.all(s.A == 0) and np.all(s.At == 0)
    assert s.t == 0.01


def test_rk4_local_error_free_regime(g16):
    s = free_wave_state(g16)

    def err(dt):
        r = rk4_step(s, dt, P)
        A, At = free_kg_step(g16, s.A, s.At, dt, 0)
        return g16.l2(r.A - A) + g16.l2(r.At - At)

    e1, e2 = err(0.04), err(0.02)
    assert 24 < e1 / e2 < 40  # O(dt^5): ratio 32


def test_splitting_free_regime_is_exact(g16):
    s = free_wave_state(g16)
    dt = 0.05
    r = splitting_step(s, dt, P)
    A, At = free_kg_step(g16, s.A, s.At, dt / 2, 0)
    A, At = free_kg_step(g16, A, At, dt / 2, 0)
    assert np.all(r.u == 0)
    assert np.abs(r.A - A).max() < 1e-15 and np.abs(r.At - At).max() < 1e-15
    A1, At1 = free_kg_step(g16, s.A, s.At, dt, 0)
    assert np.abs(r.A - A1).max() < 1e-13


def test_splitting_conserves_l2_without_field(g16):
    s = random_state(g16, 4)
    s = State(g16, 0.0, s.u, 0 * s.A, 0 * s.At)
    r = splitting_step(s, 0.01, P, dealias=False)
    assert abs(g16.l2(r.u) - g16.l2(s.u)) < 1e-14 * g16.l2(s.u)


def test_splitting_agrees_with_rk4_to_third_order():
    s = standard_state(16)

    def gap(dt):
        return state_distance(splitting_step(s, dt, P), rk4_step(s, dt, P))

    ratio = gap(0.01) / gap(0.005)
    assert 6 < ratio < 10  # O(dt^3): ratio 8


def test_step_rejects_bad_dt(g8):
    with pytest.raises(ValueError):
        rk4_step(State.zero(g8), 0.0, P)
    with pytest.raises(ValueError):
        splitting_step(State.zero(g8), -1.0, P)


def test_global_orders():
    s = standard_state(16)
    rk = self_convergence(s, P, "rk4", 0.02, 0.2, levels=2)
    sp = self_convergence(s, P, "splitting", 0.02, 0.2, levels=2)
    assert abs(rk.order - 4) < 0.3
    assert abs(sp.order - 2) < 0.3


# -- evolve ----------------------------------------------------------------------

def test_evolve_T0():
    s0 = standard_state(16)
    tr = evolve(s0, P, 0.01, 0.0)
    assert len(tr.samples) == 1
    assert np.array_equal(tr.samples[0].u, s0.u) and np.array_equal(tr.samples[0].A, s0.A)
    assert tr.blowup_time is None


def test_evolve_free_energy_exact(g16):
    s0 = free_wave_state(g16)
    e0 = energy(s0, P)
    tr = evolve(s0, P, 0.05, 5.0, "splitting", snapshot_every=10)
    for s in tr.samples:
        assert abs(energy(s, P) - e0) < 1e-12 * e0


def test_evolve_trajectory_invariants():
    s0 = standard_state(16)
    tr = evolve(s0, P, 0.01, 0.1, "rk4", snapshot_every=3)
    t = tr.times
    assert np.all(np.diff(t) > 0)
    assert list(np.round(t, 12)) == [0.0, 0.03, 0.06, 0.09, 0.1]
    assert all(s.grid is s0.grid for s in tr.samples)
    assert np.array_equal(tr.samples[0].u, s0.u)
    assert len(tr.diagnostics) == len(tr.samples)
    for s in tr.samples:
        assert divergence_residual(s.grid, s.A) < 1e-10
        assert divergence_residual(s.grid, s.At) < 1e-10


def test_evolve_deterministic():
    s0 = standard_state(16)
    a = evolve(s0, P, 0.01, 0.05, "splitting", diagnostics=False)
    b = evolve(s0, P, 0.01, 0.05, "splitting", diagnostics=False)
    assert all(np.array_equal(x.u, y.u) and np.array_equal(x.A, y.A)
               for x, y in zip(a.samples, b.samples))


def test_evolve_splitting_keeps_gauge():
    tr = evolve(standard_state(16), P, 0.02, 0.2, "splitting", snapshot_every=2)
    for s in tr.samples:
        assert divergence_residual(s.grid, s.A) < 1e-10
        assert divergence_residual(s.grid, s.At) < 1e-10


def test_evolve_rejects_bad_input(g8):
    X = g8.coords()[0] + np.zeros(g8.shape)
    A = np.stack([np.sin(X), 0 * X, 0 * X])
    bad = State(g8, 0.0, np.zeros(g8.shape, complex), A, 0 * A)
    with pytest.raises(ValueError):
        evolve(bad, P, 0.01, 0.1)
    with pytest.raises(ValueError):
        evolve(State.zero(g8), P, 0.01, 0.1, "euler")
    with pytest.raises(ValueError):
        evolve(State.zero(g8), P, 1.0, 2.0, "rk4")  # stability bound


def test_blowup_is_signalled_once(monkeypatch):
    calls = {"n": 0}

    def flaky(s, dt, p, dealias=True):
        calls["n"] += 1
        if calls["n"] >= 4:
            raise BlowUpError("boom")
        return s.with_(t=s.t + dt)

    monkeypatch.setitem(integrators.STEPPERS, "rk4", flaky)
    s0 = State.zero(Grid(8, TWO_PI))
    seen = []
    tr = evolve(s0, P, 0.1, 2.0, "rk4", snapshot_every=1, diagnostics=False,
                on_sample=lambda s, r: seen.append(s.t))
    assert tr.blowup_time == pytest.approx(0.4)
    assert calls["n"] == 4
    assert len(seen) == len(tr.samples) == 4
    assert max(seen) < tr.blowup_time


def test_real_blowup_detected():
    # far beyond the RK4 stability region the solution overflows
    s0 = free_wave_state(Grid(16, TWO_PI))
    tr = evolve(s0, P, 0.5, 500.0, "rk4", snapshot_every=50, diagnostics=False,
                cfl_limit=math.inf)
    assert tr.blowup_time is not None
    assert all(s.is_finite() for s in tr.samples)
    assert tr.times[-1] < tr.blowup_time


# -- magnetic propagator ------------------------------------------------------

def _driving_field(grid):
    A0 = random_solenoidal(grid, 1, 2.0, 1.0)
    A1 = random_solenoidal(grid, 2, 2.0, 1.0)
    return lambda t: np.cos(5 * t) * A0 + np.sin(5 * t) * A1


def test_propagator_without_field(g16):
    u0 = random_state(g16, 3).u
    out = magnetic_propagator(g16, u0, np.zeros((3, *g16.shape)), 0.1, 0.35, substeps=3)
    assert np.abs(out - free_schrodinger_step(g16, u0, 0.25)).max() < 1e-13


def test_propagator_identity(g16):
    u0 = random_state(g16, 3).u
    assert np.array_equal(magnetic_propagator(g16, u0, _driving_field(g16), 0.2, 0.2), u0)


def test_propagator_isometry(g16):
    u0 = random_state(g16, 3).u
    out = magnetic_propagator(g16, u0, _driving_field(g16), 0.0, 0.1, substeps=100)
    assert abs(g16.l2(out) - g16.l2(u0)) < 1e-10 * g16.l2(u0)


def test_propagator_semigroup(g16):
    u0 = random_state(g16, 3).u
    Af = _driving_field(g16)

    def gap(n):
        one = magnetic_propagator(g16, u0, Af, 0.0, 0.1, n)
        two = magnetic_propagator(g16, magnetic_propagator(g16, u0, Af, 0.0, 0.04, n),
                                  Af, 0.04, 0.1, n)
        return g16.l2(one - two)

    assert gap(10) / gap(20) >= 3


def test_propagator_rejects_compressive(g8):
    X = g8.coords()[0] + np.zeros(g8.shape)
    A = np.stack([np.sin(X), 0 * X, 0 * X])
    with pytest.raises(ValueError):
        magnetic_propagator(g8, np.ones(g8.shape, complex), A, 0, 0.1)
    with pytest.raises(ValueError):
        magnetic_propagator(g8, np.ones(g8.shape, complex), 0 * A, 0, 0.1, substeps=0)


def test_linear_interpolant(g8):
    f0, f1 = np.zeros((3, *g8.shape)), np.ones((3, *g8.shape))
    A = linear_interpolant([0.0, 2.0], [f0, f1])
    assert np.allclose(A(0.5), 0.25)


# -- Picard mode ------------------------------------------------------------------

def test_picard_zero_fixed_point(g8):
    z = np.zeros((3, *g8.shape))
    data = (np.zeros(g8.shape, complex), z, z)
    out = picard_map(constant_candidate(g8, data, 0.1, 4), data, P)
    assert all(np.all(s.u == 0) and np.all(s.A == 0) for s in out.samples)
    tr, rep = picard_solve(g8, data, P, 0.1, samples=4)
    assert rep.iterates == 1 and rep.converged and rep.d_distances == [0.0]


def test_picard_map_linear_flows():
    s = standard_state(16)
    g = s.grid
    A1 = random_solenoidal(g, 5, 3.0, 0.3)
    A1 = integrators.galerkin_truncate(State(g, 0, s.u, s.A, A1)).At
    data = (s.u, s.A, A1)
    T, n = 0.1, 5
    cand = constant_candidate(g, data, T, n)
    out = picard_map(cand, data, P, substeps=2, with_sources=False)
    for j, st in enumerate(out.samples):
        u_ref = magnetic_propagator(g, s.u, s.A, 0.0, st.t, 2 * j, dealias=True) \
            if j else s.u
        A_ref, At_ref = free_kg_step(g, s.A, A1, st.t, 1)
        assert np.abs(st.u - u_ref).max() < 1e-12
        assert np.abs(st.A - A_ref).max() < 1e-12 and np.abs(st.At - At_ref).max() < 1e-12


def test_picard_sampling_errors(g8):
    z = np.zeros((3, *g8.shape))
    data = (np.zeros(g8.shape, complex), z, z)
    bad = Trajectory([State(g8, t, data[0], z, z) for t in (0.0, 0.1, 0.3)])
    with pytest.raises(ValueError):
        picard_map(bad, data, P)
    with pytest.raises(ValueError):
        picard_distance(constant_candidate(g8, data, 0.1, 2), constant_candidate(g8, data, 0.2, 2))


def test_picard_small_data_contracts():
    s = standard_state(16)
    tr, rep = picard_solve(s.grid, (s.u, s.A, s.At), P, 0.05, samples=10)
    assert rep.converged and not rep.diverged
    assert all(f < 1 for f in rep.contraction_factors)
    assert all(d >= 0 for d in rep.d_distances)
    assert len(rep.radii) == rep.iterates
    d = rep.as_dict()
    assert d["converged"] and len(d["d_distances"]) == rep.iterates


def test_picard_long_time_reports_failure():
    s = standard_state(16)
    tr, rep = picard_solve(s.grid, (s.u, s.A, s.At), P, 10.0, samples=100, substeps=2,
                           max_iter=8)
    assert rep.diverged and not rep.converged
    assert rep.contraction_factors[-1] >= 1


def test_contraction_factor_guard():
    rep = PicardReport()
    assert rep.contraction_factors == [] and not rep.converged


def test_picard_matches_rk4_on_short_interval():
    s = standard_state(16)
    T, n = 0.05, 10
    tr, rep = picard_solve(s.grid, (s.u, s.A, s.At), P, T, samples=n)
    ref = evolve(s, P, T / (5 * n), T, "rk4", snapshot_every=5, diagnostics=False)
    assert picard_distance(tr, Trajectory(ref.samples)) < 1e-5


# -- drift on the standard data (shared with the acceptance run) -------------------

def test_small_gaussian_charge_drift(rk4_study):
    i = rk4_study.dts.index(1e-3)
    assert rk4_study.charge_drift[i] < 1e-8
