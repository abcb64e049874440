import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nlms.config import _periodic_gaussian, random_solenoidal
from nlms.diagnostics import (DiagnosticRecord, MixedNormSpec, charge, diamagnetic_report,
                              diamagnetic_violation, energy, energy_terms, growth_fit,
                              lorentz_l1, lorentz_l2t_l1, m_norm, magnetic_sobolev_norm,
                              mixed_norm, modified_energy, modified_energy_rhs,
                              modified_energy_rhs_terms, record, running_sup, sobolev_norm,
                              time_norm, wsp_norm)
from nlms.integrators import Trajectory, evolve
from nlms.physics import PhysParams, State
from nlms.spectral import Grid

from conftest import TWO_PI, plane_wave, random_state, standard_state


def const_state(grid, c):
    z = np.zeros((3, *grid.shape))
    return State(grid, 0.0, np.full(grid.shape, c + 0j), z, z)


# -- charge / energy ----------------------------------------------------------

def test_charge_examples(g8):
    assert charge(g8, np.zeros(g8.shape)) == 0
    assert math.isclose(charge(g8, np.full(g8.shape, 0.5 - 0.5j)), 0.5 * g8.volume)
    e, _ = plane_wave(g8, (1, 2, 3))
    assert math.isclose(charge(g8, e), g8.volume, rel_tol=1e-14)


def test_energy_zero_state(g8):
    assert energy(State.zero(g8), PhysParams(2.5)) == 0


def test_energy_of_free_mode(g16):
    a, kappa = 0.8, 2.0
    X = g16.coords()[0] + np.zeros(g16.shape)
    A = np.stack([0 * X, a * np.cos(kappa * X), 0 * X])
    s = State(g16, 0.0, np.zeros(g16.shape, complex), A, 0 * A)
    assert math.isclose(energy(s, PhysParams(2.5)), a**2 * kappa**2 * g16.volume / 4,
                        rel_tol=1e-13)


def test_energy_of_constant(g8):
    c = 0.9
    assert math.isclose(energy(const_state(g8, c), PhysParams(3.0)), c**4 * g8.volume / 2,
                        rel_tol=1e-13)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10**6), gamma=st.floats(1.05, 4.0))
def test_energy_terms_nonnegative(seed, gamma):
    s = random_state(Grid(8, TWO_PI), seed)
    terms = energy_terms(s, PhysParams(gamma))
    assert all(v >= 0 for v in terms.values())
    assert charge(s.grid, s.u) >= 0


# -- modified energy ----------------------------------------------------------

def test_modified_energy_zero(g8):
    assert tuple(modified_energy(State.zero(g8), PhysParams(2.5))) == (0.0, 0.0, 0.0)
    assert modified_energy_rhs(State.zero(g8), PhysParams(2.5)) == 0


@pytest.mark.parametrize("gamma", [2.5, 3.0, 3.7])
def test_modified_energy_constant(g8, gamma):
    c = 0.7
    me = modified_energy(const_state(g8, c), PhysParams(gamma))
    V = g8.volume
    assert math.isclose(me.e2, V * c ** (2 * gamma) / gamma, rel_tol=1e-12)
    assert math.isclose(me.s_part, c**gamma * math.sqrt(V), rel_tol=1e-12)


def test_curvature_term_absent_at_cubic(g16):
    s = random_state(g16, 3)
    terms = modified_energy_rhs_terms(s, PhysParams(3.0))
    assert terms["curvature"] == 0.0
    assert modified_energy_rhs_terms(s, PhysParams(2.5))["curvature"] != 0.0


def test_modified_energy_rhs_needs_gamma_above_two(g8):
    with pytest.raises(ValueError):
        modified_energy_rhs(random_state(g8, 1), PhysParams(2.0))


# -- Sobolev-type norms -------------------------------------------------------

def test_sobolev_zero_order_is_l2(g16, rng):
    f = rng.standard_normal(g16.shape)
    assert math.isclose(sobolev_norm(g16, f, 0), g16.l2(f), rel_tol=1e-13)


@pytest.mark.parametrize("s", [-1.0, 0.5, 4 / 3, 2.0])
def test_sobolev_single_mode(g8, s):
    e, k = plane_wave(g8, (1, -2, 1))
    a = 0.3 - 0.4j
    expect = abs(a) * (1 + k @ k) ** (s / 2) * math.sqrt(g8.volume)
    assert math.isclose(sobolev_norm(g8, a * e, s), expect, rel_tol=1e-13)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10**6), s1=st.floats(-2, 3), ds=st.floats(0, 2))
def test_sobolev_monotone(seed, s1, ds):
    g = Grid(8, 3.0)
    f = np.random.default_rng(seed).standard_normal(g.shape)
    assert sobolev_norm(g, f, s1) <= sobolev_norm(g, f, s1 + ds) * (1 + 1e-14)


def test_wsp_examples(g16, rng):
    f = rng.standard_normal(g16.shape)
    assert math.isclose(wsp_norm(g16, f, 0, 2), sobolev_norm(g16, f, 0), rel_tol=1e-13)
    for p in (1, 3, math.inf):
        c = -1.5
        expect = abs(c) * (g16.volume ** (1 / p) if p != math.inf else 1)
        assert math.isclose(wsp_norm(g16, np.full(g16.shape, c), 1.3, p), expect,
                            rel_tol=1e-13)
    X = g16.coords()[0] + np.zeros(g16.shape)
    assert math.isclose(wsp_norm(g16, np.cos(3 * X), 0, math.inf), 1.0, rel_tol=1e-14)
    with pytest.raises(ValueError):
        wsp_norm(g16, f, 0, 0.5)


@pytest.mark.parametrize("order", [1, 2])
def test_magnetic_norm_reduces(g16, order):
    s = random_state(g16, 5)
    assert abs(magnetic_sobolev_norm(g16, s.u, 0 * s.A, order)
               - sobolev_norm(g16, s.u, order)) < 1e-12 * sobolev_norm(g16, s.u, order)


def test_magnetic_norm_plane_wave(g8):
    e, k = plane_wave(g8, (1, 1, 0))
    a = np.array([0.2, -0.5, 0.3])
    A = np.ones((3, *g8.shape)) * a[:, None, None, None]
    q = np.sum((k - a) ** 2)
    V = g8.volume
    assert math.isclose(magnetic_sobolev_norm(g8, e, A, 1), math.sqrt(q + 1) * math.sqrt(V),
                        rel_tol=1e-12)
    assert math.isclose(magnetic_sobolev_norm(g8, e, A, 2), (q + 1) * math.sqrt(V),
                        rel_tol=1e-12)
    with pytest.raises(ValueError):
        magnetic_sobolev_norm(g8, e, A, 1.5)


@pytest.mark.parametrize("order", [1, 2])
def test_magnetic_norm_equivalence_window(order):
    # |A|_{H^1} fixed, random u: the two norms stay within fixed ratios
    g = Grid(16, TWO_PI)
    A = random_solenoidal(g, 99, 2.0, 1.0)
    A *= 2.0 / sobolev_norm(g, A, 1)
    ratios = []
    for seed in range(12):
        u = random_state(g, seed).u
        ratios.append(magnetic_sobolev_norm(g, u, A, order) / sobolev_norm(g, u, order))
    assert 0.25 < min(ratios) and max(ratios) < 4.0


def test_m_norm_examples(g8):
    assert m_norm(State.zero(g8)) == 0
    e, _ = plane_wave(g8, (1, 0, 0))
    z = np.zeros((3, *g8.shape))
    s = State(g8, 0.0, e, z, z)
    assert math.isclose(m_norm(s, 2.0, 1.5), sobolev_norm(g8, e, 2.0))


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10**6), lam=st.floats(0.01, 100))
def test_m_norm_is_a_norm(seed, lam):
    g = Grid(8, TWO_PI)
    a, b = random_state(g, seed), random_state(g, seed + 1)
    na, nb = m_norm(a), m_norm(b)
    ab = State(g, 0.0, a.u + b.u, a.A + b.A, a.At + b.At)
    assert m_norm(ab) <= (na + nb) * (1 + 1e-10)
    scaled = State(g, 0.0, lam * a.u, lam * a.A, lam * a.At)
    assert math.isclose(m_norm(scaled), lam * na, rel_tol=1e-10)


# -- mixed norms ----------------------------------------------------------------

def test_admissible_pairs():
    assert MixedNormSpec(4, 0, 4).kg_admissible
    assert MixedNormSpec(2, 0.5, 6).schrodinger_admissible
    assert not MixedNormSpec(2, 0.5, 6).kg_admissible
    assert MixedNormSpec(math.inf, 0, 2).schrodinger_admissible
    with pytest.raises(ValueError):
        MixedNormSpec(0.5, 0, 2)


def test_mixed_norm_constant_series(g8, rng):
    f = rng.standard_normal(g8.shape)
    T = 0.8
    series = [(t, f) for t in np.linspace(0, T, 5)]
    for q in (1, 2, 4):
        expect = T ** (1 / q) * wsp_norm(g8, f, 0.5, 3)
        assert math.isclose(mixed_norm(g8, series, MixedNormSpec(q, 0.5, 3)), expect,
                            rel_tol=1e-12)


def test_mixed_norm_sup_and_trapezoid(g8, rng):
    a, b = rng.standard_normal(g8.shape), 2 * rng.standard_normal(g8.shape)
    T = 0.3
    spec = MixedNormSpec(math.inf, 0, 2)
    assert mixed_norm(g8, [(0, a), (T, b)], spec) == max(g8.l2(a), g8.l2(b))
    val = mixed_norm(g8, [(0, a), (T, b)], MixedNormSpec(2, 0, 2))
    assert math.isclose(val, math.sqrt(T * (g8.l2(a) ** 2 + g8.l2(b) ** 2) / 2), rel_tol=1e-13)


def test_mixed_norm_errors(g8):
    f = np.ones(g8.shape)
    with pytest.raises(ValueError):
        mixed_norm(g8, [], MixedNormSpec(2, 0, 2))
    with pytest.raises(ValueError):
        mixed_norm(g8, [(1.0, f), (0.0, f)], MixedNormSpec(2, 0, 2))
    with pytest.raises(ValueError):
        time_norm([0.0], [1.0], 2)


# -- diamagnetic inequality -----------------------------------------------------

def test_diamagnetic_constant_modulus(g16):
    e, _ = plane_wave(g16, (1, 0, 0))
    A = random_solenoidal(g16, 3, 1.0, 0.5)
    assert diamagnetic_violation(g16, 0.7 * e, A) == 0.0


def test_diamagnetic_real_positive(g16):
    X, Y, Z = g16.coords()
    u = np.exp(np.cos(X) + 0.5 * np.sin(Y) * np.cos(Z)) + 0j
    assert diamagnetic_violation(g16, u, np.zeros((3, *g16.shape))) < 1e-13


def _equality_case(N, w=0.2, m=(1, 2, -1)):
    g = Grid(N, TWO_PI)
    X, Y, Z = g.coords()
    c = g.L / 2
    a = _periodic_gaussian(X, c, w, g.L) * _periodic_gaussian(Y, c, w, g.L) \
        * _periodic_gaussian(Z, c, w, g.L)
    u = 0.5 * a * np.exp(1j * (m[0] * X + m[1] * Y + m[2] * Z))
    A = np.ones((3, *g.shape)) * np.array(m, float)[:, None, None, None]
    return g, u, A


def test_diamagnetic_refinement():
    g1, u1, A1 = _equality_case(16)
    g2, u2, A2 = _equality_case(32)
    rep = diamagnetic_report(g1, u1, A1, refined=(g2, u2, A2))
    assert rep.max_violation > 0
    assert rep.refinement_slope < 0


# -- Lorentz force -----------------------------------------------------------

def test_lorentz_zero_trajectory(g8):
    tr = Trajectory([State.zero(g8, t) for t in (0.0, 0.5, 1.0)])
    assert lorentz_l2t_l1(tr) == 0


def test_lorentz_static_state(g16):
    s = random_state(g16, 8)
    T = 0.6
    tr = Trajectory([s.with_(t=t) for t in np.linspace(0, T, 4)])
    assert math.isclose(lorentz_l2t_l1(tr), math.sqrt(T) * lorentz_l1(s), rel_tol=1e-13)


def test_lorentz_short_run_finite():
    s0 = standard_state(16)
    tr = evolve(s0, PhysParams(2.5), 0.01, 0.1, "rk4", snapshot_every=2)
    v = lorentz_l2t_l1(tr)
    assert math.isfinite(v) and v > 0


# -- growth fit ------------------------------------------------------------------

def test_growth_fit_power_law():
    T = np.linspace(0, 10, 21)
    fit = growth_fit(zip(T, (1 + T) ** 2))
    assert abs(fit.poly_exponent - 2) < 1e-6
    assert fit.residuals["poly_rms"] < 1e-10


def test_growth_fit_constant():
    T = np.linspace(0, 3, 7)
    fit = growth_fit(zip(T, np.full_like(T, 4.2)))
    assert fit.poly_exponent == pytest.approx(0, abs=1e-12)
    assert fit.exp_rate == pytest.approx(0, abs=1e-12)


def test_growth_fit_exponential_rate():
    T = np.linspace(0, 2, 9)
    fit = growth_fit(zip(T, 3 * np.exp(0.7 * T)))
    assert fit.exp_rate == pytest.approx(0.7, abs=1e-10)


def test_growth_fit_errors():
    with pytest.raises(ValueError):
        growth_fit([(0, 1), (1, 2), (2, 3)])
    with pytest.raises(ValueError):
        growth_fit([(0, 1), (1, 3), (2, 2), (3, 4)])
    assert list(running_sup([1, 3, 2, 4])) == [1, 3, 3, 4]


# -- record ----------------------------------------------------------------------

def test_record_fields(g16):
    s = standard_state(16)
    rec = record(s, PhysParams(2.5))
    assert DiagnosticRecord.columns() == [
        "t", "charge", "energy", "e2", "e2_rhs", "h1_u", "h2_u", "sigma_A",
        "sigma_minus1_At", "m_norm", "lorentz_l1", "diamag_violation"]
    assert rec.charge > 0 and rec.energy > 0 and rec.lorentz_l1 >= 0
    assert rec.diamag_violation >= 0
    assert math.isclose(rec.m_norm, m_norm(s), rel_tol=1e-14)
    assert rec.sobolev[2] == rec.h2_u
    assert math.isnan(record(s, PhysParams(1.5)).e2_rhs)
