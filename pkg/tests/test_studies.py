import math

import numpy as np

from nlms.physics import PhysParams
from nlms.studies import conservation_study, fit_order, rk4_drift_run

from conftest import standard_state


def test_fit_order_exact():
    dts = [0.1, 0.05, 0.025]
    assert abs(fit_order(dts, [3 * h**4 for h in dts]) - 4) < 1e-12
    assert math.isnan(fit_order(dts, [0, 0, 1e-3]))


def test_drift_run_small():
    s0 = standard_state(16)
    dq, de, res = rk4_drift_run(s0, PhysParams(2.5), 0.01, 0.1, sample_every=0.02,
                                probe_times=[0.05])
    assert 0 <= dq < 1e-6 and 0 <= de < 1e-6 and len(res) == 1


def test_e2_identity_second_order():
    # N=16 under-resolves the Gaussian; the residual then plateaus near 3e-5
    s0 = standard_state(32)
    st = conservation_study(s0, PhysParams(2.5), [0.01, 0.005, 0.0025], 0.2, sample_every=0.04,
                            probe_times=[0.1])
    assert abs(st.e2_order - 2) < 0.3
    d = st.as_dict()
    assert set(d) >= {"charge_order", "energy_order", "e2_order"}
