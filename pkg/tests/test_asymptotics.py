import numpy as np
import pytest

from gptrap.core import ParameterError, TrapPotential, build_radial_grid
from gptrap.asymptotics import (
    diluteness_sweep,
    gp_tf_sweep,
    scaling_check,
    scaling_report,
    tf_collapse_check,
    worker_count,
)

HARMONIC = TrapPotential()


def test_scaling_identity_examples():
    grid = build_radial_grid(3, 9.0, 3601)
    assert scaling_check(10, 0.1, HARMONIC, grid) < 1e-6
    rep = scaling_report(100, 1.0, HARMONIC, grid)
    assert rep.energy_error < 1e-6 and rep.profile_error < 1e-6
    assert scaling_check(1.0, 3.0, HARMONIC, grid) == 0.0


def test_gp_tf_sweep_2d_monotone():
    recs = gp_tf_sweep(HARMONIC, 2, [10, 100, 1000])
    ratios = [r.ratio for r in recs]
    assert all(r > 1 for r in ratios)
    assert ratios[0] > ratios[1] > ratios[2]
    assert all(r.E_tf <= r.E_gp for r in recs)


def test_gp_tf_sweep_rejects_unsorted():
    with pytest.raises(ParameterError):
        gp_tf_sweep(HARMONIC, 3, [100, 10])


def test_tf_collapse_identity_case():
    assert tf_collapse_check(2.0, 3, [1.0]) == [0.0]
    assert max(tf_collapse_check(2.0, 3, [1e3])) < 1e-9


def test_gp_collapse_decreases():
    dev = tf_collapse_check(2.0, 3, [1e2, 1e3, 1e4], kind="gp")
    assert dev[0] > dev[1] > dev[2]


def test_diluteness_product_constant():
    recs = diluteness_sweep(HARMONIC, 100.0, [1, 10, 100])
    prods = np.array([r.diluteness * r.N**2 for r in recs])
    assert np.ptp(prods) / prods.mean() < 0.2
    assert all(r.E_tf <= r.E_gp for r in recs)


def test_worker_count(monkeypatch):
    monkeypatch.delenv("GPTRAP_THREADS", raising=False)
    assert worker_count() == 1
    monkeypatch.setenv("GPTRAP_THREADS", "3")
    assert worker_count() == 3 and worker_count(2) == 2 and worker_count(8) == 3


def test_parallel_sweep_matches_serial(monkeypatch):
    serial = gp_tf_sweep(HARMONIC, 3, [10, 100])
    monkeypatch.setenv("GPTRAP_THREADS", "2")
    par = gp_tf_sweep(HARMONIC, 3, [10, 100], workers=2)
    assert [r.E_gp for r in serial] == [r.E_gp for r in par]
