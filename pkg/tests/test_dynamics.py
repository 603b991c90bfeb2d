import csv

import numpy as np
import pytest

from kfield.dynamics import (CSV_HEADER, State, diagnose, eq10_residual, four_momentum,
                             geodesic_residual, goo_field_from_energy, goo_on_trajectory,
                             integrate_newton, isotropy_residual, metric_for, proper_time,
                             proper_time_consistency, write_trajectory_csv)
from kfield.errors import DomainError, StepError, SuperluminalError
from kfield.geometry import constant_metric
from kfield.oracle import fd_gradient
from kfield.potentials import Particle, coulomb, free, harmonic, uniform_field

ONE = Particle(1.0)


def oscillator(h, n, x0=0.05, k=100.0):
    return integrate_newton(ONE, harmonic(k), State(0.0, [x0, 0, 0], [0, 0, 0]), h, n)


def test_free_line_is_exact():
    traj = integrate_newton(ONE, free(), State(0.0, [1, 2, 3], [0.5, 0, 0]), 0.01, 100)
    np.testing.assert_array_equal(traj.v, np.broadcast_to([0.5, 0, 0], traj.v.shape))
    np.testing.assert_allclose(traj.x[:, 0], 1 + 0.5 * traj.t, rtol=0, atol=1e-13)


def test_cosine_oscillator():
    # |v| reaches 1 on this orbit, so c = 2 keeps it subluminal
    n = int(round(2 * np.pi / 1e-3))
    h = 2 * np.pi / n
    traj = integrate_newton(ONE, harmonic(1.0), State(0.0, [1, 0, 0], [0, 0, 0], c=2.0), h, n)
    assert traj.x[-1, 0] == pytest.approx(1.0, abs=1e-8)
    np.testing.assert_allclose(traj.x[:, 0], np.cos(traj.t), atol=1e-8)


def test_kepler_circular_radius():
    alpha, r = 0.00625, 0.025
    v = np.sqrt(alpha / r)
    period = 2 * np.pi * r / v
    n = 2000
    traj = integrate_newton(ONE, coulomb(alpha), State(0.0, [r, 0, 0], [0, v, 0]), period / n, n)
    radius = np.linalg.norm(traj.x, axis=-1)
    assert np.max(np.abs(radius - r)) <= 1e-6


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_superluminal_and_bad_step():
    with pytest.raises(SuperluminalError):
        State(0.0, [0, 0, 0], [1.0, 0, 0])
    with pytest.raises(SuperluminalError):
        integrate_newton(ONE, uniform_field([5.0, 0, 0]), State(0.0, [0, 0, 0], [0.9, 0, 0]), 0.01, 100)
    with pytest.raises(StepError):
        integrate_newton(ONE, coulomb(1.0), State(0.0, [0, 0, 0], [0, 0, 0]), 0.01, 2)
    with pytest.raises(ValueError):
        integrate_newton(ONE, free(), State(0.0, [0, 0, 0], [0, 0, 0]), 0.01, 2, scheme="euler")


def test_leapfrog_energy_bounded():
    traj = integrate_newton(ONE, harmonic(1.0), State(0.0, [0.5, 0, 0], [0, 0, 0]), 0.01, 5000, "leapfrog")
    E = traj.energy()
    assert np.max(np.abs(E - E[0])) < 1e-4 * E[0]


def test_goo_on_trajectory():
    traj = integrate_newton(ONE, free(), State(0.0, [0, 0, 0], [0.5, 0, 0]), 0.01, 10)
    g, flags = goo_on_trajectory(traj)
    np.testing.assert_array_equal(g, 0.25)
    assert flags == []
    osc = oscillator(1e-3, 100)
    g, flags = goo_on_trajectory(osc)
    assert flags[0] == (0, "turning_point")
    with pytest.raises(DomainError):
        goo_on_trajectory(osc, strict=True)
    metric = metric_for(osc)
    i = 80
    assert g[i] == pytest.approx(float(metric.value(osc.x[i])), abs=1e-10)


def test_goo_field_from_energy():
    m = goo_field_from_energy(ONE, free(), 0.5 * 0.25)
    assert float(m.value(np.array([3.0, 1, 0]))) == pytest.approx(0.25)
    h = goo_field_from_energy(ONE, harmonic(1.0), 0.125)
    x = np.array([[0.3, 0, 0], [-0.1, 0, 0]])
    np.testing.assert_allclose(h.value(x), 0.25 - x[:, 0] ** 2)
    np.testing.assert_allclose(h.gradient(x)[:, 0], -2 * x[:, 0])
    np.testing.assert_allclose(fd_gradient(lambda xx, tt: h.goo(xx, tt), x), h.gradient(x), atol=1e-9)
    with pytest.raises(DomainError):
        goo_field_from_energy(ONE, harmonic(1.0), -0.1)
    with pytest.raises(DomainError):
        goo_field_from_energy(ONE, harmonic(1.0), 0.125, region=[[1.0, 0, 0]])


def test_isotropy_free_and_fault_injection():
    traj = integrate_newton(ONE, free(), State(0.0, [0, 0, 0], [0.5, 0.1, 0]), 1e-3, 200)
    metric = metric_for(traj)
    assert np.max(np.abs(isotropy_residual(traj, metric))) <= 1e-12
    r = isotropy_residual(traj, metric.scaled(1.1))
    np.testing.assert_allclose(r, 1 - 1 / 1.1, atol=1e-12)
    assert np.min(np.abs(r)) > 0.05


def test_isotropy_second_order():
    worst = []
    for h in (4e-3, 2e-3, 1e-3):
        traj = oscillator(h, int(round(0.6 / h)))
        d = diagnose(traj, metric_for(traj), 0.19)
        worst.append(np.nanmax(np.abs(d.iso[~d.excluded])))
    orders = np.log2(np.array(worst[:-1]) / np.array(worst[1:]))
    assert np.all(np.abs(orders - 2.0) < 0.3)


def test_geodesic_free_and_uniform():
    traj = integrate_newton(ONE, free(), State(0.0, [0, 0, 0], [0.5, 0, 0]), 1e-3, 100)
    assert np.max(np.abs(geodesic_residual(traj, metric_for(traj)).normalized)) == 0.0
    traj = integrate_newton(ONE, uniform_field([2.0, 0, 0]), State(0.0, [0, 0, 0], [0.1, 0.05, 0]), 1e-3, 300)
    assert np.nanmax(geodesic_residual(traj, metric_for(traj)).normalized) < 1e-8


def test_geodesic_fourth_order_and_fault():
    worst = []
    for h in (4e-3, 2e-3, 1e-3):
        traj = oscillator(h, int(round(0.6 / h)))
        d = diagnose(traj, metric_for(traj), 0.19)
        worst.append(np.nanmax(d.geo[~d.excluded]))
    ratios = np.array(worst[:-1]) / np.array(worst[1:])
    assert np.all(np.abs(np.log2(ratios) - 4.0) < 0.3)
    traj = oscillator(1e-3, 600)
    metric = metric_for(traj)
    bad = geodesic_residual(traj, metric.scaled(1.1))
    assert np.nanmax(bad.normalized) > 1e3 * worst[-1]


def test_geodesic_excludes_turning_steps():
    traj = oscillator(1e-3, 100)
    res = geodesic_residual(traj, metric_for(traj))
    assert 0 in res.excluded
    assert np.all(np.isnan(res.residual[res.excluded]))


def test_eq10_along_trajectories():
    traj = oscillator(1e-3, 600)
    r = eq10_residual(traj, metric_for(traj))
    assert np.nanmax(np.abs(r)) <= 1e-9
    free_traj = integrate_newton(ONE, free(), State(0.0, [0, 0, 0], [0.3, 0, 0]), 1e-3, 10)
    assert not np.any(eq10_residual(free_traj, metric_for(free_traj)))


def test_four_momentum_values():
    traj = integrate_newton(ONE, free(), State(0.0, [0, 0, 0], [0.5, 0, 0]), 1e-3, 10)
    fm = four_momentum(traj, metric_for(traj))
    np.testing.assert_allclose(fm.p0, 1.154700538, rtol=1e-9)
    assert fm.max_rel_drift == 0.0
    slow = integrate_newton(ONE, free(), State(0.0, [0, 0, 0], [1e-4, 0, 0]), 1e-3, 2)
    assert four_momentum(slow, metric_for(slow)).p0[0] == pytest.approx(1.0, rel=1e-8)


def test_four_momentum_transport_on_oscillator():
    traj = oscillator(1e-3, 10_000)
    metric = metric_for(traj)
    d = diagnose(traj, metric, 0.19)
    keep = np.ones(traj.n_steps + 1, bool)
    keep[np.flatnonzero(d.excluded)] = keep[np.flatnonzero(d.excluded) + 1] = False
    fm = four_momentum(traj, metric, mask=keep)
    assert fm.max_rel_drift <= 1e-8
    assert fm.reanchored


def test_proper_time():
    traj = integrate_newton(ONE, free(), State(0.0, [0, 0, 0], [np.sqrt(0.75), 0, 0]), 0.01, 100)
    metric = constant_metric(0.75)
    assert proper_time(traj, metric, "a")[-1] == pytest.approx(2.0)
    assert proper_time(traj, metric, "b")[-1] == pytest.approx(0.5)
    zero = constant_metric(0.0)
    np.testing.assert_allclose(proper_time(traj, zero, "a"), traj.t)
    np.testing.assert_allclose(proper_time(traj, zero, "b"), traj.t)


def test_proper_time_consistency_picks_b():
    traj = integrate_newton(ONE, free(), State(0.0, [0, 0, 0], [0.5, 0, 0]), 0.01, 100)
    rep = proper_time_consistency(traj, metric_for(traj))
    assert rep["self_consistent"] == ["b"]
    assert rep["conventions"]["a"]["max_rel_mismatch"] == pytest.approx(0.25, rel=1e-9)


def test_trajectory_csv(tmp_path):
    traj = oscillator(1e-3, 50)
    d = diagnose(traj, metric_for(traj))
    path = tmp_path / "trajectory.csv"
    write_trajectory_csv(path, traj, d)
    rows = list(csv.reader(path.open()))
    assert rows[0] == CSV_HEADER
    assert len(rows) == 52
    assert rows[1][-1] == "turning_point"
    assert float(rows[10][1]) == traj.x[9, 0]
    assert rows[-1][9] == "nan"
