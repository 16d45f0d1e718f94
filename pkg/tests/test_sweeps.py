import math

import pytest

from config.settings import RunConfig
from core.simulator import RATE_COLUMNS, Simulator
from sweeps.manager import DONE, FAILED, PENDING, SweepManager


def test_manager_lifecycle():
    manager = SweepManager()
    assert manager.add_point(0, 0.1)
    assert not manager.add_point(0, 0.2)
    assert manager.add_point(1, 0.3)
    assert manager.points[0]['status'] == PENDING
    assert manager.points[0]['value'] == 0.1

    assert manager.mark_done(0, {'Gamma2R': 1e-6})
    assert manager.mark_failed(1, 'defective')
    assert not manager.mark_done(7, {})
    assert not manager.mark_failed(7, 'missing')

    assert manager.points[0]['status'] == DONE
    assert manager.points[1] == {'status': FAILED, 'value': 0.3, 'row': None, 'error': 'defective'}
    assert manager.failed() == [1]
    assert manager.summary() == {PENDING: 0, DONE: 1, FAILED: 1}


def test_sweep_grids(make_config):
    log = Simulator(make_config(sweep={'variable': 'gamma_prime', 'grid': 'log', 'min': 1e-6, 'max': 1e-1, 'points': 6}))
    grid = log.sweep_grid()
    assert len(grid) == 6
    assert grid[0] == pytest.approx(1e-6)
    assert grid[-1] == pytest.approx(1e-1)
    assert grid[1] / grid[0] == pytest.approx(10.0)

    linear = Simulator(make_config(sweep={'variable': 'T', 'grid': 'linear', 'min': 0.02, 'max': 0.15, 'points': 14}))
    assert linear.sweep_grid()[1] - linear.sweep_grid()[0] == pytest.approx(0.01)

    single = Simulator(make_config())
    assert list(single.sweep_grid()) == [0.150]
    assert single.sweep_variable == 'T'


def test_point_params_override_one_variable(make_config):
    simulator = Simulator(make_config(sweep={'variable': 'gf_prime', 'grid': 'linear', 'min': 0.005, 'max': 0.02, 'points': 4}))
    params, T = simulator.point_params(0.01)
    base = simulator.normalized_params()
    assert T == 0.150
    assert params.g_f_prime == 0.01
    assert params.gamma_prime == base.gamma_prime
    assert params.n_bar == base.n_bar


def test_rates_rows_in_grid_order(make_config):
    simulator = Simulator(make_config(
        simulation={'jobs': 3, 'gf_prime': 0.01},
        sweep={'variable': 'gamma_prime', 'grid': 'log', 'min': 1e-5, 'max': 1e-2, 'points': 4},
    ))
    rows = simulator.rates()
    assert [row['gamma_prime'] for row in rows] == pytest.approx(list(simulator.sweep_grid()))
    for row in rows:
        assert set(row) == set(RATE_COLUMNS)
        assert row['error'] is None
        assert row['sweep_var'] == 'gamma_prime'
        assert row['Gamma2R'] > 0
        assert row['Gamma2R'] >= row['Gamma2R_unfiltered'] - 1e-15
    assert simulator.sweeps.summary() == {PENDING: 0, DONE: 4, FAILED: 0}


def test_rates_record_failed_points(make_config, monkeypatch):
    simulator = Simulator(make_config(
        sweep={'variable': 'T', 'grid': 'linear', 'min': 0.05, 'max': 0.15, 'points': 3},
    ))
    original = simulator.rate_point

    def flaky(value):
        if math.isclose(value, 0.1):
            raise ValueError('injected failure')
        return original(value)

    monkeypatch.setattr(simulator, 'rate_point', flaky)
    rows = simulator.rates()
    assert [row['error'] for row in rows] == [None, 'injected failure', None]
    assert rows[1]['T_K'] == pytest.approx(0.1)
    assert rows[1]['Gamma2R'] is None
    assert simulator.sweeps.failed() == [1]


def test_rates_are_deterministic(make_config):
    config = make_config(
        simulation={'jobs': 2},
        sweep={'variable': 'T', 'grid': 'linear', 'min': 0.05, 'max': 0.15, 'points': 3},
    )
    assert Simulator(config).rates() == Simulator(config).rates()


def test_zero_temperature_rate(make_config):
    simulator = Simulator(make_config(bath={'R': 50.0, 'T': 0.0}))
    row = simulator.rates()[0]
    assert row['n_bar'] == 0.0
    assert row['Gamma2R'] == pytest.approx(0.0, abs=1e-12)
    assert row['T2_s'] == pytest.approx(1 / 5026.0, rel=1e-6)


def test_run_config_round_trip(make_config):
    config = make_config(sweep={'variable': 'T', 'grid': 'linear', 'min': 0.02, 'max': 0.15, 'points': 14})
    assert RunConfig.model_validate(config.echo()) == config


def test_repeated_sweep_starts_fresh(make_config, monkeypatch):
    simulator = Simulator(make_config(
        sweep={'variable': 'T', 'grid': 'linear', 'min': 0.05, 'max': 0.15, 'points': 2},
    ))
    original = simulator.rate_point
    def broken(value):
        raise ValueError('injected failure')

    monkeypatch.setattr(simulator, 'rate_point', broken)
    simulator.rates()
    assert simulator.sweeps.failed() == [0, 1]

    monkeypatch.setattr(simulator, 'rate_point', original)
    rows = simulator.rates()
    assert all(row['error'] is None for row in rows)
    assert simulator.sweeps.failed() == []
    assert simulator.sweeps.summary() == {PENDING: 0, DONE: 2, FAILED: 0}
