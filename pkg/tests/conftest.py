import math

import numpy as np
import pytest

from config.settings import RunConfig
from core.circuit import BathSpec, CircuitSpec, NormalizedParams, derive_params

REFERENCE_CIRCUIT = dict(
    C_A=90e-15,
    C_f=800e-15,
    C_g=5e-15,
    L_L=140e-12,
    k_coupling=0.005,
    omega_A=2 * math.pi * 4.0e9,
    omega_f=2 * math.pi * 6.1e9,
)

REFERENCE_INI = """\
[CIRCUIT]
C_A = 90e-15
C_f = 800e-15
C_g = 5e-15
L_L = 140e-12
k_coupling = 0.005
omega_A_hz = 4.0e9
omega_f_hz = 6.1e9

[BATH]
R = 50
omega_c = 1e12
T = {T}
"""


@pytest.fixture
def circuit():
    return CircuitSpec(**REFERENCE_CIRCUIT)


@pytest.fixture
def bath():
    return BathSpec(R=50.0, omega_c=1e12, T=0.150)


@pytest.fixture
def derived(circuit, bath):
    return derive_params(circuit, bath)


@pytest.fixture
def params(derived):
    """回路から導出した 150 mK の規格化パラメータ"""
    return derived.normalized()


@pytest.fixture
def toy_params():
    # 小さな S でも遷移が分離する程度の結合
    return NormalizedParams(omega_f_prime=1.525, g_f_prime=0.02, gamma_prime=0.01, n_bar=0.3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_density(rng, dim):
    m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = m @ m.conj().T
    return rho / np.trace(rho)


@pytest.fixture
def write_config(tmp_path):
    def _write(text, name='config.ini'):
        path = tmp_path / name
        path.write_text(text, encoding='utf-8')
        return str(path)
    return _write


@pytest.fixture
def make_density(rng):
    return lambda dim: random_density(rng, dim)


@pytest.fixture
def make_config():
    """基準回路 (150 mK) を基準に、指定したセクションだけ差し替えた RunConfig"""
    def _make(**sections):
        raw = {'circuit': dict(REFERENCE_CIRCUIT), 'bath': {'R': 50.0, 'omega_c': 1e12, 'T': 0.150}}
        raw.update(sections)
        return RunConfig.model_validate(raw)
    return _make


@pytest.fixture
def reference_ini(write_config):
    """基準回路の INI を書き出す (追加セクションは extra で渡す)"""
    def _write(T=0.150, extra='', name='config.ini'):
        return write_config(REFERENCE_INI.format(T=T) + extra, name)
    return _write
