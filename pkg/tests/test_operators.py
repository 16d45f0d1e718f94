import math

import numpy as np
import pytest

from core.circuit import NormalizedParams
from core.errors import DegenerateGrouping
from core.operators import (
    HilbertSpec,
    annihilation,
    collect_families,
    coupling_operator,
    dispersive_hamiltonian,
    dispersive_transform,
    eigenenergy,
    jc_hamiltonian,
    jump_operators,
    number_operator,
    occupancy_truncation,
    pauli,
    qubit_operator,
    resonator_operator,
    truncation_select,
)


def test_basis_layout():
    spec = HilbertSpec(4)
    assert spec.dim == 8
    assert spec.index('g', 3) == 3
    assert spec.index('e', 0) == 4
    assert list(spec.states())[5] == (1, 1)
    with pytest.raises(ValueError):
        HilbertSpec(1)


def test_annihilation():
    spec = HilbertSpec(2)
    a = annihilation(spec)
    assert a[spec.index('g', 0), spec.index('g', 1)] == 1.0
    assert np.all(a[:, spec.index('g', 0)] == 0)
    spec = HilbertSpec(6)
    a = annihilation(spec)
    np.testing.assert_allclose(a.conj().T @ a, number_operator(spec))
    np.testing.assert_allclose(np.diag(number_operator(spec)).real, np.tile(np.arange(6), 2))


def test_canonical_commutator_interior():
    S = 6
    a = np.diag(np.sqrt(np.arange(1, S, dtype=float)), k=1)
    comm = a @ a.T - a.T @ a
    np.testing.assert_allclose(comm[:S - 1, :S - 1], np.eye(S - 1), atol=1e-14)
    spec = HilbertSpec(S)
    full = annihilation(spec)
    comm = full @ full.conj().T - full.conj().T @ full
    interior = [spec.index(q, n) for q in 'ge' for n in range(S - 1)]
    np.testing.assert_allclose(comm[np.ix_(interior, interior)], np.eye(len(interior)), atol=1e-14)


def test_pauli_algebra():
    spec = HilbertSpec(3)
    sp, sm = pauli('+', spec), pauli('-', spec)
    sx, sy, sz = pauli('x', spec), pauli('y', spec), pauli('z', spec)
    excited = qubit_operator(np.diag([0.0, 1.0]), spec)
    np.testing.assert_allclose(sp @ sm, excited)
    np.testing.assert_allclose(sy, 1j * (sm - sp))
    np.testing.assert_allclose(sx @ sz + sz @ sx, np.zeros((6, 6)), atol=1e-15)
    np.testing.assert_allclose(sz, 2 * excited - np.eye(6))
    with pytest.raises(ValueError):
        pauli('w', spec)


def test_resonator_operator_acts_on_both_qubit_states():
    spec = HilbertSpec(3)
    op = resonator_operator(np.diag([1.0, 2.0, 3.0]), spec)
    np.testing.assert_allclose(np.diag(op).real, [1, 2, 3, 1, 2, 3])


def test_jc_hamiltonian_uncoupled():
    params = NormalizedParams(omega_f_prime=1.525, g_f_prime=0.0, gamma_prime=0.0, n_bar=0.0)
    spec = HilbertSpec(4)
    H = jc_hamiltonian(params, spec)
    expected = [(-0.5 if q == 0 else 0.5) + n * 1.525 for q, n in spec.states()]
    np.testing.assert_allclose(H, np.diag(expected), atol=1e-15)


def test_jc_hamiltonian_hermitian(toy_params):
    H = jc_hamiltonian(toy_params, HilbertSpec(8))
    assert np.max(np.abs(H - H.conj().T)) <= 1e-12


def test_jc_single_excitation_block(toy_params):
    spec = HilbertSpec(2)
    H = jc_hamiltonian(toy_params, spec)
    idx = [spec.index('g', 1), spec.index('e', 0)]
    block = H[np.ix_(idx, idx)]
    w_f, g, delta = toy_params.omega_f_prime, toy_params.g_f_prime, toy_params.delta_prime
    split = math.sqrt(delta ** 2 / 4 + g ** 2)
    expected = sorted([w_f / 2 - split, w_f / 2 + split])
    np.testing.assert_allclose(np.linalg.eigvalsh(block), expected, atol=1e-14)


def test_dispersive_hamiltonian_is_diagonal(toy_params):
    H = dispersive_hamiltonian(toy_params, HilbertSpec(7))
    assert np.all(H - np.diag(np.diag(H)) == 0)
    assert np.max(np.abs(H - H.conj().T)) <= 1e-12


def test_dispersive_diagonal_matches_eigenenergies(params):
    spec = HilbertSpec(10)
    H = dispersive_hamiltonian(params, spec)
    for q, n in spec.states():
        assert H[spec.index(q, n), spec.index(q, n)].real == pytest.approx(eigenenergy(q, n, params), abs=1e-12)


def test_eigenenergy_gaps(params):
    shift = params.g_f_prime * params.lambda_disp
    for n in range(1, 6):
        gap = eigenenergy('e', n - 1, params) - eigenenergy('g', n, params)
        assert gap == pytest.approx(params.delta_prime + 2 * n * shift, abs=1e-13)
    assert eigenenergy('e', 0, params) - eigenenergy('g', 0, params) == pytest.approx(1 + shift, abs=1e-13)
    with pytest.raises(ValueError):
        eigenenergy('g', -1, params)


def test_eigenenergy_uncoupled():
    params = NormalizedParams(omega_f_prime=0.8, g_f_prime=0.0, gamma_prime=0.0, n_bar=0.0)
    assert eigenenergy('g', 3, params) == pytest.approx(-0.5 + 3 * 0.8)
    assert eigenenergy('e', 3, params) == pytest.approx(0.5 + 3 * 0.8)


def test_dispersive_transform_identity_and_unitarity(toy_params):
    spec = HilbertSpec(6)
    uncoupled = toy_params.with_overrides(g_f_prime=0.0)
    np.testing.assert_allclose(dispersive_transform(uncoupled, spec), np.eye(spec.dim), atol=1e-15)
    U = dispersive_transform(toy_params, spec)
    np.testing.assert_allclose(U @ U.conj().T, np.eye(spec.dim), atol=1e-10)


def test_dispersive_transform_residual_scales_quadratically():
    spec = HilbertSpec(10)
    interior = [spec.index(q, n) for q in 'ge' for n in range(spec.S - 2)]
    g = 0.0005
    residuals = []
    for lam in (0.04, 0.02, 0.01):
        params = NormalizedParams(omega_f_prime=1 - g / lam, g_f_prime=g, gamma_prime=0.0, n_bar=0.0)
        H_jc = jc_hamiltonian(params, spec)
        U = dispersive_transform(params, spec)
        diff = (U @ H_jc @ U.conj().T - dispersive_hamiltonian(params, spec))[np.ix_(interior, interior)]
        residuals.append(np.linalg.norm(diff) / np.linalg.norm(H_jc[np.ix_(interior, interior)]))
    for coarse, fine in zip(residuals, residuals[1:]):
        assert 3.5 <= coarse / fine <= 4.5


def test_jump_operators_uncoupled():
    params = NormalizedParams(omega_f_prime=1.525, g_f_prime=0.0, gamma_prime=0.0, n_bar=0.0)
    spec = HilbertSpec(5)
    A = coupling_operator(params, spec)
    jumps = jump_operators(dispersive_hamiltonian(params, spec), A, spec)
    assert len(jumps) == 2
    by_omega = {round(j.omega, 12): j for j in jumps}
    a = annihilation(spec)
    np.testing.assert_allclose(by_omega[1.525].operator, a)
    np.testing.assert_allclose(by_omega[-1.525].operator, a.conj().T)


def test_jump_operators_reconstruct_and_pair(params):
    spec = HilbertSpec(6)
    A = coupling_operator(params, spec)
    jumps = jump_operators(dispersive_hamiltonian(params, spec), A, spec)
    np.testing.assert_allclose(sum(j.operator for j in jumps), A, atol=1e-12)
    for jump in jumps:
        partner = [j for j in jumps if abs(j.omega + jump.omega) < 1e-9]
        assert len(partner) == 1
        np.testing.assert_array_equal(partner[0].operator, jump.operator.conj().T)


def test_jump_operator_families(params):
    spec = HilbertSpec(6)
    A = coupling_operator(params, spec)
    jumps = jump_operators(dispersive_hamiltonian(params, spec), A, spec)
    families = collect_families(jumps)
    assert len(families) == 6

    S = spec.S
    a = np.diag(np.sqrt(np.arange(1, S, dtype=float)), k=1)
    ground, excited = np.diag([1.0, 0.0]), np.diag([0.0, 1.0])
    sigma_minus = np.array([[0.0, 1.0], [0.0, 0.0]])
    lam = params.lambda_disp
    np.testing.assert_allclose(families[((0, -1), 'g')], np.kron(ground, a))
    np.testing.assert_allclose(families[((0, 1), 'g')], np.kron(ground, a.T))
    np.testing.assert_allclose(families[((0, -1), 'e')], np.kron(excited, a))
    np.testing.assert_allclose(families[((0, 1), 'e')], np.kron(excited, a.T))
    np.testing.assert_allclose(families[((-1, 0), 'qubit')], lam * np.kron(sigma_minus, np.eye(S)))
    np.testing.assert_allclose(families[((1, 0), 'qubit')], lam * np.kron(sigma_minus.T, np.eye(S)))

    shift = params.dispersive_shift
    resonator = sorted(j.omega for j in jumps if j.family == (0, -1))
    assert resonator == pytest.approx(sorted([params.omega_f_prime - shift, params.omega_f_prime + shift]), abs=1e-12)


def test_jump_operators_degenerate_grouping():
    spec = HilbertSpec(3)
    H = 0.5 * pauli('z', spec) + 1.0 * number_operator(spec)
    A = annihilation(spec) + annihilation(spec).conj().T + 0.1 * pauli('x', spec)
    with pytest.raises(DegenerateGrouping):
        jump_operators(H, A, spec)


def test_jump_operators_require_diagonal_hamiltonian(toy_params):
    spec = HilbertSpec(3)
    with pytest.raises(ValueError):
        jump_operators(jc_hamiltonian(toy_params, spec), annihilation(spec), spec)


def test_truncation_zero_temperature():
    assert truncation_select(0.0, 2 * math.pi * 6.1e9) == 2
    assert occupancy_truncation(0.0) == 2


def test_truncation_one_thermal_photon():
    S = occupancy_truncation(1.0, 1e-7)
    weight = lambda m: 2.0 ** -(m + 1)
    assert weight(S - 1) <= 1e-7
    assert weight(S - 2) > 1e-7
    assert S == 24


@pytest.mark.parametrize('n_bar', [0.01, 0.1655, 0.6, 3.0])
def test_truncation_is_minimal(n_bar):
    p_max = 1e-7
    S = occupancy_truncation(n_bar, p_max)
    weight = lambda m: (n_bar / (1 + n_bar)) ** m / (1 + n_bar)
    assert weight(S - 1) <= p_max
    assert S == 2 or weight(S - 2) > p_max


def test_truncation_reference_temperatures():
    omega_f = 2 * math.pi * 6.1e9
    assert truncation_select(0.150, omega_f) == 10
    assert truncation_select(0.020, omega_f) == 3


def test_truncation_rejects_bad_probability():
    with pytest.raises(ValueError):
        occupancy_truncation(0.5, 1.5)
