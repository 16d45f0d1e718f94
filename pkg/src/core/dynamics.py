import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import expm
from scipy.special import gammaln

from .circuit import BathSpec, DerivedParams, NormalizedParams, bose_einstein, spectral_density
from .errors import NonExponential, TruncationLoss
from .liouville import Superoperator, devectorize, vectorize
from .operators import DenseOperator, HilbertSpec, number_operator, pauli, _qubit_matrix

logger = logging.getLogger('dynamics')

STATE_TOL = 1e-10
COHERENT_LOSS_TOL = 1e-6
MIN_R2 = 0.99
# 2段階フィットの窓 (共振器の緩和時間 1/γ' 単位)
EARLY_WINDOW = 3.0
LATE_WINDOW = 6.0


@dataclass(frozen=True)
class QuantumState:
    """量子ビット⊗共振器の密度行列"""
    rho: DenseOperator
    S: int

    def __post_init__(self):
        rho = self.rho
        if abs(np.trace(rho) - 1) > STATE_TOL:
            raise ValueError(f"trace {np.trace(rho).real:.12g} is not 1")
        if np.max(np.abs(rho - rho.conj().T)) > 1e-12:
            raise ValueError("density matrix is not Hermitian")
        if np.linalg.eigvalsh(rho).min() < -STATE_TOL:
            raise ValueError("density matrix is not positive semidefinite")

    @property
    def spec(self) -> HilbertSpec:
        return HilbertSpec(self.S)


@dataclass
class Trajectory:
    times: np.ndarray
    sx: np.ndarray
    sy: np.ndarray
    sz: np.ndarray
    n_res: np.ndarray
    coherence: np.ndarray
    trace: np.ndarray
    states: Optional[List[DenseOperator]] = field(default=None, repr=False)

    def window(self, start: float, stop: float) -> np.ndarray:
        return (self.times >= start) & (self.times <= stop)

    def rows(self) -> List[Dict[str, float]]:
        return [
            {'t_omegaA': t, 'sx': x, 'sy': y, 'sz': z, 'n_res': n, 'coherence': c}
            for t, x, y, z, n, c in zip(self.times, self.sx, self.sy, self.sz, self.n_res, self.coherence)
        ]


@dataclass(frozen=True)
class DirectCouplingRates:
    """直接結合モデルの遷移率 [rad/s] (黄金律の標準形)"""
    gamma_up: float
    gamma_down: float

    @property
    def gamma_2(self) -> float:
        return 0.5 * (self.gamma_up + self.gamma_down)

    @property
    def dissipation(self) -> float:
        return self.gamma_up + self.gamma_down


def thermal_state(n_bar: float, S: int) -> DenseOperator:
    """共振器の熱状態 (S 準位で再規格化)"""
    if n_bar < 0:
        raise ValueError("n_bar must be non-negative")
    if n_bar == 0:
        weights = np.zeros(S)
        weights[0] = 1.0
    else:
        weights = (n_bar / (1 + n_bar)) ** np.arange(S) / (1 + n_bar)
    return np.diag(weights / weights.sum()).astype(complex)


def coherent_amplitudes(alpha: complex, S: int) -> np.ndarray:
    n = np.arange(S)
    if alpha == 0:
        amps = np.zeros(S, dtype=complex)
        amps[0] = 1.0
        return amps
    log_mag = -abs(alpha) ** 2 / 2 + n * math.log(abs(alpha)) - 0.5 * gammaln(n + 1)
    return np.exp(log_mag) * np.exp(1j * n * np.angle(alpha))


def coherent_state(alpha: complex, S: int) -> DenseOperator:
    """コヒーレント状態 |α><α| (打ち切り後に再規格化)"""
    amps = coherent_amplitudes(alpha, S)
    lost = 1.0 - float(np.sum(np.abs(amps) ** 2))
    if lost > COHERENT_LOSS_TOL:
        raise TruncationLoss(f"coherent state alpha = {alpha} loses {lost:.3e} of its weight at S = {S}")
    amps = amps / np.linalg.norm(amps)
    return np.outer(amps, amps.conj())


def coherent_truncation(alpha: complex, tol: float = COHERENT_LOSS_TOL) -> int:
    """コヒーレント状態の打ち切り損失が tol 以下になる最小の S"""
    S = 2
    while 1.0 - float(np.sum(np.abs(coherent_amplitudes(alpha, S)) ** 2)) > tol:
        S += 1
    return S


def qubit_state(qubit: Union[str, Sequence[float], np.ndarray]) -> np.ndarray:
    """'plus', 'g', 'e'、ブロッホベクトル (x, y, z)、または 2×2 行列から量子ビット状態を作る"""
    if isinstance(qubit, str):
        presets = {
            'plus': 0.5 * np.ones((2, 2), dtype=complex),
            'g': np.diag([1.0, 0.0]).astype(complex),
            'e': np.diag([0.0, 1.0]).astype(complex),
        }
        if qubit not in presets:
            raise ValueError(f"unknown qubit preset '{qubit}'")
        return presets[qubit]
    arr = np.asarray(qubit, dtype=complex)
    if arr.shape == (2, 2):
        return arr
    if arr.shape == (3,):
        x, y, z = arr.real
        if x * x + y * y + z * z > 1 + 1e-12:
            raise ValueError("Bloch vector lies outside the unit ball")
        return 0.5 * (np.eye(2) + x * _qubit_matrix('x') + y * _qubit_matrix('y') + z * _qubit_matrix('z'))
    raise ValueError(f"cannot interpret qubit state of shape {arr.shape}")


def initial_state(qubit: Union[str, Sequence[float], np.ndarray], resonator: DenseOperator) -> QuantumState:
    """積状態 ρ_Q ⊗ ρ_res"""
    rho_q = qubit_state(qubit)
    S = resonator.shape[0]
    return QuantumState(rho=np.kron(rho_q, resonator), S=S)


def qubit_reduced(rho: DenseOperator, S: int) -> np.ndarray:
    """共振器について部分トレース (量子ビット優先の並び)"""
    return np.einsum('injn->ij', np.asarray(rho).reshape(2, S, 2, S))


def bloch_vector(rho: DenseOperator, S: int) -> np.ndarray:
    rq = qubit_reduced(rho, S)
    return np.array([np.trace(_qubit_matrix(w) @ rq).real for w in ('x', 'y', 'z')])


def coherence_measure(rho: Union[QuantumState, DenseOperator], S: Optional[int] = None) -> float:
    """l1 ノルム C(ρ_Q) = |ρ_ge| + |ρ_eg|"""
    if isinstance(rho, QuantumState):
        rho, S = rho.rho, rho.S
    rq = qubit_reduced(rho, S)
    return float(abs(rq[0, 1]) + abs(rq[1, 0]))


def _step_generators(L: Superoperator, steps: np.ndarray) -> Dict[float, np.ndarray]:
    cache: Dict[float, np.ndarray] = {}
    for dt in steps:
        key = float(dt)
        if key not in cache:
            cache[key] = expm(L * key)
    return cache


def propagate(L: Superoperator, rho0: Union[QuantumState, DenseOperator], times: Sequence[float],
              keep_states: bool = False) -> Trajectory:
    """ρ(t) = e^{𝓛t} ρ(0) を時間刻みごとに適用する"""
    if isinstance(rho0, QuantumState):
        rho, S = rho0.rho, rho0.S
    else:
        rho = np.asarray(rho0)
        S = rho.shape[0] // 2
    spec = HilbertSpec(S)
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise ValueError("times must be a non-empty 1-D array")
    if np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing")

    steps = np.diff(np.concatenate([[0.0], times]))
    # 等間隔なら指数関数は1回だけ計算する
    uniform = np.allclose(steps[1:], steps[1], rtol=1e-12, atol=0.0) if steps.size > 1 else True
    if uniform and steps.size > 1:
        steps[1:] = steps[1]
    generators = _step_generators(L, steps)

    ops = {w: pauli(w, spec) for w in ('x', 'y', 'z')}
    n_op = number_operator(spec)
    records = {k: np.empty(times.size) for k in ('sx', 'sy', 'sz', 'n_res', 'coherence', 'trace')}
    states = [] if keep_states else None

    vec = vectorize(rho)
    for k, dt in enumerate(steps):
        if dt > 0:
            vec = generators[float(dt)] @ vec
        r = devectorize(vec)
        records['sx'][k] = np.trace(ops['x'] @ r).real
        records['sy'][k] = np.trace(ops['y'] @ r).real
        records['sz'][k] = np.trace(ops['z'] @ r).real
        records['n_res'][k] = np.trace(n_op @ r).real
        records['coherence'][k] = coherence_measure(r, S)
        records['trace'][k] = np.trace(r).real
        if keep_states:
            states.append(r.copy())

    logger.debug(f"Propagated {times.size} points up to t = {times[-1]:.6g} with {len(generators)} exponentials")
    return Trajectory(times=times, states=states, **records)


def sigma_z_conservation(L: Superoperator, rho0: Union[QuantumState, DenseOperator], horizon: float, points: int = 50) -> float:
    """max_t |<σ_z(t)> - <σ_z(0)>|"""
    times = np.linspace(0.0, horizon, points + 1)[1:]
    trajectory = propagate(L, rho0, times)
    rho = rho0.rho if isinstance(rho0, QuantumState) else np.asarray(rho0)
    S = rho.shape[0] // 2
    sz0 = np.trace(pauli('z', HilbertSpec(S)) @ rho).real
    return float(np.max(np.abs(trajectory.sz - sz0)))


def steady_state(a_weight: float, n_bar: float, S: int) -> DenseOperator:
    """ρ = a|e><e| ⊗ ρ_Th + (1-a)|g><g| ⊗ ρ_Th"""
    if not 0 <= a_weight <= 1:
        raise ValueError("a_weight must lie in [0, 1]")
    return np.kron(np.diag([1 - a_weight, a_weight]).astype(complex), thermal_state(n_bar, S))


def steady_state_residual(L: Superoperator, a_weight: float, n_bar: float, S: int) -> float:
    return float(np.linalg.norm(L @ vectorize(steady_state(a_weight, n_bar, S))))


def resonator_dissipator(X: np.ndarray, gamma_prime: float, n_bar: float) -> np.ndarray:
    """共振器だけに作用する散逸子 𝒟[X]"""
    S = X.shape[0]
    a = np.diag(np.sqrt(np.arange(1, S, dtype=float)), k=1)
    ad = a.T
    absorb = ad @ X @ a - 0.5 * (a @ ad @ X + X @ a @ ad)
    emit = a @ X @ ad - 0.5 * (ad @ a @ X + X @ ad @ a)
    return gamma_prime * n_bar * absorb + gamma_prime * (1 + n_bar) * emit


def blockade_sides(L_unitary: Superoperator, L_dissipative: Superoperator, rho_q: np.ndarray,
                   params: NormalizedParams, S: int) -> Tuple[DenseOperator, DenseOperator]:
    """([𝒰,𝒟] ρ_Q⊗ρ_Th,  i g'λ [σ_z, ρ_Q] ⊗ 𝒟[a†a ρ_Th])"""
    rho_th = thermal_state(params.n_bar, S)
    vec = vectorize(np.kron(rho_q, rho_th))
    lhs = L_unitary @ (L_dissipative @ vec) - L_dissipative @ (L_unitary @ vec)

    sz = _qubit_matrix('z')
    n_op = np.diag(np.arange(S, dtype=float))
    rhs = 1j * params.dispersive_shift * np.kron(sz @ rho_q - rho_q @ sz,
                                                 resonator_dissipator(n_op @ rho_th, params.gamma_prime, params.n_bar))
    return devectorize(lhs), rhs


def blockade_commutator(L_unitary: Superoperator, L_dissipative: Superoperator, rho_q: np.ndarray,
                        params: NormalizedParams, S: int) -> DenseOperator:
    lhs, rhs = blockade_sides(L_unitary, L_dissipative, rho_q, params, S)
    return lhs - rhs


def fit_log_linear(t: np.ndarray, y: np.ndarray) -> Tuple[float, float]:
    """log y = a - Γt の最小二乗フィット -> (Γ, R²)"""
    t = np.asarray(t, dtype=float)
    log_y = np.log(np.asarray(y, dtype=float))
    slope, intercept = np.polyfit(t, log_y, 1)
    residual = log_y - (slope * t + intercept)
    ss_res = float(np.sum(residual ** 2))
    ss_tot = float(np.sum((log_y - log_y.mean()) ** 2))
    # 減衰がない場合は R² が定義できないので完全一致とみなす
    r2 = 1.0 if ss_tot <= 1e-24 * t.size else 1.0 - ss_res / ss_tot
    return -float(slope), r2


def fit_decay_rate(trajectory: Trajectory, window: Optional[Tuple[float, float]] = None, min_r2: float = MIN_R2) -> float:
    """コヒーレンス C(ρ_Q)(t) の対数の傾きから減衰率を求める"""
    start, stop = window if window is not None else (trajectory.times[0], trajectory.times[-1])
    mask = trajectory.window(start, stop)
    if mask.sum() < 3:
        raise ValueError(f"window [{start:.6g}, {stop:.6g}] holds fewer than 3 samples")
    values = trajectory.coherence[mask]
    if np.any(values <= 1e-12):
        raise ValueError("coherence falls below 1e-12 inside the fit window")
    rate, r2 = fit_log_linear(trajectory.times[mask], values)
    if r2 < min_r2:
        raise NonExponential(f"coherence decay over [{start:.6g}, {stop:.6g}] is not exponential (R^2 = {r2:.4f})")
    return rate


def two_phase_fit(trajectory: Trajectory, gamma_prime: float) -> Dict[str, float]:
    """早期窓 [0, 3/γ'] と後期窓 [6/γ', 終端] の減衰率"""
    if gamma_prime <= 0:
        raise ValueError("no resonator dissipation (gamma_prime = 0), two-phase windows are undefined")
    early = (trajectory.times[0], EARLY_WINDOW / gamma_prime)
    late = (LATE_WINDOW / gamma_prime, trajectory.times[-1])
    return {
        'early_rate': fit_decay_rate(trajectory, early, min_r2=0.0),
        'late_rate': fit_decay_rate(trajectory, late),
        'early_window_end': early[1],
        'late_window_start': late[0],
    }


def direct_coupling_rates(zeta: float, params: DerivedParams, bath: BathSpec) -> DirectCouplingRates:
    """量子ビットを抵抗器に直接結合した場合の Γ↑, Γ↓"""
    if zeta < 0:
        raise ValueError("zeta must be non-negative")
    j = spectral_density(params.omega_A, params, bath)
    n_a = bose_einstein(params.omega_A, bath.T)
    base = 2 * math.pi * zeta ** 2 * j
    return DirectCouplingRates(gamma_up=base * n_a, gamma_down=base * (1 + n_a))


def strong_dispersive_estimate(gamma_prime: float, n_bar: float) -> float:
    """Γ_2 ≈ γ' n̄"""
    return gamma_prime * n_bar


def zeno_estimate(gamma_prime: float, dispersive_shift: float, n_bar: float) -> float:
    """γ' ≫ g'λ の極限: Γ_2 ≈ 4 (g'λ)² n̄ (1 + n̄) / γ'"""
    if gamma_prime == 0:
        return math.inf
    return 4 * dispersive_shift ** 2 * n_bar * (1 + n_bar) / gamma_prime


def t2_time(gamma_2r_prime: float, omega_A: float, gamma_b: float = 0.0) -> float:
    """T_2 = 1/(Γ_{2,R} + Γ_B) [s]"""
    total = gamma_2r_prime * omega_A + gamma_b
    return math.inf if total == 0 else 1.0 / total
