import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterator, List, Protocol, Tuple, Union

import numpy as np
from scipy.linalg import expm

from .circuit import bose_einstein
from .errors import DegenerateGrouping

logger = logging.getLogger('operators')

DenseOperator = np.ndarray

QUBIT_LABELS = {'g': 0, 'e': 1, 0: 0, 1: 1}
DEFAULT_GROUPING_TOL = 1e-9
MAX_TRUNCATION = 10000


class DispersiveModel(Protocol):
    """規格化パラメータを持つオブジェクト (NormalizedParams / DerivedParams)"""
    omega_f_prime: float
    g_f_prime: float

    @property
    def lambda_disp(self) -> float: ...

    @property
    def delta_prime(self) -> float: ...


@dataclass(frozen=True)
class HilbertSpec:
    """量子ビット(2準位) ⊗ 共振器(S準位)、基底番号 = q·S + n"""
    S: int

    def __post_init__(self):
        if self.S < 2:
            raise ValueError(f"resonator truncation S must be >= 2, got {self.S}")

    @property
    def dim(self) -> int:
        return 2 * self.S

    def index(self, q: Union[int, str], n: int) -> int:
        return QUBIT_LABELS[q] * self.S + n

    def states(self) -> Iterator[Tuple[int, int]]:
        for q in (0, 1):
            for n in range(self.S):
                yield q, n


def _qubit_matrix(which: str) -> np.ndarray:
    # 基底順序 (g, e), σ_z = |e><e| - |g><g|
    sigma_plus = np.array([[0, 0], [1, 0]], dtype=complex)
    sigma_minus = sigma_plus.T.copy()
    table = {
        '+': sigma_plus,
        '-': sigma_minus,
        'x': sigma_plus + sigma_minus,
        'y': 1j * (sigma_minus - sigma_plus),
        'z': np.diag([-1.0, 1.0]).astype(complex),
    }
    if which not in table:
        raise ValueError(f"unknown Pauli operator '{which}'")
    return table[which]


def qubit_operator(op2: np.ndarray, spec: HilbertSpec) -> DenseOperator:
    """2×2 の量子ビット演算子を共振器の恒等演算子とテンソル積する"""
    return np.kron(np.asarray(op2, dtype=complex), np.eye(spec.S, dtype=complex))


def resonator_operator(opS: np.ndarray, spec: HilbertSpec) -> DenseOperator:
    return np.kron(np.eye(2, dtype=complex), np.asarray(opS, dtype=complex))


def annihilation(spec: HilbertSpec) -> DenseOperator:
    """<n-1|a|n> = √n の消滅演算子 (量子ビット恒等演算子付き)"""
    a = np.diag(np.sqrt(np.arange(1, spec.S, dtype=float)), k=1)
    return resonator_operator(a, spec)


def number_operator(spec: HilbertSpec) -> DenseOperator:
    return resonator_operator(np.diag(np.arange(spec.S, dtype=float)), spec)


def pauli(which: str, spec: HilbertSpec) -> DenseOperator:
    return qubit_operator(_qubit_matrix(which), spec)


def jc_hamiltonian(params: DispersiveModel, spec: HilbertSpec) -> DenseOperator:
    """Jaynes-Cummings ハミルトニアン (ħω_A 単位)"""
    a = annihilation(spec)
    sm, sp = pauli('-', spec), pauli('+', spec)
    g = params.g_f_prime
    return (0.5 * pauli('z', spec)
            + params.omega_f_prime * number_operator(spec)
            + g * (sm @ a.conj().T + sp @ a))


def dispersive_hamiltonian(params: DispersiveModel, spec: HilbertSpec) -> DenseOperator:
    """分散領域の JC ハミルトニアン、積基底で対角"""
    shift = params.g_f_prime * params.lambda_disp
    sz = pauli('z', spec)
    n_op = number_operator(spec)
    return (0.5 * (1.0 + 2 * shift) * sz
            + params.omega_f_prime * n_op + shift * sz @ n_op
            + shift * pauli('-', spec) @ pauli('+', spec))


def eigenenergy(q: Union[int, str], n: int, params: DispersiveModel) -> float:
    """状態 |q, n> の固有エネルギー (ħω_A 単位)

    E_{g,n} = (n - 1/2)ω_f' - Δ'/2 - n g'λ
    E_{e,n-1} = (n - 1/2)ω_f' + Δ'/2 + n g'λ
    """
    if n < 0:
        raise ValueError("photon number must be non-negative")
    shift = params.g_f_prime * params.lambda_disp
    w_f, delta = params.omega_f_prime, params.delta_prime
    if QUBIT_LABELS[q] == 0:
        return (n - 0.5) * w_f - delta / 2 - n * shift
    m = n + 1
    return (m - 0.5) * w_f + delta / 2 + m * shift


def dispersive_transform(params: DispersiveModel, spec: HilbertSpec) -> DenseOperator:
    """U = exp(λ(σ_+ a - σ_- a†)); U H_JC U† ≈ H^D + O(λ²)"""
    a = annihilation(spec)
    generator = pauli('+', spec) @ a - pauli('-', spec) @ a.conj().T
    return expm(params.lambda_disp * generator)


@dataclass(frozen=True)
class JumpOperator:
    omega: float
    operator: DenseOperator
    # (Δq, Δn): 量子ビット/共振器の励起変化
    family: Tuple[int, int]
    # 共振器遷移のときの量子ビット状態 (g / e)、量子ビット遷移は qubit
    branch: str = 'qubit'


def _transition_family(spec: HilbertSpec, i: int, j: int) -> Tuple[int, int]:
    qi, ni = divmod(i, spec.S)
    qj, nj = divmod(j, spec.S)
    return qi - qj, ni - nj


def _branch(spec: HilbertSpec, family: Tuple[int, int], group: List[Tuple[float, int, int]]) -> str:
    if family[0] != 0:
        return 'qubit'
    states = {'ge'[i // spec.S] for _, i, _ in group}
    return states.pop() if len(states) == 1 else 'ge'


def jump_operators(H_sys: DenseOperator, A: DenseOperator, spec: HilbertSpec,
                   tol: float = DEFAULT_GROUPING_TOL) -> List[JumpOperator]:
    """A をボーア周波数ごとに分解する: A(ω) = Σ_{E_j - E_i = ω} |i><i|A|j><j|

    H_sys は積基底で対角であること。
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    off_diag = H_sys - np.diag(np.diag(H_sys))
    if np.max(np.abs(off_diag), initial=0.0) > 1e-12:
        raise ValueError("H_sys must be diagonal in the product basis")
    energies = np.real(np.diag(H_sys))

    # ボーア周波数でグループ化 (ソート後に隣接差 < tol を同一視)
    entries = []
    for i, j in zip(*np.nonzero(A)):
        entries.append((energies[j] - energies[i], int(i), int(j)))
    entries.sort(key=lambda e: e[0])

    groups: List[List[Tuple[float, int, int]]] = []
    for entry in entries:
        if groups and entry[0] - groups[-1][-1][0] < tol:
            groups[-1].append(entry)
        else:
            groups.append([entry])

    jumps = []
    for group in groups:
        families = {_transition_family(spec, i, j) for _, i, j in group}
        if len(families) > 1:
            raise DegenerateGrouping(f"Bohr frequency {group[0][0]:.6g} shared by transition families {sorted(families)}")
        op = np.zeros_like(A, dtype=complex)
        for _, i, j in group:
            op[i, j] = A[i, j]
        omega = float(np.mean([w for w, _, _ in group]))
        family = families.pop()
        jumps.append(JumpOperator(omega=omega, operator=op, family=family, branch=_branch(spec, family, group)))
    return jumps


def collect_families(jumps: List[JumpOperator]) -> Dict[Tuple[Tuple[int, int], str], DenseOperator]:
    """同じ遷移族 ((Δq, Δn), branch) のジャンプ演算子を足し合わせる"""
    families: Dict[Tuple[Tuple[int, int], str], DenseOperator] = {}
    for jump in jumps:
        key = (jump.family, jump.branch)
        if key in families:
            families[key] = families[key] + jump.operator
        else:
            families[key] = jump.operator.copy()
    return families


def coupling_operator(params: DispersiveModel, spec: HilbertSpec) -> DenseOperator:
    """分散フレームでの浴との結合演算子 a† + a + λσ_x"""
    a = annihilation(spec)
    return a + a.conj().T + params.lambda_disp * pauli('x', spec)


def occupancy_truncation(n_bar: float, p_max: float = 1e-7) -> int:
    """熱状態で最上位準位 S-1 の占有確率が p_max 以下になる最小の S"""
    if not 0 < p_max < 1:
        raise ValueError("p_max must lie in (0, 1)")
    if n_bar <= 0:
        return 2
    log_ratio = math.log(n_bar / (1 + n_bar))
    log_norm = -math.log1p(n_bar)
    log_p = math.log(p_max)
    S = 2
    while log_norm + (S - 1) * log_ratio > log_p:
        S += 1
        if S > MAX_TRUNCATION:
            raise ValueError(f"thermal occupancy n_bar = {n_bar:.4g} needs more than {MAX_TRUNCATION} Fock states")
    return S


def truncation_select(T: float, omega_f: float, p_max: float = 1e-7) -> int:
    return occupancy_truncation(bose_einstein(omega_f, T), p_max)
