import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .errors import SymmetryViolation
from .operators import DenseOperator, HilbertSpec, annihilation, number_operator, pauli

logger = logging.getLogger('liouville')

Superoperator = np.ndarray
BasisPair = Tuple[Tuple[int, int], Tuple[int, int]]

COMMUTATOR_TOL = 1e-10
# これを超える S では 𝓛 全体を作らずブロックだけを組み立てる
DENSE_LIMIT_S = 40


@dataclass(frozen=True)
class LiouvillianBlock:
    """電荷セクター d のブロックと、その基底 ((q,n),(q',m)) の対応"""
    d: int
    indices: np.ndarray
    basis: Tuple[BasisPair, ...]
    entries: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.indices)

    def restrict(self, vec: np.ndarray) -> np.ndarray:
        return np.asarray(vec)[self.indices]

    def to_json(self) -> Dict:
        return {
            'd': self.d,
            'basis': [[q, n, qq, m] for (q, n), (qq, m) in self.basis],
            'entries': [[[float(z.real), float(z.imag)] for z in row] for row in self.entries],
        }


def vectorize(rho: DenseOperator) -> np.ndarray:
    """|i><j| -> e_i ⊗ e_j (行優先)"""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {rho.shape}")
    return rho.reshape(-1).astype(complex)


def devectorize(vec: np.ndarray) -> DenseOperator:
    vec = np.asarray(vec)
    dim = math.isqrt(vec.size)
    if dim * dim != vec.size:
        raise ValueError(f"vector length {vec.size} is not a perfect square")
    return vec.reshape(dim, dim)


def inner(a_vec: np.ndarray, b_vec: np.ndarray) -> complex:
    """<<A|B>> = Tr[A†B]"""
    return complex(np.vdot(a_vec, b_vec))


def left(op: DenseOperator) -> Superoperator:
    return np.kron(op, np.eye(op.shape[0]))


def right(op: DenseOperator) -> Superoperator:
    return np.kron(np.eye(op.shape[0]), op.T)


def unitary_part(H: DenseOperator) -> Superoperator:
    """𝒰 = -i(H ⊗ 1 - 1 ⊗ Hᵀ)"""
    return -1j * (left(H) - right(H))


def dissipative_part(gamma_prime: float, n_bar: float, spec: HilbertSpec) -> Superoperator:
    """熱浴による散逸子 𝒟 (局所マスター方程式)"""
    a = annihilation(spec)
    ad = a.conj().T
    absorb = np.kron(ad, ad.conj()) - 0.5 * left(a @ ad) - 0.5 * right(a @ ad)
    emit = np.kron(a, a.conj()) - 0.5 * left(ad @ a) - 0.5 * right(ad @ a)
    return gamma_prime * n_bar * absorb + gamma_prime * (1 + n_bar) * emit


def build_liouvillian(H_D: DenseOperator, gamma_prime: float, n_bar: float, spec: HilbertSpec) -> Superoperator:
    """𝓛 = 𝒰 + 𝒟 (ω_A 規格化単位、Lamb シフトは無視)"""
    if H_D.shape != (spec.dim, spec.dim):
        raise ValueError(f"Hamiltonian shape {H_D.shape} does not match dimension {spec.dim}")
    if np.max(np.abs(H_D - H_D.conj().T)) > 1e-12:
        raise ValueError("Hamiltonian is not Hermitian")
    if gamma_prime < 0 or n_bar < 0:
        raise ValueError("gamma_prime and n_bar must be non-negative")
    return unitary_part(H_D) + dissipative_part(gamma_prime, n_bar, spec)


def excitation_numbers(spec: HilbertSpec) -> np.ndarray:
    """各基底状態の励起数 q + n (量子ビットは 0/1 で数える)"""
    return np.array([q + n for q, n in spec.states()], dtype=int)


def charge_labels(spec: HilbertSpec) -> np.ndarray:
    exc = excitation_numbers(spec)
    return (exc[:, None] - exc[None, :]).reshape(-1)


def qubit_sector_labels(spec: HilbertSpec) -> np.ndarray:
    """基底対ごとの q - q'"""
    q = np.array([q for q, _ in spec.states()], dtype=int)
    return (q[:, None] - q[None, :]).reshape(-1)


def number_superoperator(spec: HilbertSpec) -> Superoperator:
    """𝒩 = N ⊗ 1 - 1 ⊗ Nᵀ, N = σ_+σ_- + a†a"""
    N = pauli('+', spec) @ pauli('-', spec) + number_operator(spec)
    return left(N) - right(N)


def commutator_norm(A: Superoperator, B: Superoperator) -> float:
    diag = np.diag(A)
    if not np.any(A - np.diag(diag)):
        # A が対角なら [A, B]_{rc} = (A_rr - A_cc) B_rc
        return float(np.max(np.abs((diag[:, None] - diag[None, :]) * B), initial=0.0))
    return float(np.max(np.abs(A @ B - B @ A), initial=0.0))


def _basis_pair(spec: HilbertSpec, index: int) -> BasisPair:
    i, j = divmod(int(index), spec.dim)
    return divmod(i, spec.S), divmod(j, spec.S)


def split_blocks(L: Superoperator, N: Superoperator, spec: HilbertSpec,
                 tol: float = COMMUTATOR_TOL) -> List[LiouvillianBlock]:
    """𝒩 の固有空間で 𝓛 をブロック対角化する"""
    residual = commutator_norm(N, L)
    if residual > tol:
        raise SymmetryViolation(f"||[N, L]||_max = {residual:.3e} exceeds {tol:.1e}")
    labels = np.rint(np.real(np.diag(N))).astype(int)
    blocks = []
    for d in np.unique(labels):
        idx = np.flatnonzero(labels == d)
        blocks.append(LiouvillianBlock(
            d=int(d),
            indices=idx,
            basis=tuple(_basis_pair(spec, k) for k in idx),
            entries=L[np.ix_(idx, idx)].copy(),
        ))
    logger.debug(f"Split Liouvillian of dim {L.shape[0]} into {len(blocks)} blocks")
    return blocks


def assemble_blocks(blocks: Sequence[LiouvillianBlock], dim: int) -> Superoperator:
    """ブロックの直和を元の基底順に戻す"""
    L = np.zeros((dim, dim), dtype=complex)
    for block in blocks:
        L[np.ix_(block.indices, block.indices)] = block.entries
    return L


def build_block(d: int, H_D: DenseOperator, gamma_prime: float, n_bar: float, spec: HilbertSpec) -> LiouvillianBlock:
    """𝓛 全体を作らず、行列要素から 𝓛_d を直接組み立てる (H_D は対角)"""
    energies = np.real(np.diag(H_D))
    if np.max(np.abs(H_D - np.diag(np.diag(H_D)))) > 1e-12:
        raise ValueError("block-only assembly requires a diagonal Hamiltonian")
    S, dim = spec.S, spec.dim
    labels = charge_labels(spec)
    idx = np.flatnonzero(labels == d)
    position = {int(k): p for p, k in enumerate(idx)}

    g_down = gamma_prime * (1 + n_bar)
    g_up = gamma_prime * n_bar
    # 打ち切られた a a† の対角成分: n + 1 (最上位のみ 0)
    aad = np.array([n + 1 if n < S - 1 else 0 for _, n in spec.states()], dtype=float)
    ada = np.array([n for _, n in spec.states()], dtype=float)

    entries = np.zeros((len(idx), len(idx)), dtype=complex)
    for col, k in enumerate(idx):
        i, j = divmod(int(k), dim)
        qi, ni = divmod(i, S)
        qj, nj = divmod(j, S)
        entries[col, col] = (-1j * (energies[i] - energies[j])
                             - 0.5 * g_down * (ada[i] + ada[j])
                             - 0.5 * g_up * (aad[i] + aad[j]))
        if ni > 0 and nj > 0 and g_down:
            target = (i - 1) * dim + (j - 1)
            entries[position[target], col] += g_down * math.sqrt(ni * nj)
        if ni < S - 1 and nj < S - 1 and g_up:
            target = (i + 1) * dim + (j + 1)
            entries[position[target], col] += g_up * math.sqrt((ni + 1) * (nj + 1))

    return LiouvillianBlock(
        d=int(d),
        indices=idx,
        basis=tuple(_basis_pair(spec, k) for k in idx),
        entries=entries,
    )


def liouvillian_block(d: int, H_D: DenseOperator, gamma_prime: float, n_bar: float, spec: HilbertSpec) -> LiouvillianBlock:
    """S が小さければ密な 𝓛 を分割、大きければブロックだけを組み立てる"""
    if spec.S > DENSE_LIMIT_S:
        return build_block(d, H_D, gamma_prime, n_bar, spec)
    L = build_liouvillian(H_D, gamma_prime, n_bar, spec)
    for block in split_blocks(L, number_superoperator(spec), spec):
        if block.d == d:
            return block
    raise ValueError(f"no block with charge d = {d} for S = {spec.S}")


def vectorized_pauli(which: str, spec: HilbertSpec) -> np.ndarray:
    """vec(σ_x ⊗ 1) / vec(σ_y ⊗ 1)、台は d = ±1 のブロックのみ"""
    if which not in ('x', 'y'):
        raise ValueError("only sigma_x and sigma_y are supported")
    return vectorize(pauli(which, spec))
