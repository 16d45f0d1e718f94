import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from .errors import DefectiveMatrix, EmptyModeSet
from .liouville import LiouvillianBlock, liouvillian_block, vectorize, vectorized_pauli
from .operators import DenseOperator, DispersiveModel, HilbertSpec, dispersive_hamiltonian

logger = logging.getLogger('spectral')

DEFECT_TOL = 1e-12
OVERLAP_EPS = 1e-10
# 重なりがこれ未満のモードは数値ノイズとみなす
OVERLAP_NOISE_FLOOR = 1e-14
RATE_MISMATCH_WARN = 0.01


@dataclass(frozen=True)
class EigenMode:
    lam: complex
    right: np.ndarray
    left: np.ndarray


@dataclass(frozen=True)
class ModeSet:
    """ブロック 𝓛_d の双直交固有モード"""
    d: int
    indices: np.ndarray
    modes: Tuple[EigenMode, ...]

    def __len__(self) -> int:
        return len(self.modes)

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.array([m.lam for m in self.modes], dtype=complex)

    @property
    def rights(self) -> np.ndarray:
        return np.column_stack([m.right for m in self.modes])

    @property
    def lefts(self) -> np.ndarray:
        return np.column_stack([m.left for m in self.modes])


def eig_general(block: LiouvillianBlock) -> ModeSet:
    """非エルミートなブロックの完全な固有分解 (左右の固有ベクトル付き)"""
    A = block.entries
    if not np.all(np.isfinite(A)):
        raise ValueError(f"block d = {block.d} has non-finite entries")

    w, vl, vr = linalg.eig(A, left=True, right=True)
    vr = vr / np.linalg.norm(vr, axis=0)
    vl = vl / np.linalg.norm(vl, axis=0)

    # 正則化はしない: 左右ベクトルの重なりが消えるなら欠陥行列として報告する
    overlaps = np.abs(np.einsum('ij,ij->j', vl.conj(), vr))
    if overlaps.size and overlaps.min() < DEFECT_TOL:
        k = int(np.argmin(overlaps))
        raise DefectiveMatrix(f"block d = {block.d} is defective near lambda = {w[k]:.6g} (overlap {overlaps[k]:.2e})")

    # 双直交な左ベクトル: 右固有ベクトル行列の逆行列の行
    try:
        duals = linalg.inv(vr).conj().T
    except linalg.LinAlgError as e:
        raise DefectiveMatrix(f"block d = {block.d}: eigenvector matrix is singular") from e

    order = sorted(range(len(w)), key=lambda k: (-w[k].real, w[k].imag))
    modes = tuple(EigenMode(lam=complex(w[k]), right=vr[:, k].copy(), left=duals[:, k].copy()) for k in order)
    return ModeSet(d=block.d, indices=block.indices, modes=modes)


def mode_coefficients(rho0: DenseOperator, modes: ModeSet) -> np.ndarray:
    """c_i = <<ṽ_i|ρ0>> (ブロックに制限した射影)"""
    vec = vectorize(rho0)[modes.indices]
    return modes.lefts.conj().T @ vec


def mode_projections(op_vec: np.ndarray, modes: ModeSet) -> np.ndarray:
    """p_i = <<O|v_i>>"""
    return modes.rights.T @ np.asarray(op_vec)[modes.indices].conj()


def reconstruct_coherence(c: np.ndarray, p: np.ndarray, modes: ModeSet, t: np.ndarray) -> np.ndarray:
    """<σ(t)> = Σ_i 2|c_i p_i| e^{Re λ_i t} cos(Im λ_i t + Arg(c_i p_i))

    d = +1 ブロックのモードのみを渡す (d = -1 は複素共役で係数 2 に含まれる)。
    """
    t = np.asarray(t, dtype=float)
    lam = modes.eigenvalues
    cp = np.asarray(c) * np.asarray(p)
    amp = 2 * np.abs(cp)
    phase = np.angle(cp)
    terms = amp[None, :] * np.exp(np.outer(t, lam.real)) * np.cos(np.outer(t, lam.imag) + phase[None, :])
    return terms.sum(axis=1)


def decoherence_rate(modes: ModeSet, sigma_x_vec: np.ndarray, eps_overlap: Optional[float] = OVERLAP_EPS) -> float:
    """Γ_{2,R} = min_i |Re λ_i| (d = 1 ブロック)

    eps_overlap が None の場合はブロック全体の最小値 (σ_x との重なりで絞らない)。
    """
    lam = modes.eigenvalues
    if eps_overlap is None:
        selected = lam
    else:
        overlaps = np.abs(mode_projections(sigma_x_vec, modes))
        threshold = max(eps_overlap, OVERLAP_NOISE_FLOOR)
        selected = lam[overlaps > threshold]
    if selected.size == 0:
        raise EmptyModeSet(f"no mode of block d = {modes.d} couples to sigma_x above {eps_overlap}")
    return float(np.min(np.abs(selected.real)))


def decoherence_rates(modes: ModeSet, sigma_x_vec: np.ndarray, eps_overlap: float = OVERLAP_EPS) -> Tuple[float, float]:
    """(σ_x で絞った Γ_{2,R}, ブロック全体の Γ_{2,R})"""
    filtered = decoherence_rate(modes, sigma_x_vec, eps_overlap)
    literal = decoherence_rate(modes, sigma_x_vec, None)
    if filtered > 0 and abs(filtered - literal) / filtered > RATE_MISMATCH_WARN:
        logger.warning(f"Slowest sigma_x-coupled mode ({filtered:.6g}) differs from block minimum ({literal:.6g})")
    return filtered, literal


def coherence_modes(params: DispersiveModel, gamma_prime: float, n_bar: float, spec: HilbertSpec) -> ModeSet:
    """d = 1 ブロックを組み立てて固有分解する"""
    H = dispersive_hamiltonian(params, spec)
    block = liouvillian_block(1, H, gamma_prime, n_bar, spec)
    return eig_general(block)


def mode_dump(modes: ModeSet, spec: HilbertSpec) -> List[Dict[str, float]]:
    """CSV 出力用: d, re_lambda, im_lambda, overlap_sigma_x_abs"""
    overlaps = np.abs(mode_projections(vectorized_pauli('x', spec), modes))
    return [
        {'d': modes.d, 're_lambda': m.lam.real, 'im_lambda': m.lam.imag, 'overlap_sigma_x_abs': float(o)}
        for m, o in zip(modes.modes, overlaps)
    ]


def max_real_part(mode_sets: Sequence[ModeSet]) -> float:
    return max(float(np.max(ms.eigenvalues.real)) for ms in mode_sets)
