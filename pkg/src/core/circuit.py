import logging
import math
from dataclasses import dataclass, asdict, replace
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import constants

from .errors import DispersiveViolation, InvalidCircuit

# CODATA 2018 (定義値)
HBAR = constants.hbar  # 1.054571817e-34 J·s
K_B = constants.k      # 1.380649e-23 J/K

DISPERSIVE_WARN_LAMBDA = 0.1
CUTOFF_WARN_RATIO = 10.0

logger = logging.getLogger('circuit')

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class CircuitSpec:
    """回路素子の値 (SI単位)"""
    C_A: float
    C_f: float
    C_g: float
    L_L: float
    k_coupling: float
    omega_A: float
    omega_f: float

    def __post_init__(self):
        # C_g = 0 は結合なしの極限として許容する
        for name in ('C_A', 'C_f'):
            if not getattr(self, name) > 0:
                raise InvalidCircuit(f"{name} must be positive, got {getattr(self, name)}")
        if not self.C_g >= 0:
            raise InvalidCircuit(f"C_g must be non-negative, got {self.C_g}")
        if not self.L_L > 0:
            raise InvalidCircuit(f"L_L must be positive, got {self.L_L}")
        if not 0 <= self.k_coupling < 1:
            raise InvalidCircuit(f"k_coupling must lie in [0, 1), got {self.k_coupling}")
        if not (self.omega_A > 0 and self.omega_f > 0):
            raise InvalidCircuit("omega_A and omega_f must be positive")
        if self.omega_A == self.omega_f:
            raise DispersiveViolation("omega_A == omega_f: zero detuning has no dispersive limit")


@dataclass(frozen=True)
class BathSpec:
    """抵抗器(熱浴)の値: R [Ω], omega_c [rad/s], T [K]"""
    R: float
    omega_c: float = 1e12
    T: float = 0.0

    def __post_init__(self):
        if not self.R > 0:
            raise InvalidCircuit(f"R must be positive, got {self.R}")
        if not self.omega_c > 0:
            raise InvalidCircuit(f"omega_c must be positive, got {self.omega_c}")
        if not self.T >= 0:
            raise InvalidCircuit(f"T must be non-negative, got {self.T}")

    @classmethod
    def from_hz(cls, R: float, f_c: float, T: float = 0.0) -> 'BathSpec':
        """カットオフを通常周波数 [Hz] で与える場合"""
        return cls(R=R, omega_c=2 * math.pi * f_c, T=T)

    def at_temperature(self, T: float) -> 'BathSpec':
        return replace(self, T=T)


@dataclass(frozen=True)
class NormalizedParams:
    """omega_A で規格化したマスター方程式のパラメータ (omega_A' = 1)"""
    omega_f_prime: float
    g_f_prime: float
    gamma_prime: float
    n_bar: float

    def __post_init__(self):
        if self.omega_f_prime <= 0:
            raise InvalidCircuit(f"omega_f_prime must be positive, got {self.omega_f_prime}")
        if self.omega_f_prime == 1.0:
            raise DispersiveViolation("zero detuning (omega_f_prime == 1)")
        if self.gamma_prime < 0:
            raise InvalidCircuit(f"gamma_prime must be non-negative, got {self.gamma_prime}")
        if self.n_bar < 0:
            raise InvalidCircuit(f"n_bar must be non-negative, got {self.n_bar}")
        if abs(self.lambda_disp) >= 1:
            raise DispersiveViolation(f"|lambda| = {abs(self.lambda_disp):.4g} >= 1, not dispersive")

    @property
    def delta_prime(self) -> float:
        # 符号付き離調 Δ = ω_A - ω_f (固有エネルギーの閉形式と整合する符号)
        return 1.0 - self.omega_f_prime

    @property
    def lambda_disp(self) -> float:
        return self.g_f_prime / self.delta_prime

    @property
    def dispersive_shift(self) -> float:
        """光子1個あたりの周波数シフトの半分 g_f'λ"""
        return self.g_f_prime * self.lambda_disp

    def with_overrides(self, **changes) -> 'NormalizedParams':
        return replace(self, **changes)


@dataclass(frozen=True)
class DerivedParams:
    """回路から導出した定数 (SI) とその規格化値"""
    D: float
    L_f: float
    M: float
    g_f: float
    mu: float
    chi: float
    alpha: float
    gamma: float
    n_bar: float
    lambda_disp: float
    Delta: float
    omega_A: float
    omega_f: float

    @property
    def g_f_prime(self) -> float:
        return self.g_f / self.omega_A

    @property
    def gamma_prime(self) -> float:
        return self.gamma / self.omega_A

    @property
    def omega_f_prime(self) -> float:
        return self.omega_f / self.omega_A

    @property
    def delta_prime(self) -> float:
        return self.Delta / self.omega_A

    @property
    def dispersive_shift(self) -> float:
        return self.g_f_prime * self.lambda_disp

    def normalized(self) -> NormalizedParams:
        return NormalizedParams(
            omega_f_prime=self.omega_f_prime,
            g_f_prime=self.g_f_prime,
            gamma_prime=self.gamma_prime,
            n_bar=self.n_bar,
        )

    def as_dict(self) -> Dict[str, float]:
        report = asdict(self)
        report.update({
            'g_f_over_2pi_hz': self.g_f / (2 * math.pi),
            'gamma_over_2pi_hz': self.gamma / (2 * math.pi),
            'g_f_prime': self.g_f_prime,
            'gamma_prime': self.gamma_prime,
            'omega_f_prime': self.omega_f_prime,
            'delta_prime': self.delta_prime,
            'dispersive_shift_prime': self.dispersive_shift,
        })
        return report


@dataclass(frozen=True)
class BathMode:
    omega: float
    L: float
    C: float
    h: float


@dataclass(frozen=True)
class BathModes:
    delta_omega: float
    modes: Tuple[BathMode, ...]

    def omegas(self) -> np.ndarray:
        return np.array([m.omega for m in self.modes])

    def couplings(self) -> np.ndarray:
        return np.array([m.h for m in self.modes])


def bose_einstein(omega: ArrayLike, T: float) -> ArrayLike:
    """ボース・アインシュタイン分布 n̄ = 1/(exp(ħω/k_B T) - 1), T = 0 で厳密に 0"""
    if T == 0:
        return np.zeros_like(omega, dtype=float) if isinstance(omega, np.ndarray) else 0.0
    x = HBAR * np.asarray(omega, dtype=float) / (K_B * T)
    n_bar = 1.0 / np.expm1(x)
    return n_bar if isinstance(omega, np.ndarray) else float(n_bar)


def resistor_impedance(omega: ArrayLike, bath: BathSpec) -> Union[complex, np.ndarray]:
    """オーミック抵抗のインピーダンス Z_R(ω)"""
    w = np.asarray(omega, dtype=float)
    wc = bath.omega_c
    denom = wc ** 2 + w ** 2
    z = bath.R * wc ** 2 / denom + 1j * bath.R * w * wc / denom
    return z if isinstance(omega, np.ndarray) else complex(z)


def spectral_density(omega: ArrayLike, params: DerivedParams, bath: BathSpec) -> ArrayLike:
    """浴のスペクトル密度 J(ω) = χ ω_c² / (π ω (ω_c² + ω²))"""
    w = np.asarray(omega, dtype=float)
    if np.any(w <= 0):
        raise ValueError("spectral density is only defined for omega > 0")
    wc = bath.omega_c
    j = params.chi * wc ** 2 / (np.pi * w * (wc ** 2 + w ** 2))
    return j if isinstance(omega, np.ndarray) else float(j)


def derive_params(circuit: CircuitSpec, bath: BathSpec) -> DerivedParams:
    """回路値からマスター方程式の定数を計算する"""
    C_A, C_f, C_g = circuit.C_A, circuit.C_f, circuit.C_g
    w_A, w_f = circuit.omega_A, circuit.omega_f

    D = C_A * C_f + C_f * C_g + C_g * C_A
    if D <= 0:
        raise InvalidCircuit(f"capacitance determinant D = {D} is not positive")

    L_f = 1.0 / (C_f * w_f ** 2)
    M = circuit.k_coupling * math.sqrt(circuit.L_L * L_f)
    alpha = M / circuit.L_L

    g_f = 0.5 * C_g * math.sqrt(w_A * w_f / ((C_f + C_g) * (C_A + C_g)))
    mu = math.sqrt(HBAR * (C_A + C_g) / (2 * D * w_f))
    chi = bath.R * mu ** 2 / (HBAR * L_f ** 2)

    Delta = w_A - w_f
    lambda_disp = g_f / Delta
    if abs(lambda_disp) >= 1:
        raise DispersiveViolation(f"|lambda| = g_f/|Delta| = {abs(lambda_disp):.4g} >= 1")
    if abs(lambda_disp) > DISPERSIVE_WARN_LAMBDA:
        logger.warning(f"Dispersive approximation questionable: |lambda| = {abs(lambda_disp):.4g} > {DISPERSIVE_WARN_LAMBDA}")
    if bath.omega_c < CUTOFF_WARN_RATIO * w_f:
        logger.warning(f"Cutoff omega_c = {bath.omega_c:.4g} rad/s is not >> omega_f = {w_f:.4g} rad/s; ohmic form may be inaccurate")

    params = DerivedParams(
        D=D, L_f=L_f, M=M, g_f=g_f, mu=mu, chi=chi, alpha=alpha,
        gamma=0.0, n_bar=bose_einstein(w_f, bath.T),
        lambda_disp=lambda_disp, Delta=Delta, omega_A=w_A, omega_f=w_f,
    )
    # γ = 2π α² J(ω_f)
    gamma = 2 * math.pi * alpha ** 2 * spectral_density(w_f, params, bath)
    params = replace(params, gamma=gamma)

    logger.debug(f"Derived g_f/2pi = {g_f / (2 * math.pi):.6g} Hz, gamma' = {params.gamma_prime:.6g}, n_bar = {params.n_bar:.6g}")
    return params


def discretize_bath(bath: BathSpec, params: DerivedParams, delta_omega: float, count: int) -> BathModes:
    """Caldeira-Leggett 離散化: ω_k = kΔω の LC モードと結合 h_k"""
    if delta_omega <= 0:
        raise ValueError("delta_omega must be positive")
    if count < 1:
        raise ValueError("count must be at least 1")

    omegas = delta_omega * np.arange(1, count + 1, dtype=float)
    re_z = resistor_impedance(omegas, bath).real
    L_k = 2 * delta_omega * re_z / (np.pi * omegas ** 2)
    C_k = np.pi / (2 * delta_omega * re_z)
    wc = bath.omega_c
    h_k = np.sqrt(HBAR * delta_omega * bath.R * wc ** 2 / (np.pi * omegas * (wc ** 2 + omegas ** 2))) * params.mu / params.L_f

    modes = tuple(BathMode(float(w), float(l), float(c), float(h)) for w, l, c, h in zip(omegas, L_k, C_k, h_k))
    return BathModes(delta_omega=delta_omega, modes=modes)


def bath_convergence(bath: BathSpec, params: DerivedParams, delta_omegas: Sequence[float],
                     band: Optional[Tuple[float, float]] = None) -> List[Dict[str, float]]:
    """各 Δω について |h_k|²/(ħ²Δω) と J(ω_k) の最大相対誤差を表にする"""
    lo, hi = band if band is not None else (params.omega_f / 2, 2 * params.omega_f)
    rows = []
    for dw in delta_omegas:
        count = int(math.floor(hi / dw))
        if count < 1:
            logger.warning(f"delta_omega = {dw:.4g} is coarser than the band edge {hi:.4g}, skipped")
            continue
        modes = discretize_bath(bath, params, dw, count)
        omegas = modes.omegas()
        mask = (omegas >= lo) & (omegas <= hi)
        if not np.any(mask):
            logger.warning(f"No bath mode falls inside [{lo:.4g}, {hi:.4g}] for delta_omega = {dw:.4g}")
            continue
        sampled = modes.couplings()[mask] ** 2 / (HBAR ** 2 * dw)
        exact = spectral_density(omegas[mask], params, bath)
        rows.append({
            'delta_omega': float(dw),
            'n_modes': int(mask.sum()),
            'max_rel_dev': float(np.max(np.abs(sampled - exact) / exact)),
            're_z_at_omega_c': float(resistor_impedance(bath.omega_c, bath).real),
        })
    return rows
