import asyncio
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from sweeps.manager import SweepManager
from .circuit import NormalizedParams, bath_convergence, derive_params
from .dynamics import (
    EARLY_WINDOW,
    Trajectory,
    coherent_state,
    coherent_truncation,
    fit_decay_rate,
    initial_state,
    propagate,
    strong_dispersive_estimate,
    t2_time,
    thermal_state,
    two_phase_fit,
    zeno_estimate,
)
from .errors import DefectiveMatrix, EmptyModeSet, NonExponential, SimulationError
from .liouville import LiouvillianBlock, build_liouvillian, liouvillian_block, number_superoperator, split_blocks, vectorized_pauli
from .operators import HilbertSpec, dispersive_hamiltonian, occupancy_truncation
from .spectral import (
    ModeSet,
    coherence_modes,
    decoherence_rates,
    eig_general,
    mode_coefficients,
    mode_dump,
    mode_projections,
    reconstruct_coherence,
)

TRAJECTORY_COLUMNS = ('t_omegaA', 'sx', 'sy', 'sz', 'n_res', 'coherence')
RATE_COLUMNS = (
    'sweep_var', 'gamma_prime', 'gf_prime', 'T_K', 'n_bar', 'Gamma2R', 'Gamma2R_unfiltered',
    'gamma_nbar_estimate', 'zeno_estimate', 'T2_s', 'S', 'error',
)
BATHCHECK_COLUMNS = ('delta_omega', 'n_modes', 'max_rel_dev', 're_z_at_omega_c')
# 包絡線と Γ_{2,R} の一致判定
FIT_AGREEMENT = 0.05
# 掃引変数 -> CSV 列
SWEEP_COLUMNS = {'T': 'T_K', 'gamma_prime': 'gamma_prime', 'gf_prime': 'gf_prime'}


class Simulator:
    def __init__(self, config):
        self.config = config
        self.circuit = config.circuit.to_spec()
        self.bath = config.bath.to_spec()
        self.simulation = config.simulation
        self.initial = config.initial
        self.sweeps = SweepManager()

        # ロギング設定
        self.logger = logging.getLogger('simulator')

        # ダンプ用に最後の d = 1 ブロックを保持する
        self.last_block: Optional[LiouvillianBlock] = None
        self.last_modes: Optional[ModeSet] = None
        self.last_spec: Optional[HilbertSpec] = None

    def derived(self, T: Optional[float] = None):
        bath = self.bath if T is None else self.bath.at_temperature(T)
        return derive_params(self.circuit, bath)

    def normalized_params(self, T: Optional[float] = None) -> NormalizedParams:
        """回路から導出した規格化パラメータ (設定の上書きを反映)"""
        params = self.derived(T).normalized()
        overrides = {}
        if self.simulation.gf_prime is not None:
            overrides['g_f_prime'] = self.simulation.gf_prime
        if self.simulation.gamma_prime is not None:
            overrides['gamma_prime'] = self.simulation.gamma_prime
        return params.with_overrides(**overrides) if overrides else params

    def select_truncation(self, n_bar: float, coherent: bool = False) -> int:
        auto = occupancy_truncation(n_bar, self.simulation.p_max)
        if self.simulation.S is None:
            S = auto
            if coherent:
                S = max(S, coherent_truncation(self.initial.alpha))
        else:
            S = self.simulation.S
            if S < auto:
                self.logger.warning(f"Explicit S = {S} violates the occupancy bound {self.simulation.p_max:g} (needs S >= {auto})")
        self.logger.debug(f"Resonator truncation S = {S} (n_bar = {n_bar:.6g})")
        return S

    def derive(self) -> Dict[str, Any]:
        """回路から導出した定数の報告"""
        derived = self.derived()
        params = self.normalized_params()
        report = {
            'config': self.config.echo(),
            'derived': derived.as_dict(),
            'normalized': {
                'omega_f_prime': params.omega_f_prime,
                'g_f_prime': params.g_f_prime,
                'gamma_prime': params.gamma_prime,
                'n_bar': params.n_bar,
                'delta_prime': params.delta_prime,
                'lambda_disp': params.lambda_disp,
                'dispersive_shift': params.dispersive_shift,
            },
            'truncation_S': self.select_truncation(params.n_bar),
        }
        self.logger.info(f"Derived g_f/2pi = {report['derived']['g_f_over_2pi_hz']:.6g} Hz, gamma' = {params.gamma_prime:.6g}")
        return report

    def evolve(self) -> Tuple[Trajectory, Dict[str, Any]]:
        """時間発展とスペクトル分解による検算"""
        params = self.normalized_params()
        coherent = self.initial.resonator == 'coherent'
        S = self.select_truncation(params.n_bar, coherent=coherent)
        spec = HilbertSpec(S)

        if coherent:
            resonator = coherent_state(self.initial.alpha, S)
        else:
            resonator = thermal_state(params.n_bar, S)
        state = initial_state(self.initial.qubit, resonator)

        H = dispersive_hamiltonian(params, spec)
        L = build_liouvillian(H, params.gamma_prime, params.n_bar, spec)
        times = np.linspace(0.0, self.simulation.t_max_omegaA, self.simulation.n_times)
        self.logger.info(f"Evolving S = {S} (dim {spec.dim}) up to t = {times[-1]:.6g}")
        trajectory = propagate(L, state, times)

        report: Dict[str, Any] = {
            'S': S,
            'n_bar': params.n_bar,
            'gamma_prime': params.gamma_prime,
            'gf_prime': params.g_f_prime,
            'seed': self.simulation.seed,
            'sigma_z_drift': float(np.max(np.abs(trajectory.sz - trajectory.sz[0]))),
            'trace_drift': float(np.max(np.abs(trajectory.trace - 1.0))),
        }
        report.update(self._spectral_check(L, spec, state.rho, trajectory))
        report.update(self._fit_report(trajectory, params, report.get('Gamma2R')))
        if coherent:
            try:
                report['two_phase'] = two_phase_fit(trajectory, params.gamma_prime)
            except (NonExponential, ValueError) as e:
                self.logger.warning(f"Two-phase fit failed: {e}")
                report['two_phase'] = {'error': str(e)}
        return trajectory, report

    def _spectral_check(self, L, spec: HilbertSpec, rho0, trajectory: Trajectory) -> Dict[str, Any]:
        try:
            blocks = split_blocks(L, number_superoperator(spec), spec)
            block = next(b for b in blocks if b.d == 1)
            modes = eig_general(block)
        except DefectiveMatrix as e:
            # 欠陥行列ならフィットだけで判定する
            self.logger.warning(f"Spectral cross-check skipped: {e}")
            return {'spectral_error': str(e)}
        self.last_block, self.last_modes, self.last_spec = block, modes, spec

        sx = vectorized_pauli('x', spec)
        c = mode_coefficients(rho0, modes)
        p = mode_projections(sx, modes)
        reconstructed = reconstruct_coherence(c, p, modes, trajectory.times)
        report = {'reconstruction_max_abs_dev': float(np.max(np.abs(reconstructed - trajectory.sx)))}
        try:
            filtered, literal = decoherence_rates(modes, sx)
            report.update(Gamma2R=filtered, Gamma2R_unfiltered=literal)
        except EmptyModeSet as e:
            self.logger.warning(f"No sigma_x-coupled mode: {e}")
            report['spectral_error'] = str(e)
        return report

    def _fit_report(self, trajectory: Trajectory, params: NormalizedParams, gamma_2r: Optional[float]) -> Dict[str, Any]:
        end = trajectory.times[-1]
        start = EARLY_WINDOW / params.gamma_prime if params.gamma_prime > 0 else 0.0
        if start >= 0.5 * end:
            start = 0.0
        report: Dict[str, Any] = {'fit_window': [start, end]}
        try:
            rate = fit_decay_rate(trajectory, (start, end))
        except (NonExponential, ValueError) as e:
            self.logger.warning(f"Coherence fit failed: {e}")
            report['fit_error'] = str(e)
            return report
        report['fitted_rate'] = rate
        if gamma_2r is not None:
            if gamma_2r > 1e-10:
                agreement = abs(rate - gamma_2r) / gamma_2r <= FIT_AGREEMENT
            else:
                agreement = abs(rate) <= 1e-8
            report['agreement'] = bool(agreement)
            self.logger.info(f"Fitted rate {rate:.6g} vs Gamma2R {gamma_2r:.6g} (agreement: {agreement})")
        return report

    def sweep_grid(self) -> np.ndarray:
        sweep = self.config.sweep
        if sweep is None:
            return np.array([self.bath.T])
        if sweep.grid == 'log':
            return np.geomspace(sweep.min, sweep.max, sweep.points)
        return np.linspace(sweep.min, sweep.max, sweep.points)

    @property
    def sweep_variable(self) -> str:
        return 'T' if self.config.sweep is None else self.config.sweep.variable

    def point_params(self, value: float) -> Tuple[NormalizedParams, float]:
        variable = self.sweep_variable
        T = value if variable == 'T' else self.bath.T
        params = self.normalized_params(T)
        if variable == 'gamma_prime':
            params = params.with_overrides(gamma_prime=value)
        elif variable == 'gf_prime':
            params = params.with_overrides(g_f_prime=value)
        return params, T

    def rate_point(self, value: float) -> Dict[str, Any]:
        """1つのグリッド点の Γ_{2,R} を d = 1 ブロックから求める"""
        params, T = self.point_params(value)
        S = self.select_truncation(params.n_bar)
        spec = HilbertSpec(S)
        modes = coherence_modes(params, params.gamma_prime, params.n_bar, spec)
        filtered, literal = decoherence_rates(modes, vectorized_pauli('x', spec))
        return {
            'sweep_var': self.sweep_variable,
            'gamma_prime': params.gamma_prime,
            'gf_prime': params.g_f_prime,
            'T_K': T,
            'n_bar': params.n_bar,
            'Gamma2R': filtered,
            'Gamma2R_unfiltered': literal,
            'gamma_nbar_estimate': strong_dispersive_estimate(params.gamma_prime, params.n_bar),
            'zeno_estimate': zeno_estimate(params.gamma_prime, params.dispersive_shift, params.n_bar),
            'T2_s': t2_time(filtered, self.circuit.omega_A, self.simulation.gamma_b),
            'S': S,
            'error': None,
        }

    def _failed_row(self, value: float, reason: str) -> Dict[str, Any]:
        row = {column: None for column in RATE_COLUMNS}
        row['sweep_var'] = self.sweep_variable
        row[SWEEP_COLUMNS[self.sweep_variable]] = value
        row['error'] = reason
        return row

    async def run_rates(self) -> List[Dict[str, Any]]:
        """掃引点をワーカープールで並列に計算し、グリッド順に返す"""
        grid = self.sweep_grid()
        jobs = self.simulation.jobs
        # 前回の掃引の記録は持ち越さない
        self.sweeps = SweepManager()
        for index, value in enumerate(grid):
            self.sweeps.add_point(index, float(value))
        self.logger.info(f"Starting {self.sweep_variable} sweep over {len(grid)} points with {jobs} workers")

        semaphore = asyncio.Semaphore(jobs)
        loop = asyncio.get_running_loop()

        with ThreadPoolExecutor(max_workers=jobs) as executor:
            async def run_point(index: int, value: float) -> Dict[str, Any]:
                async with semaphore:
                    try:
                        row = await loop.run_in_executor(executor, self.rate_point, value)
                        self.sweeps.mark_done(index, row)
                        self.logger.debug(f"Point {index} ({value:.6g}) done: Gamma2R = {row['Gamma2R']:.6g}")
                        return row
                    except (SimulationError, ValueError, np.linalg.LinAlgError) as e:
                        self.logger.error(f"Sweep point {index} ({value:.6g}) failed: {e}")
                        self.sweeps.mark_failed(index, str(e))
                        return self._failed_row(value, str(e))

            rows = await asyncio.gather(*(run_point(i, float(v)) for i, v in enumerate(grid)))

        summary = self.sweeps.summary()
        self.logger.info(f"Sweep finished: {summary['done']} done, {summary['failed']} failed")
        if summary['failed']:
            self.logger.warning(f"Failed sweep points: {self.sweeps.failed()}")
        return list(rows)

    def rates(self) -> List[Dict[str, Any]]:
        return asyncio.run(self.run_rates())

    def bathcheck(self, delta_omegas: Optional[Sequence[float]] = None) -> List[Dict[str, float]]:
        """Caldeira-Leggett 離散化の収束表"""
        if delta_omegas is None:
            if self.config.bathcheck is None:
                raise ValueError("no delta_omega values given")
            delta_omegas = self.config.bathcheck.delta_omegas
        return bath_convergence(self.bath, self.derived(), delta_omegas)

    def block_dump(self) -> Dict[str, Any]:
        if self.last_block is None:
            params = self.normalized_params()
            spec = HilbertSpec(self.select_truncation(params.n_bar))
            H = dispersive_hamiltonian(params, spec)
            self.last_block = liouvillian_block(1, H, params.gamma_prime, params.n_bar, spec)
        return self.last_block.to_json()

    def mode_dump(self) -> List[Dict[str, float]]:
        if self.last_modes is None:
            raise ValueError("no mode set available; run evolve first")
        return mode_dump(self.last_modes, self.last_spec)
