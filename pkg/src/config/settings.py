import json
import math
from configparser import ConfigParser
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from core.circuit import BathSpec, CircuitSpec
from core.errors import ConfigurationError, SimulationError
from utils.helper import parse_complex, parse_float_list

# INI のセクション名 -> RunConfig のフィールド名
SECTIONS = {
    'CIRCUIT': 'circuit',
    'BATH': 'bath',
    'SIMULATION': 'simulation',
    'SWEEP': 'sweep',
    'INITIAL': 'initial',
    'BATHCHECK': 'bathcheck',
}


def _convert_hz(values: Any) -> Any:
    """キー名が _hz で終わる値を角周波数 (rad/s) に変換する"""
    if not isinstance(values, dict):
        return values
    converted = dict(values)
    for key in list(converted):
        if not key.endswith('_hz'):
            continue
        base = key[:-3]
        if base in converted:
            raise ValueError(f"both '{base}' and '{key}' are given")
        converted[base] = 2 * math.pi * float(converted.pop(key))
    return converted


class CircuitConfig(BaseModel):
    model_config = ConfigDict(extra='forbid')

    C_A: float = Field(gt=0)
    C_f: float = Field(gt=0)
    C_g: float = Field(ge=0)
    L_L: float = Field(gt=0)
    k_coupling: float = Field(ge=0, lt=1)
    omega_A: float = Field(gt=0)
    omega_f: float = Field(gt=0)

    @model_validator(mode='before')
    @classmethod
    def convert_hz(cls, values: Any) -> Any:
        return _convert_hz(values)

    def to_spec(self) -> CircuitSpec:
        return CircuitSpec(**self.model_dump())


class BathConfig(BaseModel):
    model_config = ConfigDict(extra='forbid')

    R: float = Field(gt=0)
    omega_c: float = Field(default=1e12, gt=0)
    T: float = Field(default=0.0, ge=0)

    @model_validator(mode='before')
    @classmethod
    def convert_hz(cls, values: Any) -> Any:
        return _convert_hz(values)

    def to_spec(self) -> BathSpec:
        return BathSpec(**self.model_dump())


class SimulationConfig(BaseModel):
    model_config = ConfigDict(extra='forbid')

    S: Optional[int] = Field(default=None, ge=2)
    p_max: float = Field(default=1e-7, gt=0, lt=1)
    t_max_omegaA: float = Field(default=1e5, gt=0)
    n_times: int = Field(default=200, ge=3)
    gamma_b: float = Field(default=5026.0, ge=0)
    jobs: int = Field(default=1, ge=1)
    seed: Optional[int] = None
    # 回路から導出した値を上書きする規格化パラメータ
    gf_prime: Optional[float] = Field(default=None, ge=0)
    gamma_prime: Optional[float] = Field(default=None, ge=0)


class SweepConfig(BaseModel):
    model_config = ConfigDict(extra='forbid')

    variable: Literal['T', 'gamma_prime', 'gf_prime']
    grid: Literal['log', 'linear'] = 'log'
    min: float = Field(ge=0)
    max: float = Field(ge=0)
    points: int = Field(ge=1)

    @model_validator(mode='after')
    def check_range(self) -> 'SweepConfig':
        if self.max < self.min:
            raise ValueError(f"max ({self.max}) is smaller than min ({self.min})")
        if self.grid == 'log' and self.min <= 0:
            raise ValueError("log grid needs min > 0")
        return self


class InitialConfig(BaseModel):
    model_config = ConfigDict(extra='forbid')

    qubit: Union[Literal['plus', 'g', 'e'], List[float]] = 'plus'
    resonator: Literal['thermal', 'coherent'] = 'thermal'
    alpha: complex = 0j

    @field_validator('qubit', mode='before')
    @classmethod
    def parse_qubit(cls, value: Any) -> Any:
        # INI ではブロッホベクトルを "x, y, z" と書く
        if isinstance(value, str) and ',' in value:
            return parse_float_list(value)
        return value

    @field_validator('qubit')
    @classmethod
    def check_bloch(cls, value: Any) -> Any:
        if isinstance(value, list):
            if len(value) != 3:
                raise ValueError("custom qubit state needs a Bloch vector of length 3")
            if sum(v * v for v in value) > 1 + 1e-12:
                raise ValueError("Bloch vector lies outside the unit ball")
        return value

    @field_validator('alpha', mode='before')
    @classmethod
    def parse_alpha(cls, value: Any) -> complex:
        return parse_complex(value)


class BathCheckConfig(BaseModel):
    model_config = ConfigDict(extra='forbid')

    delta_omegas: List[float] = Field(min_length=1)

    @field_validator('delta_omegas', mode='before')
    @classmethod
    def parse_list(cls, value: Any) -> Any:
        if isinstance(value, str):
            return parse_float_list(value)
        return value

    @field_validator('delta_omegas')
    @classmethod
    def check_positive(cls, value: List[float]) -> List[float]:
        if any(v <= 0 for v in value):
            raise ValueError("delta_omegas must be positive")
        return value


class RunConfig(BaseModel):
    """1回の実行に必要なすべての設定"""
    model_config = ConfigDict(extra='forbid')

    circuit: CircuitConfig
    bath: BathConfig
    simulation: SimulationConfig = Field(default_factory=SimulationConfig)
    sweep: Optional[SweepConfig] = None
    initial: InitialConfig = Field(default_factory=InitialConfig)
    bathcheck: Optional[BathCheckConfig] = None

    @model_validator(mode='after')
    def check_physics(self) -> 'RunConfig':
        # 回路の不変条件をここで再確認する
        try:
            self.circuit.to_spec()
            self.bath.to_spec()
        except SimulationError as e:
            raise ValueError(str(e)) from e
        return self

    def echo(self) -> Dict[str, Any]:
        """--config に戻せる形の設定"""
        return self.model_dump(mode='json', exclude_none=True)


class Settings:
    """INI または JSON の設定ファイルを読み込む"""

    def __init__(self, config_file='config/config.ini'):
        self.path = Path(config_file)
        if not self.path.is_file():
            raise ConfigurationError(f"設定ファイル {self.path} が見つかりません")
        if self.path.suffix.lower() == '.json':
            self.raw = self._read_json()
        else:
            self.raw = self._read_ini()

    def _read_ini(self) -> Dict[str, Dict[str, str]]:
        self.config = ConfigParser(interpolation=None)  # 文字列補間を無効化
        self.config.optionxform = str  # C_A などの大文字を保持
        self.config.read(self.path)
        raw = {}
        for section in self.config.sections():
            if section not in SECTIONS:
                raise ConfigurationError(f"unknown section [{section}] in {self.path}")
            raw[SECTIONS[section]] = dict(self.config.items(section))
        return raw

    def _read_json(self) -> Dict[str, Any]:
        with open(self.path, encoding='utf-8') as f:
            raw = json.load(f)
        if not isinstance(raw, dict):
            raise ConfigurationError(f"{self.path} must hold a JSON object")
        # derive の出力をそのまま渡された場合は config ブロックを使う
        if 'circuit' not in raw and isinstance(raw.get('config'), dict):
            raw = raw['config']
        return raw

    @property
    def run_config(self) -> RunConfig:
        return RunConfig.model_validate(self.raw)

    def with_overrides(self, **overrides) -> RunConfig:
        """CLI フラグ (--jobs, --gamma-b, --seed) でシミュレーション設定を上書きする"""
        raw = json.loads(json.dumps(self.raw))
        simulation = raw.setdefault('simulation', {})
        for key, value in overrides.items():
            if value is not None:
                simulation[key] = value
        return RunConfig.model_validate(raw)
