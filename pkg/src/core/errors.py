class SimulationError(Exception):
    """シミュレーション全体の基底例外"""


class ConfigurationError(SimulationError):
    """入力値の検証エラー (CLI終了コード 2)"""
    exit_code = 2


class NumericalError(SimulationError):
    """数値計算の失敗 (CLI終了コード 3)"""
    exit_code = 3


class InvalidCircuit(ConfigurationError):
    pass


class DispersiveViolation(ConfigurationError):
    pass


class DegenerateGrouping(NumericalError):
    pass


class SymmetryViolation(NumericalError):
    pass


class DefectiveMatrix(NumericalError):
    pass


class EmptyModeSet(NumericalError):
    pass


class TruncationLoss(NumericalError):
    pass


class NonExponential(NumericalError):
    pass
