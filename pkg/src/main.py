import argparse
import logging
import sys
from typing import List, Optional

from pydantic import ValidationError

from config.settings import Settings
from core.errors import ConfigurationError, NumericalError, SimulationError
from core.simulator import Simulator
from protocols.commands import CommandProtocol
from utils.helper import parse_float_list
from utils.logging import setup_logging

COMMANDS = ('derive', 'evolve', 'rates', 'bathcheck')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='ddq',
        description='Decoherence of a dispersively coupled transmon through a resistive drive line',
    )
    parser.add_argument('command', choices=COMMANDS)
    parser.add_argument('--config', default='config/config.ini', help='INI or JSON configuration file')
    parser.add_argument('--out', default=None, help='output file (default: stdout)')
    parser.add_argument('--jobs', type=int, default=None, help='worker count for sweeps')
    parser.add_argument('--gamma-b', type=float, default=None, help='background decay rate Gamma_B [1/s]')
    parser.add_argument('--seed', type=int, default=None, help='seed recorded for randomized fixtures')
    parser.add_argument('--delta-omega', type=parse_float_list, default=None,
                        help='comma separated bath discretization steps [rad/s] for bathcheck')
    parser.add_argument('--sidecar', default=None, help='JSON report path for evolve (default: <out>.json)')
    parser.add_argument('--dump-block', default=None, help='write the d = 1 Liouvillian block as JSON')
    parser.add_argument('--dump-modes', default=None, help='write the d = 1 eigenmodes as CSV')
    parser.add_argument('--log-dir', default='logs', help="log directory ('' disables the log file)")
    return parser


def format_validation_error(error: ValidationError) -> List[str]:
    """pydantic のエラーを field.path: message の行にする"""
    lines = []
    for item in error.errors():
        path = '.'.join(str(part) for part in item['loc']) or '<root>'
        lines.append(f"{path}: {item['msg']}")
    return lines


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_dir or None)
    logger = logging.getLogger('cli')

    try:
        # 設定読み込み
        settings = Settings(args.config)
        config = settings.with_overrides(jobs=args.jobs, gamma_b=args.gamma_b, seed=args.seed)
        logger.info(f"Configuration loaded from {args.config}")

        simulator = Simulator(config)
        return CommandProtocol(simulator).handle_command(args.command, args)
    except ValidationError as e:
        for line in format_validation_error(e):
            logger.error(f"設定エラー: {line}")
        return 2
    except ConfigurationError as e:
        logger.error(f"設定エラー: {e}")
        return e.exit_code
    except NumericalError as e:
        logger.error(f"数値エラー: {e}")
        return e.exit_code
    except SimulationError as e:
        logger.error(f"Simulation failed: {e}")
        return 3
    except ValueError as e:
        logger.error(f"入力エラー: {e}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
