import json
import logging
import sys
from contextlib import contextmanager
from typing import Any, Dict, Iterator, Optional, TextIO

from core.simulator import BATHCHECK_COLUMNS, RATE_COLUMNS, TRAJECTORY_COLUMNS, Simulator
from utils.helper import with_suffix, write_csv


@contextmanager
def open_output(path: Optional[str]) -> Iterator[TextIO]:
    """--out があればファイル、なければ stdout"""
    if path is None:
        yield sys.stdout
    else:
        with open(path, 'w', encoding='utf-8', newline='') as f:
            yield f


def write_json(report: Dict[str, Any], path: Optional[str]) -> None:
    with open_output(path) as stream:
        json.dump(report, stream, indent=2)
        stream.write('\n')


class CommandProtocol:
    """サブコマンド名 -> 処理 の対応表"""

    def __init__(self, simulator: Simulator):
        self.simulator = simulator
        self.logger = logging.getLogger('cli')
        self.methods = {
            "derive": self.derive,
            "evolve": self.evolve,
            "rates": self.rates,
            "bathcheck": self.bathcheck,
        }

    def derive(self, args) -> int:
        write_json(self.simulator.derive(), args.out)
        return 0

    def evolve(self, args) -> int:
        trajectory, report = self.simulator.evolve()
        with open_output(args.out) as stream:
            write_csv(trajectory.rows(), TRAJECTORY_COLUMNS, stream)

        sidecar = getattr(args, 'sidecar', None) or with_suffix(args.out, '.json')
        if sidecar is not None:
            write_json(report, sidecar)
        else:
            self.logger.info(f"Evolve report: {json.dumps(report)}")

        if getattr(args, 'dump_block', None):
            write_json(self.simulator.block_dump(), args.dump_block)
        if getattr(args, 'dump_modes', None):
            with open_output(args.dump_modes) as stream:
                write_csv(self.simulator.mode_dump(), ('d', 're_lambda', 'im_lambda', 'overlap_sigma_x_abs'), stream)
        return 0

    def rates(self, args) -> int:
        rows = self.simulator.rates()
        with open_output(args.out) as stream:
            write_csv(rows, RATE_COLUMNS, stream)
        # 全点が失敗した場合のみ数値エラーとして終了する
        if rows and all(row['error'] for row in rows):
            self.logger.error("Every sweep point failed")
            return 3
        return 0

    def bathcheck(self, args) -> int:
        rows = self.simulator.bathcheck(getattr(args, 'delta_omega', None))
        with open_output(args.out) as stream:
            write_csv(rows, BATHCHECK_COLUMNS, stream)
        return 0

    def handle_command(self, command: str, args) -> int:
        if command in self.methods:
            return self.methods[command](args)
        self.logger.error(f"Command not found: {command}")
        return 2
