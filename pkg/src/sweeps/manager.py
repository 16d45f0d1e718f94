from typing import Any, Dict, List

PENDING = 'pending'
DONE = 'done'
FAILED = 'failed'


class SweepManager:
    """掃引の各グリッド点の状態 (pending / done / failed) を管理する"""

    def __init__(self):
        self.points = {}

    def add_point(self, index: int, value: float) -> bool:
        if index not in self.points:
            self.points[index] = {'status': PENDING, 'value': value, 'row': None, 'error': None}
            return True
        return False

    def mark_done(self, index: int, row: Dict[str, Any]) -> bool:
        if index in self.points:
            self.points[index].update(status=DONE, row=row)
            return True
        return False

    def mark_failed(self, index: int, reason: str) -> bool:
        if index in self.points:
            self.points[index].update(status=FAILED, error=reason)
            return True
        return False

    def failed(self) -> List[int]:
        return sorted(i for i, p in self.points.items() if p['status'] == FAILED)

    def summary(self) -> Dict[str, int]:
        counts = {PENDING: 0, DONE: 0, FAILED: 0}
        for point in self.points.values():
            counts[point['status']] += 1
        return counts
